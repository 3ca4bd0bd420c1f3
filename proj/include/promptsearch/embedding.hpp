#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace promptsearch {

// Unit-length embedding vector. Text and simulated images share this space.
using SemanticVector = Eigen::VectorXd;

struct EncoderConfig {
  int dim = 64;
  std::uint64_t encoder_seed = 1337;
};

// Whitespace-tokenized, lowercased prompt. Always holds at least one token.
struct Prompt {
  std::string raw;
  std::vector<std::string> tokens;

  static Prompt parse(std::string_view text);
  static Prompt from_tokens(std::vector<std::string> tokens);

  std::size_t length() const { return tokens.size(); }

  bool operator==(const Prompt& other) const { return tokens == other.tokens; }
};

// Immutable ordered token list. Tokens are unique, non-empty, lowercase
// ASCII letters.
class Dictionary {
 public:
  static Dictionary from_tokens(std::vector<std::string> tokens);
  static Dictionary load(const std::string& path);
  // `count` seeded random words with lengths in [min_len, max_len], plus any
  // extra tokens not already drawn.
  static Dictionary synthetic(std::size_t count, std::uint64_t seed,
                              std::size_t min_len, std::size_t max_len,
                              const std::vector<std::string>& extra = {});

  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  std::size_t max_token_length() const { return max_len_; }

  // Tokens of character length <= l, in dictionary order.
  std::vector<std::string> subset_max_len(std::size_t l) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_set<std::string> index_;
  std::size_t max_len_ = 0;
};

// FNV-1a over the UTF-8 bytes of `token`.
std::uint64_t hash_token(std::string_view token);

// Unit vector drawn from a SplitMix64 stream seeded with
// hash_token(token) XOR encoder_seed.
SemanticVector token_vector(std::string_view token, int dim,
                            std::uint64_t encoder_seed);

// Greedy left-to-right maximal-munch split of `word` into dictionary tokens.
// Runs of characters that match nothing are kept as residue pieces.
std::vector<std::string> segment_word(const std::string& word,
                                      const Dictionary& dict);

// Prompt embedding: normalized mean over words of the normalized mean of
// each word's piece vectors. Unknown words are segmented; residue pieces
// fall back to token_vector of the residue.
SemanticVector encode_prompt(const Prompt& p, const Dictionary& dict, int dim,
                             std::uint64_t encoder_seed);

// Cosine similarity mapped affinely onto [0, 1]: (cos + 1) / 2.
double cos_sim01(const SemanticVector& a, const SemanticVector& b);

// 1 - ||a - b|| / 2 for unit vectors; 1 iff a == b.
double l2_sim01(const SemanticVector& a, const SemanticVector& b);

// Divides by the L2 norm. Vectors already unit within 1e-12 pass through
// unchanged so repeated normalization is a fixed point.
SemanticVector normalize(const SemanticVector& v);

// Dictionary plus encoder parameters; the offline text encoder.
struct TextEncoder {
  const Dictionary* dict;
  EncoderConfig config;

  SemanticVector encode(const Prompt& p) const {
    return encode_prompt(p, *dict, config.dim, config.encoder_seed);
  }
};

}  // namespace promptsearch
