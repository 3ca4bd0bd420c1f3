#include "promptsearch/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "promptsearch/errors.hpp"
#include "promptsearch/rng.hpp"

namespace promptsearch {

namespace {

bool is_lower_alpha(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c >= 'a' && c <= 'z';
  });
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

Prompt Prompt::parse(std::string_view text) {
  Prompt p;
  p.raw = to_lower(text);
  std::string word;
  for (char c : p.raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!word.empty()) {
        p.tokens.push_back(word);
        word.clear();
      }
    } else {
      word.push_back(c);
    }
  }
  if (!word.empty()) p.tokens.push_back(word);
  if (p.tokens.empty()) throw std::invalid_argument("prompt has no tokens");
  return p;
}

Prompt Prompt::from_tokens(std::vector<std::string> tokens) {
  if (tokens.empty()) throw std::invalid_argument("prompt has no tokens");
  Prompt p;
  p.tokens = std::move(tokens);
  for (std::size_t i = 0; i < p.tokens.size(); ++i) {
    if (p.tokens[i].empty()) throw std::invalid_argument("empty prompt token");
    if (i) p.raw.push_back(' ');
    p.raw += p.tokens[i];
  }
  return p;
}

Dictionary Dictionary::from_tokens(std::vector<std::string> tokens) {
  Dictionary d;
  for (auto& t : tokens) {
    if (!is_lower_alpha(t))
      throw ConfigError("dictionary token must be lowercase ASCII letters: '" +
                        t + "'");
    if (!d.index_.insert(t).second)
      throw ConfigError("duplicate dictionary token: '" + t + "'");
    d.max_len_ = std::max(d.max_len_, t.size());
    d.tokens_.push_back(std::move(t));
  }
  if (d.tokens_.empty()) throw ConfigError("dictionary is empty");
  return d;
}

Dictionary Dictionary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dictionary file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

Dictionary Dictionary::synthetic(std::size_t count, std::uint64_t seed,
                                 std::size_t min_len, std::size_t max_len,
                                 const std::vector<std::string>& extra) {
  if (count == 0 || min_len == 0 || max_len < min_len)
    throw ConfigError("invalid synthetic dictionary parameters");
  SplitMix64 rng(seed);
  std::unordered_set<std::string> seen;
  std::vector<std::string> tokens;
  tokens.reserve(count + extra.size());
  while (tokens.size() < count) {
    std::size_t len = min_len + rng.next_below(max_len - min_len + 1);
    std::string word(len, 'a');
    for (auto& c : word) c = static_cast<char>('a' + rng.next_below(26));
    if (seen.insert(word).second) tokens.push_back(std::move(word));
  }
  for (const auto& t : extra) {
    if (seen.insert(t).second) tokens.push_back(t);
  }
  return from_tokens(std::move(tokens));
}

bool Dictionary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

std::vector<std::string> Dictionary::subset_max_len(std::size_t l) const {
  std::vector<std::string> out;
  for (const auto& t : tokens_)
    if (t.size() <= l) out.push_back(t);
  return out;
}

std::uint64_t hash_token(std::string_view token) {
  if (token.empty()) throw std::invalid_argument("hash_token: empty token");
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

SemanticVector normalize(const SemanticVector& v) {
  double n = v.norm();
  if (n == 0.0) throw std::invalid_argument("cannot normalize zero vector");
  if (std::abs(n - 1.0) <= 1e-12) return v;
  return v / n;
}

SemanticVector token_vector(std::string_view token, int dim,
                            std::uint64_t encoder_seed) {
  if (dim <= 0) throw std::invalid_argument("token_vector: dim must be >= 1");
  SplitMix64 rng(hash_token(token) ^ encoder_seed);
  SemanticVector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.next_symmetric();
  return v / v.norm();
}

std::vector<std::string> segment_word(const std::string& word,
                                      const Dictionary& dict) {
  std::vector<std::string> pieces;
  const std::size_t npos = std::string::npos;
  std::size_t i = 0;
  std::size_t residue_start = npos;
  while (i < word.size()) {
    std::size_t match = 0;
    std::size_t cap = std::min(word.size() - i, dict.max_token_length());
    for (std::size_t len = cap; len >= 1; --len) {
      if (dict.contains(std::string_view(word).substr(i, len))) {
        match = len;
        break;
      }
    }
    if (match > 0) {
      if (residue_start != npos) {
        pieces.push_back(word.substr(residue_start, i - residue_start));
        residue_start = npos;
      }
      pieces.push_back(word.substr(i, match));
      i += match;
    } else {
      if (residue_start == npos) residue_start = i;
      ++i;
    }
  }
  if (residue_start != npos) pieces.push_back(word.substr(residue_start));
  return pieces;
}

namespace {

SemanticVector encode_word(const std::string& word, const Dictionary& dict,
                           int dim, std::uint64_t encoder_seed) {
  if (dict.contains(word)) return token_vector(word, dim, encoder_seed);
  auto pieces = segment_word(word, dict);
  SemanticVector sum = SemanticVector::Zero(dim);
  for (const auto& piece : pieces)
    sum += token_vector(piece, dim, encoder_seed);
  SemanticVector mean = sum / static_cast<double>(pieces.size());
  if (mean.norm() < 1e-12) return token_vector(word, dim, encoder_seed);
  return normalize(mean);
}

}  // namespace

SemanticVector encode_prompt(const Prompt& p, const Dictionary& dict, int dim,
                             std::uint64_t encoder_seed) {
  if (dim <= 0) throw std::invalid_argument("encode_prompt: dim must be >= 1");
  // Words are accumulated in sorted order so the embedding is bit-identical
  // under any permutation of the prompt.
  std::vector<std::string> words = p.tokens;
  std::sort(words.begin(), words.end());
  SemanticVector sum = SemanticVector::Zero(dim);
  for (const auto& word : words)
    sum += encode_word(word, dict, dim, encoder_seed);
  SemanticVector mean = sum / static_cast<double>(p.tokens.size());
  if (mean.norm() < 1e-12)
    throw std::invalid_argument("prompt embedding degenerated to zero");
  return normalize(mean);
}

double cos_sim01(const SemanticVector& a, const SemanticVector& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cos_sim01: dimension mismatch");
  double num = a.dot(b);
  double na2 = a.dot(a);
  double nb2 = b.dot(b);
  if (na2 == 0.0 || nb2 == 0.0)
    throw std::invalid_argument("cos_sim01: zero vector");
  double c = num / std::sqrt(na2 * nb2);
  c = std::clamp(c, -1.0, 1.0);
  return (c + 1.0) / 2.0;
}

double l2_sim01(const SemanticVector& a, const SemanticVector& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("l2_sim01: dimension mismatch");
  if (std::abs(a.norm() - 1.0) > 1e-6 || std::abs(b.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("l2_sim01: inputs must be unit vectors");
  return 1.0 - (a - b).norm() / 2.0;
}

}  // namespace promptsearch
