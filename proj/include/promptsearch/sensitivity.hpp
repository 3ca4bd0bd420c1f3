#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "promptsearch/embedding.hpp"
#include "promptsearch/filters.hpp"

namespace promptsearch {

// Replacement grid: which target positions are substituted and from which
// candidate pool. Immutable; expansion returns a new value.
struct SearchSpace {
  Prompt target;
  std::vector<std::size_t> sensitive_indices;  // insertion order
  int n_sub = 1;
  std::vector<std::string> pool;  // dictionary tokens of length <= l

  std::size_t pool_size() const { return pool.size(); }  // b
  std::size_t token_count() const { return sensitive_indices.size(); }
  std::size_t action_length() const { return token_count() * n_sub; }
  // Perturb rate: fraction of target tokens being replaced.
  double perturb_rate() const {
    return static_cast<double>(token_count()) /
           static_cast<double>(target.length());
  }
};

struct SensitiveSelection {
  std::vector<std::size_t> indices;
  bool keyword_path = false;
};

// All token positions ranked by leave-one-out importance
// eps_i = classify(p) - classify(p without token i), largest first; ties
// break to the leftmost position.
std::vector<std::size_t> epsilon_ranking(const Prompt& p,
                                         const TextClassifier& classifier);

// Keyword path: every position whose token equals a keyword. Otherwise the
// single top-ranked position by leave-one-out importance, which requires a
// classifier.
SensitiveSelection find_sensitive_tokens(const Prompt& p,
                                         const std::vector<std::string>& keywords,
                                         const TextClassifier* classifier);

// Pool is the dictionary subset of token length <= l.
SearchSpace build_search_space(const Prompt& p,
                               std::vector<std::size_t> sensitive_indices,
                               int n_sub, std::size_t l, const Dictionary& dict);

// Adds the next token by importance rank among the not-yet-sensitive ones.
// Throws ExpansionExhausted when every token is already sensitive.
SearchSpace expand(const SearchSpace& space, const TextClassifier& classifier);

// Substitutes each sensitive token with the concatenation of its n_sub
// chosen pool entries. `actions` must have exactly token_count * n_sub
// entries, each < pool_size.
Prompt realize(const SearchSpace& space, std::span<const std::size_t> actions);

// Prefix variant for slot-by-slot searches: unfilled slots are omitted, so
// partially filled tokens get shorter concatenations and untouched sensitive
// tokens are dropped from the prompt.
Prompt realize_partial(const SearchSpace& space,
                       std::span<const std::size_t> actions);

}  // namespace promptsearch
