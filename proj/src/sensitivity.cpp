#include "promptsearch/sensitivity.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include "promptsearch/errors.hpp"

namespace promptsearch {

std::vector<std::size_t> epsilon_ranking(const Prompt& p,
                                         const TextClassifier& classifier) {
  double base = classifier.classify(p.tokens);
  std::vector<double> eps(p.length());
  for (std::size_t i = 0; i < p.length(); ++i) {
    std::vector<std::string> without = p.tokens;
    without.erase(without.begin() + static_cast<std::ptrdiff_t>(i));
    eps[i] = base - classifier.classify(without);
  }
  std::vector<std::size_t> order(p.length());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return eps[a] > eps[b]; });
  return order;
}

SensitiveSelection find_sensitive_tokens(const Prompt& p,
                                         const std::vector<std::string>& keywords,
                                         const TextClassifier* classifier) {
  SensitiveSelection selection;
  for (std::size_t i = 0; i < p.length(); ++i) {
    for (const auto& keyword : keywords) {
      if (p.tokens[i] == keyword) {
        selection.indices.push_back(i);
        break;
      }
    }
  }
  if (!selection.indices.empty()) {
    selection.keyword_path = true;
    return selection;
  }
  if (!classifier)
    throw ConfigError(
        "no keyword matched and no classifier available for ranking");
  selection.indices.push_back(epsilon_ranking(p, *classifier).front());
  return selection;
}

SearchSpace build_search_space(const Prompt& p,
                               std::vector<std::size_t> sensitive_indices,
                               int n_sub, std::size_t l,
                               const Dictionary& dict) {
  if (sensitive_indices.empty())
    throw std::invalid_argument("search space needs sensitive positions");
  std::unordered_set<std::size_t> seen;
  for (auto idx : sensitive_indices) {
    if (idx >= p.length())
      throw std::invalid_argument("sensitive position out of range");
    if (!seen.insert(idx).second)
      throw std::invalid_argument("duplicate sensitive position");
  }
  if (n_sub < 1) throw std::invalid_argument("n_sub must be >= 1");
  SearchSpace space;
  space.target = p;
  space.sensitive_indices = std::move(sensitive_indices);
  space.n_sub = n_sub;
  space.pool = dict.subset_max_len(l);
  if (space.pool.empty())
    throw ConfigError("candidate pool is empty: no dictionary token has length <= " +
                      std::to_string(l));
  return space;
}

SearchSpace expand(const SearchSpace& space, const TextClassifier& classifier) {
  if (space.token_count() >= space.target.length())
    throw ExpansionExhausted("every token is already sensitive");
  std::unordered_set<std::size_t> current(space.sensitive_indices.begin(),
                                          space.sensitive_indices.end());
  for (std::size_t pos : epsilon_ranking(space.target, classifier)) {
    if (current.count(pos)) continue;
    SearchSpace grown = space;
    grown.sensitive_indices.push_back(pos);
    return grown;
  }
  throw ExpansionExhausted("every token is already sensitive");
}

namespace {

Prompt realize_impl(const SearchSpace& space,
                    std::span<const std::size_t> actions) {
  for (std::size_t a : actions)
    if (a >= space.pool_size())
      throw std::invalid_argument("action index out of pool range");

  std::vector<std::string> replacements(space.token_count());
  for (std::size_t k = 0; k < space.token_count(); ++k) {
    std::string concat;
    for (int j = 0; j < space.n_sub; ++j) {
      std::size_t slot = k * static_cast<std::size_t>(space.n_sub) + j;
      if (slot >= actions.size()) break;
      concat += space.pool[actions[slot]];
    }
    replacements[k] = std::move(concat);
  }

  std::vector<std::string> tokens;
  tokens.reserve(space.target.length());
  for (std::size_t i = 0; i < space.target.length(); ++i) {
    auto it = std::find(space.sensitive_indices.begin(),
                        space.sensitive_indices.end(), i);
    if (it == space.sensitive_indices.end()) {
      tokens.push_back(space.target.tokens[i]);
    } else {
      std::size_t k = static_cast<std::size_t>(
          it - space.sensitive_indices.begin());
      if (!replacements[k].empty()) tokens.push_back(replacements[k]);
    }
  }
  return Prompt::from_tokens(std::move(tokens));
}

}  // namespace

Prompt realize(const SearchSpace& space, std::span<const std::size_t> actions) {
  if (actions.size() != space.action_length())
    throw std::invalid_argument("action sequence length mismatch");
  return realize_impl(space, actions);
}

Prompt realize_partial(const SearchSpace& space,
                       std::span<const std::size_t> actions) {
  if (actions.empty() || actions.size() > space.action_length())
    throw std::invalid_argument("partial action sequence length out of range");
  return realize_impl(space, actions);
}

}  // namespace promptsearch
