#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "promptsearch/attack.hpp"
#include "promptsearch/oracle.hpp"
#include "promptsearch/sensitivity.hpp"

namespace promptsearch {

inline constexpr std::uint64_t kBruteCapDefault = 10000;
inline constexpr std::uint64_t kSearchCapDefault = 5000;

// Bookkeeping row for every candidate a baseline search queried.
struct CandidateRecord {
  Prompt prompt;
  std::optional<double> similarity;  // absent iff blocked
  bool blocked = false;
  std::uint64_t queries_spent = 0;  // accountant total after this candidate
};

struct BaselineResult {
  AttackOutcome outcome;
  std::vector<CandidateRecord> log;
};

// Exact online query cost of each search on a given space.
std::uint64_t brute_force_required_queries(const SearchSpace& space);
std::uint64_t greedy_required_queries(const SearchSpace& space);
std::uint64_t beam_required_queries(const SearchSpace& space, int beam_width);

// Enumerates every action sequence, queries the oracle for each, and returns
// the bypassing candidate with maximal cos_sim01 against the target
// embedding. Costs pool^(n_sub * token_count) queries exactly; refuses with
// a BudgetError when that exceeds `cap`.
BaselineResult brute_force_search(const SearchSpace& space, Oracle& oracle,
                                  const SemanticVector& target_embedding,
                                  double delta,
                                  std::uint64_t cap = kBruteCapDefault);

// Fills subtoken slots left to right, querying all pool candidates per slot
// with unfilled slots omitted; keeps the argmax similarity (ties to the
// lowest pool index). Costs token_count * pool * n_sub queries exactly.
BaselineResult greedy_search(const SearchSpace& space, Oracle& oracle,
                             const SemanticVector& target_embedding,
                             double delta,
                             std::uint64_t cap = kSearchCapDefault);

// Keeps the beam_width highest-similarity partial sequences per slot.
// beam_width = 1 is identical to greedy_search.
BaselineResult beam_search(const SearchSpace& space, Oracle& oracle,
                           const SemanticVector& target_embedding, double delta,
                           int beam_width,
                           std::uint64_t cap = kSearchCapDefault);

}  // namespace promptsearch
