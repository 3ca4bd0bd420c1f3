#include "promptsearch/search_baselines.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "promptsearch/errors.hpp"

namespace promptsearch {

namespace {

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
    return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  if (b > std::numeric_limits<std::uint64_t>::max() - a)
    return std::numeric_limits<std::uint64_t>::max();
  return a + b;
}

void check_cap(std::uint64_t required, std::uint64_t cap, const char* name) {
  if (required > cap)
    throw BudgetError(std::string(name) + " refused: requires " +
                          std::to_string(required) + " online queries, cap is " +
                          std::to_string(cap),
                      required, cap);
}

struct Evaluation {
  CandidateRecord record;
  QueryResult result;
};

Evaluation evaluate(const Prompt& candidate, Oracle& oracle,
                    const SemanticVector& target_embedding) {
  Evaluation ev;
  ev.result = oracle.generate(candidate);
  ev.record.prompt = candidate;
  ev.record.blocked = ev.result.blocked;
  ev.record.queries_spent = oracle.query_count();
  if (!ev.result.blocked)
    ev.record.similarity =
        cos_sim01(*ev.result.image_embedding, target_embedding);
  return ev;
}

AttackOutcome finish_outcome(std::optional<Evaluation> chosen,
                             const std::vector<CandidateRecord>& log,
                             double delta, std::uint64_t queries) {
  AttackOutcome outcome;
  outcome.online_queries = queries;
  outcome.epochs_used = static_cast<int>(log.size());
  for (const auto& rec : log)
    if (rec.similarity)
      outcome.best_reward = std::max(outcome.best_reward, *rec.similarity);
  if (chosen && !chosen->record.blocked) {
    outcome.adversarial_prompt = chosen->record.prompt;
    outcome.image_embedding = chosen->result.image_embedding;
    outcome.success = *chosen->record.similarity >= delta;
  }
  return outcome;
}

}  // namespace

std::uint64_t brute_force_required_queries(const SearchSpace& space) {
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < space.action_length(); ++i)
    total = saturating_mul(total, space.pool_size());
  return total;
}

std::uint64_t greedy_required_queries(const SearchSpace& space) {
  return static_cast<std::uint64_t>(space.action_length()) * space.pool_size();
}

std::uint64_t beam_required_queries(const SearchSpace& space, int beam_width) {
  // First slot costs b; each later slot extends min(beam_width, alive) beams
  // by all b pool entries.
  std::uint64_t total = 0;
  std::uint64_t beams = 1;
  for (std::size_t slot = 0; slot < space.action_length(); ++slot) {
    std::uint64_t step = saturating_mul(beams, space.pool_size());
    total = saturating_add(total, step);
    beams = std::min<std::uint64_t>(static_cast<std::uint64_t>(beam_width), step);
  }
  return total;
}

BaselineResult brute_force_search(const SearchSpace& space, Oracle& oracle,
                                  const SemanticVector& target_embedding,
                                  double delta, std::uint64_t cap) {
  check_cap(brute_force_required_queries(space), cap, "brute force");
  const std::uint64_t before = oracle.query_count();
  const std::size_t len = space.action_length();
  const std::size_t b = space.pool_size();

  BaselineResult result;
  std::optional<Evaluation> best;
  std::vector<std::size_t> actions(len, 0);
  while (true) {
    Evaluation ev = evaluate(realize(space, actions), oracle, target_embedding);
    if (ev.record.similarity &&
        (!best || *ev.record.similarity > *best->record.similarity))
      best = ev;
    result.log.push_back(ev.record);

    std::size_t pos = len;
    while (pos > 0 && ++actions[pos - 1] == b) actions[--pos] = 0;
    if (pos == 0) break;
  }
  result.outcome =
      finish_outcome(best, result.log, delta, oracle.query_count() - before);
  return result;
}

BaselineResult greedy_search(const SearchSpace& space, Oracle& oracle,
                             const SemanticVector& target_embedding,
                             double delta, std::uint64_t cap) {
  check_cap(greedy_required_queries(space), cap, "greedy search");
  const std::uint64_t before = oracle.query_count();
  const std::size_t len = space.action_length();
  const std::size_t b = space.pool_size();

  BaselineResult result;
  std::vector<std::size_t> chosen;
  std::optional<Evaluation> selected;
  for (std::size_t slot = 0; slot < len; ++slot) {
    std::optional<Evaluation> slot_best;
    std::optional<Evaluation> first;  // fallback when every candidate blocks
    std::size_t best_index = 0;
    std::vector<std::size_t> actions = chosen;
    actions.push_back(0);
    for (std::size_t c = 0; c < b; ++c) {
      actions.back() = c;
      Evaluation ev =
          evaluate(realize_partial(space, actions), oracle, target_embedding);
      result.log.push_back(ev.record);
      if (c == 0) first = ev;
      if (ev.record.similarity &&
          (!slot_best ||
           *ev.record.similarity > *slot_best->record.similarity)) {
        slot_best = ev;
        best_index = c;
      }
    }
    chosen.push_back(best_index);
    selected = slot_best ? slot_best : first;
  }
  result.outcome =
      finish_outcome(selected, result.log, delta, oracle.query_count() - before);
  return result;
}

BaselineResult beam_search(const SearchSpace& space, Oracle& oracle,
                           const SemanticVector& target_embedding, double delta,
                           int beam_width, std::uint64_t cap) {
  if (beam_width < 1)
    throw std::invalid_argument("beam width must be >= 1");
  check_cap(beam_required_queries(space, beam_width), cap, "beam search");
  const std::uint64_t before = oracle.query_count();
  const std::size_t len = space.action_length();
  const std::size_t b = space.pool_size();

  struct Beam {
    std::vector<std::size_t> actions;
    Evaluation eval;
  };

  BaselineResult result;
  std::vector<Beam> beams;
  for (std::size_t slot = 0; slot < len; ++slot) {
    std::vector<Beam> candidates;
    std::size_t parents = slot == 0 ? 1 : beams.size();
    for (std::size_t parent = 0; parent < parents; ++parent) {
      std::vector<std::size_t> actions =
          slot == 0 ? std::vector<std::size_t>{} : beams[parent].actions;
      actions.push_back(0);
      for (std::size_t c = 0; c < b; ++c) {
        actions.back() = c;
        Evaluation ev = evaluate(realize_partial(space, actions), oracle,
                                 target_embedding);
        result.log.push_back(ev.record);
        candidates.push_back({actions, std::move(ev)});
      }
    }
    // Unblocked before blocked, higher similarity first; stable, so ties keep
    // generation order (parent order, then pool index).
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Beam& x, const Beam& y) {
                       const auto& sx = x.eval.record.similarity;
                       const auto& sy = y.eval.record.similarity;
                       if (sx.has_value() != sy.has_value())
                         return sx.has_value();
                       if (!sx) return false;
                       return *sx > *sy;
                     });
    std::size_t keep =
        std::min<std::size_t>(static_cast<std::size_t>(beam_width),
                              candidates.size());
    candidates.resize(keep);
    beams = std::move(candidates);
  }
  std::optional<Evaluation> best;
  if (!beams.empty()) best = beams.front().eval;
  result.outcome =
      finish_outcome(best, result.log, delta, oracle.query_count() - before);
  return result;
}

}  // namespace promptsearch
