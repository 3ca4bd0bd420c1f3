#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "promptsearch/embedding.hpp"
#include "promptsearch/oracle.hpp"

namespace promptsearch {

// One sampled episode: the action sequence, its log-probability under the
// policy at sampling time, and what the oracle said.
struct EpisodeTrace {
  int epoch = 0;  // q, 1-based
  std::vector<std::size_t> actions;
  double log_prob = 0.0;
  double reward = 0.0;
  Prompt prompt;
  QueryResult result;
};

// Result of any search. success implies the adversarial prompt is present,
// was not blocked, and met the similarity threshold.
struct AttackOutcome {
  bool success = false;
  std::optional<Prompt> adversarial_prompt;
  std::optional<SemanticVector> image_embedding;
  // Maximum reward observed; -1 when nothing was evaluated.
  double best_reward = -1.0;
  std::uint64_t online_queries = 0;
  int epochs_used = 0;
  int expansion_count = 0;
  std::vector<EpisodeTrace> trace;
};

}  // namespace promptsearch
