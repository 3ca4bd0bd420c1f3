#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "promptsearch/attack.hpp"
#include "promptsearch/oracle.hpp"
#include "promptsearch/rng.hpp"
#include "promptsearch/sensitivity.hpp"

namespace promptsearch {

// Loop constants of the guided search.
inline constexpr int kExpansionNegStreak = 5;
inline constexpr int kUnchangedStreak = 3;
inline constexpr double kUnchangedTol = 1e-9;
inline constexpr double kMaxPerturbRate = 0.3;

struct PolicyParams {
  Eigen::MatrixXd embed;               // (pool + 1) x embed_dim; last row is the start symbol
  Eigen::MatrixXd w_i, w_f, w_o, w_g;  // hidden x (embed_dim + hidden)
  Eigen::VectorXd b_i, b_f, b_o, b_g;  // hidden
  Eigen::MatrixXd w_out;               // pool x hidden
  Eigen::VectorXd b_out;               // pool

  static PolicyParams zeros(int hidden, int embed_dim, std::size_t pool);

  std::vector<double> as_vector() const;
  void set_from_vector(const std::vector<double>& flat);
  bool all_finite() const;
  // *this += alpha * other
  void axpy(double alpha, const PolicyParams& other);
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// Single-layer LSTM over the previous action's embedding, projected to one
// logit per pool entry. Owns its recurrent state; episodes reset it.
class PolicyNetwork {
 public:
  // Weights drawn uniform in +-1/sqrt(hidden) from `seed`; biases zero.
  PolicyNetwork(int hidden, int embed_dim, std::size_t pool_size,
                double learning_rate, double discount, std::uint64_t seed);
  static PolicyNetwork zero_initialized(int hidden, int embed_dim,
                                        std::size_t pool_size,
                                        double learning_rate = 0.1,
                                        double discount = 1.0);

  // One LSTM step on the embedded previous action (the start symbol when
  // absent); returns logits over the pool and advances the recurrent state.
  Eigen::VectorXd forward(std::optional<std::size_t> prev_action);
  void reset_recurrence();

  // Teacher-forced episode quantities, computed from a fresh zero recurrent
  // state. loss = -reward * sum_j ln P(action_j).
  double episode_loss(const std::vector<std::size_t>& actions,
                      double reward) const;
  PolicyParams episode_gradients(const std::vector<std::size_t>& actions,
                                 double reward) const;
  double sequence_log_prob(const std::vector<std::size_t>& actions) const;

  int hidden() const { return hidden_; }
  int embed_dim() const { return embed_dim_; }
  std::size_t pool_size() const { return pool_; }

  PolicyParams params;
  double learning_rate;
  // Recorded hyper-parameter; the episode yields one terminal reward, so the
  // update rule has nothing to discount.
  double discount;

 private:
  int hidden_;
  int embed_dim_;
  std::size_t pool_;
  Eigen::VectorXd h_, c_;
};

// Samples token_count * n_sub actions, chaining the recurrent state, and
// accumulates the log-probability of the taken sequence.
EpisodeTrace sample_sequence(PolicyNetwork& policy, const SearchSpace& space,
                             SplitMix64& rng);

// cos_sim01 of image against target when not blocked; -q / (10 * max_epochs)
// when blocked.
double compute_reward(const QueryResult& result,
                      const SemanticVector& target_embedding, int q,
                      int max_epochs);

// One SGD step on the episode loss. Rejects non-finite gradients by throwing.
void policy_update(PolicyNetwork& policy, const EpisodeTrace& trace);

struct RlConfig {
  double delta = 0.86;
  int max_epochs = 60;  // Q
  double learning_rate = 0.1;
  double discount = 1.0;
  int n_sub = 3;
  std::size_t max_subtoken_len = 10;  // l
  int hidden = 64;
  int embed_dim = 32;
  std::uint64_t policy_seed = 20240601;
  std::uint64_t sample_seed = 905;
  int offline_inner_cap = 500;
};

struct AttackEnv {
  const TextEncoder* encoder = nullptr;
  std::vector<std::string> keywords;
  const TextClassifier* classifier = nullptr;  // needed off the keyword path
};

// Guided search: sample, query online, reward, update; early stop on
// success; expand the search space after kExpansionNegStreak consecutive
// negative rewards; terminate on unchanged reward, perturb-rate cap, or
// epoch budget. Budget and expansion exhaustion yield failure outcomes,
// never exceptions.
AttackOutcome run_attack(const Prompt& target, Oracle& oracle,
                         const AttackEnv& env, const RlConfig& config);

// Variant that optimizes 1 - l2/2 between the candidate and target text
// embeddings offline until the threshold is met, then spends one online
// query; blocked outcomes are penalized and the loop repeats.
AttackOutcome run_attack_offline_first(const Prompt& target, Oracle& oracle,
                                       const AttackEnv& env,
                                       const RlConfig& config);

}  // namespace promptsearch
