#include "promptsearch/rl_agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "promptsearch/errors.hpp"

namespace promptsearch {

PolicyParams PolicyParams::zeros(int hidden, int embed_dim, std::size_t pool) {
  PolicyParams p;
  auto rows = static_cast<Eigen::Index>(pool) + 1;
  p.embed = Eigen::MatrixXd::Zero(rows, embed_dim);
  Eigen::Index z = embed_dim + hidden;
  p.w_i = Eigen::MatrixXd::Zero(hidden, z);
  p.w_f = Eigen::MatrixXd::Zero(hidden, z);
  p.w_o = Eigen::MatrixXd::Zero(hidden, z);
  p.w_g = Eigen::MatrixXd::Zero(hidden, z);
  p.b_i = Eigen::VectorXd::Zero(hidden);
  p.b_f = Eigen::VectorXd::Zero(hidden);
  p.b_o = Eigen::VectorXd::Zero(hidden);
  p.b_g = Eigen::VectorXd::Zero(hidden);
  p.w_out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pool), hidden);
  p.b_out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pool));
  return p;
}

namespace {

template <typename Fn>
void for_each_block(PolicyParams& p, Fn&& fn) {
  fn(p.embed);
  fn(p.w_i);
  fn(p.w_f);
  fn(p.w_o);
  fn(p.w_g);
  fn(p.b_i);
  fn(p.b_f);
  fn(p.b_o);
  fn(p.b_g);
  fn(p.w_out);
  fn(p.b_out);
}

template <typename Fn>
void for_each_block(const PolicyParams& p, Fn&& fn) {
  fn(p.embed);
  fn(p.w_i);
  fn(p.w_f);
  fn(p.w_o);
  fn(p.w_g);
  fn(p.b_i);
  fn(p.b_f);
  fn(p.b_o);
  fn(p.b_g);
  fn(p.w_out);
  fn(p.b_out);
}

}  // namespace

std::vector<double> PolicyParams::as_vector() const {
  std::vector<double> flat;
  for_each_block(*this, [&](const auto& block) {
    flat.insert(flat.end(), block.data(), block.data() + block.size());
  });
  return flat;
}

void PolicyParams::set_from_vector(const std::vector<double>& flat) {
  std::size_t offset = 0;
  for_each_block(*this, [&](auto& block) {
    if (offset + block.size() > flat.size())
      throw std::invalid_argument("parameter vector too short");
    std::copy(flat.begin() + offset, flat.begin() + offset + block.size(),
              block.data());
    offset += block.size();
  });
  if (offset != flat.size())
    throw std::invalid_argument("parameter vector size mismatch");
}

bool PolicyParams::all_finite() const {
  bool ok = true;
  for_each_block(*this, [&](const auto& block) {
    if (!block.allFinite()) ok = false;
  });
  return ok;
}

void PolicyParams::axpy(double alpha, const PolicyParams& other) {
  embed += alpha * other.embed;
  w_i += alpha * other.w_i;
  w_f += alpha * other.w_f;
  w_o += alpha * other.w_o;
  w_g += alpha * other.w_g;
  b_i += alpha * other.b_i;
  b_f += alpha * other.b_f;
  b_o += alpha * other.b_o;
  b_g += alpha * other.b_g;
  w_out += alpha * other.w_out;
  b_out += alpha * other.b_out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd shifted = logits.array() - logits.maxCoeff();
  Eigen::VectorXd exps = shifted.array().exp();
  return exps / exps.sum();
}

PolicyNetwork::PolicyNetwork(int hidden, int embed_dim, std::size_t pool_size,
                             double lr, double gamma, std::uint64_t seed)
    : params(PolicyParams::zeros(hidden, embed_dim, pool_size)),
      learning_rate(lr),
      discount(gamma),
      hidden_(hidden),
      embed_dim_(embed_dim),
      pool_(pool_size),
      h_(Eigen::VectorXd::Zero(hidden)),
      c_(Eigen::VectorXd::Zero(hidden)) {
  if (hidden < 1 || embed_dim < 1 || pool_size < 1)
    throw std::invalid_argument("policy network dimensions must be >= 1");
  double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  SplitMix64 rng(seed);
  auto fill = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = scale * rng.next_symmetric();
  };
  fill(params.embed);
  fill(params.w_i);
  fill(params.w_f);
  fill(params.w_o);
  fill(params.w_g);
  fill(params.w_out);
}

PolicyNetwork PolicyNetwork::zero_initialized(int hidden, int embed_dim,
                                              std::size_t pool_size, double lr,
                                              double gamma) {
  PolicyNetwork net(hidden, embed_dim, pool_size, lr, gamma, 0);
  net.params = PolicyParams::zeros(hidden, embed_dim, pool_size);
  return net;
}

void PolicyNetwork::reset_recurrence() {
  h_.setZero();
  c_.setZero();
}

namespace {

struct StepCache {
  std::size_t input_row = 0;
  Eigen::VectorXd z;       // [x; h_prev]
  Eigen::VectorXd i, f, o, g;
  Eigen::VectorXd c_prev, c, tanh_c, h;
  Eigen::VectorXd probs;
};

StepCache lstm_step(const PolicyParams& p, std::size_t input_row,
                    const Eigen::VectorXd& h_prev,
                    const Eigen::VectorXd& c_prev) {
  StepCache s;
  s.input_row = input_row;
  Eigen::VectorXd x =
      p.embed.row(static_cast<Eigen::Index>(input_row)).transpose();
  s.z.resize(x.size() + h_prev.size());
  s.z << x, h_prev;
  s.i = (p.w_i * s.z + p.b_i).unaryExpr(
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  s.f = (p.w_f * s.z + p.b_f).unaryExpr(
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  s.o = (p.w_o * s.z + p.b_o).unaryExpr(
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  s.g = (p.w_g * s.z + p.b_g).array().tanh();
  s.c_prev = c_prev;
  s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
  s.tanh_c = s.c.array().tanh();
  s.h = s.o.cwiseProduct(s.tanh_c);
  s.probs = softmax(p.w_out * s.h + p.b_out);
  return s;
}

std::vector<StepCache> episode_forward(const PolicyParams& p, int hidden,
                                       std::size_t pool,
                                       const std::vector<std::size_t>& actions) {
  std::vector<StepCache> steps;
  steps.reserve(actions.size());
  Eigen::VectorXd h = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(hidden);
  std::size_t prev = pool;  // start symbol row
  for (std::size_t a : actions) {
    if (a >= pool) throw std::invalid_argument("action index out of range");
    StepCache s = lstm_step(p, prev, h, c);
    h = s.h;
    c = s.c;
    steps.push_back(std::move(s));
    prev = a;
  }
  return steps;
}

}  // namespace

Eigen::VectorXd PolicyNetwork::forward(std::optional<std::size_t> prev_action) {
  std::size_t row = prev_action.value_or(pool_);
  if (row > pool_) throw std::invalid_argument("previous action out of range");
  StepCache s = lstm_step(params, row, h_, c_);
  h_ = s.h;
  c_ = s.c;
  return params.w_out * s.h + params.b_out;
}

double PolicyNetwork::episode_loss(const std::vector<std::size_t>& actions,
                                   double reward) const {
  return -reward * sequence_log_prob(actions);
}

double PolicyNetwork::sequence_log_prob(
    const std::vector<std::size_t>& actions) const {
  auto steps = episode_forward(params, hidden_, pool_, actions);
  double log_prob = 0.0;
  for (std::size_t t = 0; t < actions.size(); ++t)
    log_prob += std::log(steps[t].probs[static_cast<Eigen::Index>(actions[t])]);
  return log_prob;
}

PolicyParams PolicyNetwork::episode_gradients(
    const std::vector<std::size_t>& actions, double reward) const {
  auto steps = episode_forward(params, hidden_, pool_, actions);
  PolicyParams grad = PolicyParams::zeros(hidden_, embed_dim_, pool_);

  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(hidden_);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(hidden_);
  for (std::size_t t = actions.size(); t-- > 0;) {
    const StepCache& s = steps[t];
    // loss_t = -reward * ln probs[a_t]
    Eigen::VectorXd dlogits = reward * s.probs;
    dlogits[static_cast<Eigen::Index>(actions[t])] -= reward;

    grad.w_out += dlogits * s.h.transpose();
    grad.b_out += dlogits;

    Eigen::VectorXd dh = params.w_out.transpose() * dlogits + dh_next;
    Eigen::VectorXd d_o = dh.cwiseProduct(s.tanh_c);
    Eigen::VectorXd dc =
        dc_next +
        dh.cwiseProduct(s.o).cwiseProduct(
            (1.0 - s.tanh_c.array().square()).matrix());
    Eigen::VectorXd d_i = dc.cwiseProduct(s.g);
    Eigen::VectorXd d_g = dc.cwiseProduct(s.i);
    Eigen::VectorXd d_f = dc.cwiseProduct(s.c_prev);
    dc_next = dc.cwiseProduct(s.f);

    Eigen::VectorXd di_pre =
        d_i.cwiseProduct(s.i).cwiseProduct((1.0 - s.i.array()).matrix());
    Eigen::VectorXd df_pre =
        d_f.cwiseProduct(s.f).cwiseProduct((1.0 - s.f.array()).matrix());
    Eigen::VectorXd do_pre =
        d_o.cwiseProduct(s.o).cwiseProduct((1.0 - s.o.array()).matrix());
    Eigen::VectorXd dg_pre =
        d_g.cwiseProduct((1.0 - s.g.array().square()).matrix());

    grad.w_i += di_pre * s.z.transpose();
    grad.w_f += df_pre * s.z.transpose();
    grad.w_o += do_pre * s.z.transpose();
    grad.w_g += dg_pre * s.z.transpose();
    grad.b_i += di_pre;
    grad.b_f += df_pre;
    grad.b_o += do_pre;
    grad.b_g += dg_pre;

    Eigen::VectorXd dz = params.w_i.transpose() * di_pre +
                         params.w_f.transpose() * df_pre +
                         params.w_o.transpose() * do_pre +
                         params.w_g.transpose() * dg_pre;
    grad.embed.row(static_cast<Eigen::Index>(s.input_row)) +=
        dz.head(embed_dim_).transpose();
    dh_next = dz.tail(hidden_);
  }
  return grad;
}

EpisodeTrace sample_sequence(PolicyNetwork& policy, const SearchSpace& space,
                             SplitMix64& rng) {
  if (policy.pool_size() != space.pool_size())
    throw std::invalid_argument("policy pool size does not match search space");
  EpisodeTrace trace;
  policy.reset_recurrence();
  std::optional<std::size_t> prev;
  for (std::size_t j = 0; j < space.action_length(); ++j) {
    Eigen::VectorXd probs = softmax(policy.forward(prev));
    double u = rng.next_unit();
    double cum = 0.0;
    std::size_t action = space.pool_size() - 1;
    for (Eigen::Index k = 0; k < probs.size(); ++k) {
      cum += probs[k];
      if (u < cum) {
        action = static_cast<std::size_t>(k);
        break;
      }
    }
    trace.actions.push_back(action);
    trace.log_prob += std::log(probs[static_cast<Eigen::Index>(action)]);
    prev = action;
  }
  return trace;
}

double compute_reward(const QueryResult& result,
                      const SemanticVector& target_embedding, int q,
                      int max_epochs) {
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (result.blocked)
    return -static_cast<double>(q) / (10.0 * static_cast<double>(max_epochs));
  return cos_sim01(*result.image_embedding, target_embedding);
}

void policy_update(PolicyNetwork& policy, const EpisodeTrace& trace) {
  PolicyParams grad = policy.episode_gradients(trace.actions, trace.reward);
  if (!grad.all_finite())
    throw std::runtime_error(
        "policy update rejected: non-finite gradient at epoch " +
        std::to_string(trace.epoch));
  policy.params.axpy(-policy.learning_rate, grad);
  if (!policy.params.all_finite())
    throw std::runtime_error(
        "policy update rejected: non-finite parameters at epoch " +
        std::to_string(trace.epoch));
}

namespace {

struct BestCandidate {
  Prompt prompt;
  std::optional<SemanticVector> image;
  double reward = 0.0;
};

PolicyNetwork make_policy(const SearchSpace& space, const RlConfig& config,
                          int expansion_count) {
  return PolicyNetwork(config.hidden, config.embed_dim, space.pool_size(),
                       config.learning_rate, config.discount,
                       derive_seed(config.policy_seed,
                                   static_cast<std::uint64_t>(expansion_count)));
}

SearchSpace initial_space(const Prompt& target, const AttackEnv& env,
                          const RlConfig& config) {
  SensitiveSelection selection =
      find_sensitive_tokens(target, env.keywords, env.classifier);
  return build_search_space(target, selection.indices, config.n_sub,
                            config.max_subtoken_len, *env.encoder->dict);
}

void validate(const AttackEnv& env, const RlConfig& config) {
  if (!env.encoder) throw ConfigError("attack needs a text encoder");
  if (config.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (config.n_sub < 1) throw ConfigError("n_sub must be >= 1");
}

}  // namespace

AttackOutcome run_attack(const Prompt& target, Oracle& oracle,
                         const AttackEnv& env, const RlConfig& config) {
  validate(env, config);
  AttackOutcome outcome;
  const std::uint64_t queries_before = oracle.query_count();
  SemanticVector target_embedding = env.encoder->encode(target);

  SearchSpace space = initial_space(target, env, config);
  PolicyNetwork policy = make_policy(space, config, 0);
  SplitMix64 rng(config.sample_seed);

  std::optional<BestCandidate> best;
  int neg_streak = 0;
  int same_streak = 0;
  double prev_reward = std::numeric_limits<double>::quiet_NaN();

  for (int q = 1; q <= config.max_epochs; ++q) {
    EpisodeTrace trace = sample_sequence(policy, space, rng);
    trace.epoch = q;
    trace.prompt = realize(space, trace.actions);
    trace.result = oracle.generate(trace.prompt);
    trace.reward =
        compute_reward(trace.result, target_embedding, q, config.max_epochs);

    if (!trace.result.blocked && trace.reward > 0.0 &&
        (!best || trace.reward > best->reward))
      best = BestCandidate{trace.prompt, trace.result.image_embedding,
                           trace.reward};

    outcome.trace.push_back(trace);
    policy_update(policy, trace);
    outcome.epochs_used = q;

    if (!trace.result.blocked && trace.reward >= config.delta) {
      outcome.success = true;
      outcome.adversarial_prompt = trace.prompt;
      outcome.image_embedding = trace.result.image_embedding;
      break;
    }

    neg_streak = trace.reward < 0.0 ? neg_streak + 1 : 0;
    bool unchanged = !std::isnan(prev_reward) &&
                     std::abs(trace.reward - prev_reward) <= kUnchangedTol;
    same_streak = unchanged ? same_streak + 1 : 0;
    prev_reward = trace.reward;

    if (neg_streak >= kExpansionNegStreak) {
      if (!env.classifier) break;  // cannot rank further tokens
      try {
        space = expand(space, *env.classifier);
      } catch (const ExpansionExhausted&) {
        break;
      }
      ++outcome.expansion_count;
      policy = make_policy(space, config, outcome.expansion_count);
      neg_streak = 0;
      same_streak = 0;
      prev_reward = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    if (same_streak >= kUnchangedStreak) break;
    if (space.perturb_rate() >= kMaxPerturbRate) break;
  }

  if (!outcome.success && best) {
    outcome.adversarial_prompt = best->prompt;
    outcome.image_embedding = best->image;
  }
  for (const auto& t : outcome.trace)
    outcome.best_reward = std::max(outcome.best_reward, t.reward);
  outcome.online_queries = oracle.query_count() - queries_before;
  return outcome;
}

AttackOutcome run_attack_offline_first(const Prompt& target, Oracle& oracle,
                                       const AttackEnv& env,
                                       const RlConfig& config) {
  validate(env, config);
  if (config.offline_inner_cap < 1)
    throw ConfigError("offline_inner_cap must be >= 1");
  AttackOutcome outcome;
  const std::uint64_t queries_before = oracle.query_count();
  SemanticVector target_embedding = env.encoder->encode(target);

  SearchSpace space = initial_space(target, env, config);
  PolicyNetwork policy = make_policy(space, config, 0);
  SplitMix64 rng(config.sample_seed);

  int neg_streak = 0;

  for (int q = 1; q <= config.max_epochs; ++q) {
    // Offline phase: free queries to the shadow encoder only.
    EpisodeTrace trace;
    bool reached = false;
    for (int it = 0; it < config.offline_inner_cap; ++it) {
      trace = sample_sequence(policy, space, rng);
      trace.epoch = q;
      trace.prompt = realize(space, trace.actions);
      trace.reward =
          l2_sim01(env.encoder->encode(trace.prompt), target_embedding);
      policy_update(policy, trace);
      if (trace.reward >= config.delta) {
        reached = true;
        break;
      }
    }
    if (!reached) break;
    double offline_similarity = trace.reward;

    trace.result = oracle.generate(trace.prompt);
    outcome.epochs_used = q;
    if (!trace.result.blocked) {
      outcome.trace.push_back(trace);
      outcome.success = true;
      outcome.adversarial_prompt = trace.prompt;
      outcome.image_embedding = trace.result.image_embedding;
      outcome.best_reward = std::max(outcome.best_reward, offline_similarity);
      break;
    }

    trace.reward = -static_cast<double>(q) /
                   (10.0 * static_cast<double>(config.max_epochs));
    outcome.trace.push_back(trace);
    policy_update(policy, trace);

    ++neg_streak;
    if (neg_streak >= kExpansionNegStreak) {
      if (!env.classifier) break;
      try {
        space = expand(space, *env.classifier);
      } catch (const ExpansionExhausted&) {
        break;
      }
      ++outcome.expansion_count;
      policy = make_policy(space, config, outcome.expansion_count);
      neg_streak = 0;
      continue;
    }
    if (space.perturb_rate() >= kMaxPerturbRate) break;
  }

  if (!outcome.success)
    for (const auto& t : outcome.trace)
      outcome.best_reward = std::max(outcome.best_reward, t.reward);
  outcome.online_queries = oracle.query_count() - queries_before;
  return outcome;
}

}  // namespace promptsearch
