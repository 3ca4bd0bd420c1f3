// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Expected values are computed by independent oracles inside this
// file wherever a search or metric is being checked.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "promptsearch/errors.hpp"
#include "promptsearch/filters.hpp"
#include "promptsearch/harness.hpp"
#include "promptsearch/metrics.hpp"
#include "promptsearch/oracle.hpp"
#include "promptsearch/oracle_client.hpp"
#include "promptsearch/oracle_server.hpp"
#include "promptsearch/rl_agent.hpp"
#include "promptsearch/rng.hpp"
#include "promptsearch/search_baselines.hpp"
#include "promptsearch/sensitivity.hpp"

using namespace promptsearch;

namespace {

const std::string kData = PROMPTSEARCH_DATA_DIR;
int g_failures = 0;

class Criterion {
 public:
  Criterion(int number, std::string name)
      : number_(number), name_(std::move(name)),
        start_(std::chrono::steady_clock::now()) {}

  void detail(const std::string& text) { details_.push_back(text); }

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      failed_ = true;
      details_.push_back("FAILED: " + what);
    }
  }

  ~Criterion() {
    double seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start_)
                         .count();
    std::printf("[%s] criterion %d: %s (%.2fs)\n", failed_ ? "FAIL" : "PASS",
                number_, name_.c_str(), seconds);
    for (const auto& d : details_) std::printf("         %s\n", d.c_str());
    if (failed_) ++g_failures;
    std::fflush(stdout);
  }

 private:
  int number_;
  std::string name_;
  std::vector<std::string> details_;
  bool failed_ = false;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

ExperimentConfig default_config(const std::string& method) {
  std::map<std::string, std::string> kv{
      {"method", method},
      {"corpus_path", kData + "/corpus_sensitive.txt"},
      {"keywords_path", kData + "/keywords.txt"},
      {"concepts_path", kData + "/concepts.txt"},
      {"classifier_positive_path", kData + "/classifier_positive.txt"},
      {"classifier_negative_path", kData + "/classifier_negative.txt"},
  };
  return config_from_key_values(kv);
}

// ---- criterion 1 -----------------------------------------------------------

void criterion_gradient() {
  Criterion c(1, "policy gradients match central finite differences");
  const double step = 1e-5;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    PolicyNetwork net(8, 16, 5, 0.1, 1.0, seed);
    SplitMix64 rng(seed * 31);
    std::vector<std::size_t> actions;
    for (int t = 0; t < 4; ++t) actions.push_back(rng.next_below(5));
    double reward = 0.1 + 0.8 * rng.next_unit();

    PolicyParams analytic = net.episode_gradients(actions, reward);
    std::vector<double> grad = analytic.as_vector();
    std::vector<double> theta = net.params.as_vector();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      std::vector<double> p = theta;
      p[k] = theta[k] + step;
      net.params.set_from_vector(p);
      double up = net.episode_loss(actions, reward);
      p[k] = theta[k] - step;
      net.params.set_from_vector(p);
      double down = net.episode_loss(actions, reward);
      net.params.set_from_vector(theta);
      double numeric = (up - down) / (2.0 * step);
      // Relative error with the denominator floored at 1e-4, so entries near
      // zero are compared absolutely at 1e-8.
      double rel = std::abs(grad[k] - numeric) /
                   std::max({std::abs(grad[k]), std::abs(numeric), 1e-4});
      worst = std::max(worst, rel);
    }
  }
  c.detail("worst relative error " + fmt(worst) + " over 10 seeds");
  c.expect(worst <= 1e-4, "relative error above 1e-4");
}

// ---- criterion 2 -----------------------------------------------------------

void criterion_reward() {
  Criterion c(2, "reward branches are exact");
  SemanticVector target = token_vector("goal", 32, 4);
  QueryResult blocked;
  blocked.blocked = true;
  c.expect(compute_reward(blocked, target, 6, 60) == -0.01,
           "blocked q=6 Q=60 must be exactly -0.01");
  QueryResult hit;
  hit.image_embedding = target;
  c.expect(compute_reward(hit, target, 6, 60) == 1.0,
           "image == target must reward exactly 1.0");
}

// ---- criteria 3 and 4 ------------------------------------------------------

struct BaselineInstance {
  Dictionary dict;
  Prompt target;
  SearchSpace space;
  SemanticVector target_embedding;
  OracleConfig oracle_config;
  FilterPtr filter;

  BaselineInstance(std::size_t b, int n_sub, std::uint64_t seed, double tau)
      : dict(make_dict(b, seed)),
        target(Prompt::parse("the cat sits quietly")),
        space(build_search_space(target, {1}, n_sub, 2, dict)),
        target_embedding(encode_prompt(target, dict, 24, seed)),
        oracle_config{EncoderConfig{24, seed}, 0.0, 5} {
    if (tau >= 1.0) {
      filter = std::make_shared<PermissiveFilter>();
    } else {
      filter = std::make_shared<ImageThresholdFilter>(
          std::vector<SemanticVector>{token_vector("cat", 24, seed)}, tau);
    }
  }

  static Dictionary make_dict(std::size_t b, std::uint64_t seed) {
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < b; ++i) {
      std::string t;
      t.push_back(static_cast<char>('a' + (seed + i) % 26));
      t.push_back(static_cast<char>('a' + i % 26));
      tokens.push_back(t);
    }
    return Dictionary::from_tokens(tokens);
  }

  OracleSession session() const {
    return OracleSession(dict, oracle_config, filter);
  }
};

void criterion_baseline_equivalence() {
  Criterion c(3, "baseline searches agree with independent oracles");

  BaselineInstance inst(6, 2, 3, 0.62);
  {
    // Independent exhaustive re-scan: plain double loop, fresh session.
    OracleSession session = inst.session();
    std::optional<double> best_sim;
    std::string best_prompt;
    int scanned = 0;
    for (std::size_t a0 = 0; a0 < 6; ++a0)
      for (std::size_t a1 = 0; a1 < 6; ++a1) {
        std::vector<std::size_t> actions = {a0, a1};
        Prompt candidate = realize(inst.space, actions);
        QueryResult r = session.generate(candidate);
        ++scanned;
        if (!r.blocked) {
          double sim = cos_sim01(*r.image_embedding, inst.target_embedding);
          if (!best_sim || sim > *best_sim) {
            best_sim = sim;
            best_prompt = candidate.raw;
          }
        }
      }
    c.expect(scanned == 36, "re-scan must cover 36 candidates");

    OracleSession brute_session = inst.session();
    BaselineResult brute = brute_force_search(inst.space, brute_session,
                                              inst.target_embedding, 0.5);
    c.expect(best_sim.has_value(), "instance must contain bypassing candidates");
    c.expect(brute.outcome.adversarial_prompt.has_value(),
             "brute force must return a candidate");
    if (best_sim && brute.outcome.adversarial_prompt) {
      c.expect(brute.outcome.best_reward == *best_sim,
               "brute-force similarity differs from the exhaustive re-scan");
      c.expect(brute.outcome.adversarial_prompt->raw == best_prompt,
               "brute-force candidate differs from the exhaustive re-scan");
    }
  }
  {
    // beam(1) output is bit-identical to greedy.
    OracleSession s1 = inst.session();
    OracleSession s2 = inst.session();
    BaselineResult greedy =
        greedy_search(inst.space, s1, inst.target_embedding, 0.5);
    BaselineResult beam1 =
        beam_search(inst.space, s2, inst.target_embedding, 0.5, 1);
    bool identical =
        greedy.outcome.success == beam1.outcome.success &&
        greedy.outcome.best_reward == beam1.outcome.best_reward &&
        greedy.outcome.online_queries == beam1.outcome.online_queries &&
        greedy.outcome.adversarial_prompt.has_value() ==
            beam1.outcome.adversarial_prompt.has_value() &&
        (!greedy.outcome.adversarial_prompt ||
         greedy.outcome.adversarial_prompt->raw ==
             beam1.outcome.adversarial_prompt->raw);
    c.expect(identical, "beam(m=1) differs from greedy");
  }
  {
    // Dominance chain on 20 seeded instances.
    int violations = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      BaselineInstance chain(4 + seed % 5, 2, seed, 1.0);
      OracleSession s1 = chain.session();
      OracleSession s2 = chain.session();
      OracleSession s3 = chain.session();
      double brute = brute_force_search(chain.space, s1,
                                        chain.target_embedding, 0.0)
                         .outcome.best_reward;
      double beam3 =
          beam_search(chain.space, s2, chain.target_embedding, 0.0, 3)
              .outcome.best_reward;
      double greedy =
          greedy_search(chain.space, s3, chain.target_embedding, 0.0)
              .outcome.best_reward;
      if (!(brute >= beam3 && beam3 >= greedy)) ++violations;
    }
    c.detail("dominance violations: " + std::to_string(violations) + "/20");
    c.expect(violations == 0, "brute >= beam(3) >= greedy violated");
  }
}

void criterion_query_contracts() {
  Criterion c(4, "query counts match the closed-form contracts");
  BaselineInstance inst(6, 2, 3, 0.62);
  {
    OracleSession s = inst.session();
    brute_force_search(inst.space, s, inst.target_embedding, 0.5);
    c.expect(s.query_count() == 36, "brute must spend exactly b^(n_sub)=36");
  }
  {
    OracleSession s = inst.session();
    greedy_search(inst.space, s, inst.target_embedding, 0.5);
    c.expect(s.query_count() == 12, "greedy must spend exactly b*n_sub=12");
  }
  {
    OracleSession s = inst.session();
    beam_search(inst.space, s, inst.target_embedding, 0.5, 6);
    c.expect(s.query_count() == 42, "beam(m=b) must spend b + b*b = 42");
    c.expect(beam_required_queries(inst.space, 6) == 42,
             "documented beam bound mismatch");
  }
  {
    OracleSession s = inst.session();
    beam_search(inst.space, s, inst.target_embedding, 0.5, 3);
    c.expect(s.query_count() == 24, "beam(3) must spend b + 3b = 24");
  }
}

// ---- criterion 5 -----------------------------------------------------------

void criterion_frechet() {
  Criterion c(5, "Frechet metric identities");
  GaussianStream g(17);
  auto cloud = [&](int n, int dim, double shift) {
    std::vector<SemanticVector> out;
    for (int i = 0; i < n; ++i) {
      SemanticVector v(dim);
      for (int k = 0; k < dim; ++k) v[k] = g.next() + shift;
      out.push_back(std::move(v));
    }
    return out;
  };

  auto xs = cloud(80, 6, 0.0);
  auto ys = cloud(80, 6, 0.7);
  EmbeddingSet x = EmbeddingSet::from_samples(xs);
  EmbeddingSet y = EmbeddingSet::from_samples(ys);
  c.expect(frechet_distance(x, x) <= 1e-8, "FID(X,X) must vanish");
  c.expect(std::abs(frechet_distance(x, y) - frechet_distance(y, x)) <= 1e-8,
           "FID must be symmetric");

  // 1-D closed form on fitted moments.
  auto one_d_x = cloud(300, 1, 0.0);
  auto one_d_y = cloud(300, 1, 1.0);
  auto fit = [](const std::vector<SemanticVector>& s) {
    double mean = 0.0;
    for (const auto& v : s) mean += v[0];
    mean /= static_cast<double>(s.size());
    double var = 0.0;
    for (const auto& v : s) var += (v[0] - mean) * (v[0] - mean);
    var /= static_cast<double>(s.size() - 1);
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  auto [m1, s1] = fit(one_d_x);
  auto [m2, s2] = fit(one_d_y);
  double closed = (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2);
  double got = frechet_distance(EmbeddingSet::from_samples(one_d_x),
                                EmbeddingSet::from_samples(one_d_y));
  c.detail("1-D closed form " + fmt(closed) + " vs " + fmt(got));
  c.expect(std::abs(got - closed) <= 1e-6, "1-D closed form violated");

  // 100 random PSD square roots.
  double worst = 0.0;
  SplitMix64 rng(23);
  for (int i = 0; i < 100; ++i) {
    int dim = 2 + i % 15;
    Eigen::MatrixXd b(dim, dim);
    for (int r = 0; r < dim; ++r)
      for (int col = 0; col < dim; ++col) b(r, col) = rng.next_symmetric();
    Eigen::MatrixXd m = b.transpose() * b;
    Eigen::MatrixXd s = matrix_sqrt_psd(m);
    worst = std::max(worst, (s * s - m).norm() / (1.0 + m.norm()));
  }
  c.detail("worst normalized sqrt residual " + fmt(worst));
  c.expect(worst <= 1e-8, "matrix sqrt residual above 1e-8");
}

// ---- criterion 6 -----------------------------------------------------------

struct DefaultStack {
  ExperimentConfig config;
  Dictionary dict;
  std::vector<Prompt> corpus;
  std::vector<Prompt> concepts;
  std::vector<std::string> keywords;
  TextEncoder encoder;

  explicit DefaultStack(const std::string& method)
      : config(default_config(method)),
        dict(Dictionary::synthetic(config.dict_size, config.dict_seed,
                                   config.dict_min_len, config.dict_max_len,
                                   {"cat", "dog", "fox"})),
        corpus(load_corpus(config.corpus_path)),
        encoder{&dict, EncoderConfig{config.dim, config.encoder_seed}} {
    for (const auto& line : load_lines(config.concepts_path))
      concepts.push_back(Prompt::parse(line));
    keywords = load_lines(config.keywords_path);
  }

  FilterPtr filter() const {
    return std::make_shared<TextImageThresholdFilter>(concepts, config.tau,
                                                      encoder);
  }
};

void criterion_end_to_end(Report* rl_report_out) {
  Criterion c(6, "end-to-end trends on the default stack");
  DefaultStack stack("rl");

  // Feasibility audit first: a seeded random scan must find, for every
  // prompt, a candidate that bypasses with similarity >= delta.
  std::size_t feasible = 0;
  const int scan_cap = 3000;
  for (std::size_t i = 0; i < stack.corpus.size(); ++i) {
    const Prompt& target = stack.corpus[i];
    SemanticVector e_t = stack.encoder.encode(target);
    SensitiveSelection sel =
        find_sensitive_tokens(target, stack.keywords, nullptr);
    SearchSpace space =
        build_search_space(target, sel.indices, stack.config.n_sub,
                           stack.config.max_subtoken_len, stack.dict);
    OracleSession audit(stack.dict,
                        OracleConfig{stack.encoder.config, stack.config.sigma,
                                     derive_seed(9000, i)},
                        stack.filter());
    SplitMix64 rng(derive_seed(9001, i));
    for (int k = 0; k < scan_cap; ++k) {
      std::vector<std::size_t> actions;
      for (std::size_t j = 0; j < space.action_length(); ++j)
        actions.push_back(rng.next_below(space.pool_size()));
      QueryResult r = audit.generate(realize(space, actions));
      if (!r.blocked &&
          cos_sim01(*r.image_embedding, e_t) >= stack.config.delta) {
        ++feasible;
        break;
      }
    }
  }
  c.detail("feasibility audit: " + std::to_string(feasible) + "/" +
           std::to_string(stack.corpus.size()) + " prompts feasible");
  c.expect(feasible == stack.corpus.size(),
           "default delta/tau leave some prompt infeasible");

  // (a) RL one-time bypass rate.
  Report rl = run_experiment(stack.config);
  c.detail("rl bypass rate " + fmt(rl.aggregates.bypass_rate) +
           ", mean queries " + fmt(rl.aggregates.queries_mean));
  c.expect(rl.aggregates.bypass_rate >= 0.8, "rl bypass rate below 0.8");

  // (b) RL spends fewer online queries than greedy.
  Report greedy = run_experiment(default_config("greedy"));
  c.detail("greedy mean queries " + fmt(greedy.aggregates.queries_mean));
  c.expect(rl.aggregates.queries_mean < greedy.aggregates.queries_mean,
           "rl must use fewer mean online queries than greedy");

  // (c) Re-use never beats one-time for the image-stage filter, and equals
  // one-time exactly for the sigma-independent text filter.
  c.expect(rl.aggregates.reuse_bypass_rate.has_value(),
           "reuse columns missing");
  if (rl.aggregates.reuse_bypass_rate) {
    c.detail("image-stage reuse rate " + fmt(*rl.aggregates.reuse_bypass_rate));
    c.expect(*rl.aggregates.reuse_bypass_rate <= rl.aggregates.bypass_rate,
             "image-stage reuse rate exceeds one-time rate");
  }
  ExperimentConfig text_config = default_config("rl");
  text_config.filter = "text-match";
  Report text = run_experiment(text_config);
  if (text.aggregates.reuse_bypass_rate) {
    c.detail("text-match one-time " + fmt(text.aggregates.bypass_rate) +
             ", reuse " + fmt(*text.aggregates.reuse_bypass_rate));
    c.expect(*text.aggregates.reuse_bypass_rate == text.aggregates.bypass_rate,
             "text-match reuse rate must equal one-time exactly");
  } else {
    c.expect(false, "text-match reuse columns missing");
  }

  if (rl_report_out) *rl_report_out = rl;
}

// ---- criterion 7 -----------------------------------------------------------

void criterion_offline_variant(const Report& rl) {
  Criterion c(7, "offline-first reward variant needs fewer online queries");
  Report offline = run_experiment(default_config("rl-offline"));

  c.detail("offline mean queries " + fmt(offline.aggregates.queries_mean) +
           " vs rl " + fmt(rl.aggregates.queries_mean));
  c.expect(offline.aggregates.queries_mean < rl.aggregates.queries_mean,
           "offline variant must use strictly fewer mean online queries");

  auto mean_similarity = [](const Report& r) {
    double sum = 0.0;
    int n = 0;
    for (const auto& row : r.rows)
      if (row.success && row.one_time_similarity) {
        sum += *row.one_time_similarity;
        ++n;
      }
    return n ? sum / n : 0.0;
  };
  double off_sim = mean_similarity(offline);
  double rl_sim = mean_similarity(rl);
  c.detail("mean image similarity offline " + fmt(off_sim) + " vs rl " +
           fmt(rl_sim));
  c.expect(off_sim <= rl_sim,
           "offline variant must not beat rl mean similarity");
}

// ---- criterion 8 -----------------------------------------------------------

void criterion_delta_sweep() {
  Criterion c(8, "delta sweep trends");
  ExperimentConfig config = default_config("rl");
  config.reference_seeds = 0;  // the sweep does not need the FID reference
  std::vector<double> deltas = {0.80, 0.83, 0.86, 0.89};
  auto points = run_sweep(config, "delta", deltas);

  std::ostringstream queries, reuse;
  int query_inversions = 0;
  int reuse_inversions = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& agg = points[i].report.aggregates;
    queries << (i ? " " : "") << fmt(agg.queries_mean);
    reuse << (i ? " " : "") << fmt(agg.reuse_bypass_rate.value_or(0.0));
    if (i > 0) {
      const auto& prev = points[i - 1].report.aggregates;
      if (agg.queries_mean < prev.queries_mean) ++query_inversions;
      if (agg.reuse_bypass_rate.value_or(0.0) >
          prev.reuse_bypass_rate.value_or(0.0))
        ++reuse_inversions;
    }
  }
  c.detail("mean queries by delta: " + queries.str());
  c.detail("reuse rate by delta:   " + reuse.str());
  c.expect(query_inversions <= 1,
           "mean online queries must be non-decreasing in delta");
  c.expect(reuse_inversions <= 1,
           "reuse bypass rate must be non-increasing in delta");
}

// ---- criterion 9 -----------------------------------------------------------

void criterion_wire_protocol() {
  Criterion c(9, "local and remote oracles are bit-equivalent");
  Dictionary dict = Dictionary::synthetic(200, 13, 2, 10, {"cat", "dog"});
  for (double sigma : {0.0, 0.1}) {
    OracleConfig config{EncoderConfig{64, 31}, sigma, 99};
    FilterPtr filter = std::make_shared<TextImageThresholdFilter>(
        std::vector<Prompt>{Prompt::parse("cat")}, 0.62,
        TextEncoder{&dict, config.encoder});
    OracleServer server(dict, config, filter);
    int port = server.start("127.0.0.1", 0);
    RemoteOracle remote("http://127.0.0.1:" + std::to_string(port));
    OracleSession local(dict, config, filter);

    int mismatches = 0;
    for (int i = 0; i < 100; ++i) {
      Prompt p = Prompt::parse((i % 4 == 0 ? "a cat number " : "a dog number ") +
                               std::to_string(i));
      std::uint64_t seed = derive_seed(500, i);
      QueryResult expected = local.generate(p, seed);
      QueryResult got = remote.generate(p, seed);
      bool same = got.blocked == expected.blocked &&
                  got.query_id == expected.query_id &&
                  got.image_embedding.has_value() ==
                      expected.image_embedding.has_value();
      if (same && got.image_embedding)
        same = *got.image_embedding == *expected.image_embedding;
      if (!same) ++mismatches;
    }
    server.stop();
    c.detail("sigma " + fmt(sigma) + ": " + std::to_string(mismatches) +
             "/100 mismatches");
    c.expect(mismatches == 0, "remote results differ from local");
  }
}

// ---- criterion 10 ----------------------------------------------------------

void criterion_determinism(const Report& first) {
  Criterion c(10, "end-to-end experiment is byte-deterministic");
  Report second = run_experiment(default_config("rl"));
  std::string a = report_to_json(first).dump(2);
  std::string b = report_to_json(second).dump(2);
  c.expect(a == b, "two identical runs produced different report JSON");
  c.detail("report bytes: " + std::to_string(a.size()));
}

}  // namespace

int main() {
  std::printf("acceptance suite (data: %s)\n", kData.c_str());
  criterion_gradient();
  criterion_reward();
  criterion_baseline_equivalence();
  criterion_query_contracts();
  criterion_frechet();
  Report rl_report;
  criterion_end_to_end(&rl_report);
  criterion_offline_variant(rl_report);
  criterion_delta_sweep();
  criterion_wire_protocol();
  criterion_determinism(rl_report);
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
