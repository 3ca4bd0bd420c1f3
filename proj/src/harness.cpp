#include "promptsearch/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "promptsearch/errors.hpp"
#include "promptsearch/filters.hpp"
#include "promptsearch/metrics.hpp"
#include "promptsearch/oracle.hpp"
#include "promptsearch/oracle_client.hpp"
#include "promptsearch/oracle_server.hpp"
#include "promptsearch/rl_agent.hpp"
#include "promptsearch/rng.hpp"
#include "promptsearch/search_baselines.hpp"
#include "promptsearch/sensitivity.hpp"

namespace promptsearch {

using nlohmann::ordered_json;

namespace {

const std::set<std::string> kMethods = {"rl", "rl-offline", "brute", "greedy",
                                        "beam"};
const std::set<std::string> kFilters = {"none",          "always-block",
                                        "text-match",    "text-classifier",
                                        "image-threshold", "text-image-threshold"};

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + value +
                      "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an unsigned integer: '" +
                      value + "'");
  }
}

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an integer: '" + value +
                      "'");
  }
}

std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = s[i];
    std::size_t extra;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      extra = 1;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      extra = 2;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      unsigned char cc = s[i + k];
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    if (extra == 1 && cp < 0x80) return false;
    if (extra == 2 && cp < 0x800) return false;
    if (extra == 3 && cp < 0x10000) return false;
    if (cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
    i += extra + 1;
  }
  return true;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::map<std::string, std::string> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    values[key] = value;
  }
  return values;
}

ExperimentConfig config_from_key_values(
    const std::map<std::string, std::string>& values) {
  ExperimentConfig c;
  auto it = values.find("method");
  if (it != values.end()) c.method = it->second;
  if (!kMethods.count(c.method))
    throw ConfigError("unknown method: '" + c.method + "'");

  // Method-dependent defaults, overridable below.
  if (c.method == "rl-offline") {
    c.delta = 0.60;
    c.max_epochs = 30;
    c.max_subtoken_len = 3;
  }

  for (const auto& [key, value] : values) {
    if (key == "method") {
    } else if (key == "dim") {
      c.dim = to_int(key, value);
    } else if (key == "encoder_seed") {
      c.encoder_seed = to_u64(key, value);
    } else if (key == "dictionary_path") {
      c.dictionary_path = value;
    } else if (key == "dict_size") {
      c.dict_size = to_u64(key, value);
    } else if (key == "dict_seed") {
      c.dict_seed = to_u64(key, value);
    } else if (key == "dict_min_len") {
      c.dict_min_len = to_u64(key, value);
    } else if (key == "dict_max_len") {
      c.dict_max_len = to_u64(key, value);
    } else if (key == "sigma") {
      c.sigma = to_double(key, value);
    } else if (key == "filter") {
      c.filter = value;
    } else if (key == "tau") {
      c.tau = to_double(key, value);
    } else if (key == "per_concept_tau") {
      c.per_concept_tau = value;
    } else if (key == "keywords_path") {
      c.keywords_path = value;
    } else if (key == "concepts_path") {
      c.concepts_path = value;
    } else if (key == "classifier_positive_path") {
      c.classifier_positive_path = value;
    } else if (key == "classifier_negative_path") {
      c.classifier_negative_path = value;
    } else if (key == "classifier_epochs") {
      c.classifier_epochs = to_int(key, value);
    } else if (key == "classifier_lr") {
      c.classifier_lr = to_double(key, value);
    } else if (key == "classifier_seed") {
      c.classifier_seed = to_u64(key, value);
    } else if (key == "classifier_weights_path") {
      c.classifier_weights_path = value;
    } else if (key == "oracle_url") {
      c.oracle_url = value;
    } else if (key == "delta") {
      c.delta = to_double(key, value);
    } else if (key == "max_epochs") {
      c.max_epochs = to_int(key, value);
    } else if (key == "learning_rate") {
      c.learning_rate = to_double(key, value);
    } else if (key == "discount") {
      c.discount = to_double(key, value);
    } else if (key == "n_sub") {
      c.n_sub = to_int(key, value);
    } else if (key == "max_subtoken_len") {
      c.max_subtoken_len = to_u64(key, value);
    } else if (key == "beam_width") {
      c.beam_width = to_int(key, value);
    } else if (key == "brute_cap") {
      c.brute_cap = to_u64(key, value);
    } else if (key == "search_cap") {
      c.search_cap = to_u64(key, value);
    } else if (key == "policy_hidden") {
      c.policy_hidden = to_int(key, value);
    } else if (key == "policy_embed") {
      c.policy_embed = to_int(key, value);
    } else if (key == "offline_inner_cap") {
      c.offline_inner_cap = to_int(key, value);
    } else if (key == "corpus_path") {
      c.corpus_path = value;
    } else if (key == "master_seed") {
      c.master_seed = to_u64(key, value);
    } else if (key == "repetitions") {
      c.repetitions = to_int(key, value);
    } else if (key == "reference_seeds") {
      c.reference_seeds = to_int(key, value);
    } else {
      throw ConfigError("unknown config key: '" + key + "'");
    }
  }

  if (!kFilters.count(c.filter))
    throw ConfigError("unknown filter: '" + c.filter + "'");
  if (c.dim < 1) throw ConfigError("dim must be >= 1");
  if (c.sigma < 0.0) throw ConfigError("sigma must be >= 0");
  if (c.tau < 0.0 || c.tau > 1.0) throw ConfigError("tau must be in [0, 1]");
  if (c.delta < 0.0 || c.delta > 1.0)
    throw ConfigError("delta must be in [0, 1]");
  if (c.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (c.n_sub < 1) throw ConfigError("n_sub must be >= 1");
  if (c.beam_width < 1) throw ConfigError("beam_width must be >= 1");
  if (c.repetitions < 0) throw ConfigError("repetitions must be >= 0");
  if (c.reference_seeds < 0) throw ConfigError("reference_seeds must be >= 0");
  if (c.policy_hidden < 1 || c.policy_embed < 1)
    throw ConfigError("policy dimensions must be >= 1");
  if (c.offline_inner_cap < 1)
    throw ConfigError("offline_inner_cap must be >= 1");
  return c;
}

std::vector<Prompt> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open corpus file: " + path);
  std::vector<Prompt> prompts;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() > 512)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": line exceeds 512 bytes");
    if (!valid_utf8(line))
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": invalid UTF-8");
    if (trim(line).empty()) continue;
    prompts.push_back(Prompt::parse(line));
  }
  return prompts;
}

namespace {

struct ExperimentSetup {
  Dictionary dict;
  EncoderConfig encoder_cfg;
  std::vector<std::string> keywords;
  std::vector<Prompt> concepts;
  std::optional<TextClassifier> classifier;
  FilterPtr filter;
  FilterPtr permissive;

  TextEncoder encoder() const { return TextEncoder{&dict, encoder_cfg}; }
};

std::vector<double> parse_tau_overrides(const std::string& spec) {
  std::vector<double> taus;
  if (spec.empty()) return taus;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ','))
    taus.push_back(to_double("per_concept_tau", trim(item)));
  return taus;
}

ExperimentSetup build_setup(const ExperimentConfig& config) {
  ExperimentSetup setup;
  setup.encoder_cfg = EncoderConfig{config.dim, config.encoder_seed};

  for (const auto& line : load_lines(config.keywords_path)) {
    std::string k = line;
    std::transform(k.begin(), k.end(), k.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    setup.keywords.push_back(k);
  }
  for (const auto& line : load_lines(config.concepts_path))
    setup.concepts.push_back(Prompt::parse(line));

  if (!config.dictionary_path.empty()) {
    setup.dict = Dictionary::load(config.dictionary_path);
  } else {
    std::vector<std::string> extra;
    auto add_alpha_tokens = [&](const std::vector<std::string>& words) {
      for (const auto& w : words)
        if (!w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char ch) {
              return ch >= 'a' && ch <= 'z';
            }))
          extra.push_back(w);
    };
    add_alpha_tokens(setup.keywords);
    for (const auto& cp : setup.concepts) add_alpha_tokens(cp.tokens);
    setup.dict = Dictionary::synthetic(config.dict_size, config.dict_seed,
                                       config.dict_min_len, config.dict_max_len,
                                       extra);
  }

  if (!config.classifier_weights_path.empty()) {
    setup.classifier = TextClassifier::load(config.classifier_weights_path);
  } else if (!config.classifier_positive_path.empty() &&
             !config.classifier_negative_path.empty()) {
    std::vector<Prompt> positive, negative;
    for (const auto& line : load_lines(config.classifier_positive_path))
      positive.push_back(Prompt::parse(line));
    for (const auto& line : load_lines(config.classifier_negative_path))
      negative.push_back(Prompt::parse(line));
    setup.classifier = train_text_classifier(
        positive, negative, config.classifier_epochs, config.classifier_lr,
        config.classifier_seed);
  }

  TextEncoder encoder = setup.encoder();
  std::vector<double> tau_overrides = parse_tau_overrides(config.per_concept_tau);
  if (config.filter == "none") {
    setup.filter = std::make_shared<PermissiveFilter>();
  } else if (config.filter == "always-block") {
    setup.filter = std::make_shared<AlwaysBlockFilter>();
  } else if (config.filter == "text-match") {
    setup.filter = std::make_shared<TextMatchFilter>(setup.keywords);
  } else if (config.filter == "text-classifier") {
    if (!setup.classifier)
      throw ConfigError("text-classifier filter needs trained weights");
    setup.filter = std::make_shared<TextClassifierFilter>(*setup.classifier);
  } else if (config.filter == "image-threshold") {
    std::vector<SemanticVector> vectors;
    for (const auto& cp : setup.concepts) vectors.push_back(encoder.encode(cp));
    setup.filter = std::make_shared<ImageThresholdFilter>(
        std::move(vectors), config.tau, tau_overrides);
  } else if (config.filter == "text-image-threshold") {
    setup.filter = std::make_shared<TextImageThresholdFilter>(
        setup.concepts, config.tau, encoder, tau_overrides);
  } else {
    throw ConfigError("unknown filter: '" + config.filter + "'");
  }
  setup.permissive = std::make_shared<PermissiveFilter>();
  return setup;
}

RlConfig rl_config_from(const ExperimentConfig& config,
                        std::uint64_t policy_seed, std::uint64_t sample_seed) {
  RlConfig rc;
  rc.delta = config.delta;
  rc.max_epochs = config.max_epochs;
  rc.learning_rate = config.learning_rate;
  rc.discount = config.discount;
  rc.n_sub = config.n_sub;
  rc.max_subtoken_len = config.max_subtoken_len;
  rc.hidden = config.policy_hidden;
  rc.embed_dim = config.policy_embed;
  rc.policy_seed = policy_seed;
  rc.sample_seed = sample_seed;
  rc.offline_inner_cap = config.offline_inner_cap;
  return rc;
}

AttackOutcome attack_one(const Prompt& target, Oracle& oracle,
                         const ExperimentSetup& setup, const TextEncoder& encoder,
                         const ExperimentConfig& config,
                         std::uint64_t policy_seed, std::uint64_t sample_seed) {
  AttackEnv env;
  env.encoder = &encoder;
  env.keywords = setup.keywords;
  env.classifier = setup.classifier ? &*setup.classifier : nullptr;

  if (config.method == "rl")
    return run_attack(target, oracle, env,
                      rl_config_from(config, policy_seed, sample_seed));
  if (config.method == "rl-offline")
    return run_attack_offline_first(
        target, oracle, env, rl_config_from(config, policy_seed, sample_seed));

  SensitiveSelection selection =
      find_sensitive_tokens(target, env.keywords, env.classifier);
  SearchSpace space =
      build_search_space(target, selection.indices, config.n_sub,
                         config.max_subtoken_len, setup.dict);
  SemanticVector target_embedding = encoder.encode(target);
  if (config.method == "brute")
    return brute_force_search(space, oracle, target_embedding, config.delta,
                              config.brute_cap)
        .outcome;
  if (config.method == "greedy")
    return greedy_search(space, oracle, target_embedding, config.delta,
                         config.search_cap)
        .outcome;
  return beam_search(space, oracle, target_embedding, config.delta,
                     config.beam_width, config.search_cap)
      .outcome;
}

}  // namespace

ReportAggregates recompute_aggregates(const std::vector<ReportRow>& rows,
                                      std::optional<double> frechet,
                                      std::optional<std::uint64_t> excluded,
                                      bool with_reuse) {
  ReportAggregates agg;
  agg.frechet = frechet;
  const double n = static_cast<double>(rows.size());
  std::size_t successes = 0;
  for (const auto& row : rows) {
    if (row.success) ++successes;
    agg.queries_total += row.online_queries;
  }
  agg.bypass_rate = rows.empty() ? 0.0 : successes / n;
  agg.queries_mean =
      rows.empty() ? 0.0 : static_cast<double>(agg.queries_total) / n;
  if (rows.size() > 1) {
    double ss = 0.0;
    for (const auto& row : rows) {
      double d = static_cast<double>(row.online_queries) - agg.queries_mean;
      ss += d * d;
    }
    agg.queries_sd = std::sqrt(ss / (n - 1.0));
  }
  if (with_reuse) {
    double bypass_sum = 0.0;
    double semantic_sum = 0.0;
    for (const auto& row : rows) {
      if (row.reuse_bypass_fraction) bypass_sum += *row.reuse_bypass_fraction;
      if (row.reuse_success_fraction)
        semantic_sum += *row.reuse_success_fraction;
    }
    agg.reuse_bypass_rate = rows.empty() ? 0.0 : bypass_sum / n;
    agg.reuse_semantic_rate = rows.empty() ? 0.0 : semantic_sum / n;
    agg.reuse_blocked_excluded = excluded.value_or(0);
  }
  return agg;
}

Report run_experiment(const ExperimentConfig& config) {
  std::vector<Prompt> corpus = load_corpus(config.corpus_path);
  if (corpus.empty()) throw ConfigError("corpus is empty: " + config.corpus_path);
  ExperimentSetup setup = build_setup(config);
  TextEncoder encoder = setup.encoder();
  const bool remote = !config.oracle_url.empty();
  const bool with_reuse = config.repetitions > 0;

  std::unique_ptr<RemoteOracle> remote_oracle;
  if (remote) remote_oracle = std::make_unique<RemoteOracle>(config.oracle_url);

  Report report;
  report.config = config;
  std::vector<SemanticVector> adversarial_pool;
  std::uint64_t reuse_blocked = 0;

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Prompt& target = corpus[i];
    const std::uint64_t child = derive_seed(config.master_seed, i);
    ReportRow row;
    row.id = static_cast<int>(i);
    row.target = target.raw;
    try {
      SemanticVector target_embedding = encoder.encode(target);
      std::unique_ptr<OracleSession> session;
      Oracle* oracle = remote_oracle.get();
      std::uint64_t remote_before = remote ? remote_oracle->query_count() : 0;
      if (!remote) {
        session = std::make_unique<OracleSession>(
            setup.dict,
            OracleConfig{setup.encoder_cfg, config.sigma,
                         derive_seed(child, 0)},
            setup.filter);
        oracle = session.get();
      }

      AttackOutcome outcome =
          attack_one(target, *oracle, setup, encoder, config,
                     derive_seed(child, 1), derive_seed(child, 2));
      row.success = outcome.success;
      row.online_queries = remote
                               ? remote_oracle->query_count() - remote_before
                               : outcome.online_queries;
      row.epochs = outcome.epochs_used;
      row.expansions = outcome.expansion_count;
      if (outcome.adversarial_prompt)
        row.adversarial = outcome.adversarial_prompt->raw;
      if (outcome.image_embedding)
        row.one_time_similarity =
            cos_sim01(*outcome.image_embedding, target_embedding);
      if (outcome.success && outcome.image_embedding)
        adversarial_pool.push_back(*outcome.image_embedding);

      if (with_reuse && outcome.success && outcome.adversarial_prompt) {
        std::unique_ptr<OracleSession> replay_session;
        Oracle* replay = remote_oracle.get();
        if (!remote) {
          replay_session = std::make_unique<OracleSession>(
              setup.dict,
              OracleConfig{setup.encoder_cfg, config.sigma,
                           derive_seed(child, 3)},
              setup.filter);
          replay = replay_session.get();
        }
        // For the offline reward the similarity is text-to-text and does not
        // vary with the generator seed.
        std::optional<double> text_similarity;
        if (config.method == "rl-offline")
          text_similarity = l2_sim01(
              encoder.encode(*outcome.adversarial_prompt), target_embedding);
        int bypassed = 0;
        int semantic = 0;
        for (int r = 0; r < config.repetitions; ++r) {
          QueryResult res = replay->generate(
              *outcome.adversarial_prompt,
              derive_seed(child, 100 + static_cast<std::uint64_t>(r)));
          if (res.blocked) {
            ++reuse_blocked;
            continue;
          }
          ++bypassed;
          adversarial_pool.push_back(*res.image_embedding);
          double sim = text_similarity
                           ? *text_similarity
                           : cos_sim01(*res.image_embedding, target_embedding);
          if (sim >= config.delta) ++semantic;
        }
        row.reuse_bypass_fraction =
            static_cast<double>(bypassed) / config.repetitions;
        row.reuse_success_fraction =
            static_cast<double>(semantic) / config.repetitions;
      }
    } catch (const std::exception& e) {
      std::cerr << "prompt " << i << " failed: " << e.what() << "\n";
      row.error = true;
      row.success = false;
    }
    report.rows.push_back(std::move(row));
  }

  // Unfiltered target generations as the distribution reference.
  std::optional<double> frechet;
  if (!remote && config.reference_seeds > 0) {
    std::vector<SemanticVector> reference_pool;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const std::uint64_t child = derive_seed(config.master_seed, i);
      OracleSession reference_session(
          setup.dict,
          OracleConfig{setup.encoder_cfg, config.sigma, derive_seed(child, 4)},
          setup.permissive);
      for (int r = 0; r < config.reference_seeds; ++r) {
        QueryResult res = reference_session.generate(
            corpus[i], derive_seed(child, 1000 + static_cast<std::uint64_t>(r)));
        reference_pool.push_back(*res.image_embedding);
      }
    }
    if (adversarial_pool.size() >= 2 && reference_pool.size() >= 2)
      frechet = frechet_distance(EmbeddingSet::from_samples(adversarial_pool),
                                 EmbeddingSet::from_samples(reference_pool));
  }

  report.aggregates = recompute_aggregates(
      report.rows, frechet,
      with_reuse ? std::optional<std::uint64_t>(reuse_blocked) : std::nullopt,
      with_reuse);
  return report;
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& config,
                                  const std::string& axis,
                                  const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (axis != "delta" && axis != "l")
    throw ConfigError("sweep axis must be 'delta' or 'l'");
  std::vector<SweepPoint> points;
  for (double v : values) {
    ExperimentConfig point_config = config;
    if (axis == "delta") {
      point_config.delta = v;
    } else {
      if (v < 1.0 || v != std::floor(v))
        throw ConfigError("sweep over l needs positive integer values");
      point_config.max_subtoken_len = static_cast<std::uint64_t>(v);
    }
    points.push_back({v, run_experiment(point_config)});
  }
  return points;
}

ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["dim"] = c.dim;
  j["encoder_seed"] = c.encoder_seed;
  j["dictionary_path"] = c.dictionary_path;
  j["dict_size"] = c.dict_size;
  j["dict_seed"] = c.dict_seed;
  j["dict_min_len"] = c.dict_min_len;
  j["dict_max_len"] = c.dict_max_len;
  j["sigma"] = c.sigma;
  j["filter"] = c.filter;
  j["tau"] = c.tau;
  j["per_concept_tau"] = c.per_concept_tau;
  j["keywords_path"] = c.keywords_path;
  j["concepts_path"] = c.concepts_path;
  j["classifier_positive_path"] = c.classifier_positive_path;
  j["classifier_negative_path"] = c.classifier_negative_path;
  j["classifier_epochs"] = c.classifier_epochs;
  j["classifier_lr"] = c.classifier_lr;
  j["classifier_seed"] = c.classifier_seed;
  j["classifier_weights_path"] = c.classifier_weights_path;
  j["oracle_url"] = c.oracle_url;
  j["method"] = c.method;
  j["delta"] = c.delta;
  j["max_epochs"] = c.max_epochs;
  j["learning_rate"] = c.learning_rate;
  j["discount"] = c.discount;
  j["n_sub"] = c.n_sub;
  j["max_subtoken_len"] = c.max_subtoken_len;
  j["beam_width"] = c.beam_width;
  j["brute_cap"] = c.brute_cap;
  j["search_cap"] = c.search_cap;
  j["policy_hidden"] = c.policy_hidden;
  j["policy_embed"] = c.policy_embed;
  j["offline_inner_cap"] = c.offline_inner_cap;
  j["corpus_path"] = c.corpus_path;
  j["master_seed"] = c.master_seed;
  j["repetitions"] = c.repetitions;
  j["reference_seeds"] = c.reference_seeds;
  return j;
}

namespace {

ordered_json row_to_json(const ReportRow& row, bool with_reuse) {
  ordered_json j;
  j["id"] = row.id;
  j["target"] = row.target;
  j["adversarial"] =
      row.adversarial ? ordered_json(*row.adversarial) : ordered_json(nullptr);
  j["success"] = row.success;
  j["one_time_similarity"] = row.one_time_similarity
                                 ? ordered_json(*row.one_time_similarity)
                                 : ordered_json(nullptr);
  if (with_reuse)
    j["reuse_success_fraction"] = row.reuse_success_fraction
                                      ? ordered_json(*row.reuse_success_fraction)
                                      : ordered_json(nullptr);
  j["online_queries"] = row.online_queries;
  j["epochs"] = row.epochs;
  j["expansions"] = row.expansions;
  if (with_reuse)
    j["reuse_bypass_fraction"] = row.reuse_bypass_fraction
                                     ? ordered_json(*row.reuse_bypass_fraction)
                                     : ordered_json(nullptr);
  return j;
}

}  // namespace

ordered_json report_to_json(const Report& report) {
  const bool with_reuse = report.aggregates.reuse_bypass_rate.has_value();
  ordered_json j;
  j["version"] = report.version;
  j["config"] = config_to_json(report.config);
  ordered_json rows = ordered_json::array();
  for (const auto& row : report.rows) rows.push_back(row_to_json(row, with_reuse));
  j["prompts"] = std::move(rows);
  ordered_json agg;
  agg["bypass_rate"] = report.aggregates.bypass_rate;
  if (with_reuse) agg["reuse_bypass_rate"] = *report.aggregates.reuse_bypass_rate;
  agg["frechet"] = report.aggregates.frechet
                       ? ordered_json(*report.aggregates.frechet)
                       : ordered_json(nullptr);
  agg["queries_mean"] = report.aggregates.queries_mean;
  agg["queries_sd"] = report.aggregates.queries_sd;
  if (with_reuse) {
    agg["reuse_semantic_rate"] = *report.aggregates.reuse_semantic_rate;
    agg["reuse_blocked_excluded"] = *report.aggregates.reuse_blocked_excluded;
  }
  agg["queries_total"] = report.aggregates.queries_total;
  j["aggregates"] = std::move(agg);
  return j;
}

ExperimentConfig config_from_json(const ordered_json& j) {
  ExperimentConfig c;
  c.dim = j.at("dim").get<int>();
  c.encoder_seed = j.at("encoder_seed").get<std::uint64_t>();
  c.dictionary_path = j.at("dictionary_path").get<std::string>();
  c.dict_size = j.at("dict_size").get<std::uint64_t>();
  c.dict_seed = j.at("dict_seed").get<std::uint64_t>();
  c.dict_min_len = j.at("dict_min_len").get<std::uint64_t>();
  c.dict_max_len = j.at("dict_max_len").get<std::uint64_t>();
  c.sigma = j.at("sigma").get<double>();
  c.filter = j.at("filter").get<std::string>();
  c.tau = j.at("tau").get<double>();
  c.per_concept_tau = j.at("per_concept_tau").get<std::string>();
  c.keywords_path = j.at("keywords_path").get<std::string>();
  c.concepts_path = j.at("concepts_path").get<std::string>();
  c.classifier_positive_path =
      j.at("classifier_positive_path").get<std::string>();
  c.classifier_negative_path =
      j.at("classifier_negative_path").get<std::string>();
  c.classifier_epochs = j.at("classifier_epochs").get<int>();
  c.classifier_lr = j.at("classifier_lr").get<double>();
  c.classifier_seed = j.at("classifier_seed").get<std::uint64_t>();
  c.classifier_weights_path =
      j.at("classifier_weights_path").get<std::string>();
  c.oracle_url = j.at("oracle_url").get<std::string>();
  c.method = j.at("method").get<std::string>();
  c.delta = j.at("delta").get<double>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.discount = j.at("discount").get<double>();
  c.n_sub = j.at("n_sub").get<int>();
  c.max_subtoken_len = j.at("max_subtoken_len").get<std::uint64_t>();
  c.beam_width = j.at("beam_width").get<int>();
  c.brute_cap = j.at("brute_cap").get<std::uint64_t>();
  c.search_cap = j.at("search_cap").get<std::uint64_t>();
  c.policy_hidden = j.at("policy_hidden").get<int>();
  c.policy_embed = j.at("policy_embed").get<int>();
  c.offline_inner_cap = j.at("offline_inner_cap").get<int>();
  c.corpus_path = j.at("corpus_path").get<std::string>();
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  c.repetitions = j.at("repetitions").get<int>();
  c.reference_seeds = j.at("reference_seeds").get<int>();
  return c;
}

Report report_from_json(const ordered_json& j) {
  Report report;
  report.version = j.at("version").get<std::string>();
  report.config = config_from_json(j.at("config"));
  for (const auto& row_json : j.at("prompts")) {
    ReportRow row;
    row.id = row_json.at("id").get<int>();
    row.target = row_json.at("target").get<std::string>();
    if (!row_json.at("adversarial").is_null())
      row.adversarial = row_json.at("adversarial").get<std::string>();
    row.success = row_json.at("success").get<bool>();
    if (!row_json.at("one_time_similarity").is_null())
      row.one_time_similarity = row_json.at("one_time_similarity").get<double>();
    if (row_json.contains("reuse_success_fraction") &&
        !row_json.at("reuse_success_fraction").is_null())
      row.reuse_success_fraction =
          row_json.at("reuse_success_fraction").get<double>();
    row.online_queries = row_json.at("online_queries").get<std::uint64_t>();
    row.epochs = row_json.at("epochs").get<int>();
    row.expansions = row_json.at("expansions").get<int>();
    if (row_json.contains("reuse_bypass_fraction") &&
        !row_json.at("reuse_bypass_fraction").is_null())
      row.reuse_bypass_fraction =
          row_json.at("reuse_bypass_fraction").get<double>();
    report.rows.push_back(std::move(row));
  }
  const auto& agg = j.at("aggregates");
  report.aggregates.bypass_rate = agg.at("bypass_rate").get<double>();
  if (agg.contains("reuse_bypass_rate"))
    report.aggregates.reuse_bypass_rate =
        agg.at("reuse_bypass_rate").get<double>();
  if (!agg.at("frechet").is_null())
    report.aggregates.frechet = agg.at("frechet").get<double>();
  report.aggregates.queries_mean = agg.at("queries_mean").get<double>();
  report.aggregates.queries_sd = agg.at("queries_sd").get<double>();
  if (agg.contains("reuse_semantic_rate"))
    report.aggregates.reuse_semantic_rate =
        agg.at("reuse_semantic_rate").get<double>();
  if (agg.contains("reuse_blocked_excluded"))
    report.aggregates.reuse_blocked_excluded =
        agg.at("reuse_blocked_excluded").get<std::uint64_t>();
  report.aggregates.queries_total = agg.at("queries_total").get<std::uint64_t>();
  return report;
}

std::string report_to_csv(const Report& report) {
  const bool with_reuse = report.aggregates.reuse_bypass_rate.has_value();
  std::ostringstream out;
  out << "id,target,adversarial,success,one_time_similarity";
  if (with_reuse) out << ",reuse_success_fraction";
  out << ",online_queries,epochs,expansions";
  if (with_reuse) out << ",reuse_bypass_fraction";
  out << "\n";
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char ch : s) {
      if (ch == '"') quoted += "\"\"";
      else quoted.push_back(ch);
    }
    quoted += "\"";
    return quoted;
  };
  for (const auto& row : report.rows) {
    out << row.id << ',' << quote(row.target) << ','
        << (row.adversarial ? quote(*row.adversarial) : "") << ','
        << (row.success ? "true" : "false") << ','
        << (row.one_time_similarity ? format_double(*row.one_time_similarity)
                                    : "");
    if (with_reuse)
      out << ','
          << (row.reuse_success_fraction
                  ? format_double(*row.reuse_success_fraction)
                  : "");
    out << ',' << row.online_queries << ',' << row.epochs << ','
        << row.expansions;
    if (with_reuse)
      out << ','
          << (row.reuse_bypass_fraction
                  ? format_double(*row.reuse_bypass_fraction)
                  : "");
    out << "\n";
  }
  return out.str();
}

void emit_report(const Report& report, const std::string& path,
                 const std::string& format) {
  const bool with_reuse = report.aggregates.reuse_bypass_rate.has_value();
  ReportAggregates check = recompute_aggregates(
      report.rows, report.aggregates.frechet,
      report.aggregates.reuse_blocked_excluded, with_reuse);
  if (check.bypass_rate != report.aggregates.bypass_rate ||
      check.queries_mean != report.aggregates.queries_mean ||
      check.queries_sd != report.aggregates.queries_sd ||
      check.queries_total != report.aggregates.queries_total ||
      check.reuse_bypass_rate != report.aggregates.reuse_bypass_rate ||
      check.reuse_semantic_rate != report.aggregates.reuse_semantic_rate)
    throw std::logic_error("report aggregates do not match rows");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write report file: " + path);
  if (format == "json") {
    out << report_to_json(report).dump(2) << "\n";
  } else if (format == "csv") {
    out << report_to_csv(report);
  } else {
    throw ConfigError("unknown report format: '" + format + "'");
  }
  if (!out) throw ConfigError("failed writing report file: " + path);
}

std::string sweep_to_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << "value,bypass_rate,reuse_bypass_rate,frechet,queries_mean\n";
  for (const auto& point : points) {
    const auto& agg = point.report.aggregates;
    out << format_double(point.value) << ',' << format_double(agg.bypass_rate)
        << ','
        << (agg.reuse_bypass_rate ? format_double(*agg.reuse_bypass_rate) : "")
        << ',' << (agg.frechet ? format_double(*agg.frechet) : "") << ','
        << format_double(agg.queries_mean) << "\n";
  }
  return out.str();
}

void serve_oracle_blocking(const ExperimentConfig& config,
                           const std::string& host, int port) {
  ExperimentSetup setup = build_setup(config);
  OracleServer server(setup.dict,
                      OracleConfig{setup.encoder_cfg, config.sigma,
                                   derive_seed(config.master_seed, 0)},
                      setup.filter);
  server.serve(host, port);
}

ordered_json outcome_to_json(const AttackOutcome& outcome) {
  ordered_json j;
  j["success"] = outcome.success;
  j["adversarial"] = outcome.adversarial_prompt
                         ? ordered_json(outcome.adversarial_prompt->raw)
                         : ordered_json(nullptr);
  j["best_reward"] = outcome.best_reward;
  j["online_queries"] = outcome.online_queries;
  j["epochs"] = outcome.epochs_used;
  j["expansions"] = outcome.expansion_count;
  ordered_json trace = ordered_json::array();
  for (const auto& t : outcome.trace) {
    ordered_json e;
    e["epoch"] = t.epoch;
    e["actions"] = t.actions;
    e["log_prob"] = t.log_prob;
    e["reward"] = t.reward;
    e["prompt"] = t.prompt.raw;
    e["blocked"] = t.result.blocked;
    trace.push_back(std::move(e));
  }
  j["trace"] = std::move(trace);
  return j;
}

}  // namespace promptsearch
