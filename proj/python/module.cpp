#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "promptsearch/embedding.hpp"
#include "promptsearch/errors.hpp"
#include "promptsearch/filters.hpp"
#include "promptsearch/harness.hpp"
#include "promptsearch/metrics.hpp"
#include "promptsearch/oracle.hpp"
#include "promptsearch/oracle_client.hpp"
#include "promptsearch/oracle_server.hpp"
#include "promptsearch/rl_agent.hpp"
#include "promptsearch/search_baselines.hpp"
#include "promptsearch/sensitivity.hpp"

namespace py = pybind11;
using namespace promptsearch;

namespace {

RlConfig rl_config_from_kwargs(double delta, int max_epochs,
                               double learning_rate, int n_sub,
                               std::size_t max_subtoken_len, int hidden,
                               int embed_dim, std::uint64_t policy_seed,
                               std::uint64_t sample_seed,
                               int offline_inner_cap) {
  RlConfig c;
  c.delta = delta;
  c.max_epochs = max_epochs;
  c.learning_rate = learning_rate;
  c.n_sub = n_sub;
  c.max_subtoken_len = max_subtoken_len;
  c.hidden = hidden;
  c.embed_dim = embed_dim;
  c.policy_seed = policy_seed;
  c.sample_seed = sample_seed;
  c.offline_inner_cap = offline_inner_cap;
  return c;
}

}  // namespace

PYBIND11_MODULE(promptsearch, m) {
  m.doc() = "Closed-box adversarial prompt search against simulated "
            "text-to-image oracles";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<BudgetError>(m, "BudgetError");
  py::register_exception<TrainingError>(m, "TrainingError");
  py::register_exception<TransportError>(m, "TransportError");

  py::class_<Prompt>(m, "Prompt")
      .def_static("parse", &Prompt::parse)
      .def_readonly("raw", &Prompt::raw)
      .def_readonly("tokens", &Prompt::tokens)
      .def("__len__", &Prompt::length)
      .def("__repr__",
           [](const Prompt& p) { return "Prompt('" + p.raw + "')"; });

  py::class_<Dictionary>(m, "Dictionary")
      .def_static("load", &Dictionary::load)
      .def_static("synthetic", &Dictionary::synthetic, py::arg("count"),
                  py::arg("seed"), py::arg("min_len") = 2,
                  py::arg("max_len") = 12,
                  py::arg("extra") = std::vector<std::string>{})
      .def("tokens", &Dictionary::tokens)
      .def("contains", &Dictionary::contains)
      .def("subset_max_len", &Dictionary::subset_max_len)
      .def("__len__", &Dictionary::size);

  m.def("hash_token", &hash_token);
  m.def("token_vector", &token_vector, py::arg("token"), py::arg("dim"),
        py::arg("encoder_seed"));
  m.def("encode_prompt", &encode_prompt, py::arg("prompt"), py::arg("dict"),
        py::arg("dim"), py::arg("encoder_seed"));
  m.def("segment_word", &segment_word);
  m.def("cos_sim01", &cos_sim01);
  m.def("l2_sim01", &l2_sim01);

  py::class_<TextClassifier>(m, "TextClassifier")
      .def("classify",
           py::overload_cast<const Prompt&>(&TextClassifier::classify,
                                            py::const_))
      .def("save", &TextClassifier::save)
      .def_static("load", &TextClassifier::load);
  m.def("train_text_classifier", &train_text_classifier, py::arg("positive"),
        py::arg("negative"), py::arg("epochs"), py::arg("learning_rate"),
        py::arg("seed"));

  using PyFilterPtr = std::shared_ptr<SafetyFilter>;
  py::class_<SafetyFilter, PyFilterPtr>(m, "SafetyFilter")
      .def("kind", &SafetyFilter::kind)
      .def("blocks_text", &SafetyFilter::blocks_text)
      .def("blocks_image", &SafetyFilter::blocks_image);
  m.def("text_match_filter", [](std::vector<std::string> keywords) {
    return PyFilterPtr(std::make_shared<TextMatchFilter>(std::move(keywords)));
  });
  m.def("text_classifier_filter", [](const TextClassifier& model) {
    return PyFilterPtr(std::make_shared<TextClassifierFilter>(model));
  });
  m.def(
      "image_threshold_filter",
      [](std::vector<SemanticVector> concepts, double tau) {
        return PyFilterPtr(
            std::make_shared<ImageThresholdFilter>(std::move(concepts), tau));
      },
      py::arg("concepts"), py::arg("tau"));
  m.def(
      "text_image_threshold_filter",
      [](const std::vector<Prompt>& concepts, double tau, const Dictionary& d,
         int dim, std::uint64_t encoder_seed) {
        TextEncoder encoder{&d, EncoderConfig{dim, encoder_seed}};
        return PyFilterPtr(
            std::make_shared<TextImageThresholdFilter>(concepts, tau, encoder));
      },
      py::arg("concepts"), py::arg("tau"), py::arg("dict"), py::arg("dim"),
      py::arg("encoder_seed"));
  m.def("permissive_filter",
        [] { return PyFilterPtr(std::make_shared<PermissiveFilter>()); });

  py::class_<QueryResult>(m, "QueryResult")
      .def_readonly("blocked", &QueryResult::blocked)
      .def_readonly("image_embedding", &QueryResult::image_embedding)
      .def_readonly("query_id", &QueryResult::query_id);

  py::class_<OracleConfig>(m, "OracleConfig")
      .def(py::init([](int dim, std::uint64_t encoder_seed, double sigma,
                       std::uint64_t generator_seed) {
             return OracleConfig{EncoderConfig{dim, encoder_seed}, sigma,
                                 generator_seed};
           }),
           py::arg("dim") = 64, py::arg("encoder_seed") = 1337,
           py::arg("sigma") = 0.1, py::arg("generator_seed") = 0);

  py::class_<OracleSession>(m, "OracleSession")
      .def(py::init([](const Dictionary& d, OracleConfig c,
                       std::shared_ptr<SafetyFilter> f) {
             return new OracleSession(d, std::move(c), std::move(f));
           }),
           py::keep_alive<1, 2>())
      .def("generate", &OracleSession::generate, py::arg("prompt"),
           py::arg("reuse_seed") = std::nullopt)
      .def("query_count", &OracleSession::query_count)
      .def("close", &OracleSession::close);

  py::class_<RemoteOracle>(m, "RemoteOracle")
      .def(py::init<const std::string&, int, int>(), py::arg("base_url"),
           py::arg("retries") = 3, py::arg("backoff_ms") = 100)
      .def("generate", &RemoteOracle::generate, py::arg("prompt"),
           py::arg("reuse_seed") = std::nullopt)
      .def("query_count", &RemoteOracle::query_count);

  py::class_<OracleServer>(m, "OracleServer")
      .def(py::init([](const Dictionary& d, OracleConfig c,
                       std::shared_ptr<SafetyFilter> f) {
             return new OracleServer(d, std::move(c), std::move(f));
           }),
           py::keep_alive<1, 2>())
      .def("start", &OracleServer::start, py::arg("host"), py::arg("port"))
      .def("stop", &OracleServer::stop)
      .def("query_count", &OracleServer::query_count);

  py::class_<SearchSpace>(m, "SearchSpace")
      .def_readonly("target", &SearchSpace::target)
      .def_readonly("sensitive_indices", &SearchSpace::sensitive_indices)
      .def_readonly("n_sub", &SearchSpace::n_sub)
      .def_readonly("pool", &SearchSpace::pool)
      .def("pool_size", &SearchSpace::pool_size)
      .def("action_length", &SearchSpace::action_length)
      .def("perturb_rate", &SearchSpace::perturb_rate);

  m.def(
      "find_sensitive_tokens",
      [](const Prompt& p, const std::vector<std::string>& keywords,
         const TextClassifier* classifier) {
        SensitiveSelection s = find_sensitive_tokens(p, keywords, classifier);
        return py::make_tuple(s.indices, s.keyword_path);
      },
      py::arg("prompt"), py::arg("keywords"),
      py::arg("classifier") = static_cast<const TextClassifier*>(nullptr));
  m.def("build_search_space", &build_search_space, py::arg("prompt"),
        py::arg("sensitive_indices"), py::arg("n_sub"), py::arg("l"),
        py::arg("dict"));
  m.def("expand", &expand);
  m.def("realize", [](const SearchSpace& space,
                      const std::vector<std::size_t>& actions) {
    return realize(space, actions);
  });

  py::class_<EpisodeTrace>(m, "EpisodeTrace")
      .def_readonly("epoch", &EpisodeTrace::epoch)
      .def_readonly("actions", &EpisodeTrace::actions)
      .def_readonly("log_prob", &EpisodeTrace::log_prob)
      .def_readonly("reward", &EpisodeTrace::reward)
      .def_readonly("prompt", &EpisodeTrace::prompt);

  py::class_<AttackOutcome>(m, "AttackOutcome")
      .def_readonly("success", &AttackOutcome::success)
      .def_readonly("adversarial_prompt", &AttackOutcome::adversarial_prompt)
      .def_readonly("image_embedding", &AttackOutcome::image_embedding)
      .def_readonly("best_reward", &AttackOutcome::best_reward)
      .def_readonly("online_queries", &AttackOutcome::online_queries)
      .def_readonly("epochs_used", &AttackOutcome::epochs_used)
      .def_readonly("expansion_count", &AttackOutcome::expansion_count)
      .def("to_json", [](const AttackOutcome& o) {
        return outcome_to_json(o).dump();
      });

  m.def("compute_reward", &compute_reward, py::arg("result"),
        py::arg("target_embedding"), py::arg("q"), py::arg("max_epochs"));

  m.def(
      "run_attack",
      [](const Prompt& target, OracleSession& oracle, const Dictionary& dict,
         int dim, std::uint64_t encoder_seed,
         const std::vector<std::string>& keywords,
         const TextClassifier* classifier, double delta, int max_epochs,
         double learning_rate, int n_sub, std::size_t max_subtoken_len,
         int hidden, int embed_dim, std::uint64_t policy_seed,
         std::uint64_t sample_seed, int offline_inner_cap, bool offline_first) {
        TextEncoder encoder{&dict, EncoderConfig{dim, encoder_seed}};
        AttackEnv env{&encoder, keywords, classifier};
        RlConfig config = rl_config_from_kwargs(
            delta, max_epochs, learning_rate, n_sub, max_subtoken_len, hidden,
            embed_dim, policy_seed, sample_seed, offline_inner_cap);
        return offline_first
                   ? run_attack_offline_first(target, oracle, env, config)
                   : run_attack(target, oracle, env, config);
      },
      py::arg("target"), py::arg("oracle"), py::arg("dict"),
      py::arg("dim") = 64, py::arg("encoder_seed") = 1337,
      py::arg("keywords") = std::vector<std::string>{},
      py::arg("classifier") = static_cast<const TextClassifier*>(nullptr),
      py::arg("delta") = 0.86, py::arg("max_epochs") = 60,
      py::arg("learning_rate") = 0.1, py::arg("n_sub") = 3,
      py::arg("max_subtoken_len") = 10, py::arg("hidden") = 64,
      py::arg("embed_dim") = 32, py::arg("policy_seed") = 20240601,
      py::arg("sample_seed") = 905, py::arg("offline_inner_cap") = 500,
      py::arg("offline_first") = false);

  py::class_<CandidateRecord>(m, "CandidateRecord")
      .def_readonly("prompt", &CandidateRecord::prompt)
      .def_readonly("similarity", &CandidateRecord::similarity)
      .def_readonly("blocked", &CandidateRecord::blocked)
      .def_readonly("queries_spent", &CandidateRecord::queries_spent);
  py::class_<BaselineResult>(m, "BaselineResult")
      .def_readonly("outcome", &BaselineResult::outcome)
      .def_readonly("log", &BaselineResult::log);
  m.def("brute_force_search", &brute_force_search, py::arg("space"),
        py::arg("oracle"), py::arg("target_embedding"), py::arg("delta"),
        py::arg("cap") = kBruteCapDefault);
  m.def("greedy_search", &greedy_search, py::arg("space"), py::arg("oracle"),
        py::arg("target_embedding"), py::arg("delta"),
        py::arg("cap") = kSearchCapDefault);
  m.def("beam_search", &beam_search, py::arg("space"), py::arg("oracle"),
        py::arg("target_embedding"), py::arg("delta"), py::arg("beam_width"),
        py::arg("cap") = kSearchCapDefault);

  m.def("bypass_rate", &bypass_rate);
  m.def("matrix_sqrt_psd", &matrix_sqrt_psd);
  m.def(
      "frechet_distance",
      [](const std::vector<SemanticVector>& x,
         const std::vector<SemanticVector>& y) {
        return frechet_distance(EmbeddingSet::from_samples(x),
                                EmbeddingSet::from_samples(y));
      },
      py::arg("x"), py::arg("y"));

  m.def("load_corpus", &load_corpus);
  m.def(
      "run_experiment",
      [](const std::map<std::string, std::string>& values) {
        Report report = run_experiment(config_from_key_values(values));
        return report_to_json(report).dump();
      },
      py::arg("config"),
      "Runs an experiment from config key/values; returns the report JSON");
}
