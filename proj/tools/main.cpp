#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "promptsearch/errors.hpp"
#include "promptsearch/harness.hpp"
#include "promptsearch/oracle_server.hpp"
#include "promptsearch/rng.hpp"

namespace ps = promptsearch;

namespace {

using KeyValues = std::map<std::string, std::string>;

struct CommonArgs {
  std::string config_path;
  std::shared_ptr<KeyValues> flags = std::make_shared<KeyValues>();
};

// Every config key is mirrored as a kebab-case flag; flags override the
// config file.
void add_config_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path,
                  "Config file (key = value lines)");
  static const std::vector<std::pair<const char*, const char*>> kKeys = {
      {"dim", "--dim"},
      {"encoder_seed", "--encoder-seed"},
      {"dictionary_path", "--dictionary-path"},
      {"dict_size", "--dict-size"},
      {"dict_seed", "--dict-seed"},
      {"dict_min_len", "--dict-min-len"},
      {"dict_max_len", "--dict-max-len"},
      {"sigma", "--sigma"},
      {"filter", "--filter"},
      {"tau", "--tau"},
      {"per_concept_tau", "--per-concept-tau"},
      {"keywords_path", "--keywords-path"},
      {"concepts_path", "--concepts-path"},
      {"classifier_positive_path", "--classifier-positive-path"},
      {"classifier_negative_path", "--classifier-negative-path"},
      {"classifier_epochs", "--classifier-epochs"},
      {"classifier_lr", "--classifier-lr"},
      {"classifier_seed", "--classifier-seed"},
      {"classifier_weights_path", "--classifier-weights-path"},
      {"oracle_url", "--oracle-url"},
      {"method", "--method"},
      {"delta", "--delta"},
      {"max_epochs", "--max-epochs"},
      {"learning_rate", "--learning-rate"},
      {"discount", "--discount"},
      {"n_sub", "--n-sub"},
      {"max_subtoken_len", "--max-subtoken-len"},
      {"beam_width", "--beam-width"},
      {"brute_cap", "--brute-cap"},
      {"search_cap", "--search-cap"},
      {"policy_hidden", "--policy-hidden"},
      {"policy_embed", "--policy-embed"},
      {"offline_inner_cap", "--offline-inner-cap"},
      {"corpus_path", "--corpus"},
      {"master_seed", "--master-seed"},
      {"repetitions", "--repetitions"},
      {"reference_seeds", "--reference-seeds"},
  };
  for (const auto& [key, flag] : kKeys) {
    std::string key_name = key;
    auto sink = args.flags;
    cmd->add_option_function<std::string>(
        flag,
        [sink, key_name](const std::string& value) {
          (*sink)[key_name] = value;
        },
        std::string("Config key ") + key_name);
  }
}

KeyValues assemble_values(const CommonArgs& args) {
  KeyValues values;
  if (!args.config_path.empty())
    values = ps::parse_config_file(args.config_path);
  for (const auto& [key, value] : *args.flags) values[key] = value;
  return values;
}

ps::ExperimentConfig assemble_config(const CommonArgs& args) {
  return ps::config_from_key_values(assemble_values(args));
}

void print_summary(const ps::Report& report) {
  const auto& agg = report.aggregates;
  std::cout << "prompts: " << report.rows.size()
            << "  bypass_rate: " << agg.bypass_rate;
  if (agg.reuse_bypass_rate)
    std::cout << "  reuse_bypass_rate: " << *agg.reuse_bypass_rate;
  if (agg.frechet) std::cout << "  frechet: " << *agg.frechet;
  std::cout << "  queries_mean: " << agg.queries_mean
            << "  queries_sd: " << agg.queries_sd << "\n";
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> values;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  return values;
}

int run_report_emit(const ps::Report& report, const std::string& out,
                    const std::string& format) {
  ps::emit_report(report, out, format);
  std::cout << "wrote " << out << "\n";
  print_summary(report);
  return report.any_errors() ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-efficient adversarial prompt search against simulated "
               "text-to-image oracles"};
  app.require_subcommand(1);

  // attack
  auto* attack = app.add_subcommand(
      "attack", "Run the configured search over a prompt corpus");
  CommonArgs attack_args;
  add_config_flags(attack, attack_args);
  std::string attack_out = "report.json";
  std::string attack_format = "json";
  attack->add_option("--out", attack_out, "Report path");
  attack->add_option("--format", attack_format, "json or csv");

  // bench
  auto* bench = app.add_subcommand(
      "bench", "Compare several methods on the same corpus and seed");
  CommonArgs bench_args;
  add_config_flags(bench, bench_args);
  std::string bench_methods = "rl,rl-offline,greedy,beam";
  std::string bench_out_dir = ".";
  bench->add_option("--methods", bench_methods, "Comma-separated methods");
  bench->add_option("--out-dir", bench_out_dir, "Directory for per-method reports");

  // reuse
  auto* reuse = app.add_subcommand(
      "reuse", "Attack then replay found prompts under fresh seeds");
  CommonArgs reuse_args;
  add_config_flags(reuse, reuse_args);
  std::string reuse_out = "reuse_report.json";
  reuse->add_option("--out", reuse_out, "Report path");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Parameter sweep over delta or l");
  CommonArgs sweep_args;
  add_config_flags(sweep, sweep_args);
  std::string sweep_axis;
  std::string sweep_values;
  std::string sweep_out = "sweep.csv";
  sweep->add_option("--axis", sweep_axis, "delta or l")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")
      ->required();
  sweep->add_option("--out", sweep_out, "CSV path");

  // serve-oracle
  auto* serve = app.add_subcommand(
      "serve-oracle", "Serve the oracle wire protocol over HTTP");
  CommonArgs serve_args;
  add_config_flags(serve, serve_args);
  std::string bind = "127.0.0.1:8787";
  serve->add_option("--bind", bind, "host:port");

  // report
  auto* report_cmd = app.add_subcommand(
      "report", "Re-emit an existing JSON report and print its aggregates");
  std::string report_in;
  std::string report_out = "report.csv";
  std::string report_format = "csv";
  report_cmd->add_option("--in", report_in, "Existing JSON report")->required();
  report_cmd->add_option("--out", report_out, "Output path");
  report_cmd->add_option("--format", report_format, "json or csv");

  try {
    app.parse(argc, argv);

    if (*attack) {
      ps::Report report = ps::run_experiment(assemble_config(attack_args));
      return run_report_emit(report, attack_out, attack_format);
    }
    if (*bench) {
      KeyValues base_values = assemble_values(bench_args);
      std::ostringstream summary;
      summary << "method,bypass_rate,reuse_bypass_rate,frechet,queries_mean,"
                 "queries_sd\n";
      int exit_code = 0;
      std::stringstream ss(bench_methods);
      std::string method;
      while (std::getline(ss, method, ',')) {
        if (method.empty()) continue;
        KeyValues values = base_values;
        values["method"] = method;
        ps::ExperimentConfig config = ps::config_from_key_values(values);
        ps::Report report = ps::run_experiment(config);
        std::string path = bench_out_dir + "/bench_" + method + ".json";
        ps::emit_report(report, path, "json");
        const auto& agg = report.aggregates;
        summary << method << ',' << agg.bypass_rate << ','
                << (agg.reuse_bypass_rate
                        ? std::to_string(*agg.reuse_bypass_rate)
                        : "")
                << ',' << (agg.frechet ? std::to_string(*agg.frechet) : "")
                << ',' << agg.queries_mean << ',' << agg.queries_sd << "\n";
        std::cout << method << ": ";
        print_summary(report);
        if (report.any_errors()) exit_code = 3;
      }
      std::ofstream out(bench_out_dir + "/bench_summary.csv");
      out << summary.str();
      std::cout << summary.str();
      return exit_code;
    }
    if (*reuse) {
      ps::ExperimentConfig config = assemble_config(reuse_args);
      if (config.repetitions < 1)
        throw ps::ConfigError("reuse needs repetitions >= 1");
      ps::Report report = ps::run_experiment(config);
      return run_report_emit(report, reuse_out, "json");
    }
    if (*sweep) {
      ps::ExperimentConfig config = assemble_config(sweep_args);
      auto points = ps::run_sweep(config, sweep_axis, parse_values(sweep_values));
      std::ofstream out(sweep_out, std::ios::binary);
      if (!out) throw ps::ConfigError("cannot write " + sweep_out);
      out << ps::sweep_to_csv(points);
      std::cout << ps::sweep_to_csv(points);
      return 0;
    }
    if (*serve) {
      ps::ExperimentConfig config = assemble_config(serve_args);
      auto colon = bind.rfind(':');
      if (colon == std::string::npos)
        throw ps::ConfigError("--bind must be host:port");
      std::string host = bind.substr(0, colon);
      int port = std::stoi(bind.substr(colon + 1));
      std::cout << "serving oracle on " << host << ":" << port << " (filter "
                << config.filter << ", sigma " << config.sigma << ")\n";
      ps::serve_oracle_blocking(config, host, port);
      return 0;
    }
    if (*report_cmd) {
      std::ifstream in(report_in);
      if (!in) throw ps::ConfigError("cannot open report: " + report_in);
      nlohmann::ordered_json j = nlohmann::ordered_json::parse(in);
      ps::Report report = ps::report_from_json(j);
      ps::emit_report(report, report_out, report_format);
      std::cout << "wrote " << report_out << "\n";
      print_summary(report);
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ps::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
