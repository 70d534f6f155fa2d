// seqrl: data generation, training, evaluation and log analysis.
//
// Exit codes: 0 ok, 1 other failure, 2 missing file, 3 bad config (the key
// is named on stderr), 4 non-finite loss during training.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seqrl/config.hpp"
#include "seqrl/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitMissingFile = 2;
constexpr int kExitConfig = 3;
constexpr int kExitNumerical = 4;

std::string key_listing() {
  const seqrl::TrainConfig defaults;
  std::string out = "Config keys (file section, flag, default):\n";
  for (const auto& k : seqrl::config_keys()) {
    out += "  [" + k.section + "] --" + k.name + " = " + k.get(defaults) + "\n";
  }
  return out;
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw seqrl::IoError("no such file: " + path);
}

// --- gen-data --------------------------------------------------------------

struct GenDataArgs {
  std::string mode = "countdown4";
  std::uint64_t seed = 7;
  std::size_t count = 1000;
  std::string out;
  int max_operand = 20;
  int max_target = 100;
};

int run_gen_data(const GenDataArgs& a) {
  seqrl::DatasetLimits limits;
  limits.max_operand = a.max_operand;
  limits.max_target = a.max_target;
  const auto problems = seqrl::generate_dataset(
      a.seed, a.count, seqrl::parse_dataset_mode(a.mode), limits);
  seqrl::write_dataset(a.out, problems);
  std::cerr << "wrote " << problems.size() << " problems to " << a.out << "\n";
  return 0;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  bool print_config = false;
};

seqrl::TrainConfig resolve_config(const TrainArgs& a, CLI::App& cmd) {
  seqrl::TrainConfig cfg;
  if (!a.config_path.empty()) seqrl::apply_config_file(cfg, a.config_path);
  // Flags override the file, applied in key order.
  for (const auto& k : seqrl::config_keys()) {
    if (cmd.count("--" + k.name) == 0) continue;
    seqrl::set_config_value(cfg, k.name, a.overrides.at(k.name));
  }
  seqrl::validate(cfg);
  return cfg;
}

int run_train(const TrainArgs& a, CLI::App& cmd) {
  const seqrl::TrainConfig cfg = resolve_config(a, cmd);
  if (a.print_config) {
    std::cout << seqrl::to_config_text(cfg);
    return 0;
  }
  const seqrl::Datasets data = seqrl::load_datasets(cfg);
  std::cerr << "train " << data.train.size() << " problems, test "
            << data.test.size() << ", " << cfg.steps << " steps, algo "
            << seqrl::to_string(cfg.algo) << ", imagine "
            << (cfg.imagine ? "on" : "off") << "\n";
  auto observer = [&](const seqrl::StepRecord& s) {
    int correct = 0;
    for (const auto& t : s.trajectories) correct += t.outcome.correct ? 1 : 0;
    std::cerr << "step " << s.step << "/" << cfg.steps << " correct " << correct
              << "/" << s.trajectories.size() << " predictor loss "
              << s.predictor_loss << "\n";
  };
  const seqrl::TrainResult result = seqrl::train(cfg, data, observer);
  if (!result.log.empty() && result.log.back().eval_accuracy) {
    std::cerr << "final eval accuracy " << *result.log.back().eval_accuracy << "\n";
  }
  return 0;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string data;
  int k = 8;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  int max_length = 64;
  int threads = 1;
  int limit = 0;
};

int run_eval(const EvalArgs& a) {
  require_file(a.ckpt);
  const fs::path ckpt = a.ckpt;
  const fs::path dir = fs::is_directory(ckpt) ? ckpt : ckpt.parent_path();
  const fs::path policy_path = fs::is_directory(ckpt) ? ckpt / "policy.ckpt" : ckpt;
  require_file(policy_path.string());
  const seqrl::PolicyParams params = seqrl::load_policy(policy_path.string());

  std::vector<seqrl::Problem> problems;
  if (!a.data.empty()) {
    require_file(a.data);
    problems = seqrl::read_dataset(a.data);
  } else {
    // Without --data, regenerate the run's test split from its saved config.
    const fs::path config_path = dir / "config.toml";
    require_file(config_path.string());
    seqrl::TrainConfig cfg;
    seqrl::apply_config_file(cfg, config_path.string());
    problems = seqrl::load_datasets(cfg).test;
  }
  if (a.limit > 0 && static_cast<std::size_t>(a.limit) < problems.size()) {
    problems.resize(static_cast<std::size_t>(a.limit));
  }

  seqrl::GenerationConfig gen;
  gen.temperature = a.temperature;
  gen.max_length = a.max_length;
  gen.seed = a.seed;
  const seqrl::EvalResult r = seqrl::evaluate(params, problems, gen, a.k, a.threads);
  json out;
  out["problems"] = problems.size();
  out["pass@1"] = r.pass_at_1();
  out["pass@" + std::to_string(a.k)] = r.pass_at_k();
  out["avg@" + std::to_string(a.k)] = r.avg_at_k;
  std::cout << out.dump() << "\n";
  return 0;
}

// --- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::vector<std::string> logs;
  std::vector<std::string> labels;
};

int run_analyze(const AnalyzeArgs& a) {
  if (!a.labels.empty() && a.labels.size() != a.logs.size()) {
    throw seqrl::ContractError("--label must be given once per log");
  }
  std::vector<seqrl::LossSeries> series;
  for (std::size_t i = 0; i < a.logs.size(); ++i) {
    require_file(a.logs[i]);
    const std::string label = a.labels.empty() ? a.logs[i] : a.labels[i];
    series.push_back(seqrl::load_loss_series(a.logs[i], label));
  }
  const seqrl::DiagnosticReport report = seqrl::exploration_diagnostic(series);
  json out;
  out["runs"] = json::array();
  for (const auto& r : report.runs) {
    out["runs"].push_back({{"label", r.label}, {"slope", r.slope},
                           {"intercept", r.intercept}});
  }
  out["fastest_decay_first"] = report.fastest_decay_first;
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequence-policy RL on Countdown with novelty-driven exploration"};
  app.require_subcommand(0, 1);
  app.footer(key_listing());
  bool print_config = false;
  app.add_flag("--print-config", print_config, "Print every config key with its default and exit");

  GenDataArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate a Countdown dataset as JSONL");
  gen->add_option("--mode", gen_args.mode, "countdown4 or countdown34")
      ->capture_default_str();
  gen->add_option("--seed", gen_args.seed, "Generator seed")->capture_default_str();
  gen->add_option("--count", gen_args.count, "Number of problems")->capture_default_str();
  gen->add_option("--out", gen_args.out, "Output path")->required();
  gen->add_option("--max-operand", gen_args.max_operand)->capture_default_str();
  gen->add_option("--max-target", gen_args.max_target)->capture_default_str();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Run RL training");
  train->add_option("--config", train_args.config_path, "Config file; flags override it");
  train->add_flag("--print-config", train_args.print_config,
                  "Print the resolved config and exit");
  const seqrl::TrainConfig defaults;
  for (const auto& k : seqrl::config_keys()) {
    train->add_option("--" + k.name, train_args.overrides[k.name],
                      k.help + " [" + k.section + "]")
        ->default_str(k.get(defaults));
  }
  train->footer(key_listing());

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a policy checkpoint");
  eval->add_option("--ckpt", eval_args.ckpt, "Checkpoint directory or policy file")
      ->required();
  eval->add_option("--data", eval_args.data,
                   "Problems JSONL (default: test split from the run's config.toml)");
  eval->add_option("--k", eval_args.k, "Samples per problem")->capture_default_str();
  eval->add_option("--seed", eval_args.seed, "Sampling seed")->capture_default_str();
  eval->add_option("--temperature", eval_args.temperature)->capture_default_str();
  eval->add_option("--max-length", eval_args.max_length)->capture_default_str();
  eval->add_option("--threads", eval_args.threads)->capture_default_str();
  eval->add_option("--limit", eval_args.limit, "Use only the first N problems (0: all)")
      ->capture_default_str();

  AnalyzeArgs analyze_args;
  CLI::App* analyze = app.add_subcommand("analyze", "Compare predictor-loss decay across runs");
  analyze->add_option("logs", analyze_args.logs, "metrics.jsonl files")
      ->required()
      ->expected(2, -1);
  analyze->add_option("--label", analyze_args.labels, "Label per log, in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (print_config) {
      std::cout << seqrl::to_config_text(seqrl::TrainConfig{});
      return 0;
    }
    if (gen->parsed()) return run_gen_data(gen_args);
    if (train->parsed()) return run_train(train_args, *train);
    if (eval->parsed()) return run_eval(eval_args);
    if (analyze->parsed()) return run_analyze(analyze_args);
    std::cerr << app.help();
    return kExitOther;
  } catch (const seqrl::ConfigError& e) {
    std::cerr << "config error: " << e.key() << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const seqrl::IoError& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kExitMissingFile;
  } catch (const seqrl::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}
