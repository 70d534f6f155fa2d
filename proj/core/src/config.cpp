#include "seqrl/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace seqrl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  const long long x = parse_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(key, "integer out of range: " + v);
  }
  return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true/false (or on/off), got '" + v + "'");
}

// Shortest text that reads back to the same double.
std::string fmt_double(double x) {
  std::string s;
  for (int precision = 15; precision <= 17; ++precision) {
    std::ostringstream os;
    os.precision(precision);
    os << x;
    s = os.str();
    if (std::strtod(s.c_str(), nullptr) == x) break;
  }
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

template <typename T>
using Member = T TrainConfig::*;

ConfigKey int_key(const char* section, const char* name, Member<int> m,
                  const char* help) {
  return {section, name, help,
          [m](const TrainConfig& c) { return std::to_string(c.*m); },
          [m, name](TrainConfig& c, const std::string& v) {
            c.*m = parse_int(name, v);
          }};
}

ConfigKey u64_key(const char* section, const char* name,
                  Member<std::uint64_t> m, const char* help) {
  return {section, name, help,
          [m](const TrainConfig& c) { return std::to_string(c.*m); },
          [m, name](TrainConfig& c, const std::string& v) {
            c.*m = parse_u64(name, v);
          }};
}

ConfigKey double_key(const char* section, const char* name, Member<double> m,
                     const char* help) {
  return {section, name, help,
          [m](const TrainConfig& c) { return fmt_double(c.*m); },
          [m, name](TrainConfig& c, const std::string& v) {
            c.*m = parse_double(name, v);
          }};
}

ConfigKey bool_key(const char* section, const char* name, Member<bool> m,
                   const char* help) {
  return {section, name, help,
          [m](const TrainConfig& c) { return std::string(c.*m ? "true" : "false"); },
          [m, name](TrainConfig& c, const std::string& v) {
            c.*m = parse_bool(name, v);
          }};
}

ConfigKey string_key(const char* section, const char* name,
                     Member<std::string> m, const char* help) {
  return {section, name, help,
          [m](const TrainConfig& c) { return quote(c.*m); },
          [m](TrainConfig& c, const std::string& v) { c.*m = v; }};
}

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> keys;
  keys.push_back({"train", "algo", "policy-gradient algorithm: ppo | grpo",
                  [](const TrainConfig& c) { return quote(to_string(c.algo)); },
                  [](TrainConfig& c, const std::string& v) { c.algo = parse_algo(v); }});
  keys.push_back(bool_key("train", "imagine", &TrainConfig::imagine,
                          "inject exploration rewards into advantages"));
  keys.push_back(int_key("train", "group_size", &TrainConfig::group_size,
                         "rollouts per problem (GRPO; PPO always uses 1)"));
  keys.push_back(int_key("train", "batch_size", &TrainConfig::batch_size,
                         "problems per policy update"));
  keys.push_back(int_key("train", "steps", &TrainConfig::steps, "policy updates"));
  keys.push_back(double_key("train", "clip_eps", &TrainConfig::clip_eps,
                            "ratio clip range epsilon"));
  keys.push_back(double_key("train", "kl_beta", &TrainConfig::kl_beta,
                            "KL penalty coefficient against the initial policy"));
  keys.push_back(double_key("train", "temperature", &TrainConfig::temperature,
                            "rollout sampling temperature"));
  keys.push_back(double_key("train", "policy_lr", &TrainConfig::policy_lr,
                            "policy gradient-descent learning rate"));
  keys.push_back({"train", "optimizer", "policy optimizer: adam | sgd",
                  [](const TrainConfig& c) { return quote(c.optimizer); },
                  [](TrainConfig& c, const std::string& v) {
                    if (v != "adam" && v != "sgd") {
                      throw ConfigError("optimizer", "expected 'adam' or 'sgd', got '" + v + "'");
                    }
                    c.optimizer = v;
                  }});
  keys.push_back(double_key("train", "value_coef", &TrainConfig::value_coef,
                            "value loss weight (PPO)"));
  keys.push_back(int_key("train", "ppo_epochs", &TrainConfig::ppo_epochs,
                         "gradient steps per rollout batch"));
  keys.push_back(u64_key("train", "seed", &TrainConfig::seed,
                         "base seed for policy init, data order, sampling, exploration nets"));
  keys.push_back(int_key("train", "threads", &TrainConfig::threads,
                         "rollout worker threads"));
  keys.push_back(bool_key("train", "check_invariants", &TrainConfig::check_invariants,
                          "verify advantage invariants every step"));
  keys.push_back(bool_key("train", "record_wall_clock", &TrainConfig::record_wall_clock,
                          "log wall-clock seconds (logs stop being byte-reproducible)"));

  keys.push_back(int_key("train", "warmstart_steps", &TrainConfig::warmstart_steps,
                         "supervised warm-start steps on solver demonstrations (0 = off)"));
  keys.push_back(int_key("train", "warmstart_batch", &TrainConfig::warmstart_batch,
                         "demonstrations per warm-start step"));
  keys.push_back(double_key("train", "warmstart_lr", &TrainConfig::warmstart_lr,
                            "warm-start learning rate"));
  keys.push_back(int_key("eval", "eval_interval", &TrainConfig::eval_interval,
                         "evaluate and checkpoint every N steps (and at the end)"));
  keys.push_back(int_key("eval", "eval_k", &TrainConfig::eval_k,
                         "samples per eval problem"));
  keys.push_back(int_key("eval", "eval_problems", &TrainConfig::eval_problems,
                         "test problems used per evaluation (0 = all)"));
  keys.push_back(double_key("eval", "eval_temperature", &TrainConfig::eval_temperature,
                            "evaluation sampling temperature"));

  keys.push_back({"gae", "discount", "GAE discount gamma_d in (0, 1]",
                  [](const TrainConfig& c) { return fmt_double(c.gae.discount); },
                  [](TrainConfig& c, const std::string& v) {
                    c.gae.discount = parse_double("discount", v);
                  }});
  keys.push_back({"gae", "lambda", "GAE trace lambda in [0, 1]",
                  [](const TrainConfig& c) { return fmt_double(c.gae.lambda); },
                  [](TrainConfig& c, const std::string& v) {
                    c.gae.lambda = parse_double("lambda", v);
                  }});

  keys.push_back(double_key("exploration", "alpha", &TrainConfig::alpha,
                            "exploration intensity (max normalised reward)"));
  keys.push_back(double_key("exploration", "attenuation", &TrainConfig::attenuation,
                            "decay constant gamma in gamma / (gamma + n)"));
  keys.push_back({"exploration", "reward_mode", "minmax_decay | rnd_std",
                  [](const TrainConfig& c) { return quote(to_string(c.reward_mode)); },
                  [](TrainConfig& c, const std::string& v) {
                    c.reward_mode = parse_reward_mode(v);
                  }});
  keys.push_back(double_key("exploration", "momentum", &TrainConfig::momentum,
                            "moving-std momentum (rnd_std mode)"));
  keys.push_back(double_key("exploration", "predictor_lr", &TrainConfig::predictor_lr,
                            "predictor gradient-descent learning rate"));

  keys.push_back(int_key("policy", "embed_dim", &TrainConfig::embed_dim,
                         "policy token embedding width"));
  keys.push_back(int_key("policy", "window", &TrainConfig::window,
                         "context window in tokens"));
  keys.push_back(int_key("policy", "hidden", &TrainConfig::hidden,
                         "hidden layer width"));
  keys.push_back(int_key("policy", "max_response_length",
                         &TrainConfig::max_response_length,
                         "maximum response tokens (including end-of-sequence)"));

  keys.push_back(string_key("data", "train_path", &TrainConfig::train_path,
                            "training dataset JSONL (empty: generate)"));
  keys.push_back(string_key("data", "test_path", &TrainConfig::test_path,
                            "test dataset JSONL (empty: generate)"));
  keys.push_back({"data", "dataset_mode", "countdown4 | countdown34 (generated data)",
                  [](const TrainConfig& c) { return quote(to_string(c.dataset_mode)); },
                  [](TrainConfig& c, const std::string& v) {
                    c.dataset_mode = parse_dataset_mode(v);
                  }});
  keys.push_back(int_key("data", "train_count", &TrainConfig::train_count,
                         "generated training problems"));
  keys.push_back(int_key("data", "test_count", &TrainConfig::test_count,
                         "generated test problems"));
  keys.push_back(u64_key("data", "data_seed", &TrainConfig::data_seed,
                         "seed for generated data"));
  keys.push_back(int_key("data", "max_operand", &TrainConfig::max_operand,
                         "largest generated operand"));
  keys.push_back(int_key("data", "max_target", &TrainConfig::max_target,
                         "largest generated target"));

  keys.push_back(string_key("output", "out_dir", &TrainConfig::out_dir,
                            "directory for metrics and checkpoints (empty: none)"));
  keys.push_back(string_key("output", "log_path", &TrainConfig::log_path,
                            "metric log path (default <out_dir>/metrics.jsonl)"));
  return keys;
}

std::string unquote(const std::string& key, const std::string& raw) {
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    return raw.substr(1, raw.size() - 2);
  }
  if (!raw.empty() && raw.front() == '"') {
    throw ConfigError(key, "unterminated string");
  }
  return raw;
}

// Drops a trailing '#' comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

const ConfigKey* find_config_key(const std::string& name) {
  for (const ConfigKey& k : config_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

void set_config_value(TrainConfig& cfg, const std::string& name,
                      const std::string& value) {
  const ConfigKey* key = find_config_key(name);
  if (!key) throw ConfigError(name, "unknown key");
  try {
    key->set(cfg, value);
  } catch (const ConfigError& e) {
    if (e.key() == name) throw;
    throw ConfigError(name, e.what());
  }
}

void apply_config_text(TrainConfig& cfg, const std::string& text,
                       const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(line, where + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const ConfigKey& k : config_keys()) known |= k.section == section;
      if (!known) throw ConfigError(section, where + ": unknown section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line, where + ": expected key = value");
    }
    const std::string name = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    const ConfigKey* key = find_config_key(name);
    if (!key) throw ConfigError(name, where + ": unknown key");
    if (key->section != section) {
      throw ConfigError(name, where + ": belongs in [" + key->section + "]");
    }
    set_config_value(cfg, name, unquote(name, raw));
  }
}

void apply_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path);
}

std::string to_config_text(const TrainConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const ConfigKey& k : config_keys()) {
    if (k.section != section) {
      if (!section.empty()) out << '\n';
      section = k.section;
      out << '[' << section << "]\n";
    }
    out << k.name << " = " << k.get(cfg) << '\n';
  }
  return out.str();
}

void validate(const TrainConfig& c) {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  require(c.algo == Algo::kPpo || c.group_size >= 2, "group_size",
          "GRPO needs group_size >= 2");
  require(c.group_size >= 1, "group_size", "must be >= 1");
  require(c.batch_size >= 1, "batch_size", "must be >= 1");
  require(c.steps >= 1, "steps", "must be >= 1");
  require(c.clip_eps > 0.0 && c.clip_eps < 1.0, "clip_eps", "must lie in (0, 1)");
  require(c.kl_beta >= 0.0, "kl_beta", "must be >= 0");
  require(c.temperature > 0.0, "temperature", "must be > 0");
  require(c.policy_lr > 0.0 && std::isfinite(c.policy_lr), "policy_lr", "must be > 0");
  require(c.value_coef >= 0.0, "value_coef", "must be >= 0");
  require(c.ppo_epochs >= 1, "ppo_epochs", "must be >= 1");
  require(c.warmstart_steps >= 0, "warmstart_steps", "must be >= 0");
  require(c.warmstart_batch >= 1, "warmstart_batch", "must be >= 1");
  require(c.warmstart_lr > 0.0, "warmstart_lr", "must be > 0");
  require(c.threads >= 1, "threads", "must be >= 1");
  require(c.eval_interval >= 1, "eval_interval", "must be >= 1");
  require(c.eval_k >= 1, "eval_k", "must be >= 1");
  require(c.eval_problems >= 0, "eval_problems", "must be >= 0");
  require(c.eval_temperature > 0.0, "eval_temperature", "must be > 0");
  require(c.gae.discount > 0.0 && c.gae.discount <= 1.0, "discount",
          "must lie in (0, 1]");
  require(c.gae.lambda >= 0.0 && c.gae.lambda <= 1.0, "lambda", "must lie in [0, 1]");
  require(c.alpha >= 0.0 && std::isfinite(c.alpha), "alpha", "must be >= 0");
  require(c.attenuation > 0.0, "attenuation", "must be > 0");
  require(c.momentum >= 0.0 && c.momentum < 1.0, "momentum", "must lie in [0, 1)");
  require(c.predictor_lr > 0.0, "predictor_lr", "must be > 0");
  require(c.embed_dim >= 1, "embed_dim", "must be >= 1");
  require(c.window >= 1, "window", "must be >= 1");
  require(c.hidden >= 1, "hidden", "must be >= 1");
  require(c.max_response_length >= 1, "max_response_length", "must be >= 1");
  require(c.train_count >= 1, "train_count", "must be >= 1");
  require(c.test_count >= 1, "test_count", "must be >= 1");
  require(c.max_operand >= 1, "max_operand", "must be >= 1");
  require(c.max_target >= 1, "max_target", "must be >= 1");
}

}  // namespace seqrl
