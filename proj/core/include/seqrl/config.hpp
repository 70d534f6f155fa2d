#ifndef SEQRL_CONFIG_HPP_
#define SEQRL_CONFIG_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "seqrl/advantage.hpp"
#include "seqrl/common.hpp"
#include "seqrl/exploration.hpp"
#include "seqrl/toytask.hpp"

namespace seqrl {

// Resolved training configuration. Defaults are desk scale; the values used
// at full scale were batch 512, response length 1024, 250 steps.
struct TrainConfig {
  // [train]
  Algo algo = Algo::kGrpo;
  bool imagine = false;
  int group_size = 5;  // forced to 1 for PPO
  int batch_size = 64;
  int steps = 300;
  double clip_eps = 0.2;
  double kl_beta = 0.0;
  double temperature = 1.0;
  double policy_lr = 5e-4;
  std::string optimizer = "adam";  // adam | sgd
  double value_coef = 0.5;
  int ppo_epochs = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  bool check_invariants = true;
  bool record_wall_clock = false;

  // Supervised warm start on solver demonstrations before RL, standing in
  // for a pretrained base policy. 0 disables it.
  int warmstart_steps = 3000;
  int warmstart_batch = 64;
  double warmstart_lr = 3e-3;

  // [eval]
  int eval_interval = 50;
  int eval_k = 4;
  int eval_problems = 256;
  double eval_temperature = 1.0;

  // [gae]
  GaeConfig gae;

  // [exploration]
  double alpha = 0.5;
  double attenuation = 40.0;
  RewardMode reward_mode = RewardMode::kMinMaxDecay;
  double momentum = 0.99;
  double predictor_lr = 1e-3;

  // [policy]
  int embed_dim = 32;
  int window = 32;
  int hidden = 64;
  int max_response_length = 64;

  // [data]
  std::string train_path;  // empty: generate in process
  std::string test_path;
  DatasetMode dataset_mode = DatasetMode::kCountdown4;
  int train_count = 20000;
  int test_count = 256;
  std::uint64_t data_seed = 7;
  int max_operand = 20;
  int max_target = 100;

  // [output]
  std::string out_dir;   // empty: no files written
  std::string log_path;  // default <out_dir>/metrics.jsonl

  int effective_group_size() const {
    return algo == Algo::kPpo ? 1 : group_size;
  }
};

// One config key: lives in [section] of the config file and is also the
// command-line flag --name.
struct ConfigKey {
  std::string section;
  std::string name;
  std::string help;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

const std::vector<ConfigKey>& config_keys();
const ConfigKey* find_config_key(const std::string& name);

// Sets one key from its text form. Throws ConfigError naming the key.
void set_config_value(TrainConfig& cfg, const std::string& name,
                      const std::string& value);

// Parses a TOML subset: [section] headers, key = value lines, '#' comments,
// double-quoted strings, booleans, numbers. Unknown sections or keys throw
// ConfigError; a missing file throws IoError.
void apply_config_file(TrainConfig& cfg, const std::string& path);
void apply_config_text(TrainConfig& cfg, const std::string& text,
                       const std::string& origin = "<text>");

// Renders every key in the same format apply_config_text reads.
std::string to_config_text(const TrainConfig& cfg);

// Range checks. Throws ConfigError naming the offending key.
void validate(const TrainConfig& cfg);

}  // namespace seqrl

#endif  // SEQRL_CONFIG_HPP_
