#ifndef SEQRL_TRAINER_HPP_
#define SEQRL_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqrl/advantage.hpp"
#include "seqrl/config.hpp"
#include "seqrl/exploration.hpp"
#include "seqrl/policy.hpp"
#include "seqrl/toytask.hpp"

namespace seqrl {

struct MetricRow {
  int step = 0;  // 1-based count of completed policy updates
  double train_accuracy = 0.0;
  std::optional<double> eval_accuracy;  // only on evaluation steps
  double mean_response_length = 0.0;
  double mean_outcome_reward = 0.0;
  double max_outcome_reward = 0.0;
  double mean_predictor_loss = 0.0;
  double mean_exploration_reward = 0.0;  // mean injected R*
  double decay_factor = 0.0;             // gamma / (gamma + n) at this step
  double wall_clock_seconds = 0.0;       // 0 unless record_wall_clock

  bool operator==(const MetricRow&) const = default;
};

// JSONL metric log, one object per line with the field names above.
std::string to_json_line(const MetricRow& row);
// Throws IoError on malformed lines.
MetricRow parse_metric_row(const std::string& line);
void write_metric_log(const std::string& path, std::span<const MetricRow> rows);
std::vector<MetricRow> read_metric_log(const std::string& path);

// Everything the trainer knows about one step, for observers and tests.
struct StepRecord {
  int step = 0;
  Algo algo = Algo::kGrpo;
  int group_size = 1;
  std::span<const Trajectory> trajectories;
  const TokenTensor* advantages_old = nullptr;
  const TokenTensor* advantages_new = nullptr;
  std::span<const NoveltyRecord> records;
  std::span<const double> group_advantages;  // GRPO scalar advantages
  double predictor_loss = 0.0;
};

using StepObserver = std::function<void(const StepRecord&)>;

struct TrainResult {
  PolicyParams params;
  ExplorationNets nets;
  ExplorationSchedule schedule;
  std::vector<MetricRow> log;
  std::size_t invariant_checks = 0;
};

struct Datasets {
  std::vector<Problem> train;
  std::vector<Problem> test;
};

// Loads the configured dataset files, or generates train/test splits with
// disjoint ids from data_seed when no paths are set.
Datasets load_datasets(const TrainConfig& cfg);

// Teacher-forced maximum likelihood on "<solution>$" demonstrations for
// cfg.warmstart_steps Adam steps. Deterministic in cfg.seed. Returns the mean
// negative log-likelihood per token of the last step.
double warm_start(PolicyParams& params, std::span<const Problem> problems,
                  const TrainConfig& cfg);

// Freshly initialized policy for cfg.seed after the warm start. This is the
// starting point train() uses when no initial policy is passed.
PolicyParams initial_policy(const TrainConfig& cfg, const Datasets& data);

// Runs the full loop. Throws ConfigError before the first step on bad
// config, NumericalError on a non-finite loss or gradient (after writing
// nan_dump.json into out_dir when set), InvariantError when a step check
// fails. A non-null `initial` replaces initial_policy() and must match the
// configured shape; runs that share one are identical to runs that don't.
TrainResult train(const TrainConfig& cfg, const Datasets& data,
                  const StepObserver& observer = nullptr,
                  const PolicyParams* initial = nullptr);

struct EvalResult {
  int k = 0;
  std::vector<double> pass_at;  // pass_at[j-1] is pass@j, j = 1..k
  double avg_at_k = 0.0;
  std::vector<int> correct_counts;  // per problem, out of k

  double pass_at_k() const { return pass_at.back(); }
  double pass_at_1() const { return pass_at.front(); }
};

// Samples k responses per problem. Accuracy counts only fully correct
// responses; the format reward never contributes. pass@j uses the unbiased
// estimator 1 - C(k-c, j) / C(k, j).
EvalResult evaluate(const PolicyParams& params, std::span<const Problem> problems,
                    const GenerationConfig& gen, int k, int threads = 1);

// Probability that j of k samples, c of them correct, include a correct one.
double pass_at_estimate(int k, int c, int j);

// Metrics from per-problem correct counts out of k.
EvalResult summarize_counts(std::span<const int> correct_counts, int k);

// Predictor-loss decay analysis across runs.
struct LossSeries {
  std::string label;
  std::vector<double> steps;
  std::vector<double> losses;
};

LossSeries load_loss_series(const std::string& path, const std::string& label);

struct RunSlope {
  std::string label;
  double slope = 0.0;  // least-squares slope of ln(loss) per step
  double intercept = 0.0;
};

struct DiagnosticReport {
  std::vector<RunSlope> runs;
  std::vector<std::string> fastest_decay_first;
};

// Needs at least two series.
DiagnosticReport exploration_diagnostic(std::span<const LossSeries> runs);

}  // namespace seqrl

#endif  // SEQRL_TRAINER_HPP_
