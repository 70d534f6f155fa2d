#ifndef SEQRL_EXPLORATION_HPP_
#define SEQRL_EXPLORATION_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqrl/common.hpp"
#include "seqrl/policy.hpp"
#include "seqrl/toytask.hpp"

namespace seqrl {

// Sequence-level novelty network: token embedding [vocab x 16], mean-pooled
// over the whole (question, response) sequence, then 16 -> 16 (tanh) ->
// 8 (tanh) -> 1 (linear).
class NoveltyNet {
 public:
  static constexpr int kEmbedDim = 16;
  static constexpr std::array<int, 3> kWidths = {16, 8, 1};

  enum Group { kEmbedding, kW1, kB1, kW2, kB2, kW3, kB3, kGroupCount };

  using Feature = std::array<double, kEmbedDim>;

  NoveltyNet() = default;
  explicit NoveltyNet(int vocab);  // zeros

  // Embedding uniform in [-sqrt(3), sqrt(3)]; dense weights uniform with
  // variance 1/fan_in; biases zero.
  static NoveltyNet random(int vocab, std::uint64_t seed);

  int vocab() const { return vocab_; }
  std::size_t size() const { return data_.size(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  std::span<double> group(Group g);
  std::span<const double> group(Group g) const;

  // Mean of the embedding rows of every token in question ++ response.
  // Throws ContractError when both are empty.
  Feature featurize(std::span<const TokenId> question,
                    std::span<const TokenId> response) const;

  double forward(const Feature& x) const;
  double operator()(std::span<const TokenId> question,
                    std::span<const TokenId> response) const {
    return forward(featurize(question, response));
  }

  bool operator==(const NoveltyNet&) const = default;

 private:
  std::size_t offset(Group g) const;
  std::size_t length(Group g) const;

  int vocab_ = 0;
  std::vector<double> data_;
};

struct SequenceRef {
  std::span<const TokenId> question;
  std::span<const TokenId> response;
};

std::vector<SequenceRef> sequence_refs(std::span<const Trajectory> batch);

// Frozen random target plus trainable predictor of identical shape.
class ExplorationNets {
 public:
  ExplorationNets() = default;
  ExplorationNets(int vocab, std::uint64_t seed, double learning_rate = 1e-3);

  // Predictor starts as an exact copy of the target.
  static ExplorationNets with_copied_predictor(int vocab, std::uint64_t seed,
                                               double learning_rate = 1e-3);

  const NoveltyNet& target() const { return target_; }
  const NoveltyNet& predictor() const { return predictor_; }
  NoveltyNet& mutable_predictor() { return predictor_; }
  double learning_rate() const { return learning_rate_; }
  void set_learning_rate(double lr) { learning_rate_ = lr; }

  // Restores both networks (checkpoint loading).
  void restore(NoveltyNet target, NoveltyNet predictor);

 private:
  NoveltyNet target_;
  NoveltyNet predictor_;
  double learning_rate_ = 1e-3;
};

struct NoveltyEval {
  double raw_error = 0.0;       // r(q, o)
  double predictor_loss = 0.0;  // L(q, o); same quantity
};

// ||f_P(q,o) - f_T(q,o)||^2. Pure.
NoveltyEval novelty_raw(const ExplorationNets& nets,
                        std::span<const TokenId> question,
                        std::span<const TokenId> response);

struct PredictorGradient {
  double mean_loss = 0.0;
  NoveltyNet gradient;  // d mean_loss / d predictor
};

PredictorGradient predictor_gradient(const ExplorationNets& nets,
                                     std::span<const SequenceRef> batch);

// One gradient-descent step on the predictor over the mean batch loss.
// Returns the mean loss before the step. The target is never touched.
double update_predictor(ExplorationNets& nets,
                        std::span<const SequenceRef> batch);

enum class RewardMode { kRndStd, kMinMaxDecay };

RewardMode parse_reward_mode(const std::string& text);
const char* to_string(RewardMode mode);

struct ExplorationSchedule {
  double alpha = 0.5;
  double attenuation = 40.0;  // gamma in gamma / (gamma + n)
  std::uint64_t step = 0;     // n, global policy-update count
  RewardMode mode = RewardMode::kMinMaxDecay;
  double momentum = 0.99;

  // Moving moments of the raw error, used by kRndStd.
  bool stats_initialized = false;
  double running_mean = 0.0;
  double running_sq = 0.0;

  double decay_factor() const;
  double running_std() const;
  void advance() { ++step; }
  // Folds one batch of raw errors into the moving moments.
  void observe(std::span<const double> raw_errors);
};

struct NoveltyRecord {
  std::uint64_t problem_id = 0;
  std::size_t trajectory_index = 0;
  double raw_error = 0.0;    // r(q, o)
  double normalized = 0.0;   // R*_1
  double conditioned = 0.0;  // R*_2 = I[incorrect] * R*_1
  double reward = 0.0;       // R* = decay * R*_2
};

// Exploration rewards for one batch, computed from the current predictor.
// kMinMaxDecay: R*_1 = alpha * (r - min r) / (max r - min r), zero when
// max == min. kRndStd: R*_1 = r / running std; the moments absorb this batch
// first when `training` and stay frozen otherwise. Correct outcomes get 0.
std::vector<NoveltyRecord> exploration_reward(
    const ExplorationNets& nets, ExplorationSchedule& schedule,
    std::span<const Trajectory> batch, bool training = true);

// Same, from precomputed raw errors (one per trajectory).
std::vector<NoveltyRecord> exploration_reward_from_errors(
    std::span<const double> raw_errors, std::span<const Trajectory> batch,
    ExplorationSchedule& schedule, bool training = true);

// A_new = A_old + R*. PPO adds R* to the last token of each trajectory; GRPO
// adds it to every token. Throws ShapeError when records and rows disagree.
TokenTensor inject(const TokenTensor& advantages_old,
                   std::span<const NoveltyRecord> records, Algo algo);

// Checkpoint: "SQRLEXP1" magic, u32 version, u32 V, u32 embed dim, u32 layer
// count, u32 widths..., u64 value count, target f64s, predictor f64s, then
// f64 alpha, f64 gamma, u64 n, u32 mode, f64 momentum, u32 stats flag,
// f64 running mean, f64 running second moment, f64 running std,
// f64 predictor learning rate.
void save_exploration(const std::string& path, const ExplorationNets& nets,
                      const ExplorationSchedule& schedule);
void load_exploration(const std::string& path, ExplorationNets& nets,
                      ExplorationSchedule& schedule);

}  // namespace seqrl

#endif  // SEQRL_EXPLORATION_HPP_
