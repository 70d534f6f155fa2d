#ifndef SEQRL_POLICY_HPP_
#define SEQRL_POLICY_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqrl/common.hpp"
#include "seqrl/toytask.hpp"

namespace seqrl {

struct PolicyShape {
  int vocab = 0;
  int embed_dim = 32;
  int window = 16;
  int hidden = 64;

  std::size_t parameter_count() const;
  bool operator==(const PolicyShape&) const = default;
};

// Flat parameter storage for the windowed context policy. Groups are laid out
// contiguously in this order:
//   embedding      [vocab x embed_dim]
//   hidden_weight  [hidden x (window * embed_dim)]
//   hidden_bias    [hidden]
//   output_weight  [vocab x hidden]
//   output_bias    [vocab]
//   value_weight   [hidden]
//   value_bias     [1]
// Copies are deep; a snapshot never aliases the live parameters.
class PolicyParams {
 public:
  enum Group {
    kEmbedding,
    kHiddenWeight,
    kHiddenBias,
    kOutputWeight,
    kOutputBias,
    kValueWeight,
    kValueBias,
    kGroupCount
  };

  PolicyParams() = default;
  explicit PolicyParams(const PolicyShape& shape);  // all zeros

  // Embeddings and hidden weights uniform in [-0.05, 0.05]; output
  // projection, value head and biases zero.
  static PolicyParams initialize(const PolicyShape& shape, std::uint64_t seed);

  const PolicyShape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  std::span<double> group(Group g);
  std::span<const double> group(Group g) const;
  static const char* group_name(Group g);

  // Row-major accessors.
  double* embedding_row(int token) { return group(kEmbedding).data() + token * shape_.embed_dim; }
  const double* embedding_row(int token) const { return group(kEmbedding).data() + token * shape_.embed_dim; }

  bool all_finite() const;

  bool operator==(const PolicyParams&) const = default;

 private:
  std::size_t offset(Group g) const;
  std::size_t length(Group g) const;

  PolicyShape shape_;
  std::vector<double> data_;
};

struct GenerationConfig {
  double temperature = 1.0;
  int max_length = 64;
  bool greedy = false;
  std::uint64_t seed = 0;
};

struct Trajectory {
  TokenSeq question;
  TokenSeq response;
  std::vector<double> logprobs_old;
  OutcomeLabel outcome;
  std::uint64_t problem_id = 0;
};

struct TokenEvaluation {
  std::vector<double> logprobs;  // one per response token
  std::vector<double> values;    // one per response token plus bootstrap
};

// Read-only evaluator over a parameter snapshot. Caches per (window
// position, token) projections of the embedding through the hidden layer, so
// one step costs window * hidden adds plus the output layer. Safe to share
// across threads; the referenced params must outlive it and stay unmodified.
class PolicyEvaluator {
 public:
  explicit PolicyEvaluator(const PolicyParams& params);

  const PolicyParams& params() const { return *params_; }

  Trajectory sample(std::span<const TokenId> question,
                    const GenerationConfig& gen) const;

  TokenEvaluation evaluate(std::span<const TokenId> question,
                           std::span<const TokenId> response,
                           double temperature = 1.0) const;

  // Next-token distribution (softmax of logits / temperature) after the given
  // prefix.
  std::vector<double> next_token_probs(std::span<const TokenId> prefix,
                                       double temperature = 1.0) const;

  // Single-step pieces. context() fills the `window` token ids that precede
  // position `end` of `sequence`, left-padded with id vocab - 1 (the pad
  // token of the standard vocabulary).
  void context(std::span<const TokenId> sequence, std::size_t end,
               std::vector<int>& out) const;
  void hidden(const std::vector<int>& ctx, std::vector<double>& out) const;
  void logits(const std::vector<double>& h, std::vector<double>& out) const;
  double value(const std::vector<double>& h) const;

 private:
  const PolicyParams* params_;
  std::vector<double> table_;  // [window][vocab][hidden]
};

Trajectory sample(const PolicyParams& params, std::span<const TokenId> question,
                  const GenerationConfig& gen);

TokenEvaluation logprob_and_value(const PolicyParams& params,
                                  const Trajectory& trajectory,
                                  double temperature = 1.0);

// How the surrogate is averaged over tokens.
//   kSequenceMean: mean over trajectories of the per-trajectory token mean
//                  (GRPO's 1/G sum_i 1/|o_i| sum_t).
//   kTokenMean:    mean over every token in the batch (PPO).
enum class LossAggregation { kSequenceMean, kTokenMean };

struct SurrogateOptions {
  double clip_eps = 0.2;
  double kl_beta = 0.0;
  double temperature = 1.0;
  LossAggregation aggregation = LossAggregation::kSequenceMean;
  double value_coef = 0.5;
};

struct SurrogateResult {
  PolicyParams gradient;  // d loss / d params, same shape as params
  double loss = 0.0;      // -surrogate + beta*KL + value_coef*value loss
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
  std::size_t tokens = 0;
};

// Gradient of the clipped surrogate loss (to be minimised). The KL term uses
// the per-token estimator pi_ref/pi - log(pi_ref/pi) - 1 and is skipped
// entirely when kl_beta == 0. value_targets, when given, adds
// value_coef * mean 0.5*(V - target)^2 over the same token aggregation.
// Trajectories with empty responses are excluded.
SurrogateResult gradients(const PolicyParams& params,
                          std::span<const Trajectory> batch,
                          const TokenTensor& advantages,
                          const SurrogateOptions& options,
                          const PolicyParams* ref_params = nullptr,
                          const TokenTensor* value_targets = nullptr);

// Same objective, value only.
double surrogate_loss(const PolicyParams& params,
                      std::span<const Trajectory> batch,
                      const TokenTensor& advantages,
                      const SurrogateOptions& options,
                      const PolicyParams* ref_params = nullptr,
                      const TokenTensor* value_targets = nullptr);

// params -= learning_rate * gradient
void apply_gradient(PolicyParams& params, const PolicyParams& gradient,
                    double learning_rate);

// Adam over the flat parameter vector, bias-corrected moments.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(double beta1, double beta2, double eps)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(PolicyParams& params, const PolicyParams& gradient,
            double learning_rate);
  std::uint64_t steps() const { return t_; }

 private:
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

// Checkpoint: "SQRLPOL1" magic, u32 format version, u32 kind, u32 V, u32 d_e,
// u32 W, u32 hidden-layer count, u32 hidden sizes..., u64 value count, then
// little-endian f64 values in group order. kind 0 stores every group; kind 1
// stores only the value head (value_weight, value_bias).
enum class CheckpointKind : std::uint32_t { kPolicy = 0, kValueHead = 1 };

void save_policy(const std::string& path, const PolicyParams& params,
                 CheckpointKind kind = CheckpointKind::kPolicy);
PolicyParams load_policy(const std::string& path);
// Overwrites the value head of `params` from a kind-1 checkpoint.
void load_value_head(const std::string& path, PolicyParams& params);

}  // namespace seqrl

#endif  // SEQRL_POLICY_HPP_
