#ifndef SEQRL_ADVANTAGE_HPP_
#define SEQRL_ADVANTAGE_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "seqrl/common.hpp"
#include "seqrl/policy.hpp"

namespace seqrl {

inline constexpr double kDefaultNormalizeEps = 1e-6;

struct RolloutGroup {
  std::uint64_t problem_id = 0;
  std::vector<Trajectory> trajectories;
  std::vector<double> outcome_rewards;
  std::vector<double> advantages;  // one scalar per trajectory (GRPO)
};

struct GaeConfig {
  double discount = 1.0;  // gamma_d in (0, 1]
  double lambda = 1.0;    // in [0, 1]
};

// (R_i - mean) / std with the population std. Groups whose rewards are all
// identical, or whose std falls below eps, map to all zeros. G < 2 throws
// ContractError.
std::vector<double> group_normalize(std::span<const double> rewards,
                                    double eps = kDefaultNormalizeEps);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// rewards has one entry per token; values has one more (bootstrap last).
GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              const GaeConfig& cfg = {});

// Outcome-only token rewards: zeros with the outcome on the last token.
std::vector<double> terminal_rewards(std::size_t length, double outcome);

// Every token of trajectory i receives group.advantages[i]. Empty responses
// give empty rows, which the surrogate then skips.
TokenTensor broadcast_advantage(const RolloutGroup& group);

}  // namespace seqrl

#endif  // SEQRL_ADVANTAGE_HPP_
