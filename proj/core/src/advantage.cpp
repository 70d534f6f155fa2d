#include "seqrl/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace seqrl {

std::vector<double> group_normalize(std::span<const double> rewards,
                                    double eps) {
  if (rewards.size() < 2) {
    throw ContractError("group_normalize needs at least 2 rewards, got " +
                        std::to_string(rewards.size()));
  }
  std::vector<double> out(rewards.size(), 0.0);
  const bool all_equal = std::all_of(rewards.begin(), rewards.end(),
                                     [&](double r) { return r == rewards[0]; });
  if (all_equal) return out;

  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double std_dev = std::sqrt(var / n);
  if (std_dev < eps) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out[i] = (rewards[i] - mean) / std_dev;
  }
  return out;
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              const GaeConfig& cfg) {
  if (values.size() != rewards.size() + 1) {
    throw ShapeError("gae: expected " + std::to_string(rewards.size() + 1) +
                     " values (incl. bootstrap), got " +
                     std::to_string(values.size()));
  }
  if (!(cfg.discount > 0.0 && cfg.discount <= 1.0) ||
      !(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) {
    throw ContractError("gae: discount must lie in (0,1] and lambda in [0,1]");
  }
  const std::size_t n = rewards.size();
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double delta = rewards[k] + cfg.discount * values[k + 1] - values[k];
    running = delta + cfg.discount * cfg.lambda * running;
    out.advantages[k] = running;
    out.returns[k] = running + values[k];
  }
  return out;
}

std::vector<double> terminal_rewards(std::size_t length, double outcome) {
  std::vector<double> out(length, 0.0);
  if (length > 0) out.back() = outcome;
  return out;
}

TokenTensor broadcast_advantage(const RolloutGroup& group) {
  if (group.advantages.size() != group.trajectories.size()) {
    throw ShapeError("broadcast_advantage: advantages/trajectories mismatch");
  }
  TokenTensor out;
  out.reserve(group.trajectories.size());
  for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
    out.emplace_back(group.trajectories[i].response.size(),
                     group.advantages[i]);
  }
  return out;
}

}  // namespace seqrl
