#pragma once

#include <map>
#include <string>

#include "cmh/agent/ppo.hpp"

namespace support {

struct GradCheck {
  std::map<std::string, double> group_error;   // ||fd - g|| / (||fd|| + ||g||) per group
  std::size_t steps = 0;
  std::size_t num_nodes = 0;
  double worst() const;
};

/// Central-difference check of the full PPO loss on a short trajectory over a
/// random graph of `graph_nodes` nodes plus `proxies` proxies. The episode is
/// kept running for `steps` edits regardless of the hiding predicate.
GradCheck check_ppo_gradients(int graph_nodes, int proxies, int d_h, int steps, std::uint64_t seed);

}  // namespace support
