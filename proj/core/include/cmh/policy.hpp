#pragma once

#include <optional>
#include <string>

#include "cmh/env.hpp"

namespace cmh {

/// Anything that drives an episode through env::step.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;
  /// Called once after reset, before the first act().
  virtual void begin_episode(const EnvState& s) { (void)s; }
  /// Next edit, or nullopt to stop before the budget runs out.
  virtual std::optional<Action> act(const EnvState& s) = 0;
};

struct EpisodeOutcome {
  bool hidden = false;
  int edits_used = 0;
  double total_reward = 0.0;
};

/// Runs `policy` on `s` (fresh from reset) until the episode is done or the
/// policy stops. Each action is checked against the mask before stepping.
EpisodeOutcome run_episode(EnvState& s, Policy& policy);

}  // namespace cmh
