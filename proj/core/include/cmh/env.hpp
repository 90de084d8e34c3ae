#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "cmh/detectors.hpp"
#include "cmh/graph.hpp"

namespace cmh {

enum class EditKind : std::uint8_t { kAdd = 0, kDel = 1 };

/// An edge edit performed by a controlled node. actor_index 0 is the target,
/// i > 0 is proxy i-1. `source` overrides the acting endpoint and is only
/// used by heuristics whose edits do not touch a controlled node (ROAM's
/// reconnections); such edits are validated against edge existence instead
/// of the action mask.
struct Action {
  int actor_index = 0;
  NodeId endpoint = 0;
  EditKind kind = EditKind::kAdd;
  std::optional<NodeId> source;

  bool operator==(const Action&) const = default;
};

struct AppliedEdit {
  NodeId u = 0;
  NodeId v = 0;
  EditKind kind = EditKind::kAdd;

  bool operator==(const AppliedEdit&) const = default;
};

struct EnvConfig {
  double tau = 0.5;
  std::size_t k = 0;          // number of proxies
  double p = 0.5;             // proxy-proxy edge probability
  int beta = 1;               // edit budget, proxy attachment excluded
  std::uint64_t seed = 0;     // proxy wiring seed
  double lambda = 0.1;        // weight of the similarity-decrease term
};

struct EnvState {
  Graph graph;
  NodeId target = 0;
  ProxySet proxies;
  NodeSet c_orig;
  int beta = 1;
  int budget_left = 1;
  double sim_prev = 0.0;
  int step_index = 0;
  double tau = 0.5;
  double lambda = 0.1;
  DetectorConfig detector;
  CommunityCover cover;       // detector output on `graph`
  bool hidden = false;
  bool done = false;
  std::vector<AppliedEdit> edit_log;

  std::size_t num_actors() const { return proxies.proxy_ids.size() + 1; }
  NodeId actor_node(int actor_index) const;
};

/// Starts an episode: injects proxies (free of budget), fixes the original
/// community and evaluates the hiding predicate on the injected graph.
/// When `community` is empty the first community of the target under the
/// detector on `g` is used.
EnvState reset(const Graph& g, NodeId target, const DetectorConfig& detector,
               const EnvConfig& cfg, std::optional<NodeSet> community = std::nullopt);

/// Ids of the n-1 possible endpoints for an actor, in id order.
std::vector<NodeId> endpoints(const EnvState& s, int actor_index);

/// Length 2(n-1); entry 2j is add(actor, endpoint j), 2j+1 is del(actor,
/// endpoint j). Exactly n-1 entries are set.
std::vector<std::uint8_t> valid_action_mask(const EnvState& s, int actor_index);

Action action_from_logit(const EnvState& s, int actor_index, std::size_t logit_index);
std::size_t logit_index_of(const EnvState& s, const Action& a);

/// Toggle action for actor/endpoint: add when the edge is absent, del otherwise.
Action toggle_action(const EnvState& s, int actor_index, NodeId endpoint);

/// True when `a` is applicable in `s` (unmasked, or a consistent explicit edit).
bool is_valid(const EnvState& s, const Action& a);

struct StepResult {
  double reward = 0.0;
  bool done = false;
  double sim_curr = 0.0;
  double delta = 0.0;
};

/// Applies one edit, re-runs the detector and computes the reward.
StepResult step(EnvState& s, const Action& a);

/// One JSON line: step, action, reward, sim_curr, hidden.
void write_trajectory_line(std::ostream& out, const EnvState& after, const Action& a,
                           const StepResult& r);

}  // namespace cmh
