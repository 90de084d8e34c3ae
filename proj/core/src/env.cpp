#include "cmh/env.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "cmh/errors.hpp"
#include "cmh/metrics.hpp"

namespace cmh {

NodeId EnvState::actor_node(int actor_index) const {
  if (actor_index < 0 || static_cast<std::size_t>(actor_index) >= num_actors()) {
    throw InvalidActionError("actor index " + std::to_string(actor_index) + " out of range");
  }
  return actor_index == 0 ? target : proxies.proxy_ids[static_cast<std::size_t>(actor_index - 1)];
}

EnvState reset(const Graph& g, NodeId target, const DetectorConfig& detector,
               const EnvConfig& cfg, std::optional<NodeSet> community) {
  g.require_index(target);
  if (cfg.beta < 1) throw ConfigError("edit budget must be at least 1");
  if (!(cfg.tau >= 0.0 && cfg.tau < 1.0)) throw ConfigError("tau must lie in [0,1)");

  EnvState s;
  s.target = target;
  s.detector = detector;
  s.tau = cfg.tau;
  s.lambda = cfg.lambda;
  s.beta = cfg.beta;
  s.budget_left = cfg.beta;

  if (community) {
    if (!std::binary_search(community->begin(), community->end(), target)) {
      throw IneligibleTargetError("target " + std::to_string(target) + " is not in the given community");
    }
    s.c_orig = std::move(*community);
  } else {
    const auto cover0 = detect(g, detector);
    const auto mine = communities_of(cover0, target);
    if (mine.empty()) {
      throw IneligibleTargetError("target " + std::to_string(target) + " is not assigned to any community");
    }
    s.c_orig = cover0.communities[mine.front()];
  }

  auto [injected, proxies] = inject_proxies(g, target, cfg.k, cfg.p, cfg.seed);
  s.graph = std::move(injected);
  s.proxies = std::move(proxies);
  s.cover = detect(s.graph, detector);
  s.sim_prev = max_similarity(s.c_orig, s.cover, target);
  s.hidden = is_hidden(s.c_orig, s.cover, target, s.tau);
  s.done = s.hidden;
  return s;
}

std::vector<NodeId> endpoints(const EnvState& s, int actor_index) {
  const NodeId actor = s.actor_node(actor_index);
  std::vector<NodeId> out;
  out.reserve(s.graph.n() - 1);
  for (NodeId id : s.graph.ids()) {
    if (id != actor) out.push_back(id);
  }
  return out;
}

std::vector<std::uint8_t> valid_action_mask(const EnvState& s, int actor_index) {
  const NodeIndex a = s.graph.require_index(s.actor_node(actor_index));
  std::vector<std::uint8_t> mask(2 * (s.graph.n() - 1), 0);
  std::size_t j = 0;
  for (std::size_t v = 0; v < s.graph.n(); ++v) {
    if (static_cast<NodeIndex>(v) == a) continue;
    const bool present = s.graph.has_edge(a, static_cast<NodeIndex>(v));
    mask[2 * j + (present ? 1 : 0)] = 1;
    ++j;
  }
  return mask;
}

Action action_from_logit(const EnvState& s, int actor_index, std::size_t logit_index) {
  const NodeIndex a = s.graph.require_index(s.actor_node(actor_index));
  const std::size_t j = logit_index / 2;
  if (j >= s.graph.n() - 1) throw InvalidActionError("logit index out of range");
  const auto v = static_cast<NodeIndex>(j < static_cast<std::size_t>(a) ? j : j + 1);
  return Action{actor_index, s.graph.id_at(v), logit_index % 2 == 0 ? EditKind::kAdd : EditKind::kDel, {}};
}

std::size_t logit_index_of(const EnvState& s, const Action& act) {
  const NodeIndex a = s.graph.require_index(s.actor_node(act.actor_index));
  const NodeIndex v = s.graph.require_index(act.endpoint);
  if (v == a) throw InvalidActionError("self edit");
  const auto j = static_cast<std::size_t>(v < a ? v : v - 1);
  return 2 * j + (act.kind == EditKind::kDel ? 1 : 0);
}

Action toggle_action(const EnvState& s, int actor_index, NodeId endpoint) {
  const NodeId actor = s.actor_node(actor_index);
  const bool present = s.graph.has_edge_ids(actor, endpoint);
  return Action{actor_index, endpoint, present ? EditKind::kDel : EditKind::kAdd, {}};
}

bool is_valid(const EnvState& s, const Action& a) {
  NodeId u = 0;
  if (a.source) {
    u = *a.source;
  } else {
    if (a.actor_index < 0 || static_cast<std::size_t>(a.actor_index) >= s.num_actors()) return false;
    u = s.actor_node(a.actor_index);
  }
  if (u == a.endpoint || !s.graph.contains(u) || !s.graph.contains(a.endpoint)) return false;
  const bool present = s.graph.has_edge_ids(u, a.endpoint);
  return present == (a.kind == EditKind::kDel);
}

StepResult step(EnvState& s, const Action& a) {
  if (s.done) throw ProtocolError("step called on a finished episode");
  if (!is_valid(s, a)) throw InvalidActionError("masked or inconsistent action");
  const NodeId u = a.source ? *a.source : s.actor_node(a.actor_index);

  s.graph = toggle_edge(s.graph, u, a.endpoint);
  s.edit_log.push_back({u, a.endpoint, a.kind});
  --s.budget_left;
  ++s.step_index;

  s.cover = detect(s.graph, s.detector);
  StepResult r;
  r.sim_curr = max_similarity(s.c_orig, s.cover, s.target);
  s.hidden = is_hidden(s.c_orig, s.cover, s.target, s.tau);
  r.delta = s.sim_prev > 0.0 ? std::clamp((s.sim_prev - r.sim_curr) / s.sim_prev, -1.0, 1.0) : 0.0;
  r.reward = (s.hidden ? 1.0 : 0.0) + s.lambda * r.delta;
  s.sim_prev = r.sim_curr;
  s.done = s.hidden || s.budget_left == 0;
  r.done = s.done;
  return r;
}

void write_trajectory_line(std::ostream& out, const EnvState& after, const Action& a,
                           const StepResult& r) {
  nlohmann::json j;
  j["step"] = after.step_index;
  const auto& edit = after.edit_log.back();
  j["action"] = {{"actor", a.actor_index},
                 {"u", edit.u},
                 {"v", edit.v},
                 {"kind", a.kind == EditKind::kAdd ? "add" : "del"}};
  j["reward"] = r.reward;
  j["sim_curr"] = r.sim_curr;
  j["hidden"] = after.hidden;
  out << j.dump() << '\n';
}

}  // namespace cmh
