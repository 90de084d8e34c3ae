#include "cmh/baselines.hpp"

#include <algorithm>
#include <iostream>
#include <set>

#include "cmh/errors.hpp"

namespace cmh {

namespace {

using Pair = std::pair<NodeId, NodeId>;

Pair ordered(NodeId a, NodeId b) { return a < b ? Pair{a, b} : Pair{b, a}; }

std::set<Pair> edited_pairs(const EnvState& s) {
  std::set<Pair> out;
  for (const auto& e : s.edit_log) out.insert(ordered(e.u, e.v));
  return out;
}

// Score per node index of the current graph.
std::vector<double> degree_scores(const Graph& g) {
  std::vector<double> out(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) out[i] = static_cast<double>(g.degree(static_cast<NodeIndex>(i)));
  return out;
}

// Highest score first, smallest id on ties. Index order is id order, so a
// stable sort on descending score does it.
std::vector<NodeIndex> ranked(const std::vector<double>& score) {
  std::vector<NodeIndex> order(score.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<NodeIndex>(i);
  std::stable_sort(order.begin(), order.end(), [&](NodeIndex a, NodeIndex b) {
    return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
  });
  return order;
}

Action centrality_step(const EnvState& s, const std::vector<double>& score) {
  const auto done = edited_pairs(s);
  const auto order = ranked(score);
  std::vector<std::pair<double, int>> actors;
  for (int a = 0; a < static_cast<int>(s.num_actors()); ++a) {
    const NodeIndex i = s.graph.require_index(s.actor_node(a));
    actors.emplace_back(score[static_cast<std::size_t>(i)], a);
  }
  std::stable_sort(actors.begin(), actors.end(), [&](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return s.actor_node(x.second) < s.actor_node(y.second);
  });
  for (const auto& [_, a] : actors) {
    const NodeId actor = s.actor_node(a);
    for (NodeIndex v : order) {
      const NodeId w = s.graph.id_at(v);
      if (w == actor || done.count(ordered(actor, w))) continue;
      return toggle_action(s, a, w);
    }
  }
  throw ExhaustedError("no unedited pair left for any controlled node");
}

}  // namespace

std::string to_string(HeuristicKind kind) {
  switch (kind) {
    case HeuristicKind::kRandom: return "random";
    case HeuristicKind::kDegree: return "degree";
    case HeuristicKind::kBetweenness: return "betweenness";
    case HeuristicKind::kRoam: return "roam";
    case HeuristicKind::kNaive: return "naive";
  }
  return "?";
}

HeuristicKind parse_heuristic_kind(const std::string& name) {
  for (auto k : {HeuristicKind::kRandom, HeuristicKind::kDegree, HeuristicKind::kBetweenness,
                 HeuristicKind::kRoam, HeuristicKind::kNaive}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown heuristic '" + name + "'");
}

Graph naive_connection(const Graph& g, NodeId target, std::size_t k, double p, std::uint64_t seed) {
  return inject_proxies(g, target, k, p, seed).first;
}

Action heuristic_step(const EnvState& s, HeuristicKind kind, Rng& rng) {
  if (s.done) throw ProtocolError("heuristic step on a finished episode");
  switch (kind) {
    case HeuristicKind::kRandom: {
      // Every endpoint has exactly one valid toggle, so a uniform actor then
      // a uniform endpoint is uniform over valid pairs.
      if (s.graph.n() < 2) throw ExhaustedError("no endpoint available");
      const int a = static_cast<int>(uniform_index(rng, s.num_actors()));
      const auto ends = endpoints(s, a);
      return toggle_action(s, a, ends[uniform_index(rng, ends.size())]);
    }
    case HeuristicKind::kDegree:
      return centrality_step(s, degree_scores(s.graph));
    case HeuristicKind::kBetweenness:
      return centrality_step(s, betweenness(s.graph));
    case HeuristicKind::kRoam:
    case HeuristicKind::kNaive:
      break;
  }
  throw ConfigError(to_string(kind) + " has no single-step form");
}

std::vector<Action> roam_rewire(const EnvState& s, int budget) {
  std::vector<Action> out;
  const NodeIndex t = s.graph.require_index(s.target);
  const auto& nbrs = s.graph.neighbors(t);
  if (nbrs.empty()) {
    std::clog << "warning: roam skipped, target " << s.target << " is isolated\n";
    return out;
  }
  if (budget < 1) return out;
  NodeIndex best = nbrs.front();
  for (NodeIndex v : nbrs) {
    if (s.graph.degree(v) > s.graph.degree(best)) best = v;
  }
  const NodeId hub = s.graph.id_at(best);
  out.push_back(Action{0, hub, EditKind::kDel, {}});
  for (NodeIndex w : nbrs) {
    if (static_cast<int>(out.size()) >= budget) break;
    if (w == best || s.graph.has_edge(best, w)) continue;
    out.push_back(Action{0, s.graph.id_at(w), EditKind::kAdd, hub});
  }
  return out;
}

std::optional<Action> RandomPolicy::act(const EnvState& s) {
  return heuristic_step(s, HeuristicKind::kRandom, rng_);
}

CentralityPolicy::CentralityPolicy(HeuristicKind kind, bool recompute) : kind_(kind), recompute_(recompute) {
  if (kind != HeuristicKind::kDegree && kind != HeuristicKind::kBetweenness) {
    throw ConfigError("centrality policy needs degree or betweenness");
  }
}

void CentralityPolicy::begin_episode(const EnvState& s) {
  frozen_.clear();
  if (!recompute_ && kind_ == HeuristicKind::kBetweenness) frozen_ = betweenness(s.graph);
}

std::optional<Action> CentralityPolicy::act(const EnvState& s) {
  try {
    if (!frozen_.empty()) return centrality_step(s, frozen_);
    return kind_ == HeuristicKind::kDegree ? centrality_step(s, degree_scores(s.graph))
                                           : centrality_step(s, betweenness(s.graph));
  } catch (const ExhaustedError&) {
    return std::nullopt;
  }
}

void RoamPolicy::begin_episode(const EnvState& s) {
  plan_ = roam_rewire(s, s.budget_left);
  next_ = 0;
}

std::optional<Action> RoamPolicy::act(const EnvState&) {
  if (next_ >= plan_.size()) return std::nullopt;
  return plan_[next_++];
}

std::unique_ptr<Policy> make_heuristic(HeuristicKind kind, std::uint64_t seed) {
  switch (kind) {
    case HeuristicKind::kRandom: return std::make_unique<RandomPolicy>(seed);
    case HeuristicKind::kDegree:
    case HeuristicKind::kBetweenness: return std::make_unique<CentralityPolicy>(kind);
    case HeuristicKind::kRoam: return std::make_unique<RoamPolicy>();
    case HeuristicKind::kNaive: return std::make_unique<NaivePolicy>();
  }
  throw ConfigError("unknown heuristic");
}

}  // namespace cmh
