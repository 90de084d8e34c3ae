#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cmh/env.hpp"
#include "cmh/policy.hpp"
#include "cmh/random.hpp"

namespace cmh {

enum class HeuristicKind { kRandom, kDegree, kBetweenness, kRoam, kNaive };

std::string to_string(HeuristicKind kind);
HeuristicKind parse_heuristic_kind(const std::string& name);

/// Proxy injection with no budgeted edits.
Graph naive_connection(const Graph& g, NodeId target, std::size_t k, double p, std::uint64_t seed);

/// One step of the random, degree or betweenness heuristic.
///
/// random picks uniformly among all (actor, valid action) pairs. degree and
/// betweenness pick the controlled node with the highest score as actor and
/// the highest scoring other node as endpoint, toggling that edge. Pairs
/// already edited this episode are skipped so the policy does not undo its
/// own edits; when the top actor has no candidate left the next actor is
/// tried. Ties go to the smallest id. Throws ExhaustedError when nothing is
/// left.
Action heuristic_step(const EnvState& s, HeuristicKind kind, Rng& rng);

/// del(target, v*) for the highest-degree neighbour v*, then add(v*, w) for
/// the target's other neighbours w not adjacent to v*, in id order, truncated
/// to `budget` actions. Empty (with a warning) for an isolated target.
std::vector<Action> roam_rewire(const EnvState& s, int budget);

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  std::string name() const override { return "random"; }
  std::optional<Action> act(const EnvState& s) override;

 private:
  Rng rng_;
};

class CentralityPolicy : public Policy {
 public:
  /// kind must be kDegree or kBetweenness. With recompute off betweenness is
  /// computed once per episode.
  explicit CentralityPolicy(HeuristicKind kind, bool recompute = true);
  std::string name() const override { return to_string(kind_); }
  void begin_episode(const EnvState& s) override;
  std::optional<Action> act(const EnvState& s) override;

 private:
  HeuristicKind kind_;
  bool recompute_;
  std::vector<double> frozen_;
};

class RoamPolicy : public Policy {
 public:
  std::string name() const override { return "roam"; }
  void begin_episode(const EnvState& s) override;
  std::optional<Action> act(const EnvState& s) override;

 private:
  std::vector<Action> plan_;
  std::size_t next_ = 0;
};

/// Does nothing: the proxies injected at reset are the whole strategy.
class NaivePolicy : public Policy {
 public:
  std::string name() const override { return "naive"; }
  std::optional<Action> act(const EnvState&) override { return std::nullopt; }
};

std::unique_ptr<Policy> make_heuristic(HeuristicKind kind, std::uint64_t seed);

}  // namespace cmh
