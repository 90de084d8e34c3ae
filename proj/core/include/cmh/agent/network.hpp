#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmh/agent/autodiff.hpp"
#include "cmh/env.hpp"

namespace cmh::agent {

using ad::Matrix;
using ad::Var;

constexpr int kFeatureDim = 4;

/// Dense view of an environment state for the network. Rows follow the node
/// index order of the injected graph.
struct Observation {
  Matrix adjacency;                        // D^-1/2 (A + I) D^-1/2
  Matrix features;                         // n x kFeatureDim
  std::vector<Eigen::Index> actor_rows;    // target first, then proxies
  std::vector<std::vector<std::uint8_t>> masks;  // one per actor, length 2(n-1)
};

/// Node features: degree / max degree, is-target, is-proxy, constant 1.
Observation observe(const EnvState& s);

struct AgentShape {
  int d_h = 32;
  std::size_t num_actors = 1;   // 1 + number of proxies
  std::size_t num_nodes = 2;    // nodes of the injected graph

  std::size_t num_logits() const { return 2 * (num_nodes - 1); }
  bool operator==(const AgentShape&) const = default;
};

/// Every learnable tensor of the policy/value network. Names carry a
/// "group." prefix (encoder, shared, gru, node_head, actor_head, critic).
class AgentParams {
 public:
  AgentParams() = default;
  AgentParams(const AgentShape& shape, std::uint64_t seed);

  const AgentShape& shape() const { return shape_; }
  std::vector<ad::Parameter>& tensors() { return tensors_; }
  const std::vector<ad::Parameter>& tensors() const { return tensors_; }
  ad::Parameter& at(const std::string& name);
  std::size_t count() const;

  static std::string group_of(const std::string& name);

 private:
  AgentShape shape_;
  std::vector<ad::Parameter> tensors_;
};

/// Parameters bound as leaves on a tape.
struct Bound {
  std::vector<Var> enc_w, enc_b;
  Var proj_w, proj_b, ln_gain, ln_bias;
  Var gru_wi, gru_wh, gru_bi, gru_bh;
  Var node_w, node_b;
  Var actor_w, actor_b;
  Var critic_w1, critic_b1, critic_w2, critic_b2;
  int d_h = 0;
};

Bound bind(ad::Tape& tape, AgentParams& params);

/// Four GCN layers (propagate, PairNorm, ELU) of width d_h/4, outputs
/// concatenated: n x d_h.
Var encode(const Bound& p, const Observation& obs);

/// Pools target, proxy-mean and global embeddings, projects them to d_h and
/// advances the GRU: returns the new 1 x d_h hidden state.
Var shared_state(const Bound& p, Var embeddings, const Observation& obs, Var h_prev);

struct PolicyOutput {
  Var node_logp;                 // 1 x num_actors
  std::vector<Var> actor_logp;   // per actor, 1 x 2(n-1), masked entries -inf;
                                 // default Var when the actor has no legal edit
  Var entropy;                   // H(node) + sum_j p_j H(actor_j)
  Var value;                     // 1 x 1
};

PolicyOutput policy_value(const Bound& p, Var h, Var embeddings, const Observation& obs);

struct StepOutput {
  PolicyOutput policy;
  Var hidden;
};

StepOutput forward(const Bound& p, const Observation& obs, Var h_prev);

}  // namespace cmh::agent
