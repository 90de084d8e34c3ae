#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmh/agent/network.hpp"
#include "cmh/policy.hpp"
#include "cmh/random.hpp"

namespace cmh::agent {

enum class AdvantageNorm {
  kEpisode,   // standardize within each episode (raw when fewer than 2 steps)
  kRunning,   // divide by a running RMS across episodes, no centring
  kNone,
};

std::string to_string(AdvantageNorm n);
/// "episode", "running" or "none".
AdvantageNorm parse_advantage_norm(const std::string& s);

struct TrainConfig {
  int episodes = 5000;
  double lr = 5e-4;
  double clip_eps = 0.1;
  double gae_lambda = 0.95;
  double gamma = 0.99;
  int updates_per_episode = 4;
  double c_v = 1.0;
  double c_clip = 0.1;
  double c_ent_start = 1e-2;
  double c_ent_end = 1e-4;
  int d_h = 32;
  int target_resample_every = 5;
  int community_resample_every = 50;
  double rms_alpha = 0.99;
  double rms_eps = 1e-8;
  double max_grad_norm = 0.0;   // <= 0 disables clipping
  AdvantageNorm advantage_norm = AdvantageNorm::kRunning;
  std::uint64_t seed = 0;

  void validate() const;
  /// Linear from c_ent_start at episode 0 to c_ent_end at the last episode.
  double entropy_coef(int episode) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct Transition {
  Observation obs;
  int node_action = 0;
  std::size_t edit_action = 0;
  double logp_node = 0.0;
  double logp_actor = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
};

using Trajectory = std::vector<Transition>;

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// GAE over one episode with terminal bootstrap value 0.
Advantages gae(std::span<const double> rewards, std::span<const double> values, double gamma,
               double lambda);

struct LossTerms {
  Var total;
  double value_loss = 0.0;
  double policy_loss = 0.0;   // 0.5 (L_node + L_actor)
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

/// Builds the PPO loss on `tape`, replaying the GRU from a zero state over
/// the whole trajectory.
LossTerms ppo_loss(ad::Tape& tape, AgentParams& params, const Trajectory& traj,
                   std::span<const double> advantages, std::span<const double> returns,
                   double c_ent, const TrainConfig& cfg);

class RmsProp {
 public:
  RmsProp() = default;
  RmsProp(double lr, double alpha, double eps) : lr_(lr), alpha_(alpha), eps_(eps) {}

  void step(std::vector<ad::Parameter>& params);

  std::vector<Matrix>& state() { return square_avg_; }
  const std::vector<Matrix>& state() const { return square_avg_; }

 private:
  double lr_ = 5e-4, alpha_ = 0.99, eps_ = 1e-8;
  std::vector<Matrix> square_avg_;
};

/// Scales all gradients so their joint L2 norm is at most max_norm. Returns
/// the norm before scaling.
double clip_grad_norm(std::vector<ad::Parameter>& params, double max_norm);

struct UpdateStats {
  double loss = 0.0;
  double value_loss = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
};

struct Probabilities {
  std::vector<double> node;                 // over actors
  std::vector<std::vector<double>> actor;   // per actor over 2(n-1) logits
  double value = 0.0;
  Matrix hidden;                            // next GRU state
};

Probabilities policy_probs(AgentParams& params, const Observation& obs, const Matrix& h_prev);

struct Decision {
  int actor = 0;
  std::size_t logit = 0;
  double logp_node = 0.0;
  double logp_actor = 0.0;
  double value = 0.0;
  Matrix hidden;
};

/// Samples from the factored policy when `rng` is given, otherwise takes the
/// argmax of each factor (lowest index on ties).
Decision decide(AgentParams& params, const Observation& obs, const Matrix& h_prev, Rng* rng);

/// Agent state that survives a checkpoint round trip.
struct AgentState {
  AgentParams params;
  RmsProp optimizer;
  Rng rng;
  TrainConfig config;
  double adv_sq = 1.0;          // running second moment for kRunning
  int episodes_done = 0;
  nlohmann::json meta = nlohmann::json::object();
};

AgentState make_agent(const AgentShape& shape, const TrainConfig& cfg);

/// GAE, advantage scaling, then cfg.updates_per_episode clipped PPO passes
/// over one finished trajectory.
UpdateStats ppo_update(AgentState& agent, const Trajectory& traj, double c_ent);

/// Training episodes are drawn from these communities of the training
/// detector on the original graph.
struct TrainingPool {
  Graph graph;
  DetectorConfig detector;
  EnvConfig env;
  std::vector<NodeSet> communities;
};

struct CurvePoint {
  int episode = 0;
  NodeId target = 0;
  double reward = 0.0;
  int steps = 0;
  bool success = false;
  double moving_sr = 0.0;    // over the last 100 episodes
  double entropy_coef = 0.0;
};

using TrainCallback = std::function<void(const CurvePoint&, const UpdateStats&)>;

std::vector<CurvePoint> train(AgentState& agent, const TrainingPool& pool, const TrainCallback& cb = {});

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

constexpr int kCheckpointVersion = 1;
void save_checkpoint(std::ostream& out, const AgentState& agent);
AgentState load_checkpoint(std::istream& in);

/// Frozen-parameter policy: GRU state reset at begin_episode, argmax actions
/// unless a sampling seed is set.
class OdrlPolicy : public Policy {
 public:
  explicit OdrlPolicy(AgentParams params, std::optional<std::uint64_t> sample_seed = std::nullopt);

  std::string name() const override { return "odrl"; }
  void begin_episode(const EnvState& s) override;
  std::optional<Action> act(const EnvState& s) override;

 private:
  AgentParams params_;
  Matrix hidden_;
  std::optional<Rng> rng_;
};

}  // namespace cmh::agent
