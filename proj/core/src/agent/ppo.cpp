#include "cmh/agent/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <sstream>

#include "cmh/errors.hpp"

namespace cmh::agent {

std::string to_string(AdvantageNorm n) {
  switch (n) {
    case AdvantageNorm::kEpisode: return "episode";
    case AdvantageNorm::kRunning: return "running";
    case AdvantageNorm::kNone: return "none";
  }
  return "episode";
}

AdvantageNorm parse_advantage_norm(const std::string& s) {
  if (s == "episode") return AdvantageNorm::kEpisode;
  if (s == "running") return AdvantageNorm::kRunning;
  if (s == "none") return AdvantageNorm::kNone;
  throw ConfigError("unknown advantage normalization '" + s + "'");
}

namespace {

Var mean_of(ad::Tape& tape, const std::vector<Var>& xs) {
  if (xs.empty()) return tape.constant(Matrix::Zero(1, 1));
  Var acc = xs.front();
  for (std::size_t i = 1; i < xs.size(); ++i) acc = ad::add(acc, xs[i]);
  return ad::scale(acc, 1.0 / static_cast<double>(xs.size()));
}

// -min(r A, clip(r) A)
Var clipped_surrogate_loss(Var ratio, double adv, double eps) {
  const Var unclipped = ad::scale(ratio, adv);
  const Var clipped = ad::scale(ad::clamp(ratio, 1.0 - eps, 1.0 + eps), adv);
  return ad::scale(ad::minimum(unclipped, clipped), -1.0);
}

Matrix json_to_matrix(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ParseError("checkpoint tensor has the wrong size");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

}  // namespace

void TrainConfig::validate() const {
  if (episodes < 1) throw ConfigError("episodes must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("clip_eps must lie in (0,1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0,1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must lie in [0,1]");
  if (updates_per_episode < 1) throw ConfigError("updates_per_episode must be positive");
  if (!(c_v > 0.0 && c_clip > 0.0 && c_ent_start > 0.0 && c_ent_end > 0.0)) {
    throw ConfigError("loss coefficients must be positive");
  }
  if (d_h < 4 || d_h % 4 != 0) throw ConfigError("d_h must be a positive multiple of 4");
  if (target_resample_every < 1 || community_resample_every < 1) throw ConfigError("resample periods must be positive");
  if (!(rms_alpha > 0.0 && rms_alpha < 1.0) || !(rms_eps > 0.0)) throw ConfigError("bad RMSprop constants");
}

double TrainConfig::entropy_coef(int episode) const {
  if (episodes <= 1) return c_ent_start;
  const double t = std::clamp(static_cast<double>(episode) / (episodes - 1), 0.0, 1.0);
  return c_ent_start + (c_ent_end - c_ent_start) * t;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"episodes", c.episodes},
       {"lr", c.lr},
       {"clip_eps", c.clip_eps},
       {"gae_lambda", c.gae_lambda},
       {"gamma", c.gamma},
       {"updates_per_episode", c.updates_per_episode},
       {"c_v", c.c_v},
       {"c_clip", c.c_clip},
       {"c_ent_start", c.c_ent_start},
       {"c_ent_end", c.c_ent_end},
       {"d_h", c.d_h},
       {"target_resample_every", c.target_resample_every},
       {"community_resample_every", c.community_resample_every},
       {"rms_alpha", c.rms_alpha},
       {"rms_eps", c.rms_eps},
       {"max_grad_norm", c.max_grad_norm},
       {"advantage_norm", to_string(c.advantage_norm)},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.episodes = j.at("episodes").get<int>();
  c.lr = j.at("lr").get<double>();
  c.clip_eps = j.at("clip_eps").get<double>();
  c.gae_lambda = j.at("gae_lambda").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.updates_per_episode = j.at("updates_per_episode").get<int>();
  c.c_v = j.at("c_v").get<double>();
  c.c_clip = j.at("c_clip").get<double>();
  c.c_ent_start = j.at("c_ent_start").get<double>();
  c.c_ent_end = j.at("c_ent_end").get<double>();
  c.d_h = j.at("d_h").get<int>();
  c.target_resample_every = j.at("target_resample_every").get<int>();
  c.community_resample_every = j.at("community_resample_every").get<int>();
  c.rms_alpha = j.at("rms_alpha").get<double>();
  c.rms_eps = j.at("rms_eps").get<double>();
  c.max_grad_norm = j.at("max_grad_norm").get<double>();
  c.advantage_norm = parse_advantage_norm(j.at("advantage_norm").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
}

Advantages gae(std::span<const double> rewards, std::span<const double> values, double gamma,
               double lambda) {
  if (rewards.size() != values.size()) throw ConfigError("gae: rewards and values differ in length");
  Advantages out;
  out.advantages.assign(rewards.size(), 0.0);
  out.returns.assign(rewards.size(), 0.0);
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    const double next_value = t + 1 < values.size() ? values[t + 1] : 0.0;
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + gamma * lambda * running;
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
  }
  return out;
}

LossTerms ppo_loss(ad::Tape& tape, AgentParams& params, const Trajectory& traj,
                   std::span<const double> advantages, std::span<const double> returns,
                   double c_ent, const TrainConfig& cfg) {
  if (traj.empty()) throw ProtocolError("ppo_loss on an empty trajectory");
  if (advantages.size() != traj.size() || returns.size() != traj.size()) {
    throw ConfigError("ppo_loss: advantages/returns do not match the trajectory");
  }
  const Bound b = bind(tape, params);
  Var h = tape.constant(Matrix::Zero(1, params.shape().d_h));
  std::vector<Var> value_terms, node_terms, actor_terms, entropy_terms;
  LossTerms terms;
  double kl = 0.0;
  int clipped = 0;

  for (std::size_t t = 0; t < traj.size(); ++t) {
    const Transition& tr = traj[t];
    const StepOutput out = forward(b, tr.obs, h);
    h = out.hidden;
    const Var lp_node = ad::pick(out.policy.node_logp, 0, tr.node_action);
    const Var lp_actor = ad::pick(out.policy.actor_logp.at(static_cast<std::size_t>(tr.node_action)), 0,
                                  static_cast<Eigen::Index>(tr.edit_action));
    const Var r_node = ad::exp(ad::add_const(lp_node, -tr.logp_node));
    const Var r_actor = ad::exp(ad::add_const(lp_actor, -tr.logp_actor));
    node_terms.push_back(clipped_surrogate_loss(r_node, advantages[t], cfg.clip_eps));
    actor_terms.push_back(clipped_surrogate_loss(r_actor, advantages[t], cfg.clip_eps));
    value_terms.push_back(ad::square(ad::add_const(out.policy.value, -returns[t])));
    entropy_terms.push_back(out.policy.entropy);

    kl += (tr.logp_node + tr.logp_actor) - (lp_node.scalar() + lp_actor.scalar());
    for (double r : {r_node.scalar(), r_actor.scalar()}) {
      if (std::abs(r - 1.0) > cfg.clip_eps) ++clipped;
    }
  }

  const Var l_value = mean_of(tape, value_terms);
  const Var l_policy = ad::scale(ad::add(mean_of(tape, node_terms), mean_of(tape, actor_terms)), 0.5);
  const Var l_entropy = mean_of(tape, entropy_terms);
  terms.total = ad::sub(ad::add(ad::scale(l_value, cfg.c_v), ad::scale(l_policy, cfg.c_clip)),
                        ad::scale(l_entropy, c_ent));
  const auto n = static_cast<double>(traj.size());
  terms.value_loss = l_value.scalar();
  terms.policy_loss = l_policy.scalar();
  terms.entropy = l_entropy.scalar();
  terms.approx_kl = kl / n;
  terms.clip_fraction = clipped / (2.0 * n);
  return terms;
}

void RmsProp::step(std::vector<ad::Parameter>& params) {
  if (square_avg_.size() != params.size()) {
    square_avg_.clear();
    for (const auto& p : params) square_avg_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& sq = square_avg_[i];
    sq = alpha_ * sq + (1.0 - alpha_) * p.grad.cwiseAbs2();
    p.value.array() -= lr_ * p.grad.array() / (sq.array().sqrt() + eps_);
  }
}

double clip_grad_norm(std::vector<ad::Parameter>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) sq += p.grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (auto& p : params) p.grad *= s;
  }
  return norm;
}

namespace {

struct Evaluated {
  Matrix node_logp;
  std::vector<Matrix> actor_logp;   // empty matrix for unusable actors
  double value = 0.0;
  Matrix hidden;
};

Evaluated evaluate(AgentParams& params, const Observation& obs, const Matrix& h_prev) {
  ad::Tape tape;
  const Bound b = bind(tape, params);
  const StepOutput out = forward(b, obs, tape.constant(h_prev));
  Evaluated e;
  e.node_logp = out.policy.node_logp.value();
  for (const Var& v : out.policy.actor_logp) e.actor_logp.push_back(v.tape ? v.value() : Matrix());
  e.value = out.policy.value.scalar();
  e.hidden = out.hidden.value();
  return e;
}

std::vector<double> probs_of(const Matrix& logp) {
  std::vector<double> p(static_cast<std::size_t>(logp.cols()));
  for (Eigen::Index i = 0; i < logp.cols(); ++i) p[static_cast<std::size_t>(i)] = std::exp(logp(0, i));
  return p;
}

std::size_t argmax(const std::vector<double>& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

}  // namespace

Probabilities policy_probs(AgentParams& params, const Observation& obs, const Matrix& h_prev) {
  const Evaluated e = evaluate(params, obs, h_prev);
  Probabilities out;
  out.node = probs_of(e.node_logp);
  for (const auto& lp : e.actor_logp) {
    out.actor.push_back(lp.size() ? probs_of(lp) : std::vector<double>(obs.masks.front().size(), 0.0));
  }
  out.value = e.value;
  out.hidden = e.hidden;
  return out;
}

Decision decide(AgentParams& params, const Observation& obs, const Matrix& h_prev, Rng* rng) {
  const Evaluated e = evaluate(params, obs, h_prev);
  const auto node_p = probs_of(e.node_logp);
  Decision d;
  d.actor = static_cast<int>(rng ? sample_categorical(*rng, node_p) : argmax(node_p));
  const Matrix& lp = e.actor_logp[static_cast<std::size_t>(d.actor)];
  const auto actor_p = probs_of(lp);
  d.logit = rng ? sample_categorical(*rng, actor_p) : argmax(actor_p);
  if (!obs.masks[static_cast<std::size_t>(d.actor)][d.logit]) throw NumericError("policy selected a masked edit");
  d.logp_node = e.node_logp(0, d.actor);
  d.logp_actor = lp(0, static_cast<Eigen::Index>(d.logit));
  d.value = e.value;
  d.hidden = e.hidden;
  return d;
}

AgentState make_agent(const AgentShape& shape, const TrainConfig& cfg) {
  cfg.validate();
  AgentShape s = shape;
  s.d_h = cfg.d_h;
  AgentState a{AgentParams(s, derive_seed(cfg.seed, 1)), RmsProp(cfg.lr, cfg.rms_alpha, cfg.rms_eps),
               Rng(derive_seed(cfg.seed, 2)), cfg};
  return a;
}

UpdateStats ppo_update(AgentState& agent, const Trajectory& traj, double c_ent) {
  const TrainConfig& cfg = agent.config;
  std::vector<double> rewards, values;
  for (const auto& t : traj) {
    rewards.push_back(t.reward);
    values.push_back(t.value);
  }
  Advantages adv = gae(rewards, values, cfg.gamma, cfg.gae_lambda);
  auto& a = adv.advantages;
  const auto n = static_cast<double>(a.size());
  switch (cfg.advantage_norm) {
    case AdvantageNorm::kEpisode:
      if (a.size() >= 2) {
        double mean = 0.0;
        for (double x : a) mean += x;
        mean /= n;
        double var = 0.0;
        for (double x : a) var += (x - mean) * (x - mean);
        const double sd = std::sqrt(var / n);
        for (double& x : a) x = (x - mean) / (sd + 1e-8);
      }
      break;
    case AdvantageNorm::kRunning: {
      double sq = 0.0;
      for (double x : a) sq += x * x;
      agent.adv_sq = 0.99 * agent.adv_sq + 0.01 * (sq / n);
      const double scale = 1.0 / std::sqrt(agent.adv_sq + 1e-8);
      for (double& x : a) x *= scale;
      break;
    }
    case AdvantageNorm::kNone:
      break;
  }

  UpdateStats stats;
  auto& tensors = agent.params.tensors();
  for (int pass = 0; pass < cfg.updates_per_episode; ++pass) {
    for (auto& p : tensors) p.zero_grad();
    ad::Tape tape;
    const LossTerms terms = ppo_loss(tape, agent.params, traj, a, adv.returns, c_ent, cfg);
    if (!std::isfinite(terms.total.scalar())) {
      std::ostringstream msg;
      msg << "non-finite PPO loss (value " << terms.value_loss << ", policy " << terms.policy_loss
          << ", entropy " << terms.entropy << ")";
      throw NumericError(msg.str());
    }
    tape.backward(terms.total);
    stats.grad_norm = clip_grad_norm(tensors, cfg.max_grad_norm);
    if (!std::isfinite(stats.grad_norm)) throw NumericError("non-finite gradient");
    agent.optimizer.step(tensors);
    if (pass == 0) {
      stats.loss = terms.total.scalar();
      stats.value_loss = terms.value_loss;
      stats.policy_loss = terms.policy_loss;
      stats.entropy = terms.entropy;
    }
    stats.approx_kl = terms.approx_kl;
    stats.clip_fraction = terms.clip_fraction;
  }
  return stats;
}

std::vector<CurvePoint> train(AgentState& agent, const TrainingPool& pool, const TrainCallback& cb) {
  const TrainConfig& cfg = agent.config;
  cfg.validate();
  std::vector<const NodeSet*> usable;
  for (const auto& c : pool.communities) {
    if (!c.empty()) usable.push_back(&c);
  }
  if (usable.empty()) throw SamplingError("training pool has no non-empty community");

  Rng& rng = agent.rng;
  std::vector<CurvePoint> curve;
  std::deque<bool> window;
  int window_hits = 0;
  const NodeSet* community = nullptr;
  NodeId target = 0;

  for (int e = 0; e < cfg.episodes; ++e) {
    if (e % cfg.community_resample_every == 0) community = usable[uniform_index(rng, usable.size())];
    if (e % cfg.target_resample_every == 0 || e % cfg.community_resample_every == 0) {
      target = (*community)[uniform_index(rng, community->size())];
    }
    EnvConfig ec = pool.env;
    ec.seed = rng();
    EnvState s = reset(pool.graph, target, pool.detector, ec, *community);

    Trajectory traj;
    Matrix h = Matrix::Zero(1, cfg.d_h);
    double total = 0.0;
    while (!s.done) {
      Observation obs = observe(s);
      Decision d = decide(agent.params, obs, h, &rng);
      const StepResult r = step(s, action_from_logit(s, d.actor, d.logit));
      total += r.reward;
      h = d.hidden;
      traj.push_back({std::move(obs), d.actor, d.logit, d.logp_node, d.logp_actor, r.reward, d.value, r.done});
    }

    const double c_ent = cfg.entropy_coef(e);
    UpdateStats stats;
    if (!traj.empty()) stats = ppo_update(agent, traj, c_ent);
    ++agent.episodes_done;

    window.push_back(s.hidden);
    window_hits += s.hidden ? 1 : 0;
    if (window.size() > 100) {
      window_hits -= window.front() ? 1 : 0;
      window.pop_front();
    }
    CurvePoint pt{e, target, total, static_cast<int>(traj.size()), s.hidden,
                  static_cast<double>(window_hits) / static_cast<double>(window.size()), c_ent};
    curve.push_back(pt);
    if (cb) cb(pt, stats);
  }
  return curve;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "episode,reward,moving_sr,entropy_coef\n";
  for (const auto& p : curve) {
    out << p.episode << ',' << std::fixed << std::setprecision(12) << p.reward << ',' << p.moving_sr << ','
        << p.entropy_coef << '\n';
    out.unsetf(std::ios::floatfield);
  }
}

void save_checkpoint(std::ostream& out, const AgentState& agent) {
  nlohmann::json j;
  j["format"] = "cmh-odrl-checkpoint";
  j["version"] = kCheckpointVersion;
  const auto& shape = agent.params.shape();
  j["shape"] = {{"d_h", shape.d_h}, {"num_actors", shape.num_actors}, {"num_nodes", shape.num_nodes}};
  j["config"] = agent.config;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& p : agent.params.tensors()) params[p.name] = matrix_to_json(p.value);
  j["params"] = std::move(params);
  nlohmann::json opt = nlohmann::json::array();
  for (const auto& m : agent.optimizer.state()) opt.push_back(matrix_to_json(m));
  j["optimizer"] = std::move(opt);
  std::ostringstream rng;
  rng << agent.rng;
  j["rng"] = rng.str();
  j["adv_sq"] = agent.adv_sq;
  j["episodes_done"] = agent.episodes_done;
  j["meta"] = agent.meta;
  out << j.dump(1) << '\n';
  if (!out) throw IoError("failed to write checkpoint");
}

AgentState load_checkpoint(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "cmh-odrl-checkpoint") throw ConfigError("not a checkpoint file");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ConfigError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    }
    AgentShape shape;
    shape.d_h = j.at("shape").at("d_h").get<int>();
    shape.num_actors = j.at("shape").at("num_actors").get<std::size_t>();
    shape.num_nodes = j.at("shape").at("num_nodes").get<std::size_t>();
    const TrainConfig cfg = j.at("config").get<TrainConfig>();
    AgentState a = make_agent(shape, cfg);
    for (auto& p : a.params.tensors()) {
      Matrix m = json_to_matrix(j.at("params").at(p.name));
      if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
        throw ParseError("checkpoint tensor " + p.name + " has the wrong shape");
      }
      p.value = std::move(m);
    }
    a.optimizer.state().clear();
    for (const auto& m : j.at("optimizer")) a.optimizer.state().push_back(json_to_matrix(m));
    std::istringstream rng(j.at("rng").get<std::string>());
    rng >> a.rng;
    a.adv_sq = j.at("adv_sq").get<double>();
    a.episodes_done = j.at("episodes_done").get<int>();
    a.meta = j.at("meta");
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

OdrlPolicy::OdrlPolicy(AgentParams params, std::optional<std::uint64_t> sample_seed)
    : params_(std::move(params)) {
  if (sample_seed) rng_.emplace(*sample_seed);
}

void OdrlPolicy::begin_episode(const EnvState& s) {
  (void)s;
  hidden_ = Matrix::Zero(1, params_.shape().d_h);
}

std::optional<Action> OdrlPolicy::act(const EnvState& s) {
  if (hidden_.size() == 0) hidden_ = Matrix::Zero(1, params_.shape().d_h);
  const Observation obs = observe(s);
  const Decision d = decide(params_, obs, hidden_, rng_ ? &*rng_ : nullptr);
  hidden_ = d.hidden;
  return action_from_logit(s, d.actor, d.logit);
}

}  // namespace cmh::agent
