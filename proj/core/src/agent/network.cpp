#include "cmh/agent/network.hpp"

#include <algorithm>
#include <cmath>

#include "cmh/errors.hpp"
#include "cmh/random.hpp"

namespace cmh::agent {

Observation observe(const EnvState& s) {
  const Graph& g = s.graph;
  const auto n = static_cast<Eigen::Index>(g.n());
  Observation obs;

  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    inv_sqrt(i) = 1.0 / std::sqrt(static_cast<double>(g.degree(static_cast<NodeIndex>(i))) + 1.0);
  }
  obs.adjacency = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    obs.adjacency(i, i) = inv_sqrt(i) * inv_sqrt(i);
    for (NodeIndex j : g.neighbors(static_cast<NodeIndex>(i))) obs.adjacency(i, j) = inv_sqrt(i) * inv_sqrt(j);
  }

  std::size_t max_deg = 1;
  for (Eigen::Index i = 0; i < n; ++i) max_deg = std::max(max_deg, g.degree(static_cast<NodeIndex>(i)));
  obs.features = Matrix::Zero(n, kFeatureDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    obs.features(i, 0) = static_cast<double>(g.degree(static_cast<NodeIndex>(i))) / static_cast<double>(max_deg);
    obs.features(i, 3) = 1.0;
  }
  const auto t = g.require_index(s.target);
  obs.features(t, 1) = 1.0;
  obs.actor_rows.push_back(t);
  for (NodeId p : s.proxies.proxy_ids) {
    const auto r = g.require_index(p);
    obs.features(r, 2) = 1.0;
    obs.actor_rows.push_back(r);
  }
  for (std::size_t a = 0; a < s.num_actors(); ++a) obs.masks.push_back(valid_action_mask(s, static_cast<int>(a)));
  return obs;
}

namespace {

Matrix uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double limit) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = (2.0 * uniform01(rng) - 1.0) * limit;
  return m;
}

Matrix glorot(Rng& rng, Eigen::Index rows, Eigen::Index cols, double gain = 1.0) {
  return uniform_matrix(rng, rows, cols, gain * std::sqrt(6.0 / static_cast<double>(rows + cols)));
}

}  // namespace

AgentParams::AgentParams(const AgentShape& shape, std::uint64_t seed) : shape_(shape) {
  if (shape.d_h < 4 || shape.d_h % 4 != 0) throw ConfigError("hidden width must be a positive multiple of 4");
  if (shape.num_actors < 1 || shape.num_nodes < 2) throw ConfigError("agent needs at least one actor and two nodes");
  Rng rng(seed);
  const Eigen::Index d = shape.d_h;
  const Eigen::Index w = d / 4;
  const auto logits = static_cast<Eigen::Index>(shape.num_logits());
  const auto actors = static_cast<Eigen::Index>(shape.num_actors);
  auto add = [&](std::string name, Matrix v) { tensors_.push_back({std::move(name), std::move(v), Matrix()}); };

  for (int l = 0; l < 4; ++l) {
    add("encoder.w" + std::to_string(l), glorot(rng, l == 0 ? kFeatureDim : w, w));
    add("encoder.b" + std::to_string(l), Matrix::Zero(1, w));
  }
  add("shared.proj_w", glorot(rng, 3 * d, d));
  add("shared.proj_b", Matrix::Zero(1, d));
  add("shared.ln_gain", Matrix::Ones(1, d));
  add("shared.ln_bias", Matrix::Zero(1, d));
  const double k = 1.0 / std::sqrt(static_cast<double>(d));
  add("gru.wi", uniform_matrix(rng, d, 3 * d, k));
  add("gru.wh", uniform_matrix(rng, d, 3 * d, k));
  add("gru.bi", uniform_matrix(rng, 1, 3 * d, k));
  add("gru.bh", uniform_matrix(rng, 1, 3 * d, k));
  // Near-uniform initial policy.
  add("node_head.w", glorot(rng, d, actors, 0.01));
  add("node_head.b", Matrix::Zero(1, actors));
  add("actor_head.w", glorot(rng, 2 * d, logits, 0.01));
  add("actor_head.b", Matrix::Zero(1, logits));
  add("critic.w1", glorot(rng, d, d));
  add("critic.b1", Matrix::Zero(1, d));
  add("critic.w2", glorot(rng, d, 1));
  add("critic.b2", Matrix::Zero(1, 1));
  for (auto& t : tensors_) t.zero_grad();
}

ad::Parameter& AgentParams::at(const std::string& name) {
  for (auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw ConfigError("unknown parameter " + name);
}

std::size_t AgentParams::count() const {
  std::size_t c = 0;
  for (const auto& t : tensors_) c += static_cast<std::size_t>(t.value.size());
  return c;
}

std::string AgentParams::group_of(const std::string& name) { return name.substr(0, name.find('.')); }

Bound bind(ad::Tape& tape, AgentParams& params) {
  Bound b;
  b.d_h = params.shape().d_h;
  for (int l = 0; l < 4; ++l) {
    b.enc_w.push_back(tape.param(params.at("encoder.w" + std::to_string(l))));
    b.enc_b.push_back(tape.param(params.at("encoder.b" + std::to_string(l))));
  }
  b.proj_w = tape.param(params.at("shared.proj_w"));
  b.proj_b = tape.param(params.at("shared.proj_b"));
  b.ln_gain = tape.param(params.at("shared.ln_gain"));
  b.ln_bias = tape.param(params.at("shared.ln_bias"));
  b.gru_wi = tape.param(params.at("gru.wi"));
  b.gru_wh = tape.param(params.at("gru.wh"));
  b.gru_bi = tape.param(params.at("gru.bi"));
  b.gru_bh = tape.param(params.at("gru.bh"));
  b.node_w = tape.param(params.at("node_head.w"));
  b.node_b = tape.param(params.at("node_head.b"));
  b.actor_w = tape.param(params.at("actor_head.w"));
  b.actor_b = tape.param(params.at("actor_head.b"));
  b.critic_w1 = tape.param(params.at("critic.w1"));
  b.critic_b1 = tape.param(params.at("critic.b1"));
  b.critic_w2 = tape.param(params.at("critic.w2"));
  b.critic_b2 = tape.param(params.at("critic.b2"));
  return b;
}

Var encode(const Bound& p, const Observation& obs) {
  ad::Tape& tape = *p.proj_w.tape;
  if (!obs.features.allFinite() || !obs.adjacency.allFinite()) throw NumericError("non-finite node features");
  const Var a_hat = tape.constant(obs.adjacency);
  Var h = tape.constant(obs.features);
  std::vector<Var> layers;
  for (std::size_t l = 0; l < p.enc_w.size(); ++l) {
    h = ad::add_row(ad::matmul(a_hat, ad::matmul(h, p.enc_w[l])), p.enc_b[l]);
    h = ad::elu(ad::pair_norm(h));
    layers.push_back(h);
  }
  return ad::concat_cols(layers);
}

Var shared_state(const Bound& p, Var embeddings, const Observation& obs, Var h_prev) {
  ad::Tape& tape = *p.proj_w.tape;
  const Var target = ad::row(embeddings, obs.actor_rows.front());
  Var proxy_mean;
  if (obs.actor_rows.size() > 1) {
    std::vector<Eigen::Index> rows(obs.actor_rows.begin() + 1, obs.actor_rows.end());
    proxy_mean = ad::mean_rows_of(embeddings, rows);
  } else {
    proxy_mean = tape.constant(Matrix::Zero(1, embeddings.cols()));
  }
  const Var pooled[] = {target, proxy_mean, ad::mean_rows(embeddings)};
  Var x = ad::add_row(ad::matmul(ad::concat_cols(pooled), p.proj_w), p.proj_b);
  x = ad::add_row(ad::mul(ad::standardize_rows(x), p.ln_gain), p.ln_bias);
  x = ad::elu(x);

  const Eigen::Index d = p.d_h;
  const Var gi = ad::add_row(ad::matmul(x, p.gru_wi), p.gru_bi);
  const Var gh = ad::add_row(ad::matmul(h_prev, p.gru_wh), p.gru_bh);
  const Var r = ad::sigmoid(ad::add(ad::slice_cols(gi, 0, d), ad::slice_cols(gh, 0, d)));
  const Var z = ad::sigmoid(ad::add(ad::slice_cols(gi, d, d), ad::slice_cols(gh, d, d)));
  const Var cand = ad::tanh(ad::add(ad::slice_cols(gi, 2 * d, d), ad::mul(r, ad::slice_cols(gh, 2 * d, d))));
  // (1 - z) * cand + z * h_prev
  return ad::add(cand, ad::mul(z, ad::sub(h_prev, cand)));
}

PolicyOutput policy_value(const Bound& p, Var h, Var embeddings, const Observation& obs) {
  PolicyOutput out;
  const std::size_t actors = obs.actor_rows.size();
  // An actor without any legal edit cannot be chosen.
  std::vector<std::uint8_t> usable(actors, 0);
  for (std::size_t a = 0; a < actors; ++a) {
    usable[a] = std::any_of(obs.masks[a].begin(), obs.masks[a].end(), [](std::uint8_t m) { return m != 0; });
  }
  const Var node_logits = ad::add_row(ad::matmul(h, p.node_w), p.node_b);
  out.node_logp = ad::masked_log_softmax(node_logits, usable);
  const Var node_p = ad::exp(out.node_logp);
  Var entropy = ad::masked_entropy(node_logits, usable);

  for (std::size_t a = 0; a < actors; ++a) {
    if (!usable[a]) {
      out.actor_logp.push_back(Var{});
      continue;
    }
    const Var in[] = {h, ad::row(embeddings, obs.actor_rows[a])};
    const Var logits = ad::add_row(ad::matmul(ad::concat_cols(in), p.actor_w), p.actor_b);
    out.actor_logp.push_back(ad::masked_log_softmax(logits, obs.masks[a]));
    const Var ha = ad::masked_entropy(logits, obs.masks[a]);
    entropy = ad::add(entropy, ad::mul(ad::pick(node_p, 0, static_cast<Eigen::Index>(a)), ha));
  }
  out.entropy = entropy;

  const Var hidden = ad::elu(ad::add_row(ad::matmul(h, p.critic_w1), p.critic_b1));
  out.value = ad::add_row(ad::matmul(hidden, p.critic_w2), p.critic_b2);
  return out;
}

StepOutput forward(const Bound& p, const Observation& obs, Var h_prev) {
  if (obs.masks.empty() || obs.masks.front().size() != static_cast<std::size_t>(p.actor_b.cols())) {
    throw ConfigError("observation does not match the network shape");
  }
  if (static_cast<Eigen::Index>(obs.actor_rows.size()) != p.node_b.cols()) {
    throw ConfigError("observation has a different number of actors than the network");
  }
  const Var emb = encode(p, obs);
  StepOutput out;
  out.hidden = shared_state(p, emb, obs, h_prev);
  out.policy = policy_value(p, out.hidden, emb, obs);
  return out;
}

}  // namespace cmh::agent
