#include "cmh/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cmh/errors.hpp"
#include "cmh/random.hpp"

namespace cmh {

namespace {

std::size_t intersection_size(const NodeSet& a, const NodeSet& b) {
  std::size_t common = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return common;
}

// -p log2 p with p = w / n.
double plogp(double w, double n) {
  if (w <= 0.0) return 0.0;
  const double p = w / n;
  return -p * std::log2(p);
}

struct CoverEntropy {
  double total = 0.0;                 // H(X) = sum_k H(X_k)
  std::vector<double> per_community;  // H(X_k)
};

CoverEntropy entropy_of(const std::vector<NodeSet>& cover, double n) {
  CoverEntropy e;
  for (const auto& c : cover) {
    const double s = static_cast<double>(c.size());
    const double h = plogp(s, n) + plogp(n - s, n);
    e.per_community.push_back(h);
    e.total += h;
  }
  return e;
}

// sum_k H(X_k | Y), where H(X_k | Y) is the smallest H(X_k | Y_l) over the
// Y_l that pass the "more agreement than disagreement" filter, or H(X_k)
// when none passes.
double conditional_entropy(const std::vector<NodeSet>& x, const CoverEntropy& hx,
                           const std::vector<NodeSet>& y, double n) {
  double total = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    double best = hx.per_community[k];
    const double sx = static_cast<double>(x[k].size());
    for (const auto& yl : y) {
      const double sy = static_cast<double>(yl.size());
      const double d = static_cast<double>(intersection_size(x[k], yl));
      const double b = sx - d;
      const double c = sy - d;
      const double a = n - b - c - d;
      const double ha = plogp(a, n), hb = plogp(b, n), hc = plogp(c, n), hd = plogp(d, n);
      if (ha + hd < hb + hc) continue;
      const double joint = ha + hb + hc + hd;
      const double hy = plogp(c + d, n) + plogp(a + b, n);
      best = std::min(best, joint - hy);
    }
    total += best;
  }
  return total;
}

std::vector<NodeSet> restricted(const CommunityCover& cover, const NodeSet& universe) {
  std::vector<NodeSet> out;
  for (const auto& c : cover.communities) {
    NodeSet r;
    std::set_intersection(c.begin(), c.end(), universe.begin(), universe.end(), std::back_inserter(r));
    if (!r.empty()) out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double percentile(std::vector<double> sorted_values, double q) {
  if (sorted_values.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted_values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted_values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

}  // namespace

double dice(const NodeSet& a, const NodeSet& b) {
  const std::size_t total = a.size() + b.size();
  if (total == 0) return 0.0;
  return 2.0 * static_cast<double>(intersection_size(a, b)) / static_cast<double>(total);
}

NodeSet without(const NodeSet& set, NodeId u) {
  NodeSet out;
  out.reserve(set.size());
  for (NodeId v : set) {
    if (v != u) out.push_back(v);
  }
  return out;
}

double max_similarity(const NodeSet& c_orig, const CommunityCover& cover, NodeId u) {
  const NodeSet base = without(c_orig, u);
  double best = 0.0;
  for (std::size_t idx : communities_of(cover, u)) {
    best = std::max(best, dice(base, without(cover.communities[idx], u)));
  }
  return best;
}

bool is_hidden(const NodeSet& c_orig, const CommunityCover& cover_new, NodeId u, double tau) {
  const NodeSet base = without(c_orig, u);
  for (std::size_t idx : communities_of(cover_new, u)) {
    if (dice(base, without(cover_new.communities[idx], u)) > tau) return false;
  }
  return true;
}

double onmi(const CommunityCover& x_cover, const CommunityCover& y_cover, const NodeSet& universe) {
  const auto x = restricted(x_cover, universe);
  const auto y = restricted(y_cover, universe);
  if (x.empty() && y.empty()) return 1.0;
  if (x.empty() || y.empty()) return 0.0;
  const double n = static_cast<double>(universe.size());
  const auto hx = entropy_of(x, n);
  const auto hy = entropy_of(y, n);
  const double norm = std::max(hx.total, hy.total);
  if (norm <= 0.0) return x == y ? 1.0 : 0.0;
  const double hx_given_y = conditional_entropy(x, hx, y, n);
  const double hy_given_x = conditional_entropy(y, hy, x, n);
  const double mutual = 0.5 * (hx.total - hx_given_y + hy.total - hy_given_x);
  return std::clamp(mutual / norm, 0.0, 1.0);
}

std::string to_string(Setting s) { return s == Setting::kSymmetric ? "symmetric" : "asymmetric"; }

double harmonic_mean(double a, double b) {
  if (a <= 0.0 || b <= 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

Report aggregate(const std::vector<TrialRecord>& records, const AggregateOptions& opts) {
  if (records.empty()) throw EmptyInputError("cannot aggregate an empty list of trials");
  const auto n = static_cast<double>(records.size());

  auto point = [](const std::vector<TrialRecord>& rs, const std::vector<std::size_t>* idx,
                  double& sr, double& om) {
    double succ = 0.0, sum = 0.0;
    const std::size_t count = idx ? idx->size() : rs.size();
    for (std::size_t i = 0; i < count; ++i) {
      const auto& r = rs[idx ? (*idx)[i] : i];
      succ += r.success ? 1.0 : 0.0;
      sum += r.onmi;
    }
    sr = succ / static_cast<double>(count);
    om = sum / static_cast<double>(count);
  };

  Report rep;
  rep.n_trials = records.size();
  point(records, nullptr, rep.sr, rep.onmi_mean);
  rep.f1 = harmonic_mean(rep.sr, rep.onmi_mean);

  const double half = opts.z * std::sqrt(rep.sr * (1.0 - rep.sr) / n);
  rep.sr_ci = {std::max(0.0, rep.sr - half), std::min(1.0, rep.sr + half)};

  Rng rng(opts.bootstrap_seed);
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(std::max(0, opts.bootstrap_resamples)));
  std::vector<std::size_t> idx(records.size());
  for (int b = 0; b < opts.bootstrap_resamples; ++b) {
    for (auto& i : idx) i = uniform_index(rng, records.size());
    double sr = 0.0, om = 0.0;
    point(records, &idx, sr, om);
    stats.push_back(harmonic_mean(sr, om));
  }
  std::sort(stats.begin(), stats.end());
  if (stats.empty()) {
    rep.f1_ci = {rep.f1, rep.f1};
  } else {
    // The percentile interval need not contain the point estimate; widen it
    // so that lo <= f1 <= hi always holds.
    rep.f1_ci = {std::min(rep.f1, percentile(stats, 0.025)), std::max(rep.f1, percentile(stats, 0.975))};
  }
  return rep;
}

void to_json(nlohmann::json& j, const Interval& i) { j = nlohmann::json::array({i.lo, i.hi}); }
void from_json(const nlohmann::json& j, Interval& i) {
  i.lo = j.at(0).get<double>();
  i.hi = j.at(1).get<double>();
}

void to_json(nlohmann::json& j, const Report& r) {
  j = {{"sr", r.sr}, {"sr_ci", r.sr_ci},     {"onmi", r.onmi_mean},
       {"f1", r.f1}, {"f1_ci", r.f1_ci},     {"n", r.n_trials}};
}
void from_json(const nlohmann::json& j, Report& r) {
  r.sr = j.at("sr").get<double>();
  r.sr_ci = j.at("sr_ci").get<Interval>();
  r.onmi_mean = j.at("onmi").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.f1_ci = j.at("f1_ci").get<Interval>();
  r.n_trials = j.at("n").get<std::size_t>();
}

void to_json(nlohmann::json& j, const TrialRecord& r) {
  j = {{"target", r.target},          {"success", r.success}, {"onmi", r.onmi},
       {"edits_used", r.edits_used},  {"setting", to_string(r.setting)}, {"seed", r.seed}};
}
void from_json(const nlohmann::json& j, TrialRecord& r) {
  r.target = j.at("target").get<NodeId>();
  r.success = j.at("success").get<bool>();
  r.onmi = j.at("onmi").get<double>();
  r.edits_used = j.at("edits_used").get<int>();
  r.setting = j.at("setting").get<std::string>() == "asymmetric" ? Setting::kAsymmetric : Setting::kSymmetric;
  r.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace cmh
