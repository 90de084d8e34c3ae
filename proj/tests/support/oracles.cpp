#include "oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <queue>
#include <set>

namespace oracle {

cmh::NodeSet to_set(Mask m) {
  cmh::NodeSet out;
  for (int i = 0; i < 32; ++i) {
    if (m >> i & 1u) out.push_back(i);
  }
  return out;
}

Mask to_mask(const cmh::NodeSet& s) {
  Mask m = 0;
  for (auto v : s) m |= Mask{1} << v;
  return m;
}

double dice(Mask a, Mask b) {
  const int total = std::popcount(a) + std::popcount(b);
  if (total == 0) return 0.0;
  return 2.0 * std::popcount(a & b) / total;
}

bool is_hidden(Mask c_orig, const std::vector<Mask>& cover, int u, double tau) {
  const Mask bit = Mask{1} << u;
  for (Mask c : cover) {
    if ((c & bit) && dice(c_orig & ~bit, c & ~bit) > tau) return false;
  }
  return true;
}

namespace {

double h(double p) { return p <= 0.0 ? 0.0 : -p * std::log(p); }

double h_pair(double count, double n) { return h(count / n) + h((n - count) / n); }

// H(X_k | Y) summed over k.
double cond(const std::vector<Mask>& x, const std::vector<Mask>& y, double n) {
  double sum = 0.0;
  for (Mask xk : x) {
    double best = h_pair(std::popcount(xk), n);
    for (Mask yl : y) {
      const double p11 = std::popcount(xk & yl) / n;
      const double p10 = std::popcount(xk & ~yl) / n;
      const double p01 = std::popcount(~xk & yl) / n;
      const double p00 = 1.0 - p11 - p10 - p01;
      if (h(p11) + h(p00) < h(p01) + h(p10)) continue;
      const double joint = h(p11) + h(p10) + h(p01) + h(p00);
      best = std::min(best, joint - h_pair(std::popcount(yl), n));
    }
    sum += best;
  }
  return sum;
}

std::vector<Mask> unique(std::vector<Mask> c) {
  std::erase(c, Mask{0});
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

}  // namespace

double onmi(std::vector<Mask> x, std::vector<Mask> y, int n) {
  x = unique(std::move(x));
  y = unique(std::move(y));
  if (x.empty() && y.empty()) return 1.0;
  if (x.empty() || y.empty()) return 0.0;
  const double nn = n;
  double hx = 0.0, hy = 0.0;
  for (Mask m : x) hx += h_pair(std::popcount(m), nn);
  for (Mask m : y) hy += h_pair(std::popcount(m), nn);
  const double denom = std::max(hx, hy);
  if (denom <= 0.0) return x == y ? 1.0 : 0.0;
  const double mi = 0.5 * ((hx - cond(x, y, nn)) + (hy - cond(y, x, nn)));
  return std::clamp(mi / denom, 0.0, 1.0);
}

std::vector<Mask> random_cover(std::mt19937_64& rng, int n, int max_k) {
  std::uniform_int_distribution<int> k_dist(1, max_k);
  std::uniform_int_distribution<Mask> m_dist(1, (Mask{1} << n) - 1);
  std::vector<Mask> out(static_cast<std::size_t>(k_dist(rng)));
  for (auto& m : out) m = m_dist(rng);
  return out;
}

cmh::CommunityCover to_cover(const std::vector<Mask>& masks) {
  cmh::CommunityCover c;
  for (Mask m : masks) c.communities.push_back(to_set(m));
  return c;
}

std::vector<double> betweenness(const cmh::Graph& g) {
  const std::size_t n = g.n();
  std::vector<std::vector<long>> dist(n, std::vector<long>(n, -1));
  std::vector<std::vector<double>> sigma(n, std::vector<double>(n, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    std::queue<std::size_t> q;
    dist[s][s] = 0;
    sigma[s][s] = 1.0;
    q.push(s);
    while (!q.empty()) {
      const auto v = q.front();
      q.pop();
      for (auto w : g.neighbors(static_cast<cmh::NodeIndex>(v))) {
        const auto wi = static_cast<std::size_t>(w);
        if (dist[s][wi] < 0) {
          dist[s][wi] = dist[s][v] + 1;
          q.push(wi);
        }
        if (dist[s][wi] == dist[s][v] + 1) sigma[s][wi] += sigma[s][v];
      }
    }
  }
  std::vector<double> bc(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = s + 1; t < n; ++t) {
      if (dist[s][t] <= 0) continue;
      for (std::size_t v = 0; v < n; ++v) {
        if (v == s || v == t || dist[s][v] < 0 || dist[v][t] < 0) continue;
        if (dist[s][v] + dist[v][t] == dist[s][t]) bc[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
      }
    }
  }
  return bc;
}

std::vector<double> gae(const std::vector<double>& r, const std::vector<double>& v, double gamma, double lambda) {
  const std::size_t T = r.size();
  std::vector<double> adv(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double coef = 1.0;
    for (std::size_t l = t; l < T; ++l) {
      const double next = l + 1 < T ? v[l + 1] : 0.0;
      adv[t] += coef * (r[l] + gamma * next - v[l]);
      coef *= gamma * lambda;
    }
  }
  return adv;
}

}  // namespace oracle
