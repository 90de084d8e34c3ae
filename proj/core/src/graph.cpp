#include "cmh/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include "cmh/errors.hpp"
#include "cmh/random.hpp"

namespace cmh {

Graph::Graph(std::vector<NodeId> ids,
             const std::vector<std::pair<NodeId, NodeId>>& edges)
    : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  adj_.assign(ids_.size(), {});
  for (const auto& [u, v] : edges) {
    if (u == v) continue;
    const NodeIndex i = require_index(u);
    const NodeIndex j = require_index(v);
    adj_[static_cast<std::size_t>(i)].push_back(j);
    adj_[static_cast<std::size_t>(j)].push_back(i);
  }
  m_ = 0;
  for (auto& nbrs : adj_) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    m_ += nbrs.size();
  }
  m_ /= 2;
}

std::optional<NodeIndex> Graph::index_of(NodeId id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return std::nullopt;
  return static_cast<NodeIndex>(it - ids_.begin());
}

NodeIndex Graph::require_index(NodeId id) const {
  auto idx = index_of(id);
  if (!idx) throw MissingNodeError("node " + std::to_string(id) + " not in graph");
  return *idx;
}

bool Graph::has_edge(NodeIndex i, NodeIndex j) const {
  const auto& a = neighbors(i);
  return std::binary_search(a.begin(), a.end(), j);
}

bool Graph::has_edge_ids(NodeId u, NodeId v) const {
  auto i = index_of(u);
  auto j = index_of(v);
  return i && j && has_edge(*i, *j);
}

std::vector<std::pair<NodeId, NodeId>> Graph::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(m_);
  for (std::size_t i = 0; i < adj_.size(); ++i) {
    for (NodeIndex j : adj_[i]) {
      if (static_cast<std::size_t>(j) > i) out.emplace_back(ids_[i], ids_[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

void Graph::flip(NodeIndex i, NodeIndex j) {
  auto& a = adj_[static_cast<std::size_t>(i)];
  auto& b = adj_[static_cast<std::size_t>(j)];
  auto it = std::lower_bound(a.begin(), a.end(), j);
  if (it != a.end() && *it == j) {
    a.erase(it);
    b.erase(std::lower_bound(b.begin(), b.end(), i));
    --m_;
  } else {
    a.insert(it, j);
    b.insert(std::lower_bound(b.begin(), b.end(), i), i);
    ++m_;
  }
}

Graph load_edge_list(std::istream& in, LoadStats* stats) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<NodeId> ids;
  LoadStats local;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#' || line[first] == '%') continue;
    std::istringstream ls(line);
    std::string a, b;
    ls >> a >> b;
    NodeId u = 0, v = 0;
    try {
      std::size_t pa = 0, pb = 0;
      if (b.empty()) throw std::invalid_argument("missing endpoint");
      u = std::stoll(a, &pa);
      v = std::stoll(b, &pb);
      if (pa != a.size() || pb != b.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno) + ": expected two integer node ids, got '" +
                       line + "'");
    }
    ids.push_back(u);
    ids.push_back(v);
    if (u == v) {
      ++local.self_loops_dropped;
      continue;
    }
    edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  if (ids.empty()) throw EmptyInputError("edge list contains no nodes");
  std::sort(edges.begin(), edges.end());
  const auto before = edges.size();
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  local.duplicates_collapsed = before - edges.size();
  if (stats) *stats = local;
  return Graph(std::move(ids), edges);
}

Graph load_edge_list_file(const std::string& path, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open edge list '" + path + "'");
  return load_edge_list(in, stats);
}

void write_edge_list(std::ostream& out, const Graph& g) {
  for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

Graph toggle_edge(const Graph& g, NodeId u, NodeId v) {
  if (u == v) throw SelfLoopError("cannot toggle self-loop on node " + std::to_string(u));
  const NodeIndex i = g.require_index(u);
  const NodeIndex j = g.require_index(v);
  Graph out = g;
  out.flip(i, j);
  return out;
}

Graph add_nodes(const Graph& g, const std::vector<NodeId>& new_ids) {
  std::vector<NodeId> ids = g.ids();
  for (NodeId id : new_ids) {
    if (g.contains(id)) throw ConfigError("node id " + std::to_string(id) + " already present");
    ids.push_back(id);
  }
  return Graph(std::move(ids), g.edges());
}

std::pair<Graph, ProxySet> inject_proxies(const Graph& g, NodeId target,
                                          std::size_t k, double p,
                                          std::uint64_t seed) {
  g.require_index(target);
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("proxy edge probability must lie in [0,1]");
  ProxySet proxies{{}, target, p, seed};
  if (k == 0) return {g, proxies};

  std::vector<NodeId> ids = g.ids();
  auto edges = g.edges();
  for (std::size_t i = 0; i < k; ++i) {
    const NodeId id = g.max_id() + 1 + static_cast<NodeId>(i);
    proxies.proxy_ids.push_back(id);
    ids.push_back(id);
  }
  Rng rng(seed);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      // Always draw, so the stream does not depend on p.
      const double x = uniform01(rng);
      if (x < p) edges.emplace_back(proxies.proxy_ids[a], proxies.proxy_ids[b]);
    }
  }
  for (NodeId id : proxies.proxy_ids) edges.emplace_back(target, id);
  return {Graph(std::move(ids), edges), proxies};
}

int scaled_count(double multiplier, double mu) {
  const double x = multiplier * mu;
  const int r = static_cast<int>(std::floor(x + 0.5));
  return std::max(1, r);
}

Budget budget_from_mu(const Graph& g, double multiplier, bool kar_adjust) {
  if (!(multiplier > 0.0)) throw ConfigError("budget multiplier must be positive");
  Budget b;
  b.multiplier = multiplier;
  b.mu = static_cast<double>(g.m()) / static_cast<double>(g.n()) + (kar_adjust ? 1.0 : 0.0);
  b.beta = scaled_count(multiplier, b.mu);
  return b;
}

std::vector<double> betweenness(const Graph& g) {
  const std::size_t n = g.n();
  std::vector<double> bc(n, 0.0);
  std::vector<std::vector<NodeIndex>> pred(n);
  std::vector<double> sigma(n), delta(n);
  std::vector<int> dist(n);
  std::vector<NodeIndex> order;
  order.reserve(n);
  std::queue<NodeIndex> queue;

  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t v = 0; v < n; ++v) {
      pred[v].clear();
      sigma[v] = 0.0;
      delta[v] = 0.0;
      dist[v] = -1;
    }
    order.clear();
    sigma[s] = 1.0;
    dist[s] = 0;
    queue.push(static_cast<NodeIndex>(s));
    while (!queue.empty()) {
      const NodeIndex v = queue.front();
      queue.pop();
      order.push_back(v);
      for (NodeIndex w : g.neighbors(v)) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          pred[w].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const NodeIndex w = *it;
      for (NodeIndex v : pred[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (static_cast<std::size_t>(w) != s) bc[w] += delta[w];
    }
  }
  // Every unordered pair was counted from both endpoints.
  for (double& x : bc) x *= 0.5;
  return bc;
}

}  // namespace cmh
