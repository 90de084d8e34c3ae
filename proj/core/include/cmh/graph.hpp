#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace cmh {

using NodeId = std::int64_t;
using NodeIndex = std::int32_t;

/// Undirected simple graph over an ordered set of integer node ids.
///
/// Nodes are addressed either by id (external, as read from files) or by
/// dense index (position of the id in the sorted id list). Adjacency lists
/// are kept sorted so edge lookups are binary searches. All mutating
/// operations are free functions that return a new graph.
class Graph {
 public:
  Graph() = default;

  /// Builds a graph over `ids` (need not be sorted; duplicates collapsed).
  /// Edges are given as id pairs; self-loops and duplicates are dropped.
  Graph(std::vector<NodeId> ids,
        const std::vector<std::pair<NodeId, NodeId>>& edges);

  std::size_t n() const { return ids_.size(); }
  std::size_t m() const { return m_; }

  const std::vector<NodeId>& ids() const { return ids_; }
  NodeId id_at(NodeIndex i) const { return ids_[static_cast<std::size_t>(i)]; }
  std::optional<NodeIndex> index_of(NodeId id) const;
  /// As index_of but throws MissingNodeError.
  NodeIndex require_index(NodeId id) const;
  bool contains(NodeId id) const { return index_of(id).has_value(); }
  NodeId max_id() const { return ids_.empty() ? -1 : ids_.back(); }

  const std::vector<NodeIndex>& neighbors(NodeIndex i) const {
    return adj_[static_cast<std::size_t>(i)];
  }
  std::size_t degree(NodeIndex i) const { return neighbors(i).size(); }
  bool has_edge(NodeIndex i, NodeIndex j) const;
  bool has_edge_ids(NodeId u, NodeId v) const;

  /// Edge list as (id, id) pairs with first < second, lexicographic order.
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  bool operator==(const Graph& other) const = default;

 private:
  friend Graph toggle_edge(const Graph& g, NodeId u, NodeId v);
  friend Graph add_nodes(const Graph& g, const std::vector<NodeId>& new_ids);

  void flip(NodeIndex i, NodeIndex j);

  std::vector<NodeId> ids_;
  std::vector<std::vector<NodeIndex>> adj_;
  std::size_t m_ = 0;
};

struct LoadStats {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_collapsed = 0;
};

/// Parses a whitespace-separated edge list. Lines starting with '#' or '%'
/// are comments; extra columns after the first two (weights) are ignored.
Graph load_edge_list(std::istream& in, LoadStats* stats = nullptr);
Graph load_edge_list_file(const std::string& path, LoadStats* stats = nullptr);
void write_edge_list(std::ostream& out, const Graph& g);

/// Returns g with the edge {u, v} flipped.
Graph toggle_edge(const Graph& g, NodeId u, NodeId v);

/// Returns g extended with isolated nodes carrying the given fresh ids.
Graph add_nodes(const Graph& g, const std::vector<NodeId>& new_ids);

struct ProxySet {
  std::vector<NodeId> proxy_ids;
  NodeId target_id = 0;
  double edge_prob = 0.0;
  std::uint64_t seed = 0;
};

/// Adds k proxies (ids max_id+1, ...), wires them as a G(k, p) random graph
/// and connects each of them to the target.
std::pair<Graph, ProxySet> inject_proxies(const Graph& g, NodeId target,
                                          std::size_t k, double p,
                                          std::uint64_t seed);

struct Budget {
  int beta = 1;
  double multiplier = 1.0;
  double mu = 0.0;
};

/// mu = m/n (+1 with kar_adjust); beta = max(1, round_half_up(multiplier * mu)).
Budget budget_from_mu(const Graph& g, double multiplier, bool kar_adjust);

/// Rounds x to the nearest integer, halves away from zero, floored at 1.
/// Shared by budget and proxy-count arithmetic.
int scaled_count(double multiplier, double mu);

/// Unnormalized shortest-path betweenness (Brandes), indexed by node index.
/// Each unordered pair contributes at most 1 in total.
std::vector<double> betweenness(const Graph& g);

}  // namespace cmh
