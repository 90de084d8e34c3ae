#include "cmh/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "cmh/errors.hpp"
#include "cmh/random.hpp"

namespace cmh {

namespace {

using LocalAdjacency = std::vector<std::vector<int>>;
using Labels = std::vector<std::vector<int>>;

// Distinct labels carried by the neighbours of v, in first-seen order, with
// their frequencies.
void label_frequencies(const LocalAdjacency& adj, const Labels& labels, int v, std::vector<int>& keys,
                       std::vector<int>& freq) {
  keys.clear();
  freq.clear();
  for (int w : adj[static_cast<std::size_t>(v)]) {
    for (int l : labels[static_cast<std::size_t>(w)]) {
      const auto it = std::find(keys.begin(), keys.end(), l);
      if (it == keys.end()) {
        keys.push_back(l);
        freq.push_back(1);
      } else {
        ++freq[static_cast<std::size_t>(it - keys.begin())];
      }
    }
  }
}

std::vector<int> majority(const std::vector<int>& keys, const std::vector<int>& freq, int& top) {
  top = -1;
  std::vector<int> out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (freq[i] > top) {
      top = freq[i];
      out.assign(1, keys[i]);
    } else if (freq[i] == top) {
      out.push_back(keys[i]);
    }
  }
  return out;
}

// DEMON's overlapping propagation: every node starts with its own label; one
// sweep draws a single random neighbour label per node, then `sweeps` majority
// sweeps follow. Sweeps visit nodes in a fresh random order and update in
// place; all most-frequent labels are kept.
Labels demon_propagation(const LocalAdjacency& adj, Rng& rng, int sweeps) {
  const int n = static_cast<int>(adj.size());
  Labels labels(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) labels[static_cast<std::size_t>(v)] = {v};
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> keys, freq;
  for (int t = 0; t <= sweeps; ++t) {
    shuffle(rng, order);
    for (int v : order) {
      if (adj[static_cast<std::size_t>(v)].empty()) continue;
      label_frequencies(adj, labels, v, keys, freq);
      if (t == 0) {
        labels[static_cast<std::size_t>(v)] = {keys[uniform_index(rng, keys.size())]};
      } else {
        int top = 0;
        labels[static_cast<std::size_t>(v)] = majority(keys, freq, top);
      }
    }
  }
  return labels;
}

// ANGEL's variant: nodes in index order, a first majority sweep over the
// initial singleton labels, a random single-label sweep, then majority sweeps
// up to min(7, log2(n) + 1) rounds. A node whose neighbours all share a label
// is frozen. Isolated nodes end up unlabelled.
Labels angel_propagation(const LocalAdjacency& adj, Rng& rng, int max_sweeps) {
  const int n = static_cast<int>(adj.size());
  Labels labels(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) labels[static_cast<std::size_t>(v)] = {v};
  Labels assigned(static_cast<std::size_t>(n));
  std::vector<char> frozen(static_cast<std::size_t>(n), 0);
  int frozen_count = 0;
  const double rounds = std::min({7.0, std::log2(static_cast<double>(n)) + 1.0, static_cast<double>(max_sweeps)});
  std::vector<int> keys, freq;
  for (int t = 0; t < rounds; ++t) {
    for (int v = 0; v < n && frozen_count < n; ++v) {
      if (frozen[static_cast<std::size_t>(v)]) continue;
      const auto& nbrs = adj[static_cast<std::size_t>(v)];
      label_frequencies(adj, labels, v, keys, freq);
      if (t == 1) {
        if (!nbrs.empty()) {
          const std::vector<int> pick{keys[uniform_index(rng, keys.size())]};
          assigned[static_cast<std::size_t>(v)] = pick;
          labels[static_cast<std::size_t>(v)] = pick;
        }
        continue;
      }
      int top = -1;
      auto best = majority(keys, freq, top);
      assigned[static_cast<std::size_t>(v)] = best;
      labels[static_cast<std::size_t>(v)] = std::move(best);
      if (top == static_cast<int>(nbrs.size())) {
        frozen[static_cast<std::size_t>(v)] = 1;
        ++frozen_count;
      }
    }
  }
  return assigned;
}

// Induced adjacency over `members` (sorted node indices) in local numbering.
LocalAdjacency induced(const Graph& g, const std::vector<NodeIndex>& members,
                       std::vector<int>& local_of) {
  LocalAdjacency adj(members.size());
  for (std::size_t a = 0; a < members.size(); ++a) local_of[static_cast<std::size_t>(members[a])] = static_cast<int>(a);
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (NodeIndex w : g.neighbors(members[a])) {
      const int b = local_of[static_cast<std::size_t>(w)];
      if (b >= 0) adj[a].push_back(b);
    }
  }
  for (NodeIndex v : members) local_of[static_cast<std::size_t>(v)] = -1;
  return adj;
}

// Groups member ids by label, groups ordered by first appearance.
std::vector<std::vector<NodeId>> group_by_label(const Graph& g, const std::vector<NodeIndex>& members,
                                                const Labels& labels) {
  std::vector<int> seen;
  std::vector<std::vector<NodeId>> groups;
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (int l : labels[a]) {
      auto it = std::find(seen.begin(), seen.end(), l);
      if (it == seen.end()) {
        seen.push_back(l);
        groups.emplace_back();
        it = seen.end() - 1;
      }
      groups[static_cast<std::size_t>(it - seen.begin())].push_back(g.id_at(members[a]));
    }
  }
  return groups;
}

NodeSet set_union(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Inserts c into a list with no mergeable pairs, absorbing every community it
// merges with (repeatedly, since the union grows) so the invariant survives.
void insert_merging(std::vector<NodeSet>& cover, NodeSet c, double phi) {
  for (;;) {
    auto it = std::find_if(cover.begin(), cover.end(),
                           [&](const NodeSet& d) { return containment(c, d) >= phi; });
    if (it == cover.end()) break;
    c = set_union(c, *it);
    cover.erase(it);
  }
  cover.push_back(std::move(c));
}

// DEMON's flat merge: an exact repeat is dropped, otherwise the first stored
// community with containment >= phi is replaced by the union (moved to the
// back unless the union is already stored), otherwise c is appended.
void demon_merge(std::vector<NodeSet>& cover, const std::vector<NodeId>& listed, double phi) {
  if (std::find(cover.begin(), cover.end(), listed) != cover.end()) return;
  NodeSet c = make_node_set(listed);
  for (auto it = cover.begin(); it != cover.end(); ++it) {
    if (containment(c, *it) >= phi) {
      NodeSet u = set_union(c, *it);
      cover.erase(it);
      if (std::find(cover.begin(), cover.end(), u) == cover.end()) cover.push_back(std::move(u));
      return;
    }
  }
  cover.push_back(std::move(c));
}

// ANGEL's label-frequency merge state.
class AngelCover {
 public:
  AngelCover(double phi, std::size_t min_size) : phi_(phi), min_size_(min_size) {}

  int next_id() { return next_id_++; }

  // Merges each local community into every stored community holding more
  // than phi of its nodes; stores it as new when none does (outside the
  // cleaning stage). Stops at the first undersized community.
  void merge(const std::vector<std::pair<int, NodeSet>>& locals, bool clean) {
    for (const auto& [c, nodes] : locals) {
      if (nodes.size() < min_size_) return;
      std::vector<int> ids;
      std::vector<int> counts;
      for (NodeId v : nodes) {
        for (int id : node2com_[v]) {
          auto it = std::find(ids.begin(), ids.end(), id);
          if (it == ids.end()) {
            ids.push_back(id);
            counts.push_back(1);
          } else {
            ++counts[static_cast<std::size_t>(it - ids.begin())];
          }
        }
      }
      bool merged = false;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const int target = ids[i];
        if (target == c) continue;
        if (static_cast<double>(counts[i]) / static_cast<double>(nodes.size()) <= phi_) continue;
        auto dst = find(target);
        if (dst == store_.end()) continue;
        for (NodeId v : nodes) {
          auto& mine = node2com_[v];
          std::erase(mine, c);
          if (std::find(mine.begin(), mine.end(), target) == mine.end()) mine.push_back(target);
        }
        dst->second = set_union(dst->second, nodes);
        if (clean) {
          auto self = find(c);
          if (self != store_.end()) store_.erase(self);
        }
        merged = true;
      }
      if (!merged && !clean) {
        store_.emplace_back(c, nodes);
        for (NodeId v : nodes) node2com_[v].push_back(c);
      }
    }
  }

  // Re-merges communities smallest first until the count stops shrinking.
  void clean() {
    std::size_t before = store_.size();
    for (;;) {
      std::vector<std::pair<int, std::size_t>> order;
      for (const auto& [id, nodes] : store_) order.emplace_back(id, nodes.size());
      std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
      for (const auto& [id, _] : order) {
        auto it = find(id);
        if (it == store_.end()) continue;
        merge({{id, it->second}}, true);
      }
      if (store_.size() >= before) break;
      before = store_.size();
    }
  }

  std::vector<NodeSet> communities() const {
    std::vector<NodeSet> out;
    for (const auto& [_, nodes] : store_) {
      if (nodes.size() >= min_size_) out.push_back(nodes);
    }
    return out;
  }

 private:
  std::vector<std::pair<int, NodeSet>>::iterator find(int id) {
    return std::find_if(store_.begin(), store_.end(), [&](const auto& e) { return e.first == id; });
  }

  double phi_;
  std::size_t min_size_;
  int next_id_ = 0;
  std::vector<std::pair<int, NodeSet>> store_;
  std::map<NodeId, std::vector<int>> node2com_;
};

}  // namespace

NodeSet make_node_set(std::vector<NodeId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kDemon: return "demon";
    case DetectorKind::kAngel: return "angel";
    case DetectorKind::kLouvain: return "louvain";
  }
  return "?";
}

DetectorKind parse_detector_kind(const std::string& name) {
  if (name == "demon") return DetectorKind::kDemon;
  if (name == "angel") return DetectorKind::kAngel;
  if (name == "louvain") return DetectorKind::kLouvain;
  throw ConfigError("unknown detector '" + name + "' (expected demon, angel or louvain)");
}

std::string DetectorConfig::name() const { return to_string(kind); }

double containment(const NodeSet& a, const NodeSet& b) {
  if (a.empty() || b.empty()) return 0.0;
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
  return static_cast<double>(common) / static_cast<double>(std::min(a.size(), b.size()));
}

std::vector<NodeSet> merge_communities(std::vector<NodeSet> communities, double phi) {
  std::vector<NodeSet> out;
  for (auto& c : communities) insert_merging(out, std::move(c), phi);
  std::sort(out.begin(), out.end());
  return out;
}

CommunityCover demon_detect(const Graph& g, double phi, std::size_t min_size,
                            std::uint64_t seed, int max_sweeps) {
  const int sweeps = std::min(10, std::max(0, max_sweeps));
  std::vector<int> local_of(g.n(), -1);
  std::vector<NodeSet> cover;
  for (std::size_t v = 0; v < g.n(); ++v) {
    const auto ego = static_cast<NodeIndex>(v);
    const auto& members = g.neighbors(ego);
    if (members.empty()) continue;
    const auto adj = induced(g, members, local_of);
    Rng rng(derive_seed(seed, v));
    const auto labels = demon_propagation(adj, rng, sweeps);
    for (auto& group : group_by_label(g, members, labels)) {
      // Listed as first member, ego, remaining members.
      group.insert(group.begin() + 1, g.id_at(ego));
      if (group.size() > min_size) demon_merge(cover, group, phi);
    }
  }
  // A final fixpoint pass so that the cover is closed under merging.
  return {merge_communities(std::move(cover), phi), "demon", seed};
}

std::size_t angel_min_size(double phi, std::size_t min_size) {
  if (phi >= 1.0) return min_size;
  return std::max<std::size_t>({3, min_size, static_cast<std::size_t>(1.0 / (1.0 - phi))});
}

CommunityCover angel_detect(const Graph& g, double phi, std::size_t min_size,
                            std::uint64_t seed, int max_sweeps) {
  const std::size_t floor_size = angel_min_size(phi, min_size);
  std::vector<int> local_of(g.n(), -1);
  AngelCover state(phi, floor_size);
  for (std::size_t v = 0; v < g.n(); ++v) {
    const auto ego = static_cast<NodeIndex>(v);
    const auto& members = g.neighbors(ego);
    if (members.size() < floor_size) continue;
    const auto adj = induced(g, members, local_of);
    Rng rng(derive_seed(seed, v));
    const auto labels = angel_propagation(adj, rng, max_sweeps);
    std::vector<std::pair<int, NodeSet>> locals;
    for (auto& group : group_by_label(g, members, labels)) locals.emplace_back(state.next_id(), make_node_set(group));
    state.merge(locals, false);
  }
  state.clean();
  return {merge_communities(state.communities(), phi), "angel", seed};
}

CommunityCover louvain_detect(const Graph& g, std::uint64_t seed) {
  // Weighted adjacency of the current level; self-loops hold twice the
  // internal weight so that node strength = row sum.
  struct Level {
    std::vector<std::vector<std::pair<int, double>>> adj;
  };
  const int n0 = static_cast<int>(g.n());
  Level level;
  level.adj.resize(static_cast<std::size_t>(n0));
  for (int i = 0; i < n0; ++i) {
    for (NodeIndex j : g.neighbors(i)) level.adj[static_cast<std::size_t>(i)].emplace_back(j, 1.0);
  }
  std::vector<int> membership(static_cast<std::size_t>(n0));
  std::iota(membership.begin(), membership.end(), 0);

  Rng rng(seed);
  double m2 = 2.0 * static_cast<double>(g.m());
  for (int depth = 0; depth < 64 && m2 > 0.0; ++depth) {
    const int n = static_cast<int>(level.adj.size());
    std::vector<double> strength(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      for (auto [j, w] : level.adj[static_cast<std::size_t>(i)]) strength[static_cast<std::size_t>(i)] += w;
    }
    std::vector<int> comm(static_cast<std::size_t>(n));
    std::iota(comm.begin(), comm.end(), 0);
    std::vector<double> tot(strength);
    std::vector<int> order(comm);
    shuffle(rng, order);

    std::vector<double> link(static_cast<std::size_t>(n), -1.0);
    std::vector<int> touched;
    bool improved = false;
    for (int pass = 0; pass < 1000; ++pass) {
      int moves = 0;
      for (int i : order) {
        const auto ui = static_cast<std::size_t>(i);
        const int old = comm[ui];
        touched.clear();
        link[static_cast<std::size_t>(old)] = 0.0;
        touched.push_back(old);
        for (auto [j, w] : level.adj[ui]) {
          if (j == i) continue;
          const int c = comm[static_cast<std::size_t>(j)];
          if (link[static_cast<std::size_t>(c)] < 0.0) {
            link[static_cast<std::size_t>(c)] = 0.0;
            touched.push_back(c);
          }
          link[static_cast<std::size_t>(c)] += w;
        }
        tot[static_cast<std::size_t>(old)] -= strength[ui];
        const double k = strength[ui];
        auto gain = [&](int c) { return link[static_cast<std::size_t>(c)] - tot[static_cast<std::size_t>(c)] * k / m2; };
        int best = old;
        double best_gain = gain(old);
        for (int c : touched) {
          const double gc = gain(c);
          if (gc > best_gain + 1e-12) {
            best = c;
            best_gain = gc;
          }
        }
        tot[static_cast<std::size_t>(best)] += k;
        comm[ui] = best;
        if (best != old) ++moves;
        for (int c : touched) link[static_cast<std::size_t>(c)] = -1.0;
      }
      if (moves == 0) break;
      improved = true;
    }
    if (!improved) break;

    // Renumber and aggregate.
    std::vector<int> renum(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
      auto& r = renum[static_cast<std::size_t>(comm[static_cast<std::size_t>(i)])];
      if (r < 0) r = next++;
    }
    for (auto& c : membership) c = renum[static_cast<std::size_t>(comm[static_cast<std::size_t>(c)])];
    std::vector<std::map<int, double>> agg(static_cast<std::size_t>(next));
    for (int i = 0; i < n; ++i) {
      const int ci = renum[static_cast<std::size_t>(comm[static_cast<std::size_t>(i)])];
      for (auto [j, w] : level.adj[static_cast<std::size_t>(i)]) {
        agg[static_cast<std::size_t>(ci)][renum[static_cast<std::size_t>(comm[static_cast<std::size_t>(j)])]] += w;
      }
    }
    Level next_level;
    next_level.adj.resize(static_cast<std::size_t>(next));
    for (int c = 0; c < next; ++c) {
      for (auto [d, w] : agg[static_cast<std::size_t>(c)]) next_level.adj[static_cast<std::size_t>(c)].emplace_back(d, w);
    }
    level = std::move(next_level);
    if (next == n) break;
  }

  std::map<int, std::vector<NodeId>> groups;
  for (int i = 0; i < n0; ++i) groups[membership[static_cast<std::size_t>(i)]].push_back(g.id_at(i));
  CommunityCover cover{{}, "louvain", seed};
  for (auto& [_, ids] : groups) cover.communities.push_back(make_node_set(std::move(ids)));
  std::sort(cover.communities.begin(), cover.communities.end());
  return cover;
}

CommunityCover detect(const Graph& g, const DetectorConfig& cfg) {
  if (g.n() == 0) throw EmptyInputError("cannot run a detector on an empty graph");
  if (cfg.kind != DetectorKind::kLouvain) {
    if (!(cfg.phi > 0.0 && cfg.phi <= 1.0)) throw ConfigError("phi must lie in (0,1]");
    if (cfg.min_size < 1) throw ConfigError("min_size must be at least 1");
  }
  switch (cfg.kind) {
    case DetectorKind::kDemon: return demon_detect(g, cfg.phi, cfg.min_size, cfg.seed, cfg.max_sweeps);
    case DetectorKind::kAngel: return angel_detect(g, cfg.phi, cfg.min_size, cfg.seed, cfg.max_sweeps);
    case DetectorKind::kLouvain: return louvain_detect(g, cfg.seed);
  }
  throw ConfigError("unknown detector kind");
}

std::vector<std::size_t> communities_of(const CommunityCover& cover, NodeId u) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cover.communities.size(); ++i) {
    const auto& c = cover.communities[i];
    if (std::binary_search(c.begin(), c.end(), u)) out.push_back(i);
  }
  return out;
}

void write_cover(std::ostream& out, const CommunityCover& cover) {
  for (const auto& c : cover.communities) {
    for (std::size_t i = 0; i < c.size(); ++i) out << (i ? " " : "") << c[i];
    out << '\n';
  }
}

CommunityCover read_cover(std::istream& in) {
  CommunityCover cover;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<NodeId> ids;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t pos = 0;
        ids.push_back(std::stoll(tok, &pos));
        if (pos != tok.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("cover line " + std::to_string(lineno) + ": bad node id '" + tok + "'");
      }
    }
    if (!ids.empty()) cover.communities.push_back(make_node_set(std::move(ids)));
  }
  return cover;
}

CommunityCover restrict_cover(const CommunityCover& cover, const NodeSet& keep) {
  CommunityCover out{{}, cover.detector_name, cover.seed};
  for (const auto& c : cover.communities) {
    NodeSet r;
    std::set_intersection(c.begin(), c.end(), keep.begin(), keep.end(), std::back_inserter(r));
    if (!r.empty()) out.communities.push_back(std::move(r));
  }
  return out;
}

}  // namespace cmh
