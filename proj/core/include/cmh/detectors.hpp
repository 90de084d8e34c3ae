#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cmh/graph.hpp"

namespace cmh {

/// Sorted, duplicate-free list of node ids.
using NodeSet = std::vector<NodeId>;

NodeSet make_node_set(std::vector<NodeId> ids);

struct CommunityCover {
  std::vector<NodeSet> communities;
  std::string detector_name;
  std::uint64_t seed = 0;

  std::size_t size() const { return communities.size(); }
  bool empty() const { return communities.empty(); }
};

enum class DetectorKind { kDemon, kAngel, kLouvain };

struct DetectorConfig {
  DetectorKind kind = DetectorKind::kAngel;
  double phi = 0.8;        // merge threshold, overlapping detectors only
  std::size_t min_size = 3;
  std::uint64_t seed = 0;
  int max_sweeps = 100;    // label propagation sweep cap

  std::string name() const;
};

DetectorKind parse_detector_kind(const std::string& name);
std::string to_string(DetectorKind kind);

/// Black-box detector entry point. A pure function of (g, cfg): repeated
/// calls on equal graphs return equal covers.
CommunityCover detect(const Graph& g, const DetectorConfig& cfg);

/// Ego-network detector: label propagation on each ego-minus-ego network,
/// ego re-inserted into every local community, then containment merging.
CommunityCover demon_detect(const Graph& g, double phi, std::size_t min_size,
                            std::uint64_t seed, int max_sweeps = 100);

/// Bottom-up ego-network detector: label propagation on each ego-minus-ego
/// network (ego not re-inserted), each local community folded into every
/// stored community that already holds more than phi of its nodes, then a
/// smallest-first cleaning pass. Communities smaller than angel_min_size are
/// dropped.
CommunityCover angel_detect(const Graph& g, double phi, std::size_t min_size,
                            std::uint64_t seed, int max_sweeps = 100);

/// max(3, min_size, floor(1 / (1 - phi))) for phi < 1, else min_size.
std::size_t angel_min_size(double phi, std::size_t min_size);

/// Two-phase modularity maximization (local moving + aggregation) with a
/// seeded node visiting order. Moves happen only on strictly positive gain,
/// so ties keep a node in its current community.
CommunityCover louvain_detect(const Graph& g, std::uint64_t seed);

/// Indices of every community containing u.
std::vector<std::size_t> communities_of(const CommunityCover& cover, NodeId u);

/// |a ∩ b| / min(|a|, |b|); 0 when either set is empty.
double containment(const NodeSet& a, const NodeSet& b);

/// Repeatedly unions any pair of communities with containment >= phi until
/// no such pair remains. The result is sorted and duplicate-free, so merging
/// an already merged list is the identity.
std::vector<NodeSet> merge_communities(std::vector<NodeSet> communities, double phi);

/// One community per line, space separated ids.
void write_cover(std::ostream& out, const CommunityCover& cover);
CommunityCover read_cover(std::istream& in);

/// Drops nodes outside `keep` and removes communities left empty.
CommunityCover restrict_cover(const CommunityCover& cover, const NodeSet& keep);

}  // namespace cmh
