#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmh/detectors.hpp"

namespace cmh {

/// Sørensen–Dice coefficient 2|a∩b| / (|a|+|b|). dice(∅, ∅) = 0.
double dice(const NodeSet& a, const NodeSet& b);

/// `set` with `u` removed.
NodeSet without(const NodeSet& set, NodeId u);

/// Largest dice(c_orig \ {u}, C' \ {u}) over the communities C' of u in
/// `cover`; 0 when u is unassigned.
double max_similarity(const NodeSet& c_orig, const CommunityCover& cover, NodeId u);

/// Hiding predicate: every community of u in `cover_new` has similarity at
/// most tau with c_orig (both taken without u). Vacuously true when u is in
/// no community.
bool is_hidden(const NodeSet& c_orig, const CommunityCover& cover_new, NodeId u, double tau);

/// Overlapping NMI in the max-normalised form of McDaid, Greene and Hurley,
/// computed over `universe`. Community members outside the universe are
/// ignored. Two empty covers score 1, one empty cover scores 0.
double onmi(const CommunityCover& x, const CommunityCover& y, const NodeSet& universe);

enum class Setting { kSymmetric, kAsymmetric };

std::string to_string(Setting s);

struct TrialRecord {
  NodeId target = 0;
  bool success = false;
  double onmi = 0.0;
  int edits_used = 0;
  Setting setting = Setting::kSymmetric;
  std::uint64_t seed = 0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct Report {
  double sr = 0.0;
  Interval sr_ci;
  double onmi_mean = 0.0;
  double f1 = 0.0;
  Interval f1_ci;
  std::size_t n_trials = 0;
};

/// 2ab/(a+b), 0 when either argument is 0.
double harmonic_mean(double a, double b);

struct AggregateOptions {
  double z = 1.96;
  int bootstrap_resamples = 1000;
  std::uint64_t bootstrap_seed = 0;
};

/// SR with a normal-approximation interval, mean ONMI, F1 and a percentile
/// bootstrap interval for F1 (records resampled jointly).
Report aggregate(const std::vector<TrialRecord>& records, const AggregateOptions& opts = {});

void to_json(nlohmann::json& j, const Interval& i);
void from_json(const nlohmann::json& j, Interval& i);
void to_json(nlohmann::json& j, const Report& r);
void from_json(const nlohmann::json& j, Report& r);
void to_json(nlohmann::json& j, const TrialRecord& r);
void from_json(const nlohmann::json& j, TrialRecord& r);

}  // namespace cmh
