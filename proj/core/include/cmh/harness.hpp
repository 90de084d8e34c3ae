#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmh/agent/ppo.hpp"
#include "cmh/baselines.hpp"
#include "cmh/metrics.hpp"

namespace cmh {

/// Environment variable naming the directory searched for `<name>.txt`.
inline constexpr const char* kDataDirEnv = "CMH_DATA_DIR";

std::string default_data_dir();

struct Dataset {
  std::string name;
  Graph graph;
  bool kar_adjust = false;   // budgets on kar use mu = m/n + 1
};

/// `kar` is built in. Anything else is looked up as `<dir>/<name>.txt`, or
/// read directly when `name` is a path to an existing file. Throws
/// ParseError (missing or malformed file) or EmptyInputError.
Dataset load_dataset(const std::string& name, const std::string& dir = default_data_dir());

/// kar plus every *.txt in `dir`, sorted.
std::vector<std::string> list_datasets(const std::string& dir = default_data_dir());

struct ExperimentConfig {
  std::string dataset = "kar";
  DetectorConfig train_detector{DetectorKind::kAngel};
  DetectorConfig test_detector{DetectorKind::kAngel};
  double tau = 0.5;
  double beta_multiplier = 1.0;
  double k_multiplier = 1.0;
  double p = 0.5;
  double lambda = 0.1;
  std::string policy = "random";   // odrl or a heuristic name
  int n_targets = 25;
  std::uint64_t seed = 0;
  int episodes = 1500;
  std::string checkpoint;          // required when policy = odrl
  std::string data_dir;            // empty: default_data_dir()
  agent::TrainConfig train;

  void validate() const;
  Setting setting() const;
};

/// Flat `key = value` lines, '#' starts a comment. Keys: dataset,
/// train_detector, test_detector, phi, tau, beta_multiplier, k_multiplier,
/// p, lambda, policy, n_targets, seed, episodes, checkpoint, data_dir, lr,
/// d_h, advantage_norm. Unknown keys and bad values are ConfigErrors.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void write_config(std::ostream& out, const ExperimentConfig& cfg);

struct TargetSample {
  NodeId target = 0;
  NodeSet community;
};

struct SampleInfo {
  std::vector<NodeSet> picked;     // chosen communities, in pick order
  std::size_t requested = 0;
  std::size_t pool = 0;            // distinct eligible nodes
  std::string shortfall;           // empty when the request was met
};

/// For each size fraction 0.3, 0.5, 0.8 of the largest community, picks up
/// to three communities closest to that size (larger on ties) whose Dice
/// with every community already picked is at most 0.8. Targets are drawn
/// without replacement from the pooled members of the picked communities,
/// each paired with the first picked community containing it. Fewer targets
/// are returned when the pool is small. Throws SamplingError when nothing
/// is eligible.
std::vector<TargetSample> sample_targets(const CommunityCover& cover, std::size_t n_targets,
                                         std::uint64_t seed, SampleInfo* info = nullptr);

struct ResultRow {
  std::string dataset;
  int beta = 0;
  int k = 0;
  std::string policy;
  Report report;
  std::vector<TrialRecord> records;
};

struct ResultsTable {
  std::vector<ResultRow> rows;
  nlohmann::json meta = nlohmann::json::object();
};

/// Samples targets from the test detector's cover of the dataset, runs the
/// configured policy on each and aggregates one row. `params` is used for
/// odrl and must match the injected graph size; when absent the checkpoint
/// named in the config is loaded.
ResultRow run_experiment(const ExperimentConfig& cfg, const agent::AgentParams* params = nullptr);

/// Budget and proxy count implied by the config on `ds`.
std::pair<int, int> beta_and_k(const Dataset& ds, double beta_multiplier, double k_multiplier);

/// Trains an agent on the training detector's communities of the dataset.
agent::AgentState train_agent(const ExperimentConfig& cfg, std::vector<agent::CurvePoint>* curve = nullptr,
                              const agent::TrainCallback& cb = {});

// Output. Reals are printed with 12 decimals so CSV round trips are exact.
void write_csv(std::ostream& out, const ResultsTable& table);
ResultsTable read_csv(std::istream& in);
void to_json(nlohmann::json& j, const ResultRow& r);
void from_json(const nlohmann::json& j, ResultRow& r);
void to_json(nlohmann::json& j, const ResultsTable& t);
void from_json(const nlohmann::json& j, ResultsTable& t);

/// Grouped bar chart of F1 per dataset (groups) and policy (bars) with
/// 95% interval whiskers. Throws IoError when the file cannot be written.
void write_png_chart(const std::string& path, const ResultsTable& table);

}  // namespace cmh
