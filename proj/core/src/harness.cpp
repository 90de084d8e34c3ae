#include "cmh/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cmh/errors.hpp"

#ifndef CMH_DEFAULT_DATA_DIR
#define CMH_DEFAULT_DATA_DIR "data"
#endif

namespace cmh {

namespace {

// Zachary's karate club, 0-indexed.
constexpr int kKarEdges[][2] = {
    {0, 1},   {0, 2},   {0, 3},   {0, 4},   {0, 5},   {0, 6},   {0, 7},   {0, 8},   {0, 10},
    {0, 11},  {0, 12},  {0, 13},  {0, 17},  {0, 19},  {0, 21},  {0, 31},  {1, 2},   {1, 3},
    {1, 7},   {1, 13},  {1, 17},  {1, 19},  {1, 21},  {1, 30},  {2, 3},   {2, 7},   {2, 8},
    {2, 9},   {2, 13},  {2, 27},  {2, 28},  {2, 32},  {3, 7},   {3, 12},  {3, 13},  {4, 6},
    {4, 10},  {5, 6},   {5, 10},  {5, 16},  {6, 16},  {8, 30},  {8, 32},  {8, 33},  {9, 33},
    {13, 33}, {14, 32}, {14, 33}, {15, 32}, {15, 33}, {18, 32}, {18, 33}, {19, 33}, {20, 32},
    {20, 33}, {22, 32}, {22, 33}, {23, 25}, {23, 27}, {23, 29}, {23, 32}, {23, 33}, {24, 25},
    {24, 27}, {24, 31}, {25, 31}, {26, 29}, {26, 33}, {27, 33}, {28, 31}, {28, 33}, {29, 32},
    {29, 33}, {30, 32}, {30, 33}, {31, 32}, {31, 33}, {32, 33},
};

Graph karate() {
  std::vector<NodeId> ids(34);
  for (NodeId i = 0; i < 34; ++i) ids[static_cast<std::size_t>(i)] = i;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (const auto& e : kKarEdges) edges.emplace_back(e[0], e[1]);
  return Graph(std::move(ids), edges);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return x;
}

std::string fixed(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12f", x);
  return buf;
}

// Shortest text that parses back to the same double.
std::string shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

constexpr const char* kCsvHeader = "dataset,beta,k,policy,sr,sr_lo,sr_hi,onmi,f1,f1_lo,f1_hi,n";

}  // namespace

std::string default_data_dir() {
  if (const char* env = std::getenv(kDataDirEnv); env && *env) return env;
  return CMH_DEFAULT_DATA_DIR;
}

Dataset load_dataset(const std::string& name, const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset ds;
  if (name == "kar") {
    ds.name = "kar";
    ds.graph = karate();
    ds.kar_adjust = true;
    return ds;
  }
  fs::path path = name;
  if (!fs::is_regular_file(path)) path = fs::path(dir) / (name + ".txt");
  if (!fs::is_regular_file(path)) {
    throw ParseError("dataset '" + name + "' not found (looked for " + path.string() + "; set " +
                     kDataDirEnv + " to change the data directory)");
  }
  ds.name = path.stem().string();
  ds.graph = load_edge_list_file(path.string());
  ds.kar_adjust = ds.name == "kar";
  if (ds.graph.m() == 0) throw EmptyInputError("dataset '" + name + "' has no edges");
  return ds;
}

std::vector<std::string> list_datasets(const std::string& dir) {
  namespace fs = std::filesystem;
  std::set<std::string> names{"kar"};
  std::error_code ec;
  if (fs::is_directory(dir, ec)) {
    for (const auto& e : fs::directory_iterator(dir, ec)) {
      if (e.is_regular_file() && e.path().extension() == ".txt") names.insert(e.path().stem().string());
    }
  }
  return {names.begin(), names.end()};
}

void ExperimentConfig::validate() const {
  if (dataset.empty()) throw ConfigError("dataset is empty");
  if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError("tau must lie in [0,1)");
  if (!(beta_multiplier > 0.0)) throw ConfigError("beta_multiplier must be positive");
  if (!(k_multiplier > 0.0)) throw ConfigError("k_multiplier must be positive");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0,1]");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  for (const auto* d : {&train_detector, &test_detector}) {
    if (!(d->phi > 0.0 && d->phi <= 1.0)) throw ConfigError("phi must lie in (0,1]");
  }
  if (n_targets < 1) throw ConfigError("n_targets must be at least 1");
  if (episodes < 1) throw ConfigError("episodes must be at least 1");
  if (policy != "odrl") parse_heuristic_kind(policy);
  train.validate();
}

Setting ExperimentConfig::setting() const {
  return train_detector.kind == test_detector.kind ? Setting::kSymmetric : Setting::kAsymmetric;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "dataset") {
    cfg.dataset = value;
  } else if (key == "train_detector") {
    cfg.train_detector.kind = parse_detector_kind(value);
  } else if (key == "test_detector") {
    cfg.test_detector.kind = parse_detector_kind(value);
  } else if (key == "phi") {
    cfg.train_detector.phi = cfg.test_detector.phi = parse_double(key, value);
  } else if (key == "detector_seed") {
    cfg.train_detector.seed = cfg.test_detector.seed = parse_int<std::uint64_t>(key, value);
  } else if (key == "tau") {
    cfg.tau = parse_double(key, value);
  } else if (key == "beta_multiplier") {
    cfg.beta_multiplier = parse_double(key, value);
  } else if (key == "k_multiplier") {
    cfg.k_multiplier = parse_double(key, value);
  } else if (key == "p") {
    cfg.p = parse_double(key, value);
  } else if (key == "lambda") {
    cfg.lambda = parse_double(key, value);
  } else if (key == "policy") {
    if (value != "odrl") parse_heuristic_kind(value);
    cfg.policy = value;
  } else if (key == "n_targets") {
    cfg.n_targets = parse_int<int>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_int<std::uint64_t>(key, value);
  } else if (key == "episodes") {
    cfg.episodes = parse_int<int>(key, value);
  } else if (key == "checkpoint") {
    cfg.checkpoint = value;
  } else if (key == "data_dir") {
    cfg.data_dir = value;
  } else if (key == "lr") {
    cfg.train.lr = parse_double(key, value);
  } else if (key == "d_h") {
    cfg.train.d_h = parse_int<int>(key, value);
  } else if (key == "advantage_norm") {
    cfg.train.advantage_norm = agent::parse_advantage_norm(value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

void write_config(std::ostream& out, const ExperimentConfig& cfg) {
  out << "dataset = " << cfg.dataset << '\n'
      << "train_detector = " << cfg.train_detector.name() << '\n'
      << "test_detector = " << cfg.test_detector.name() << '\n'
      << "phi = " << shortest(cfg.test_detector.phi) << '\n'
      << "detector_seed = " << cfg.test_detector.seed << '\n'
      << "tau = " << shortest(cfg.tau) << '\n'
      << "beta_multiplier = " << shortest(cfg.beta_multiplier) << '\n'
      << "k_multiplier = " << shortest(cfg.k_multiplier) << '\n'
      << "p = " << shortest(cfg.p) << '\n'
      << "lambda = " << shortest(cfg.lambda) << '\n'
      << "policy = " << cfg.policy << '\n'
      << "n_targets = " << cfg.n_targets << '\n'
      << "seed = " << cfg.seed << '\n'
      << "episodes = " << cfg.episodes << '\n'
      << "lr = " << shortest(cfg.train.lr) << '\n'
      << "d_h = " << cfg.train.d_h << '\n'
      << "advantage_norm = " << agent::to_string(cfg.train.advantage_norm) << '\n';
  if (!cfg.checkpoint.empty()) out << "checkpoint = " << cfg.checkpoint << '\n';
  if (!cfg.data_dir.empty()) out << "data_dir = " << cfg.data_dir << '\n';
}

std::vector<TargetSample> sample_targets(const CommunityCover& cover, std::size_t n_targets,
                                         std::uint64_t seed, SampleInfo* info) {
  if (cover.empty()) throw SamplingError("cover has no communities");
  std::size_t largest = 0;
  for (const auto& c : cover.communities) largest = std::max(largest, c.size());

  std::vector<std::size_t> picked;
  for (double frac : {0.3, 0.5, 0.8}) {
    const double goal = frac * static_cast<double>(largest);
    std::vector<std::size_t> order(cover.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double da = std::abs(static_cast<double>(cover.communities[a].size()) - goal);
      const double db = std::abs(static_cast<double>(cover.communities[b].size()) - goal);
      if (da != db) return da < db;
      return cover.communities[a].size() > cover.communities[b].size();
    });
    int taken = 0;
    for (std::size_t i : order) {
      if (taken == 3) break;
      if (cover.communities[i].empty()) continue;
      if (std::find(picked.begin(), picked.end(), i) != picked.end()) continue;
      const bool similar = std::any_of(picked.begin(), picked.end(), [&](std::size_t j) {
        return dice(cover.communities[i], cover.communities[j]) > 0.8;
      });
      if (similar) continue;
      picked.push_back(i);
      ++taken;
    }
  }

  std::vector<TargetSample> pool;
  std::set<NodeId> seen;
  for (std::size_t i : picked) {
    for (NodeId v : cover.communities[i]) {
      if (seen.insert(v).second) pool.push_back({v, cover.communities[i]});
    }
  }
  if (pool.empty()) throw SamplingError("no node belongs to an eligible community");

  Rng rng(seed);
  shuffle(rng, pool);
  const std::size_t take = std::min(n_targets, pool.size());
  pool.resize(take);

  if (info) {
    info->picked.clear();
    for (std::size_t i : picked) info->picked.push_back(cover.communities[i]);
    info->requested = n_targets;
    info->pool = seen.size();
    info->shortfall.clear();
    if (picked.size() < 9) {
      info->shortfall = std::to_string(picked.size()) + " of 9 communities eligible";
    }
    if (take < n_targets) {
      if (!info->shortfall.empty()) info->shortfall += "; ";
      info->shortfall += std::to_string(take) + " of " + std::to_string(n_targets) + " targets available";
    }
  }
  return pool;
}

std::pair<int, int> beta_and_k(const Dataset& ds, double beta_multiplier, double k_multiplier) {
  const Budget b = budget_from_mu(ds.graph, beta_multiplier, ds.kar_adjust);
  return {b.beta, scaled_count(k_multiplier, b.mu)};
}

ResultRow run_experiment(const ExperimentConfig& cfg, const agent::AgentParams* params) {
  cfg.validate();
  const Dataset ds = load_dataset(cfg.dataset, cfg.data_dir.empty() ? default_data_dir() : cfg.data_dir);
  const auto [beta, k] = beta_and_k(ds, cfg.beta_multiplier, cfg.k_multiplier);

  std::optional<agent::AgentParams> loaded;
  if (cfg.policy == "odrl" && !params) {
    if (cfg.checkpoint.empty()) throw ConfigError("policy odrl needs a checkpoint");
    std::ifstream in(cfg.checkpoint);
    if (!in) throw ConfigError("cannot open checkpoint " + cfg.checkpoint);
    loaded = agent::load_checkpoint(in).params;
    params = &*loaded;
  }
  if (params) {
    const auto& shape = params->shape();
    if (shape.num_actors != static_cast<std::size_t>(k) + 1 ||
        shape.num_nodes != ds.graph.n() + static_cast<std::size_t>(k)) {
      throw ConfigError("checkpoint was trained for " + std::to_string(shape.num_actors - 1) + " proxies on " +
                        std::to_string(shape.num_nodes) + " nodes, experiment needs " + std::to_string(k) +
                        " on " + std::to_string(ds.graph.n() + static_cast<std::size_t>(k)));
    }
  }

  const CommunityCover cover0 = detect(ds.graph, cfg.test_detector);
  const auto targets = sample_targets(cover0, static_cast<std::size_t>(cfg.n_targets), derive_seed(cfg.seed, 11));
  const NodeSet universe = ds.graph.ids();

  ResultRow row;
  row.dataset = ds.name;
  row.beta = beta;
  row.k = k;
  row.policy = cfg.policy;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const EnvConfig ec{cfg.tau, static_cast<std::size_t>(k), cfg.p, beta, derive_seed(cfg.seed, 1000 + i),
                       cfg.lambda};
    EnvState s = reset(ds.graph, targets[i].target, cfg.test_detector, ec, targets[i].community);
    std::unique_ptr<Policy> policy;
    if (cfg.policy == "odrl") {
      policy = std::make_unique<agent::OdrlPolicy>(*params);
    } else {
      policy = make_heuristic(parse_heuristic_kind(cfg.policy), derive_seed(cfg.seed, 2000 + i));
    }
    const EpisodeOutcome out = run_episode(s, *policy);
    TrialRecord rec;
    rec.target = targets[i].target;
    rec.success = out.hidden;
    rec.onmi = onmi(cover0, restrict_cover(s.cover, universe), universe);
    rec.edits_used = out.edits_used;
    rec.setting = cfg.setting();
    rec.seed = ec.seed;
    row.records.push_back(rec);
  }
  row.report = aggregate(row.records, {1.96, 1000, derive_seed(cfg.seed, 3)});
  return row;
}

agent::AgentState train_agent(const ExperimentConfig& cfg, std::vector<agent::CurvePoint>* curve,
                              const agent::TrainCallback& cb) {
  cfg.validate();
  const Dataset ds = load_dataset(cfg.dataset, cfg.data_dir.empty() ? default_data_dir() : cfg.data_dir);
  const auto [beta, k] = beta_and_k(ds, cfg.beta_multiplier, cfg.k_multiplier);
  const CommunityCover cover = detect(ds.graph, cfg.train_detector);
  if (cover.empty()) throw SamplingError("training detector found no communities on " + ds.name);

  agent::TrainingPool pool{ds.graph, cfg.train_detector,
                           EnvConfig{cfg.tau, static_cast<std::size_t>(k), cfg.p, beta, 0, cfg.lambda},
                           cover.communities};
  agent::TrainConfig tc = cfg.train;
  tc.episodes = cfg.episodes;
  tc.seed = cfg.seed;
  const agent::AgentShape shape{tc.d_h, static_cast<std::size_t>(k) + 1, ds.graph.n() + static_cast<std::size_t>(k)};
  agent::AgentState state = agent::make_agent(shape, tc);
  state.meta = {{"dataset", ds.name},
                {"beta_multiplier", cfg.beta_multiplier},
                {"k_multiplier", cfg.k_multiplier},
                {"beta", beta},
                {"k", k},
                {"train_detector", cfg.train_detector.name()},
                {"phi", cfg.train_detector.phi},
                {"detector_seed", cfg.train_detector.seed},
                {"tau", cfg.tau},
                {"p", cfg.p},
                {"lambda", cfg.lambda}};
  auto points = agent::train(state, pool, cb);
  if (curve) *curve = std::move(points);
  return state;
}

void write_csv(std::ostream& out, const ResultsTable& table) {
  out << kCsvHeader << '\n';
  for (const auto& r : table.rows) {
    const auto& rep = r.report;
    out << r.dataset << ',' << r.beta << ',' << r.k << ',' << r.policy << ',' << fixed(rep.sr) << ','
        << fixed(rep.sr_ci.lo) << ',' << fixed(rep.sr_ci.hi) << ',' << fixed(rep.onmi_mean) << ','
        << fixed(rep.f1) << ',' << fixed(rep.f1_ci.lo) << ',' << fixed(rep.f1_ci.hi) << ',' << rep.n_trials
        << '\n';
  }
}

ResultsTable read_csv(std::istream& in) {
  ResultsTable t;
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) throw ParseError("results CSV: unexpected header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(trim(cell));
    if (f.size() != 12) throw ParseError("results CSV line " + std::to_string(lineno) + ": expected 12 fields");
    try {
      ResultRow r;
      r.dataset = f[0];
      r.beta = parse_int<int>("beta", f[1]);
      r.k = parse_int<int>("k", f[2]);
      r.policy = f[3];
      r.report.sr = parse_double("sr", f[4]);
      r.report.sr_ci = {parse_double("sr_lo", f[5]), parse_double("sr_hi", f[6])};
      r.report.onmi_mean = parse_double("onmi", f[7]);
      r.report.f1 = parse_double("f1", f[8]);
      r.report.f1_ci = {parse_double("f1_lo", f[9]), parse_double("f1_hi", f[10])};
      r.report.n_trials = parse_int<std::size_t>("n", f[11]);
      t.rows.push_back(std::move(r));
    } catch (const ConfigError& e) {
      throw ParseError("results CSV line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return t;
}

void to_json(nlohmann::json& j, const ResultRow& r) {
  j = {{"dataset", r.dataset}, {"beta", r.beta},     {"k", r.k},
       {"policy", r.policy},   {"report", r.report}, {"records", r.records}};
}

void from_json(const nlohmann::json& j, ResultRow& r) {
  r.dataset = j.at("dataset").get<std::string>();
  r.beta = j.at("beta").get<int>();
  r.k = j.at("k").get<int>();
  r.policy = j.at("policy").get<std::string>();
  r.report = j.at("report").get<Report>();
  r.records = j.value("records", std::vector<TrialRecord>{});
}

void to_json(nlohmann::json& j, const ResultsTable& t) { j = {{"meta", t.meta}, {"rows", t.rows}}; }

void from_json(const nlohmann::json& j, ResultsTable& t) {
  t.meta = j.value("meta", nlohmann::json::object());
  t.rows = j.at("rows").get<std::vector<ResultRow>>();
}

}  // namespace cmh
