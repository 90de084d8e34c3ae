// cmh: command line front end for the hiding lab.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cmh/errors.hpp"
#include "cmh/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct Globals {
  std::string config_path;
  std::string data_dir;
};

cmh::ExperimentConfig base_config(const Globals& g) {
  cmh::ExperimentConfig cfg;
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw cmh::ConfigError("cannot open config file " + g.config_path);
    cfg = cmh::parse_config(in);
  }
  if (!g.data_dir.empty()) cfg.data_dir = g.data_dir;
  return cfg;
}

void emit(const cmh::ResultsTable& table, const std::string& csv_path, const std::string& json_path) {
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw cmh::IoError("cannot write " + json_path);
    out << nlohmann::json(table).dump(2) << '\n';
  }
  if (csv_path.empty() || csv_path == "-") {
    cmh::write_csv(std::cout, table);
  } else {
    std::ofstream out(csv_path);
    if (!out) throw cmh::IoError("cannot write " + csv_path);
    cmh::write_csv(out, table);
  }
}

cmh::ResultsTable read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cmh::ParseError("cannot open " + path);
  if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") return cmh::read_csv(in);
  try {
    return nlohmann::json::parse(in).get<cmh::ResultsTable>();
  } catch (const nlohmann::json::exception& e) {
    throw cmh::ParseError(path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Community membership hiding lab"};
  app.require_subcommand(1);
  Globals globals;
  app.add_option("--config", globals.config_path, "Flat key = value experiment config");
  app.add_option("--data-dir", globals.data_dir,
                 std::string("Dataset directory (default: $") + cmh::kDataDirEnv + ")");

  // detect
  auto* detect = app.add_subcommand("detect", "Run a detector and print its cover");
  std::string det_dataset, det_algo = "angel", det_out;
  double det_phi = 0.8;
  std::uint64_t det_seed = 0;
  detect->add_option("dataset", det_dataset, "Dataset name or edge list path")->required();
  detect->add_option("--algo", det_algo, "demon, angel or louvain")->capture_default_str();
  detect->add_option("--phi", det_phi, "Merge threshold")->capture_default_str();
  detect->add_option("--seed", det_seed, "Detector seed")->capture_default_str();
  detect->add_option("--out", det_out, "Write the cover here instead of stdout");

  // train
  auto* train = app.add_subcommand("train", "Train the agent and write a checkpoint");
  std::string tr_out, tr_curve;
  std::optional<std::string> tr_dataset, tr_detector, tr_norm;
  std::optional<double> tr_beta, tr_k, tr_lr;
  std::optional<int> tr_episodes;
  std::optional<std::uint64_t> tr_seed;
  bool tr_quiet = false;
  train->add_option("--dataset", tr_dataset);
  train->add_option("--beta-mult", tr_beta, "Budget as a multiple of mu");
  train->add_option("--k-mult", tr_k, "Proxy count as a multiple of mu");
  train->add_option("--episodes", tr_episodes);
  train->add_option("--seed", tr_seed);
  train->add_option("--train-detector", tr_detector);
  train->add_option("--lr", tr_lr);
  train->add_option("--advantage-norm", tr_norm, "episode, running or none");
  train->add_option("--out", tr_out, "Checkpoint path")->required();
  train->add_option("--curve", tr_curve, "Learning curve CSV");
  train->add_flag("--quiet", tr_quiet);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (and baselines with --grid)");
  std::string ev_ckpt, ev_detector = "angel", ev_csv, ev_json;
  bool ev_grid = false;
  std::optional<int> ev_targets;
  std::optional<std::uint64_t> ev_seed;
  eval->add_option("--ckpt", ev_ckpt)->required();
  eval->add_option("--test-detector", ev_detector)->capture_default_str();
  eval->add_flag("--grid", ev_grid, "All budgets {0.5,1,2} mu and all policies");
  eval->add_option("--n-targets", ev_targets);
  eval->add_option("--seed", ev_seed);
  eval->add_option("--csv", ev_csv, "CSV path (default stdout)");
  eval->add_option("--json", ev_json, "JSON path");

  // naive
  auto* naive = app.add_subcommand("naive", "Proxy injection alone against each detector");
  std::optional<std::string> nv_dataset;
  std::optional<double> nv_k;
  std::optional<int> nv_targets;
  std::vector<std::string> nv_detectors{"louvain", "angel", "demon"};
  int nv_seeds = 10;
  std::optional<std::uint64_t> nv_seed;
  std::string nv_csv, nv_json;
  naive->add_option("--dataset", nv_dataset);
  naive->add_option("--k-mult", nv_k);
  naive->add_option("--detectors", nv_detectors)->delimiter(',')->capture_default_str();
  naive->add_option("--seeds", nv_seeds, "Number of master seeds pooled per detector")->capture_default_str();
  naive->add_option("--seed", nv_seed, "First master seed");
  naive->add_option("--n-targets", nv_targets);
  naive->add_option("--csv", nv_csv);
  naive->add_option("--json", nv_json);

  // run
  auto* run = app.add_subcommand("run", "One experiment cell from --config");
  std::string run_csv, run_json;
  run->add_option("--csv", run_csv);
  run->add_option("--json", run_json);

  // report
  auto* report = app.add_subcommand("report", "Render a results file");
  std::string rp_in, rp_format = "csv", rp_out;
  report->add_option("--in", rp_in, "results.json (or .csv)")->required();
  report->add_option("--format", rp_format)->check(CLI::IsMember({"csv", "png"}))->capture_default_str();
  report->add_option("--out", rp_out, "Output path (csv defaults to stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*detect) {
      cmh::ExperimentConfig cfg = base_config(globals);
      cmh::DetectorConfig dc;
      dc.kind = cmh::parse_detector_kind(det_algo);
      dc.phi = det_phi;
      dc.seed = det_seed;
      const auto ds = cmh::load_dataset(det_dataset, cfg.data_dir.empty() ? cmh::default_data_dir() : cfg.data_dir);
      const auto cover = cmh::detect(ds.graph, dc);
      if (det_out.empty()) {
        cmh::write_cover(std::cout, cover);
      } else {
        std::ofstream out(det_out);
        if (!out) throw cmh::IoError("cannot write " + det_out);
        cmh::write_cover(out, cover);
      }
      std::cerr << ds.name << ": " << cover.size() << " communities (" << dc.name() << ", phi=" << dc.phi
                << ", seed=" << dc.seed << ")\n";
    } else if (*train) {
      cmh::ExperimentConfig cfg = base_config(globals);
      if (tr_dataset) cfg.dataset = *tr_dataset;
      if (tr_beta) cfg.beta_multiplier = *tr_beta;
      if (tr_k) cfg.k_multiplier = *tr_k;
      if (tr_episodes) cfg.episodes = *tr_episodes;
      if (tr_seed) cfg.seed = *tr_seed;
      if (tr_detector) cfg.train_detector.kind = cmh::parse_detector_kind(*tr_detector);
      if (tr_lr) cfg.train.lr = *tr_lr;
      if (tr_norm) cfg.train.advantage_norm = cmh::agent::parse_advantage_norm(*tr_norm);
      std::vector<cmh::agent::CurvePoint> curve;
      auto state = cmh::train_agent(cfg, &curve, [&](const cmh::agent::CurvePoint& p, const cmh::agent::UpdateStats&) {
        if (!tr_quiet && (p.episode + 1) % 100 == 0) {
          std::fprintf(stderr, "episode %d  moving SR %.2f\n", p.episode + 1, p.moving_sr);
        }
      });
      std::ofstream out(tr_out);
      if (!out) throw cmh::IoError("cannot write " + tr_out);
      cmh::agent::save_checkpoint(out, state);
      if (!tr_curve.empty()) {
        std::ofstream c(tr_curve);
        if (!c) throw cmh::IoError("cannot write " + tr_curve);
        cmh::agent::write_curve_csv(c, curve);
      }
    } else if (*eval) {
      cmh::ExperimentConfig cfg = base_config(globals);
      std::ifstream in(ev_ckpt);
      if (!in) throw cmh::ConfigError("cannot open checkpoint " + ev_ckpt);
      const auto state = cmh::agent::load_checkpoint(in);
      const auto& m = state.meta;
      try {
        cfg.dataset = m.at("dataset").get<std::string>();
        cfg.beta_multiplier = m.at("beta_multiplier").get<double>();
        cfg.k_multiplier = m.at("k_multiplier").get<double>();
        cfg.train_detector.kind = cmh::parse_detector_kind(m.at("train_detector").get<std::string>());
        cfg.train_detector.phi = cfg.test_detector.phi = m.at("phi").get<double>();
        cfg.train_detector.seed = cfg.test_detector.seed = m.at("detector_seed").get<std::uint64_t>();
        cfg.tau = m.at("tau").get<double>();
        cfg.p = m.at("p").get<double>();
        cfg.lambda = m.at("lambda").get<double>();
      } catch (const nlohmann::json::exception& e) {
        throw cmh::ConfigError("checkpoint lacks experiment metadata: " + std::string(e.what()));
      }
      cfg.test_detector.kind = cmh::parse_detector_kind(ev_detector);
      if (ev_targets) cfg.n_targets = *ev_targets;
      if (ev_seed) cfg.seed = *ev_seed;

      std::vector<double> betas{cfg.beta_multiplier};
      std::vector<std::string> policies{"odrl"};
      if (ev_grid) {
        betas = {0.5, 1.0, 2.0};
        policies = {"odrl", "random", "degree", "betweenness", "roam"};
      }
      cmh::ResultsTable table;
      table.meta = {{"command", "eval"},
                    {"train_detector", cfg.train_detector.name()},
                    {"test_detector", cfg.test_detector.name()},
                    {"setting", cmh::to_string(cfg.setting())},
                    {"seed", cfg.seed}};
      for (double b : betas) {
        for (const auto& pol : policies) {
          cfg.beta_multiplier = b;
          cfg.policy = pol;
          table.rows.push_back(cmh::run_experiment(cfg, &state.params));
        }
      }
      emit(table, ev_csv, ev_json);
    } else if (*naive) {
      cmh::ExperimentConfig cfg = base_config(globals);
      if (nv_dataset) cfg.dataset = *nv_dataset;
      if (nv_k) cfg.k_multiplier = *nv_k;
      if (nv_targets) cfg.n_targets = *nv_targets;
      if (nv_seed) cfg.seed = *nv_seed;
      if (nv_seeds < 1) throw cmh::ConfigError("--seeds must be at least 1");
      cfg.policy = "naive";
      cmh::ResultsTable table;
      table.meta = {{"command", "naive"}, {"seeds", nv_seeds}, {"first_seed", cfg.seed}};
      const std::uint64_t first = cfg.seed;
      for (const auto& name : nv_detectors) {
        cfg.test_detector.kind = cmh::parse_detector_kind(name);
        cmh::ResultRow pooled;
        for (int i = 0; i < nv_seeds; ++i) {
          cfg.seed = first + static_cast<std::uint64_t>(i);
          auto row = cmh::run_experiment(cfg);
          pooled.dataset = row.dataset;
          pooled.beta = 0;
          pooled.k = row.k;
          pooled.records.insert(pooled.records.end(), row.records.begin(), row.records.end());
        }
        pooled.policy = "naive@" + name;
        pooled.report = cmh::aggregate(pooled.records, {1.96, 1000, cmh::derive_seed(first, 3)});
        table.rows.push_back(std::move(pooled));
      }
      emit(table, nv_csv, nv_json);
    } else if (*run) {
      if (globals.config_path.empty()) throw cmh::ConfigError("run needs --config");
      const cmh::ExperimentConfig cfg = base_config(globals);
      cmh::ResultsTable table;
      std::ostringstream text;
      cmh::write_config(text, cfg);
      table.meta = {{"command", "run"}, {"config", text.str()}};
      table.rows.push_back(cmh::run_experiment(cfg));
      emit(table, run_csv, run_json);
    } else if (*report) {
      const auto table = read_results(rp_in);
      if (rp_format == "png") {
        cmh::write_png_chart(rp_out.empty() ? "report.png" : rp_out, table);
      } else {
        emit(table, rp_out, "");
      }
    }
  } catch (const cmh::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case cmh::ErrorKind::kConfig: return kExitConfig;
      case cmh::ErrorKind::kData: return kExitData;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
