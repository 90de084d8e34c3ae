#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cmh/errors.hpp"
#include "cmh/harness.hpp"

using namespace cmh;
namespace fs = std::filesystem;

namespace {

NodeSet range(NodeId from, NodeId count) {
  NodeSet s;
  for (NodeId i = 0; i < count; ++i) s.push_back(from + i);
  return s;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cmh_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("datasets") {
  const Dataset kar = load_dataset("kar");
  CHECK(kar.graph.n() == 34);
  CHECK(kar.graph.m() == 78);
  CHECK(kar.kar_adjust);
  CHECK(beta_and_k(kar, 2.0, 1.0) == std::pair<int, int>{7, 3});
  CHECK(beta_and_k(kar, 0.5, 1.0).first == 2);

  const fs::path dir = scratch_dir("data");
  { std::ofstream(dir / "tri.txt") << "1 2\n2 3\n3 1\n"; }
  { std::ofstream(dir / "blank.txt") << "# nothing here\n"; }
  const Dataset tri = load_dataset("tri", dir.string());
  CHECK(tri.graph.m() == 3);
  CHECK_FALSE(tri.kar_adjust);
  CHECK(load_dataset((dir / "tri.txt").string(), "/nowhere").graph.m() == 3);
  CHECK_THROWS_AS(load_dataset("nosuch", dir.string()), ParseError);
  CHECK_THROWS_AS(load_dataset("blank", dir.string()), EmptyInputError);
  CHECK(list_datasets(dir.string()) == std::vector<std::string>{"blank", "kar", "tri"});
}

TEST_CASE("data directory comes from the environment") {
  const fs::path dir = scratch_dir("env");
  ::setenv(kDataDirEnv, dir.c_str(), 1);
  CHECK(default_data_dir() == dir.string());
  ::unsetenv(kDataDirEnv);
  CHECK(default_data_dir() == CMH_TEST_DATA_DIR);
}

TEST_CASE("sampler prefers communities near each size goal") {
  // Disjoint communities of sizes 20, 6, 10, 16: goals are 6, 10 and 16.
  CommunityCover cover;
  cover.communities = {range(0, 20), range(100, 6), range(200, 10), range(300, 16)};
  SampleInfo info;
  const auto out = sample_targets(cover, 100, 1, &info);
  REQUIRE(info.picked.size() == 4);
  CHECK(info.picked[0].size() == 6);
  CHECK(info.picked[1].size() == 10);
  CHECK(info.picked[2].size() == 16);
  CHECK(info.picked[3].size() == 20);
  CHECK(info.pool == 52);
  CHECK(out.size() == 52);
  CHECK_FALSE(info.shortfall.empty());
}

TEST_CASE("sampler skips near duplicates") {
  CommunityCover cover;
  NodeSet twin = range(100, 5);
  twin.push_back(150);   // dice with range(100, 6) is 5/6
  cover.communities = {range(0, 20), range(100, 6), twin, range(200, 10)};
  SampleInfo info;
  sample_targets(cover, 10, 1, &info);
  for (const auto& c : info.picked) CHECK(c != twin);
  CHECK(info.picked.size() == 3);
}

TEST_CASE("sampler invariants") {
  CommunityCover cover;
  cover.communities = {range(0, 8), range(5, 8), range(20, 4)};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = sample_targets(cover, 6, seed);
    CHECK(out.size() == 6);
    std::set<NodeId> seen;
    for (const auto& t : out) {
      CHECK(seen.insert(t.target).second);
      CHECK(std::binary_search(t.community.begin(), t.community.end(), t.target));
    }
    CHECK(sample_targets(cover, 6, seed).front().target == out.front().target);
  }
  CHECK_THROWS_AS(sample_targets(CommunityCover{}, 3, 0), SamplingError);
}

TEST_CASE("sampler on the angel cover of kar") {
  DetectorConfig det;
  det.kind = DetectorKind::kAngel;
  const auto cover = detect(load_dataset("kar").graph, det);
  SampleInfo info;
  const auto out = sample_targets(cover, 25, 0, &info);
  std::set<NodeId> members;
  for (const auto& c : cover.communities) members.insert(c.begin(), c.end());
  CHECK(out.size() == std::min<std::size_t>(25, members.size()));
  CHECK(info.pool == members.size());
}

TEST_CASE("config parsing") {
  std::istringstream in(
      "# experiment\n"
      "dataset = kar\n"
      "test_detector = demon   # overlapping\n"
      "phi = 0.7\n"
      "beta_multiplier=2\n"
      "policy = degree\n"
      "lr = 0.001\n"
      "advantage_norm = episode\n");
  const ExperimentConfig c = parse_config(in);
  CHECK(c.test_detector.kind == DetectorKind::kDemon);
  CHECK(c.test_detector.phi == 0.7);
  CHECK(c.train_detector.phi == 0.7);
  CHECK(c.beta_multiplier == 2.0);
  CHECK(c.policy == "degree");
  CHECK(c.train.lr == 0.001);
  CHECK(c.train.advantage_norm == agent::AdvantageNorm::kEpisode);
  CHECK(c.setting() == Setting::kAsymmetric);

  for (const char* bad : {"colour = red\n", "tau = 1.5\n", "tau = 0.5x\n", "n_targets = -1\n",
                          "policy = magic\n", "just a line\n", "seed = 1e3\n", "phi = 0\n"}) {
    CAPTURE(bad);
    std::istringstream b(bad);
    CHECK_THROWS_AS(parse_config(b), ConfigError);
  }
}

TEST_CASE("config round trip") {
  ExperimentConfig c;
  c.dataset = "words";
  c.tau = 0.35;
  c.p = 0.1;
  c.lambda = 0.2;
  c.train.lr = 3e-4;
  c.seed = 123456789;
  c.checkpoint = "agent.json";
  std::stringstream buf;
  write_config(buf, c);
  const ExperimentConfig back = parse_config(buf);
  std::stringstream again;
  write_config(again, back);
  CHECK(again.str() == buf.str());
  CHECK(back.tau == c.tau);
  CHECK(back.train.lr == c.train.lr);
  CHECK(back.seed == c.seed);
}

TEST_CASE("csv and json round trips") {
  ExperimentConfig cfg;
  cfg.policy = "random";
  cfg.n_targets = 6;
  cfg.seed = 2;
  ResultsTable t;
  t.rows.push_back(run_experiment(cfg));
  cfg.policy = "degree";
  t.rows.push_back(run_experiment(cfg));

  std::stringstream csv;
  write_csv(csv, t);
  const std::string text = csv.str();
  const ResultsTable back = read_csv(csv);
  REQUIRE(back.rows.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& r = back.rows[i].report;
    CHECK(back.rows[i].policy == t.rows[i].policy);
    CHECK(r.sr == doctest::Approx(t.rows[i].report.sr).epsilon(1e-12));
    CHECK(r.f1 == doctest::Approx(harmonic_mean(r.sr, r.onmi_mean)).epsilon(1e-9));
  }
  std::stringstream again;
  write_csv(again, back);
  CHECK(again.str() == text);

  const nlohmann::json j = t;
  const ResultsTable from = j.get<ResultsTable>();
  CHECK(from.rows[1].records.size() == t.rows[1].records.size());
  CHECK(nlohmann::json(from) == j);

  std::istringstream bad_header("a,b\n");
  CHECK_THROWS_AS(read_csv(bad_header), ParseError);
  std::istringstream short_row(text.substr(0, text.find('\n') + 1) + "kar,1,2\n");
  CHECK_THROWS_AS(read_csv(short_row), ParseError);
}

TEST_CASE("experiments") {
  ExperimentConfig cfg;
  cfg.n_targets = 8;
  cfg.policy = "naive";
  const ResultRow naive = run_experiment(cfg);
  CHECK(naive.records.size() == 8);
  for (const auto& r : naive.records) CHECK(r.edits_used == 0);

  cfg.policy = "random";
  cfg.seed = 1;
  const ResultRow a = run_experiment(cfg);
  const ResultRow a2 = run_experiment(cfg);
  cfg.seed = 2;
  const ResultRow b = run_experiment(cfg);
  CHECK(nlohmann::json(a) == nlohmann::json(a2));
  CHECK(nlohmann::json(a) != nlohmann::json(b));
  double hits = 0;
  for (const auto& r : a.records) {
    hits += r.success;
    CHECK(r.edits_used <= a.beta);
    CHECK(r.onmi >= 0.0);
    CHECK(r.onmi <= 1.0 + 1e-12);
  }
  CHECK(a.report.sr == hits / static_cast<double>(a.records.size()));

  cfg.policy = "odrl";
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
  cfg.policy = "random";
  cfg.dataset = "no_such_graph";
  CHECK_THROWS_AS(run_experiment(cfg), ParseError);
}

TEST_CASE("png chart") {
  ExperimentConfig cfg;
  cfg.n_targets = 4;
  ResultsTable t;
  t.rows.push_back(run_experiment(cfg));
  const fs::path dir = scratch_dir("png");
  const fs::path out = dir / "chart.png";
  write_png_chart(out.string(), t);
  std::ifstream in(out, std::ios::binary);
  char magic[8] = {};
  in.read(magic, 8);
  CHECK(std::string(magic + 1, 3) == "PNG");
  CHECK_THROWS_AS(write_png_chart((dir / "missing" / "x.png").string(), t), IoError);
  CHECK_THROWS_AS(write_png_chart(out.string(), ResultsTable{}), ConfigError);
}

}  // TEST_SUITE
