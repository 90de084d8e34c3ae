#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

#ifdef CMH_CLI_PATH

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path p = fs::temp_directory_path() / "cmh_unit_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

// Runs the CLI with stdout and stderr captured to files; returns the exit code.
int cli(const std::string& args, const std::string& tag = "last") {
  const std::string cmd = std::string(CMH_CLI_PATH) + " " + args + " > " + (workdir() / (tag + ".out")).string() +
                          " 2> " + (workdir() / (tag + ".err")).string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("detect prints one community per line") {
  CHECK(cli("detect kar --algo louvain --seed 0", "detect") == 0);
  const std::string out = slurp(workdir() / "detect.out");
  CHECK(std::count(out.begin(), out.end(), '\n') >= 2);
  CHECK(slurp(workdir() / "detect.err").find("communities") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(cli("detect nosuch_dataset") == 3);
  CHECK(cli("detect kar --algo bogus") == 2);
  CHECK(cli("detect kar --phi notanumber") == 2);
  CHECK(cli("--no-such-flag") == 2);
  CHECK(cli("eval --ckpt " + path("missing.json")) == 2);
  CHECK(cli("run") == 2);

  { std::ofstream(path("bad.cfg")) << "colour = blue\n"; }
  CHECK(cli("--config " + path("bad.cfg") + " run") == 2);

  { std::ofstream(path("broken.txt")) << "1 2\nthree four\n"; }
  CHECK(cli("detect " + path("broken.txt")) == 3);

  { std::ofstream(path("garbage.csv")) << "not,a,results,file\n"; }
  CHECK(cli("report --in " + path("garbage.csv") + " --format csv") == 3);
}

TEST_CASE("data directory from the environment") {
  const fs::path data = workdir() / "data";
  fs::create_directories(data);
  { std::ofstream(data / "pair.txt") << "1 2\n2 3\n3 1\n3 4\n4 5\n5 6\n6 4\n"; }
  const std::string cmd = "CMH_DATA_DIR=" + data.string() + " " + std::string(CMH_CLI_PATH) +
                          " detect pair --algo louvain > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(cli("--data-dir " + data.string() + " detect pair --algo louvain") == 0);
}

TEST_CASE("run, report csv and png") {
  { std::ofstream(path("run.cfg")) << "policy = degree\nn_targets = 5\nseed = 3\n"; }
  REQUIRE(cli("--config " + path("run.cfg") + " run --json " + path("run.json") + " --csv " + path("run.csv")) == 0);
  const auto j = nlohmann::json::parse(slurp(workdir() / "run.json"));
  CHECK(j["rows"].size() == 1);
  CHECK(j["rows"][0]["policy"] == "degree");

  REQUIRE(cli("report --in " + path("run.json") + " --format csv --out " + path("report.csv")) == 0);
  CHECK(slurp(workdir() / "report.csv") == slurp(workdir() / "run.csv"));
  REQUIRE(cli("report --in " + path("run.csv") + " --format png --out " + path("report.png")) == 0);
  CHECK(slurp(workdir() / "report.png").substr(1, 3) == "PNG");
}

TEST_CASE("train then eval with identical seeds is byte identical") {
  const std::string train = "train --dataset kar --beta-mult 1 --k-mult 1 --episodes 5 --seed 4 --quiet --out ";
  REQUIRE(cli(train + path("a.ckpt")) == 0);
  REQUIRE(cli(train + path("b.ckpt")) == 0);
  CHECK(slurp(workdir() / "a.ckpt") == slurp(workdir() / "b.ckpt"));
  REQUIRE(cli("eval --ckpt " + path("a.ckpt") + " --n-targets 4 --seed 1 --csv " + path("a.csv")) == 0);
  REQUIRE(cli("eval --ckpt " + path("b.ckpt") + " --n-targets 4 --seed 1 --csv " + path("b.csv")) == 0);
  const std::string a = slurp(workdir() / "a.csv");
  CHECK(a == slurp(workdir() / "b.csv"));
  CHECK(a.find(",odrl,") != std::string::npos);
}

}  // TEST_SUITE

#else

TEST_SUITE("cli") {
TEST_CASE("cli not built") { MESSAGE("cmh tool not built; skipping"); }
}

#endif
