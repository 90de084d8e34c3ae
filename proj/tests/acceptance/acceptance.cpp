// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when a criterion fails that is not on the known-red list.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "cmh/agent/ppo.hpp"
#include "cmh/baselines.hpp"
#include "cmh/errors.hpp"
#include "cmh/harness.hpp"
#include "cmh/metrics.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace cmh;
namespace fs = std::filesystem;

namespace {

// Tolerances and sizes.
constexpr double kOracleTol = 1e-9;
constexpr double kC1Seconds = 10.0;
constexpr double kC2Seconds = 30.0;
constexpr int kC3States = 1000;
constexpr double kC3SumTol = 1e-6;
constexpr double kC4GradTol = 1e-4;
constexpr double kC4Seconds = 120.0;
constexpr int kC5Episodes = 10000;
constexpr int kSeeds = 10;
constexpr double kNaiveGap = 0.15;
constexpr int kC8Episodes = 1500;
constexpr double kC8MinSr = 0.8;
constexpr double kC9MinSr = 0.5;

struct Outcome {
  bool pass = false;
  std::string detail;
  std::string known_red;   // non-empty: failure is expected for this reason
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

NodeSet all_nodes(int n) {
  NodeSet u;
  for (int i = 0; i < n; ++i) u.push_back(i);
  return u;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double worst_dice = 0.0, worst_onmi = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int n = 2 + static_cast<int>(rng() % 11);
    const auto xs = oracle::random_cover(rng, n, 4);
    const auto ys = oracle::random_cover(rng, n, 4);
    worst_onmi = std::max(worst_onmi, std::abs(onmi(oracle::to_cover(xs), oracle::to_cover(ys), all_nodes(n)) -
                                               oracle::onmi(xs, ys, n)));
    for (auto a : xs) {
      for (auto b : ys) {
        worst_dice = std::max(worst_dice, std::abs(dice(oracle::to_set(a), oracle::to_set(b)) - oracle::dice(a, b)));
      }
    }
  }
  CommunityCover x;
  x.communities = {{0, 1, 2}, {2, 3, 4, 5}, {6, 7}};
  const double d = dice({1, 2}, {2, 3});
  const double self = onmi(x, x, all_nodes(8));
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst_dice <= kOracleTol && worst_onmi <= kOracleTol && d == 0.5 &&
           std::abs(self - 1.0) <= kOracleTol && secs < kC1Seconds;
  o.detail = "max|dice err|=" + fmt("%.2e", worst_dice) + " max|onmi err|=" + fmt("%.2e", worst_onmi) +
             " dice({1,2},{2,3})=" + fmt("%.3f", d) + " onmi(X,X)=" + fmt("%.12f", self) + " " +
             fmt("%.2fs", secs);
  return o;
}

Outcome criterion2() {
  const auto t0 = Clock::now();
  // Vacuous case: the target sits in no community.
  CommunityCover empty_for_u;
  empty_for_u.communities = {{1, 2, 3}};
  bool vacuous = is_hidden({0, 1, 2}, empty_for_u, 0, 0.0) && is_hidden({0, 1, 2}, CommunityCover{}, 0, 0.5);

  // Every cover of 6 nodes with at most 3 distinct non-empty communities,
  // every target and every original community holding the target.
  constexpr int n = 6;
  constexpr oracle::Mask full = (1u << n) - 1;
  std::vector<NodeSet> sets(full + 1);
  for (oracle::Mask m = 1; m <= full; ++m) sets[m] = oracle::to_set(m);
  long checked = 0, mismatches = 0;
  const double taus[] = {0.3, 0.5};
  auto check_cover = [&](const std::vector<oracle::Mask>& masks) {
    CommunityCover cover;
    for (auto m : masks) cover.communities.push_back(sets[m]);
    for (int u = 0; u < n; ++u) {
      for (oracle::Mask c = 1; c <= full; ++c) {
        if (!(c & (1u << u))) continue;
        for (double tau : taus) {
          ++checked;
          if (is_hidden(sets[c], cover, u, tau) != oracle::is_hidden(c, masks, u, tau)) ++mismatches;
        }
      }
    }
  };
  check_cover({});
  for (oracle::Mask a = 1; a <= full; ++a) {
    check_cover({a});
    for (oracle::Mask b = a + 1; b <= full; ++b) {
      check_cover({a, b});
      for (oracle::Mask c = b + 1; c <= full; ++c) check_cover({a, b, c});
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = vacuous && mismatches == 0 && secs < kC2Seconds;
  o.detail = std::string("vacuous=") + (vacuous ? "true" : "false") + " cases=" + std::to_string(checked) +
             " mismatches=" + std::to_string(mismatches) + " " + fmt("%.2fs", secs);
  return o;
}

Graph random_graph(Rng& rng, int n, double p) {
  std::vector<NodeId> ids;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (int i = 0; i < n; ++i) ids.push_back(i);
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 2; j < n; ++j) {
      if (uniform01(rng) < p) edges.emplace_back(i, j);
    }
  }
  return Graph(ids, edges);
}

DetectorConfig louvain() {
  DetectorConfig d;
  d.kind = DetectorKind::kLouvain;
  return d;
}

Outcome criterion3() {
  Rng rng(33);
  const Graph kar = load_dataset("kar").graph;
  long bad_mask = 0, bad_sum = 0, bad_len = 0, branches = 0;
  double worst_sum = 0.0;
  for (int i = 0; i < kC3States; ++i) {
    const bool use_kar = i % 2 == 0;
    const Graph g = use_kar ? kar : random_graph(rng, 6 + static_cast<int>(uniform_index(rng, 15)), 0.25);
    EnvConfig ec;
    ec.k = uniform_index(rng, 5);
    ec.beta = 8;
    ec.tau = 0.0;
    ec.seed = rng();
    const NodeId target = static_cast<NodeId>(uniform_index(rng, g.n()));
    EnvState s = reset(g, target, louvain(), ec, NodeSet(g.ids().begin(), g.ids().end()));
    // A few random edits so masks differ from the fresh graph.
    const int edits = static_cast<int>(uniform_index(rng, 4));
    for (int e = 0; e < edits && !s.done; ++e) {
      const int a = static_cast<int>(uniform_index(rng, s.num_actors()));
      const auto ends = endpoints(s, a);
      step(s, toggle_action(s, a, ends[uniform_index(rng, ends.size())]));
    }
    agent::AgentParams params(agent::AgentShape{8, s.num_actors(), s.graph.n()}, rng());
    for (auto& p : params.tensors()) {
      for (Eigen::Index j = 0; j < p.value.size(); ++j) p.value(j) += 0.5 * (2.0 * uniform01(rng) - 1.0);
    }
    const agent::Observation obs = agent::observe(s);
    const agent::Probabilities pr = agent::policy_probs(params, obs, agent::Matrix::Zero(1, 8));
    const std::size_t expect_len = 2 * (s.graph.n() - 1);
    double node_total = 0.0;
    for (double p : pr.node) node_total += p;
    worst_sum = std::max(worst_sum, std::abs(node_total - 1.0));
    if (std::abs(node_total - 1.0) > kC3SumTol) ++bad_sum;
    for (std::size_t a = 0; a < pr.actor.size(); ++a) {
      ++branches;
      if (pr.actor[a].size() != expect_len || obs.masks[a].size() != expect_len) ++bad_len;
      double total = 0.0;
      for (std::size_t j = 0; j < pr.actor[a].size(); ++j) {
        if (!obs.masks[a][j] && pr.actor[a][j] != 0.0) ++bad_mask;
        total += pr.actor[a][j];
      }
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
      if (std::abs(total - 1.0) > kC3SumTol) ++bad_sum;
    }
  }
  Outcome o;
  o.pass = bad_mask == 0 && bad_sum == 0 && bad_len == 0;
  o.detail = "states=" + std::to_string(kC3States) + " actor branches=" + std::to_string(branches) +
             " masked nonzero=" + std::to_string(bad_mask) + " max|sum-1|=" + fmt("%.2e", worst_sum) +
             " wrong lengths=" + std::to_string(bad_len);
  return o;
}

Outcome criterion4() {
  const auto t0 = Clock::now();
  const auto check = support::check_ppo_gradients(6, 2, 8, 3, 7);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = check.num_nodes == 8 && check.worst() <= kC4GradTol && secs < kC4Seconds;
  o.detail = "n=" + std::to_string(check.num_nodes) + " d_h=8 steps=" + std::to_string(check.steps);
  for (const auto& [group, err] : check.group_error) o.detail += " " + group + "=" + fmt("%.1e", err);
  o.detail += " " + fmt("%.1fs", secs);
  return o;
}

Outcome criterion5() {
  Rng rng(55);
  const Graph kar = load_dataset("kar").graph;
  long over_budget = 0, masked = 0, episodes = 0, steps_taken = 0, exhausted = 0;
  const std::vector<std::string> kinds{"random", "degree", "betweenness", "roam", "odrl"};
  std::vector<std::optional<agent::AgentParams>> nets(6);
  for (int e = 0; e < kC5Episodes; ++e) {
    const std::string& kind = kinds[static_cast<std::size_t>(e) % kinds.size()];
    EnvConfig ec;
    ec.k = uniform_index(rng, 6);
    ec.beta = 1 + static_cast<int>(uniform_index(rng, 7));
    // tau = 0 keeps most episodes running until the budget is spent.
    ec.tau = uniform01(rng) < 0.7 ? 0.0 : 0.2 + 0.6 * uniform01(rng);
    ec.seed = rng();
    const NodeId target = static_cast<NodeId>(uniform_index(rng, kar.n()));
    EnvState s = reset(kar, target, louvain(), ec, NodeSet(kar.ids().begin(), kar.ids().end()));
    std::unique_ptr<Policy> policy;
    if (kind == "odrl") {
      auto& net = nets[ec.k];
      if (!net) net.emplace(agent::AgentShape{8, ec.k + 1, kar.n() + ec.k}, 99 + ec.k);
      policy = std::make_unique<agent::OdrlPolicy>(*net, rng());
    } else {
      policy = make_heuristic(parse_heuristic_kind(kind), rng());
    }
    policy->begin_episode(s);
    int used = 0;
    while (!s.done) {
      const auto a = policy->act(s);
      if (!a) break;
      bool legal = false;
      if (a->source) {
        legal = is_valid(s, *a);
      } else {
        const auto mask = valid_action_mask(s, a->actor_index);
        legal = mask[logit_index_of(s, *a)] == 1;
      }
      if (!legal) {
        ++masked;
        break;
      }
      step(s, *a);
      ++used;
    }
    steps_taken += used;
    exhausted += s.budget_left == 0;
    if (used > ec.beta || static_cast<int>(s.edit_log.size()) > ec.beta || s.budget_left < 0) ++over_budget;
    ++episodes;
  }
  Outcome o;
  o.pass = over_budget == 0 && masked == 0;
  o.detail = "episodes=" + std::to_string(episodes) + " edits=" + std::to_string(steps_taken) +
             " budget exhausted=" + std::to_string(exhausted) +
             " over budget=" + std::to_string(over_budget) + " masked=" + std::to_string(masked);
  return o;
}

Outcome criterion6() {
  const Graph kar = load_dataset("kar").graph;
  struct Band {
    DetectorKind kind;
    int centre, tol;
  };
  const Band bands[] = {{DetectorKind::kDemon, 5, 2}, {DetectorKind::kAngel, 2, 1}, {DetectorKind::kLouvain, 4, 1}};
  Outcome o;
  o.pass = true;
  for (const auto& band : bands) {
    std::string counts;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      DetectorConfig dc;
      dc.kind = band.kind;
      dc.phi = 0.8;
      dc.seed = seed;
      const int c = static_cast<int>(detect(kar, dc).size());
      if (std::abs(c - band.centre) > band.tol) o.pass = false;
      counts += std::to_string(c);
    }
    o.detail += to_string(band.kind) + "=" + counts + " (" + std::to_string(band.centre) + "+/-" +
                std::to_string(band.tol) + ") ";
  }
  return o;
}

// Pooled SR of proxy injection alone over kSeeds master seeds.
double naive_sr(const std::string& dataset, DetectorKind detector) {
  ExperimentConfig cfg;
  cfg.dataset = dataset;
  cfg.policy = "naive";
  cfg.k_multiplier = 1.0;
  cfg.p = 0.5;
  cfg.tau = 0.5;
  cfg.test_detector.kind = detector;
  cfg.train_detector.kind = detector;
  std::vector<TrialRecord> all;
  for (int seed = 0; seed < kSeeds; ++seed) {
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto row = run_experiment(cfg);
    all.insert(all.end(), row.records.begin(), row.records.end());
  }
  return aggregate(all).sr;
}

Outcome criterion7() {
  Outcome o;
  o.pass = true;
  for (const std::string ds : {"kar", "words"}) {
    try {
      const double lv = naive_sr(ds, DetectorKind::kLouvain);
      const double an = naive_sr(ds, DetectorKind::kAngel);
      const double de = naive_sr(ds, DetectorKind::kDemon);
      const bool ok = lv - an >= kNaiveGap && lv - de >= kNaiveGap;
      o.pass = o.pass && ok;
      o.detail += ds + ": louvain=" + fmt("%.3f", lv) + " angel=" + fmt("%.3f", an) + " demon=" + fmt("%.3f", de) +
                  (ok ? " ok; " : " gap too small; ");
    } catch (const ParseError&) {
      o.pass = false;
      o.detail += ds + ": dataset not available; ";
      o.known_red = "the words graph is not bundled (place words.txt in the data directory)";
    }
  }
  return o;
}

struct Trained {
  agent::AgentState state;
  ExperimentConfig cfg;
};

Trained& criterion8_agent() {
  static Trained t = [] {
    ExperimentConfig cfg;
    cfg.dataset = "kar";
    cfg.train_detector.kind = DetectorKind::kAngel;
    cfg.test_detector.kind = DetectorKind::kAngel;
    cfg.beta_multiplier = 2.0;
    cfg.k_multiplier = 1.0;
    cfg.episodes = kC8Episodes;
    cfg.seed = 0;
    auto state = train_agent(cfg);
    return Trained{std::move(state), cfg};
  }();
  return t;
}

ResultRow evaluate(const ExperimentConfig& base, const std::string& policy, DetectorKind test,
                   const agent::AgentParams* params) {
  ExperimentConfig cfg = base;
  cfg.policy = policy;
  cfg.test_detector.kind = test;
  cfg.n_targets = 25;
  cfg.seed = 1000;   // evaluation targets and proxy wiring differ from training
  return run_experiment(cfg, params);
}

Outcome criterion8() {
  const auto t0 = Clock::now();
  Trained& t = criterion8_agent();
  const double train_secs = seconds_since(t0);
  const ResultRow odrl = evaluate(t.cfg, "odrl", DetectorKind::kAngel, &t.state.params);
  const ResultRow rnd = evaluate(t.cfg, "random", DetectorKind::kAngel, nullptr);
  Outcome o;
  o.pass = odrl.report.sr >= kC8MinSr && odrl.report.sr > rnd.report.sr;
  o.detail = "beta=" + std::to_string(odrl.beta) + " k=" + std::to_string(odrl.k) +
             " targets=" + std::to_string(odrl.records.size()) + " odrl SR=" + fmt("%.3f", odrl.report.sr) +
             " random SR=" + fmt("%.3f", rnd.report.sr) + " F1=" + fmt("%.3f", odrl.report.f1) +
             " train " + fmt("%.1fs", train_secs);
  if (odrl.records.size() < 25) o.detail += " (angel cover of kar has only " + std::to_string(odrl.records.size()) + " members)";
  return o;
}

Outcome criterion9() {
  Trained& t = criterion8_agent();
  const ResultRow odrl = evaluate(t.cfg, "odrl", DetectorKind::kDemon, &t.state.params);
  Outcome o;
  o.pass = odrl.report.sr >= kC9MinSr;
  o.detail = "odrl trained on angel, tested on demon: SR=" + fmt("%.3f", odrl.report.sr) +
             " targets=" + std::to_string(odrl.records.size());
  return o;
}

#ifdef CMH_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(CMH_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
#endif

Outcome criterion10() {
  Outcome o;
#ifdef CMH_CLI_PATH
  const fs::path dir = fs::temp_directory_path() / "cmh_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const std::string& name) { return (dir / name).string(); };
  int failures = 0;
  std::vector<std::string> compared;
  for (const std::string run : {"1", "2"}) {
    failures += run_cli("train --dataset kar --beta-mult 1 --k-mult 1 --episodes 30 --seed 7 --quiet --out " +
                        p("agent" + run + ".json")) != 0;
    failures += run_cli("eval --ckpt " + p("agent" + run + ".json") + " --grid --n-targets 5 --seed 3 --csv " +
                        p("eval" + run + ".csv")) != 0;
    failures += run_cli("naive --dataset kar --seeds 2 --n-targets 5 --csv " + p("naive" + run + ".csv")) != 0;
  }
  bool same = failures == 0;
  for (const std::string name : {"agent", "eval", "naive"}) {
    const std::string ext = name == "agent" ? ".json" : ".csv";
    const std::string a = slurp(dir / (name + "1" + ext)), b = slurp(dir / (name + "2" + ext));
    if (a.empty() || a != b) same = false;
    compared.push_back(name + ext + " " + std::to_string(a.size()) + "B");
  }
  o.pass = same;
  o.detail = "exit failures=" + std::to_string(failures) + " compared:";
  for (const auto& c : compared) o.detail += " " + c;
#else
  o.detail = "cmh tool not built";
#endif
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 dice/onmi oracles", criterion1},
      {"2 hiding predicate", criterion2},
      {"3 masked factored policy", criterion3},
      {"4 gradient check", criterion4},
      {"5 budget and mask safety", criterion5},
      {"6 detector community counts", criterion6},
      {"7 naive injection vs detectors", criterion7},
      {"8 agent on kar vs angel", criterion8},
      {"9 transfer to demon", criterion9},
      {"10 reproducible CLI output", criterion10},
  };
  int unexpected = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    if (!o.pass) {
      if (o.known_red.empty()) {
        ++unexpected;
      } else {
        std::printf("     known red: %s\n", o.known_red.c_str());
      }
    }
    std::fflush(stdout);
  }
  return unexpected == 0 ? 0 : 1;
}
