#include <benchmark/benchmark.h>

#include "cmh/agent/ppo.hpp"
#include "cmh/harness.hpp"

using namespace cmh;

namespace {

const Graph& kar() {
  static const Graph g = load_dataset("kar").graph;
  return g;
}

void BM_Detect(benchmark::State& state) {
  DetectorConfig dc;
  dc.kind = static_cast<DetectorKind>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(detect(kar(), dc));
  state.SetLabel(dc.name());
}
BENCHMARK(BM_Detect)->Arg(static_cast<int>(DetectorKind::kDemon))
    ->Arg(static_cast<int>(DetectorKind::kAngel))
    ->Arg(static_cast<int>(DetectorKind::kLouvain));

void BM_EnvStep(benchmark::State& state) {
  DetectorConfig dc;
  dc.kind = DetectorKind::kAngel;
  EnvConfig ec;
  ec.k = 3;
  ec.beta = 1;
  ec.tau = 0.0;   // keep the target visible so episodes run
  const EnvState fresh = reset(kar(), 0, dc, ec);
  for (auto _ : state) {
    EnvState s = fresh;
    benchmark::DoNotOptimize(step(s, toggle_action(s, 0, 9)));
  }
}
BENCHMARK(BM_EnvStep);

void BM_PolicyForward(benchmark::State& state) {
  DetectorConfig dc;
  dc.kind = DetectorKind::kLouvain;
  EnvConfig ec;
  ec.k = 3;
  ec.beta = 7;
  ec.tau = 0.0;   // keep the target visible so episodes run
  const EnvState s = reset(kar(), 0, dc, ec);
  const int d_h = static_cast<int>(state.range(0));
  agent::AgentParams params(agent::AgentShape{d_h, s.num_actors(), s.graph.n()}, 1);
  const agent::Observation obs = agent::observe(s);
  const agent::Matrix h = agent::Matrix::Zero(1, d_h);
  for (auto _ : state) benchmark::DoNotOptimize(agent::decide(params, obs, h, nullptr));
}
BENCHMARK(BM_PolicyForward)->Arg(8)->Arg(32);

void BM_PpoUpdate(benchmark::State& state) {
  DetectorConfig dc;
  dc.kind = DetectorKind::kLouvain;
  EnvConfig ec;
  ec.k = 3;
  ec.beta = 7;
  ec.tau = 0.0;   // keep the target visible so episodes run
  EnvState s = reset(kar(), 0, dc, ec);
  agent::TrainConfig cfg;
  agent::AgentState agent = agent::make_agent(agent::AgentShape{cfg.d_h, s.num_actors(), s.graph.n()}, cfg);
  agent::Trajectory traj;
  agent::Matrix h = agent::Matrix::Zero(1, cfg.d_h);
  while (!s.done) {
    agent::Observation obs = agent::observe(s);
    const auto d = agent::decide(agent.params, obs, h, &agent.rng);
    const auto r = step(s, action_from_logit(s, d.actor, d.logit));
    h = d.hidden;
    traj.push_back({std::move(obs), d.actor, d.logit, d.logp_node, d.logp_actor, r.reward, d.value, r.done});
  }
  for (auto _ : state) benchmark::DoNotOptimize(agent::ppo_update(agent, traj, 1e-3));
  state.counters["steps"] = static_cast<double>(traj.size());
}
BENCHMARK(BM_PpoUpdate)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
