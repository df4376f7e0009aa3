#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cdpr/simulator.hpp"
#include "cdpr/synthesis.hpp"

using namespace cdpr;

namespace {

const RobotParams& params() {
  static const RobotParams p = RobotParams::defaults();
  return p;
}

Trajectory diamond(int rings, double w, double h) {
  DiamondOptions o;
  o.center = params().frame_centroid();
  o.n_rings = rings;
  o.area_w = w;
  o.area_h = h;
  return diamond_reference(o);
}

// Reference states with gravity-compensating torques: the same workload as an
// iLQR linearization pass over the full diamond.
struct LinearizationInput {
  DiscreteModel model = robot_model(params(), 0.01);
  std::vector<Vec6> x;
  std::vector<Vec4> u;

  LinearizationInput() {
    const Trajectory ref = diamond(4, 1.5, 1.0);
    for (const auto& s : ref.samples) x.push_back(s.state());
    u = static_torques(params(), ref);
    x.pop_back();
    u.pop_back();
  }
};

const LinearizationInput& lin_input() {
  static const LinearizationInput in;
  return in;
}

void BM_LinearizeTrajectorySerial(benchmark::State& state) {
  const auto& in = lin_input();
  for (auto _ : state) {
    benchmark::DoNotOptimize(linearize_trajectory_serial(in.model, in.x, in.u));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(in.x.size()));
}

void BM_LinearizeTrajectoryParallel(benchmark::State& state) {
  const auto& in = lin_input();
  for (auto _ : state) benchmark::DoNotOptimize(linearize_trajectory(in.model, in.x, in.u));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(in.x.size()));
}

const Trajectory& short_diamond() {
  static const Trajectory t = diamond(1, 0.4, 0.3);
  return t;
}

std::vector<std::uint64_t> seeds(int n) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < n; ++i) s.push_back(static_cast<std::uint64_t>(i + 1));
  return s;
}

void BM_SimulateBatchSerial(benchmark::State& state) {
  const auto s = seeds(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_batch_serial(params(), BaselineController{},
                                                   short_diamond(), NoiseConfig::defaults(), s));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SimulateBatchParallel(benchmark::State& state) {
  const auto s = seeds(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_batch(params(), BaselineController{}, short_diamond(),
                                            NoiseConfig::defaults(), s));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

// Online hot path: one schedule update followed by nine held ticks.
void BM_TvlqgTick(benchmark::State& state) {
  static const SynthesisResult r =
      synthesize(params(), short_diamond(), LqgWeights::defaults());
  const GainSchedule& s = r.schedule;
  TvLqgState st;
  long tick = 0;
  const long ticks = static_cast<long>(s.horizon()) * 10;
  for (auto _ : state) {
    if (tick == ticks) {
      st = TvLqgState{};
      tick = 0;
    }
    const double t = static_cast<double>(tick) * 1e-3;
    benchmark::DoNotOptimize(tvlqg_step(s, st, s.steps[tick / 10].z_nom, t));
    ++tick;
  }
}

}  // namespace

BENCHMARK(BM_LinearizeTrajectorySerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LinearizeTrajectoryParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_SimulateBatchSerial)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateBatchParallel)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_TvlqgTick);

int main(int argc, char** argv) {
#ifdef _OPENMP
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
#endif
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
