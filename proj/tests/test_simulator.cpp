#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <random>

#include "cdpr/errors.hpp"
#include "cdpr/simulator.hpp"

using namespace cdpr;

namespace {

const RobotParams& params() {
  static const RobotParams p = RobotParams::defaults();
  return p;
}

const Trajectory& diamond() {
  static const Trajectory t = [] {
    DiamondOptions o;
    o.center = params().frame_centroid();
    return diamond_reference(o);
  }();
  return t;
}

const Trajectory& small_diamond() {
  static const Trajectory t = [] {
    DiamondOptions o;
    o.center = params().frame_centroid();
    o.area_w = 0.4;
    o.area_h = 0.3;
    o.n_rings = 1;
    o.hold = 0.2;
    return diamond_reference(o);
  }();
  return t;
}

const GainSchedule& small_schedule() {
  static const GainSchedule s =
      synthesize(params(), small_diamond(), LqgWeights::defaults()).schedule;
  return s;
}

SimLog log_from(const Trajectory& ref, double dt, const Vec6& offset) {
  SimLog log;
  log.dt_ctrl = dt;
  const auto n = static_cast<long>(std::floor(ref.duration() / dt));
  for (long i = 0; i < n; ++i) {
    SimRow r;
    r.t = i * dt;
    r.x = ref.at(r.t).state() + offset;
    log.rows.push_back(r);
  }
  return log;
}

Vec6 max_abs_diff(const SimLog& a, const SimLog& b) {
  Vec6 d = Vec6::Zero();
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    d = d.cwiseMax((a.rows[i].x - b.rows[i].x).cwiseAbs());
  }
  return d;
}

bool identical(const SimLog& a, const SimLog& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const SimRow &p = a.rows[i], &q = b.rows[i];
    if (p.t != q.t || p.x != q.x || p.estimate != q.estimate || p.z != q.z ||
        p.torques != q.torques || p.tensions != q.tensions || p.flags != q.flags) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("NoiseConfig defaults and validation") {
  const NoiseConfig n = NoiseConfig::defaults();
  CHECK(n.meas_std_len == 0.0018);
  CHECK(n.meas_std_rate == 0.04);
  CHECK(n.torque_std == 0.059);
  CHECK(n.initial_std(1) == doctest::Approx(0.1));
  CHECK(n.initial_std(0) == doctest::Approx(0.0995).epsilon(1e-3));
  NoiseConfig bad = n;
  bad.torque_std = -1;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("noise.torque_std"), Error);
}

TEST_CASE("simulate: noiseless LQG replays the nominal over the diamond") {
  const SynthesisResult r = synthesize(params(), diamond(), LqgWeights::defaults());
  const SimLog log =
      simulate(params(), LqgController{&r.schedule}, diamond(), NoiseConfig::none());
  REQUIRE_FALSE(log.failed_tick);
  double worst = 0;
  for (const auto& row : log.rows) {
    const long k = schedule_index(r.schedule, row.t);
    if (static_cast<double>(k) * r.schedule.dt != row.t) continue;
    worst = std::max(worst, (row.x.segment<2>(1) - r.ilqr.nominal.x[k].segment<2>(1)).norm());
  }
  CHECK(worst < 1e-3);
  CHECK(log.rows.size() == static_cast<std::size_t>(std::floor(diamond().duration() * 1000 + 1e-9)));
}

TEST_CASE("simulate: noiseless baseline tracks the diamond") {
  const SimLog log = simulate(params(), BaselineController{}, diamond(), NoiseConfig::none());
  REQUIRE_FALSE(log.failed_tick);
  double worst = 0;
  for (const auto& row : log.rows) {
    worst = std::max(worst, (row.x - diamond().at(row.t).state()).head<3>().norm());
    CHECK((row.flags & kNoEstimate) != 0);
  }
  CHECK(worst < 5e-3);
}

TEST_CASE("simulate: seeded runs are bit-identical, seeds differ") {
  NoiseConfig n = NoiseConfig::defaults();
  n.seed = 42;
  const Controller lqg = LqgController{&small_schedule()};
  const SimLog a = simulate(params(), lqg, small_diamond(), n);
  const SimLog b = simulate(params(), lqg, small_diamond(), n);
  CHECK(identical(a, b));
  n.seed = 43;
  CHECK_FALSE(identical(a, simulate(params(), lqg, small_diamond(), n)));
}

TEST_CASE("simulate_batch: parallel equals serial bitwise") {
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  for (const Controller& c :
       {Controller{LqgController{&small_schedule()}}, Controller{BaselineController{}}}) {
    const auto par =
        simulate_batch(params(), c, small_diamond(), NoiseConfig::defaults(), seeds);
    const auto ser =
        simulate_batch_serial(params(), c, small_diamond(), NoiseConfig::defaults(), seeds);
    REQUIRE(par.size() == ser.size());
    for (std::size_t i = 0; i < par.size(); ++i) CHECK(identical(par[i], ser[i]));
  }
}

TEST_CASE("simulate: halving the substep changes little") {
  Rates fine;
  fine.substeps = 20;
  const SimLog a = simulate(params(), BaselineController{}, small_diamond(), NoiseConfig::none());
  const SimLog b =
      simulate(params(), BaselineController{}, small_diamond(), NoiseConfig::none(), fine);
  const Vec6 d = max_abs_diff(a, b);
  CHECK(d.head<3>().maxCoeff() < 1e-8);
  CHECK(d.tail<2>().maxCoeff() < 1e-8);
  // The stiff rotational mode makes the angular rate the least converged.
  CHECK(d(3) < 1e-6);
}

TEST_CASE("plant integration conserves energy when passive") {
  RobotParams p = params();
  p.gravity_enabled = false;
  p.viscous_friction = p.static_friction = 0;
  Vec6 x;
  x << 0.1, 1.3, 1.1, 0.5, 0.2, -0.1;
  const double e0 = mechanical_energy(p, PlatformState{x});
  for (int i = 0; i < 1000; ++i) x = integrate_rk4(p, x, Vec4::Zero(), Vec4::Zero(), 1e-3, 10);
  CHECK(std::abs(mechanical_energy(p, PlatformState{x}) - e0) < 1e-6 * e0);
}

TEST_CASE("simulate: errors and failure reporting") {
  CHECK_THROWS_AS(simulate(params(), LqgController{}, small_diamond(), NoiseConfig::none()),
                  Error);
  CHECK_THROWS_AS(simulate(params(), LqgController{&small_schedule()}, diamond(),
                           NoiseConfig::none()),
                  Error);
  Trajectory empty;
  empty.dt = 0.01;
  CHECK_THROWS_AS(simulate(params(), BaselineController{}, empty, NoiseConfig::none()), Error);

  GainSchedule wild = small_schedule();
  for (auto& st : wild.steps) st.K *= 1e6;
  NoiseConfig n = NoiseConfig::defaults();
  n.seed = 1;
  const SimLog log = simulate(params(), LqgController{&wild}, small_diamond(), n);
  REQUIRE(log.failed_tick.has_value());
  CHECK(log.rows.size() == static_cast<std::size_t>(*log.failed_tick) + 1);
  CHECK_FALSE(log.failure.empty());
}

TEST_CASE("rmsd_metrics: trivial logs") {
  const SimLog exact = log_from(small_diamond(), 1e-3, Vec6::Zero());
  CHECK(rmsd_metrics(exact, small_diamond()).norm() < 1e-12);
  const SimLog shifted = log_from(small_diamond(), 1e-3, Vec6(0, 0, 0.005, 0, 0, 0));
  const Vec6 m = rmsd_metrics(shifted, small_diamond());
  CHECK(m(2) == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(m(1) < 1e-9);
  const SimLog turned = log_from(small_diamond(), 1e-3, Vec6(2 * M_PI + 0.01, 0, 0, 0, 0, 0));
  CHECK(rmsd_metrics(turned, small_diamond())(0) ==
        doctest::Approx(0.01 * 180 / M_PI).epsilon(1e-6));
  CHECK_THROWS_AS(rmsd_metrics(exact, small_diamond(), 1e6), Error);
}

TEST_CASE("rmsd_metrics: matches a streaming recomputation") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 1);
  SimLog log = log_from(small_diamond(), 1e-3, Vec6::Zero());
  for (auto& r : log.rows) {
    for (int i = 0; i < 6; ++i) r.x(i) += 1e-3 * n(rng);
  }
  const Vec6 m = rmsd_metrics(log, small_diamond(), 0.5);
  // Running mean of squares, updated one sample at a time.
  Vec6 mean_sq = Vec6::Zero();
  double count = 0;
  for (const auto& r : log.rows) {
    if (r.t < 0.5) continue;
    const Vec6 e = r.x - small_diamond().at(r.t).state();
    count += 1;
    mean_sq += (e.cwiseAbs2() - mean_sq) / count;
  }
  Vec6 units;
  units << 180 / M_PI, 1e3, 1e3, 180 / M_PI, 1e3, 1e3;
  const Vec6 expected = mean_sq.cwiseSqrt().cwiseProduct(units);
  CHECK(((m - expected).array().abs() / expected.array()).maxCoeff() < 1e-12);
}

TEST_CASE("rmsd_metrics: center window") {
  SimLog log = log_from(small_diamond(), 1e-3, Vec6::Zero());
  // Window around the +x vertex of the small diamond.
  const Vec2 c = params().frame_centroid() + Vec2(0.2, 0);
  for (auto& r : log.rows) {
    if (!Rect{c.array() - 0.05, c.array() + 0.05}.contains(small_diamond().at(r.t).pose.tail<2>())) {
      r.x(1) += 0.01;
    }
  }
  CHECK(rmsd_metrics(log, small_diamond(), 0.0)(1) > 1.0);
  const Vec6 m = rmsd_metrics(log, small_diamond(), 0.0, Rect{c.array() - 0.05, c.array() + 0.05});
  CHECK(m(1) < 1e-9);
}

TEST_CASE("SimLog CSV round trip") {
  NoiseConfig n = NoiseConfig::defaults();
  n.seed = 5;
  const SimLog a = simulate(params(), LqgController{&small_schedule()}, small_diamond(), n);
  const std::string path = "test_simulator_log.csv";
  save_simlog(path, a);
  const SimLog b = load_simlog(path);
  std::remove(path.c_str());
  CHECK(identical(a, b));
  CHECK(b.dt_ctrl == doctest::Approx(1e-3));
  CHECK_THROWS_AS(load_simlog("no/such/log.csv"), IoError);
}
