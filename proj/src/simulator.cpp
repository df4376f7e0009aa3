#include "cdpr/simulator.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "cdpr/errors.hpp"
#include "csv.hpp"

namespace cdpr {

namespace {

constexpr const char* kSimLogHeader =
    "t,theta,x,y,dtheta,dx,dy,est_theta,est_x,est_y,est_dtheta,est_dx,est_dy,"
    "z1,z2,z3,z4,z5,z6,z7,z8,tau1,tau2,tau3,tau4,ten1,ten2,ten3,ten4,flags";
constexpr std::size_t kSimLogColumns = 30;

// Per-run controller state; the Controller argument itself stays immutable.
struct ControllerRun {
  const Controller& setup;
  TvLqgState lqg;
  MeasurementWindow window;
  BaselineGains baseline;

  explicit ControllerRun(const Controller& c) : setup(c) {
    if (const auto* b = std::get_if<BaselineController>(&c)) baseline = b->gains;
  }
};

}  // namespace

NoiseConfig NoiseConfig::defaults() {
  NoiseConfig n;
  n.initial_std = initial_state_std();
  return n;
}

NoiseConfig NoiseConfig::none() {
  NoiseConfig n;
  n.meas_std_len = n.meas_std_rate = n.torque_std = 0;
  return n;
}

void NoiseConfig::validate() const {
  const auto check = [](bool ok, const char* key) {
    if (!ok) throw Error(std::string("noise.") + key + ": must be finite and >= 0");
  };
  check(std::isfinite(meas_std_len) && meas_std_len >= 0, "meas_std_len");
  check(std::isfinite(meas_std_rate) && meas_std_rate >= 0, "meas_std_rate");
  check(std::isfinite(torque_std) && torque_std >= 0, "torque_std");
  check(initial_std.allFinite() && (initial_std.array() >= 0).all(), "initial_std");
}

double SimLog::duration() const { return rows.empty() ? 0.0 : rows.back().t - rows.front().t; }

SimLog simulate(const RobotParams& params, const Controller& controller,
                const Trajectory& reference, const NoiseConfig& noise, const Rates& rates) {
  noise.validate();
  if (!(rates.ctrl_hz > 0) || rates.substeps < 1) {
    throw Error("rates: ctrl_hz must be > 0 and substeps >= 1");
  }
  if (reference.samples.empty() || !(reference.duration() > 0)) {
    throw Error("simulate: reference has zero duration");
  }
  const double dt = 1.0 / rates.ctrl_hz;
  const auto ticks = static_cast<long>(std::floor(reference.duration() * rates.ctrl_hz + 1e-9));

  const GainSchedule* schedule = nullptr;
  Decimation decimation = Decimation::Mean;
  if (const auto* l = std::get_if<LqgController>(&controller)) {
    schedule = l->schedule;
    decimation = l->decimation;
    if (!schedule || schedule->steps.empty()) throw Error("simulate: missing gain schedule");
    if (schedule->duration() + schedule->dt < reference.duration()) {
      throw Error("simulate: gain schedule is shorter than the reference");
    }
  }

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Vec6 x = reference.samples.front().state();
  for (int i = 0; i < kStateDim; ++i) x(i) += noise.initial_std(i) * normal(rng);

  ControllerRun run(controller);
  SimLog log;
  log.dt_ctrl = dt;
  log.rows.reserve(static_cast<std::size_t>(ticks));

  for (long i = 0; i < ticks; ++i) {
    SimRow row;
    row.t = static_cast<double>(i) * dt;
    row.x = x;
    try {
      row.z = measurement_model(params, PlatformState{x});
      for (int c = 0; c < 4; ++c) row.z(c) += noise.meas_std_len * normal(rng);
      for (int c = 4; c < 8; ++c) row.z(c) += noise.meas_std_rate * normal(rng);
      Vec4 d;
      for (int c = 0; c < 4; ++c) d(c) = noise.torque_std * normal(rng);

      if (schedule) {
        row.torques =
            tvlqg_control(*schedule, run.lqg, run.window, row.z, row.t, decimation);
        row.estimate = tvlqg_estimate(*schedule, run.lqg);
        if (run.lqg.beyond_horizon) row.flags |= kBeyondHorizon;
      } else {
        const BaselineOutput b =
            baseline_step(params, run.baseline, row.z, reference.at(row.t), dt);
        row.torques = b.torques;
        row.flags |= kNoEstimate;
        if (b.tension_infeasible) row.flags |= kTensionInfeasible;
      }

      const DynamicsResult dyn = forward_dynamics(params, PlatformState{x}, row.torques, d);
      row.tensions = dyn.tensions;
      if (dyn.tension_out_of_limits) row.flags |= kTensionOutOfLimits;
      log.rows.push_back(row);

      x = integrate_rk4(params, x, row.torques, d, dt, rates.substeps);
      if (!x.allFinite()) throw NumericalError("plant state is not finite", i);
    } catch (const Error& e) {
      log.failed_tick = i;
      log.failure = e.what();
      return log;
    }
  }
  return log;
}

std::vector<SimLog> simulate_batch(const RobotParams& params, const Controller& controller,
                                   const Trajectory& reference, const NoiseConfig& noise,
                                   const std::vector<std::uint64_t>& seeds,
                                   const Rates& rates) {
  std::vector<SimLog> logs(seeds.size());
  const auto n = static_cast<long>(seeds.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    NoiseConfig nc = noise;
    nc.seed = seeds[static_cast<std::size_t>(i)];
    logs[static_cast<std::size_t>(i)] = simulate(params, controller, reference, nc, rates);
  }
  return logs;
}

std::vector<SimLog> simulate_batch_serial(const RobotParams& params,
                                          const Controller& controller,
                                          const Trajectory& reference,
                                          const NoiseConfig& noise,
                                          const std::vector<std::uint64_t>& seeds,
                                          const Rates& rates) {
  std::vector<SimLog> logs;
  logs.reserve(seeds.size());
  for (const auto seed : seeds) {
    NoiseConfig nc = noise;
    nc.seed = seed;
    logs.push_back(simulate(params, controller, reference, nc, rates));
  }
  return logs;
}

Vec6 rmsd_metrics(const SimLog& log, const Trajectory& reference, double skip_initial,
                  const std::optional<Rect>& center) {
  Vec6 sum = Vec6::Zero();
  std::size_t count = 0;
  for (const auto& row : log.rows) {
    if (row.t < skip_initial) continue;
    const TrajectorySample ref = reference.at(row.t);
    if (center && !center->contains(ref.pose.tail<2>())) continue;
    Vec6 e = row.x - ref.state();
    e(0) = std::remainder(e(0), 2 * M_PI);
    sum += e.cwiseAbs2();
    ++count;
  }
  if (count == 0) throw Error("rmsd_metrics: empty evaluation window");
  Vec6 scale;
  const double deg = 180.0 / M_PI;
  scale << deg, 1e3, 1e3, deg, 1e3, 1e3;
  return (sum / static_cast<double>(count)).cwiseSqrt().cwiseProduct(scale);
}

void save_simlog(const std::string& path, const SimLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << kSimLogHeader << '\n';
  std::string line;
  for (const auto& r : log.rows) {
    line.clear();
    csv::append(line, r.t);
    for (int i = 0; i < 6; ++i) csv::append(line, r.x(i));
    for (int i = 0; i < 6; ++i) csv::append(line, r.estimate(i));
    for (int i = 0; i < 8; ++i) csv::append(line, r.z(i));
    for (int i = 0; i < 4; ++i) csv::append(line, r.torques(i));
    for (int i = 0; i < 4; ++i) csv::append(line, r.tensions(i));
    csv::append(line, static_cast<long>(r.flags));
    out << line << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

SimLog load_simlog(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || csv::strip_cr(line) != kSimLogHeader) {
    throw FormatError(path + ":1: malformed header");
  }
  SimLog log;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::strip_cr(line).empty()) continue;
    const auto v = csv::parse_row(line, kSimLogColumns, path, lineno);
    SimRow r;
    r.t = v[0];
    for (int i = 0; i < 6; ++i) r.x(i) = v[1 + i];
    for (int i = 0; i < 6; ++i) r.estimate(i) = v[7 + i];
    for (int i = 0; i < 8; ++i) r.z(i) = v[13 + i];
    for (int i = 0; i < 4; ++i) r.torques(i) = v[21 + i];
    for (int i = 0; i < 4; ++i) r.tensions(i) = v[25 + i];
    if (v[29] < 0 || v[29] != std::floor(v[29])) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": flags must be an integer");
    }
    r.flags = static_cast<unsigned>(v[29]);
    if (!log.rows.empty() && !(r.t > log.rows.back().t)) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": time is not increasing");
    }
    log.rows.push_back(r);
  }
  if (log.rows.empty()) throw FormatError(path + ": no rows");
  log.dt_ctrl = log.rows.size() > 1 ? log.rows[1].t - log.rows[0].t : 0.0;
  return log;
}

}  // namespace cdpr
