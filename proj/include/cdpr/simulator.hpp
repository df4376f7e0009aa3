#pragma once

// Closed-loop simulation: 1 kHz control ticks, RK4 substeps of the plant,
// Gaussian sensor noise and torque disturbances.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cdpr/controllers.hpp"
#include "cdpr/model.hpp"
#include "cdpr/synthesis.hpp"
#include "cdpr/trajectory.hpp"

namespace cdpr {

struct NoiseConfig {
  double meas_std_len = 0.0018;   // m
  double meas_std_rate = 0.04;    // m/s
  double torque_std = 0.059;      // N m
  Vec6 initial_std = Vec6::Zero();
  std::uint64_t seed = 0;

  /// Reference noise levels, initial_std from the default Sigma_0.
  static NoiseConfig defaults();
  static NoiseConfig none();
  void validate() const;
};

struct Rates {
  double ctrl_hz = 1000;
  int substeps = 10;
};

struct LqgController {
  const GainSchedule* schedule = nullptr;
  Decimation decimation = Decimation::Mean;
};

struct BaselineController {
  BaselineGains gains;
};

using Controller = std::variant<LqgController, BaselineController>;

enum SimFlag : unsigned {
  kTensionOutOfLimits = 1,
  kTensionInfeasible = 2,
  kBeyondHorizon = 4,
  kNoEstimate = 8,
};

struct SimRow {
  double t = 0;
  Vec6 x = Vec6::Zero();
  Vec6 estimate = Vec6::Zero();
  Vec8 z = Vec8::Zero();
  Vec4 torques = Vec4::Zero();
  Vec4 tensions = Vec4::Zero();
  unsigned flags = 0;
};

struct SimLog {
  double dt_ctrl = 0;
  std::vector<SimRow> rows;
  /// Tick at which the plant state stopped being finite; rows hold the
  /// partial log up to that tick.
  std::optional<long> failed_tick;
  std::string failure;

  double duration() const;
};

/// Ticks at t_i = i / ctrl_hz for i < floor(T ctrl_hz). Random draws from one
/// mt19937_64 stream in the order: initial perturbation (6), then per tick
/// measurement noise (8) and torque disturbance (4).
SimLog simulate(const RobotParams& params, const Controller& controller,
                const Trajectory& reference, const NoiseConfig& noise,
                const Rates& rates = {});

/// One simulation per seed; OpenMP-parallel over seeds.
std::vector<SimLog> simulate_batch(const RobotParams& params, const Controller& controller,
                                   const Trajectory& reference, const NoiseConfig& noise,
                                   const std::vector<std::uint64_t>& seeds,
                                   const Rates& rates = {});
std::vector<SimLog> simulate_batch_serial(const RobotParams& params,
                                          const Controller& controller,
                                          const Trajectory& reference,
                                          const NoiseConfig& noise,
                                          const std::vector<std::uint64_t>& seeds,
                                          const Rates& rates = {});

struct Rect {
  Vec2 lo;
  Vec2 hi;
  bool contains(const Vec2& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

/// RMS of true state minus interpolated reference over rows with
/// t >= skip_initial (and reference position inside `center`, if given).
/// The angle error is wrapped to [-pi, pi]. Units: [deg, mm, mm, deg/s,
/// mm/s, mm/s].
Vec6 rmsd_metrics(const SimLog& log, const Trajectory& reference, double skip_initial = 1.0,
                  const std::optional<Rect>& center = std::nullopt);

void save_simlog(const std::string& path, const SimLog& log);
SimLog load_simlog(const std::string& path);

}  // namespace cdpr
