#pragma once

// Online controllers: the schedule-driven TV-LQG loop and the joint-space
// PID baseline with inertial and friction feedforward.

#include <cstdint>

#include "cdpr/model.hpp"
#include "cdpr/synthesis.hpp"
#include "cdpr/trajectory.hpp"
#include "cdpr/types.hpp"

namespace cdpr {

struct TvLqgState {
  /// Offline step of the last estimator update, -1 before the first.
  long k = -1;
  Vec6 delta_xhat = Vec6::Zero();
  /// K_k delta_xhat, reused between estimator updates.
  Vec4 feedback = Vec4::Zero();
  Vec4 last_u = Vec4::Zero();
  bool beyond_horizon = false;
};

/// Counts hot-path linear algebra when passed to tvlqg_step.
struct OpCounter {
  int matvec = 0;
  int vecadd = 0;
};

/// One control tick at online time t. The estimator advances once per
/// offline step: when floor(t / dt) reaches a new index k it runs
///   dxhat <- P_k dxhat + L_k z + (c_k - L_k z*_k),  feedback <- K_k dxhat
/// which is 3 matrix-vector products and 3 vector additions (the last adds
/// the precomputed offset). Every tick returns u*(t) - feedback with u*
/// interpolated linearly. Past the horizon the last gains are held and
/// beyond_horizon is set.
Vec4 tvlqg_step(const GainSchedule& schedule, TvLqgState& state, const Vec8& z,
                double t_online, OpCounter* ops = nullptr);

/// Offline step index floor(t / dt), not clamped to the horizon.
long schedule_index(const GainSchedule& schedule, double t_online);

/// z*(t), linearly interpolated between schedule steps and held past the end.
Vec8 nominal_measurement(const GainSchedule& schedule, double t_online);

/// How 1 kHz measurements reach the 100 Hz estimator.
enum class Decimation {
  /// Mean of z - z*(t) over the ticks since the previous update.
  Mean,
  /// The single measurement at the update tick.
  Sample,
};

/// Deviations z - z*(t) accumulated since the last estimator update.
struct MeasurementWindow {
  Vec8 sum = Vec8::Zero();
  int count = 0;
};

/// tvlqg_step behind a decimator. On ticks that start a new offline step the
/// estimator receives z*_k plus the window mean (Mean) or the raw z (Sample).
Vec4 tvlqg_control(const GainSchedule& schedule, TvLqgState& state,
                   MeasurementWindow& window, const Vec8& z, double t_online,
                   Decimation decimation = Decimation::Mean, OpCounter* ops = nullptr);

/// Estimated state x*(t_k) + dxhat, or the nominal start before any update.
Vec6 tvlqg_estimate(const GainSchedule& schedule, const TvLqgState& state);

struct BaselineGains {
  double Kp = 3e3;
  double Ki = 5e3;
  double Kd = 1e1;
  Vec4 integrator_state = Vec4::Zero();
  double integrator_limit = 0.05;

  void validate() const;
};

struct BaselineOutput {
  Vec4 torques = Vec4::Zero();
  Vec4 tensions = Vec4::Zero();
  Vec3 feedback_wrench = Vec3::Zero();
  bool tension_infeasible = false;
};

/// Joint-space PID on cable lengths, mapped to a wrench with J' at the
/// reference pose, plus G a_ref and gravity compensation, distributed to
/// tensions and converted to torques with friction feedforward at the
/// desired winch speed. Updates gains.integrator_state.
BaselineOutput baseline_step(const RobotParams& params, BaselineGains& gains,
                             const Vec8& z, const TrajectorySample& ref, double dt);

}  // namespace cdpr
