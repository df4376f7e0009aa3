#pragma once

// Offline stages: iLQR nominal trajectory, time-varying LQR gains by
// elimination, time-varying Kalman gains by marginalization, and their
// assembly into the gain schedule consumed online.

#include <functional>
#include <string>
#include <vector>

#include "cdpr/model.hpp"
#include "cdpr/trajectory.hpp"
#include "cdpr/types.hpp"

namespace cdpr {

/// Initial-state standard deviations [5.7 deg, 0.1 m, 0.1 m, 0, 0, 0].
Vec6 initial_state_std();

struct LqgWeights {
  Mat6 Q;
  Mat4 R;
  Mat6 Sigma_0;
  Mat8 Sigma_meas;
  Mat4 Sigma_torque;

  /// Standard deviations of the reference controller, squared.
  static LqgWeights defaults();
  void validate() const;
};

/// Discrete plant seen by the trajectory optimizer.
struct DiscreteModel {
  std::function<Vec6(const Vec6&, const Vec4&)> step;
  std::function<Linearization(const Vec6&, const Vec4&)> linearize;
};

inline constexpr int kOfflineSubsteps = 10;

/// RK4 flow of the robot over dt with zero disturbance. Explicit Euler at
/// 100 Hz is unstable for the stiff rotational mode.
DiscreteModel robot_model(const RobotParams& params, double dt,
                          int substeps = kOfflineSubsteps);

/// OpenMP-parallel over timesteps; results are written by index, so they are
/// bit-identical to the serial version.
std::vector<Linearization> linearize_trajectory(const DiscreteModel& model,
                                                const std::vector<Vec6>& x,
                                                const std::vector<Vec4>& u);
std::vector<Linearization> linearize_trajectory_serial(const DiscreteModel& model,
                                                       const std::vector<Vec6>& x,
                                                       const std::vector<Vec4>& u);

/// States x_0..x_N, controls u_0..u_{N-1}, and the references they track.
struct NominalTrajectory {
  double dt = 0;
  std::vector<Vec6> x;
  std::vector<Vec4> u;
  std::vector<Vec6> x_ref;
  std::vector<Vec4> u_ref;

  std::size_t horizon() const { return u.size(); }
};

struct IlqrOptions {
  int max_iters = 100;
  double cost_tol = 1e-8;
  double line_search_shrink = 0.5;
  int max_shrinks = 20;
  double abs_cost_tol = 1e-12;
};

struct IlqrResult {
  NominalTrajectory nominal;
  std::vector<double> cost_history;  // initial rollout, then each accepted step
  int iterations = 0;                // backward passes
  bool converged = false;
  std::string message;
};

/// sum_k (x_k - xr_k)'Q(x_k - xr_k) + (u_k - ur_k)'R(u_k - ur_k), terminal
/// state weighted by Q.
double tracking_cost(const NominalTrajectory& traj, const Mat6& Q, const Mat4& R);

/// Generic iLQR from x0 = x_ref[0] starting at controls u_init.
IlqrResult ilqr(const DiscreteModel& model, const std::vector<Vec6>& x_ref,
                const std::vector<Vec4>& u_ref, const std::vector<Vec4>& u_init,
                const Mat6& Q, const Mat4& R, const IlqrOptions& opts);

/// Gravity-compensating tension-distribution torques at each reference pose.
std::vector<Vec4> static_torques(const RobotParams& params, const Trajectory& ref);

/// iLQR on the robot, regularized toward static_torques(reference).
IlqrResult ilqr_nominal(const RobotParams& params, const Trajectory& reference,
                        const LqgWeights& weights, const IlqrOptions& opts = {});

struct LqrSynthesis {
  std::vector<Linearization> linearizations;
  std::vector<Mat46> K;
  std::vector<Vec4> k_ff;
};

LqrSynthesis synthesize_lqr(const RobotParams& params, const NominalTrajectory& nominal,
                            const LqgWeights& weights);

/// Same elimination on caller-supplied linearizations.
LqrSynthesis synthesize_lqr(const NominalTrajectory& nominal,
                            std::vector<Linearization> linearizations,
                            const LqgWeights& weights);

struct KfSynthesis {
  std::vector<Mat68> L;
  std::vector<Mat86> H;
  std::vector<Vec8> z_nom;
  std::vector<Mat6> Sigma_prior;
  std::vector<Mat6> Sigma_post;
};

/// Process noise B Sigma_torque B' + 1e-12 I; one measurement per step k of
/// the horizon, marginalized from Sigma_0 + 1e-12 I.
KfSynthesis synthesize_kf(const RobotParams& params, const NominalTrajectory& nominal,
                          const std::vector<Linearization>& linearizations,
                          const LqgWeights& weights);

struct ScheduleStep {
  Vec6 x_nom = Vec6::Zero();
  Vec4 u_nom = Vec4::Zero();
  Vec8 z_nom = Vec8::Zero();
  Mat46 K = Mat46::Zero();
  Mat68 L = Mat68::Zero();
  Mat6 P = Mat6::Zero();
  Vec6 c = Vec6::Zero();
};

/// Per-step online update:
///   dxhat_k = P_k dxhat_{k-1} + L_k (z_k - z*_k) + c_k,  u_k = u*_k - K_k dxhat_k.
/// dxhat_{-1} = 0 is the prior mean, so P_0 = I - L_0 H_0.
struct GainSchedule {
  double dt = 0.01;
  std::vector<ScheduleStep> steps;
  /// c_k - L_k z*_k, so the hot path consumes the raw measurement.
  std::vector<Vec6> folded_offset;

  std::size_t horizon() const { return steps.size(); }
  double duration() const { return dt * static_cast<double>(steps.size()); }
  void fold_offsets();
};

GainSchedule assemble_schedule(const NominalTrajectory& nominal, const LqrSynthesis& lqr,
                               const KfSynthesis& kf);

/// Binary layout: "CDPRGS1\0", little-endian u32 version, N, state_dim,
/// control_dim, meas_dim, f64 dt, then N records of row-major f64
/// [x*, u*, z*, K, L, P, c].
void save_schedule(const std::string& path, const GainSchedule& schedule);
GainSchedule load_schedule(const std::string& path);

std::vector<unsigned char> encode_schedule(const GainSchedule& schedule);
GainSchedule decode_schedule(const std::vector<unsigned char>& bytes);

/// Whole offline pipeline.
struct SynthesisResult {
  IlqrResult ilqr;
  LqrSynthesis lqr;
  KfSynthesis kf;
  GainSchedule schedule;
};

SynthesisResult synthesize(const RobotParams& params, const Trajectory& reference,
                           const LqgWeights& weights, const IlqrOptions& opts = {});

}  // namespace cdpr
