#pragma once

// Planar 4-cable robot: kinematics, winch-coupled rigid-body dynamics,
// friction, cable measurements, and their linearizations.

#include <array>

#include "cdpr/types.hpp"

namespace cdpr {

struct RobotParams {
  std::array<Vec2, kNumCables> frame_points;  // anchors a_i, world frame (m)
  std::array<Vec2, kNumCables> ee_points;     // mounts b_i, body frame (m)
  Vec3 inertia_diag;          // [I_z (kg m^2), m (kg), m (kg)]
  double winch_inertia = 0;   // kg m^2
  double winch_radius = 0;    // m
  double viscous_friction = 0;  // N m s
  double static_friction = 0;   // N m
  double tanh_mu = 0;           // s/rad
  double tension_min = 0;       // N
  double tension_max = 0;       // N
  bool gravity_enabled = true;
  double gravity = 9.81;        // m/s^2, acts along -y

  /// Geometry, inertia and friction of the reference robot.
  static RobotParams defaults();

  /// Throws cdpr::Error naming the offending field.
  void validate() const;

  Mat3 inertia() const { return inertia_diag.asDiagonal(); }
  double mass() const { return inertia_diag(1); }
  Vec2 frame_centroid() const;
};

/// Cable state at one pose. unit[i] points from anchor i to its mount and
/// column i of W is the wrench [tau_z, f_x, f_y] of a unit tension.
struct CableGeometry {
  Vec4 lengths;
  std::array<Vec2, kNumCables> unit;
  std::array<Vec2, kNumCables> lever;  // R(theta) b_i
  Mat34 W;
  Mat43 J;  // dl/dpose, equal to -W'
};

/// Throws GeometryError when a cable is shorter than 1e-9 m.
CableGeometry cable_geometry(const RobotParams& params, const Pose& pose);

/// Winch friction F_v w + F_s tanh(mu w).
double friction_torque(const RobotParams& params, double omega);

/// Centripetal part of the cable acceleration, ldd = J a + bias.
Vec4 cable_accel_bias(const CableGeometry& geom, const PlatformState& state);

struct DynamicsResult {
  Vec3 accel;
  Vec4 tensions;
  bool tension_out_of_limits = false;
};

/// Winch speeds of the model are reel-in rates w = -ldot / r. Motor and
/// disturbance torques act in the reel-in direction.
DynamicsResult forward_dynamics(const RobotParams& params,
                                const PlatformState& state,
                                const Vec4& motor_torques,
                                const Vec4& disturbance = Vec4::Zero());

/// Continuous-time state derivative [velocity; acceleration].
Vec6 state_derivative(const RobotParams& params, const Vec6& x, const Vec4& u,
                      const Vec4& disturbance = Vec4::Zero());

/// x + dt f(x, u).
Vec6 euler_step(const RobotParams& params, const Vec6& x, const Vec4& u,
                double dt);

/// Torques held over `duration`, integrated with `substeps` RK4 steps.
Vec6 integrate_rk4(const RobotParams& params, const Vec6& x, const Vec4& u,
                   const Vec4& disturbance, double duration, int substeps);

/// Kinetic energy including winch rotors plus gravitational potential.
double mechanical_energy(const RobotParams& params, const PlatformState& state);

/// x_{k+1} ~= A x_k + B u_k + c around (x_nom, u_nom).
struct Linearization {
  Mat6 A;
  Mat64 B;
  Vec6 c;
};

/// Euler form: A = I + dt df/dx, B = dt df/du, Jacobians by central
/// differences.
Linearization linearize_dynamics(const RobotParams& params, const Vec6& x_nom,
                                 const Vec4& u_nom, double dt);

/// Central-difference linearization of the RK4 flow over dt (zero
/// disturbance).
Linearization linearize_flow(const RobotParams& params, const Vec6& x_nom,
                             const Vec4& u_nom, double dt, int substeps);

/// z = [l_1..l_4, ldot_1..ldot_4].
Vec8 measurement_model(const RobotParams& params, const PlatformState& state);

struct MeasurementLinearization {
  Mat86 H;
  Vec8 z_nom;
};

/// By default the d(ldot)/dpose block of H is zero (small velocity). Passing
/// exact_rate_block fills it by central differences.
MeasurementLinearization linearize_measurement(const RobotParams& params,
                                               const PlatformState& nominal,
                                               bool exact_rate_block = false);

/// [0, 0, -m g] or zero.
Vec3 gravity_wrench(const RobotParams& params);

inline constexpr double kFiniteDifferenceStep = 1e-6;

}  // namespace cdpr
