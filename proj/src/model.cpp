#include "cdpr/model.hpp"

#include <cmath>
#include <string>
#include <tuple>
#include <utility>

#include <Eigen/Cholesky>

#include "cdpr/errors.hpp"

namespace cdpr {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

void check(bool ok, const char* field, const char* rule) {
  if (!ok) throw Error(std::string("robot.") + field + ": " + rule);
}

}  // namespace

RobotParams RobotParams::defaults() {
  RobotParams p;
  p.frame_points = {Vec2(2.815, 0.000), Vec2(2.845, 2.239), Vec2(0.033, 2.225),
                    Vec2(0.000, 0.000)};
  p.ee_points = {Vec2(0.063, -0.060), Vec2(0.063, 0.060), Vec2(-0.063, 0.060),
                 Vec2(-0.063, -0.060)};
  p.inertia_diag = Vec3(7.79e-6, 0.727, 0.727);
  p.winch_inertia = 19.6e-6;
  p.winch_radius = 0.02;
  p.viscous_friction = 0.002;
  p.static_friction = 0.12;
  p.tanh_mu = 0.19;
  p.tension_min = 1.0;
  p.tension_max = 100.0;
  p.gravity_enabled = true;
  p.gravity = 9.81;
  return p;
}

void RobotParams::validate() const {
  check((inertia_diag.array() > 0).all(), "inertia", "entries must be > 0");
  check(winch_inertia >= 0, "winch_inertia", "must be >= 0");
  check(winch_radius > 0, "winch_radius", "must be > 0");
  check(viscous_friction >= 0, "viscous_friction", "must be >= 0");
  check(static_friction >= 0, "static_friction", "must be >= 0");
  check(tanh_mu >= 0, "tanh_mu", "must be >= 0");
  check(tension_min >= 0, "tension_min", "must be >= 0");
  check(tension_min < tension_max, "tension_max", "must exceed tension_min");
  check(gravity >= 0, "gravity", "must be >= 0");
  for (const auto& v : frame_points) check(v.allFinite(), "frame_point", "not finite");
  for (const auto& v : ee_points) check(v.allFinite(), "ee_point", "not finite");
}

Vec2 RobotParams::frame_centroid() const {
  Vec2 c = Vec2::Zero();
  for (const auto& a : frame_points) c += a;
  return c / kNumCables;
}

CableGeometry cable_geometry(const RobotParams& params, const Pose& pose) {
  const double c = std::cos(pose(0));
  const double s = std::sin(pose(0));
  Mat2 rot;
  rot << c, -s, s, c;
  const Vec2 p = pose.tail<2>();

  CableGeometry g;
  for (int i = 0; i < kNumCables; ++i) {
    g.lever[i] = rot * params.ee_points[i];
    const Vec2 span = p + g.lever[i] - params.frame_points[i];
    const double len = span.norm();
    if (!(len > 1e-9)) {
      throw GeometryError("cable " + std::to_string(i) + " is degenerate");
    }
    g.lengths(i) = len;
    g.unit[i] = span / len;
    g.W(0, i) = cross2(g.lever[i], -g.unit[i]);
    g.W.block<2, 1>(1, i) = -g.unit[i];
  }
  g.J = -g.W.transpose();
  return g;
}

double friction_torque(const RobotParams& params, double omega) {
  return params.viscous_friction * omega +
         params.static_friction * std::tanh(params.tanh_mu * omega);
}

Vec4 cable_accel_bias(const CableGeometry& geom, const PlatformState& state) {
  const double dtheta = state.x(3);
  const Vec2 dp = state.x.tail<2>();
  Vec4 bias;
  for (int i = 0; i < kNumCables; ++i) {
    const Vec2 ds = dp + dtheta * perp(geom.lever[i]);
    const double ldot = geom.unit[i].dot(ds);
    bias(i) = -dtheta * dtheta * geom.unit[i].dot(geom.lever[i]) +
              (ds.squaredNorm() - ldot * ldot) / geom.lengths(i);
  }
  return bias;
}

Vec3 gravity_wrench(const RobotParams& params) {
  if (!params.gravity_enabled) return Vec3::Zero();
  return Vec3(0.0, 0.0, -params.mass() * params.gravity);
}

DynamicsResult forward_dynamics(const RobotParams& params,
                                const PlatformState& state,
                                const Vec4& motor_torques,
                                const Vec4& disturbance) {
  const CableGeometry g = cable_geometry(params, state.pose());
  const double r = params.winch_radius;
  const double jw = params.winch_inertia;
  const Vec3 vel = state.velocity();

  const Vec4 omega = -(g.J * vel) / r;
  Vec4 tau_eff = motor_torques + disturbance;
  for (int i = 0; i < kNumCables; ++i) tau_eff(i) -= friction_torque(params, omega(i));

  const Vec4 bias = cable_accel_bias(g, state);
  const Mat3 M = params.inertia() + (jw / (r * r)) * g.J.transpose() * g.J;
  const Vec3 f = g.W * (tau_eff / r) - (jw / (r * r)) * g.J.transpose() * bias +
                 gravity_wrench(params);

  Eigen::LLT<Mat3> llt(M);
  if (llt.info() != Eigen::Success) {
    throw ConditioningError("forward_dynamics: augmented inertia not PD");
  }
  DynamicsResult out;
  out.accel = llt.solve(f);
  const Vec4 omega_dot = -(g.J * out.accel + bias) / r;
  out.tensions = (tau_eff - jw * omega_dot) / r;
  out.tension_out_of_limits =
      (out.tensions.array() < params.tension_min).any() ||
      (out.tensions.array() > params.tension_max).any();
  return out;
}

Vec6 state_derivative(const RobotParams& params, const Vec6& x, const Vec4& u,
                      const Vec4& disturbance) {
  const PlatformState s{x};
  Vec6 dx;
  dx << x.tail<3>(), forward_dynamics(params, s, u, disturbance).accel;
  return dx;
}

Vec6 euler_step(const RobotParams& params, const Vec6& x, const Vec4& u,
                double dt) {
  return x + dt * state_derivative(params, x, u);
}

Vec6 integrate_rk4(const RobotParams& params, const Vec6& x, const Vec4& u,
                   const Vec4& disturbance, double duration, int substeps) {
  const double h = duration / substeps;
  Vec6 y = x;
  for (int i = 0; i < substeps; ++i) {
    const Vec6 k1 = state_derivative(params, y, u, disturbance);
    const Vec6 k2 = state_derivative(params, y + 0.5 * h * k1, u, disturbance);
    const Vec6 k3 = state_derivative(params, y + 0.5 * h * k2, u, disturbance);
    const Vec6 k4 = state_derivative(params, y + h * k3, u, disturbance);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return y;
}

double mechanical_energy(const RobotParams& params, const PlatformState& state) {
  const CableGeometry g = cable_geometry(params, state.pose());
  const Vec3 vel = state.velocity();
  const Vec4 omega = (g.J * vel) / params.winch_radius;
  double e = 0.5 * vel.dot(params.inertia() * vel) +
             0.5 * params.winch_inertia * omega.squaredNorm();
  if (params.gravity_enabled) e += params.mass() * params.gravity * state.x(2);
  return e;
}

namespace {

template <typename Map>
std::pair<Mat6, Mat64> central_jacobians(const Map& f, const Vec6& x, const Vec4& u) {
  const double h = kFiniteDifferenceStep;
  Mat6 fx;
  Mat64 fu;
  for (int j = 0; j < kStateDim; ++j) {
    Vec6 xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    fx.col(j) = (f(xp, u) - f(xm, u)) / (2 * h);
  }
  for (int j = 0; j < kControlDim; ++j) {
    Vec4 up = u, um = u;
    up(j) += h;
    um(j) -= h;
    fu.col(j) = (f(x, up) - f(x, um)) / (2 * h);
  }
  return {fx, fu};
}

}  // namespace

Linearization linearize_dynamics(const RobotParams& params, const Vec6& x_nom,
                                 const Vec4& u_nom, double dt) {
  const auto [dfdx, dfdu] = central_jacobians(
      [&](const Vec6& x, const Vec4& u) { return state_derivative(params, x, u); }, x_nom,
      u_nom);
  Linearization lin;
  lin.A = Mat6::Identity() + dt * dfdx;
  lin.B = dt * dfdu;
  lin.c = euler_step(params, x_nom, u_nom, dt) - lin.A * x_nom - lin.B * u_nom;
  return lin;
}

Linearization linearize_flow(const RobotParams& params, const Vec6& x_nom,
                             const Vec4& u_nom, double dt, int substeps) {
  const auto flow = [&](const Vec6& x, const Vec4& u) {
    return integrate_rk4(params, x, u, Vec4::Zero(), dt, substeps);
  };
  Linearization lin;
  std::tie(lin.A, lin.B) = central_jacobians(flow, x_nom, u_nom);
  lin.c = flow(x_nom, u_nom) - lin.A * x_nom - lin.B * u_nom;
  return lin;
}

Vec8 measurement_model(const RobotParams& params, const PlatformState& state) {
  const CableGeometry g = cable_geometry(params, state.pose());
  Vec8 z;
  z << g.lengths, g.J * state.velocity();
  return z;
}

MeasurementLinearization linearize_measurement(const RobotParams& params,
                                               const PlatformState& nominal,
                                               bool exact_rate_block) {
  const CableGeometry g = cable_geometry(params, nominal.pose());
  MeasurementLinearization out;
  out.z_nom << g.lengths, g.J * nominal.velocity();
  out.H.setZero();
  out.H.block<4, 3>(0, 0) = g.J;
  out.H.block<4, 3>(4, 3) = g.J;
  if (exact_rate_block) {
    const double h = kFiniteDifferenceStep;
    for (int j = 0; j < 3; ++j) {
      PlatformState sp = nominal, sm = nominal;
      sp.x(j) += h;
      sm.x(j) -= h;
      out.H.block<4, 1>(4, j) = (measurement_model(params, sp).tail<4>() -
                                 measurement_model(params, sm).tail<4>()) /
                                (2 * h);
    }
  }
  return out;
}

}  // namespace cdpr
