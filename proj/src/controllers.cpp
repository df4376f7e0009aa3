#include "cdpr/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "cdpr/errors.hpp"
#include "cdpr/tension.hpp"

namespace cdpr {

namespace {

template <typename M, typename V>
auto matvec(const M& m, const V& v, OpCounter* ops) {
  if (ops) ++ops->matvec;
  return (m * v).eval();
}

template <typename V>
V vecadd(const V& a, const V& b, OpCounter* ops) {
  if (ops) ++ops->vecadd;
  return a + b;
}

}  // namespace

long schedule_index(const GainSchedule& schedule, double t_online) {
  // Guard against t = k dt landing just below the grid point.
  return static_cast<long>(std::floor(std::max(t_online, 0.0) / schedule.dt + 1e-9));
}

Vec8 nominal_measurement(const GainSchedule& schedule, double t_online) {
  if (schedule.steps.empty()) throw Error("nominal_measurement: empty gain schedule");
  const auto N = static_cast<long>(schedule.horizon());
  const long k = schedule_index(schedule, t_online);
  if (k + 1 >= N) return schedule.steps.back().z_nom;
  const double w =
      std::clamp(std::max(t_online, 0.0) / schedule.dt - static_cast<double>(k), 0.0, 1.0);
  return (1 - w) * schedule.steps[static_cast<std::size_t>(k)].z_nom +
         w * schedule.steps[static_cast<std::size_t>(k + 1)].z_nom;
}

Vec4 tvlqg_step(const GainSchedule& schedule, TvLqgState& state, const Vec8& z,
                double t_online, OpCounter* ops) {
  const auto N = static_cast<long>(schedule.horizon());
  if (N == 0) throw Error("tvlqg_step: empty gain schedule");
  if (schedule.folded_offset.size() != schedule.steps.size()) {
    throw Error("tvlqg_step: schedule offsets not folded");
  }
  const double pos = std::max(t_online, 0.0) / schedule.dt;
  long k = schedule_index(schedule, t_online);
  state.beyond_horizon = k >= N;
  k = std::min(k, N - 1);

  if (k > state.k) {
    const ScheduleStep& st = schedule.steps[static_cast<std::size_t>(k)];
    const Vec6 propagated = matvec(st.P, state.delta_xhat, ops);
    const Vec6 corrected = vecadd(propagated, matvec(st.L, z, ops), ops);
    state.delta_xhat =
        vecadd(corrected, schedule.folded_offset[static_cast<std::size_t>(k)], ops);
    state.feedback = matvec(st.K, state.delta_xhat, ops);
    state.k = k;
  }

  const Vec4& u0 = schedule.steps[static_cast<std::size_t>(k)].u_nom;
  Vec4 u_nom = u0;
  if (k + 1 < N && !state.beyond_horizon) {
    const double w = std::clamp(pos - static_cast<double>(k), 0.0, 1.0);
    u_nom = (1 - w) * u0 + w * schedule.steps[static_cast<std::size_t>(k + 1)].u_nom;
  }
  state.last_u = vecadd(u_nom, Vec4(-state.feedback), ops);
  return state.last_u;
}

Vec4 tvlqg_control(const GainSchedule& schedule, TvLqgState& state,
                   MeasurementWindow& window, const Vec8& z, double t_online,
                   Decimation decimation, OpCounter* ops) {
  if (schedule.steps.empty()) throw Error("tvlqg_control: empty gain schedule");
  const long k = std::min(schedule_index(schedule, t_online),
                          static_cast<long>(schedule.horizon()) - 1);
  if (decimation == Decimation::Sample || k <= state.k) {
    if (decimation == Decimation::Mean) {
      window.sum += z - nominal_measurement(schedule, t_online);
      ++window.count;
    }
    return tvlqg_step(schedule, state, z, t_online, ops);
  }
  window.sum += z - nominal_measurement(schedule, t_online);
  ++window.count;
  const Vec8 z_in = schedule.steps[static_cast<std::size_t>(k)].z_nom +
                    window.sum / static_cast<double>(window.count);
  window = {};
  return tvlqg_step(schedule, state, z_in, t_online, ops);
}

Vec6 tvlqg_estimate(const GainSchedule& schedule, const TvLqgState& state) {
  if (schedule.steps.empty()) throw Error("tvlqg_estimate: empty gain schedule");
  if (state.k < 0) return schedule.steps.front().x_nom;
  return schedule.steps[static_cast<std::size_t>(state.k)].x_nom + state.delta_xhat;
}

void BaselineGains::validate() const {
  const auto check = [](bool ok, const char* key) {
    if (!ok) throw Error(std::string("baseline.") + key + ": must be finite and >= 0");
  };
  check(std::isfinite(Kp) && Kp >= 0, "Kp");
  check(std::isfinite(Ki) && Ki >= 0, "Ki");
  check(std::isfinite(Kd) && Kd >= 0, "Kd");
  check(std::isfinite(integrator_limit) && integrator_limit >= 0, "integrator_limit");
  check(integrator_state.allFinite(), "integrator_state");
}

BaselineOutput baseline_step(const RobotParams& params, BaselineGains& gains,
                             const Vec8& z, const TrajectorySample& ref, double dt) {
  const CableGeometry g = cable_geometry(params, ref.pose);
  const Vec4 l_d = g.lengths;
  const Vec4 ldot_d = g.J * ref.velocity;

  const Vec4 e = l_d - z.head<4>();
  gains.integrator_state = (gains.integrator_state + dt * e)
                               .cwiseMax(-gains.integrator_limit)
                               .cwiseMin(gains.integrator_limit);
  const Vec4 f = gains.Kp * e + gains.Ki * gains.integrator_state +
                 gains.Kd * (ldot_d - z.tail<4>());

  BaselineOutput out;
  out.feedback_wrench = g.J.transpose() * f;
  const Vec3 wrench =
      out.feedback_wrench + params.inertia() * ref.accel - gravity_wrench(params);
  const TensionSolution td =
      solve_tension_distribution(g.W, wrench, params.tension_min, params.tension_max);
  out.tensions = td.tensions;
  out.tension_infeasible = !td.feasible;
  for (int i = 0; i < kNumCables; ++i) {
    // Reel-in winch speed.
    const double omega_d = -ldot_d(i) / params.winch_radius;
    out.torques(i) = params.winch_radius * td.tensions(i) + friction_torque(params, omega_d);
  }
  return out;
}

}  // namespace cdpr
