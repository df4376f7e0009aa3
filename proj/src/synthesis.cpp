#include "cdpr/synthesis.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "cdpr/errors.hpp"
#include "cdpr/gauss_graph.hpp"
#include "cdpr/tension.hpp"

namespace cdpr {

namespace {

constexpr double kRegularization = 1e-12;

graph::LqrProblem tracking_problem(const NominalTrajectory& t,
                                   const std::vector<Linearization>& lin,
                                   const Mat6& Q, const Mat4& R) {
  graph::LqrProblem p;
  const std::size_t N = t.horizon();
  p.A.reserve(N);
  for (std::size_t k = 0; k < N; ++k) {
    p.A.emplace_back(lin[k].A);
    p.B.emplace_back(lin[k].B);
    p.Q.emplace_back(Q);
    p.q.emplace_back(Q * (t.x[k] - t.x_ref[k]));
    p.R.emplace_back(R);
    p.r.emplace_back(R * (t.u[k] - t.u_ref[k]));
  }
  p.Qf = Q;
  p.qf = Q * (t.x[N] - t.x_ref[N]);
  return p;
}

}  // namespace

Vec6 initial_state_std() {
  Vec6 s;
  s << 5.7 * std::numbers::pi / 180.0, 0.1, 0.1, 0, 0, 0;
  return s;
}

LqgWeights LqgWeights::defaults() {
  LqgWeights w;
  w.Q = Vec6(1e2, 1e4, 1e4, 0, 0, 0).asDiagonal();
  w.R = Mat4::Identity();
  w.Sigma_0 = initial_state_std().cwiseAbs2().asDiagonal();
  Vec8 sz;
  sz << Vec4::Constant(0.0018), Vec4::Constant(0.04);
  w.Sigma_meas = sz.cwiseAbs2().asDiagonal();
  w.Sigma_torque = (0.059 * 0.059) * Mat4::Identity();
  return w;
}

void LqgWeights::validate() const {
  const auto psd = [](const auto& m, const char* name, bool strict) {
    if (!m.allFinite() || (m - m.transpose()).norm() > 1e-12 * std::max(1.0, m.norm())) {
      throw Error(std::string("weights.") + name + ": not symmetric");
    }
    const double lo = m.template selfadjointView<Eigen::Lower>().eigenvalues().minCoeff();
    if (strict ? !(lo > 0) : lo < -1e-12 * std::max(1.0, m.norm())) {
      throw Error(std::string("weights.") + name +
                  (strict ? ": not positive definite" : ": not positive semidefinite"));
    }
  };
  psd(Q, "Q", false);
  psd(R, "R", true);
  psd(Sigma_0, "Sigma_0", false);
  psd(Sigma_meas, "Sigma_meas", true);
  psd(Sigma_torque, "Sigma_torque", false);
}

DiscreteModel robot_model(const RobotParams& params, double dt, int substeps) {
  return {[params, dt, substeps](const Vec6& x, const Vec4& u) {
            return integrate_rk4(params, x, u, Vec4::Zero(), dt, substeps);
          },
          [params, dt, substeps](const Vec6& x, const Vec4& u) {
            return linearize_flow(params, x, u, dt, substeps);
          }};
}

std::vector<Linearization> linearize_trajectory(const DiscreteModel& model,
                                                const std::vector<Vec6>& x,
                                                const std::vector<Vec4>& u) {
  const auto n = static_cast<long>(u.size());
  std::vector<Linearization> out(u.size());
#pragma omp parallel for schedule(static)
  for (long k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] =
        model.linearize(x[static_cast<std::size_t>(k)], u[static_cast<std::size_t>(k)]);
  }
  return out;
}

std::vector<Linearization> linearize_trajectory_serial(const DiscreteModel& model,
                                                       const std::vector<Vec6>& x,
                                                       const std::vector<Vec4>& u) {
  std::vector<Linearization> out;
  out.reserve(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) out.push_back(model.linearize(x[k], u[k]));
  return out;
}

double tracking_cost(const NominalTrajectory& t, const Mat6& Q, const Mat4& R) {
  double J = 0;
  for (std::size_t k = 0; k < t.horizon(); ++k) {
    const Vec6 ex = t.x[k] - t.x_ref[k];
    const Vec4 eu = t.u[k] - t.u_ref[k];
    J += ex.dot(Q * ex) + eu.dot(R * eu);
  }
  const Vec6 ef = t.x.back() - t.x_ref.back();
  return J + ef.dot(Q * ef);
}

IlqrResult ilqr(const DiscreteModel& model, const std::vector<Vec6>& x_ref,
                const std::vector<Vec4>& u_ref, const std::vector<Vec4>& u_init,
                const Mat6& Q, const Mat4& R, const IlqrOptions& opts) {
  const std::size_t N = u_ref.size();
  if (x_ref.size() != N + 1 || u_init.size() != N || N == 0) {
    throw DimensionError("ilqr: need N >= 1 controls and N + 1 reference states");
  }

  IlqrResult res;
  NominalTrajectory& cur = res.nominal;
  cur.x_ref = x_ref;
  cur.u_ref = u_ref;
  cur.u = u_init;
  cur.x.resize(N + 1);
  cur.x[0] = x_ref[0];
  for (std::size_t k = 0; k < N; ++k) cur.x[k + 1] = model.step(cur.x[k], cur.u[k]);

  if (!cur.x.back().allFinite()) {
    res.message = "initial rollout is not finite";
    return res;
  }
  double J = tracking_cost(cur, Q, R);
  res.cost_history.push_back(J);

  NominalTrajectory trial = cur;
  for (int it = 0; it < opts.max_iters; ++it) {
    const auto lin = linearize_trajectory(model, cur.x, cur.u);
    const auto gains = graph::eliminate_lqr(tracking_problem(cur, lin, Q, R));
    ++res.iterations;

    // Predicted decrease of the full step, in units of J.
    const double predicted = -2.0 * gains.front().s;
    if (predicted <= opts.cost_tol * J + opts.abs_cost_tol) {
      res.converged = true;
      res.message = "converged";
      return res;
    }

    double alpha = 1.0;
    bool accepted = false;
    for (int shrink = 0; shrink <= opts.max_shrinks; ++shrink) {
      trial.x[0] = cur.x[0];
      for (std::size_t k = 0; k < N; ++k) {
        const Vec6 dx = trial.x[k] - cur.x[k];
        trial.u[k] = cur.u[k] - alpha * Vec4(gains[k].k_ff) - Mat46(gains[k].K) * dx;
        trial.x[k + 1] = model.step(trial.x[k], trial.u[k]);
      }
      const double J_new =
          trial.x.back().allFinite() ? tracking_cost(trial, Q, R) : INFINITY;
      if (J_new < J) {
        accepted = true;
        const double rel = (J - J_new) / std::max(J, 1e-300);
        std::swap(cur, trial);
        J = J_new;
        res.cost_history.push_back(J);
        if (rel < opts.cost_tol) {
          res.converged = true;
          res.message = "converged";
          return res;
        }
        break;
      }
      alpha *= opts.line_search_shrink;
    }
    if (!accepted) {
      res.message = "line search failed to decrease cost at iteration " +
                    std::to_string(res.iterations);
      return res;
    }
  }
  res.message = "reached max_iters without converging";
  return res;
}

std::vector<Vec4> static_torques(const RobotParams& params, const Trajectory& ref) {
  std::vector<Vec4> u;
  u.reserve(ref.samples.size());
  const Vec3 wrench = -gravity_wrench(params);
  for (const auto& s : ref.samples) {
    const auto g = cable_geometry(params, s.pose);
    u.push_back(params.winch_radius *
                solve_tension_distribution(g.W, wrench, params.tension_min,
                                           params.tension_max)
                    .tensions);
  }
  return u;
}

IlqrResult ilqr_nominal(const RobotParams& params, const Trajectory& reference,
                        const LqgWeights& weights, const IlqrOptions& opts) {
  if (reference.samples.size() < 2 || !(reference.dt > 0)) {
    throw Error("ilqr_nominal: reference has zero duration");
  }
  std::vector<Vec6> x_ref;
  x_ref.reserve(reference.samples.size());
  for (const auto& s : reference.samples) x_ref.push_back(s.state());
  std::vector<Vec4> u_ref = static_torques(params, reference);
  u_ref.pop_back();
  IlqrResult res = ilqr(robot_model(params, reference.dt), x_ref, u_ref, u_ref,
                        weights.Q, weights.R, opts);
  res.nominal.dt = reference.dt;
  return res;
}

LqrSynthesis synthesize_lqr(const NominalTrajectory& nominal,
                            std::vector<Linearization> linearizations,
                            const LqgWeights& weights) {
  if (linearizations.size() != nominal.horizon()) {
    throw DimensionError("synthesize_lqr: linearization count differs from horizon");
  }
  const auto gains =
      graph::eliminate_lqr(tracking_problem(nominal, linearizations, weights.Q, weights.R));
  LqrSynthesis out;
  out.linearizations = std::move(linearizations);
  for (const auto& g : gains) {
    out.K.emplace_back(g.K);
    out.k_ff.emplace_back(g.k_ff);
  }
  return out;
}

LqrSynthesis synthesize_lqr(const RobotParams& params, const NominalTrajectory& nominal,
                            const LqgWeights& weights) {
  return synthesize_lqr(
      nominal, linearize_trajectory(robot_model(params, nominal.dt), nominal.x, nominal.u),
      weights);
}

KfSynthesis synthesize_kf(const RobotParams& params, const NominalTrajectory& nominal,
                          const std::vector<Linearization>& lin,
                          const LqgWeights& weights) {
  const std::size_t N = nominal.horizon();
  if (lin.size() != N) throw DimensionError("synthesize_kf: linearization count");
  graph::KalmanProblem p;
  KfSynthesis out;
  for (std::size_t k = 0; k < N; ++k) {
    const auto m = linearize_measurement(params, PlatformState{nominal.x[k]});
    out.H.push_back(m.H);
    out.z_nom.push_back(m.z_nom);
    p.A.emplace_back(lin[k].A);
    p.H.emplace_back(m.H);
    p.Sigma_w.emplace_back(lin[k].B * weights.Sigma_torque * lin[k].B.transpose() +
                           kRegularization * Mat6::Identity());
    p.Sigma_v.emplace_back(weights.Sigma_meas);
  }
  p.Sigma_0 = weights.Sigma_0 + kRegularization * Mat6::Identity();
  for (const auto& g : graph::marginalize_kf(p)) {
    out.L.emplace_back(g.L);
    out.Sigma_prior.emplace_back(g.Sigma_prior);
    out.Sigma_post.emplace_back(g.Sigma_post);
  }
  return out;
}

void GainSchedule::fold_offsets() {
  folded_offset.resize(steps.size());
  for (std::size_t k = 0; k < steps.size(); ++k) {
    folded_offset[k] = steps[k].c - steps[k].L * steps[k].z_nom;
  }
}

GainSchedule assemble_schedule(const NominalTrajectory& nominal, const LqrSynthesis& lqr,
                               const KfSynthesis& kf) {
  const std::size_t N = nominal.horizon();
  if (lqr.K.size() != N || kf.L.size() != N || lqr.linearizations.size() != N ||
      kf.H.size() != N) {
    throw DimensionError("assemble_schedule: horizon mismatch");
  }
  GainSchedule s;
  s.dt = nominal.dt;
  s.steps.resize(N);
  for (std::size_t k = 0; k < N; ++k) {
    ScheduleStep& st = s.steps[k];
    st.x_nom = nominal.x[k];
    st.u_nom = nominal.u[k];
    st.z_nom = kf.z_nom[k];
    st.K = lqr.K[k];
    st.L = kf.L[k];
    const Mat6 IKH = Mat6::Identity() - st.L * kf.H[k];
    if (k == 0) {
      st.P = IKH;
      st.c.setZero();
    } else {
      const Linearization& lin = lqr.linearizations[k - 1];
      st.P = IKH * (lin.A - lin.B * lqr.K[k - 1]);
      const Vec6 residual =
          lin.A * nominal.x[k - 1] + lin.B * nominal.u[k - 1] + lin.c - nominal.x[k];
      st.c = IKH * residual;
    }
  }
  s.fold_offsets();
  return s;
}

SynthesisResult synthesize(const RobotParams& params, const Trajectory& reference,
                           const LqgWeights& weights, const IlqrOptions& opts) {
  SynthesisResult r;
  r.ilqr = ilqr_nominal(params, reference, weights, opts);
  r.lqr = synthesize_lqr(params, r.ilqr.nominal, weights);
  r.kf = synthesize_kf(params, r.ilqr.nominal, r.lqr.linearizations, weights);
  r.schedule = assemble_schedule(r.ilqr.nominal, r.lqr, r.kf);
  return r;
}

}  // namespace cdpr
