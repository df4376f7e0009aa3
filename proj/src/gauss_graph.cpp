#include "cdpr/gauss_graph.hpp"

#include <algorithm>
#include <map>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "cdpr/errors.hpp"

namespace cdpr::graph {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

std::string at(const char* name, std::size_t k) {
  return std::string(name) + "[" + std::to_string(k) + "]";
}

}  // namespace

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// ---------------------------------------------------------------------------

std::vector<ConditionalGain> eliminate_lqr(const LqrProblem& p) {
  const std::size_t N = p.horizon();
  require(p.B.size() == N && p.Q.size() == N && p.q.size() == N &&
              p.R.size() == N && p.r.size() == N,
          "eliminate_lqr: list lengths differ from horizon");
  const Eigen::Index n = p.Qf.rows();
  require(p.Qf.cols() == n && p.qf.size() == n,
          "eliminate_lqr: terminal cost dimensions");

  for (std::size_t k = 0; k < N; ++k) {
    const Eigen::Index m = p.B[k].cols();
    require(p.A[k].rows() == n && p.A[k].cols() == n, at("A", k));
    require(p.B[k].rows() == n, at("B", k));
    require(p.Q[k].rows() == n && p.Q[k].cols() == n, at("Q", k));
    require(p.q[k].size() == n, at("q", k));
    require(p.R[k].rows() == m && p.R[k].cols() == m, at("R", k));
    require(p.r[k].size() == m, at("r", k));
  }

  std::vector<ConditionalGain> gains(N);
  Matrix V = symmetrized(p.Qf);
  Vector v = p.qf;
  double s = 0.0;

  for (std::size_t i = N; i-- > 0;) {
    const Matrix& A = p.A[i];
    const Matrix& B = p.B[i];

    Eigen::LLT<Matrix> r_llt(symmetrized(p.R[i]));
    if (r_llt.info() != Eigen::Success) {
      throw ConditioningError("eliminate_lqr: R not positive definite at step " +
                                  std::to_string(i),
                              static_cast<long>(i));
    }

    const Matrix VB = V * B;
    const Matrix Quu = symmetrized(p.R[i] + B.transpose() * VB);
    const Matrix Qux = VB.transpose() * A;
    const Vector qu = p.r[i] + B.transpose() * v;

    Eigen::LLT<Matrix> llt(Quu);
    if (llt.info() != Eigen::Success) {
      throw ConditioningError(
          "eliminate_lqr: control Hessian not positive definite at step " +
              std::to_string(i),
          static_cast<long>(i));
    }

    ConditionalGain& g = gains[i];
    g.K = llt.solve(Qux);
    g.k_ff = llt.solve(qu);

    const Matrix Qxx = p.Q[i] + A.transpose() * V * A;
    V = symmetrized(Qxx - Qux.transpose() * g.K);
    v = p.q[i] + A.transpose() * v - g.K.transpose() * qu;
    s -= 0.5 * qu.dot(g.k_ff);

    g.V = V;
    g.v = v;
    g.s = s;
  }
  return gains;
}

// ---------------------------------------------------------------------------

std::vector<MarginalGain> marginalize_kf(const KalmanProblem& p) {
  const std::size_t N = p.horizon();
  require(p.Sigma_v.size() == N, "marginalize_kf: Sigma_v length");
  require(p.A.size() + 1 >= N && p.Sigma_w.size() + 1 >= N,
          "marginalize_kf: A/Sigma_w shorter than horizon - 1");
  const Eigen::Index n = p.Sigma_0.rows();
  require(p.Sigma_0.cols() == n, "marginalize_kf: Sigma_0 not square");

  std::vector<MarginalGain> out(N);
  Matrix prior = symmetrized(p.Sigma_0);
  for (std::size_t k = 0; k < N; ++k) {
    if (k > 0) {
      const Matrix& A = p.A[k - 1];
      require(A.rows() == n && A.cols() == n, at("A", k - 1));
      require(p.Sigma_w[k - 1].rows() == n && p.Sigma_w[k - 1].cols() == n,
              at("Sigma_w", k - 1));
      prior = symmetrized(A * out[k - 1].Sigma_post * A.transpose() +
                          p.Sigma_w[k - 1]);
    }
    const Matrix& H = p.H[k];
    require(H.cols() == n, at("H", k));
    require(p.Sigma_v[k].rows() == H.rows() && p.Sigma_v[k].cols() == H.rows(),
            at("Sigma_v", k));

    const Matrix PHt = prior * H.transpose();
    const Matrix S = symmetrized(H * PHt + p.Sigma_v[k]);
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) {
      throw ConditioningError(
          "marginalize_kf: innovation covariance singular at step " +
              std::to_string(k),
          static_cast<long>(k));
    }
    MarginalGain& g = out[k];
    g.L = llt.solve(PHt.transpose()).transpose();
    g.Sigma_prior = prior;
    // Joseph form of (I - LH) prior; the short form cancels catastrophically
    // for diffuse priors.
    const Matrix IKH = Matrix::Identity(n, n) - g.L * H;
    g.Sigma_post = symmetrized(IKH * prior * IKH.transpose() +
                               g.L * p.Sigma_v[k] * g.L.transpose());
  }
  return out;
}

// ---------------------------------------------------------------------------

QuadraticFactor QuadraticFactor::soft(std::vector<VariableKey> keys,
                                      std::vector<Matrix> blocks, Vector rhs,
                                      Matrix weight) {
  return {std::move(keys), std::move(blocks), std::move(rhs),
          FactorKind::SoftCost, std::move(weight)};
}

QuadraticFactor QuadraticFactor::hard(std::vector<VariableKey> keys,
                                      std::vector<Matrix> blocks, Vector rhs) {
  return {std::move(keys), std::move(blocks), std::move(rhs),
          FactorKind::HardConstraint, Matrix()};
}

QuadraticFactor QuadraticFactor::stochastic(std::vector<VariableKey> keys,
                                            std::vector<Matrix> blocks,
                                            Vector rhs, Matrix covariance) {
  return {std::move(keys), std::move(blocks), std::move(rhs),
          FactorKind::Stochastic, std::move(covariance)};
}

void ChainGraph::add_dynamics(int k, const Matrix& A, const Matrix& B,
                              const Vector& c) {
  const Eigen::Index n = A.rows();
  factors.push_back(QuadraticFactor::hard(
      {VariableKey::state(k), VariableKey::control(k),
       VariableKey::state(k + 1)},
      {-A, -B, Matrix::Identity(n, n)}, c));
}

int ChainGraph::num_variables() const {
  return (horizon + 1) * state_dim + horizon * control_dim;
}

int ChainGraph::offset(const VariableKey& key) const {
  const int stride = state_dim + control_dim;
  return key.step * stride +
         (key.kind == VariableKey::Kind::Control ? state_dim : 0);
}

int ChainGraph::dim(const VariableKey& key) const {
  return key.kind == VariableKey::Kind::State ? state_dim : control_dim;
}

void ChainGraph::validate() const {
  require(horizon >= 0 && state_dim > 0 && control_dim >= 0,
          "chain graph: bad dimensions");
  std::vector<int> dynamics_count(static_cast<std::size_t>(horizon), 0);

  for (std::size_t f = 0; f < factors.size(); ++f) {
    const QuadraticFactor& fac = factors[f];
    const std::string where = "factor " + std::to_string(f);
    require(!fac.keys.empty() && fac.keys.size() == fac.blocks.size(),
            where + ": keys/blocks mismatch");
    const Eigen::Index rows = fac.rhs.size();
    int lo = fac.keys.front().step;
    int hi = lo;
    for (std::size_t i = 0; i < fac.keys.size(); ++i) {
      const VariableKey& key = fac.keys[i];
      const int max_step =
          key.kind == VariableKey::Kind::State ? horizon : horizon - 1;
      require(key.step >= 0 && key.step <= max_step,
              where + ": variable step out of range");
      require(fac.blocks[i].rows() == rows && fac.blocks[i].cols() == dim(key),
              where + ": block shape");
      lo = std::min(lo, key.step);
      hi = std::max(hi, key.step);
    }
    require(hi - lo <= 1, where + ": spans non-adjacent timesteps");
    if (fac.kind != FactorKind::HardConstraint) {
      require(fac.weight.rows() == rows && fac.weight.cols() == rows,
              where + ": weight shape");
    }
    if (fac.kind == FactorKind::HardConstraint && fac.keys.size() == 3 &&
        hi == lo + 1) {
      const auto has = [&](VariableKey k) {
        return std::find(fac.keys.begin(), fac.keys.end(), k) != fac.keys.end();
      };
      if (has(VariableKey::state(lo)) && has(VariableKey::control(lo)) &&
          has(VariableKey::state(hi))) {
        ++dynamics_count[static_cast<std::size_t>(lo)];
      }
    }
  }
  for (int k = 0; k < horizon; ++k) {
    require(dynamics_count[static_cast<std::size_t>(k)] == 1,
            "chain graph: step " + std::to_string(k) +
                " needs exactly one dynamics factor");
  }
}

namespace {

struct Assembled {
  Matrix H;  // objective Hessian (objective = z'Hz - 2g'z + const)
  Vector g;
  Matrix C;  // C z = d
  Vector d;
};

Assembled assemble(const ChainGraph& graph) {
  const int nv = graph.num_variables();
  int hard_rows = 0;
  for (const auto& f : graph.factors) {
    if (f.kind == FactorKind::HardConstraint) hard_rows += f.rhs.size();
  }
  Assembled a{Matrix::Zero(nv, nv), Vector::Zero(nv),
              Matrix::Zero(hard_rows, nv), Vector::Zero(hard_rows)};

  int row = 0;
  for (const auto& f : graph.factors) {
    const Eigen::Index rows = f.rhs.size();
    Matrix J = Matrix::Zero(rows, nv);
    for (std::size_t i = 0; i < f.keys.size(); ++i) {
      J.middleCols(graph.offset(f.keys[i]), graph.dim(f.keys[i])) +=
          f.blocks[i];
    }
    if (f.kind == FactorKind::HardConstraint) {
      a.C.middleRows(row, rows) = J;
      a.d.segment(row, rows) = f.rhs;
      row += static_cast<int>(rows);
      continue;
    }
    Matrix W;
    if (f.kind == FactorKind::SoftCost) {
      W = symmetrized(f.weight);
    } else {
      Eigen::LLT<Matrix> llt(symmetrized(f.weight));
      if (llt.info() != Eigen::Success) {
        throw ConditioningError("stochastic factor covariance not PD");
      }
      W = llt.solve(Matrix::Identity(rows, rows));
    }
    a.H += J.transpose() * W * J;
    a.g += J.transpose() * W * f.rhs;
  }
  a.H = symmetrized(a.H);
  return a;
}

struct NullSpace {
  Vector particular;
  Matrix basis;
};

NullSpace constraint_null_space(const Assembled& a, int nv) {
  if (a.C.rows() == 0) {
    return {Vector::Zero(nv), Matrix::Identity(nv, nv)};
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(a.C.transpose());
  if (qr.rank() < a.C.rows()) {
    throw ConditioningError("solve_linear_chain: hard constraints rank deficient");
  }
  const Matrix Qfull = qr.householderQ() * Matrix::Identity(nv, nv);
  const Eigen::Index r = qr.rank();
  // C' P = Q R  =>  C = P R' Q'. With z = Q1 y, C z = P R1' y.
  const Matrix R1 =
      qr.matrixR().topLeftCorner(r, r).template triangularView<Eigen::Upper>();
  const Vector Pt_d = qr.colsPermutation().transpose() * a.d;
  const Vector y = R1.transpose().triangularView<Eigen::Lower>().solve(Pt_d);
  return {Qfull.leftCols(r) * y, Qfull.rightCols(nv - r)};
}

}  // namespace

ChainSolution solve_linear_chain(const ChainGraph& graph) {
  graph.validate();
  const int nv = graph.num_variables();
  const Assembled a = assemble(graph);
  const NullSpace ns = constraint_null_space(a, nv);

  Vector z = ns.particular;
  if (ns.basis.cols() > 0) {
    const Matrix Hr = symmetrized(ns.basis.transpose() * a.H * ns.basis);
    const Vector gr = ns.basis.transpose() * (a.g - a.H * ns.particular);
    Eigen::LLT<Matrix> llt(Hr);
    const double scale = std::max(1.0, Hr.diagonal().cwiseAbs().maxCoeff());
    if (llt.info() != Eigen::Success ||
        llt.matrixL().toDenseMatrix().diagonal().minCoeff() <
            1e-7 * std::sqrt(scale)) {
      throw ConditioningError(
          "solve_linear_chain: underdetermined system after elimination");
    }
    z += ns.basis * llt.solve(gr);
  }

  ChainSolution sol;
  for (int k = 0; k <= graph.horizon; ++k) {
    sol.states.push_back(z.segment(graph.offset(VariableKey::state(k)),
                                   graph.state_dim));
    if (k < graph.horizon) {
      sol.controls.push_back(z.segment(graph.offset(VariableKey::control(k)),
                                       graph.control_dim));
    }
  }
  return sol;
}

double projected_gradient_norm(const ChainGraph& graph,
                               const ChainSolution& solution) {
  const int nv = graph.num_variables();
  Vector z(nv);
  for (int k = 0; k <= graph.horizon; ++k) {
    z.segment(graph.offset(VariableKey::state(k)), graph.state_dim) =
        solution.states[static_cast<std::size_t>(k)];
    if (k < graph.horizon) {
      z.segment(graph.offset(VariableKey::control(k)), graph.control_dim) =
          solution.controls[static_cast<std::size_t>(k)];
    }
  }
  const Assembled a = assemble(graph);
  const NullSpace ns = constraint_null_space(a, nv);
  const Vector grad = 2.0 * (a.H * z - a.g);
  return (ns.basis.transpose() * grad).norm();
}

}  // namespace cdpr::graph
