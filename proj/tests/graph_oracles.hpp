#pragma once

// Independent reference recursions used only by tests.

#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Gains {
  std::vector<Matrix> K;
  std::vector<Vector> k;
  std::vector<Matrix> P;
};

/// Textbook Riccati recursion in closed-loop (Joseph-like) form with
/// explicit inverses.
inline Gains riccati(const std::vector<Matrix>& A, const std::vector<Matrix>& B,
                     const std::vector<Matrix>& Q, const std::vector<Vector>& q,
                     const std::vector<Matrix>& R, const std::vector<Vector>& r,
                     const Matrix& Qf, const Vector& qf) {
  const std::size_t N = A.size();
  Gains g{std::vector<Matrix>(N), std::vector<Vector>(N),
          std::vector<Matrix>(N)};
  Matrix P = Qf;
  Vector p = qf;
  for (std::size_t i = N; i-- > 0;) {
    const Matrix inv = (R[i] + B[i].transpose() * P * B[i]).inverse();
    const Matrix K = inv * B[i].transpose() * P * A[i];
    const Vector k = inv * (r[i] + B[i].transpose() * p);
    const Matrix Acl = A[i] - B[i] * K;
    const Vector p_next = q[i] + K.transpose() * R[i] * k - K.transpose() * r[i] -
                          Acl.transpose() * P * B[i] * k + Acl.transpose() * p;
    P = Q[i] + K.transpose() * R[i] * K + Acl.transpose() * P * Acl;
    p = p_next;
    g.K[i] = K;
    g.k[i] = k;
    g.P[i] = P;
  }
  return g;
}

struct Filter {
  std::vector<Matrix> L;
  std::vector<Matrix> prior;
  std::vector<Matrix> post;
};

/// Covariance-form Kalman recursion with Joseph-form update.
inline Filter covariance_kf(const std::vector<Matrix>& A,
                            const std::vector<Matrix>& H,
                            const std::vector<Matrix>& Sw,
                            const std::vector<Matrix>& Sv,
                            const Matrix& S0) {
  const std::size_t N = H.size();
  const Eigen::Index n = S0.rows();
  Filter f;
  Matrix prior = S0;
  for (std::size_t k = 0; k < N; ++k) {
    if (k > 0) prior = A[k - 1] * f.post.back() * A[k - 1].transpose() + Sw[k - 1];
    const Matrix L =
        prior * H[k].transpose() *
        (H[k] * prior * H[k].transpose() + Sv[k]).inverse();
    const Matrix IKH = Matrix::Identity(n, n) - L * H[k];
    f.L.push_back(L);
    f.prior.push_back(prior);
    f.post.push_back(IKH * prior * IKH.transpose() + L * Sv[k] * L.transpose());
  }
  return f;
}

/// Filtered marginal covariances from the batch information matrix of
/// x_0..x_k, one dense inversion per k. Requires Sw and S0 invertible.
inline std::vector<Matrix> information_marginals(const std::vector<Matrix>& A,
                                                 const std::vector<Matrix>& H,
                                                 const std::vector<Matrix>& Sw,
                                                 const std::vector<Matrix>& Sv,
                                                 const Matrix& S0) {
  const std::size_t N = H.size();
  const Eigen::Index n = S0.rows();
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < N; ++k) {
    const Eigen::Index dim = static_cast<Eigen::Index>(k + 1) * n;
    Matrix Lam = Matrix::Zero(dim, dim);
    Lam.topLeftCorner(n, n) += S0.inverse();
    for (std::size_t j = 0; j <= k; ++j) {
      const Eigen::Index o = static_cast<Eigen::Index>(j) * n;
      Lam.block(o, o, n, n) += H[j].transpose() * Sv[j].inverse() * H[j];
      if (j < k) {
        // residual x_{j+1} - A x_j with information Sw^-1
        Matrix J = Matrix::Zero(n, dim);
        J.block(0, o, n, n) = -A[j];
        J.block(0, o + n, n, n) = Matrix::Identity(n, n);
        Lam += J.transpose() * Sw[j].inverse() * J;
      }
    }
    const Matrix cov = Lam.inverse();
    out.push_back(cov.bottomRightCorner(n, n));
  }
  return out;
}

}  // namespace oracle
