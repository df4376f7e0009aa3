#include "cdpr/tension.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "cdpr/errors.hpp"

namespace cdpr {

Vec4 null_vector(const Mat34& W) {
  // Generalized cross product: n_i = (-1)^i det(W without column i).
  Vec4 n;
  for (int i = 0; i < 4; ++i) {
    Mat3 minor;
    for (int j = 0, c = 0; j < 4; ++j) {
      if (j != i) minor.col(c++) = W.col(j);
    }
    n(i) = (i % 2 == 0 ? 1.0 : -1.0) * minor.determinant();
  }
  const double norm = n.norm();
  if (!(norm > 1e-12 * std::max(1.0, W.cwiseAbs().maxCoeff()))) {
    throw ConditioningError("structure matrix is rank deficient");
  }
  n /= norm;
  if (n.sum() < 0) n = -n;
  return n;
}

TensionSolution solve_tension_distribution(const Mat34& W, const Vec3& wrench,
                                           double t_min, double t_max) {
  TensionSolution sol;
  sol.null_dir = null_vector(W);
  Eigen::LLT<Mat3> llt(W * W.transpose());
  if (llt.info() != Eigen::Success) {
    throw ConditioningError("structure matrix is rank deficient");
  }
  sol.particular = W.transpose() * llt.solve(wrench);

  const double inf = std::numeric_limits<double>::infinity();
  double lo = -inf, hi = inf;
  for (int i = 0; i < 4; ++i) {
    const double n = sol.null_dir(i);
    const double tp = sol.particular(i);
    if (std::abs(n) < 1e-12) {
      if (tp < t_min || tp > t_max) {
        lo = inf;
        hi = -inf;
      }
      continue;
    }
    const double a = (t_min - tp) / n;
    const double b = (t_max - tp) / n;
    lo = std::max(lo, std::min(a, b));
    hi = std::min(hi, std::max(a, b));
  }
  sol.lambda_lo = lo;
  sol.lambda_hi = hi;
  sol.feasible = lo <= hi;

  const double t_mid = 0.5 * (t_min + t_max);
  const double target = sol.null_dir.dot(Vec4::Constant(t_mid) - sol.particular);
  if (sol.feasible) {
    sol.lambda = std::clamp(target, lo, hi);
    sol.tensions = sol.particular + sol.lambda * sol.null_dir;
  } else {
    const double a = std::isfinite(lo) ? lo : target;
    const double b = std::isfinite(hi) ? hi : target;
    sol.lambda = std::clamp(target, std::min(a, b), std::max(a, b));
    sol.tensions = (sol.particular + sol.lambda * sol.null_dir).cwiseMax(t_min).cwiseMin(t_max);
  }
  return sol;
}

Vec4 tension_distribution(const Mat34& W, const Vec3& wrench, double t_min,
                          double t_max) {
  const TensionSolution sol = solve_tension_distribution(W, wrench, t_min, t_max);
  if (!sol.feasible) throw InfeasibleWrenchError(sol.lambda_lo, sol.lambda_hi);
  return sol.tensions;
}

}  // namespace cdpr
