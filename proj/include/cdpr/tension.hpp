#pragma once

// Tension distribution for four cables and three degrees of freedom.
//
// All tensions realizing a wrench lie on the line t(lambda) = t_p + lambda n,
// with t_p the minimum-norm solution and n the unit null vector of W. The
// eight tension limits cut that line to a segment; the returned point is the
// one closest to the mid-range tension vector.

#include "cdpr/types.hpp"

namespace cdpr {

struct TensionSolution {
  Vec4 tensions = Vec4::Zero();
  Vec4 particular = Vec4::Zero();
  Vec4 null_dir = Vec4::Zero();
  double lambda = 0;
  double lambda_lo = 0;
  double lambda_hi = 0;
  bool feasible = false;
};

/// Never throws for an infeasible wrench: lambda is saturated between the
/// crossed bounds, tensions are clipped to the limits, and feasible = false.
/// Throws ConditioningError if W is rank deficient.
TensionSolution solve_tension_distribution(const Mat34& W, const Vec3& wrench,
                                           double t_min, double t_max);

/// Throws InfeasibleWrenchError carrying (lambda_lo, lambda_hi) when the
/// feasible segment is empty.
Vec4 tension_distribution(const Mat34& W, const Vec3& wrench, double t_min,
                          double t_max);

/// Unit null vector of a full-rank 3x4 matrix, oriented so its entries sum
/// to a nonnegative value.
Vec4 null_vector(const Mat34& W);

}  // namespace cdpr
