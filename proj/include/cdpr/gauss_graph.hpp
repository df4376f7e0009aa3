#pragma once

// Chain-structured Gaussian factor graphs.
//
// Backward elimination of an LQR-shaped chain produces time-varying
// regulator gains; forward marginalization of a stochastic chain produces
// time-varying Kalman gains. A general dense null-space solve is provided
// for arbitrary quadratic chains with hard constraints.

#include <vector>

#include <Eigen/Core>

namespace cdpr::graph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Backward-pass result for one timestep. The optimal control in deviation
/// coordinates is u = -K x - k_ff. The cost-to-go from step k is
/// 0.5 x'Vx + v'x + s.
struct ConditionalGain {
  Matrix K;
  Vector k_ff;
  Matrix V;
  Vector v;
  double s = 0.0;
};

struct MarginalGain {
  Matrix L;
  Matrix Sigma_prior;
  Matrix Sigma_post;
};

/// Finite-horizon LQR in the form
///   sum_k 0.5 x'Q_k x + q_k'x + 0.5 u'R_k u + r_k'u  +  0.5 x_N'Qf x_N + qf'x_N
/// subject to x_{k+1} = A_k x_k + B_k u_k.
struct LqrProblem {
  std::vector<Matrix> A, B, Q, R;
  std::vector<Vector> q, r;
  Matrix Qf;
  Vector qf;

  std::size_t horizon() const { return A.size(); }
};

/// Eliminates x_N, u_{N-1}, x_{N-1}, ... in turn. Throws DimensionError on
/// inconsistent sizes and ConditioningError (with the step index) when R_k or
/// the control Hessian is not positive definite.
std::vector<ConditionalGain> eliminate_lqr(const LqrProblem& problem);

/// Linear-Gaussian chain: x_{k+1} = A_k x_k + w_k, z_k = H_k x_k + v_k,
/// x_0 ~ N(., Sigma_0). Entry k of the result belongs to measurement k.
/// A_k maps step k to k+1, so the final A (and Sigma_w) is not used.
struct KalmanProblem {
  std::vector<Matrix> A, H, Sigma_w, Sigma_v;
  Matrix Sigma_0;

  std::size_t horizon() const { return H.size(); }
};

std::vector<MarginalGain> marginalize_kf(const KalmanProblem& problem);

// ---------------------------------------------------------------------------
// General chain graph

struct VariableKey {
  enum class Kind { State, Control };
  Kind kind = Kind::State;
  int step = 0;

  static VariableKey state(int k) { return {Kind::State, k}; }
  static VariableKey control(int k) { return {Kind::Control, k}; }
  bool operator==(const VariableKey&) const = default;
};

enum class FactorKind { SoftCost, HardConstraint, Stochastic };

/// Residual e = sum_i blocks[i] * var(keys[i]) - rhs.
/// SoftCost contributes e' weight e, Stochastic contributes e' weight^-1 e
/// (weight is then a covariance), HardConstraint enforces e = 0.
struct QuadraticFactor {
  std::vector<VariableKey> keys;
  std::vector<Matrix> blocks;
  Vector rhs;
  FactorKind kind = FactorKind::SoftCost;
  Matrix weight;

  static QuadraticFactor soft(std::vector<VariableKey> keys,
                              std::vector<Matrix> blocks, Vector rhs,
                              Matrix weight);
  static QuadraticFactor hard(std::vector<VariableKey> keys,
                              std::vector<Matrix> blocks, Vector rhs);
  static QuadraticFactor stochastic(std::vector<VariableKey> keys,
                                    std::vector<Matrix> blocks, Vector rhs,
                                    Matrix covariance);
};

/// Variables are x_0..x_N and u_0..u_{N-1}.
struct ChainGraph {
  int horizon = 0;
  int state_dim = 0;
  int control_dim = 0;
  std::vector<QuadraticFactor> factors;

  /// Appends the hard factor x_{k+1} - A x_k - B u_k = c.
  void add_dynamics(int k, const Matrix& A, const Matrix& B, const Vector& c);

  /// Checks factor shapes, adjacency, and the one-dynamics-factor-per-step
  /// rule. Throws DimensionError.
  void validate() const;

  int num_variables() const;
  int offset(const VariableKey& key) const;
  int dim(const VariableKey& key) const;
};

struct ChainSolution {
  std::vector<Vector> states;
  std::vector<Vector> controls;
};

/// Minimizes the summed quadratic objective subject to the hard constraints
/// by a dense null-space step. Throws ConditioningError when the problem is
/// underdetermined or the constraints are rank deficient.
ChainSolution solve_linear_chain(const ChainGraph& graph);

/// Norm of the objective gradient projected onto the constraint null space.
double projected_gradient_norm(const ChainGraph& graph,
                               const ChainSolution& solution);

/// (M + M')/2
Matrix symmetrized(const Matrix& m);

}  // namespace cdpr::graph
