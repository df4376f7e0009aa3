#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "cdpr/errors.hpp"
#include "cdpr/gauss_graph.hpp"
#include "graph_oracles.hpp"
#include "test_util.hpp"

using namespace cdpr::graph;
using testutil::random_matrix;
using testutil::random_spd;
using testutil::random_vector;

namespace {

LqrProblem random_lqr(std::mt19937_64& rng, int n, int m, int N) {
  LqrProblem p;
  for (int k = 0; k < N; ++k) {
    p.A.push_back(testutil::random_stable(rng, n, 0.95));
    p.B.push_back(random_matrix(rng, n, m));
    p.Q.push_back(testutil::random_psd(rng, n, std::max(1, n - 2)));
    p.q.push_back(random_vector(rng, n));
    p.R.push_back(random_spd(rng, m, 0.5));
    p.r.push_back(random_vector(rng, m));
  }
  p.Qf = testutil::random_psd(rng, n, n);
  p.qf = random_vector(rng, n);
  return p;
}

LqrProblem scalar_lqr() {
  LqrProblem p;
  p.A = {Matrix::Ones(1, 1)};
  p.B = {Matrix::Ones(1, 1)};
  p.Q = {Matrix::Zero(1, 1)};
  p.q = {Vector::Zero(1)};
  p.R = {Matrix::Ones(1, 1)};
  p.r = {Vector::Zero(1)};
  p.Qf = Matrix::Ones(1, 1);
  p.qf = Vector::Zero(1);
  return p;
}

}  // namespace

TEST_CASE("eliminate_lqr: scalar closed form") {
  const auto gains = eliminate_lqr(scalar_lqr());
  REQUIRE(gains.size() == 1);
  // (R + B'QfB)^-1 B'QfA = 1/2
  CHECK(gains[0].K(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(gains[0].k_ff(0) == 0.0);
}

TEST_CASE("eliminate_lqr: zero input matrix gives zero gains") {
  std::mt19937_64 rng(3);
  LqrProblem p = random_lqr(rng, 5, 2, 20);
  for (auto& B : p.B) B.setZero();
  for (auto& r : p.r) r.setZero();
  for (const auto& g : eliminate_lqr(p)) {
    CHECK(g.K.norm() == 0.0);
    CHECK(g.k_ff.norm() == 0.0);
  }
}

TEST_CASE("eliminate_lqr: 6-state/4-control N=50 against Riccati oracle") {
  std::mt19937_64 rng(11);
  const LqrProblem p = random_lqr(rng, 6, 4, 50);
  const auto gains = eliminate_lqr(p);
  const auto ref = oracle::riccati(p.A, p.B, p.Q, p.q, p.R, p.r, p.Qf, p.qf);
  for (std::size_t k = 0; k < gains.size(); ++k) {
    CHECK(testutil::rel_err(gains[k].K, ref.K[k]) < 1e-9);
    CHECK(testutil::rel_err(gains[k].k_ff, ref.k[k]) < 1e-9);
    CHECK(testutil::rel_err(gains[k].V, ref.P[k]) < 1e-9);
  }
}

TEST_CASE("eliminate_lqr: cost-to-go Hessians stay symmetric PSD") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const LqrProblem p = random_lqr(rng, 1 + trial % 8, 1 + trial % 3, 60);
    for (const auto& g : eliminate_lqr(p)) {
      CHECK(testutil::asymmetry(g.V) < 1e-9);
      CHECK(testutil::min_eig(g.V) > -1e-9 * std::max(1.0, g.V.norm()));
    }
  }
}

TEST_CASE("eliminate_lqr: errors") {
  LqrProblem p = scalar_lqr();
  SUBCASE("singular R reports step") {
    p.R[0] = Matrix::Zero(1, 1);
    try {
      eliminate_lqr(p);
      FAIL("expected ConditioningError");
    } catch (const cdpr::ConditioningError& e) {
      CHECK(e.step() == 0);
    }
  }
  SUBCASE("dimension mismatch") {
    p.B[0] = Matrix::Ones(2, 1);
    CHECK_THROWS_AS(eliminate_lqr(p), cdpr::DimensionError);
  }
  SUBCASE("list length mismatch") {
    p.q.clear();
    CHECK_THROWS_AS(eliminate_lqr(p), cdpr::DimensionError);
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("marginalize_kf: static scalar with diffuse prior is a running mean") {
  KalmanProblem p;
  const int N = 10;
  for (int k = 0; k < N; ++k) {
    p.A.push_back(Matrix::Ones(1, 1));
    p.H.push_back(Matrix::Ones(1, 1));
    p.Sigma_w.push_back(Matrix::Zero(1, 1));
    p.Sigma_v.push_back(Matrix::Ones(1, 1));
  }
  p.Sigma_0 = Matrix::Constant(1, 1, 1e12);
  const auto out = marginalize_kf(p);
  for (int k = 0; k < N; ++k) {
    CHECK(out[static_cast<std::size_t>(k)].L(0, 0) ==
          doctest::Approx(1.0 / (k + 1)).epsilon(1e-6));
  }
}

TEST_CASE("marginalize_kf: uninformative measurements leave covariance") {
  std::mt19937_64 rng(8);
  KalmanProblem p;
  for (int k = 0; k < 15; ++k) {
    p.A.push_back(testutil::random_stable(rng, 4, 0.9));
    p.H.push_back(Matrix::Zero(3, 4));
    p.Sigma_w.push_back(random_spd(rng, 4));
    p.Sigma_v.push_back(random_spd(rng, 3));
  }
  p.Sigma_0 = random_spd(rng, 4);
  for (const auto& g : marginalize_kf(p)) {
    CHECK(g.L.norm() == 0.0);
    CHECK(g.Sigma_post == g.Sigma_prior);
  }
}

TEST_CASE("marginalize_kf: 6-state/8-measurement N=50 against both oracles") {
  std::mt19937_64 rng(21);
  KalmanProblem p;
  const int N = 50;
  for (int k = 0; k < N; ++k) {
    p.A.push_back(testutil::random_stable(rng, 6, 0.98));
    p.H.push_back(random_matrix(rng, 8, 6));
    p.Sigma_w.push_back(random_spd(rng, 6, 0.05));
    p.Sigma_v.push_back(random_spd(rng, 8, 0.2));
  }
  p.Sigma_0 = random_spd(rng, 6);
  const auto out = marginalize_kf(p);
  const auto cov = oracle::covariance_kf(p.A, p.H, p.Sigma_w, p.Sigma_v, p.Sigma_0);
  const auto info =
      oracle::information_marginals(p.A, p.H, p.Sigma_w, p.Sigma_v, p.Sigma_0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    CHECK(testutil::rel_err(out[k].L, cov.L[k]) < 1e-8);
    CHECK(testutil::rel_err(out[k].Sigma_post, cov.post[k]) < 1e-8);
    CHECK(testutil::rel_err(out[k].Sigma_prior, cov.prior[k]) < 1e-8);
    CHECK(testutil::rel_err(out[k].Sigma_post, info[k]) < 1e-8);
    // information-form gain identity L = Sigma_post H' Sigma_v^-1
    const Matrix L_info =
        info[k] * p.H[k].transpose() * p.Sigma_v[k].inverse();
    CHECK(testutil::rel_err(out[k].L, L_info) < 1e-8);
  }
}

TEST_CASE("marginalize_kf: posterior never exceeds prior") {
  std::mt19937_64 rng(4);
  KalmanProblem p;
  for (int k = 0; k < 40; ++k) {
    p.A.push_back(testutil::random_stable(rng, 5, 1.05));
    p.H.push_back(random_matrix(rng, 2, 5));
    p.Sigma_w.push_back(testutil::random_psd(rng, 5, 2));
    p.Sigma_v.push_back(random_spd(rng, 2));
  }
  p.Sigma_0 = testutil::random_psd(rng, 5, 3);
  for (const auto& g : marginalize_kf(p)) {
    const double scale = std::max(1.0, g.Sigma_prior.norm());
    CHECK(testutil::min_eig(g.Sigma_prior - g.Sigma_post) > -1e-9 * scale);
    CHECK(testutil::min_eig(g.Sigma_post) > -1e-9 * scale);
    CHECK(testutil::asymmetry(g.Sigma_post) < 1e-9);
  }
}

TEST_CASE("marginalize_kf: errors") {
  KalmanProblem p;
  p.A = {Matrix::Ones(1, 1)};
  p.H = {Matrix::Ones(1, 1)};
  p.Sigma_w = {Matrix::Zero(1, 1)};
  p.Sigma_v = {Matrix::Zero(1, 1)};
  p.Sigma_0 = Matrix::Zero(1, 1);
  CHECK_THROWS_AS(marginalize_kf(p), cdpr::ConditioningError);
  p.Sigma_v = {Matrix::Ones(2, 2)};
  CHECK_THROWS_AS(marginalize_kf(p), cdpr::DimensionError);
}

// ---------------------------------------------------------------------------

TEST_CASE("solve_linear_chain: unary priors") {
  ChainGraph g;
  g.horizon = 0;
  g.state_dim = 1;
  g.control_dim = 1;
  SUBCASE("single prior") {
    g.factors.push_back(QuadraticFactor::soft({VariableKey::state(0)},
                                              {Matrix::Ones(1, 1)},
                                              Vector::Constant(1, 3.0),
                                              Matrix::Ones(1, 1)));
    CHECK(solve_linear_chain(g).states[0](0) == doctest::Approx(3.0));
  }
  SUBCASE("two equal priors average") {
    for (double b : {0.0, 2.0}) {
      g.factors.push_back(QuadraticFactor::soft({VariableKey::state(0)},
                                                {Matrix::Ones(1, 1)},
                                                Vector::Constant(1, b),
                                                Matrix::Ones(1, 1)));
    }
    CHECK(solve_linear_chain(g).states[0](0) == doctest::Approx(1.0));
  }
  SUBCASE("stochastic factors weigh by inverse covariance") {
    g.factors.push_back(QuadraticFactor::stochastic(
        {VariableKey::state(0)}, {Matrix::Ones(1, 1)}, Vector::Constant(1, 0.0),
        Matrix::Constant(1, 1, 1.0)));
    g.factors.push_back(QuadraticFactor::stochastic(
        {VariableKey::state(0)}, {Matrix::Ones(1, 1)}, Vector::Constant(1, 4.0),
        Matrix::Constant(1, 1, 3.0)));
    CHECK(solve_linear_chain(g).states[0](0) == doctest::Approx(1.0));
  }
  SUBCASE("no factor is underdetermined") {
    CHECK_THROWS_AS(solve_linear_chain(g), cdpr::ConditioningError);
  }
}

namespace {

// LQR with tracking targets written as a factor graph, plus a hard initial
// condition.
struct LqrGraph {
  LqrProblem problem;
  ChainGraph graph;
  Vector x0;
};

LqrGraph random_lqr_graph(std::mt19937_64& rng, int n, int m, int N) {
  LqrGraph out;
  LqrProblem& p = out.problem;
  ChainGraph& g = out.graph;
  g.horizon = N;
  g.state_dim = n;
  g.control_dim = m;
  out.x0 = random_vector(rng, n);
  g.factors.push_back(QuadraticFactor::hard(
      {VariableKey::state(0)}, {Matrix::Identity(n, n)}, out.x0));
  for (int k = 0; k < N; ++k) {
    p.A.push_back(testutil::random_stable(rng, n, 0.9));
    p.B.push_back(random_matrix(rng, n, m));
    p.Q.push_back(random_spd(rng, n));
    p.R.push_back(random_spd(rng, m));
    const Vector xt = random_vector(rng, n);
    const Vector ut = random_vector(rng, m);
    p.q.push_back(-p.Q.back() * xt);
    p.r.push_back(-p.R.back() * ut);
    g.add_dynamics(k, p.A.back(), p.B.back(), Vector::Zero(n));
    g.factors.push_back(QuadraticFactor::soft(
        {VariableKey::state(k)}, {Matrix::Identity(n, n)}, xt, 0.5 * p.Q.back()));
    g.factors.push_back(QuadraticFactor::soft(
        {VariableKey::control(k)}, {Matrix::Identity(m, m)}, ut, 0.5 * p.R.back()));
  }
  p.Qf = random_spd(rng, n);
  const Vector xf = random_vector(rng, n);
  p.qf = -p.Qf * xf;
  g.factors.push_back(QuadraticFactor::soft(
      {VariableKey::state(N)}, {Matrix::Identity(n, n)}, xf, 0.5 * p.Qf));
  return out;
}

}  // namespace

TEST_CASE("solve_linear_chain: LQR graph equals elimination rollout") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const LqrGraph lg = random_lqr_graph(rng, 3 + trial % 3, 1 + trial % 2, 12);
    const auto sol = solve_linear_chain(lg.graph);
    const auto gains = eliminate_lqr(lg.problem);
    Vector x = lg.x0;
    for (std::size_t k = 0; k < gains.size(); ++k) {
      const Vector u = -gains[k].K * x - gains[k].k_ff;
      CHECK((sol.states[k] - x).norm() < 1e-10 * std::max(1.0, x.norm()));
      CHECK((sol.controls[k] - u).norm() < 1e-10 * std::max(1.0, u.norm()));
      x = lg.problem.A[k] * x + lg.problem.B[k] * u;
    }
    CHECK((sol.states.back() - x).norm() < 1e-10 * std::max(1.0, x.norm()));
  }
}

TEST_CASE("solve_linear_chain: projected gradient vanishes") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const LqrGraph lg = random_lqr_graph(rng, 2 + trial % 4, 1 + trial % 3, 8);
    const auto sol = solve_linear_chain(lg.graph);
    CHECK(projected_gradient_norm(lg.graph, sol) < 1e-8);
  }
}

TEST_CASE("solve_linear_chain: validation") {
  ChainGraph g;
  g.horizon = 2;
  g.state_dim = 2;
  g.control_dim = 1;
  g.add_dynamics(0, Matrix::Identity(2, 2), Matrix::Ones(2, 1), Vector::Zero(2));
  SUBCASE("missing dynamics factor") {
    CHECK_THROWS_AS(g.validate(), cdpr::DimensionError);
  }
  SUBCASE("duplicate dynamics factor") {
    g.add_dynamics(0, Matrix::Identity(2, 2), Matrix::Ones(2, 1), Vector::Zero(2));
    g.add_dynamics(1, Matrix::Identity(2, 2), Matrix::Ones(2, 1), Vector::Zero(2));
    CHECK_THROWS_AS(g.validate(), cdpr::DimensionError);
  }
  SUBCASE("non-adjacent factor") {
    g.add_dynamics(1, Matrix::Identity(2, 2), Matrix::Ones(2, 1), Vector::Zero(2));
    g.factors.push_back(QuadraticFactor::soft(
        {VariableKey::state(0), VariableKey::state(2)},
        {Matrix::Identity(2, 2), Matrix::Identity(2, 2)}, Vector::Zero(2),
        Matrix::Identity(2, 2)));
    CHECK_THROWS_AS(g.validate(), cdpr::DimensionError);
  }
  SUBCASE("rank-deficient constraints") {
    g.add_dynamics(1, Matrix::Identity(2, 2), Matrix::Ones(2, 1), Vector::Zero(2));
    g.factors.push_back(QuadraticFactor::hard(
        {VariableKey::state(0)}, {Matrix::Identity(2, 2)}, Vector::Zero(2)));
    g.factors.push_back(QuadraticFactor::hard(
        {VariableKey::state(0)}, {Matrix::Identity(2, 2)}, Vector::Ones(2)));
    CHECK_THROWS_AS(solve_linear_chain(g), cdpr::ConditioningError);
  }
}
