#include "fran/convex/embed.hpp"
#include "fran/convex/lp.hpp"
#include "fran/convex/qcqp.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace fran::convex;

namespace {

Eigen::MatrixXcd random_complex(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXcd m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = {n(rng), n(rng)};
  return m;
}

ConvexFunction sphere(Index n, const Eigen::VectorXd& center, double weight = 1.0) {
  // weight * ||x - center||^2 written as ½xᵀQx + qᵀx + c on block 0
  ConvexFunction f;
  QuadBlock q;
  q.block = 0;
  q.diagonal = Eigen::VectorXd::Constant(n, 2.0 * weight);
  f.quad.push_back(q);
  f.linear = -2.0 * weight * center;
  f.constant = weight * center.squaredNorm();
  return f;
}

LinearProgram random_lp(Index n, Index rows, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LinearProgram lp(n);
  for (Index v = 0; v < n; ++v) {
    lp.c(v) = u(rng);
    lp.lower(v) = -1.0 - std::abs(u(rng));
    lp.upper(v) = 1.0 + std::abs(u(rng));
  }
  for (Index r = 0; r < rows; ++r) {
    Eigen::VectorXd row(n);
    for (Index v = 0; v < n; ++v) row(v) = u(rng);
    lp.add_row(row, 0.2 + std::abs(u(rng)));
  }
  return lp;
}

}  // namespace

TEST_CASE("embedding round trip is the identity") {
  std::mt19937_64 rng(7);
  ComplexStack<double> stack{random_complex(6, 2, rng), random_complex(6, 2, rng), random_complex(6, 2, rng)};
  const Eigen::VectorXd x = real_embed(stack);
  const auto back = real_unembed(x, stack);
  for (std::size_t k = 0; k < stack.size(); ++k) CHECK((back[k] - stack[k]).norm() == 0.0);
}

TEST_CASE("embedding preserves the Frobenius norm") {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXcd f = random_complex(9, 3, rng);
  const Eigen::VectorXd x = real_embed(ComplexStack<double>{f});
  CHECK(x.squaredNorm() == doctest::Approx((f * f.adjoint()).trace().real()).epsilon(1e-14));
}

TEST_CASE("embedded Hermitian and linear forms match the complex forms") {
  std::mt19937_64 rng(9);
  for (int draw = 0; draw < 100; ++draw) {
    const Eigen::MatrixXcd a = random_complex(5, 5, rng);
    const Eigen::MatrixXcd b = a * a.adjoint();
    const Eigen::VectorXcd v = random_complex(5, 1, rng);
    const Eigen::VectorXcd g = random_complex(5, 1, rng);
    const Eigen::VectorXd x = embed_vector(v);
    const double complex_quad = (v.adjoint() * b * v)(0).real();
    const double real_quad = 0.5 * x.dot(embed_hermitian(b) * x);
    CHECK(std::abs(real_quad - complex_quad) <= 1e-12 * std::abs(complex_quad));
    const double complex_lin = (g.adjoint() * v)(0).real();
    CHECK(std::abs(embed_linear(g).dot(x) - complex_lin) <= 1e-12 * (1.0 + std::abs(complex_lin)));
  }
}

TEST_CASE("LP: maximize x subject to 0 <= x <= 3") {
  LinearProgram lp(1);
  lp.c(0) = -1.0;
  lp.lower(0) = 0.0;
  lp.add_row(Eigen::VectorXd::Ones(1), 3.0);
  const LpSolution sol = solve_lp(lp, SolverSettings{});
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.x(0) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("LP: maximizing with negative coefficients lands on the lower bounds") {
  LinearProgram lp(4);
  const Eigen::Vector4d gain(-1.0, -0.5, -2.0, -0.1);
  lp.c = -gain;
  lp.lower << 0.1, -2.0, 1.0, 0.0;
  lp.upper << 5.0, 3.0, 4.0, 1.0;
  const LpSolution sol = solve_lp(lp, SolverSettings{});
  REQUIRE(sol.status == SolveStatus::kOptimal);
  for (Index v = 0; v < 4; ++v) CHECK(sol.x(v) == doctest::Approx(lp.lower(v)).epsilon(1e-8));
}

TEST_CASE("LP: random instances match vertex enumeration") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 20; ++k) {
    const LinearProgram lp = random_lp(5, 4, rng);
    const auto best = oracle::enumerate_vertices(lp);
    const LpSolution sol = solve_lp(lp, SolverSettings{});
    REQUIRE(sol.status == SolveStatus::kOptimal);
    CHECK(std::abs(sol.objective - best.objective) <= 1e-6);
  }
}

TEST_CASE("LP: infeasible rows are reported") {
  LinearProgram lp(2);
  lp.lower.setZero();
  lp.add_row(Eigen::Vector2d(1.0, 1.0), -1.0);
  CHECK(solve_lp(lp, SolverSettings{}).status == SolveStatus::kInfeasible);
}

TEST_CASE("LP: fixed variables are eliminated") {
  LinearProgram lp(2);
  lp.c << -1.0, -1.0;
  lp.lower << 2.0, 0.0;
  lp.upper << 2.0, 10.0;
  lp.add_row(Eigen::Vector2d(1.0, 1.0), 5.0);
  const LpSolution sol = solve_lp(lp, SolverSettings{});
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.x(0) == 2.0);
  CHECK(sol.x(1) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("QCQP: projection onto a ball") {
  const Index n = 3;
  ConvexQcqp qp(n);
  qp.add_block(0, n);
  qp.objective = sphere(n, Eigen::VectorXd::Zero(n));
  qp.add_constraint(sphere(n, Eigen::VectorXd::Unit(n, 0)), 0.25, "ball");
  const QcqpSolution sol = solve_qcqp(qp, SolverSettings{}, Eigen::VectorXd::Unit(n, 0));
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK((sol.x - 0.5 * Eigen::VectorXd::Unit(n, 0)).norm() <= 1e-8);
  CHECK(std::abs(sol.objective - 0.25) <= 1e-8);

  SUBCASE("KKT residuals are small and grow under perturbation") {
    const KktReport at = verify_kkt(qp, sol.x, sol.multipliers);
    CHECK(at.max() <= 1e-7);
    Eigen::VectorXd moved = sol.x;
    moved(1) += 1e-3;
    const KktReport small = verify_kkt(qp, moved, sol.multipliers);
    moved(1) += 1e-3;
    const KktReport large = verify_kkt(qp, moved, sol.multipliers);
    CHECK(small.stationarity > at.stationarity);
    CHECK(large.stationarity == doctest::Approx(2.0 * small.stationarity).epsilon(0.05));
  }
}

TEST_CASE("QCQP: linear objective over the unit ball") {
  const Index n = 4;
  const Eigen::Vector4d c(1.0, -2.0, 0.5, 3.0);
  ConvexQcqp qp(n);
  qp.add_block(0, n);
  qp.objective.linear = c;
  qp.add_constraint(sphere(n, Eigen::VectorXd::Zero(n)), 1.0, "unit ball");
  const QcqpSolution sol = solve_qcqp(qp, SolverSettings{}, Eigen::VectorXd::Zero(n));
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK((sol.x + c / c.norm()).norm() <= 1e-6);
  CHECK(std::abs(sol.objective + c.norm()) <= 1e-8);
}

TEST_CASE("QCQP: infeasible start goes through phase one") {
  const Index n = 2;
  ConvexQcqp qp(n);
  qp.add_block(0, n);
  qp.objective = sphere(n, Eigen::VectorXd::Zero(n));
  qp.add_constraint(sphere(n, Eigen::Vector2d(3.0, 0.0)), 1.0, "far ball");
  const QcqpSolution sol = solve_qcqp(qp, SolverSettings{}, Eigen::Vector2d(-5.0, 4.0));
  REQUIRE(sol.status == SolveStatus::kOptimal);
  CHECK(sol.used_phase_one);
  CHECK((sol.x - Eigen::Vector2d(2.0, 0.0)).norm() <= 1e-7);
}

TEST_CASE("QCQP: disjoint balls are infeasible") {
  const Index n = 2;
  ConvexQcqp qp(n);
  qp.add_block(0, n);
  qp.objective = sphere(n, Eigen::VectorXd::Zero(n));
  qp.add_constraint(sphere(n, Eigen::Vector2d(3.0, 0.0)), 1.0);
  qp.add_constraint(sphere(n, Eigen::Vector2d(-3.0, 0.0)), 1.0);
  CHECK(solve_qcqp(qp, SolverSettings{}, Eigen::Vector2d(0.0, 0.0)).status == SolveStatus::kInfeasible);
}

TEST_CASE("QCQP: touching feasible set is solved on the relaxed problem") {
  const Index n = 2;
  ConvexQcqp qp(n);
  qp.add_block(0, n);
  qp.objective.linear = Eigen::Vector2d(0.0, 1.0);
  qp.add_constraint(sphere(n, Eigen::Vector2d(1.0, 0.0)), 1.0);
  qp.add_constraint(sphere(n, Eigen::Vector2d(-1.0, 0.0)), 1.0);
  const QcqpSolution sol = solve_qcqp(qp, SolverSettings{}, Eigen::Vector2d(0.0, 0.0));
  REQUIRE(sol.status != SolveStatus::kInfeasible);
  CHECK(sol.relaxed);
  CHECK(qp.slacks(sol.x).minCoeff() >= -1e-6);
}

TEST_CASE("QCQP: random instances match an augmented Lagrangian oracle") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int draw = 0; draw < 10; ++draw) {
    const Index n = 6;
    ConvexQcqp qp(n);
    qp.add_block(0, 3);
    qp.add_block(3, 3);
    for (Index b = 0; b < 2; ++b) {
      Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(3, 3, [&] { return nd(rng); });
      QuadBlock q;
      q.block = b;
      q.dense = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(3, 3);
      qp.objective.quad.push_back(q);
    }
    qp.objective.linear = Eigen::VectorXd::NullaryExpr(n, [&] { return 3.0 * nd(rng); });
    for (int j = 0; j < 3; ++j) {
      ConvexFunction f;
      for (Index b = 0; b < 2; ++b) {
        Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(3, 3, [&] { return nd(rng); });
        QuadBlock q;
        q.block = b;
        q.dense = a * a.transpose();
        f.quad.push_back(q);
      }
      f.linear = Eigen::VectorXd::NullaryExpr(n, [&] { return nd(rng); });
      qp.add_constraint(std::move(f), 1.0 + std::abs(nd(rng)));
    }
    const QcqpSolution sol = solve_qcqp(qp, SolverSettings{}, Eigen::VectorXd::Zero(n));
    REQUIRE(sol.status == SolveStatus::kOptimal);
    const double ref = oracle::augmented_lagrangian(qp, Eigen::VectorXd::Zero(n));
    CHECK(std::abs(sol.objective - ref) <= 1e-4 * (1.0 + std::abs(ref)));
    CHECK(verify_kkt(qp, sol.x, sol.multipliers).max() <= 1e-7);
    for (const auto& stage : sol.centering_trace)
      for (std::size_t k = 1; k < stage.size(); ++k) CHECK(stage[k] <= stage[k - 1]);
  }
}

TEST_CASE("QCQP: validation rejects an indefinite quadratic") {
  ConvexQcqp qp(2);
  qp.add_block(0, 2);
  QuadBlock q;
  q.block = 0;
  q.dense = Eigen::Matrix2d{{1.0, 0.0}, {0.0, -1.0}};
  qp.objective.quad.push_back(q);
  CHECK_THROWS_AS(qp.validate(1e-10), std::invalid_argument);
}

TEST_CASE("debug dump lists every function") {
  ConvexQcqp qp(2);
  qp.add_block(0, 2);
  qp.objective = sphere(2, Eigen::Vector2d(1.0, 0.0));
  qp.add_constraint(sphere(2, Eigen::Vector2d::Zero()), 1.0, "ball");
  std::ostringstream out;
  write_debug_dump(qp, out);
  const std::string text = out.str();
  CHECK(text.rfind("qcqp 2 1 1\n", 0) == 0);
  CHECK(text.find("function objective") != std::string::npos);
  CHECK(text.find("function constraint 0 1 ball") != std::string::npos);
  CHECK(text.find("quad 0 diag") != std::string::npos);
}
