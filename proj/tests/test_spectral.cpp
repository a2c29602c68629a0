#include <complex>
#include <random>

#include "doctest.h"
#include "oseen/errors.hpp"
#include "oseen/spectral.hpp"

using namespace oseen;

namespace {

// random Chebyshev coefficients in [-1,1], seeded for reproducibility
Eigen::VectorXd random_coeffs(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd c(n);
  for (int i = 0; i < n; ++i) c[i] = dist(gen);
  return c;
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("grid nodes are ascending with exact endpoints") {
  for (int M : {8, 16, 64}) {
    auto g = build_grid(M);
    CHECK(g.nodes.size() == M + 1);
    CHECK(g.nodes[0] == 0.0);
    CHECK(g.nodes[M] == 1.0);
    for (int j = 0; j < M; ++j) CHECK(g.nodes[j] < g.nodes[j + 1]);
    CHECK(g.nodes[M / 2] == doctest::Approx(0.5).epsilon(1e-15));
  }
}

TEST_CASE("grid order validation") {
  CHECK_THROWS_AS(build_grid(4), error);
  CHECK_THROWS_AS(build_grid(9), error);
  CHECK_THROWS_AS(build_grid(0), error);
  try {
    build_grid(4);
  } catch (const error& e) {
    CHECK(e.code() == errc::config);
  }
}

TEST_CASE("differentiation is exact on polynomials of full degree") {
  for (int M : {16, 64, 128}) {
    auto g = build_grid(M);
    auto c = random_coeffs(M + 1, 1234u + M);
    auto T = chebyshev_derivatives(g.nodes, M, 4);
    Eigen::VectorXd p = T[0] * c;
    const Eigen::MatrixXd* Ds[3] = {&g.D1, &g.D2, &g.D4};
    const int orders[3] = {1, 2, 4};
    for (int k = 0; k < 3; ++k) {
      Eigen::VectorXd exact = T[orders[k]] * c;
      Eigen::VectorXd got = (*Ds[k]) * p;
      double scale = exact.segment(1, M - 1).cwiseAbs().maxCoeff();
      double err =
          (got - exact).segment(1, M - 1).cwiseAbs().maxCoeff() / scale;
      CAPTURE(M);
      CAPTURE(orders[k]);
      CHECK(err < 1e-10);
    }
  }
}

TEST_CASE("first-order matrix annihilates constants") {
  auto g = build_grid(32);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(33);
  CHECK((g.D1 * ones).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("second-order matrix agrees with squared first-order matrix") {
  for (int M : {16, 32, 64}) {
    auto g = build_grid(M);
    Eigen::MatrixXd sq = g.D1 * g.D1;
    double rel = (g.D2 - sq).norm() / g.D2.norm();
    CAPTURE(M);
    CHECK(rel < 1e-9);
  }
}

TEST_CASE("quadrature weights are positive and integrate polynomials exactly") {
  for (int M : {8, 16, 64, 128}) {
    auto g = build_grid(M);
    CHECK(g.quad_weights.minCoeff() > 0.0);
    CHECK(g.quad_weights.sum() == doctest::Approx(1.0).epsilon(1e-14));

    auto c = random_coeffs(M + 1, 77u + M);
    auto T = chebyshev_derivatives(g.nodes, M, 0);
    Eigen::VectorXd p = T[0] * c;
    // exact integral over [0,1]: T_n(2y-1) integrates to 1/(1-n^2) for even n
    double exact = 0.0;
    for (int n = 0; n <= M; n += 2) exact += c[n] / (1.0 - double(n) * n);
    double got = g.quad_weights.dot(p);
    CAPTURE(M);
    CHECK(got == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("clamped trial functions vanish with their slope at both walls") {
  auto g = build_grid(24);
  auto b = make_clamped_basis(g);
  CHECK(b.val.rows() == 25);
  CHECK(b.val.cols() == 21);
  CHECK(b.val.row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.val.row(24).cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.d1.row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.d1.row(24).cwiseAbs().maxCoeff() == 0.0);
  // first trial function is the window itself; its wall curvature is 2
  CHECK(b.d2(0, 0) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(b.d2(24, 0) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("basis derivative samples match nodal differentiation") {
  auto g = build_grid(32);
  auto b = make_clamped_basis(g);
  double r2 = (g.D2 * b.val - b.d2).norm() / b.d2.norm();
  double r4 = (g.D4 * b.val - b.d4).norm() / b.d4.norm();
  CHECK(r2 < 1e-10);
  CHECK(r4 < 1e-8);
}

TEST_CASE("reduction has interior-collocation dimensions and records the lift") {
  auto g = build_grid(16);
  Eigen::MatrixXcd A = g.D4.cast<std::complex<double>>();
  Eigen::MatrixXcd B = Eigen::MatrixXcd::Identity(17, 17);
  auto r = clamp_fourth_order(g, A, B);
  CHECK(r.A.rows() == 13);
  CHECK(r.A.cols() == 13);
  CHECK(r.B.rows() == 13);
  CHECK(r.lift.rows() == 17);
  CHECK(r.lift.cols() == 13);

  // reduced action at interior nodes equals the exact fourth derivative
  auto b = make_clamped_basis(g);
  Eigen::MatrixXd exact = b.d4.middleRows(2, 13);
  double rel = (r.A.real() - exact).norm() / exact.norm();
  CHECK(rel < 1e-9);
}

TEST_CASE("coefficients are recoverable from lifted nodal samples") {
  auto g = build_grid(24);
  auto b = make_clamped_basis(g);
  auto cr = random_coeffs(21, 5u);
  Eigen::VectorXd v = b.val * cr;
  Eigen::VectorXd back = b.val.colPivHouseholderQr().solve(v);
  CHECK((back - cr).norm() < 1e-10 * cr.norm());
}

}  // TEST_SUITE
