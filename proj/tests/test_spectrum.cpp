#include <cmath>
#include <complex>
#include <functional>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oseen/errors.hpp"
#include "oseen/spectrum.hpp"

using namespace oseen;

namespace {

// ---- oracle 1: clamped-Stokes characteristic equation ----------------------
// With U = 0 the mode equation factors through W = v'' - m^2 v into
// -nu W'' + (nu m^2 - lambda) W = 0; eigenvalues are lambda = nu (m^2 + g^2)
// where g solves the transcendental equations below (even/odd families).
std::vector<double> stokes_oracle(double nu, int m, int count) {
  const double mh = 0.5 * m;
  auto even = [&](double g) {
    return g * std::sin(0.5 * g) * std::cosh(mh) +
           m * std::cos(0.5 * g) * std::sinh(mh);
  };
  auto odd = [&](double g) {
    return g * std::cos(0.5 * g) * std::sinh(mh) -
           m * std::sin(0.5 * g) * std::cosh(mh);
  };
  std::vector<double> roots;
  for (const std::function<double(double)>& f : {std::function<double(double)>(even),
                                                 std::function<double(double)>(odd)}) {
    const int scan = 4001;
    double prev = f(0.05);
    for (int i = 1; i < scan; ++i) {
      double g = 0.05 + (40.0 - 0.05) * i / (scan - 1);
      double cur = f(g);
      if ((prev < 0) != (cur < 0)) {
        double lo = 0.05 + (40.0 - 0.05) * (i - 1) / (scan - 1), hi = g;
        for (int it = 0; it < 200; ++it) {
          double mid = 0.5 * (lo + hi);
          if ((f(lo) < 0) != (f(mid) < 0))
            hi = mid;
          else
            lo = mid;
        }
        roots.push_back(0.5 * (lo + hi));
      }
      prev = cur;
    }
  }
  std::sort(roots.begin(), roots.end());
  std::vector<double> lams;
  for (double g : roots) lams.push_back(nu * (m * m + g * g));
  std::sort(lams.begin(), lams.end());
  if (static_cast<int>(lams.size()) > count) lams.resize(count);
  return lams;
}

// ---- oracle 2: compound-matrix shooting -------------------------------------
// Integrates the 2x2 minors of the fundamental system of
// v'''' = f2 v'' + f0 v from y=0 (clamped) to y=1; an eigenvalue makes the
// minor phi_12(1) vanish. Independent of any collocation matrix.
cplx shoot_minor(double nu, double a, int m, cplx lambda, int steps) {
  const double C = -a / (2.0 * nu);
  const double md = m;
  auto f2 = [&](double y) {
    const cplx imU(0.0, md * C * (y * y - y));
    return (2.0 * nu * md * md + imU - lambda) / nu;
  };
  auto f0 = [&](double y) {
    const double U = C * (y * y - y);
    const cplx t(0.0, md * md * md * U + md * 2.0 * C);
    return (-nu * md * md * md * md - t + lambda * md * md) / nu;
  };
  using State = Eigen::Matrix<cplx, 6, 1>;
  auto rhs = [&](double y, const State& p) {
    State d;
    const cplx a2 = f2(y), a0 = f0(y);
    d[0] = p[1];
    d[1] = p[2] + p[3];
    d[2] = p[4] + a2 * p[1];
    d[3] = p[4];
    d[4] = p[5] - a0 * p[0] + a2 * p[3];
    d[5] = -a0 * p[1];
    return d;
  };
  State p = State::Zero();
  p[5] = 1.0;  // two clamped solutions seeded by (v'',v''') = (1,0), (0,1)
  const double h = 1.0 / steps;
  for (int i = 0; i < steps; ++i) {
    const double y = i * h;
    State k1 = rhs(y, p);
    State k2 = rhs(y + 0.5 * h, p + 0.5 * h * k1);
    State k3 = rhs(y + 0.5 * h, p + 0.5 * h * k2);
    State k4 = rhs(y + h, p + h * k3);
    p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    double mag = p.cwiseAbs().maxCoeff();
    if (mag > 0) p /= mag;  // growth control; roots are scale-invariant
  }
  return p[0];
}

cplx shoot_eigenvalue(double nu, double a, int m, cplx seed) {
  cplx l0 = seed * (1.0 + 1e-4) + cplx(1e-4, 1e-4);
  cplx l1 = seed;
  cplx g0 = shoot_minor(nu, a, m, l0, 6000);
  cplx g1 = shoot_minor(nu, a, m, l1, 6000);
  for (int it = 0; it < 80; ++it) {
    cplx step = g1 * (l1 - l0) / (g1 - g0);
    l0 = l1;
    g0 = g1;
    l1 = l1 - step;
    if (std::abs(step) <= 1e-11 * (1.0 + std::abs(l1))) break;
    g1 = shoot_minor(nu, a, m, l1, 6000);
  }
  return l1;
}

Eigen::VectorXcd smooth_clamped_coeffs(int dim, int support, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(dim);
  for (int i = 0; i < support && i < dim; ++i) c[i] = cplx(d(gen), d(gen));
  return c;
}

}  // namespace

TEST_SUITE("spectrum") {

TEST_CASE("zero base flow reduces the operator to its viscous part") {
  auto g = build_grid(32);
  auto stokes = make_channel(1.0, 0.0, 1);
  const int m = 2;
  Eigen::MatrixXcd A = nodal_orr_sommerfeld(stokes, g, m);
  Eigen::MatrixXcd ref =
      -g.D4.cast<cplx>() + 2.0 * m * m * g.D2.cast<cplx>();
  ref.diagonal().array() -= std::pow(double(m), 4);
  CHECK((A - ref).cwiseAbs().maxCoeff() <=
        1e-14 * ref.cwiseAbs().maxCoeff());
  // Stokes limit is self-adjoint: adjoint assembly coincides
  Eigen::MatrixXcd Astar = nodal_adjoint(stokes, g, m);
  CHECK((A - Astar).cwiseAbs().maxCoeff() <=
        1e-12 * ref.cwiseAbs().maxCoeff());
}

TEST_CASE("negated wavenumber conjugates the pencil") {
  auto gb = make_bundle(24);
  auto flow = testfx::acceptance_flow();
  for (int m : {1, 3}) {
    auto p = assemble_orr_sommerfeld(flow, gb, m);
    auto q = assemble_orr_sommerfeld(flow, gb, -m);
    double scale = p.A.cwiseAbs().maxCoeff();
    CHECK((q.A.conjugate() - p.A).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    CHECK((q.B.conjugate() - p.B).cwiseAbs().maxCoeff() <=
          1e-12 * p.B.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("operator action matches a symbolic evaluation on a quartic") {
  // v = y^2 (1-y)^2 is the first trial function; its derivatives are known
  // in closed form, so the continuous operator can be evaluated directly.
  const int M = 32, m = 2;
  auto gb = make_bundle(M);
  auto flow = testfx::acceptance_flow();
  auto p = assemble_orr_sommerfeld(flow, gb, m);
  Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(M - 3);
  e0[0] = 1.0;
  Eigen::VectorXcd got = p.A * e0;

  const double nu = flow.nu;
  Eigen::VectorXcd exact(M - 3);
  for (int r = 0; r < M - 3; ++r) {
    const double y = gb->grid.nodes[r + 2];
    const double v = y * y * (1 - y) * (1 - y);
    const double vpp = 2.0 - 12.0 * y + 12.0 * y * y;
    const double vpppp = 24.0;
    const double U = flow.C * (y * y - y);
    const double Upp = 2.0 * flow.C;
    const cplx im(0.0, double(m));
    exact[r] = -nu * vpppp + (2.0 * nu * m * m + im * U) * vpp -
               (nu * std::pow(double(m), 4) + im * (double(m) * m * U) +
                im * Upp) *
                   v;
  }
  CHECK((got - exact).cwiseAbs().maxCoeff() <=
        1e-8 * exact.cwiseAbs().maxCoeff());
}

TEST_CASE("adjoint assembly satisfies the integration-by-parts pairing") {
  // For clamped smooth fields: integral (A v) conj(w) = integral v conj(A* w).
  const int M = 64, m = 1;
  auto gb = make_bundle(M);
  auto flow = testfx::acceptance_flow();
  const SpectralGrid& g = gb->grid;
  Eigen::MatrixXcd A = nodal_orr_sommerfeld(flow, g, m);
  Eigen::MatrixXcd Astar = nodal_adjoint(flow, g, m);

  auto qdot = [&](const Eigen::VectorXcd& f, const Eigen::VectorXcd& h) {
    cplx acc = 0.0;
    for (Eigen::Index j = 0; j < g.quad_weights.size(); ++j)
      acc += g.quad_weights[j] * f[j] * std::conj(h[j]);
    return acc;
  };

  for (unsigned seed : {1u, 2u, 3u}) {
    Eigen::VectorXcd cv = smooth_clamped_coeffs(M - 3, 12, seed);
    Eigen::VectorXcd cw = smooth_clamped_coeffs(M - 3, 12, seed + 100);
    Eigen::VectorXcd v = gb->basis.val * cv;
    Eigen::VectorXcd w = gb->basis.val * cw;
    Eigen::VectorXcd Av = A * v;
    Eigen::VectorXcd Asw = Astar * w;
    cplx lhs = qdot(Av, w);
    cplx rhs = qdot(v, Asw);
    double scale = std::sqrt(std::abs(qdot(Av, Av))) *
                       std::sqrt(std::abs(qdot(w, w))) +
                   std::abs(lhs);
    CHECK(std::abs(lhs - rhs) <= 1e-8 * scale);
  }
}

TEST_CASE("Stokes spectrum is real positive and matches the root oracle") {
  auto gb = make_bundle(64);
  auto stokes = make_channel(1.0, 0.0, 1);
  auto modes = solve_spectrum(assemble_orr_sommerfeld(stokes, gb, 1), 15);
  REQUIRE(modes.size() == 15);
  auto oracle = stokes_oracle(1.0, 1, 5);
  REQUIRE(oracle.size() == 5);
  for (const auto& md : modes) {
    CHECK(std::abs(md.lambda.imag()) <= 1e-8);
    CHECK(md.lambda.real() > 0.0);
  }
  for (size_t i = 0; i < oracle.size(); ++i) {
    CAPTURE(i);
    CHECK(std::abs(modes[i].lambda.real() - oracle[i]) <=
          1e-8 * (1.0 + oracle[i]));
  }
}

TEST_CASE("adjoint eigenvalues conjugate the direct ones") {
  // fully resolved low-Reynolds configuration: tight pairing
  auto gb = make_bundle(64);
  auto flow = make_channel(1.0, 1.0, 1);
  auto dir = raw_eigensolve(assemble_orr_sommerfeld(flow, gb, 1));
  auto adj = raw_eigensolve(assemble_adjoint(flow, gb, 1));
  for (int i = 0; i < 10; ++i) {
    double best = 1e300;
    for (Eigen::Index j = 0; j < adj.lambdas.size(); ++j)
      best = std::min(best, std::abs(std::conj(adj.lambdas[j]) - dir.lambdas[i]));
    CHECK(best <= 1e-10 * (1.0 + std::abs(dir.lambdas[i])));
  }
}

TEST_CASE("independently solved negative wavenumber gives conjugate spectrum") {
  auto gb = make_bundle(96);
  auto flow = testfx::acceptance_flow();
  auto pos = raw_eigensolve(assemble_orr_sommerfeld(flow, gb, 2));
  auto neg = raw_eigensolve(assemble_orr_sommerfeld(flow, gb, -2));
  for (int i = 0; i < 20; ++i) {
    double best = 1e300;
    for (Eigen::Index j = 0; j < neg.lambdas.size(); ++j)
      best = std::min(best, std::abs(std::conj(neg.lambdas[j]) - pos.lambdas[i]));
    CHECK(best <= 1e-8 * (1.0 + std::abs(pos.lambdas[i])));
  }
}

TEST_CASE("benchmark spectrum: anchors, residuals, no-slip, tangency") {
  const Spectrum& s = testfx::acceptance_spectrum();
  CHECK(s.N == 2);
  CHECK(s.gb->grid.M == 216);

  // frozen anchors for the benchmark configuration
  const cplx unstable_ref(-0.510932426, 27.411821752);
  bool found = false;
  for (int j = 0; j < s.N; ++j) {
    if (s.modes[j].m == 2) {
      found = true;
      CHECK(std::abs(s.modes[j].lambda - unstable_ref) <=
            1e-6 * std::abs(unstable_ref));
    } else {
      CHECK(s.modes[j].m == -2);
      CHECK(std::abs(s.modes[j].lambda - std::conj(unstable_ref)) <=
            1e-6 * std::abs(unstable_ref));
    }
  }
  CHECK(found);

  const int M = s.gb->grid.M;
  for (const auto& md : s.modes) {
    CHECK(md.residual <= 1e-8);
    // no-slip on direct modes, tangency on adjoint traces
    CHECK(std::abs(md.v[0]) <= 1e-10);
    CHECK(std::abs(md.v[M]) <= 1e-10);
    CHECK(std::abs(md.vp[0]) <= 1e-10);
    CHECK(std::abs(md.vp[M]) <= 1e-10);
    CHECK(std::abs(md.u[0]) <= 1e-10);
    CHECK(std::abs(md.u[M]) <= 1e-10);
    CHECK(std::abs(md.wall_data.vs_p0) <= 1e-10);
    CHECK(std::abs(md.wall_data.vs_p1) <= 1e-10);
  }

  // least-stable per wavenumber, frozen
  auto least = [&](int m) -> cplx {
    for (const auto& md : s.modes)
      if (md.m == m) return md.lambda;
    REQUIRE(false);
    return {};
  };
  CHECK(std::abs(least(1) - cplx(1.586917548, 9.451013996)) <= 1e-6 * 10.0);
  CHECK(std::abs(least(3) - cplx(4.299572375, 183.169302448)) <= 1e-6 * 184.0);
}

TEST_CASE("two-resolution invariant: both ladder starts report identical data") {
  const Spectrum& s64 = testfx::acceptance_spectrum();
  Spectrum s96 = compute_spectrum(testfx::acceptance_flow(), 96);
  REQUIRE(s64.modes.size() == s96.modes.size());
  CHECK(s96.gb->grid.M == s64.gb->grid.M);
  for (size_t j = 0; j < s64.modes.size(); ++j) {
    CHECK(std::abs(s64.modes[j].lambda - s96.modes[j].lambda) <=
          1e-8 * (1.0 + std::abs(s64.modes[j].lambda)));
  }
}

TEST_CASE("shooting oracle confirms the unstable eigenvalue") {
  const Spectrum& s = testfx::acceptance_spectrum();
  cplx lam;
  bool found = false;
  for (int j = 0; j < s.N; ++j) {
    if (s.modes[j].m == 2) {
      lam = s.modes[j].lambda;
      found = true;
    }
  }
  REQUIRE(found);
  cplx shot = shoot_eigenvalue(0.002, 1.0, 2, lam);
  CHECK(std::abs(shot - lam) <= 1e-6 * (1.0 + std::abs(lam)));
}

TEST_CASE("classical plane-channel benchmark eigenvalue") {
  // At the parameter mapping (half-width Reynolds 10^4, unit scaled
  // wavenumber) the least-stable mode rate is the classical value
  // c = 0.23752649 + 0.00373967 i, scaled into this geometry.
  auto flow = make_channel(0.0025, 1.0, 2);
  Spectrum s = compute_spectrum(flow, 64);
  const double Uc_over_h = 1.0 / (4.0 * 0.0025);  // = a/(4 nu)
  const cplx c_ref(0.23752649, 0.00373967);
  const cplx lam_ref = cplx(0.0, 1.0) * c_ref * Uc_over_h;
  CHECK(s.N == 2);
  bool found = false;
  for (int j = 0; j < s.N; ++j) {
    if (s.modes[j].m != 2) continue;
    found = true;
    CHECK(std::abs(s.modes[j].lambda - lam_ref) <=
          1e-6 * (1.0 + std::abs(lam_ref)));
  }
  CHECK(found);
}

TEST_CASE("unstable counting and the neutral margin") {
  auto mk = [](std::initializer_list<cplx> lams) {
    Spectrum s;
    for (cplx l : lams) {
      EigenMode md;
      md.lambda = l;
      s.modes.push_back(md);
    }
    return s;
  };
  CHECK(count_unstable(mk({{-0.1, 0}, {0.2, 0}, {1.0, 0}}), 1e-6) == 1);
  CHECK(count_unstable(mk({{0.3, 0}, {0.5, 0}}), 1e-6) == 0);
  CHECK_THROWS_AS(count_unstable(mk({{1e-9, 0}, {1.0, 0}}), 1e-6), error);
  try {
    count_unstable(mk({{1e-9, 0}}), 1e-6);
  } catch (const error& e) {
    CHECK(e.kind() == "NeutralEigenvalue");
    CHECK(e.code() == errc::hypothesis);
  }
}

TEST_CASE("semisimplicity rank test") {
  // separated eigenvalues pass with multiplicity one
  {
    std::vector<cplx> lams{{-1.0, 0.0}, {-2.0, 0.5}};
    std::vector<Eigen::VectorXcd> vecs{Eigen::VectorXcd::Unit(4, 0),
                                       Eigen::VectorXcd::Unit(4, 1)};
    auto rep = check_semisimple_pairs(lams, vecs, 1e-6);
    CHECK(rep.pass);
    CHECK(rep.clusters.size() == 2);
    for (const auto& c : rep.clusters) {
      CHECK(c.algebraic == 1);
      CHECK(c.geometric == 1);
    }
  }
  // synthetic defective block through the same code path
  {
    Eigen::MatrixXcd J(2, 2);
    J << 1.0, 1.0, 0.0, 1.0;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(J, true);
    std::vector<cplx> lams{es.eigenvalues()[0], es.eigenvalues()[1]};
    std::vector<Eigen::VectorXcd> vecs{es.eigenvectors().col(0),
                                       es.eigenvectors().col(1)};
    auto rep = check_semisimple_pairs(lams, vecs, 1e-6);
    CHECK(!rep.pass);
    REQUIRE(rep.clusters.size() == 1);
    CHECK(rep.clusters[0].algebraic == 2);
    CHECK(rep.clusters[0].geometric == 1);
  }
  // conjugate pair at distinct values: two clean clusters
  {
    std::vector<cplx> lams{{-0.5, 2.0}, {-0.5, -2.0}};
    std::vector<Eigen::VectorXcd> vecs{Eigen::VectorXcd::Unit(4, 0),
                                       Eigen::VectorXcd::Unit(4, 1)};
    auto rep = check_semisimple_pairs(lams, vecs, 1e-6);
    CHECK(rep.pass);
    CHECK(rep.clusters.size() == 2);
  }
  // the benchmark spectrum itself
  CHECK(check_semisimple(testfx::acceptance_spectrum(), 1e-6).pass);
}

TEST_CASE("biorthonormal system on the benchmark spectrum") {
  const Spectrum& s = testfx::acceptance_spectrum();
  double worst = 0.0;
  for (int j = 0; j < s.N; ++j)
    for (int k = 0; k < s.N; ++k)
      worst = std::max(worst,
                       std::abs(s.gram(j, k) - (j == k ? cplx(1) : cplx(0))));
  CHECK(worst <= 1e-8);

  // pre-normalization biorthogonality across distinct unstable eigenvalues
  // is structural here (different wavenumbers): check the same-m stable pair
  const SpectralGrid& g = s.gb->grid;
  const EigenMode* m2a = nullptr;
  const EigenMode* m2b = nullptr;
  for (const auto& md : s.modes) {
    if (md.m != 2) continue;
    if (!m2a) {
      m2a = &md;
    } else if (!m2b) {
      m2b = &md;
      break;
    }
  }
  REQUIRE(m2b != nullptr);
  double cross = std::abs(
      mode_inner(g, 2, m2a->v, m2a->vp, m2b->v_star, m2b->vs_p));
  double na = mode_norm(g, 2, m2a->v, m2a->vp);
  double nb = mode_norm(g, 2, m2b->v_star, m2b->vs_p);
  CHECK(cross <= 1e-6 * na * nb);
}

TEST_CASE("block normalization of a repeated eigenvalue") {
  auto gb = make_bundle(16);
  auto flow = make_channel(1.0, 1.0, 1);
  const int dim = 13;
  Eigen::VectorXcd c1 = Eigen::VectorXcd::Unit(dim, 0);
  Eigen::VectorXcd c2 = Eigen::VectorXcd::Unit(dim, 1);

  auto mk = [&](const Eigen::VectorXcd& c, bool adjoint, cplx lam) {
    EigenMode md;
    md.m = 1;
    md.lambda = lam;
    Eigen::VectorXcd v = gb->basis.val * c;
    Eigen::VectorXcd vp = gb->basis.d1 * c;
    double n = mode_norm(gb->grid, 1, v, vp);
    v /= n;
    vp /= n;
    if (adjoint) {
      md.v_star = v;
      md.vs_p = vp;
      md.u_star = cplx(0, 1) * vp;
    } else {
      md.v = v;
      md.vp = vp;
      md.u = cplx(0, 1) * vp;
      md.vpp = gb->basis.d2 * c / n;
    }
    return md;
  };

  const cplx lam(-1.0, 0.0);
  std::vector<EigenMode> dir{mk(c1, false, lam), mk(c2, false, lam)};
  std::vector<EigenMode> adj{mk(c1 + 0.3 * c2, true, lam),
                             mk(0.2 * c1 + c2, true, lam)};
  Spectrum s = biorthonormalize(dir, adj, gb, flow, 1e-8);
  REQUIRE(s.N == 2);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k)
      CHECK(std::abs(s.gram(j, k) - (j == k ? cplx(1) : cplx(0))) <= 1e-10);
}

TEST_CASE("degenerate pairing is rejected") {
  auto gb = make_bundle(16);
  auto flow = make_channel(1.0, 1.0, 1);
  const int dim = 13;
  Eigen::VectorXcd c1 = Eigen::VectorXcd::Unit(dim, 0);
  Eigen::VectorXcd c2 = Eigen::VectorXcd::Unit(dim, 1);

  // adjoint built orthogonal to the direct mode in the mode inner product
  Eigen::VectorXcd v1 = gb->basis.val * c1, vp1 = gb->basis.d1 * c1;
  Eigen::VectorXcd v2 = gb->basis.val * c2, vp2 = gb->basis.d1 * c2;
  cplx beta = mode_inner(gb->grid, 1, v2, vp2, v1, vp1) /
              mode_inner(gb->grid, 1, v1, vp1, v1, vp1);
  Eigen::VectorXcd cperp = c2 - beta * c1;

  auto mk = [&](const Eigen::VectorXcd& c, bool adjoint) {
    EigenMode md;
    md.m = 1;
    md.lambda = cplx(-1.0, 0.0);
    Eigen::VectorXcd v = gb->basis.val * c;
    Eigen::VectorXcd vp = gb->basis.d1 * c;
    double n = mode_norm(gb->grid, 1, v, vp);
    v /= n;
    vp /= n;
    if (adjoint) {
      md.v_star = v;
      md.vs_p = vp;
      md.u_star = cplx(0, 1) * vp;
    } else {
      md.v = v;
      md.vp = vp;
      md.u = cplx(0, 1) * vp;
    }
    return md;
  };
  std::vector<EigenMode> dir{mk(c1, false)};
  std::vector<EigenMode> adj{mk(cperp, true)};
  CHECK_THROWS_AS(biorthonormalize(dir, adj, gb, flow, 1e-8), error);
  try {
    biorthonormalize(dir, adj, gb, flow, 1e-8);
  } catch (const error& e) {
    CHECK(e.kind() == "DegeneratePairing");
  }
}

TEST_CASE("unique continuation margins") {
  const Spectrum& s = testfx::acceptance_spectrum();
  auto rep = unique_continuation_check(s, 1e-6);
  CHECK(rep.pass);
  REQUIRE(rep.direct_margin.size() == size_t(s.N));
  for (int j = 0; j < s.N; ++j) {
    CHECK(rep.direct_margin[j] >= 1.0);   // far above the acceptance floor
    CHECK(rep.adjoint_margin[j] >= 1.0);
  }
  auto rep0 = unique_continuation_check(s, 0.0);
  CHECK(rep0.pass);

  // degenerate guard: a zero mode fails any positive floor
  Spectrum z = s;
  z.N = 1;
  z.modes[0].v.setZero();
  z.modes[0].vp.setZero();
  z.modes[0].wall_data.vpp0 = 0.0;
  z.modes[0].wall_data.vpp1 = 0.0;
  auto repz = unique_continuation_check(z, 1e-6);
  CHECK(!repz.pass);
}

TEST_CASE("solver rejects zero wavenumber and reports sorted output") {
  auto gb = make_bundle(16);
  auto flow = testfx::acceptance_flow();
  CHECK_THROWS_AS(nodal_orr_sommerfeld(flow, gb->grid, 0), error);
  auto modes = solve_spectrum(assemble_orr_sommerfeld(flow, gb, 1), 6);
  for (size_t i = 1; i < modes.size(); ++i)
    CHECK(modes[i].lambda.real() >= modes[i - 1].lambda.real());
}

}  // TEST_SUITE
