#include "oseen/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "oseen/errors.hpp"

namespace oseen {

namespace {

double cond_number(const Eigen::MatrixXcd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A);
  const auto& sv = svd.singularValues();
  double smin = sv(sv.size() - 1), smax = sv(0);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

double cond_number_real(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  double smin = sv(sv.size() - 1), smax = sv(0);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

// direct-mode wall trace, same orientation convention as adjoint_trace
cplx direct_trace(const EigenMode& mode, int wall) {
  return wall == 0 ? -mode.wall_data.up0 : mode.wall_data.up1;
}

// oblique weight alpha0 * H(w) on a wall, H(0) = -1, H(1) = 1
double oblique_weight(double alpha0, int wall) {
  return wall == 0 ? -alpha0 : alpha0;
}

void check_gains_match(const Spectrum& s, const GainParameters& gains) {
  if (static_cast<int>(gains.lambdas.size()) != s.N)
    fail(errc::config, "ConfigError",
         "gain parameters were built for a different number of unstable modes");
  for (int j = 0; j < s.N; ++j) {
    cplx lam = s.modes[j].lambda;
    if (std::abs(gains.lambdas[j] - lam) > 1e-6 * (1.0 + std::abs(lam)))
      fail(errc::config, "ConfigError",
           "gain parameters do not match the spectrum's unstable eigenvalues");
  }
}

// shared scaffolding of every variant: gains sanity, trace Gram, inverse
FeedbackLaw base_law(const Spectrum& s, const GainParameters& gains,
                     double alpha0, int wall) {
  if (s.N == 0)
    fail(errc::config, "ConfigError",
         "feedback law requires at least one unstable mode");
  check_gains_match(s, gains);

  TraceGram tg = gram_matrix(s, wall);
  if (!(tg.cond < 1e12))
    fail(errc::hypothesis, "IndependenceFailure",
         "unstable adjoint traces are numerically dependent on the "
         "active boundary (cond = " +
             std::to_string(tg.cond) + ")");

  FeedbackLaw law;
  law.nu = s.flow.nu;
  law.alpha0 = alpha0;
  law.k_shift = gains.k_shift;
  law.eta = gains.eta;
  law.active_wall = wall;
  law.F = tg.F;
  law.cond_F = tg.cond;
  law.X = tg.F.fullPivLu().inverse();
  law.mu = gains.mu;
  law.rho = gains.rho;
  law.m.resize(s.N);
  law.lambda.resize(s.N);
  law.phi.assign(s.N, BoundaryData{});
  for (int j = 0; j < s.N; ++j) {
    law.m[j] = s.modes[j].m;
    law.lambda[j] = s.modes[j].lambda;
    for (int l = 0; l < s.N; ++l) {
      if (s.modes[l].m != s.modes[j].m) continue;
      cplx c = std::conj(law.X(l, j));
      if (wall != 0) law.phi[j].u1 += c * adjoint_trace(s.modes[l], 1);
      if (wall != 1) law.phi[j].u0 += c * adjoint_trace(s.modes[l], 0);
    }
  }
  return law;
}

}  // namespace

Variant parse_variant(const std::string& name) {
  if (name == "complex") return Variant::complex_modes;
  if (name == "real") return Variant::real_modes;
  if (name == "restricted") return Variant::restricted;
  fail(errc::config, "ConfigError",
       "unknown variant '" + name + "' (expected complex, real or restricted)");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::complex_modes: return "complex";
    case Variant::real_modes: return "real";
    case Variant::restricted: return "restricted";
  }
  return "?";
}

double gain_margin(cplx lambda, double nu, double k, double eta) {
  double kl2 = std::norm(k + lambda);
  return (kl2 - eta * k * nu) * lambda.real() -
         eta * nu * (lambda * lambda).real();
}

cplx mu_factor(cplx lambda, double nu, double k, double eta) {
  return (k + lambda) / (k + lambda - nu * eta);
}

GainParameters select_gains(const std::vector<cplx>& unstable_lambdas,
                            double nu) {
  if (unstable_lambdas.empty())
    fail(errc::config, "ConfigError",
         "gain search requires at least one unstable eigenvalue");
  double lmax = 0.0;
  for (cplx lam : unstable_lambdas) {
    if (!(lam.real() < 0.0))
      fail(errc::config, "ConfigError",
           "gain search input must have Re(lambda) < 0");
    lmax = std::max(lmax, std::abs(lam));
  }
  const double base = std::max(1.0, lmax);

  std::string blocking;  // per-eigenvalue report of the last rung examined
  for (int p = 0; p <= 16; ++p) {
    const double k = base * static_cast<double>(1 << p);
    // margin(eta) = a*eta + b per eigenvalue; the eta^2 coefficient of the
    // expanded inequality vanishes identically, so each admissible set is
    // the half line eta > -b/a when the slope a is positive and empty
    // otherwise (b < 0 always, since Re lambda < 0).
    double lo = 0.0;
    bool feasible = true;
    std::ostringstream rep;
    for (size_t j = 0; j < unstable_lambdas.size(); ++j) {
      cplx lam = unstable_lambdas[j];
      double a = -nu * (k * lam.real() + (lam * lam).real());
      double b = std::norm(k + lam) * lam.real();
      rep << (j ? "; " : "") << "lambda[" << j << "]: ";
      if (a <= 0.0) {
        feasible = false;
        rep << "empty (slope " << a << ")";
      } else {
        double lo_j = -b / a;
        lo = std::max(lo, lo_j);
        rep << "eta > " << lo_j;
      }
    }
    blocking = "k = " + std::to_string(k) + ": " + rep.str();
    if (!feasible) continue;

    const double eta = 1.5 * lo;  // midpoint of the surrogate [lo, 2 lo]
    bool pole_ok = true;
    for (cplx lam : unstable_lambdas) {
      if (std::abs(k + lam - nu * eta) < 1e-8 * (k + 1.0)) pole_ok = false;
      if (!(gain_margin(lam, nu, k, eta) > 0.0)) pole_ok = false;
    }
    if (!pole_ok) continue;

    GainParameters gp;
    gp.k_shift = k;
    gp.eta = eta;
    gp.nu = nu;
    gp.lambdas = unstable_lambdas;
    gp.mu.reserve(unstable_lambdas.size());
    gp.rho.reserve(unstable_lambdas.size());
    for (cplx lam : unstable_lambdas) {
      cplx mu = mu_factor(lam, nu, k, eta);
      gp.mu.push_back(mu);
      gp.rho.push_back(lam * mu);
    }
    return gp;
  }
  fail(errc::gains, "InfeasibleGains",
       "no (k, eta) pair on the geometric ladder satisfies every modal "
       "margin; last rung: " +
           blocking);
}

TraceGram gram_matrix(const Spectrum& s, int wall) {
  if (s.N == 0)
    fail(errc::config, "ConfigError", "trace Gram requires unstable modes");
  if (wall < -1 || wall > 1)
    fail(errc::config, "ConfigError", "wall index must be -1, 0 or 1");
  TraceGram tg;
  tg.F = Eigen::MatrixXcd::Zero(s.N, s.N);
  for (int i = 0; i < s.N; ++i) {
    for (int j = 0; j < s.N; ++j) {
      if (s.modes[i].m != s.modes[j].m) continue;
      cplx acc = 0.0;
      for (int w = 0; w < 2; ++w) {
        if (wall != -1 && w != wall) continue;
        acc += adjoint_trace(s.modes[i], w) * std::conj(adjoint_trace(s.modes[j], w));
      }
      tg.F(i, j) = acc;
    }
  }
  tg.cond = cond_number(tg.F);
  return tg;
}

FeedbackLaw build_feedback(const Spectrum& s, const GainParameters& gains,
                           double alpha0) {
  FeedbackLaw law = base_law(s, gains, alpha0, -1);
  law.variant = Variant::complex_modes;
  return law;
}

FeedbackLaw restrict_support(const Spectrum& s, const FeedbackLaw& base,
                             int wall) {
  if (wall != 0 && wall != 1)
    fail(errc::config, "ConfigError", "active wall must be 0 or 1");
  GainParameters gains;
  gains.k_shift = base.k_shift;
  gains.eta = base.eta;
  gains.nu = base.nu;
  gains.lambdas = base.lambda;
  gains.mu = base.mu;
  gains.rho = base.rho;
  FeedbackLaw law = base_law(s, gains, base.alpha0, wall);
  law.variant = Variant::restricted;
  return law;
}

FeedbackLaw real_feedback(const Spectrum& s, const GainParameters& gains,
                          double alpha0) {
  FeedbackLaw law = base_law(s, gains, alpha0, -1);
  law.variant = Variant::real_modes;
  RealVariantData& rv = law.real;

  const SpectralGrid& g = s.gb->grid;
  const double nu = s.flow.nu;
  const double k = law.k_shift;
  const double eta = law.eta;

  // conjugate-pair representatives: unstable modes at positive wavenumber,
  // each checked against its mirror partner
  std::vector<int> rep;     // index into s.modes
  std::vector<int> rep_rho; // index into gains.rho for the representative
  for (int j = 0; j < s.N; ++j) {
    if (s.modes[j].m <= 0) continue;
    bool mirrored = false;
    for (int l = 0; l < s.N; ++l) {
      if (s.modes[l].m != -s.modes[j].m) continue;
      if (std::abs(std::conj(s.modes[j].lambda) - s.modes[l].lambda) <=
          1e-6 * (1.0 + std::abs(s.modes[j].lambda))) {
        mirrored = true;
        break;
      }
    }
    if (!mirrored)
      fail(errc::hypothesis, "DegeneratePairing",
           "real variant requires a conjugate mirror for every unstable mode");
    rep.push_back(j);
    rep_rho.push_back(j);
  }
  const int P = static_cast<int>(rep.size());
  if (P == 0)
    fail(errc::config, "ConfigError",
         "real variant found no positive-wavenumber unstable modes");
  const int A = 2 * P;

  // direct-mode inner products over representatives (zero across
  // wavenumbers; the +m coefficient algebra below rides on this matrix)
  Eigen::MatrixXcd Pdir = Eigen::MatrixXcd::Zero(P, P);
  for (int q = 0; q < P; ++q)
    for (int t = 0; t < P; ++t) {
      const EigenMode& mq = s.modes[rep[q]];
      const EigenMode& mt = s.modes[rep[t]];
      if (mq.m != mt.m) continue;
      Pdir(q, t) = mode_inner(g, mq.m, mq.v, mq.vp, mt.v, mt.vp);
    }

  // the real field 2 Re(sum_q gamma(q) mode_q) paired with another such
  // field: sum over shared wavenumbers of twice the real part
  auto real_inner = [&](const Eigen::RowVectorXcd& ga,
                        const Eigen::RowVectorXcd& gb) {
    cplx acc = (ga * Pdir * gb.adjoint())(0, 0);
    return 2.0 * acc.real();
  };

  // raw real basis: Re(mode_q) -> gamma = 1/2, Im(mode_q) -> gamma = -i/2;
  // modified Gram-Schmidt in the real pairing (wavenumber groups decouple)
  rv.gamma = Eigen::MatrixXcd::Zero(A, P);
  for (int q = 0; q < P; ++q) {
    rv.gamma(2 * q, q) = cplx(0.5, 0.0);
    rv.gamma(2 * q + 1, q) = cplx(0.0, -0.5);
  }
  for (int a = 0; a < A; ++a) {
    Eigen::RowVectorXcd row = rv.gamma.row(a);
    const double orig = std::sqrt(real_inner(row, row));
    for (int b = 0; b < a; ++b) {
      double c = real_inner(row, rv.gamma.row(b));
      row -= c * rv.gamma.row(b);
    }
    double nrm = std::sqrt(std::max(0.0, real_inner(row, row)));
    if (nrm < 1e-8 * orig)
      fail(errc::hypothesis, "IndependenceFailure",
           "real functional system is rank deficient (a mode's real and "
           "imaginary parts are parallel)");
    rv.gamma.row(a) = row / nrm;
  }

  // carrier wavenumber per functional (unique by construction)
  std::vector<int> carrier(A);
  for (int a = 0; a < A; ++a) carrier[a] = s.modes[rep[a / 2]].m;

  // wall traces of the functionals and of the representatives
  rv.chi = Eigen::MatrixXcd::Zero(A, 2);
  for (int a = 0; a < A; ++a)
    for (int q = 0; q < P; ++q) {
      if (s.modes[rep[q]].m != carrier[a]) continue;
      for (int w = 0; w < 2; ++w)
        rv.chi(a, w) += rv.gamma(a, q) * direct_trace(s.modes[rep[q]], w);
    }

  // lifted pairings through the adjoint-operator Dirichlet map
  rv.B = Eigen::MatrixXd::Zero(A, A);
  for (int a = 0; a < A; ++a) {
    BoundaryData bd;
    bd.u0 = rv.chi(a, 0);
    bd.u1 = rv.chi(a, 1);
    LiftedField lift = solve_dirichlet_mode(s.flow, g, carrier[a], k, bd,
                                            ModePencil::Kind::adjoint);
    for (int l = 0; l < A; ++l) {
      if (carrier[l] != carrier[a]) continue;
      cplx acc = 0.0;
      for (int q = 0; q < P; ++q) {
        const EigenMode& mq = s.modes[rep[q]];
        if (mq.m != carrier[a]) continue;
        acc += std::conj(rv.gamma(l, q)) *
               mode_inner(g, mq.m, lift.v, lift.vp, mq.v, mq.vp);
      }
      rv.B(l, a) = 2.0 * acc.real();
    }
  }
  if (!(cond_number_real(rv.B) < 1e12))
    fail(errc::hypothesis, "IndependenceFailure",
         "real lifted-pairing matrix is numerically singular");
  rv.alpha_star = rv.B.fullPivLu().inverse();

  // actuator traces
  rv.phi = Eigen::MatrixXcd::Zero(A, 2);
  for (int a = 0; a < A; ++a)
    for (int b = 0; b < A; ++b) {
      if (carrier[b] != carrier[a]) continue;
      for (int w = 0; w < 2; ++w)
        rv.phi(a, w) += rv.alpha_star(b, a) * rv.chi(b, w);
    }

  // resolvent pairings of the actuators with the adjoint modes
  rv.W = Eigen::MatrixXcd::Zero(A, P);
  for (int a = 0; a < A; ++a)
    for (int q = 0; q < P; ++q) {
      const EigenMode& mq = s.modes[rep[q]];
      if (mq.m != carrier[a]) continue;
      cplx T = 0.0;
      for (int w = 0; w < 2; ++w)
        T += rv.phi(a, w) * std::conj(adjoint_trace(mq, w));
      rv.W(a, q) = -nu * T / (mq.lambda + k);
    }

  // modal pairings and the coordinate map xi = Xi x
  rv.Pi = Eigen::MatrixXcd::Zero(P, A);
  for (int q = 0; q < P; ++q)
    for (int a = 0; a < A; ++a) {
      if (s.modes[rep[q]].m != carrier[a]) continue;
      cplx acc = 0.0;
      for (int t = 0; t < P; ++t)
        acc += std::conj(rv.gamma(a, t)) * Pdir(q, t);
      rv.Pi(q, a) = acc;
    }
  rv.Xi = Eigen::MatrixXd::Zero(A, A);
  for (int a = 0; a < A; ++a)
    for (int q = 0; q < P; ++q) {
      rv.Xi(a, 2 * q) = 2.0 * rv.Pi(q, a).real();
      rv.Xi(a, 2 * q + 1) = -2.0 * rv.Pi(q, a).imag();
    }

  // per-pair gains: with x = kappa1 + kappa2, d = kappa1 - kappa2 and
  // feedthrough beta = eta r W of the pair, the shifted pair coordinate obeys
  //   (1 + beta x) dc/dt + beta d dcbar/dt = -lambda c,
  // whose real 2x2 form has trace -2 Re((1 + conj(beta) x) lambda) / Delta
  // and determinant |lambda|^2 / Delta with Delta = |1+beta x|^2 - |beta|^2 d^2.
  // Matching trace and determinant to the target pair {-rho, -conj(rho)}:
  //   Delta = |lambda|^2 / |rho|^2,
  //   x     = (Re rho Delta - Re lambda) / Re(conj(beta) lambda),
  //   d^2   = (|1 + beta x|^2 - Delta) / |beta|^2,
  // so the closed pair rate equals the complex variant's rho exactly. If the
  // frequency target leaves d^2 < 0 it is relaxed upward; the decay rate
  // Re rho is preserved either way.
  rv.pairs.resize(P);
  for (int q = 0; q < P; ++q) {
    const EigenMode& mq = s.modes[rep[q]];
    RealPair& pr = rv.pairs[q];
    pr.m = mq.m;
    pr.lambda = mq.lambda;
    pr.r = mode_norm(g, mq.m, mq.v, mq.vp) / std::sqrt(2.0);
    pr.beta = eta * pr.r * rv.W(2 * q, q);
    const cplx rho = gains.rho[rep_rho[q]];
    const double ga = rho.real();
    const double b2 = std::norm(pr.beta);
    const double R = (std::conj(pr.beta) * mq.lambda).real();
    if (std::abs(R) <= 1e-14 * std::sqrt(b2) * std::abs(mq.lambda))
      fail(errc::gains, "InfeasibleGains",
           "real-pair feedthrough cannot steer the pair rate");
    double om = std::abs(rho.imag());
    double x = 0.0, dd = -1.0;
    for (int trial = 0; trial < 60 && dd < 0.0; ++trial) {
      const double Delta = std::norm(mq.lambda) / (ga * ga + om * om);
      x = (ga * Delta - mq.lambda.real()) / R;
      dd = (std::norm(1.0 + pr.beta * x) - Delta) / b2;
      if (dd < 0.0) om = (om == 0.0) ? std::abs(mq.lambda) : om * 2.0;
    }
    if (dd < 0.0)
      fail(errc::gains, "InfeasibleGains",
           "no real gain pair reaches the prescribed decay rate");
    const double d = std::sqrt(dd);
    pr.kappa1 = 0.5 * (x + d);
    pr.kappa2 = 0.5 * (x - d);
    pr.rho_closed = cplx(ga, om);
  }

  // closed unstable block dx/dt = -(I + eta G)^{-1} L x
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(A, A);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(A, A);
  Eigen::VectorXd kap(A);
  for (int q = 0; q < P; ++q) {
    const cplx lam = rv.pairs[q].lambda;
    L(2 * q, 2 * q) = lam.real();
    L(2 * q, 2 * q + 1) = -lam.imag();
    L(2 * q + 1, 2 * q) = lam.imag();
    L(2 * q + 1, 2 * q + 1) = lam.real();
    kap[2 * q] = rv.pairs[q].kappa1;
    kap[2 * q + 1] = rv.pairs[q].kappa2;
  }
  for (int q = 0; q < P; ++q)
    for (int b = 0; b < A; ++b) {
      double re = 0.0, im = 0.0;
      for (int a = 0; a < A; ++a) {
        re += kap[a] * rv.Xi(a, b) * rv.W(a, q).real();
        im += kap[a] * rv.Xi(a, b) * rv.W(a, q).imag();
      }
      G(2 * q, b) = re;
      G(2 * q + 1, b) = im;
    }
  rv.closed = (Eigen::MatrixXd::Identity(A, A) + eta * G).fullPivLu().solve(L);

  // raw-state measurement gain: xi = (I + eta V K)^{-1} xi^Y
  rv.V = Eigen::MatrixXd::Zero(A, A);
  for (int a = 0; a < A; ++a)
    for (int b = 0; b < A; ++b) {
      double acc = 0.0;
      for (int q = 0; q < P; ++q)
        acc += 2.0 * (rv.W(b, q) * rv.Pi(q, a)).real();
      rv.V(a, b) = acc;
    }
  Eigen::MatrixXd K = kap.asDiagonal();
  rv.mu_real =
      K * (Eigen::MatrixXd::Identity(A, A) + eta * rv.V * K).fullPivLu().inverse();

  return law;
}

namespace {

// modal measurement <Y_m, phi*_j> for every unstable mode; states missing a
// carrier wavenumber contribute zero
std::vector<cplx> modal_amplitudes(const Spectrum& s,
                                   const std::vector<ModeState>& Y) {
  std::vector<cplx> v(s.N, cplx(0.0));
  for (int j = 0; j < s.N; ++j) {
    const EigenMode& md = s.modes[j];
    for (const ModeState& st : Y) {
      if (st.m != md.m) continue;
      if (st.v.size() != md.v.size())
        fail(errc::config, "ConfigError",
             "state resolution does not match the law's grid");
      v[j] += mode_inner(s.gb->grid, md.m, st.v, st.vp, md.v_star, md.vs_p);
    }
  }
  return v;
}

void add_coeff(std::vector<BoundaryCoeff>& list, int m, cplx u, cplx v) {
  for (BoundaryCoeff& c : list) {
    if (c.m == m) {
      c.u += u;
      c.v += v;
      return;
    }
  }
  list.push_back({m, u, v});
}

// appends the oblique (normal) term sigma * alpha(x) n to the wall lists
void add_normal_term(const FeedbackLaw& law, cplx sigma, ControlSignal& sig) {
  if (law.variant == Variant::restricted) {
    const int w = law.active_wall;
    const cplx vhat = wall_normal_sign(w) * sigma * law.alpha0 * 0.5;
    add_coeff(sig.wall[w], 1, 0.0, vhat);
    add_coeff(sig.wall[w], -1, 0.0, vhat);
  } else {
    for (int w = 0; w < 2; ++w) {
      const cplx vhat = wall_normal_sign(w) * sigma *
                        oblique_weight(law.alpha0, w);
      add_coeff(sig.wall[w], 0, 0.0, vhat);
    }
  }
}

// xi^Y entries: <P_N Y, psi_a> through the representatives and mirrors
Eigen::VectorXcd xi_raw(const Spectrum& s, const FeedbackLaw& law,
                        const std::vector<cplx>& v_all) {
  const RealVariantData& rv = law.real;
  const int P = static_cast<int>(rv.pairs.size());
  const int A = 2 * P;
  // representative amplitude and mirror amplitude per pair, located by
  // wavenumber and eigenvalue among the unstable modes
  Eigen::VectorXcd xr(A);
  for (int a = 0; a < A; ++a) {
    cplx acc = 0.0;
    for (int q = 0; q < P; ++q) {
      const RealPair& pr = rv.pairs[q];
      cplx vq = 0.0, vm = 0.0;
      for (int j = 0; j < s.N; ++j) {
        if (s.modes[j].m == pr.m &&
            std::abs(s.modes[j].lambda - pr.lambda) <
                1e-6 * (1.0 + std::abs(pr.lambda)))
          vq = v_all[j];
        if (s.modes[j].m == -pr.m &&
            std::abs(s.modes[j].lambda - std::conj(pr.lambda)) <
                1e-6 * (1.0 + std::abs(pr.lambda)))
          vm = v_all[j];
      }
      acc += vq * rv.Pi(q, a) + vm * std::conj(rv.Pi(q, a));
    }
    xr[a] = acc;
  }
  return xr;
}

}  // namespace

ControlSignal evaluate_control(const Spectrum& s, const FeedbackLaw& law,
                               const std::vector<ModeState>& Y) {
  ControlSignal sig;
  std::vector<cplx> v = modal_amplitudes(s, Y);

  if (law.variant == Variant::real_modes) {
    const RealVariantData& rv = law.real;
    const int A = static_cast<int>(rv.mu_real.rows());
    Eigen::VectorXcd xr = xi_raw(s, law, v);
    Eigen::VectorXcd kp = rv.mu_real.cast<cplx>() * xr;
    sig.amplitudes.assign(xr.data(), xr.data() + A);
    cplx sigma = 0.0;
    for (int a = 0; a < A; ++a) sigma += law.eta * kp[a];
    sig.sigma = sigma;
    for (int a = 0; a < A; ++a) {
      const int m = rv.pairs[a / 2].m;
      for (int w = 0; w < 2; ++w) {
        add_coeff(sig.wall[w], m, law.eta * kp[a] * rv.phi(a, w), 0.0);
        add_coeff(sig.wall[w], -m, law.eta * kp[a] * std::conj(rv.phi(a, w)),
                  0.0);
      }
    }
    add_normal_term(law, sigma, sig);
    return sig;
  }

  sig.amplitudes = v;
  cplx sigma = 0.0;
  for (int j = 0; j < s.N; ++j) sigma += law.eta * law.mu[j] * v[j];
  sig.sigma = sigma;
  for (int j = 0; j < s.N; ++j) {
    const cplx scale = law.eta * law.mu[j] * v[j];
    if (law.active_wall != 1)
      add_coeff(sig.wall[0], law.m[j], scale * law.phi[j].u0, 0.0);
    if (law.active_wall != 0)
      add_coeff(sig.wall[1], law.m[j], scale * law.phi[j].u1, 0.0);
  }
  add_normal_term(law, sigma, sig);
  return sig;
}

std::vector<cplx> project_z(const Spectrum& s, const FeedbackLaw& law,
                            const std::vector<ModeState>& Y) {
  if (law.variant == Variant::real_modes)
    fail(errc::config, "ConfigError",
         "project_z applies to the complex and restricted variants");
  std::vector<cplx> z = modal_amplitudes(s, Y);
  for (int j = 0; j < s.N; ++j) z[j] *= law.mu[j];
  return z;
}

Eigen::VectorXd project_real_x(const Spectrum& s, const FeedbackLaw& law,
                               const std::vector<ModeState>& Y) {
  if (law.variant != Variant::real_modes)
    fail(errc::config, "ConfigError",
         "project_real_x applies to the real variant");
  const RealVariantData& rv = law.real;
  const int P = static_cast<int>(rv.pairs.size());
  const int A = 2 * P;
  std::vector<cplx> v = modal_amplitudes(s, Y);
  Eigen::VectorXcd xr = xi_raw(s, law, v);
  Eigen::VectorXcd kappa_xi(A);
  {
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(A, A);
    Eigen::VectorXd kap(A);
    for (int q = 0; q < P; ++q) {
      kap[2 * q] = rv.pairs[q].kappa1;
      kap[2 * q + 1] = rv.pairs[q].kappa2;
    }
    M += law.eta * (rv.V * kap.asDiagonal()).cast<cplx>();
    Eigen::VectorXcd xi = M.fullPivLu().solve(xr);
    for (int a = 0; a < A; ++a) kappa_xi[a] = kap[a] * xi[a];
  }
  Eigen::VectorXd x(A);
  for (int q = 0; q < P; ++q) {
    const RealPair& pr = rv.pairs[q];
    cplx vq = 0.0;
    for (int j = 0; j < s.N; ++j)
      if (s.modes[j].m == pr.m &&
          std::abs(s.modes[j].lambda - pr.lambda) <
              1e-6 * (1.0 + std::abs(pr.lambda)))
        vq = v[j];
    cplx c = vq;
    for (int b = 0; b < A; ++b) c -= law.eta * kappa_xi[b] * rv.W(b, q);
    x[2 * q] = c.real();
    x[2 * q + 1] = c.imag();
  }
  return x;
}

ObliquenessReport obliqueness_report(const FeedbackLaw& law,
                                     const ControlSignal& sig, int n_samples) {
  if (n_samples < 4)
    fail(errc::config, "ConfigError", "obliqueness needs at least 4 samples");
  ObliquenessReport rep;
  rep.n_samples = n_samples;
  rep.min_abs_cos = std::numeric_limits<double>::infinity();
  const double sigma_re = sig.sigma.real();
  bool any = false;
  for (int w = 0; w < 2; ++w) {
    if (law.active_wall != -1 && w != law.active_wall) continue;
    for (int sidx = 0; sidx < n_samples; ++sidx) {
      const double x = 2.0 * M_PI * sidx / n_samples;
      cplx ut = 0.0, uy = 0.0;
      for (const BoundaryCoeff& c : sig.wall[w]) {
        cplx ph = std::exp(cplx(0.0, c.m * x));
        ut += c.u * ph;
        uy += c.v * ph;
      }
      const double t = ut.real(), y = uy.real();
      const double mag = std::hypot(t, y);
      const double un = y * wall_normal_sign(w);
      const double alpha_x = (law.variant == Variant::restricted)
                                 ? law.alpha0 * std::cos(x)
                                 : oblique_weight(law.alpha0, w);
      rep.max_normal_dev =
          std::max(rep.max_normal_dev, std::abs(un - sigma_re * alpha_x));
      rep.control_norm = std::max(rep.control_norm, mag);
      if (mag > 0.0) {
        any = true;
        rep.min_abs_cos = std::min(rep.min_abs_cos, std::abs(un) / mag);
      }
    }
  }
  if (!any || rep.control_norm == 0.0)
    fail(errc::config, "NoControl",
         "control signal vanishes; obliqueness angles are undefined");
  return rep;
}

}  // namespace oseen
