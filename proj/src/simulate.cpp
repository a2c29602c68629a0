#include "oseen/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <utility>

#include "oseen/errors.hpp"

namespace oseen {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_horizon(double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0) || dt > T)
    fail(errc::config, "ConfigError", "simulation needs 0 < dt <= T");
}

std::vector<double> sample_times(double T, double dt) {
  const int n = static_cast<int>(std::floor(T / dt + 1e-9)) + 1;
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = i * dt;
  return t;
}

// modal amplitude <Y, phi*> of one retained mode; carriers the state does
// not supply contribute zero
cplx amplitude_of(const Spectrum& s, const EigenMode& md,
                  const std::vector<ModeState>& Y) {
  cplx acc = 0.0;
  for (const ModeState& st : Y) {
    if (st.m != md.m) continue;
    if (st.v.size() != md.v.size())
      fail(errc::config, "ConfigError",
           "state resolution does not match the spectrum's grid");
    acc += mode_inner(s.gb->grid, md.m, st.v, st.vp, md.v_star, md.vs_p);
  }
  return acc;
}

// one Fourier emission of a boundary actuator into the interior
struct Emission {
  int m = 0;
  Eigen::VectorXcd v, vp;
};

// actuator columns of a law, with their interior lifts resolved: column c
// scales the listed emissions by its time coefficient; the restricted
// variant adds normal lifts scaled by the common oblique factor sigma
struct LawLifts {
  std::vector<std::vector<Emission>> col;      // per actuator column
  std::vector<Emission> alpha;                 // restricted: sigma-scaled
};

int actuator_count(const FeedbackLaw& law) {
  return law.variant == Variant::real_modes
             ? static_cast<int>(law.real.pairs.size()) * 2
             : static_cast<int>(law.m.size());
}

void check_lift_match(const LiftedField& f, int m, double k_shift, cplx u0,
                      cplx u1) {
  if (f.m != m)
    fail(errc::config, "ConfigError",
         "lifted actuator carrier does not match the law");
  if (f.k_shift != k_shift)
    fail(errc::config, "ConfigError",
         "lifted actuator k_shift does not match the law");
  const double scale = 1.0 + std::abs(u0) + std::abs(u1);
  if (std::abs(f.data.u0 - u0) > 1e-10 * scale ||
      std::abs(f.data.u1 - u1) > 1e-10 * scale ||
      std::abs(f.data.v0) > 1e-12 * scale || std::abs(f.data.v1) > 1e-12 * scale)
    fail(errc::config, "ConfigError",
         "lifted actuator boundary data does not match the law");
}

LawLifts resolve_lifts(const Spectrum& s, const FeedbackLaw& law,
                       const std::vector<LiftedField>& lifted) {
  const int A = actuator_count(law);
  if (static_cast<int>(lifted.size()) != A)
    fail(errc::config, "ConfigError",
         "expected one lifted actuator field per law column");
  LawLifts ll;
  ll.col.resize(A);
  if (law.variant == Variant::real_modes) {
    const RealVariantData& rv = law.real;
    for (int a = 0; a < A; ++a) {
      const int m = rv.pairs[a / 2].m;
      check_lift_match(lifted[a], m, law.k_shift, rv.phi(a, 0), rv.phi(a, 1));
      ll.col[a].push_back({m, lifted[a].v, lifted[a].vp});
      ll.col[a].push_back({-m, lifted[a].v.conjugate(), lifted[a].vp.conjugate()});
    }
  } else {
    for (int j = 0; j < A; ++j) {
      check_lift_match(lifted[j], law.m[j], law.k_shift, law.phi[j].u0,
                       law.phi[j].u1);
      ll.col[j].push_back({law.m[j], lifted[j].v, lifted[j].vp});
    }
    if (law.variant == Variant::restricted && law.alpha0 != 0.0) {
      const int w = law.active_wall;
      for (int mm : {1, -1}) {
        BoundaryData bd;
        const cplx vhat = wall_normal_sign(w) * law.alpha0 * 0.5;
        if (w == 0)
          bd.v0 = vhat;
        else
          bd.v1 = vhat;
        LiftedField f =
            solve_dirichlet_mode(s.flow, s.gb->grid, mm, law.k_shift, bd);
        ll.alpha.push_back({mm, std::move(f.v), std::move(f.vp)});
      }
    }
  }
  return ll;
}

// <emission, phi*_r> pairings of every actuator column (the alpha lifts
// folded into each column: they share the column's time coefficient up to
// the common factor handled by the caller) against the listed modes
Eigen::MatrixXcd feedthrough_rows(const Spectrum& s, const LawLifts& ll,
                                  const std::vector<int>& rows,
                                  bool fold_alpha) {
  const SpectralGrid& g = s.gb->grid;
  const int A = static_cast<int>(ll.col.size());
  Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(rows.size(), A);
  for (size_t i = 0; i < rows.size(); ++i) {
    const EigenMode& md = s.modes[rows[i]];
    for (int c = 0; c < A; ++c) {
      cplx acc = 0.0;
      for (const Emission& e : ll.col[c])
        if (e.m == md.m)
          acc += mode_inner(g, md.m, e.v, e.vp, md.v_star, md.vs_p);
      if (fold_alpha)
        for (const Emission& e : ll.alpha)
          if (e.m == md.m)
            acc += mode_inner(g, md.m, e.v, e.vp, md.v_star, md.vs_p);
      D(i, c) = acc;
    }
  }
  return D;
}

// accumulated per-carrier nodal field of one sample
struct Frame {
  std::map<int, std::pair<Eigen::VectorXcd, Eigen::VectorXcd>> field;
  int n_nodes = 0;

  void add(int m, cplx coef, const Eigen::VectorXcd& v,
           const Eigen::VectorXcd& vp) {
    auto it = field.find(m);
    if (it == field.end()) {
      it = field.emplace(m, std::make_pair(Eigen::VectorXcd::Zero(n_nodes),
                                           Eigen::VectorXcd::Zero(n_nodes)))
               .first;
    }
    it->second.first += coef * v;
    it->second.second += coef * vp;
  }

  double norm(const SpectralGrid& g) const {
    double acc = 0.0;
    for (const auto& [m, f] : field) {
      const double n = mode_norm(g, m, f.first, f.second);
      acc += n * n;
    }
    return std::sqrt(acc);
  }

  std::vector<ModeState> states() const {
    std::vector<ModeState> out;
    for (const auto& [m, f] : field) out.push_back({m, f.first, f.second});
    return out;
  }
};

void add_to(std::vector<BoundaryCoeff>& list, int m, cplx u, cplx v) {
  for (BoundaryCoeff& c : list) {
    if (c.m == m) {
      c.u += u;
      c.v += v;
      return;
    }
  }
  list.push_back({m, u, v});
}

// sup over the boundary of |u(x)| from the per-wall Fourier coefficients
double boundary_sup(const std::array<std::vector<BoundaryCoeff>, 2>& wall) {
  double worst = 0.0;
  for (int w = 0; w < 2; ++w) {
    if (wall[w].empty()) continue;
    for (int i = 0; i < 64; ++i) {
      const double x = 2.0 * kPi * i / 64.0;
      cplx ut = 0.0, un = 0.0;
      for (const BoundaryCoeff& c : wall[w]) {
        const cplx ph = std::exp(cplx(0.0, c.m * x));
        ut += c.u * ph;
        un += c.v * ph;
      }
      worst = std::max(worst, std::sqrt(std::norm(ut) + std::norm(un)));
    }
  }
  return worst;
}

// deviation between two coefficient lists, and the larger one's scale
std::pair<double, double> signal_deviation(
    const std::array<std::vector<BoundaryCoeff>, 2>& a,
    const std::array<std::vector<BoundaryCoeff>, 2>& b) {
  double dev = 0.0, scale = 0.0;
  for (int w = 0; w < 2; ++w) {
    std::map<int, std::pair<cplx, cplx>> merged;
    for (const BoundaryCoeff& c : a[w]) {
      merged[c.m].first += c.u;
      merged[c.m].second += c.v;
      scale = std::max({scale, std::abs(c.u), std::abs(c.v)});
    }
    for (const BoundaryCoeff& c : b[w]) {
      merged[c.m].first -= c.u;
      merged[c.m].second -= c.v;
      scale = std::max({scale, std::abs(c.u), std::abs(c.v)});
    }
    for (const auto& kv : merged)
      dev = std::max({dev, std::abs(kv.second.first),
                      std::abs(kv.second.second)});
  }
  return {dev, scale};
}

// z-form control output: coefficient coef[c] on each actuator column plus
// the oblique normal term sigma alpha
std::array<std::vector<BoundaryCoeff>, 2> z_form_signal(
    const FeedbackLaw& law, const Eigen::VectorXcd& coef, cplx sigma) {
  std::array<std::vector<BoundaryCoeff>, 2> wall;
  if (law.variant == Variant::real_modes) {
    const RealVariantData& rv = law.real;
    for (int a = 0; a < coef.size(); ++a) {
      const int m = rv.pairs[a / 2].m;
      for (int w = 0; w < 2; ++w) {
        add_to(wall[w], m, coef[a] * rv.phi(a, w), 0.0);
        add_to(wall[w], -m, coef[a] * std::conj(rv.phi(a, w)), 0.0);
      }
    }
  } else {
    for (int j = 0; j < coef.size(); ++j) {
      if (law.active_wall != 1)
        add_to(wall[0], law.m[j], coef[j] * law.phi[j].u0, 0.0);
      if (law.active_wall != 0)
        add_to(wall[1], law.m[j], coef[j] * law.phi[j].u1, 0.0);
    }
  }
  if (law.variant == Variant::restricted) {
    const int w = law.active_wall;
    const cplx vhat = wall_normal_sign(w) * sigma * law.alpha0 * 0.5;
    add_to(wall[w], 1, 0.0, vhat);
    add_to(wall[w], -1, 0.0, vhat);
  } else {
    for (int w = 0; w < 2; ++w) {
      const double weight = (w == 0) ? -law.alpha0 : law.alpha0;
      add_to(wall[w], 0, 0.0, wall_normal_sign(w) * sigma * weight);
    }
  }
  return wall;
}

std::optional<double> try_fit(const Trajectory& traj, double window) {
  const int n = static_cast<int>(traj.times.size());
  if (n < 2) return std::nullopt;
  const double t_last = traj.times.back();
  const double t0 = (1.0 - window) * t_last;
  int i0 = 0;
  while (i0 < n && traj.times[i0] < t0 - 1e-12 * (1.0 + t_last)) ++i0;
  if (n - i0 < 2) return std::nullopt;
  for (int i = i0; i < n; ++i)
    if (!(traj.state_norm[i] > 0.0)) return std::nullopt;
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  const int cnt = n - i0;
  for (int i = i0; i < n; ++i) {
    const double t = traj.times[i];
    const double l = std::log(traj.state_norm[i]);
    st += t;
    sl += l;
    stt += t * t;
    stl += t * l;
  }
  const double var = stt - st * st / cnt;
  if (!(var > 0.0)) return std::nullopt;
  return -(stl - st * sl / cnt) / var;
}

// closed-form 2x2 pair propagator: exp(-C t) for C with eigenvalues
// gamma +- i omega, via C = gamma I + S, S^2 = -omega^2 I
Eigen::Matrix2d pair_propagator(const Eigen::Matrix2d& C, double gamma,
                                double omega, double t) {
  const Eigen::Matrix2d S = C - gamma * Eigen::Matrix2d::Identity();
  Eigen::Matrix2d out;
  if (omega > 1e-12 * (1.0 + std::abs(gamma))) {
    out = std::cos(omega * t) * Eigen::Matrix2d::Identity() -
          std::sin(omega * t) / omega * S;
  } else {
    out = Eigen::Matrix2d::Identity() - t * S;  // defective double rate
  }
  return std::exp(-gamma * t) * out;
}

}  // namespace

std::vector<LiftedField> lift_actuators(const Spectrum& s,
                                        const FeedbackLaw& law) {
  std::vector<LiftedField> out;
  const SpectralGrid& g = s.gb->grid;
  if (law.variant == Variant::real_modes) {
    const RealVariantData& rv = law.real;
    for (int a = 0; a < rv.phi.rows(); ++a) {
      BoundaryData bd;
      bd.u0 = rv.phi(a, 0);
      bd.u1 = rv.phi(a, 1);
      out.push_back(solve_dirichlet_mode(s.flow, g, rv.pairs[a / 2].m,
                                         law.k_shift, bd));
    }
  } else {
    for (size_t j = 0; j < law.phi.size(); ++j) {
      BoundaryData bd;
      bd.u0 = law.phi[j].u0;
      bd.u1 = law.phi[j].u1;
      out.push_back(
          solve_dirichlet_mode(s.flow, g, law.m[j], law.k_shift, bd));
    }
  }
  return out;
}

cplx forced_decay(cplx z0, cplx lambda,
                  const std::vector<std::pair<cplx, cplx>>& terms, double t,
                  double tol) {
  cplx hom = z0;      // coefficient of exp(-lambda t)
  cplx secular = 0.0; // coefficient of t exp(-lambda t)
  cplx out = 0.0;
  for (const auto& [c, r] : terms) {
    if (std::abs(lambda - r) <= tol * (1.0 + std::abs(lambda))) {
      secular += c;
    } else {
      const cplx A = c / (lambda - r);
      hom -= A;
      out += A * std::exp(-r * t);
    }
  }
  return out + (hom + secular * t) * std::exp(-lambda * t);
}

double fit_decay_rate(const Trajectory& traj, double window) {
  if (!(window > 0.0) || window > 1.0)
    fail(errc::config, "ConfigError", "fit window must lie in (0, 1]");
  auto fit = try_fit(traj, window);
  if (!fit)
    fail(errc::verify, "FitUndefined",
         "decay fit needs two or more samples with positive norms");
  return *fit;
}

Trajectory simulate_open_loop(const Spectrum& s,
                              const std::vector<ModeState>& y0, double T,
                              double dt) {
  check_horizon(T, dt);
  const SpectralGrid& g = s.gb->grid;
  const int L = static_cast<int>(s.modes.size());
  const int N = s.N;
  const int J = L - N;

  Eigen::VectorXcd v0(L);
  for (int r = 0; r < L; ++r) v0[r] = amplitude_of(s, s.modes[r], y0);

  Trajectory traj;
  traj.times = sample_times(T, dt);
  const int n = static_cast<int>(traj.times.size());
  traj.z_unstable.resize(n, N);
  traj.z_stable.resize(n, J);
  traj.stable_index.resize(J);
  for (int l = 0; l < J; ++l) traj.stable_index[l] = N + l;
  traj.state_norm.resize(n);
  traj.control_norm = Eigen::VectorXd::Zero(n);

  for (int i = 0; i < n; ++i) {
    const double t = traj.times[i];
    Frame fr;
    fr.n_nodes = static_cast<int>(g.nodes.size());
    for (int r = 0; r < L; ++r) {
      const cplx z = v0[r] * std::exp(-s.modes[r].lambda * t);
      if (r < N)
        traj.z_unstable(i, r) = z;
      else
        traj.z_stable(i, r - N) = z;
      fr.add(s.modes[r].m, z, s.modes[r].v, s.modes[r].vp);
    }
    traj.state_norm[i] = fr.norm(g);
  }
  if (auto f = try_fit(traj, 0.5)) traj.gamma_fit = *f;
  return traj;
}

Trajectory simulate_linear(const Spectrum& s, const FeedbackLaw& law,
                           const std::vector<LiftedField>& lifted,
                           const std::vector<ModeState>& y0, double T,
                           double dt) {
  check_horizon(T, dt);
  const SpectralGrid& g = s.gb->grid;
  const int L = static_cast<int>(s.modes.size());
  const int N = s.N;
  const int J = L - N;
  LawLifts ll = resolve_lifts(s, law, lifted);

  std::vector<int> stable_rows(J);
  for (int l = 0; l < J; ++l) stable_rows[l] = N + l;
  // forcing pairings <D(actuator), phi*_l> over the stable tail
  const Eigen::MatrixXcd Ds = feedthrough_rows(s, ll, stable_rows, true);

  Trajectory traj;
  traj.times = sample_times(T, dt);
  const int n = static_cast<int>(traj.times.size());
  traj.z_unstable.resize(n, N);
  traj.z_stable.resize(n, J);
  traj.stable_index = stable_rows;
  traj.state_norm.resize(n);
  traj.control_norm.resize(n);

  // per-sample actuator coefficients (time profiles set per variant below)
  const int A = actuator_count(law);
  Eigen::VectorXcd vY0(J);
  for (int l = 0; l < J; ++l) vY0[l] = amplitude_of(s, s.modes[N + l], y0);

  // stable forcing terms: one exponential per unstable rate
  std::vector<std::vector<std::pair<cplx, cplx>>> terms(J);
  Eigen::VectorXcd zS0(J);

  // closed-form unstable coordinates per sample, and actuator coefficients
  Eigen::MatrixXcd zU(n, N);
  Eigen::MatrixXcd coef(n, A);

  if (law.variant == Variant::real_modes) {
    const RealVariantData& rv = law.real;
    const int P = static_cast<int>(rv.pairs.size());
    traj.gamma0 = std::numeric_limits<double>::infinity();
    for (const RealPair& pr : rv.pairs)
      traj.gamma0 = std::min(traj.gamma0, pr.rho_closed.real());

    Eigen::VectorXd x0 = project_real_x(s, law, y0);
    // complex pair amplitudes: x_q(t) = Re(w_q exp(-conj(rho_q) t))
    std::vector<Eigen::Vector2cd> w(P);
    std::vector<std::pair<int, int>> mode_of(P, {-1, -1});  // rep, mirror
    for (int q = 0; q < P; ++q) {
      const RealPair& pr = rv.pairs[q];
      const Eigen::Matrix2d C = rv.closed.block<2, 2>(2 * q, 2 * q);
      const double ga = pr.rho_closed.real(), om = pr.rho_closed.imag();
      const Eigen::Matrix2d S = C - ga * Eigen::Matrix2d::Identity();
      const Eigen::Vector2d xq(x0[2 * q], x0[2 * q + 1]);
      if (om > 1e-12 * (1.0 + std::abs(ga)))
        w[q] = xq.cast<cplx>() + cplx(0.0, 1.0) / om * (S * xq).cast<cplx>();
      else
        w[q] = xq.cast<cplx>();
      for (int j = 0; j < N; ++j) {
        const EigenMode& md = s.modes[j];
        if (md.m == pr.m && std::abs(md.lambda - pr.lambda) <
                                1e-6 * (1.0 + std::abs(pr.lambda)))
          mode_of[q].first = j;
        if (md.m == -pr.m && std::abs(md.lambda - std::conj(pr.lambda)) <
                                 1e-6 * (1.0 + std::abs(pr.lambda)))
          mode_of[q].second = j;
      }
      if (mode_of[q].first < 0 || mode_of[q].second < 0)
        fail(errc::hypothesis, "SolverFailure",
             "real pair lacks its representative or mirror mode");
    }

    // sample the pair evolution; for defective (omega = 0) pairs fall back
    // to the propagator so the secular branch is covered
    Eigen::VectorXd kap(A);
    for (int q = 0; q < P; ++q) {
      kap[2 * q] = rv.pairs[q].kappa1;
      kap[2 * q + 1] = rv.pairs[q].kappa2;
    }
    for (int i = 0; i < n; ++i) {
      const double t = traj.times[i];
      Eigen::VectorXd x(2 * P);
      for (int q = 0; q < P; ++q) {
        const RealPair& pr = rv.pairs[q];
        const double ga = pr.rho_closed.real(), om = pr.rho_closed.imag();
        if (om > 1e-12 * (1.0 + std::abs(ga))) {
          const cplx ph = std::exp(-std::conj(pr.rho_closed) * t);
          x[2 * q] = (w[q][0] * ph).real();
          x[2 * q + 1] = (w[q][1] * ph).real();
        } else {
          const Eigen::Matrix2d C = rv.closed.block<2, 2>(2 * q, 2 * q);
          const Eigen::Vector2d xq(x0[2 * q], x0[2 * q + 1]);
          const Eigen::Vector2d xt = pair_propagator(C, ga, om, t) * xq;
          x[2 * q] = xt[0];
          x[2 * q + 1] = xt[1];
        }
        const cplx c(x[2 * q], x[2 * q + 1]);
        zU(i, mode_of[q].first) = c;
        zU(i, mode_of[q].second) = std::conj(c);
      }
      const Eigen::VectorXd xi = rv.Xi * x;
      for (int a = 0; a < A; ++a) coef(i, a) = law.eta * kap[a] * xi[a];
    }

    // stable forcing: f_l = -eta sum_a kappa_a d(xi_a)/dt <D Phi_a, phi*_l>
    // with xi = Xi x and x made of exp(-rho t), exp(-conj(rho) t) pieces
    for (int l = 0; l < J; ++l) {
      for (int q = 0; q < P; ++q) {
        const cplx rho = rv.pairs[q].rho_closed;
        cplx c_conj = 0.0, c_plain = 0.0;  // rates conj(rho) and rho
        for (int a = 0; a < A; ++a) {
          for (int b = 0; b < 2; ++b) {
            const double xib = rv.Xi(a, 2 * q + b);
            // d/dt of (w_b exp(-conj(rho) t) + conj(w_b) exp(-rho t)) / 2
            c_conj += -law.eta * kap[a] * Ds(l, a) * xib *
                      (-std::conj(rho)) * w[q][b] * 0.5;
            c_plain += -law.eta * kap[a] * Ds(l, a) * xib * (-rho) *
                       std::conj(w[q][b]) * 0.5;
          }
        }
        terms[l].push_back({c_conj, std::conj(rho)});
        terms[l].push_back({c_plain, rho});
      }
      cplx du0 = 0.0;
      for (int a = 0; a < A; ++a) du0 += coef(0, a) * Ds(l, a);
      zS0[l] = vY0[l] - du0;
    }
  } else {
    traj.gamma0 = std::numeric_limits<double>::infinity();
    for (const cplx& r : law.rho) traj.gamma0 = std::min(traj.gamma0, r.real());
    std::vector<cplx> z0 = project_z(s, law, y0);
    for (int i = 0; i < n; ++i) {
      const double t = traj.times[i];
      for (int j = 0; j < N; ++j) {
        zU(i, j) = z0[j] * std::exp(-law.rho[j] * t);
        coef(i, j) = law.eta * zU(i, j);
      }
    }
    for (int l = 0; l < J; ++l) {
      for (int j = 0; j < N; ++j)
        terms[l].push_back({law.eta * law.rho[j] * z0[j] * Ds(l, j),
                            law.rho[j]});
      cplx du0 = 0.0;
      for (int j = 0; j < N; ++j) du0 += coef(0, j) * Ds(l, j);
      zS0[l] = vY0[l] - du0;
    }
  }
  traj.z_unstable = zU;

  // sample loop: stable closed forms, reconstruction, both control forms
  double dev_worst = 0.0, scale_worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = traj.times[i];
    Frame fr;
    fr.n_nodes = static_cast<int>(g.nodes.size());
    for (int j = 0; j < N; ++j)
      fr.add(s.modes[j].m, zU(i, j), s.modes[j].v, s.modes[j].vp);
    for (int l = 0; l < J; ++l) {
      const cplx z = forced_decay(zS0[l], s.modes[N + l].lambda, terms[l], t);
      traj.z_stable(i, l) = z;
      fr.add(s.modes[N + l].m, z, s.modes[N + l].v, s.modes[N + l].vp);
    }
    cplx sigma = 0.0;
    for (int a = 0; a < A; ++a) sigma += coef(i, a);
    for (int a = 0; a < A; ++a)
      for (const Emission& e : ll.col[a]) fr.add(e.m, coef(i, a), e.v, e.vp);
    for (const Emission& e : ll.alpha) fr.add(e.m, sigma, e.v, e.vp);
    traj.state_norm[i] = fr.norm(g);

    const Eigen::VectorXcd ci = coef.row(i).transpose();
    auto zsig = z_form_signal(law, ci, sigma);
    traj.control_norm[i] = boundary_sup(zsig);
    ControlSignal ysig = evaluate_control(s, law, fr.states());
    auto [dev, scale] = signal_deviation(zsig, ysig.wall);
    dev_worst = std::max(dev_worst, dev);
    scale_worst = std::max(scale_worst, scale);
  }
  traj.controller_consistency =
      scale_worst > 0.0 ? dev_worst / scale_worst : dev_worst;
  if (auto f = try_fit(traj, 0.5)) traj.gamma_fit = *f;
  return traj;
}

namespace {

// Dormand-Prince embedded 5(4) pair
struct Rk45 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  // stage coefficients
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600,
                          e3 = 500.0 / 1113 - 7571.0 / 16695,
                          e4 = 125.0 / 192 - 393.0 / 640,
                          e5 = -2187.0 / 6784 + 92097.0 / 339200,
                          e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
};

}  // namespace

Trajectory simulate_nonlinear_galerkin(const Spectrum& s,
                                       const FeedbackLaw& law,
                                       const std::vector<LiftedField>& lifted,
                                       const std::vector<ModeState>& y0,
                                       double T, double dt, int n_modes) {
  check_horizon(T, dt);
  if (law.variant == Variant::real_modes)
    fail(errc::config, "ConfigError",
         "the nonlinear surrogate supports the complex and restricted "
         "variants");
  const SpectralGrid& g = s.gb->grid;
  const int N = s.N;
  const int L = n_modes;
  if (L < N || L > static_cast<int>(s.modes.size()))
    fail(errc::config, "ConfigError",
         "retained mode count must cover the unstable set and stay within "
         "the spectrum");
  // the retained prefix must be closed under conjugate mirroring so the
  // surrogate can represent real fields
  for (int r = 0; r < L; ++r) {
    bool found = false;
    for (int p = 0; p < L && !found; ++p)
      found = s.modes[p].m == -s.modes[r].m &&
              std::abs(s.modes[p].lambda - std::conj(s.modes[r].lambda)) <=
                  1e-8 * (1.0 + std::abs(s.modes[r].lambda));
    if (!found)
      fail(errc::config, "ConfigError",
           "retained mode set is not closed under conjugate mirroring");
  }
  LawLifts ll = resolve_lifts(s, law, lifted);

  std::vector<int> rows(L);
  for (int r = 0; r < L; ++r) rows[r] = r;
  const Eigen::MatrixXcd Dhat = feedthrough_rows(s, ll, rows, true);
  Eigen::MatrixXcd massN =
      Eigen::MatrixXcd::Identity(N, N) + law.eta * Dhat.topRows(N);
  Eigen::FullPivLU<Eigen::MatrixXcd> mass_lu(massN);
  if (!mass_lu.isInvertible())
    fail(errc::gains, "InfeasibleGains",
         "implicit feedthrough block is singular at this gain");

  // quadratic interaction tensor over the retained modes: entries with
  // m_p + m_q = m_r from the projected convection term
  struct TensorEntry {
    int r, p, q;
    cplx t;
  };
  std::vector<TensorEntry> tensor;
  for (int r = 0; r < L; ++r) {
    const EigenMode& mr = s.modes[r];
    for (int p = 0; p < L; ++p) {
      const EigenMode& mp = s.modes[p];
      for (int q = 0; q < L; ++q) {
        const EigenMode& mq = s.modes[q];
        if (mp.m + mq.m != mr.m) continue;
        cplx acc = 0.0;
        const cplx imq(0.0, static_cast<double>(mq.m));
        for (Eigen::Index y = 0; y < g.quad_weights.size(); ++y) {
          const cplx fu =
              mp.u[y] * (imq * mq.u[y]) + mp.v[y] * (cplx(0.0, 1.0) * mq.vpp[y] /
                                                     static_cast<double>(mq.m));
          const cplx fv = mp.u[y] * (imq * mq.v[y]) + mp.v[y] * mq.vp[y];
          acc += g.quad_weights[y] * (fu * std::conj(mr.u_star[y]) +
                                      fv * std::conj(mr.v_star[y]));
        }
        if (acc != cplx(0.0)) tensor.push_back({r, p, q, acc});
      }
    }
  }

  // initial shifted coordinates
  Eigen::VectorXcd z(L);
  {
    std::vector<cplx> zu = project_z(s, law, y0);
    for (int j = 0; j < N; ++j) z[j] = zu[j];
    Eigen::VectorXcd czu(N);
    for (int j = 0; j < N; ++j) czu[j] = zu[j];
    for (int l = N; l < L; ++l)
      z[l] = amplitude_of(s, s.modes[l], y0) -
             law.eta * (Dhat.row(l).segment(0, N) * czu)(0);
  }

  auto rhs = [&](const Eigen::VectorXcd& zz) -> Eigen::VectorXcd {
    Eigen::VectorXcd y = zz;
    y += law.eta * (Dhat * zz.segment(0, N));
    Eigen::VectorXcd quad = Eigen::VectorXcd::Zero(L);
    for (const TensorEntry& e : tensor) quad[e.r] += e.t * y[e.p] * y[e.q];
    Eigen::VectorXcd out(L);
    Eigen::VectorXcd rhsN(N);
    for (int j = 0; j < N; ++j)
      rhsN[j] = -s.modes[j].lambda * zz[j] - quad[j];
    out.segment(0, N) = mass_lu.solve(rhsN);
    for (int l = N; l < L; ++l)
      out[l] = -s.modes[l].lambda * zz[l] -
               law.eta * (Dhat.row(l).segment(0, N) * out.segment(0, N))(0) -
               quad[l];
    return out;
  };

  Trajectory traj;
  traj.times = sample_times(T, dt);
  const int n = static_cast<int>(traj.times.size());
  traj.z_unstable.resize(n, N);
  traj.z_stable.resize(n, L - N);
  traj.stable_index.resize(L - N);
  for (int l = N; l < L; ++l) traj.stable_index[l - N] = l;
  traj.state_norm.resize(n);
  traj.control_norm.resize(n);
  traj.gamma0 = std::numeric_limits<double>::infinity();
  for (const cplx& r : law.rho) traj.gamma0 = std::min(traj.gamma0, r.real());

  double dev_worst = 0.0, scale_worst = 0.0;
  double initial_norm = -1.0;
  int filled = 0;
  bool diverged = false;

  Eigen::VectorXcd k1 = rhs(z);
  const double z_coeff0 = z.norm();
  double h = dt;
  long evals = 0;
  for (int i = 0; i < n; ++i) {
    // record the sample
    Frame fr;
    fr.n_nodes = static_cast<int>(g.nodes.size());
    for (int r = 0; r < L; ++r) {
      if (r < N)
        traj.z_unstable(i, r) = z[r];
      else
        traj.z_stable(i, r - N) = z[r];
      fr.add(s.modes[r].m, z[r], s.modes[r].v, s.modes[r].vp);
    }
    Eigen::VectorXcd ci(actuator_count(law));
    for (int j = 0; j < N; ++j) ci[j] = law.eta * z[j];
    cplx sigma = 0.0;
    for (int j = 0; j < N; ++j) sigma += ci[j];
    for (int a = 0; a < ci.size(); ++a)
      for (const Emission& e : ll.col[a]) fr.add(e.m, ci[a], e.v, e.vp);
    for (const Emission& e : ll.alpha) fr.add(e.m, sigma, e.v, e.vp);
    traj.state_norm[i] = fr.norm(g);
    auto zsig = z_form_signal(law, ci, sigma);
    traj.control_norm[i] = boundary_sup(zsig);
    ControlSignal ysig = evaluate_control(s, law, fr.states());
    auto [dev, scale] = signal_deviation(zsig, ysig.wall);
    dev_worst = std::max(dev_worst, dev);
    scale_worst = std::max(scale_worst, scale);
    filled = i + 1;

    if (initial_norm < 0.0) initial_norm = traj.state_norm[0];
    if (initial_norm > 0.0 && (traj.state_norm[i] > 1e6 * initial_norm ||
                               !std::isfinite(traj.state_norm[i]))) {
      diverged = true;
      break;
    }
    if (i + 1 == n) break;

    // advance to the next sample with the embedded adaptive pair
    const double t_target = traj.times[i + 1];
    double t = traj.times[i];
    while (t < t_target - 1e-14 * (1.0 + t_target)) {
      h = std::min(h, t_target - t);
      const Eigen::VectorXcd k2 = rhs(z + h * Rk45::a21 * k1);
      const Eigen::VectorXcd k3 = rhs(z + h * (Rk45::a31 * k1 + Rk45::a32 * k2));
      const Eigen::VectorXcd k4 =
          rhs(z + h * (Rk45::a41 * k1 + Rk45::a42 * k2 + Rk45::a43 * k3));
      const Eigen::VectorXcd k5 =
          rhs(z + h * (Rk45::a51 * k1 + Rk45::a52 * k2 + Rk45::a53 * k3 +
                       Rk45::a54 * k4));
      const Eigen::VectorXcd k6 =
          rhs(z + h * (Rk45::a61 * k1 + Rk45::a62 * k2 + Rk45::a63 * k3 +
                       Rk45::a64 * k4 + Rk45::a65 * k5));
      const Eigen::VectorXcd z5 =
          z + h * (Rk45::b1 * k1 + Rk45::b3 * k3 + Rk45::b4 * k4 +
                   Rk45::b5 * k5 + Rk45::b6 * k6);
      const Eigen::VectorXcd k7 = rhs(z5);
      const Eigen::VectorXcd err_v =
          h * (Rk45::e1 * k1 + Rk45::e3 * k3 + Rk45::e4 * k4 + Rk45::e5 * k5 +
               Rk45::e6 * k6 + Rk45::e7 * k7);
      evals += 6;
      if (evals > 20'000'000)
        fail(errc::hypothesis, "SolverFailure",
             "nonlinear integrator exceeded its evaluation budget");
      double err = 0.0;
      for (int r = 0; r < L; ++r)
        err = std::max(err, std::abs(err_v[r]) / (1.0 + std::abs(z[r])));
      const double tol = 1e-8 * h;
      const bool finite = std::isfinite(err) && z5.allFinite();
      if (finite && err <= tol) {
        t += h;
        z = z5;
        k1 = k7;  // first-same-as-last
        if (z.norm() > 1e12 * (1.0 + z_coeff0)) break;  // mid-step blow-up
      } else if (h <= 1e-12) {
        // the floor step still fails: a huge state is a blow-up in
        // progress, anything else is an integrator breakdown
        if (z.norm() > 1e6 * (1.0 + z_coeff0)) break;
        fail(errc::hypothesis, "SolverFailure",
             "nonlinear integrator step size underflow");
      }
      double grow = 0.2;
      if (finite) grow = err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 5.0;
      h = std::max(h * std::clamp(grow, 0.2, 5.0), 1e-12);
    }
    if (!z.allFinite() || z.norm() > 1e6 * (1.0 + z_coeff0)) {
      diverged = true;
      break;
    }
  }

  if (filled < n) {
    traj.times.resize(filled);
    traj.z_unstable.conservativeResize(filled, Eigen::NoChange);
    traj.z_stable.conservativeResize(filled, Eigen::NoChange);
    traj.state_norm.conservativeResize(filled);
    traj.control_norm.conservativeResize(filled);
  }
  traj.outcome = diverged ? SimOutcome::diverged : SimOutcome::completed;
  traj.controller_consistency =
      scale_worst > 0.0 ? dev_worst / scale_worst : dev_worst;
  if (auto f = try_fit(traj, 0.5)) traj.gamma_fit = *f;
  return traj;
}

StabilityBall bisect_stability_ball(const Spectrum& s, const FeedbackLaw& law,
                                    const std::vector<LiftedField>& lifted,
                                    const std::vector<ModeState>& y0_shape,
                                    double T, double dt, int n_modes,
                                    double lo, double hi, int iters,
                                    double rate_fraction) {
  if (!(lo > 0.0) || !(hi > lo) || iters < 0)
    fail(errc::config, "ConfigError",
         "amplitude bracket needs 0 < lo < hi and iters >= 0");
  StabilityBall ball;
  auto scaled = [&](double a) {
    std::vector<ModeState> out = y0_shape;
    for (ModeState& st : out) {
      st.v *= a;
      st.vp *= a;
    }
    return out;
  };
  auto decays = [&](double a) {
    ++ball.runs;
    Trajectory tr;
    try {
      tr = simulate_nonlinear_galerkin(s, law, lifted, scaled(a), T, dt,
                                       n_modes);
    } catch (const error& e) {
      // an integrator breakdown at this amplitude cannot certify decay;
      // anything else is a genuine defect and propagates
      if (e.kind() == "SolverFailure") return false;
      throw;
    }
    if (tr.outcome == SimOutcome::diverged) return false;
    auto f = try_fit(tr, 0.5);
    if (!f) return false;
    return *f >= rate_fraction * tr.gamma0;
  };
  if (!decays(lo))
    fail(errc::config, "ConfigError",
         "amplitude bracket: the lower end must decay");
  if (decays(hi))
    fail(errc::config, "ConfigError",
         "amplitude bracket: the upper end must not decay");
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (decays(mid))
      lo = mid;
    else
      hi = mid;
  }
  ball.decays = lo;
  ball.diverges = hi;
  return ball;
}

}  // namespace oseen
