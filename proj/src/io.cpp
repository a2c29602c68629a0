#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "oseen/channel.hpp"
#include "oseen/cli.hpp"
#include "oseen/control.hpp"
#include "oseen/errors.hpp"
#include "oseen/lift.hpp"
#include "oseen/simulate.hpp"
#include "oseen/spectrum.hpp"

namespace oseen {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

ordered_json jcplx(cplx z) { return ordered_json::array({z.real(), z.imag()}); }

ordered_json config_json(const RunConfig& cfg) {
  ordered_json j;
  j["nu"] = cfg.nu;
  j["a"] = cfg.a;
  j["M"] = cfg.M;
  j["M_x"] = cfg.M_x;
  j["alpha0"] = cfg.alpha0;
  j["variant"] = cfg.variant;
  j["T"] = cfg.T;
  j["dt"] = cfg.dt;
  j["J"] = cfg.J;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  return j;
}

// audit header: the full resolved config, one commented line per key
std::string csv_audit(const RunConfig& cfg) {
  std::string h;
  h += "# nu = " + fmt(cfg.nu) + "\n";
  h += "# a = " + fmt(cfg.a) + "\n";
  h += "# M = " + std::to_string(cfg.M) + "\n";
  h += "# M_x = " + std::to_string(cfg.M_x) + "\n";
  h += "# alpha0 = " + fmt(cfg.alpha0) + "\n";
  h += "# variant = " + cfg.variant + "\n";
  h += "# T = " + fmt(cfg.T) + "\n";
  h += "# dt = " + fmt(cfg.dt) + "\n";
  h += "# J = " + std::to_string(cfg.J) + "\n";
  h += "# seed = " + std::to_string(cfg.seed) + "\n";
  h += "# output_dir = " + cfg.output_dir + "\n";
  return h;
}

void write_file(const RunConfig& cfg, const std::string& name,
                const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  const fs::path path = fs::path(cfg.output_dir) / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(errc::config, "ConfigError",
         "cannot write artifact '" + path.string() + "'");
  }
  out << content;
  out.close();
  if (!out)
    fail(errc::config, "ConfigError",
         "failed writing artifact '" + path.string() + "'");
}

void write_json(const RunConfig& cfg, const std::string& name,
                const ordered_json& j) {
  write_file(cfg, name, j.dump(2) + "\n");
}

Spectrum spectrum_for(const RunConfig& cfg) {
  SpectrumOptions opt;
  opt.n_stable_sim = cfg.J;
  return compute_spectrum(make_channel(cfg.nu, cfg.a, cfg.M_x), cfg.M, opt);
}

struct DesignOut {
  GainParameters gains;
  FeedbackLaw law;
};

DesignOut make_design(const Spectrum& s, const RunConfig& cfg) {
  const auto [variant, wall] = variant_parts(cfg.variant);
  std::vector<cplx> lams;
  for (int j = 0; j < s.N; ++j) lams.push_back(s.modes[j].lambda);
  DesignOut d;
  d.gains = select_gains(lams, cfg.nu);
  switch (variant) {
    case Variant::complex_modes:
      d.law = build_feedback(s, d.gains, cfg.alpha0);
      break;
    case Variant::real_modes:
      d.law = real_feedback(s, d.gains, cfg.alpha0);
      break;
    case Variant::restricted:
      d.law = restrict_support(s, build_feedback(s, d.gains, cfg.alpha0),
                               wall);
      break;
  }
  return d;
}

double min_closed_rate(const GainParameters& g) {
  double r = std::numeric_limits<double>::infinity();
  for (const cplx& rho : g.rho) r = std::min(r, rho.real());
  return r;
}

double stable_gap(const Spectrum& s) {
  if (s.N >= static_cast<int>(s.modes.size()))
    return std::numeric_limits<double>::infinity();
  return s.modes[s.N].lambda.real();
}

std::vector<ModeState> unit_states(const Spectrum& s, int count) {
  std::vector<ModeState> y0;
  for (int j = 0; j < count; ++j)
    y0.push_back({s.modes[j].m, s.modes[j].v, s.modes[j].vp});
  return y0;
}

double gram_deviation(const Spectrum& s) {
  const Eigen::MatrixXcd& G = s.gram;
  double dev = 0.0;
  for (int i = 0; i < G.rows(); ++i)
    for (int j = 0; j < G.cols(); ++j)
      dev = std::max(dev, std::abs(G(i, j) - (i == j ? 1.0 : 0.0)));
  return dev;
}

// conjugate mirror of unstable mode j inside the first `limit` modes
int mirror_index(const Spectrum& s, int j, int limit) {
  for (int l = 0; l < limit; ++l) {
    if (s.modes[l].m != -s.modes[j].m) continue;
    if (std::abs(s.modes[l].lambda - std::conj(s.modes[j].lambda)) <=
        1e-6 * (1.0 + std::abs(s.modes[j].lambda)))
      return l;
  }
  return -1;
}

bool prefix_mirror_closed(const Spectrum& s, int L) {
  for (int j = 0; j < L; ++j)
    if (mirror_index(s, j, L) < 0) return false;
  return true;
}

std::string trajectory_csv(const RunConfig& cfg, const Trajectory& tr,
                           const std::string& kind) {
  std::string out = "# trajectory = " + kind + "\n" + csv_audit(cfg);
  out += "t";
  for (int j = 0; j < tr.z_unstable.cols(); ++j) {
    out += ",re_z" + std::to_string(j);
    out += ",im_z" + std::to_string(j);
  }
  out += ",state_norm,control_norm\n";
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    out += fmt(tr.times[i]);
    for (int j = 0; j < tr.z_unstable.cols(); ++j) {
      out += "," + fmt(tr.z_unstable(i, j).real());
      out += "," + fmt(tr.z_unstable(i, j).imag());
    }
    out += "," + fmt(tr.state_norm(i));
    out += "," + fmt(tr.control_norm(i));
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// spectrum: eigenvalue table plus the controllability hypothesis reports
// ---------------------------------------------------------------------------
int cmd_spectrum(const RunConfig& cfg) {
  const Spectrum s = spectrum_for(cfg);
  const int N = count_unstable(s);

  const SemisimpleReport h1 = check_semisimple(s);
  const UniqueContinuationReport uc = unique_continuation_check(s, 1e-6);
  const double gdev = gram_deviation(s);
  double cond = 0.0;
  if (N > 0) cond = gram_matrix(s).cond;

  const bool cond_ok = N == 0 || cond < 1e8;
  const bool gram_ok = gdev <= 1e-8;
  const bool pass = h1.pass && uc.pass && cond_ok && gram_ok;

  std::string out = csv_audit(cfg);
  out += "# modes = " + std::to_string(s.modes.size()) + "\n";
  out += "# unstable = " + std::to_string(N) + "\n";
  out += std::string("# semisimple_unstable_block = ") +
         (h1.pass ? "pass" : "fail") + "\n";
  out += "# unique_continuation_floor = " + fmt(1e-6) + "\n";
  out += std::string("# unique_continuation = ") +
         (uc.pass ? "pass" : "fail") + "\n";
  out += "# biorthonormality_max_dev = " + fmt(gdev) + "\n";
  if (N > 0) out += "# adjoint_trace_gram_cond = " + fmt(cond) + "\n";
  out += std::string("# hypotheses = ") + (pass ? "pass" : "fail") + "\n";
  out += "index,m,re_lambda,im_lambda,residual,pairing_err,grade\n";
  for (std::size_t i = 0; i < s.modes.size(); ++i) {
    const EigenMode& md = s.modes[i];
    out += std::to_string(i) + "," + std::to_string(md.m) + "," +
           fmt(md.lambda.real()) + "," + fmt(md.lambda.imag()) + "," +
           fmt(md.residual) + "," + fmt(md.pairing_err) + "," +
           (md.grade == Grade::certificate ? "certificate" : "simulation") +
           "\n";
  }
  write_file(cfg, "spectrum.csv", out);
  return pass ? 0 : static_cast<int>(errc::hypothesis);
}

// ---------------------------------------------------------------------------
// design: feedback law with its margin certificate
// ---------------------------------------------------------------------------
int cmd_design(const RunConfig& cfg) {
  const Spectrum s = spectrum_for(cfg);
  const int N = count_unstable(s);

  ordered_json j;
  j["config"] = config_json(cfg);
  j["N"] = N;
  if (N == 0) {
    j["controller"] = nullptr;
    j["note"] = "all retained modes decay; no controller required";
    write_json(cfg, "design.json", j);
    return 0;
  }

  const DesignOut d = make_design(s, cfg);
  const FeedbackLaw& law = d.law;

  ordered_json lam = ordered_json::array();
  for (int i = 0; i < N; ++i) lam.push_back(jcplx(s.modes[i].lambda));
  j["unstable_lambda"] = lam;

  ordered_json ctl;
  ctl["variant"] = cfg.variant;
  ctl["k_shift"] = law.k_shift;
  ctl["eta"] = law.eta;
  ctl["alpha0"] = law.alpha0;
  ctl["active_wall"] = law.active_wall;
  ctl["gamma0"] = min_closed_rate(d.gains);
  ordered_json mus = ordered_json::array(), rhos = ordered_json::array();
  for (int i = 0; i < N; ++i) {
    mus.push_back(jcplx(law.mu[i]));
    rhos.push_back(jcplx(law.rho[i]));
  }
  ctl["mu"] = mus;
  ctl["rho"] = rhos;
  ctl["cond_F"] = law.cond_F;
  ordered_json bd = ordered_json::array();
  for (int i = 0; i < N; ++i) {
    ordered_json b;
    b["m"] = law.m[i];
    b["u0"] = jcplx(law.phi[i].u0);
    b["u1"] = jcplx(law.phi[i].u1);
    bd.push_back(b);
  }
  ctl["boundary_data"] = bd;
  if (law.variant == Variant::real_modes) {
    ordered_json pairs = ordered_json::array();
    for (const RealPair& pr : law.real.pairs) {
      ordered_json p;
      p["m"] = pr.m;
      p["lambda"] = jcplx(pr.lambda);
      p["kappa1"] = pr.kappa1;
      p["kappa2"] = pr.kappa2;
      p["rho_closed"] = jcplx(pr.rho_closed);
      pairs.push_back(p);
    }
    ctl["real_pairs"] = pairs;
  }
  j["controller"] = ctl;

  ordered_json cert;
  ordered_json margins = ordered_json::array();
  bool margins_pos = true, rates_pos = true;
  for (int i = 0; i < N; ++i) {
    const double m =
        gain_margin(s.modes[i].lambda, cfg.nu, law.k_shift, law.eta);
    margins.push_back(m);
    margins_pos = margins_pos && m > 0.0;
    rates_pos = rates_pos && law.rho[i].real() > 0.0;
  }
  cert["gain_margins"] = margins;
  cert["margins_positive"] = margins_pos;
  cert["closed_rates_positive"] = rates_pos;
  cert["trace_gram_cond"] = law.cond_F;
  cert["trace_gram_ok"] = law.cond_F < 1e8;
  const bool pass = margins_pos && rates_pos && law.cond_F < 1e8;
  cert["pass"] = pass;
  j["certificate"] = cert;

  write_json(cfg, "design.json", j);
  return pass ? 0 : static_cast<int>(errc::gains);
}

// ---------------------------------------------------------------------------
// simulate: open- and closed-loop trajectories plus the decay summary
// ---------------------------------------------------------------------------
int cmd_simulate(const RunConfig& cfg) {
  const Spectrum s = spectrum_for(cfg);
  const int N = count_unstable(s);

  ordered_json j;
  j["config"] = config_json(cfg);
  j["N"] = N;

  if (N == 0) {
    const int lead = std::min<int>(6, static_cast<int>(s.modes.size()));
    const Trajectory open =
        simulate_open_loop(s, unit_states(s, lead), cfg.T, cfg.dt);
    write_file(cfg, "trajectory_open.csv",
               trajectory_csv(cfg, open, "open"));
    j["note"] = "all retained modes decay; no controller required";
    ordered_json o;
    o["gamma_fit"] = open.gamma_fit;
    o["norm_ratio"] =
        open.state_norm(open.state_norm.size() - 1) / open.state_norm(0);
    j["open"] = o;
    j["certificate"] = ordered_json{{"pass", true}};
    write_json(cfg, "summary.json", j);
    return 0;
  }

  const DesignOut d = make_design(s, cfg);
  const auto lifted = lift_actuators(s, d.law);
  const auto y0 = unit_states(s, N);

  const Trajectory open = simulate_open_loop(s, y0, cfg.T, cfg.dt);
  const Trajectory closed =
      simulate_linear(s, d.law, lifted, y0, cfg.T, cfg.dt);

  write_file(cfg, "trajectory_open.csv", trajectory_csv(cfg, open, "open"));
  write_file(cfg, "trajectory_closed.csv",
             trajectory_csv(cfg, closed, "closed"));

  const double gamma0 = closed.gamma0;
  const double gap = stable_gap(s);
  const double target = 0.9 * std::min(gamma0, gap);

  ordered_json o;
  o["gamma_fit"] = open.gamma_fit;
  o["norm_ratio"] =
      open.state_norm(open.state_norm.size() - 1) / open.state_norm(0);
  j["open"] = o;

  ordered_json c;
  c["gamma0"] = gamma0;
  c["stable_gap"] = gap;
  c["gamma_fit"] = closed.gamma_fit;
  c["norm_ratio"] =
      closed.state_norm(closed.state_norm.size() - 1) / closed.state_norm(0);
  c["controller_consistency"] = closed.controller_consistency;
  c["control_sup"] = closed.control_norm.maxCoeff();
  j["closed"] = c;

  ordered_json cert;
  cert["decay_target"] = target;
  const bool pass = closed.gamma_fit >= target;
  cert["pass"] = pass;
  j["certificate"] = cert;

  write_json(cfg, "summary.json", j);
  return pass ? 0 : static_cast<int>(errc::verify);
}

// ---------------------------------------------------------------------------
// verify: duality residual matrix and the invariant suites
// ---------------------------------------------------------------------------
int cmd_verify(const RunConfig& cfg) {
  const Spectrum s = spectrum_for(cfg);
  const int N = count_unstable(s);

  ordered_json j;
  j["config"] = config_json(cfg);
  j["N"] = N;

  ordered_json checks = ordered_json::array();
  bool all = true;
  auto add_check = [&](const std::string& name, double value,
                       double allowance, bool pass) {
    ordered_json c;
    c["name"] = name;
    c["value"] = value;
    c["allowance"] = allowance;
    c["pass"] = pass;
    checks.push_back(c);
    all = all && pass;
  };

  const SemisimpleReport h1 = check_semisimple(s);
  const UniqueContinuationReport uc = unique_continuation_check(s, 1e-6);
  const double gdev = gram_deviation(s);
  add_check("semisimple_unstable_block", h1.pass ? 1.0 : 0.0, 1.0, h1.pass);
  double uc_min = std::numeric_limits<double>::infinity();
  for (double m : uc.direct_margin) uc_min = std::min(uc_min, m);
  for (double m : uc.adjoint_margin) uc_min = std::min(uc_min, m);
  if (uc.direct_margin.empty()) uc_min = 0.0;
  add_check("unique_continuation_min_margin",
            N == 0 ? 0.0 : uc_min, 1e-6, uc.pass);
  add_check("biorthonormality_max_dev", gdev, 1e-8, gdev <= 1e-8);

  if (N == 0) {
    j["checks"] = checks;
    j["pass"] = all;
    j["note"] = "all retained modes decay; no controller required";
    write_json(cfg, "verify.json", j);
    return all ? 0 : static_cast<int>(errc::verify);
  }

  // the duality identity is stated for the per-mode dual actuators, so the
  // residual matrix is always evaluated on the complex-variant law
  std::vector<cplx> lams;
  for (int i = 0; i < N; ++i) lams.push_back(s.modes[i].lambda);
  const GainParameters gains = select_gains(lams, cfg.nu);
  const FeedbackLaw claw = build_feedback(s, gains, cfg.alpha0);
  const auto clifted = lift_actuators(s, claw);

  const Eigen::MatrixXcd R = verify_duality(s, clifted, claw.k_shift);
  double worst_ratio = 0.0;
  bool dual_ok = true;
  for (int i = 0; i < N; ++i) {
    const double allow =
        1e-6 * cfg.nu / std::abs(s.modes[i].lambda + claw.k_shift);
    for (int l = 0; l < N; ++l) {
      worst_ratio = std::max(worst_ratio, std::abs(R(i, l)) / allow);
      dual_ok = dual_ok && std::abs(R(i, l)) <= allow;
    }
  }
  add_check("duality_residual_vs_allowance", worst_ratio, 1.0, dual_ok);
  add_check("adjoint_trace_gram_cond", claw.cond_F, 1e8,
            claw.cond_F < 1e8);

  bool margins_pos = true, rates_pos = true;
  double min_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < N; ++i) {
    const double m =
        gain_margin(s.modes[i].lambda, cfg.nu, claw.k_shift, claw.eta);
    min_margin = std::min(min_margin, m);
    margins_pos = margins_pos && m > 0.0;
    rates_pos = rates_pos && gains.rho[i].real() > 0.0;
  }
  add_check("min_gain_margin", min_margin, 0.0,
            margins_pos && rates_pos);

  // closed-loop consistency on a seeded, physically real random state,
  // under the configured variant
  const DesignOut d = make_design(s, cfg);
  const auto lifted = lift_actuators(s, d.law);
  std::mt19937_64 rng(static_cast<unsigned long long>(cfg.seed));
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<ModeState> y0;
  std::vector<bool> used(N, false);
  for (int i = 0; i < N; ++i) {
    if (used[i]) continue;
    const int p = mirror_index(s, i, N);
    const cplx c(U(rng), U(rng));
    y0.push_back({s.modes[i].m, c * s.modes[i].v, c * s.modes[i].vp});
    used[i] = true;
    if (p >= 0 && p != i && !used[p]) {
      y0.push_back({s.modes[p].m, std::conj(c) * s.modes[p].v,
                    std::conj(c) * s.modes[p].vp});
      used[p] = true;
    }
  }
  const Trajectory tr = simulate_linear(s, d.law, lifted, y0, cfg.T, cfg.dt);
  const double consistency_allow =
      d.law.variant == Variant::real_modes ? 1e-5 : 1e-7;
  add_check("controller_consistency", tr.controller_consistency,
            consistency_allow,
            tr.controller_consistency <= consistency_allow);

  if (d.law.variant != Variant::real_modes) {
    double envelope = 0.0;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
      for (int m = 0; m < N; ++m) {
        const double z0 = std::abs(tr.z_unstable(0, m));
        if (z0 == 0.0) continue;
        envelope = std::max(
            envelope, std::abs(tr.z_unstable(i, m)) /
                          (z0 * std::exp(-tr.gamma0 * tr.times[i])));
      }
    }
    add_check("closed_mode_envelope", envelope, 1.0 + 1e-9,
              envelope <= 1.0 + 1e-9);
  }

  j["checks"] = checks;
  j["pass"] = all;
  write_json(cfg, "verify.json", j);
  return all ? 0 : static_cast<int>(errc::verify);
}

// ---------------------------------------------------------------------------
// sweep: bisect the nonlinear-surrogate stability-ball amplitude
// ---------------------------------------------------------------------------
int cmd_sweep(const RunConfig& cfg) {
  const Spectrum s = spectrum_for(cfg);
  const int N = count_unstable(s);

  ordered_json j;
  j["config"] = config_json(cfg);
  j["N"] = N;

  if (N == 0) {
    j["sweep"] = nullptr;
    j["note"] = "all retained modes decay; no controller required";
    j["certificate"] = ordered_json{{"pass", true}};
    write_json(cfg, "summary.json", j);
    return 0;
  }

  const DesignOut d = make_design(s, cfg);
  if (d.law.variant == Variant::real_modes)
    fail(errc::config, "ConfigError",
         "sweep requires the complex or restricted variant");
  const auto lifted = lift_actuators(s, d.law);

  // the surrogate keeps at most twelve leading modes (mirror-closed);
  // beyond that the truncation cost grows with no effect on the bracket
  int L = N;
  const int cap = std::min<int>(12, static_cast<int>(s.modes.size()));
  for (int probe = cap; probe >= N; --probe) {
    if (prefix_mirror_closed(s, probe)) {
      L = probe;
      break;
    }
  }
  const auto shape = unit_states(s, L);
  const double gamma0 = min_closed_rate(d.gains);

  int hunt_runs = 0;
  auto decays = [&](double amp) {
    ++hunt_runs;
    std::vector<ModeState> scaled = shape;
    for (ModeState& st : scaled) {
      st.v *= amp;
      st.vp *= amp;
    }
    try {
      const Trajectory tr = simulate_nonlinear_galerkin(
          s, d.law, lifted, scaled, cfg.T, cfg.dt, L);
      if (tr.outcome != SimOutcome::completed) return false;
      return tr.gamma_fit >= 0.8 * gamma0;
    } catch (const error& e) {
      if (e.kind() == "SolverFailure") return false;
      throw;
    }
  };

  // geometric hunt for a bracket around the stability boundary
  double lo = 1.0, hi = 1.0;
  bool capped = false;
  if (decays(1.0)) {
    hi = 4.0;
    while (decays(hi)) {
      lo = hi;
      hi *= 4.0;
      if (hi > 1e6) {
        capped = true;
        break;
      }
    }
    if (!capped) lo = hi / 4.0;
  } else {
    lo = 0.25;
    while (!decays(lo)) {
      hi = lo;
      lo /= 4.0;
      if (lo < 1e-6)
        fail(errc::verify, "StabilityBallEmpty",
             "the closed loop decays at no amplitude above 1e-6");
    }
  }

  ordered_json sw;
  sw["n_modes"] = L;
  sw["rate_fraction"] = 0.8;
  if (capped) {
    sw["decays"] = lo;
    sw["diverges"] = nullptr;
    sw["runs"] = hunt_runs;
    sw["note"] = "no failing amplitude found up to 1e6";
    j["sweep"] = sw;
    j["certificate"] = ordered_json{{"pass", true}};
    write_json(cfg, "summary.json", j);
    return 0;
  }

  const StabilityBall ball = bisect_stability_ball(
      s, d.law, lifted, shape, cfg.T, cfg.dt, L, lo, hi, 8);
  sw["bracket_lo"] = lo;
  sw["bracket_hi"] = hi;
  sw["decays"] = ball.decays;
  sw["diverges"] = ball.diverges;
  sw["runs"] = hunt_runs + ball.runs;
  j["sweep"] = sw;
  const bool pass = ball.decays > 0.0;
  j["certificate"] = ordered_json{{"pass", pass}};
  write_json(cfg, "summary.json", j);
  return pass ? 0 : static_cast<int>(errc::verify);
}

}  // namespace

int run_command(const std::string& cmd, const RunConfig& cfg) {
  if (cmd == "spectrum") return cmd_spectrum(cfg);
  if (cmd == "design") return cmd_design(cfg);
  if (cmd == "simulate") return cmd_simulate(cfg);
  if (cmd == "verify") return cmd_verify(cfg);
  if (cmd == "sweep") return cmd_sweep(cfg);
  fail(errc::config, "ConfigError",
       "unknown command '" + cmd +
           "' (expected spectrum, design, simulate, verify or sweep)");
}

}  // namespace oseen
