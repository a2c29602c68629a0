#include "oseen/spectrum.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "oseen/errors.hpp"

namespace oseen {

namespace {

constexpr double kResidualBound = 1e-8;      // EigenMode residual invariant
constexpr double kUnstablePairTol = 1e-8;    // adjoint pairing, unstable modes
constexpr double kDegenerateFloor = 1e-10;   // diagonal pairing modulus floor

Eigen::MatrixXcd diag_times(const Eigen::VectorXcd& d, const Eigen::MatrixXd& A) {
  return d.asDiagonal() * A.cast<cplx>();
}

}  // namespace

std::shared_ptr<const GridBundle> make_bundle(int M) {
  auto gb = std::make_shared<GridBundle>();
  gb->grid = build_grid(M);
  gb->basis = make_clamped_basis(gb->grid);
  return gb;
}

cplx mode_inner(const SpectralGrid& g, int m, const Eigen::VectorXcd& v1,
                const Eigen::VectorXcd& vp1, const Eigen::VectorXcd& v2,
                const Eigen::VectorXcd& vp2) {
  const double m2 = static_cast<double>(m) * m;
  cplx acc = 0.0;
  for (Eigen::Index j = 0; j < g.quad_weights.size(); ++j)
    acc += g.quad_weights[j] *
           (vp1[j] * std::conj(vp2[j]) / m2 + v1[j] * std::conj(v2[j]));
  return acc;
}

double mode_norm(const SpectralGrid& g, int m, const Eigen::VectorXcd& v,
                 const Eigen::VectorXcd& vp) {
  return std::sqrt(std::abs(mode_inner(g, m, v, vp, v, vp)));
}

Eigen::MatrixXcd nodal_mass(const SpectralGrid& g, int m) {
  Eigen::MatrixXcd B = g.D2.cast<cplx>();
  B.diagonal().array() -= static_cast<double>(m) * m;
  return B;
}

Eigen::MatrixXcd nodal_orr_sommerfeld(const ChannelFlow& flow,
                                      const SpectralGrid& g, int m) {
  if (m == 0) fail(errc::config, "ConfigError", "wavenumber must be nonzero");
  const auto bf = sample_base_flow(flow, g);
  const double nu = flow.nu;
  const double md = m;
  const cplx im(0.0, md);
  const Eigen::Index n = g.nodes.size();

  // -nu v'''' + (2 nu m^2 + i m U) v'' - (nu m^4 + i m^3 U + i m U'') v
  Eigen::VectorXcd c2 =
      Eigen::VectorXcd::Constant(n, 2.0 * nu * md * md) + im * bf.U;
  Eigen::VectorXcd c0 = Eigen::VectorXcd::Constant(n, nu * md * md * md * md) +
                        im * md * md * bf.U + im * bf.Upp;
  Eigen::MatrixXcd A = -nu * g.D4.cast<cplx>() + diag_times(c2, g.D2);
  A.diagonal() -= c0;
  return A;
}

Eigen::MatrixXcd nodal_adjoint(const ChannelFlow& flow, const SpectralGrid& g,
                               int m) {
  if (m == 0) fail(errc::config, "ConfigError", "wavenumber must be nonzero");
  const auto bf = sample_base_flow(flow, g);
  const double nu = flow.nu;
  const double md = m;
  const cplx im(0.0, md);
  const Eigen::Index n = g.nodes.size();

  // -nu W'' + (nu m^2 - i m U) W - 2 i m U' v',  W = v'' - m^2 v
  Eigen::VectorXcd cw =
      Eigen::VectorXcd::Constant(n, nu * md * md) - im * bf.U;
  Eigen::MatrixXcd W = nodal_mass(g, m);
  return -nu * (g.D4.cast<cplx>() - md * md * g.D2.cast<cplx>()) +
         cw.asDiagonal() * W -
         diag_times(2.0 * im * bf.Up.cast<cplx>(), g.D1);
}

ModePencil assemble_orr_sommerfeld(const ChannelFlow& flow,
                                   std::shared_ptr<const GridBundle> gb, int m) {
  const SpectralGrid& g = gb->grid;
  auto red = clamp_fourth_order(g, gb->basis, nodal_orr_sommerfeld(flow, g, m),
                                nodal_mass(g, m));
  ModePencil p;
  p.m = m;
  p.kind = ModePencil::Kind::direct;
  p.A = std::move(red.A);
  p.B = std::move(red.B);
  p.gb = std::move(gb);
  return p;
}

ModePencil assemble_adjoint(const ChannelFlow& flow,
                            std::shared_ptr<const GridBundle> gb, int m) {
  const SpectralGrid& g = gb->grid;
  auto red = clamp_fourth_order(g, gb->basis, nodal_adjoint(flow, g, m),
                                nodal_mass(g, m));
  ModePencil p;
  p.m = m;
  p.kind = ModePencil::Kind::adjoint;
  p.A = std::move(red.A);
  p.B = std::move(red.B);
  p.gb = std::move(gb);
  return p;
}

RawEigensolve raw_eigensolve(const ModePencil& p) {
  const Eigen::Index n = p.A.rows();
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(p.B);
  if (!lu.isInvertible())
    fail(errc::hypothesis, "SolverFailure",
         "pencil matrix B is singular on the clamped subspace");
  Eigen::MatrixXcd T = lu.solve(p.A);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(T, true);
  if (es.info() != Eigen::Success)
    fail(errc::hypothesis, "NonConvergence",
         "dense eigensolver failed to converge at dimension " +
             std::to_string(n) + " (wavenumber " + std::to_string(p.m) + ")");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto& lam = es.eigenvalues();
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    if (lam[i].real() != lam[j].real()) return lam[i].real() < lam[j].real();
    return lam[i].imag() < lam[j].imag();
  });

  RawEigensolve r;
  r.lambdas.resize(n);
  r.coeffs.resize(n, n);
  r.residuals.resize(n);
  Eigen::MatrixXcd R = T * es.eigenvectors() -
                       es.eigenvectors() * es.eigenvalues().asDiagonal();
  for (Eigen::Index k = 0; k < n; ++k) {
    const int j = order[k];
    r.lambdas[k] = lam[j];
    r.coeffs.col(k) = es.eigenvectors().col(j);
    r.residuals[k] = R.col(j).norm() /
                     ((1.0 + std::abs(lam[j])) * es.eigenvectors().col(j).norm());
  }
  return r;
}

namespace {

EigenMode lift_mode(const GridBundle& gb, int m, ModePencil::Kind kind,
                    cplx lambda, const Eigen::VectorXcd& c, double resid) {
  const int M = gb.grid.M;
  EigenMode md;
  md.m = m;
  md.lambda = lambda;
  md.residual = resid;
  Eigen::VectorXcd v = gb.basis.val * c;
  Eigen::VectorXcd vp = gb.basis.d1 * c;
  Eigen::VectorXcd vpp = gb.basis.d2 * c;
  const double nrm = mode_norm(gb.grid, m, v, vp);
  if (nrm > 0.0) {
    v /= nrm;
    vp /= nrm;
    vpp /= nrm;
  }
  const cplx iom = cplx(0.0, 1.0) / static_cast<double>(m);
  if (kind == ModePencil::Kind::direct) {
    md.v = std::move(v);
    md.vp = vp;
    md.u = iom * vp;
    md.vpp = vpp;
    md.wall_data.vpp0 = vpp[0];
    md.wall_data.vpp1 = vpp[M];
    md.wall_data.up0 = iom * vpp[0];
    md.wall_data.up1 = iom * vpp[M];
  } else {
    md.v_star = std::move(v);
    md.vs_p = vp;
    md.u_star = iom * vp;
    md.wall_data.us_p0 = iom * vpp[0];
    md.wall_data.us_p1 = iom * vpp[M];
    md.wall_data.vs_p0 = vp[0];  // exactly zero: clamped trial space
    md.wall_data.vs_p1 = vp[M];
  }
  return md;
}

EigenMode conj_mirror(const EigenMode& s) {
  EigenMode md = s;
  md.m = -s.m;
  md.lambda = std::conj(s.lambda);
  md.v = s.v.conjugate();
  md.vp = s.vp.conjugate();
  md.vpp = s.vpp.conjugate();
  md.u = s.u.conjugate();
  md.v_star = s.v_star.conjugate();
  md.vs_p = s.vs_p.conjugate();
  md.u_star = s.u_star.conjugate();
  md.wall_data.vpp0 = std::conj(s.wall_data.vpp0);
  md.wall_data.vpp1 = std::conj(s.wall_data.vpp1);
  md.wall_data.up0 = std::conj(s.wall_data.up0);
  md.wall_data.up1 = std::conj(s.wall_data.up1);
  md.wall_data.us_p0 = std::conj(s.wall_data.us_p0);
  md.wall_data.us_p1 = std::conj(s.wall_data.us_p1);
  md.wall_data.vs_p0 = std::conj(s.wall_data.vs_p0);
  md.wall_data.vs_p1 = std::conj(s.wall_data.vs_p1);
  return md;
}

// longest prefix of the fine eigenvalue list whose nearest coarse partner
// sits within tol * (1 + |lambda|)
int validated_prefix(const Eigen::VectorXcd& coarse, const Eigen::VectorXcd& fine,
                     double tol) {
  int prefix = 0;
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < coarse.size(); ++j)
      best = std::min(best, std::abs(coarse[j] - fine[i]));
    if (best <= tol * (1.0 + std::abs(fine[i]))) {
      prefix = static_cast<int>(i) + 1;
    } else {
      break;
    }
  }
  return prefix;
}

int count_with_margin(const std::vector<EigenMode>& modes, double margin) {
  int n = 0;
  for (const auto& md : modes) {
    if (std::abs(md.lambda.real()) <= margin)
      fail(errc::hypothesis, "NeutralEigenvalue",
           "eigenvalue with |Re lambda| <= margin: Re = " +
               std::to_string(md.lambda.real()));
    if (md.lambda.real() < -margin) ++n;
  }
  return n;
}

}  // namespace

std::vector<EigenMode> solve_spectrum(const ModePencil& pencil, int n_keep) {
  RawEigensolve raw = raw_eigensolve(pencil);
  std::vector<EigenMode> out;
  for (Eigen::Index i = 0; i < raw.lambdas.size() &&
                           static_cast<int>(out.size()) < n_keep;
       ++i) {
    if (raw.residuals[i] > kResidualBound) continue;  // spurious pair
    out.push_back(lift_mode(*pencil.gb, pencil.m, pencil.kind, raw.lambdas[i],
                            raw.coeffs.col(i), raw.residuals[i]));
  }
  return out;
}

int count_unstable(const Spectrum& s, double margin) {
  for (size_t i = 1; i < s.modes.size(); ++i)
    if (s.modes[i].lambda.real() < s.modes[i - 1].lambda.real())
      fail(errc::hypothesis, "SolverFailure", "spectrum modes are not sorted");
  return count_with_margin(s.modes, margin);
}

SemisimpleReport check_semisimple_pairs(const std::vector<cplx>& lambdas,
                                        const std::vector<Eigen::VectorXcd>& vecs,
                                        double cluster_tol) {
  SemisimpleReport rep;
  rep.pass = true;
  const size_t n = lambdas.size();
  std::vector<bool> used(n, false);
  for (size_t i = 0; i < n; ++i) {
    if (used[i]) continue;
    std::vector<size_t> cluster{i};
    used[i] = true;
    // greedy transitive clustering on |dlambda| <= tol (1 + |lambda|)
    for (bool grew = true; grew;) {
      grew = false;
      for (size_t j = 0; j < n; ++j) {
        if (used[j]) continue;
        for (size_t c : cluster) {
          if (std::abs(lambdas[j] - lambdas[c]) <=
              cluster_tol * (1.0 + std::abs(lambdas[j]))) {
            cluster.push_back(j);
            used[j] = true;
            grew = true;
            break;
          }
        }
      }
    }
    SemisimpleCluster sc;
    sc.center = lambdas[cluster.front()];
    sc.algebraic = static_cast<int>(cluster.size());
    if (cluster.size() == 1) {
      sc.geometric = vecs[cluster.front()].norm() > 0.0 ? 1 : 0;
    } else {
      Eigen::MatrixXcd V(vecs[cluster.front()].size(), cluster.size());
      for (size_t c = 0; c < cluster.size(); ++c)
        V.col(c) = vecs[cluster[c]].normalized();
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
      const auto& sv = svd.singularValues();
      int rank = 0;
      for (Eigen::Index k = 0; k < sv.size(); ++k)
        if (sv[k] > 1e-8 * sv[0]) ++rank;
      sc.geometric = rank;
    }
    if (sc.geometric != sc.algebraic) rep.pass = false;
    rep.clusters.push_back(sc);
  }
  return rep;
}

SemisimpleReport check_semisimple(const Spectrum& s, double cluster_tol) {
  std::vector<cplx> lambdas;
  std::vector<Eigen::VectorXcd> vecs;
  for (int j = 0; j < s.N; ++j) {
    lambdas.push_back(s.modes[j].lambda);
    // stack (v, v') so distinct modes of equal v-shape cannot alias
    Eigen::VectorXcd stacked(s.modes[j].v.size() * 2);
    stacked << s.modes[j].v, s.modes[j].vp;
    vecs.push_back(std::move(stacked));
  }
  // distinct wavenumbers never share an eigenvector space; separate them by
  // running the cluster test per wavenumber
  SemisimpleReport rep;
  rep.pass = true;
  std::map<int, std::vector<int>> by_m;
  for (int j = 0; j < s.N; ++j) by_m[s.modes[j].m].push_back(j);
  for (const auto& [m, idx] : by_m) {
    std::vector<cplx> lm;
    std::vector<Eigen::VectorXcd> vm;
    for (int j : idx) {
      lm.push_back(lambdas[j]);
      vm.push_back(vecs[j]);
    }
    auto sub = check_semisimple_pairs(lm, vm, cluster_tol);
    if (!sub.pass) rep.pass = false;
    rep.clusters.insert(rep.clusters.end(), sub.clusters.begin(),
                        sub.clusters.end());
  }
  return rep;
}

Spectrum biorthonormalize(const std::vector<EigenMode>& direct,
                          const std::vector<EigenMode>& adjoint,
                          std::shared_ptr<const GridBundle> gb,
                          const ChannelFlow& flow, double margin) {
  if (direct.size() != adjoint.size())
    fail(errc::hypothesis, "SolverFailure",
         "direct and adjoint mode counts differ");
  const SpectralGrid& g = gb->grid;

  // pair by wavenumber and conjugate eigenvalue, each adjoint used once
  std::vector<EigenMode> merged;
  std::map<int, std::vector<size_t>> adj_by_m;
  for (size_t a = 0; a < adjoint.size(); ++a)
    adj_by_m[adjoint[a].m].push_back(a);
  for (const auto& d : direct) {
    auto& pool = adj_by_m[d.m];
    if (pool.empty())
      fail(errc::hypothesis, "SolverFailure",
           "no adjoint candidate left for wavenumber " + std::to_string(d.m));
    size_t best_pos = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t p = 0; p < pool.size(); ++p) {
      double dist = std::abs(std::conj(adjoint[pool[p]].lambda) - d.lambda);
      if (dist < best) {
        best = dist;
        best_pos = p;
      }
    }
    const EigenMode& a = adjoint[pool[best_pos]];
    pool.erase(pool.begin() + best_pos);

    EigenMode md = d;
    md.v_star = a.v_star;
    md.vs_p = a.vs_p;
    md.u_star = a.u_star;
    md.wall_data.us_p0 = a.wall_data.us_p0;
    md.wall_data.us_p1 = a.wall_data.us_p1;
    md.wall_data.vs_p0 = a.wall_data.vs_p0;
    md.wall_data.vs_p1 = a.wall_data.vs_p1;
    md.residual = std::max(d.residual, a.residual);
    md.pairing_err = best / (1.0 + std::abs(d.lambda));
    merged.push_back(std::move(md));
  }

  std::sort(merged.begin(), merged.end(),
            [](const EigenMode& x, const EigenMode& y) {
              if (x.lambda.real() != y.lambda.real())
                return x.lambda.real() < y.lambda.real();
              if (x.lambda.imag() != y.lambda.imag())
                return x.lambda.imag() < y.lambda.imag();
              return x.m < y.m;
            });

  // cluster per wavenumber for the block Gram treatment of repeated
  // eigenvalues; singleton clusters take the scalar path
  std::map<int, std::vector<size_t>> by_m;
  for (size_t j = 0; j < merged.size(); ++j) by_m[merged[j].m].push_back(j);

  constexpr double cluster_tol = 1e-6;
  for (const auto& [m, idx] : by_m) {
    std::vector<std::vector<size_t>> clusters;
    for (size_t j : idx) {
      bool placed = false;
      for (auto& cl : clusters) {
        for (size_t c : cl) {
          if (std::abs(merged[c].lambda - merged[j].lambda) <=
              cluster_tol * (1.0 + std::abs(merged[j].lambda))) {
            cl.push_back(j);
            placed = true;
            break;
          }
        }
        if (placed) break;
      }
      if (!placed) clusters.push_back({j});
    }

    // biorthogonality across distinct eigenvalues, before any rescaling
    for (size_t ci = 0; ci < clusters.size(); ++ci) {
      for (size_t cj = 0; cj < clusters.size(); ++cj) {
        if (ci == cj) continue;
        for (size_t a : clusters[ci]) {
          for (size_t b : clusters[cj]) {
            const EigenMode& A = merged[a];
            const EigenMode& B = merged[b];
            // the discrete cross-pairing degrades like residual / gap, so a
            // nearly repeated eigenvalue cannot be held to the clean gate
            const double sep =
                std::abs(A.lambda - B.lambda) /
                (1.0 + std::max(std::abs(A.lambda), std::abs(B.lambda)));
            double gate = 1e-2;
            if (A.grade == Grade::certificate && B.grade == Grade::certificate)
              gate = sep >= 1e-2 ? 1e-8 : 1e-5;
            const double na = mode_norm(g, m, A.v, A.vp);
            const double nb = mode_norm(g, m, B.v_star, B.vs_p);
            const double cross =
                std::abs(mode_inner(g, m, A.v, A.vp, B.v_star, B.vs_p));
            if (cross > gate * na * nb)
              fail(errc::hypothesis, "SolverFailure",
                   "biorthogonality violation between distinct eigenvalues "
                   "(wavenumber " + std::to_string(m) + ")");
          }
        }
      }
    }

    auto rescale_adjoint = [&](size_t j, cplx c) {
      merged[j].v_star *= c;
      merged[j].vs_p *= c;
      merged[j].u_star *= c;
      merged[j].wall_data.us_p0 *= c;
      merged[j].wall_data.us_p1 *= c;
      merged[j].wall_data.vs_p0 *= c;
      merged[j].wall_data.vs_p1 *= c;
    };

    for (const auto& cl : clusters) {
      if (cl.size() == 1) {
        const size_t j = cl.front();
        const EigenMode& md = merged[j];
        const cplx gpair = mode_inner(g, m, md.v, md.vp, md.v_star, md.vs_p);
        const double nd = mode_norm(g, m, md.v, md.vp);
        const double na = mode_norm(g, m, md.v_star, md.vs_p);
        if (std::abs(gpair) < kDegenerateFloor * nd * na)
          fail(errc::hypothesis, "DegeneratePairing",
               "diagonal eigenfunction pairing below floor at lambda = (" +
                   std::to_string(md.lambda.real()) + ", " +
                   std::to_string(md.lambda.imag()) + ")");
        rescale_adjoint(j, 1.0 / std::conj(gpair));
      } else {
        const int s = static_cast<int>(cl.size());
        Eigen::MatrixXcd G(s, s);
        for (int a = 0; a < s; ++a)
          for (int b = 0; b < s; ++b)
            G(a, b) = mode_inner(g, m, merged[cl[a]].v, merged[cl[a]].vp,
                                 merged[cl[b]].v_star, merged[cl[b]].vs_p);
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(G);
        if (!lu.isInvertible())
          fail(errc::hypothesis, "DegeneratePairing",
               "singular block pairing for a repeated eigenvalue");
        Eigen::MatrixXcd S = lu.inverse().conjugate();
        std::vector<Eigen::VectorXcd> vs(s), vsp(s), us(s);
        std::vector<WallData> wd(s);
        for (int b = 0; b < s; ++b) {
          Eigen::VectorXcd nv = Eigen::VectorXcd::Zero(merged[cl[0]].v_star.size());
          Eigen::VectorXcd nvp = nv, nu = nv;
          WallData w{};
          for (int c = 0; c < s; ++c) {
            nv += S(c, b) * merged[cl[c]].v_star;
            nvp += S(c, b) * merged[cl[c]].vs_p;
            nu += S(c, b) * merged[cl[c]].u_star;
            w.us_p0 += S(c, b) * merged[cl[c]].wall_data.us_p0;
            w.us_p1 += S(c, b) * merged[cl[c]].wall_data.us_p1;
            w.vs_p0 += S(c, b) * merged[cl[c]].wall_data.vs_p0;
            w.vs_p1 += S(c, b) * merged[cl[c]].wall_data.vs_p1;
          }
          vs[b] = std::move(nv);
          vsp[b] = std::move(nvp);
          us[b] = std::move(nu);
          wd[b] = w;
        }
        for (int b = 0; b < s; ++b) {
          merged[cl[b]].v_star = std::move(vs[b]);
          merged[cl[b]].vs_p = std::move(vsp[b]);
          merged[cl[b]].u_star = std::move(us[b]);
          merged[cl[b]].wall_data.us_p0 = wd[b].us_p0;
          merged[cl[b]].wall_data.us_p1 = wd[b].us_p1;
          merged[cl[b]].wall_data.vs_p0 = wd[b].vs_p0;
          merged[cl[b]].wall_data.vs_p1 = wd[b].vs_p1;
        }
      }
    }
  }

  Spectrum s;
  s.N = count_with_margin(merged, margin);
  s.modes = std::move(merged);
  s.gb = std::move(gb);
  s.flow = flow;
  s.gram = Eigen::MatrixXcd::Zero(s.N, s.N);
  for (int j = 0; j < s.N; ++j)
    for (int k = 0; k < s.N; ++k)
      if (s.modes[j].m == s.modes[k].m)
        s.gram(j, k) = mode_inner(g, s.modes[j].m, s.modes[j].v, s.modes[j].vp,
                                  s.modes[k].v_star, s.modes[k].vs_p);
  return s;
}

UniqueContinuationReport unique_continuation_check(const Spectrum& s,
                                                   double floor) {
  UniqueContinuationReport rep;
  rep.floor = floor;
  rep.pass = true;
  const SpectralGrid& g = s.gb->grid;
  for (int j = 0; j < s.N; ++j) {
    const EigenMode& md = s.modes[j];
    const double nd = mode_norm(g, md.m, md.v, md.vp);
    const double trace_d =
        std::abs(md.wall_data.vpp0) + std::abs(md.wall_data.vpp1);
    const double dm = nd > 0.0 ? trace_d / nd : 0.0;
    // adjoint curvature traces recovered from u*' = i v*''/m
    const double na = mode_norm(g, md.m, md.v_star, md.vs_p);
    const double trace_a = std::abs(md.m) * (std::abs(md.wall_data.us_p0) +
                                             std::abs(md.wall_data.us_p1));
    const double am = na > 0.0 ? trace_a / na : 0.0;
    rep.direct_margin.push_back(dm);
    rep.adjoint_margin.push_back(am);
    if (dm < floor || am < floor) rep.pass = false;
  }
  return rep;
}

Spectrum compute_spectrum(const ChannelFlow& flow, int M,
                          const SpectrumOptions& opt) {
  // resolution ladder M -> 3M/2 (even), capped
  std::vector<int> levels{M};
  while (true) {
    int next = levels.back() * 3 / 2;
    if (next % 2) ++next;
    if (next > opt.max_M) break;
    levels.push_back(next);
  }
  if (levels.size() < 2)
    fail(errc::config, "ConfigError",
         "resolution ladder has no headroom below the cap; lower M");

  std::map<int, std::shared_ptr<const GridBundle>> bundles;
  auto bundle = [&](int lvl) {
    auto it = bundles.find(lvl);
    if (it == bundles.end()) it = bundles.emplace(lvl, make_bundle(lvl)).first;
    return it->second;
  };
  struct Key {
    int lvl, m;
    bool adjoint;
    bool operator<(const Key& o) const {
      return std::tie(lvl, m, adjoint) < std::tie(o.lvl, o.m, o.adjoint);
    }
  };
  std::map<Key, RawEigensolve> cache;
  auto solve = [&](int lvl, int m, bool adjoint) -> const RawEigensolve& {
    Key key{lvl, m, adjoint};
    auto it = cache.find(key);
    if (it == cache.end()) {
      auto gb = bundle(lvl);
      ModePencil p = adjoint ? assemble_adjoint(flow, gb, m)
                             : assemble_orr_sommerfeld(flow, gb, m);
      it = cache.emplace(key, raw_eigensolve(p)).first;
    }
    return it->second;
  };

  std::vector<int> pos_m;
  for (int m : flow.wavenumbers)
    if (m > 0) pos_m.push_back(m);

  std::string last_diag;
  for (size_t l = 0; l + 1 < levels.size(); ++l) {
    const int Mc = levels[l];
    const int Mf = levels[l + 1];
    bool ok = true;
    std::ostringstream diag;
    diag << "pair (" << Mc << "," << Mf << "):";

    struct PerM {
      int n_unstable = 0;
      int cert_prefix = 0;
      int sim_prefix = 0;
      int keep = 0;
    };
    std::map<int, PerM> info;

    for (int m : pos_m) {
      const RawEigensolve& coarse = solve(Mc, m, false);
      const RawEigensolve& fine = solve(Mf, m, false);
      PerM pm;
      for (Eigen::Index i = 0; i < fine.lambdas.size(); ++i)
        if (fine.lambdas[i].real() < -opt.margin) ++pm.n_unstable;
      pm.cert_prefix = validated_prefix(coarse.lambdas, fine.lambdas, opt.cert_tol);
      pm.sim_prefix = validated_prefix(coarse.lambdas, fine.lambdas, opt.sim_tol);
      const int cert_need = std::max(opt.n_report, pm.n_unstable);
      const int sim_need = pm.n_unstable + opt.n_stable_sim;
      pm.keep = std::max(cert_need, sim_need);
      diag << " m=" << m << " cert " << pm.cert_prefix << "/" << cert_need
           << " sim " << pm.sim_prefix << "/" << sim_need;
      if (pm.cert_prefix < cert_need || pm.sim_prefix < sim_need ||
          pm.keep > static_cast<int>(fine.lambdas.size()))
        ok = false;
      info[m] = pm;
    }

    if (ok) {
      // adjoint pairing gates at the fine resolution
      for (int m : pos_m) {
        const RawEigensolve& fine = solve(Mf, m, false);
        const RawEigensolve& adj = solve(Mf, m, true);
        const PerM& pm = info[m];
        for (int i = 0; i < pm.keep; ++i) {
          double best = std::numeric_limits<double>::infinity();
          for (Eigen::Index j = 0; j < adj.lambdas.size(); ++j)
            best = std::min(best,
                            std::abs(std::conj(adj.lambdas[j]) - fine.lambdas[i]));
          const double scaled = best / (1.0 + std::abs(fine.lambdas[i]));
          const bool unstable = fine.lambdas[i].real() < -opt.margin;
          const double gate = unstable ? kUnstablePairTol : opt.sim_tol;
          if (scaled > gate) {
            ok = false;
            diag << " adjoint-gate m=" << m << " mode " << i << " err "
                 << scaled;
            break;
          }
        }
        if (!ok) break;
      }
    }

    if (!ok) {
      last_diag = diag.str();
      continue;
    }

    // gates passed: build modes on the fine grid and mirror to -m
    auto gb = bundle(Mf);
    std::vector<EigenMode> dir_all, adj_all;
    for (int m : pos_m) {
      const RawEigensolve& fine = solve(Mf, m, false);
      const RawEigensolve& adj = solve(Mf, m, true);
      const PerM& pm = info[m];
      std::vector<bool> adj_used(adj.lambdas.size(), false);
      for (int i = 0; i < pm.keep; ++i) {
        if (fine.residuals[i] > kResidualBound)
          fail(errc::hypothesis, "SolverFailure",
               "retained eigenpair violates the residual bound");
        EigenMode d = lift_mode(*gb, m, ModePencil::Kind::direct,
                                fine.lambdas[i], fine.coeffs.col(i),
                                fine.residuals[i]);
        d.grade = (i < pm.cert_prefix) ? Grade::certificate : Grade::simulation;
        int best_j = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < adj.lambdas.size(); ++j) {
          if (adj_used[j]) continue;
          double dist = std::abs(std::conj(adj.lambdas[j]) - fine.lambdas[i]);
          if (dist < best) {
            best = dist;
            best_j = static_cast<int>(j);
          }
        }
        adj_used[best_j] = true;
        EigenMode a = lift_mode(*gb, m, ModePencil::Kind::adjoint,
                                adj.lambdas[best_j], adj.coeffs.col(best_j),
                                adj.residuals[best_j]);
        a.grade = d.grade;
        dir_all.push_back(d);
        adj_all.push_back(a);
        dir_all.push_back(conj_mirror(d));
        adj_all.push_back(conj_mirror(a));
      }
    }
    return biorthonormalize(dir_all, adj_all, gb, flow, opt.margin);
  }

  fail(errc::hypothesis, "NonConvergence",
       "resolution ladder exhausted at cap " + std::to_string(opt.max_M) +
           " without meeting the validation gates; last " + last_diag);
}

}  // namespace oseen
