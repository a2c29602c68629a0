#include "oseen/lift.hpp"

#include <string>

#include "oseen/errors.hpp"

namespace oseen {

namespace {
// Relative pivot floor for the bordered factorization. The rows are
// equilibrated first, so the pivot ratio measures conditioning rather than
// the scale spread between derivative and identity rows; a shift that lands
// on an eigenvalue of the clamped pencil collapses the smallest pivot by
// many orders below this floor, while admissible shifts stay far above it.
constexpr double kPivotFloor = 1e-12;
}  // namespace

LiftedField solve_dirichlet_mode(const ChannelFlow& flow, const SpectralGrid& g,
                                 int m, double k_shift, const BoundaryData& bd,
                                 ModePencil::Kind kind) {
  if (m == 0) fail(errc::config, "ConfigError", "wavenumber must be nonzero");
  const int n = g.M + 1;
  const cplx im(0.0, double(m));

  Eigen::MatrixXcd op = (kind == ModePencil::Kind::direct
                             ? nodal_orr_sommerfeld(flow, g, m)
                             : nodal_adjoint(flow, g, m)) +
                        k_shift * nodal_mass(g, m);

  Eigen::MatrixXcd sys(n, n);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  sys.row(0).setZero();
  sys(0, 0) = 1.0;
  rhs[0] = bd.v0;
  sys.row(1) = g.D1.row(0).cast<cplx>();
  rhs[1] = -im * bd.u0;
  sys.middleRows(2, n - 4) = op.middleRows(2, n - 4);
  sys.row(n - 2) = g.D1.row(g.M).cast<cplx>();
  rhs[n - 2] = -im * bd.u1;
  sys.row(n - 1).setZero();
  sys(n - 1, n - 1) = 1.0;
  rhs[n - 1] = bd.v1;

  // equilibrate rows so the pivot test is scale-free
  for (int i = 0; i < n; ++i) {
    double s = sys.row(i).cwiseAbs().maxCoeff();
    if (s > 0) {
      sys.row(i) /= s;
      rhs[i] /= s;
    }
  }

  Eigen::FullPivLU<Eigen::MatrixXcd> lu(sys);
  lu.setThreshold(kPivotFloor);
  if (!lu.isInvertible()) {
    fail(errc::gains, "ShiftTooSmall",
         "shifted boundary-value operator is singular at k = " +
             std::to_string(k_shift) + " (wavenumber " + std::to_string(m) +
             "); the shift collides with a mode of the clamped pencil");
  }

  LiftedField f;
  f.m = m;
  f.k_shift = k_shift;
  f.data = bd;
  f.v = lu.solve(rhs);
  f.vp = g.D1.cast<cplx>() * f.v;
  f.u = (cplx(0.0, 1.0) / double(m)) * f.vp;
  return f;
}

Eigen::MatrixXcd verify_duality(const Spectrum& s,
                                const std::vector<LiftedField>& lifted,
                                double k_shift) {
  const int N = s.N;
  const int J = static_cast<int>(lifted.size());
  Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(N, J);
  for (int i = 0; i < N; ++i) {
    const EigenMode& md = s.modes[i];
    for (int j = 0; j < J; ++j) {
      cplx pairing = 0.0;
      if (lifted[j].m == md.m) {
        pairing = mode_inner(s.gb->grid, md.m, lifted[j].v, lifted[j].vp,
                             md.v_star, md.vs_p);
      }
      cplx target = (i == j) ? -s.flow.nu / (md.lambda + k_shift) : cplx(0.0);
      R(i, j) = pairing - target;
    }
  }
  return R;
}

cplx adjoint_trace(const EigenMode& mode, int wall) {
  if (wall == 0) return -mode.wall_data.us_p0;
  if (wall == 1) return mode.wall_data.us_p1;
  fail(errc::config, "ConfigError", "wall index must be 0 or 1");
}

}  // namespace oseen
