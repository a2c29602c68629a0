#pragma once

#include <Eigen/Dense>
#include <vector>

#include "oseen/channel.hpp"
#include "oseen/spectrum.hpp"

namespace oseen {

// prescribed boundary velocity of one Fourier mode: tangential (u) and
// normal (v) components at the lower (y=0) and upper (y=1) wall
struct BoundaryData {
  cplx u0{}, v0{};
  cplx u1{}, v1{};
};

// Steady lifted velocity mode: the unique solution of the k-shifted mode
// equation that carries the prescribed wall velocity into the interior,
//   (A_m + k (D^2 - m^2)) v = 0   in (0, 1),
//   v(w) = v_w,  v'(w) = -i m u_w  at both walls (continuity trace).
// u = i v'/m reconstructs the tangential velocity on the nodes.
struct LiftedField {
  int m = 0;
  double k_shift = 0.0;
  BoundaryData data{};
  Eigen::VectorXcd v, vp, u;
};

// Solves the bordered collocation system for one wavenumber. The interior
// rows are the shifted mode operator; four boundary rows pin v and v' at the
// walls. Throws ShiftTooSmall when the shifted operator is (numerically)
// singular, i.e. -k collides with an eigenvalue of the clamped pencil.
// kind selects which shifted operator carries the data into the interior:
// the mode operator itself or its formal adjoint (both share the trace
// conventions, so the same bordered rows apply).
LiftedField solve_dirichlet_mode(const ChannelFlow& flow, const SpectralGrid& g,
                                 int m, double k_shift, const BoundaryData& bd,
                                 ModePencil::Kind kind = ModePencil::Kind::direct);

// Residual of the resolvent pairing over the unstable modes: entry (i, j) is
//   <lifted_j, phi*_i> + nu delta_ij / (lambda_i + k),
// which vanishes when lifted_j carries the dual boundary data of mode j.
// Pairings across distinct wavenumbers are exactly zero by orthogonality.
Eigen::MatrixXcd verify_duality(const Spectrum& s,
                                const std::vector<LiftedField>& lifted,
                                double k_shift);

// wall traces of an adjoint mode: tau(w) = n_sign(w) u*'(w), the functional
// the boundary data couples to in the resolvent pairing
cplx adjoint_trace(const EigenMode& mode, int wall);

}  // namespace oseen
