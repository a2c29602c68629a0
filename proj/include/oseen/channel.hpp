#pragma once
#include <complex>
#include <map>
#include <vector>

#include "oseen/spectral.hpp"

namespace oseen {

// Parabolic base flow U(y) = C (y^2 - y) on the periodic channel, plus the
// retained streamwise wavenumber set. Immutable value type.
struct ChannelFlow {
  double nu = 0.0;  // kinematic viscosity, > 0
  double a = 0.0;   // base-flow strength, >= 0 (0 degenerates to Stokes)
  double C = 0.0;   // = -a / (2 nu)
  std::vector<int> wavenumbers;  // nonzero, ascending, closed under negation
};

// wavenumbers = {-M_x, ..., -1, 1, ..., M_x}
ChannelFlow make_channel(double nu, double a, int M_x);

struct BasePoint {
  double U, Up, Upp;
};
// U = C (y^2 - y), U' = C (2y - 1), U'' = 2C; rejects y outside [0,1]
BasePoint eval_base_flow(const ChannelFlow& flow, double y);

struct BaseFlowSamples {
  Eigen::VectorXd U, Up, Upp;  // at the grid nodes
};
BaseFlowSamples sample_base_flow(const ChannelFlow& flow, const SpectralGrid& g);

// Two-component Fourier-mode field: nodal velocity samples per wavenumber.
struct ModeComponent {
  Eigen::VectorXcd u, v;
};
struct FourierField {
  std::map<int, ModeComponent> comps;
};

// sum_m integral_0^1 (u_m conj(gu_m) + v_m conj(gv_m)) dy by quadrature;
// distinct wavenumbers are orthogonal, so only shared ones contribute. The
// constant 2 pi factor from the streamwise integral is dropped uniformly.
std::complex<double> inner_product(const SpectralGrid& g, const FourierField& f,
                                   const FourierField& h);

}  // namespace oseen
