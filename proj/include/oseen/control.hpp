#pragma once

#include <array>
#include <string>
#include <vector>

#include "oseen/lift.hpp"
#include "oseen/spectrum.hpp"

namespace oseen {

// Arithmetic realization of the boundary feedback law.
enum class Variant { complex_modes, real_modes, restricted };
Variant parse_variant(const std::string& name);  // "complex"|"real"|"restricted"
const char* variant_name(Variant v);

// outward normal direction of a wall as a sign on the y-component
inline double wall_normal_sign(int wall) { return wall == 0 ? -1.0 : 1.0; }

// Left side of the modal gain inequality at (k, eta),
//   (|k+lambda|^2 - eta k nu) Re(lambda) - eta nu Re(lambda^2),
// positive exactly where the closed modal rate rho = lambda mu has Re > 0.
double gain_margin(cplx lambda, double nu, double k, double eta);

// mu = (k+lambda)/(k+lambda - nu eta), the factor that converts the modal
// measurement of the raw state into the shifted (boundary-homogeneous) one
cplx mu_factor(cplx lambda, double nu, double k, double eta);

struct GainParameters {
  double k_shift = 0.0;       // resolvent shift k > 0
  double eta = 0.0;           // gain scaling > 0
  double nu = 0.0;            // viscosity the margins were evaluated with
  std::vector<cplx> lambdas;  // unstable eigenvalues the gains were built for
  std::vector<cplx> mu;       // per-eigenvalue factor
  std::vector<cplx> rho;      // closed modal rate lambda*mu, Re rho > 0
};

// Search on the geometric ladder k in {1,2,4,...,2^16} * max(1,|lambda|_max):
// per eigenvalue the margin inequality is quadratic in eta with identically
// vanishing quadratic coefficient, so each admissible set is a half line
// (lo_j, inf); the rung is feasible when every slope is positive, and eta is
// the midpoint of the bounded surrogate [lo, 2 lo] of the intersection. A
// rung whose midpoint violates the pole guard |k+lambda-nu eta| >= 1e-8(k+1)
// is skipped. Exhaustion raises InfeasibleGains with the per-eigenvalue
// blocking intervals of the last rung.
GainParameters select_gains(const std::vector<cplx>& unstable_lambdas, double nu);

struct TraceGram {
  Eigen::MatrixXcd F;  // F(i,j) = sum_w tau_i(w) conj(tau_j(w)), zero across
                       // distinct wavenumbers
  double cond = 0.0;   // singular-value condition number
};
// trace Gram of the unstable adjoint system; wall = -1 sums both walls,
// wall in {0,1} restricts the boundary pairing to that wall
TraceGram gram_matrix(const Spectrum& s, int wall = -1);

// One conjugate pair of the real-arithmetic law (carrier wavenumber m > 0).
// The pair's shifted coordinate c obeys (1 + beta x) dc/dt + beta d dcbar/dt
// = -lambda c with x = kappa1 + kappa2 and d = kappa1 - kappa2, so the two
// gains steer the closed pair onto the prescribed rate rho_closed.
struct RealPair {
  int m = 0;
  cplx lambda{};       // eigenvalue of the +m representative
  double r = 0.0;      // norm of Re(mode) = norm of Im(mode) in the real pairing
  double kappa1 = 0.0; // gain on the first (cosine) functional of the pair
  double kappa2 = 0.0; // gain on the second (sine) functional
  cplx beta{};         // feedthrough scalar eta r W of the pair
  cplx rho_closed{};   // closed pair rate: eigenvalues are -rho, -conj(rho)
};

// Everything the real-arithmetic variant needs beyond the complex law. The
// a-index (size 2P) runs over the orthonormalized real functionals; the
// q-index (size P) over conjugate pairs.
struct RealVariantData {
  std::vector<RealPair> pairs;
  Eigen::MatrixXcd gamma;    // (2P x P) psi_a = 2 Re( sum_q gamma(a,q) mode_q )
  Eigen::MatrixXcd chi;      // (2P x 2) wall trace coefficients of psi_a
  Eigen::MatrixXd B;         // (2P x 2P) lifted pairings <D~ chi_i, psi_l>
  Eigen::MatrixXd alpha_star;// (2P x 2P) inverse: combination coefficients
  Eigen::MatrixXcd phi;      // (2P x 2) actuator trace coefficients per wall
  Eigen::MatrixXcd W;        // (2P x P) <D(phi_a), adj-mode_q> resolvent pairings
  Eigen::MatrixXcd Pi;       // (P x 2P) <mode_q, psi_a> modal pairings
  Eigen::MatrixXd Xi;        // (2P x 2P) xi = Xi x, x = packed (Re c, Im c)
  Eigen::MatrixXd V;         // (2P x 2P) shifted-state feedthrough pairings
  Eigen::MatrixXd mu_real;   // (2P x 2P) measurement gain on raw-state xi^Y
  Eigen::MatrixXd closed;    // (2P x 2P) closed unstable block, dx/dt = -closed x
};

// The deployable boundary law. Complex and restricted variants act through
// per-mode dual trace data (phi); the real variant through RealVariantData.
struct FeedbackLaw {
  Variant variant = Variant::complex_modes;
  double nu = 0.0;
  double alpha0 = 0.0;
  double k_shift = 0.0;
  double eta = 0.0;
  int active_wall = -1;  // restricted variant: 0 or 1; -1 = both walls

  std::vector<int> m;        // carrier wavenumber per unstable mode
  std::vector<cplx> lambda;  // unstable eigenvalues (spectrum order)
  std::vector<cplx> mu, rho;
  Eigen::MatrixXcd F, X;  // trace Gram (active boundary) and its inverse
  double cond_F = 0.0;
  std::vector<BoundaryData> phi;  // dual tangential data per mode (v parts 0)

  RealVariantData real;  // filled for the real variant only
};

// Complex-arithmetic law over the full boundary: X = F^{-1}, dual data
// phi_j with sum_w phi_j(w) conj(tau_i(w)) = delta_ij, oblique weight
// alpha0 * H(w), H(0) = -1, H(1) = 1.
FeedbackLaw build_feedback(const Spectrum& s, const GainParameters& gains,
                           double alpha0);

// Same law recomputed with boundary pairings restricted to one wall. The
// oblique weight becomes alpha0 cos(x) on the active wall (zero circulation);
// the law output vanishes identically on the inactive wall.
FeedbackLaw restrict_support(const Spectrum& s, const FeedbackLaw& base,
                             int wall);

// Real-arithmetic law: orthonormalized real functionals from the unstable
// modes, actuators combined so the adjoint-lift pairings are delta, and two
// scalar gains per conjugate pair chosen so the closed pair rate matches the
// complex variant's rho of that pair.
FeedbackLaw real_feedback(const Spectrum& s, const GainParameters& gains,
                          double alpha0);

// One Fourier-mode interior state on the law's grid.
struct ModeState {
  int m = 0;
  Eigen::VectorXcd v, vp;
};

struct BoundaryCoeff {
  int m = 0;
  cplx u{}, v{};  // tangential / vertical Fourier coefficient at this wall
};

struct ControlSignal {
  std::vector<cplx> amplitudes;  // modal functionals the law measured
  cplx sigma{};                  // common scalar multiplying the oblique weight
  std::array<std::vector<BoundaryCoeff>, 2> wall;
};

// Applies the law to a state given per-wavenumber; states missing a carrier
// wavenumber contribute zero. Mirror wavenumbers must be supplied explicitly.
ControlSignal evaluate_control(const Spectrum& s, const FeedbackLaw& law,
                               const std::vector<ModeState>& Y);

// Shifted-variable modal coordinates z_j = mu_j <Y, phi*_j> of the complex
// and restricted variants.
std::vector<cplx> project_z(const Spectrum& s, const FeedbackLaw& law,
                            const std::vector<ModeState>& Y);

// Packed real unstable coordinates (Re c_q, Im c_q) of the shifted variable
// under the real variant's law.
Eigen::VectorXd project_real_x(const Spectrum& s, const FeedbackLaw& law,
                               const std::vector<ModeState>& Y);

struct ObliquenessReport {
  double min_abs_cos = 0.0;     // min over samples of |u.n| / |u|
  double max_normal_dev = 0.0;  // max |u.n(x) - Re(sigma) alpha(x)|
  double control_norm = 0.0;    // max |u(x)| over the active boundary
  int n_samples = 0;
};

// Samples the physical boundary field of a control signal on the active
// wall(s). Throws NoControl when the signal vanishes identically.
ObliquenessReport obliqueness_report(const FeedbackLaw& law,
                                     const ControlSignal& sig,
                                     int n_samples = 1024);

}  // namespace oseen
