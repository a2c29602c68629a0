#pragma once

#include <utility>
#include <vector>

#include "oseen/control.hpp"
#include "oseen/lift.hpp"

namespace oseen {

enum class SimOutcome { completed, diverged };

// Sampled evolution of the channel state under one of the simulators. The
// modal coordinates are the shifted (boundary-homogeneous) amplitudes for
// closed-loop runs and the raw modal amplitudes for open-loop runs.
struct Trajectory {
  std::vector<double> times;      // strictly increasing, starts at 0
  Eigen::MatrixXcd z_unstable;    // sample x N modal amplitudes
  Eigen::MatrixXcd z_stable;      // sample x J retained stable amplitudes
  std::vector<int> stable_index;  // spectrum mode index of each stable column
  Eigen::VectorXd state_norm;     // reconstructed |Y(t)| per sample
  Eigen::VectorXd control_norm;   // sup over the boundary of |u(x, t)|
  double gamma_fit = 0.0;    // rate fitted on the trailing half, 0 if undefined
  double gamma0 = 0.0;       // predicted min Re rho of the law (closed runs)
  double controller_consistency = 0.0;  // shifted-form vs raw-state-form
                                        // control deviation, relative
  SimOutcome outcome = SimOutcome::completed;
};

// Canonical lifted actuator fields of a law on the spectrum's grid: one per
// unstable mode for the complex and restricted variants (the dual tangential
// data of that mode, restricted to the active wall where applicable), one
// per real functional for the real variant. k_shift is the law's.
std::vector<LiftedField> lift_actuators(const Spectrum& s,
                                        const FeedbackLaw& law);

// z(t) for the scalar problem z' + lambda z = sum_i c_i exp(-r_i t) with
// z(0) = z0, evaluated in closed form. Forcing rates within
// tol (1 + |lambda|) of lambda take the resonant t exp(-lambda t) branch;
// all other terms integrate through the exact exponential quadrature.
cplx forced_decay(cplx z0, cplx lambda,
                  const std::vector<std::pair<cplx, cplx>>& terms, double t,
                  double tol = 1e-12);

// Closed-loop linear evolution: unstable amplitudes evaluated by their
// analytic closed rates, retained stable amplitudes by exact exponential
// integration against the control feedthrough forcing, state reconstructed
// from the modal expansion plus the lifted boundary fields. `lifted` must
// hold the actuator fields of `law` (see lift_actuators) with matching
// k_shift. The trajectory records the worst deviation between the
// shifted-coordinate control and the raw-state control at every sample.
Trajectory simulate_linear(const Spectrum& s, const FeedbackLaw& law,
                           const std::vector<LiftedField>& lifted,
                           const std::vector<ModeState>& y0, double T,
                           double dt);

// Uncontrolled evolution: every retained modal amplitude follows its own
// exponential; unstable modes grow.
Trajectory simulate_open_loop(const Spectrum& s,
                              const std::vector<ModeState>& y0, double T,
                              double dt);

// Least-squares exponential rate of state_norm over the trailing `window`
// fraction of the samples, negated so decay is positive. Throws FitUndefined
// when the window has fewer than two samples or a non-positive norm.
double fit_decay_rate(const Trajectory& traj, double window);

// Declared finite-dimensional surrogate of the closed-loop nonlinear
// dynamics: the n_modes leading eigenmodes (unstable plus leading stable,
// closed under conjugate mirroring) carry the linear closed-loop part plus
// the quadratic convection term projected on the retained modes, integrated
// by an adaptive embedded Runge-Kutta pair with local error <= 1e-8 per unit
// time. A norm exceeding 1e6 times its initial value ends the run with the
// diverged outcome (a result, not an error). Complex and restricted law
// variants only.
Trajectory simulate_nonlinear_galerkin(const Spectrum& s,
                                       const FeedbackLaw& law,
                                       const std::vector<LiftedField>& lifted,
                                       const std::vector<ModeState>& y0,
                                       double T, double dt, int n_modes);

// Bisection over the initial amplitude: scales y0_shape by a in [lo, hi]
// and shrinks the bracket around the largest amplitude whose nonlinear run
// completes and still decays at >= rate_fraction of the design rate.
// Requires the predicate to hold at lo and fail at hi. A run ending in the
// diverged outcome or an integrator breakdown (SolverFailure) counts as a
// failing amplitude; other errors propagate.
struct StabilityBall {
  double decays = 0.0;    // largest verified decaying amplitude
  double diverges = 0.0;  // smallest amplitude failing the predicate
  int runs = 0;           // nonlinear simulations spent
};
StabilityBall bisect_stability_ball(const Spectrum& s, const FeedbackLaw& law,
                                    const std::vector<LiftedField>& lifted,
                                    const std::vector<ModeState>& y0_shape,
                                    double T, double dt, int n_modes,
                                    double lo, double hi, int iters,
                                    double rate_fraction = 0.8);

}  // namespace oseen
