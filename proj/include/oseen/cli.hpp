#pragma once

#include <string>

#include "oseen/control.hpp"

namespace oseen {

// Resolved run parameters of the command-line front end. Every artifact the
// CLI writes embeds these values verbatim as an audit header, so a run can
// be reproduced from any of its outputs.
struct RunConfig {
  double nu = 0.002;     // viscosity, > 0
  double a = 1.0;        // base-flow amplitude, >= 0 (0 = pure diffusion)
  int M = 64;            // wall-normal resolution, >= 8
  int M_x = 3;           // wavenumber truncation, >= 1
  double alpha0 = 1.0;   // oblique weight of the normal actuation, >= 0
  std::string variant = "complex";  // complex | real | restricted(0|1)
  double T = 20.0;       // simulation horizon, > 0
  double dt = 0.01;      // sample step, > 0
  int J = 40;            // stable modes retained per wavenumber, >= 0
  long long seed = 0;    // seed for the randomized consistency checks
  std::string output_dir = ".";
};

// Parses a flat `key = value` document ('#' starts a comment, blank lines
// ignored, string values may be double-quoted). Unknown keys, duplicate
// keys, type mismatches, and constraint violations raise ConfigError with
// the offending line and column.
RunConfig parse_config(const std::string& text);

// Splits a validated variant spelling into the law variant and the active
// wall (-1 when both walls actuate).
std::pair<Variant, int> variant_parts(const std::string& spelling);

// Executes one CLI command against a validated config and writes its
// artifacts into cfg.output_dir:
//   spectrum -> spectrum.csv           (eigenvalues + hypothesis reports)
//   design   -> design.json            (feedback law + margin certificate)
//   simulate -> trajectory_open.csv, trajectory_closed.csv, summary.json
//   verify   -> verify.json            (duality residuals + invariants)
//   sweep    -> summary.json           (nonlinear stability-ball bisection)
// Returns the process exit status: 0 when every certificate in the emitted
// artifact passes; recoverable failures map to the documented exit classes
// (2 config, 3 spectrum/hypothesis, 4 gain infeasibility, 5 verification).
int run_command(const std::string& cmd, const RunConfig& cfg);

}  // namespace oseen
