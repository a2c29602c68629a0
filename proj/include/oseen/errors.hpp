#pragma once
#include <stdexcept>
#include <string>
#include <utility>

namespace oseen {

// Process exit codes; 0 = success, 1 = unexpected internal failure.
enum class errc : int {
  config = 2,      // malformed config, bad CLI usage, invalid parameters
  hypothesis = 3,  // spectrum or hypothesis-check failure (neutral modes,
                   // degenerate pairings, solver breakdown, non-convergence)
  gains = 4,       // gain search infeasible
  verify = 5,      // verification or consistency residual out of tolerance
};

// All recoverable failures carry a stable machine-readable tag ("kind") that
// is reported in artifacts and a coarse exit-code class for the CLI.
class error : public std::runtime_error {
public:
  error(errc c, std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), code_(c), kind_(std::move(kind)) {}
  errc code() const noexcept { return code_; }
  const std::string& kind() const noexcept { return kind_; }

private:
  errc code_;
  std::string kind_;
};

[[noreturn]] inline void fail(errc c, const char* kind, const std::string& msg) {
  throw error(c, kind, msg);
}

}  // namespace oseen
