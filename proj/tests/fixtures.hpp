#pragma once
#include "oseen/channel.hpp"
#include "oseen/spectrum.hpp"

namespace testfx {

// The benchmark configuration with two unstable modes (m = +-2), shared by
// several suites. Computed once per test-binary run.
inline const oseen::Spectrum& acceptance_spectrum() {
  static oseen::Spectrum s =
      oseen::compute_spectrum(oseen::make_channel(0.002, 1.0, 3), 64);
  return s;
}

inline oseen::ChannelFlow acceptance_flow() {
  return oseen::make_channel(0.002, 1.0, 3);
}

}  // namespace testfx
