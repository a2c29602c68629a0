#include "oseen/channel.hpp"

#include "oseen/errors.hpp"

namespace oseen {

ChannelFlow make_channel(double nu, double a, int M_x) {
  if (!(nu > 0.0)) fail(errc::config, "ConfigError", "viscosity nu must be > 0");
  if (a < 0.0) fail(errc::config, "ConfigError", "base-flow strength a must be >= 0");
  if (M_x < 1) fail(errc::config, "ConfigError", "wavenumber cutoff M_x must be >= 1");
  ChannelFlow f;
  f.nu = nu;
  f.a = a;
  f.C = -a / (2.0 * nu);
  for (int m = -M_x; m <= M_x; ++m)
    if (m != 0) f.wavenumbers.push_back(m);
  return f;
}

BasePoint eval_base_flow(const ChannelFlow& flow, double y) {
  if (y < 0.0 || y > 1.0)
    fail(errc::config, "ConfigError", "base flow evaluated outside [0,1]");
  return {flow.C * (y * y - y), flow.C * (2.0 * y - 1.0), 2.0 * flow.C};
}

BaseFlowSamples sample_base_flow(const ChannelFlow& flow, const SpectralGrid& g) {
  BaseFlowSamples s;
  const auto& y = g.nodes;
  s.U = flow.C * (y.array().square() - y.array());
  s.Up = flow.C * (2.0 * y.array() - 1.0);
  s.Upp = Eigen::VectorXd::Constant(y.size(), 2.0 * flow.C);
  return s;
}

std::complex<double> inner_product(const SpectralGrid& g, const FourierField& f,
                                   const FourierField& h) {
  std::complex<double> acc = 0.0;
  for (const auto& [m, fc] : f.comps) {
    auto it = h.comps.find(m);
    if (it == h.comps.end()) continue;  // distinct wavenumbers are orthogonal
    const ModeComponent& hc = it->second;
    const Eigen::Index n = g.nodes.size();
    if (fc.u.size() != n || fc.v.size() != n || hc.u.size() != n ||
        hc.v.size() != n)
      fail(errc::config, "ConfigError",
           "field component does not match the grid");
    const Eigen::VectorXcd w = g.quad_weights.cast<std::complex<double>>();
    acc += (fc.u.array() * hc.u.conjugate().array() * w.array()).sum();
    acc += (fc.v.array() * hc.v.conjugate().array() * w.array()).sum();
  }
  return acc;
}

}  // namespace oseen
