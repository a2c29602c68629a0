#include "oseen/spectral.hpp"

#include <cmath>

#include "oseen/errors.hpp"

namespace oseen {
namespace {

// Differentiation matrices for arbitrary distinct nodes, orders 1..p
// (Welfert's recursion). Barycentric weight ratios are formed in log space:
// the raw products prod_j (x_i - x_j) underflow once the node count passes
// a few hundred, while the ratios themselves stay O(1).
std::vector<Eigen::MatrixXd> poldif(const Eigen::VectorXd& x, int p) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd logc = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sign = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = x[i] - x[j];
      logc[i] += std::log(std::abs(d));
      if (d < 0) sign[i] = -sign[i];
    }
  }
  Eigen::MatrixXd C(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      C(i, j) = sign[i] * sign[j] * std::exp(logc[i] - logc[j]);

  std::vector<Eigen::MatrixXd> Ds;
  Eigen::MatrixXd Dprev = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= p; ++k) {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      double rowsum = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double v = k * (C(i, j) * Dprev(i, i) - Dprev(i, j)) / (x[i] - x[j]);
        D(i, j) = v;
        rowsum += v;
      }
      D(i, i) = -rowsum;  // each D^(k) annihilates constants exactly
    }
    Ds.push_back(D);
    Dprev = D;
  }
  return Ds;
}

// Clenshaw-Curtis weights for the nodes (1 - cos(j pi / M)) / 2 on [0,1].
Eigen::VectorXd clencurt01(int M) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(M + 1);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(M - 1);
  const double pi = std::acos(-1.0);
  if (M % 2 == 0) {
    w[0] = w[M] = 1.0 / (static_cast<double>(M) * M - 1);
    for (int i = 1; i < M; ++i) {
      const double th = pi * i / M;
      for (int k = 1; k < M / 2; ++k)
        v[i - 1] -= 2.0 * std::cos(2.0 * k * th) / (4.0 * k * k - 1);
      v[i - 1] -= std::cos(M * th) / (static_cast<double>(M) * M - 1);
    }
  } else {
    w[0] = w[M] = 1.0 / (static_cast<double>(M) * M);
    for (int i = 1; i < M; ++i) {
      const double th = pi * i / M;
      for (int k = 1; k <= (M - 1) / 2; ++k)
        v[i - 1] -= 2.0 * std::cos(2.0 * k * th) / (4.0 * k * k - 1);
    }
  }
  for (int i = 1; i < M; ++i) w[i] = 2.0 * v[i - 1] / M;
  return w / 2.0;  // reference interval has length 2, target has length 1
}

}  // namespace

SpectralGrid build_grid(int M) {
  if (M < 8) fail(errc::config, "ConfigError", "grid order M must be at least 8");
  if (M % 2 != 0) fail(errc::config, "ConfigError", "grid order M must be even");
  SpectralGrid g;
  g.M = M;
  g.nodes.resize(M + 1);
  const double pi = std::acos(-1.0);
  for (int j = 0; j <= M; ++j) {
    const double s = std::sin(0.5 * pi * j / M);
    g.nodes[j] = s * s;  // (1 - cos(j pi / M)) / 2 with exact endpoints
  }
  g.nodes[0] = 0.0;
  g.nodes[M] = 1.0;
  auto Ds = poldif(g.nodes, 4);
  g.D1 = std::move(Ds[0]);
  g.D2 = std::move(Ds[1]);
  g.D4 = std::move(Ds[3]);
  g.quad_weights = clencurt01(M);
  return g;
}

std::vector<Eigen::MatrixXd> chebyshev_derivatives(const Eigen::VectorXd& y,
                                                   int nmax, int p) {
  const int N = static_cast<int>(y.size());
  Eigen::VectorXd x = 2.0 * y.array() - 1.0;
  std::vector<Eigen::MatrixXd> out(p + 1, Eigen::MatrixXd::Zero(N, nmax + 1));
  // T_{m+1}^(q) = 2 x T_m^(q) + 2 q T_m^(q-1) - T_{m-1}^(q) on [-1,1]
  Eigen::MatrixXd Tm1 = Eigen::MatrixXd::Zero(p + 1, N);  // rows: order q
  Eigen::MatrixXd Tm = Eigen::MatrixXd::Zero(p + 1, N);
  Tm1.row(0).setOnes();
  for (int q = 0; q <= p; ++q) out[q].col(0) = Tm1.row(q);
  if (nmax == 0) {
    // chain-rule factors applied below for all columns
  } else {
    Tm.row(0) = x.transpose();
    if (p >= 1) Tm.row(1).setOnes();
    for (int q = 0; q <= p; ++q) out[q].col(1) = Tm.row(q);
    for (int n = 2; n <= nmax; ++n) {
      Eigen::MatrixXd Tn(p + 1, N);
      Tn.row(0) = 2.0 * x.transpose().cwiseProduct(Tm.row(0)) - Tm1.row(0);
      for (int q = 1; q <= p; ++q)
        Tn.row(q) = 2.0 * x.transpose().cwiseProduct(Tm.row(q)) +
                    2.0 * q * Tm.row(q - 1) - Tm1.row(q);
      Tm1 = Tm;
      Tm = Tn;
      for (int q = 0; q <= p; ++q) out[q].col(n) = Tm.row(q);
    }
  }
  double scale = 1.0;
  for (int q = 1; q <= p; ++q) {
    scale *= 2.0;  // d/dy = 2 d/dx
    out[q] *= scale;
  }
  return out;
}

ClampedBasis make_clamped_basis(const SpectralGrid& g) {
  const int M = g.M;
  const int nb = M - 3;
  const Eigen::VectorXd& y = g.nodes;
  // window w = y^2 (1-y)^2 and derivatives, sampled exactly
  Eigen::ArrayXd ya = y.array();
  std::vector<Eigen::ArrayXd> W(5);
  W[0] = ya.square() * (1.0 - ya).square();
  W[1] = 2.0 * ya * (1.0 - ya) * (1.0 - 2.0 * ya);
  W[2] = 2.0 * (1.0 - 6.0 * ya + 6.0 * ya.square());
  W[3] = 12.0 * (2.0 * ya - 1.0);
  W[4] = Eigen::ArrayXd::Constant(y.size(), 24.0);

  auto T = chebyshev_derivatives(y, nb - 1, 4);

  ClampedBasis b;
  Eigen::MatrixXd* out[5] = {&b.val, &b.d1, &b.d2, &b.d3, &b.d4};
  static const int binom[5][5] = {
      {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0},
      {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
  for (int q = 0; q < 5; ++q) {
    out[q]->resize(M + 1, nb);
    for (int n = 0; n < nb; ++n) {
      Eigen::ArrayXd s = Eigen::ArrayXd::Zero(M + 1);
      for (int i = 0; i <= q; ++i)
        s += binom[q][i] * W[i] * T[q - i].col(n).array();
      out[q]->col(n) = s;
    }
  }
  // clamped conditions hold exactly: w and w' vanish at both walls
  b.val.row(0).setZero();
  b.val.row(M).setZero();
  b.d1.row(0).setZero();
  b.d1.row(M).setZero();
  return b;
}

ReducedPencil clamp_fourth_order(const SpectralGrid& g, const ClampedBasis& basis,
                                 const Eigen::MatrixXcd& A,
                                 const Eigen::MatrixXcd& B) {
  const int M = g.M;
  if (A.rows() != M + 1 || A.cols() != M + 1 || B.rows() != M + 1 ||
      B.cols() != M + 1)
    fail(errc::config, "ConfigError", "pencil does not match grid size");
  ReducedPencil r;
  // collocate at interior nodes 2 .. M-2; the four skipped rows are replaced
  // by the clamped conditions built into the trial space
  const Eigen::MatrixXcd Av = A * basis.val;
  const Eigen::MatrixXcd Bv = B * basis.val;
  r.A = Av.middleRows(2, M - 3);
  r.B = Bv.middleRows(2, M - 3);
  r.lift = basis.val;
  return r;
}

ReducedPencil clamp_fourth_order(const SpectralGrid& g,
                                 const Eigen::MatrixXcd& A,
                                 const Eigen::MatrixXcd& B) {
  return clamp_fourth_order(g, make_clamped_basis(g), A, B);
}

}  // namespace oseen
