#pragma once
#include <Eigen/Dense>
#include <vector>

namespace oseen {

// Wall-normal collocation substrate on [0,1]: Chebyshev-Gauss-Lobatto nodes
// in ascending order with both endpoints exact, nodal differentiation
// matrices of orders 1, 2 and 4, and Clenshaw-Curtis quadrature weights.
struct SpectralGrid {
  int M = 0;                     // polynomial order; M+1 nodes
  Eigen::VectorXd nodes;         // nodes[0] == 0, nodes[M] == 1, increasing
  Eigen::MatrixXd D1, D2, D4;    // (M+1) x (M+1)
  Eigen::VectorXd quad_weights;  // integrates degree <= M exactly, all > 0
};

// Requires M >= 8 and M even.
SpectralGrid build_grid(int M);

// Trial functions w(y) T_n(2y - 1), w = y^2 (1 - y)^2, n = 0 .. M-4.
// Columns sample the function and its derivatives at the grid nodes; the
// clamped conditions v = v' = 0 at both walls hold exactly by construction,
// and the wall rows of d2 give exact second derivatives for trace data.
struct ClampedBasis {
  Eigen::MatrixXd val, d1, d2, d3, d4;  // (M+1) x (M-3)
};
ClampedBasis make_clamped_basis(const SpectralGrid& g);

// Fourth-order pencil restricted to the clamped trial space, collocated at
// the interior nodes 2 .. M-2. `lift` maps reduced coefficient vectors back
// to nodal samples (lift = basis.val), so eigenvectors can be reconstructed
// on the full grid.
struct ReducedPencil {
  Eigen::MatrixXcd A, B;  // (M-3) x (M-3)
  Eigen::MatrixXd lift;   // (M+1) x (M-3)
};
ReducedPencil clamp_fourth_order(const SpectralGrid& g,
                                 const Eigen::MatrixXcd& A,
                                 const Eigen::MatrixXcd& B);

// Same reduction against a prebuilt basis (avoids rebuilding it per call).
ReducedPencil clamp_fourth_order(const SpectralGrid& g, const ClampedBasis& basis,
                                 const Eigen::MatrixXcd& A,
                                 const Eigen::MatrixXcd& B);

// Samples of the Chebyshev derivative T_n^(q)(2y-1) d^q/dy^q scale included,
// for q = 0..p, n = 0..nmax, at the given points in [0,1]. Result[q] is
// (points) x (nmax+1). Shared by the basis builder and by tests that need
// exact polynomial derivatives.
std::vector<Eigen::MatrixXd> chebyshev_derivatives(const Eigen::VectorXd& y,
                                                   int nmax, int p);

}  // namespace oseen
