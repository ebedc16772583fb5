#pragma once

#include <vector>

#include "spacon/spectral.hpp"

namespace spacon {

/// A design rewritten in its own frequency coordinates: orthonormal columns
/// ordered by ascending penalty eigenvalue, diagonal penalty. Selecting
/// column ranges yields lowest/highest/medium frequency sub-bases.
struct FrequencyBasis {
    SpatialDesign design;                      // basis = spatial eigenvectors, penalty diagonal
    std::vector<Eigen::Index> frequency_order; // column index -> frequency rank
};

/// Thin-plate-style low-rank radial basis on 2-D locations: unpenalised
/// linear polynomial plus r^2 log r radial terms at num_basis knots chosen
/// by farthest-point subsampling; the penalty is the radial-energy Gram
/// matrix restricted to the polynomial-orthogonal coefficient space, so it
/// is PSD with null-space dimension exactly 3.
SpatialDesign build_thin_plate(const Eigen::MatrixXd& locations, Eigen::Index num_basis);

/// Gaussian-process design: incidence basis B = I and penalty S = C^{-1}
/// for the exponential covariance C_ij = exp(-|s_i - s_j| / kappa).
SpatialDesign build_gp_exponential(const Eigen::MatrixXd& locations, double kappa);

/// Graph-Laplacian design for regional data: B = I, S = degree - adjacency.
SpatialDesign build_graph_laplacian(const Eigen::MatrixXd& adjacency);

/// Diagonalizes the penalty and reorders columns by ascending eigenvalue.
FrequencyBasis reparameterize(const SpatialDesign& design);

}  // namespace spacon
