#pragma once

#include <Eigen/Dense>
#include <vector>

#include "spacon/types.hpp"

namespace spacon {

/// Coefficients of a sample-space vector in the precision eigenbasis,
/// split into the non-spatial block (n - p entries, eigenvalue sigma^-2)
/// and the spatial block (p entries, eigenvalue sigma^-2 * w_i).
struct FrequencyCoordinates {
    Eigen::VectorXd nonspatial;
    Eigen::VectorXd spatial;
};

/// Eigenstructure of the analysis-model precision matrix.
///
/// eigenbasis columns are ordered: n - p non-spatial directions first, then
/// the p spatial directions by ascending effective penalty eigenvalue, so
/// the spatial block runs from low frequency (weakly penalised) to high
/// frequency (strongly penalised). The effective penalty eigenvalues are
/// computed from the quadratic form B_sp S^- B_sp^T restricted to the image
/// of B_sp; for an orthonormal basis they coincide with the eigenvalues of S.
struct SpectralDecomposition {
    Eigen::MatrixXd eigenbasis;           // n x n orthonormal
    Eigen::VectorXd penalty_eigenvalues;  // p, ascending, >= 0
    Eigen::VectorXd weights;              // p, ascending, in [0, 1]
    Eigen::Index split = 0;               // n - p
    double lambda = 1.0;
    double sigma2 = 1.0;

    Eigen::Index n() const { return eigenbasis.rows(); }
    Eigen::Index p() const { return penalty_eigenvalues.size(); }

    /// Spatial eigenvector block (n x p), ascending penalty order.
    Eigen::Ref<const Eigen::MatrixXd> spatial_basis() const {
        return eigenbasis.rightCols(p());
    }
    Eigen::Ref<const Eigen::MatrixXd> nonspatial_basis() const {
        return eigenbasis.leftCols(split);
    }
};

/// Smoothing weights w_i = lambda*alpha_i / (sigma^-2 + lambda*alpha_i)
/// for a given set of penalty eigenvalues.
Eigen::VectorXd smoothing_weights(const Eigen::VectorXd& penalty_eigenvalues,
                                  const ModelParams& params);

/// Computes the precision eigenstructure of the analysis model.
SpectralDecomposition decompose(const SpatialDesign& design, const ModelParams& params);

/// Same decomposition evaluated at different parameters; the eigenvectors
/// and penalty eigenvalues are parameter-free, only the weights change.
SpectralDecomposition reweight(const SpectralDecomposition& decomp, const ModelParams& params);

/// Moves the spatial directions listed in `spatial_indices` (indices into
/// the ascending-frequency spatial block) into the non-spatial block,
/// i.e. the decomposition of the model with those basis columns removed.
SpectralDecomposition remove_frequencies(const SpectralDecomposition& decomp,
                                         const std::vector<Eigen::Index>& spatial_indices);

/// xi = U^T v.
FrequencyCoordinates coordinates(const SpectralDecomposition& decomp,
                                 const Eigen::VectorXd& v);

/// v = U xi.
Eigen::VectorXd assemble(const SpectralDecomposition& decomp,
                         const FrequencyCoordinates& xi);

/// <a, b> in the precision metric, evaluated spectrally:
/// sigma^-2 (xi_ns^a . xi_ns^b + sum_i w_i xi_sp,i^a xi_sp,i^b).
double weighted_inner_product(const SpectralDecomposition& decomp,
                              const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace spacon
