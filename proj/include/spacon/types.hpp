#pragma once

#include <Eigen/Dense>

#include "spacon/errors.hpp"

namespace spacon {

/// Structure of the spatial analysis model: y = beta*x + B_sp beta_sp + eps,
/// beta_sp ~ N(0, lambda^{-1} S^-). Holds the spatial basis matrix B_sp
/// (n x p), the symmetric positive semi-definite penalty S (p x p) and the
/// observation locations (n x d, domain-normalized coordinates).
struct SpatialDesign {
    Eigen::MatrixXd locations;  // n x d
    Eigen::MatrixXd basis;      // n x p
    Eigen::MatrixXd penalty;    // p x p, symmetric PSD
    double penalty_rank_tolerance = 1e-10;

    Eigen::Index n() const { return basis.rows(); }
    Eigen::Index p() const { return basis.cols(); }
};

/// Smoothing parameter and error variance of the analysis model. The
/// smoothing weights depend on these only through lambda * sigma2.
struct ModelParams {
    double lambda = 1.0;  // >= 0
    double sigma2 = 1.0;  // > 0
};

/// Throws ValidationError if the design violates its invariants. Negative
/// penalty eigenvalues within tolerance are clamped to zero in place.
void validate_design(SpatialDesign& design);

void validate_params(const ModelParams& params);

/// Appends an unpenalised all-ones column to the spatial basis when the
/// constant vector is not already (numerically) in its span. No-op otherwise.
SpatialDesign with_intercept(const SpatialDesign& design);

}  // namespace spacon
