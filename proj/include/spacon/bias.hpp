#pragma once

#include <vector>

#include "spacon/spectral.hpp"

namespace spacon {

/// Confounding bias of the covariate effect estimate in the spatial model,
/// together with its correlation-times-relative-size factorization in the
/// precision metric.
struct BiasReport {
    double bias = 0.0;
    double correlation_term = 0.0;    // <x,z> / (|x||z|), precision metric
    double relative_size_term = 0.0;  // |z| / |x|, precision metric
    double numerator = 0.0;           // <x,z>
    double denominator = 0.0;         // <x,x>
};

/// Limiting behaviour of the bias as lambda -> 0 and lambda -> infinity.
struct LambdaLimits {
    enum class ZeroCase { nonspatial_present, fully_spatial };
    double limit_at_zero = 0.0;
    double limit_at_infinity = 0.0;
    ZeroCase zero_case = ZeroCase::nonspatial_present;
};

/// E(beta_hat) - beta = <x,z> / <x,x> in the precision metric.
BiasReport bias_exact(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                      const SpectralDecomposition& decomp);

/// Spectral form of the bias for a fully spatial confounder:
/// sum_i xi^x_i xi^z_i w_i / (|xi^x_ns|^2 + sum_i (xi^x_i)^2 w_i).
/// Requires xi^z_ns = 0 (within ns_tolerance relative to |z|).
double bias_spectral(const FrequencyCoordinates& xi_x, const FrequencyCoordinates& xi_z,
                     const Eigen::VectorXd& weights, double ns_tolerance = 1e-8);

/// Bias of the covariate effect in the non-spatial model with intercept:
/// <x_c, z_c> / <x_c, x_c> on mean-centered vectors.
double bias_nonspatial(const Eigen::VectorXd& x, const Eigen::VectorXd& z);

/// Limits of the spectral bias as lambda -> 0 and lambda -> infinity.
LambdaLimits lambda_limits(const FrequencyCoordinates& xi_x, const FrequencyCoordinates& xi_z,
                           const Eigen::VectorXd& penalty_eigenvalues);

struct SweepPoint {
    double lambda = 0.0;
    double spatial_bias = 0.0;
    double nonspatial_bias = 0.0;
};

/// Bias of the spatial and non-spatial estimates over a grid of lambda
/// values at fixed sigma2; the non-spatial column is constant.
std::vector<SweepPoint> bias_lambda_sweep(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                          const SpatialDesign& design, double sigma2,
                                          const std::vector<double>& lambda_grid);

/// Var(beta_hat) = 1 / <x,x> under the analysis-model covariance.
double estimator_variance(const Eigen::VectorXd& x, const SpectralDecomposition& decomp);

}  // namespace spacon
