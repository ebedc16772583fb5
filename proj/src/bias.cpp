#include "spacon/bias.hpp"

#include <cmath>

namespace spacon {

BiasReport bias_exact(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                      const SpectralDecomposition& decomp) {
    const double xx = weighted_inner_product(decomp, x, x);
    if (!(xx > 0.0)) {
        throw ValidationError("bias_exact: covariate has zero norm in the precision metric");
    }
    const double xz = weighted_inner_product(decomp, x, z);
    const double zz = weighted_inner_product(decomp, z, z);

    BiasReport r;
    r.numerator = xz;
    r.denominator = xx;
    r.bias = xz / xx;
    if (zz > 0.0) {
        r.correlation_term = xz / std::sqrt(xx * zz);
        r.relative_size_term = std::sqrt(zz / xx);
    } else {
        r.bias = 0.0;
        r.numerator = 0.0;
    }
    return r;
}

double bias_spectral(const FrequencyCoordinates& xi_x, const FrequencyCoordinates& xi_z,
                     const Eigen::VectorXd& weights, double ns_tolerance) {
    if (xi_x.spatial.size() != weights.size() || xi_z.spatial.size() != weights.size()) {
        throw ValidationError("bias_spectral: coordinate/weight length mismatch");
    }
    const double z_norm = std::sqrt(xi_z.nonspatial.squaredNorm() + xi_z.spatial.squaredNorm());
    if (xi_z.nonspatial.size() > 0 &&
        xi_z.nonspatial.cwiseAbs().maxCoeff() > ns_tolerance * std::max(z_norm, 1e-300)) {
        throw ValidationError("bias_spectral: confounder has non-spatial components");
    }
    const double num = (xi_x.spatial.array() * xi_z.spatial.array() * weights.array()).sum();
    const double den = xi_x.nonspatial.squaredNorm() +
                       (xi_x.spatial.array().square() * weights.array()).sum();
    if (!(den > 0.0)) {
        throw ValidationError("bias_spectral: covariate has zero norm in the precision metric");
    }
    return num / den;
}

double bias_nonspatial(const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    if (x.size() != z.size()) throw ValidationError("bias_nonspatial: length mismatch");
    const Eigen::VectorXd xc = x.array() - x.mean();
    const double xx = xc.squaredNorm();
    if (!(xx > 0.0)) throw ValidationError("bias_nonspatial: covariate is constant");
    const Eigen::VectorXd zc = z.array() - z.mean();
    return xc.dot(zc) / xx;
}

LambdaLimits lambda_limits(const FrequencyCoordinates& xi_x, const FrequencyCoordinates& xi_z,
                           const Eigen::VectorXd& penalty_eigenvalues) {
    if (xi_x.spatial.size() != penalty_eigenvalues.size() ||
        xi_z.spatial.size() != penalty_eigenvalues.size()) {
        throw ValidationError("lambda_limits: coordinate/penalty length mismatch");
    }
    LambdaLimits out;
    const double x_norm =
        std::sqrt(xi_x.nonspatial.squaredNorm() + xi_x.spatial.squaredNorm());
    const bool has_ns = xi_x.nonspatial.size() > 0 &&
                        xi_x.nonspatial.cwiseAbs().maxCoeff() > 1e-12 * std::max(x_norm, 1e-300);
    if (has_ns) {
        out.zero_case = LambdaLimits::ZeroCase::nonspatial_present;
        out.limit_at_zero = 0.0;
    } else {
        out.zero_case = LambdaLimits::ZeroCase::fully_spatial;
        const double num =
            (xi_x.spatial.array() * xi_z.spatial.array() * penalty_eigenvalues.array()).sum();
        const double den =
            (xi_x.spatial.array().square() * penalty_eigenvalues.array()).sum();
        if (!(den > 0.0)) throw ValidationError("lambda_limits: zero denominator at lambda -> 0");
        out.limit_at_zero = num / den;
    }
    double num_inf = 0.0, den_inf = xi_x.nonspatial.squaredNorm();
    for (Eigen::Index i = 0; i < penalty_eigenvalues.size(); ++i) {
        if (penalty_eigenvalues[i] != 0.0) {
            num_inf += xi_x.spatial[i] * xi_z.spatial[i];
            den_inf += xi_x.spatial[i] * xi_x.spatial[i];
        }
    }
    if (!(den_inf > 0.0)) {
        throw ValidationError("lambda_limits: zero denominator at lambda -> infinity");
    }
    out.limit_at_infinity = num_inf / den_inf;
    return out;
}

std::vector<SweepPoint> bias_lambda_sweep(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                          const SpatialDesign& design, double sigma2,
                                          const std::vector<double>& lambda_grid) {
    if (lambda_grid.empty()) throw ValidationError("bias_lambda_sweep: empty lambda grid");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] > 0.0) || (i > 0 && lambda_grid[i] <= lambda_grid[i - 1])) {
            throw ValidationError("bias_lambda_sweep: grid must be positive and ascending");
        }
    }
    SpectralDecomposition decomp = decompose(design, ModelParams{lambda_grid.front(), sigma2});
    const FrequencyCoordinates xi_x = coordinates(decomp, x);
    const FrequencyCoordinates xi_z = coordinates(decomp, z);
    const double ns_bias = bias_nonspatial(x, z);

    std::vector<SweepPoint> out;
    out.reserve(lambda_grid.size());
    for (double lam : lambda_grid) {
        const Eigen::VectorXd w =
            smoothing_weights(decomp.penalty_eigenvalues, ModelParams{lam, sigma2});
        // General form of the spectral bias (z may carry residual non-spatial
        // mass from finite-precision construction).
        const double num = xi_x.nonspatial.dot(xi_z.nonspatial) +
                           (xi_x.spatial.array() * xi_z.spatial.array() * w.array()).sum();
        const double den = xi_x.nonspatial.squaredNorm() +
                           (xi_x.spatial.array().square() * w.array()).sum();
        if (!(den > 0.0)) throw ValidationError("bias_lambda_sweep: degenerate covariate");
        out.push_back({lam, num / den, ns_bias});
    }
    return out;
}

double estimator_variance(const Eigen::VectorXd& x, const SpectralDecomposition& decomp) {
    const double xx = weighted_inner_product(decomp, x, x);
    if (!(xx > 0.0)) {
        throw ValidationError("estimator_variance: covariate has zero norm in the precision metric");
    }
    return 1.0 / xx;
}

}  // namespace spacon
