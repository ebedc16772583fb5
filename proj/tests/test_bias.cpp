#include "doctest.h"

#include "spacon/bias.hpp"
#include "spacon/rng.hpp"
#include "test_support.hpp"

using namespace spacon;
using namespace testsup;

namespace {

/// Brute-force bias from the dense covariance: (x' Sigma^-1 z)/(x' Sigma^-1 x).
double dense_bias(const SpatialDesign& design, const ModelParams& params,
                  const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
    const Eigen::MatrixXd prec = dense_covariance(design, params).inverse();
    return x.dot(prec * z) / x.dot(prec * x);
}

}  // namespace

TEST_CASE("bias_exact matches the dense covariance oracle") {
    std::mt19937_64 rng = stream_rng(31, 0);
    std::uniform_real_distribution<double> unif(0.2, 5.0);
    for (int rep = 0; rep < 25; ++rep) {
        const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng() % 15);
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng() % 6);
        const SpatialDesign design = random_pd_design(rng, n, p);
        const ModelParams params{unif(rng), unif(rng)};
        const SpectralDecomposition d = decompose(design, params);
        const Eigen::VectorXd x = random_vector(rng, n);
        const Eigen::VectorXd z = random_vector(rng, n);
        const BiasReport report = bias_exact(x, z, d);
        CHECK(report.bias == doctest::Approx(dense_bias(design, params, x, z)).epsilon(1e-8));
        CHECK(report.bias ==
              doctest::Approx(report.numerator / report.denominator).epsilon(1e-12));
        // factorization: bias = correlation * relative size
        CHECK(report.bias == doctest::Approx(report.correlation_term *
                                             report.relative_size_term).epsilon(1e-10));
        CHECK(std::abs(report.correlation_term) <= 1.0 + 1e-12);
    }
}

TEST_CASE("bias_exact: zero confounder gives zero bias") {
    std::mt19937_64 rng = stream_rng(32, 0);
    const SpatialDesign design = random_pd_design(rng, 12, 4);
    const SpectralDecomposition d = decompose(design, ModelParams{1.0, 1.0});
    const Eigen::VectorXd x = random_vector(rng, 12);
    const BiasReport report = bias_exact(x, Eigen::VectorXd::Zero(12), d);
    CHECK(report.bias == 0.0);
    CHECK(report.correlation_term == 0.0);
}

TEST_CASE("bias_spectral agrees with bias_exact for spatial confounders") {
    std::mt19937_64 rng = stream_rng(33, 0);
    for (int rep = 0; rep < 25; ++rep) {
        const Eigen::Index n = 12 + static_cast<Eigen::Index>(rng() % 10);
        const Eigen::Index p = 3 + static_cast<Eigen::Index>(rng() % 5);
        const SpatialDesign design = random_pd_design(rng, n, p);
        const SpectralDecomposition d = decompose(design, ModelParams{1.7, 0.9});
        const Eigen::VectorXd x = random_vector(rng, n);
        // z built inside the spatial span so xi^z_ns = 0 exactly
        const Eigen::VectorXd z = d.spatial_basis() * random_vector(rng, p);
        const FrequencyCoordinates xi_x = coordinates(d, x);
        const FrequencyCoordinates xi_z = coordinates(d, z);
        const double spectral = bias_spectral(xi_x, xi_z, d.weights);
        CHECK(spectral == doctest::Approx(bias_exact(x, z, d).bias).epsilon(1e-9));
    }
}

TEST_CASE("bias_spectral rejects confounders with a non-spatial part") {
    std::mt19937_64 rng = stream_rng(34, 0);
    const SpatialDesign design = random_pd_design(rng, 14, 4);
    const SpectralDecomposition d = decompose(design, ModelParams{1.0, 1.0});
    const Eigen::VectorXd x = random_vector(rng, 14);
    const Eigen::VectorXd z = random_vector(rng, 14);  // generic: has ns content
    CHECK_THROWS_AS(bias_spectral(coordinates(d, x), coordinates(d, z), d.weights),
                    ValidationError);
}

TEST_CASE("bias_nonspatial equals centered least squares slope bias") {
    std::mt19937_64 rng = stream_rng(35, 0);
    for (int rep = 0; rep < 25; ++rep) {
        const Eigen::Index n = 20;
        const Eigen::VectorXd x = random_vector(rng, n);
        const Eigen::VectorXd z = random_vector(rng, n);
        const Eigen::VectorXd xc = x.array() - x.mean();
        const Eigen::VectorXd zc = z.array() - z.mean();
        CHECK(bias_nonspatial(x, z) ==
              doctest::Approx(xc.dot(zc) / xc.squaredNorm()).epsilon(1e-12));
    }
    // orthogonal after centering -> zero
    Eigen::VectorXd x(4), z(4);
    x << 1, 2, 3, 4;
    z << 1, -1, -1, 1;
    CHECK(bias_nonspatial(x, z) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("lambda_limits match bias_spectral at extreme lambda") {
    std::mt19937_64 rng = stream_rng(36, 0);
    for (int rep = 0; rep < 25; ++rep) {
        const Eigen::Index n = 14, p = 5;
        const SpatialDesign design =
            rep % 2 ? random_pd_design(rng, n, p) : random_psd_design(rng, n, p, 1);
        SpectralDecomposition d = decompose(design, ModelParams{1.0, 1.0});
        const Eigen::VectorXd x = random_vector(rng, n);
        const Eigen::VectorXd z = d.spatial_basis() * random_vector(rng, p);
        const FrequencyCoordinates xi_x = coordinates(d, x);
        const FrequencyCoordinates xi_z = coordinates(d, z);
        const LambdaLimits limits = lambda_limits(xi_x, xi_z, d.penalty_eigenvalues);

        const SpectralDecomposition lo = reweight(d, ModelParams{1e-12, 1.0});
        const SpectralDecomposition hi = reweight(d, ModelParams{1e12, 1.0});
        const double b_lo = bias_spectral(xi_x, xi_z, lo.weights);
        const double b_hi = bias_spectral(xi_x, xi_z, hi.weights);
        CHECK(b_lo == doctest::Approx(limits.limit_at_zero).epsilon(1e-5));
        CHECK(b_hi == doctest::Approx(limits.limit_at_infinity).epsilon(1e-5));
    }
}

TEST_CASE("lambda_limits: fully spatial covariate converges to the unweighted ratio") {
    std::mt19937_64 rng = stream_rng(37, 0);
    const Eigen::Index n = 12, p = 4;
    const SpatialDesign design = random_pd_design(rng, n, p);
    const SpectralDecomposition d = decompose(design, ModelParams{1.0, 1.0});
    // x fully spatial: xi^x_ns = 0 -> the lambda->0 case degenerates
    const Eigen::VectorXd x = d.spatial_basis() * random_vector(rng, p);
    const Eigen::VectorXd z = d.spatial_basis() * random_vector(rng, p);
    const FrequencyCoordinates xi_x = coordinates(d, x);
    const FrequencyCoordinates xi_z = coordinates(d, z);
    const LambdaLimits limits = lambda_limits(xi_x, xi_z, d.penalty_eigenvalues);
    CHECK(limits.zero_case == LambdaLimits::ZeroCase::fully_spatial);
    const double expected =
        (xi_x.spatial.array() * xi_z.spatial.array() * d.penalty_eigenvalues.array()).sum() /
        (xi_x.spatial.array().square() * d.penalty_eigenvalues.array()).sum();
    CHECK(limits.limit_at_zero == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("bias_lambda_sweep agrees pointwise with bias_exact") {
    std::mt19937_64 rng = stream_rng(38, 0);
    const Eigen::Index n = 15, p = 5;
    const SpatialDesign design = random_pd_design(rng, n, p);
    const Eigen::VectorXd x = random_vector(rng, n);
    const Eigen::VectorXd z = random_vector(rng, n);
    const std::vector<double> grid{1e-3, 1e-1, 1.0, 1e1, 1e3};
    const double sigma2 = 0.8;
    const std::vector<SweepPoint> sweep = bias_lambda_sweep(x, z, design, sigma2, grid);
    REQUIRE(sweep.size() == grid.size());
    const double ns = bias_nonspatial(x, z);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(sweep[i].lambda == grid[i]);
        const SpectralDecomposition d = decompose(design, ModelParams{grid[i], sigma2});
        CHECK(sweep[i].spatial_bias ==
              doctest::Approx(bias_exact(x, z, d).bias).epsilon(1e-9));
        CHECK(sweep[i].nonspatial_bias == doctest::Approx(ns).epsilon(1e-12));
    }
}

TEST_CASE("bias_lambda_sweep validates the grid") {
    std::mt19937_64 rng = stream_rng(39, 0);
    const SpatialDesign design = random_pd_design(rng, 10, 3);
    const Eigen::VectorXd x = random_vector(rng, 10);
    const Eigen::VectorXd z = random_vector(rng, 10);
    CHECK_THROWS_AS(bias_lambda_sweep(x, z, design, 1.0, {1.0, 0.5}), ValidationError);
    CHECK_THROWS_AS(bias_lambda_sweep(x, z, design, 1.0, {-1.0, 0.5}), ValidationError);
}

TEST_CASE("estimator_variance matches the dense GLS variance") {
    std::mt19937_64 rng = stream_rng(40, 0);
    for (int rep = 0; rep < 15; ++rep) {
        const SpatialDesign design = random_pd_design(rng, 14, 5);
        const ModelParams params{1.3, 0.7};
        const SpectralDecomposition d = decompose(design, params);
        const Eigen::VectorXd x = random_vector(rng, 14);
        const Eigen::MatrixXd prec = dense_covariance(design, params).inverse();
        CHECK(estimator_variance(x, d) ==
              doctest::Approx(1.0 / x.dot(prec * x)).epsilon(1e-8));
    }
}
