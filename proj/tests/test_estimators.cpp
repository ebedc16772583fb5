#include "doctest.h"

#include "spacon/estimators.hpp"
#include "spacon/rng.hpp"
#include "test_support.hpp"

using namespace spacon;
using namespace testsup;

namespace {

/// Dense joint penalized regression of y on [x, B] with penalty
/// blockdiag(0, ltilde*S). Returns (beta, fitted, edf).
struct DenseJoint {
    double beta = 0.0;
    Eigen::VectorXd fitted;
    double edf = 0.0;
};

DenseJoint dense_joint_fit(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                           const SpatialDesign& design, double ltilde) {
    const Eigen::Index n = design.n(), p = design.p();
    Eigen::MatrixXd t(n, p + 1);
    t.col(0) = x;
    t.rightCols(p) = design.basis;
    Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(p + 1, p + 1);
    pen.bottomRightCorner(p, p) = ltilde * design.penalty;
    const Eigen::MatrixXd gram = t.transpose() * t + pen;
    const Eigen::VectorXd coef = gram.ldlt().solve(t.transpose() * y);
    DenseJoint out;
    out.beta = coef[0];
    out.fitted = t * coef;
    out.edf = (t * gram.ldlt().solve(t.transpose())).trace();
    return out;
}

}  // namespace

TEST_CASE("fit_gls equals the dense joint penalized regression") {
    std::mt19937_64 rng = stream_rng(51, 0);
    std::uniform_real_distribution<double> unif(0.2, 4.0);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index n = 12 + static_cast<Eigen::Index>(rng() % 12);
        const Eigen::Index p = 3 + static_cast<Eigen::Index>(rng() % 5);
        const SpatialDesign design = random_pd_design(rng, n, p);
        const ModelParams params{unif(rng), unif(rng)};
        const SpectralDecomposition d = decompose(design, params);
        const Eigen::VectorXd x = random_vector(rng, n);
        const Eigen::VectorXd y = random_vector(rng, n);

        const FitResult f = fit_gls(y, x, d);
        const DenseJoint dj = dense_joint_fit(y, x, design, params.lambda * params.sigma2);
        CHECK(f.beta_hat == doctest::Approx(dj.beta).epsilon(1e-8));
        CHECK((f.fitted - dj.fitted).cwiseAbs().maxCoeff() < 1e-8 * (1 + y.norm()));
        CHECK(f.edf == doctest::Approx(dj.edf).epsilon(1e-7));
        CHECK((f.fitted + f.residuals - y).cwiseAbs().maxCoeff() < 1e-10);

        // variance against the dense GLS formula at the model's sigma2
        const Eigen::MatrixXd prec = dense_covariance(design, params).inverse();
        CHECK(f.beta_variance == doctest::Approx(1.0 / x.dot(prec * x)).epsilon(1e-7));
    }
}

TEST_CASE("fit_gls also matches the dense GLS slope formula") {
    std::mt19937_64 rng = stream_rng(52, 0);
    for (int rep = 0; rep < 15; ++rep) {
        const SpatialDesign design = random_pd_design(rng, 15, 5);
        const ModelParams params{1.7, 0.8};
        const SpectralDecomposition d = decompose(design, params);
        const Eigen::VectorXd x = random_vector(rng, 15);
        const Eigen::VectorXd y = random_vector(rng, 15);
        const Eigen::MatrixXd prec = dense_covariance(design, params).inverse();
        const double beta_gls = x.dot(prec * y) / x.dot(prec * x);
        CHECK(fit_gls(y, x, d).beta_hat == doctest::Approx(beta_gls).epsilon(1e-8));
    }
}

TEST_CASE("fit_gls gcv and sigma2_hat are internally consistent") {
    std::mt19937_64 rng = stream_rng(53, 0);
    const SpatialDesign design = random_pd_design(rng, 20, 6);
    const SpectralDecomposition d = decompose(design, ModelParams{2.0, 1.0});
    const Eigen::VectorXd x = random_vector(rng, 20);
    const Eigen::VectorXd y = random_vector(rng, 20);
    const FitResult f = fit_gls(y, x, d);
    const double rss = f.sigma2_hat * (20.0 - f.edf);
    CHECK(f.gcv == doctest::Approx(20.0 * rss / std::pow(20.0 - f.edf, 2)).epsilon(1e-9));
    CHECK(f.edf >= 1.0);
    CHECK(f.edf <= 20.0);
}

TEST_CASE("select_lambda_gcv finds a grid-beating minimum") {
    std::mt19937_64 rng = stream_rng(54, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const SpatialDesign design = random_pd_design(rng, 30, 8);
        const SpectralDecomposition d = decompose(design, ModelParams{1.0, 1.0});
        const Eigen::VectorXd x = random_vector(rng, 30);
        Eigen::VectorXd y = 0.5 * x + random_vector(rng, 30);
        const FitResult f = select_lambda_gcv(y, x, d);
        // the selected fit's GCV is no worse than a fine independent grid
        for (int i = 0; i <= 40; ++i) {
            const double lt = std::pow(10.0, -8.0 + 16.0 * i / 40.0);
            const SpectralDecomposition at = reweight(d, ModelParams{lt, 1.0});
            CHECK(f.gcv <= fit_gls(y, x, at).gcv * (1.0 + 1e-6));
        }
        CHECK(f.lambda_hat * f.sigma2_hat > 0.0);
    }
}

TEST_CASE("fit_nonspatial equals closed-form simple regression") {
    std::mt19937_64 rng = stream_rng(55, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index n = 25;
        const Eigen::VectorXd x = random_vector(rng, n);
        const Eigen::VectorXd y = random_vector(rng, n);
        const FitResult f = fit_nonspatial(y, x);
        const Eigen::VectorXd xc = x.array() - x.mean();
        const double beta = xc.dot(y) / xc.squaredNorm();
        CHECK(f.beta_hat == doctest::Approx(beta).epsilon(1e-12));
        CHECK(f.edf == 2.0);
        const double rss = f.residuals.squaredNorm();
        CHECK(f.sigma2_hat == doctest::Approx(rss / (n - 2)).epsilon(1e-12));
        CHECK(f.p_value >= 0.0);
        CHECK(f.p_value <= 1.0);
    }
    CHECK_THROWS_AS(fit_nonspatial(Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5)),
                    ValidationError);
}

TEST_CASE("fit_nonspatial p-value detects a strong signal") {
    std::mt19937_64 rng = stream_rng(56, 0);
    const Eigen::VectorXd x = random_vector(rng, 100);
    const Eigen::VectorXd y = 3.0 * x + 0.1 * random_vector(rng, 100);
    CHECK(fit_nonspatial(y, x).significant());
    const Eigen::VectorXd noise = random_vector(rng, 100);
    CHECK(fit_nonspatial(noise, x).p_value > 1e-4);
}

TEST_CASE("spatial_plus with fixed smoothing equals the dense two-step composition") {
    std::mt19937_64 rng = stream_rng(57, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::Index n = 18, p = 6;
        const SpatialDesign design = random_pd_design(rng, n, p);
        const ModelParams params{1.3, 1.1};
        const SpectralDecomposition d = decompose(design, params);
        const Eigen::VectorXd x = random_vector(rng, n);
        const Eigen::VectorXd y = random_vector(rng, n);

        SmoothingPolicy policy;
        policy.mode = SmoothingPolicy::Mode::fixed;
        policy.params = params;
        const FitResult f = spatial_plus(y, x, d, policy);

        // dense: residual of smoothing x, then GLS of y on it
        const double lt = params.lambda * params.sigma2;
        const Eigen::MatrixXd smoother =
            design.basis *
            (design.basis.transpose() * design.basis + lt * design.penalty)
                .ldlt()
                .solve(design.basis.transpose());
        const Eigen::VectorXd rx = x - smoother * x;
        const Eigen::MatrixXd prec = dense_covariance(design, params).inverse();
        const double beta = rx.dot(prec * y) / rx.dot(prec * rx);
        CHECK(f.beta_hat == doctest::Approx(beta).epsilon(1e-7));
    }
}

TEST_CASE("spatial_plus projection mode uses the raw non-spatial part of x") {
    std::mt19937_64 rng = stream_rng(58, 0);
    const SpatialDesign design = random_pd_design(rng, 20, 6);
    const SpectralDecomposition d = decompose(design, ModelParams{1.0, 1.0});
    const Eigen::VectorXd x = random_vector(rng, 20);
    const Eigen::VectorXd y = random_vector(rng, 20);
    SmoothingPolicy policy;
    policy.mode = SmoothingPolicy::Mode::projection;
    const FitResult f = spatial_plus(y, x, d, policy);
    const FrequencyCoordinates xi = coordinates(d, x);
    const Eigen::VectorXd rx = d.nonspatial_basis() * xi.nonspatial;
    const FitResult direct = select_lambda_gcv(y, rx, d);
    CHECK(f.beta_hat == doctest::Approx(direct.beta_hat).epsilon(1e-10));
}

TEST_CASE("spatial_plus flags and rejects fully spatial covariates") {
    std::mt19937_64 rng = stream_rng(59, 0);
    const SpatialDesign design = random_pd_design(rng, 16, 5);
    const SpectralDecomposition d = decompose(design, ModelParams{1.0, 1.0});
    const Eigen::VectorXd y = random_vector(rng, 16);
    // fully spatial x -> projection residuals are exactly zero
    const Eigen::VectorXd x_sp = d.spatial_basis() * random_vector(rng, 5);
    SmoothingPolicy proj;
    proj.mode = SmoothingPolicy::Mode::projection;
    CHECK_THROWS_AS(spatial_plus(y, x_sp, d, proj), ValidationError);

    // generic x with GCV smoothing: warning off, fit succeeds
    const Eigen::VectorXd x = random_vector(rng, 16);
    const FitResult f = spatial_plus(y, x, d);
    CHECK_FALSE(f.low_information_warning);
}

TEST_CASE("cap_indices: highest-k, lowest-k and window semantics") {
    CapSpec top{CapSpec::Mode::highest_k, 3, 1};
    CHECK(cap_indices(top, 10) == std::vector<Eigen::Index>{7, 8, 9});
    CapSpec low{CapSpec::Mode::lowest_k, 2, 1};
    CHECK(cap_indices(low, 10) == std::vector<Eigen::Index>{0, 1});
    // window start counts down from the top of the spectrum
    CapSpec w1{CapSpec::Mode::window, 3, 1};
    CHECK(cap_indices(w1, 10) == std::vector<Eigen::Index>{7, 8, 9});
    CapSpec w2{CapSpec::Mode::window, 3, 4};
    CHECK(cap_indices(w2, 10) == std::vector<Eigen::Index>{4, 5, 6});
    CHECK_THROWS_AS(cap_indices(CapSpec{CapSpec::Mode::window, 3, 9}, 10), ValidationError);
    CHECK_THROWS_AS(cap_indices(CapSpec{CapSpec::Mode::highest_k, 11, 1}, 10), ValidationError);
}

TEST_CASE("capped_spatial_plus projects x exactly onto the selected frequencies") {
    std::mt19937_64 rng = stream_rng(60, 0);
    const Eigen::Index n = 20, p = 8;
    const SpatialDesign design = random_pd_design(rng, n, p);
    const SpectralDecomposition d = decompose(design, ModelParams{1.0, 1.0});
    const Eigen::VectorXd y = random_vector(rng, n);
    const Eigen::VectorXd x = random_vector(rng, n);
    const CapSpec cap{CapSpec::Mode::highest_k, 3, 1};
    const ModelParams params{2.0, 1.0};
    const FitResult f = capped_spatial_plus(y, x, d, cap, params);

    // oracle: dense projector onto the 3 highest-frequency eigenvectors,
    // then GLS under the model with those directions unconstrained
    const Eigen::MatrixXd sel = d.spatial_basis().rightCols(3);
    const Eigen::VectorXd rk = sel * (sel.transpose() * x);
    const SpectralDecomposition reduced = remove_frequencies(d, {5, 6, 7});
    const double beta =
        fit_gls(y, rk, reweight(reduced, params)).beta_hat;
    CHECK(f.beta_hat == doctest::Approx(beta).epsilon(1e-10));
}

TEST_CASE("capped_spatial_plus rejects covariates orthogonal to the cap") {
    std::mt19937_64 rng = stream_rng(61, 0);
    const SpatialDesign design = random_pd_design(rng, 16, 6);
    const SpectralDecomposition d = decompose(design, ModelParams{1.0, 1.0});
    const Eigen::VectorXd y = random_vector(rng, 16);
    // x built only from the lowest 3 frequencies -> no content in the top 2
    const Eigen::VectorXd x = d.spatial_basis().leftCols(3) * random_vector(rng, 3);
    CHECK_THROWS_AS(capped_spatial_plus(y, x, d, CapSpec{CapSpec::Mode::highest_k, 2, 1}),
                    ValidationError);
}

TEST_CASE("cap_sweep collects per-cap failures and reports stability") {
    std::mt19937_64 rng = stream_rng(62, 0);
    const Eigen::Index n = 40, p = 10;
    const SpatialDesign design = random_pd_design(rng, n, p);
    const SpectralDecomposition d = decompose(design, ModelParams{1.0, 1.0});
    // x with content only in the top 4 frequencies
    const Eigen::VectorXd x = d.spatial_basis().rightCols(4) * random_vector(rng, 4);
    const Eigen::VectorXd y = 2.0 * x + 0.05 * random_vector(rng, n);
    std::vector<CapSpec> caps;
    for (Eigen::Index k : {2, 3, 4}) caps.push_back({CapSpec::Mode::highest_k, k, 1});
    // a window far below the covariate's content must fail
    caps.push_back({CapSpec::Mode::window, 2, 8});
    const CapSweepResult sweep = cap_sweep(y, x, d, caps);
    REQUIRE(sweep.fits.size() == 4);
    CHECK(sweep.fits[0].has_value());
    CHECK(sweep.fits[1].has_value());
    CHECK(sweep.fits[2].has_value());
    CHECK_FALSE(sweep.fits[3].has_value());
    CHECK(sweep.errors.size() == 1);
    CHECK(sweep.stability >= 0.0);
}
