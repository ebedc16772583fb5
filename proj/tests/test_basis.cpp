#include "doctest.h"

#include "spacon/basis.hpp"
#include "spacon/rng.hpp"
#include "test_support.hpp"

using namespace spacon;
using namespace testsup;

namespace {

int sign_changes(const Eigen::VectorXd& v) {
    int count = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v[i - 1] * v[i] < 0.0) ++count;
    }
    return count;
}

}  // namespace

TEST_CASE("build_thin_plate: shapes, PSD penalty with a 3-dim null space") {
    std::mt19937_64 rng = stream_rng(71, 0);
    for (Eigen::Index num_basis : {10, 25, 40}) {
        const Eigen::MatrixXd loc = random_locations(rng, 60);
        SpatialDesign design = build_thin_plate(loc, num_basis);
        CHECK(design.n() == 60);
        CHECK(design.p() == num_basis);
        CHECK((design.penalty - design.penalty.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(design.penalty);
        const double thr = es.eigenvalues().cwiseAbs().maxCoeff() * 1e-9;
        Eigen::Index zeros = 0;
        for (Eigen::Index i = 0; i < num_basis; ++i) {
            CHECK(es.eigenvalues()[i] >= -thr);
            if (std::abs(es.eigenvalues()[i]) < thr) ++zeros;
        }
        CHECK(zeros == 3);
    }
}

TEST_CASE("build_thin_plate: constant and linear trends lie in the basis span") {
    std::mt19937_64 rng = stream_rng(72, 0);
    const Eigen::MatrixXd loc = random_locations(rng, 50);
    const SpatialDesign design = build_thin_plate(loc, 20);
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.basis);
    auto in_span = [&](const Eigen::VectorXd& v) {
        return (design.basis * qr.solve(v) - v).norm() < 1e-8 * (1.0 + v.norm());
    };
    CHECK(in_span(Eigen::VectorXd::Ones(50)));
    CHECK(in_span(loc.col(0)));
    CHECK(in_span(loc.col(1)));
}

TEST_CASE("build_thin_plate validations and duplicate jitter") {
    std::mt19937_64 rng = stream_rng(73, 0);
    const Eigen::MatrixXd loc = random_locations(rng, 20);
    CHECK_THROWS_AS(build_thin_plate(loc, 2), ValidationError);
    CHECK_THROWS_AS(build_thin_plate(loc, 21), ValidationError);
    CHECK_THROWS_AS(build_thin_plate(loc.leftCols(1), 5), ValidationError);

    Eigen::MatrixXd collinear(10, 2);
    for (int i = 0; i < 10; ++i) collinear.row(i) << i * 0.1, i * 0.2;
    CHECK_THROWS_AS(build_thin_plate(collinear, 5), ValidationError);

    Eigen::MatrixXd dup = loc;
    dup.row(1) = dup.row(0);
    const SpatialDesign design = build_thin_plate(dup, 10);  // jitters, no throw
    CHECK(design.p() == 10);
}

TEST_CASE("thin-plate decomposition: exactly 3 unpenalised directions") {
    std::mt19937_64 rng = stream_rng(74, 0);
    const Eigen::MatrixXd loc = random_locations(rng, 40);
    const SpatialDesign design = build_thin_plate(loc, 15);
    const SpectralDecomposition d = decompose(design, ModelParams{1.0, 1.0});
    CHECK(d.p() == 15);
    CHECK(d.penalty_eigenvalues[0] == 0.0);
    CHECK(d.penalty_eigenvalues[1] == 0.0);
    CHECK(d.penalty_eigenvalues[2] == 0.0);
    CHECK(d.penalty_eigenvalues[3] > 0.0);
}

TEST_CASE("thin-plate frequency order tracks oscillation along a transect") {
    // on a regular grid, high-rank eigenvectors oscillate more than low-rank
    // ones; checked statistically via sign changes along the x-sorted order.
    Eigen::MatrixXd loc(81, 2);
    for (int i = 0; i < 9; ++i) {
        for (int j = 0; j < 9; ++j) loc.row(9 * i + j) << i / 8.0, (j / 8.0) * 0.73 + 0.1;
    }
    std::vector<Eigen::Index> order(81);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return loc(a, 0) + 1e-3 * loc(a, 1) < loc(b, 0) + 1e-3 * loc(b, 1);
    });
    const SpatialDesign design = build_thin_plate(loc, 30);
    const SpectralDecomposition d = decompose(design, ModelParams{1.0, 1.0});
    auto changes = [&](Eigen::Index col) {
        Eigen::VectorXd v(81);
        for (Eigen::Index i = 0; i < 81; ++i) v[i] = d.spatial_basis()(order[i], col);
        return sign_changes(v);
    };
    double low = 0, high = 0;
    for (Eigen::Index c = 3; c < 8; ++c) low += changes(c);
    for (Eigen::Index c = 25; c < 30; ++c) high += changes(c);
    CHECK(high > low);
}

TEST_CASE("build_gp_exponential: penalty inverts the exponential covariance") {
    std::mt19937_64 rng = stream_rng(75, 0);
    const Eigen::MatrixXd loc = random_locations(rng, 30);
    const double kappa = 0.4;
    const SpatialDesign design = build_gp_exponential(loc, kappa);
    CHECK(design.p() == 30);
    CHECK((design.basis - Eigen::MatrixXd::Identity(30, 30)).cwiseAbs().maxCoeff() == 0.0);
    Eigen::MatrixXd c(30, 30);
    for (int i = 0; i < 30; ++i) {
        for (int j = 0; j < 30; ++j) {
            c(i, j) = std::exp(-(loc.row(i) - loc.row(j)).norm() / kappa);
        }
    }
    CHECK((design.penalty * c - Eigen::MatrixXd::Identity(30, 30)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK_THROWS_AS(build_gp_exponential(loc, 0.0), ValidationError);
}

TEST_CASE("gp design: marginal covariance equals sigma2 I + C / lambda") {
    std::mt19937_64 rng = stream_rng(76, 0);
    const Eigen::MatrixXd loc = random_locations(rng, 20);
    const SpatialDesign design = build_gp_exponential(loc, 0.5);
    const ModelParams params{2.0, 0.7};
    const Eigen::MatrixXd sigma = dense_covariance(design, params);
    Eigen::MatrixXd expected = params.sigma2 * Eigen::MatrixXd::Identity(20, 20);
    for (int i = 0; i < 20; ++i) {
        for (int j = 0; j < 20; ++j) {
            expected(i, j) +=
                std::exp(-(loc.row(i) - loc.row(j)).norm() / 0.5) / params.lambda;
        }
    }
    CHECK((sigma - expected).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("build_graph_laplacian: chain graph") {
    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(5, 5);
    for (int i = 0; i + 1 < 5; ++i) adj(i, i + 1) = adj(i + 1, i) = 1.0;
    const SpatialDesign design = build_graph_laplacian(adj);
    CHECK(design.penalty.rowwise().sum().cwiseAbs().maxCoeff() < 1e-14);
    CHECK(design.penalty(0, 0) == 1.0);
    CHECK(design.penalty(1, 1) == 2.0);
    CHECK(design.penalty(0, 1) == -1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(design.penalty);
    int zeros = 0;
    for (int i = 0; i < 5; ++i) {
        if (std::abs(es.eigenvalues()[i]) < 1e-10) ++zeros;
    }
    CHECK(zeros == 1);  // connected graph

    Eigen::MatrixXd bad = adj;
    bad(0, 1) = 2.0;
    CHECK_THROWS_AS(build_graph_laplacian(bad), ValidationError);
    bad = adj;
    bad(0, 0) = 1.0;
    CHECK_THROWS_AS(build_graph_laplacian(bad), ValidationError);
}

TEST_CASE("reparameterize: diagonal ascending penalty, same spectrum") {
    std::mt19937_64 rng = stream_rng(77, 0);
    const Eigen::MatrixXd loc = random_locations(rng, 40);
    const SpatialDesign design = build_thin_plate(loc, 15);
    const FrequencyBasis fb = reparameterize(design);
    CHECK(fb.design.p() == 15);
    // penalty diagonal and ascending
    for (Eigen::Index i = 0; i < 15; ++i) {
        for (Eigen::Index j = 0; j < 15; ++j) {
            if (i != j) CHECK(std::abs(fb.design.penalty(i, j)) < 1e-12);
        }
        if (i > 0) CHECK(fb.design.penalty(i, i) >= fb.design.penalty(i - 1, i - 1));
    }
    // orthonormal columns
    const Eigen::MatrixXd btb = fb.design.basis.transpose() * fb.design.basis;
    CHECK((btb - Eigen::MatrixXd::Identity(15, 15)).cwiseAbs().maxCoeff() < 1e-10);
    // decomposing the reparameterised design reproduces the penalty spectrum
    const SpectralDecomposition orig = decompose(design, ModelParams{1.0, 1.0});
    const SpectralDecomposition re = decompose(fb.design, ModelParams{1.0, 1.0});
    CHECK((orig.penalty_eigenvalues - re.penalty_eigenvalues).cwiseAbs().maxCoeff() <
          1e-8 * (1.0 + orig.penalty_eigenvalues.maxCoeff()));
    CHECK(fb.frequency_order.size() == 15);
}

TEST_CASE("frequency sub-bases: low and high column ranges are orthogonal") {
    std::mt19937_64 rng = stream_rng(78, 0);
    const Eigen::MatrixXd loc = random_locations(rng, 35);
    const FrequencyBasis fb = reparameterize(build_thin_plate(loc, 12));
    const Eigen::MatrixXd low = fb.design.basis.leftCols(4);
    const Eigen::MatrixXd high = fb.design.basis.rightCols(4);
    CHECK((low.transpose() * high).cwiseAbs().maxCoeff() < 1e-10);
}
