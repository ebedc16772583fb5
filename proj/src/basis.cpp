#include "spacon/basis.hpp"

#include <cmath>
#include <iostream>
#include <numeric>

namespace spacon {

namespace {

double tps_eta(double r) { return (r > 0.0) ? r * r * std::log(r) : 0.0; }

/// Deterministic farthest-point subsampling, seeded at the point closest to
/// the centroid.
std::vector<Eigen::Index> farthest_point_knots(const Eigen::MatrixXd& locations,
                                               Eigen::Index count) {
    const Eigen::Index n = locations.rows();
    const Eigen::RowVectorXd centroid = locations.colwise().mean();
    Eigen::Index first = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (locations.row(i) - centroid).squaredNorm();
        if (d < best) { best = d; first = i; }
    }
    std::vector<Eigen::Index> knots{first};
    Eigen::VectorXd min_dist(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        min_dist[i] = (locations.row(i) - locations.row(first)).squaredNorm();
    }
    while (static_cast<Eigen::Index>(knots.size()) < count) {
        Eigen::Index next = 0;
        min_dist.maxCoeff(&next);
        knots.push_back(next);
        for (Eigen::Index i = 0; i < n; ++i) {
            min_dist[i] =
                std::min(min_dist[i], (locations.row(i) - locations.row(next)).squaredNorm());
        }
    }
    return knots;
}

/// Perturbs exact duplicate rows so radial and covariance kernels stay
/// nonsingular.
Eigen::MatrixXd jitter_duplicates(const Eigen::MatrixXd& locations) {
    Eigen::MatrixXd out = locations;
    const double scale =
        std::max((locations.colwise().maxCoeff() - locations.colwise().minCoeff()).maxCoeff(), 1.0);
    bool warned = false;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            if ((out.row(i) - out.row(j)).norm() == 0.0) {
                out(i, 0) += 1e-9 * scale * static_cast<double>(i + 1);
                if (!warned) {
                    std::cerr << "spacon: duplicate locations jittered by 1e-9 * domain scale\n";
                    warned = true;
                }
                break;
            }
        }
    }
    return out;
}

}  // namespace

SpatialDesign build_thin_plate(const Eigen::MatrixXd& locations_in, Eigen::Index num_basis) {
    if (locations_in.cols() != 2) throw ValidationError("build_thin_plate: locations must be n x 2");
    const Eigen::Index n = locations_in.rows();
    if (num_basis < 3) throw ValidationError("build_thin_plate: num_basis must be >= 3");
    if (num_basis > n) throw ValidationError("build_thin_plate: num_basis exceeds n");
    const Eigen::MatrixXd locations = jitter_duplicates(locations_in);

    Eigen::MatrixXd poly(n, 3);
    poly.col(0).setOnes();
    poly.col(1) = locations.col(0);
    poly.col(2) = locations.col(1);
    if (poly.colPivHouseholderQr().rank() < 3) {
        throw ValidationError("build_thin_plate: collinear locations, polynomial part degenerate");
    }

    const Eigen::Index q = num_basis;           // knot count
    const Eigen::Index n_rad = q - 3;           // radial columns after constraint absorption
    const std::vector<Eigen::Index> knot_idx = farthest_point_knots(locations, q);
    Eigen::MatrixXd knots(q, 2);
    for (Eigen::Index j = 0; j < q; ++j) knots.row(j) = locations.row(knot_idx[j]);

    SpatialDesign design;
    design.locations = locations;
    design.basis.resize(n, num_basis);
    design.basis.leftCols(3) = poly;
    design.penalty = Eigen::MatrixXd::Zero(num_basis, num_basis);
    if (n_rad == 0) return design;

    Eigen::MatrixXd radial(n, q);
    Eigen::MatrixXd gram(q, q);
    for (Eigen::Index j = 0; j < q; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            radial(i, j) = tps_eta((locations.row(i) - knots.row(j)).norm());
        }
        for (Eigen::Index i = 0; i < q; ++i) {
            gram(i, j) = tps_eta((knots.row(i) - knots.row(j)).norm());
        }
    }
    // Absorb the order-2 moment constraints: Z spans the complement of the
    // polynomial space at the knots, where the radial energy is positive
    // definite.
    Eigen::MatrixXd knot_poly(q, 3);
    knot_poly.col(0).setOnes();
    knot_poly.col(1) = knots.col(0);
    knot_poly.col(2) = knots.col(1);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(knot_poly);
    const Eigen::MatrixXd Z =
        (qr.householderQ() * Eigen::MatrixXd::Identity(q, q)).rightCols(n_rad);

    design.basis.rightCols(n_rad) = radial * Z;
    Eigen::MatrixXd pen = Z.transpose() * gram * Z;
    design.penalty.bottomRightCorner(n_rad, n_rad) = 0.5 * (pen + pen.transpose());
    return design;
}

SpatialDesign build_gp_exponential(const Eigen::MatrixXd& locations_in, double kappa) {
    if (!(kappa > 0.0)) throw ValidationError("build_gp_exponential: kappa must be positive");
    const Eigen::MatrixXd locations = jitter_duplicates(locations_in);
    const Eigen::Index n = locations.rows();
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        cov(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double c = std::exp(-(locations.row(i) - locations.row(j)).norm() / kappa);
            cov(i, j) = c;
            cov(j, i) = c;
        }
    }
    const double nugget = 1e-10 * cov.diagonal().mean();
    Eigen::LLT<Eigen::MatrixXd> llt(cov + nugget * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() != Eigen::Success) {
        llt.compute(cov + 1e6 * nugget * Eigen::MatrixXd::Identity(n, n));
        if (llt.info() != Eigen::Success) {
            throw NumericalError("build_gp_exponential: covariance is numerically singular");
        }
    }
    SpatialDesign design;
    design.locations = locations;
    design.basis = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(n, n));
    design.penalty = 0.5 * (prec + prec.transpose());
    return design;
}

SpatialDesign build_graph_laplacian(const Eigen::MatrixXd& adjacency) {
    const Eigen::Index n = adjacency.rows();
    if (adjacency.cols() != n) throw ValidationError("build_graph_laplacian: adjacency not square");
    if ((adjacency - adjacency.transpose()).cwiseAbs().maxCoeff() > 0.0) {
        throw ValidationError("build_graph_laplacian: adjacency not symmetric");
    }
    if (adjacency.diagonal().cwiseAbs().maxCoeff() > 0.0) {
        throw ValidationError("build_graph_laplacian: adjacency has nonzero diagonal");
    }
    SpatialDesign design;
    design.locations = Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
    design.basis = Eigen::MatrixXd::Identity(n, n);
    design.penalty = Eigen::MatrixXd(adjacency.rowwise().sum().asDiagonal()) - adjacency;
    return design;
}

FrequencyBasis reparameterize(const SpatialDesign& design) {
    const SpectralDecomposition decomp = decompose(design, ModelParams{1.0, 1.0});
    FrequencyBasis out;
    out.design.locations = design.locations;
    out.design.basis = decomp.spatial_basis();
    out.design.penalty = Eigen::MatrixXd(decomp.penalty_eigenvalues.asDiagonal());
    out.design.penalty_rank_tolerance = design.penalty_rank_tolerance;
    out.frequency_order.resize(static_cast<std::size_t>(decomp.p()));
    std::iota(out.frequency_order.begin(), out.frequency_order.end(), Eigen::Index{0});
    return out;
}

}  // namespace spacon
