#include "spacon/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace spacon {

namespace {

constexpr double kSymmetryRelTol = 1e-12;

}  // namespace

void validate_design(SpatialDesign& design) {
    const Eigen::Index n = design.basis.rows();
    const Eigen::Index p = design.basis.cols();
    if (design.locations.rows() > 0 && design.locations.rows() != n) {
        throw ValidationError("design: basis rows do not match number of locations");
    }
    if (p > n) {
        throw ValidationError("design: more basis columns than observations (p > n)");
    }
    if (design.penalty.rows() != p || design.penalty.cols() != p) {
        throw ValidationError("design: penalty must be p x p");
    }
    if (design.penalty_rank_tolerance < 0.0) {
        throw ValidationError("design: penalty_rank_tolerance must be nonnegative");
    }
    if (p == 0) return;

    const double scale = std::max(1.0, design.penalty.cwiseAbs().maxCoeff());
    const double asym = (design.penalty - design.penalty.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryRelTol * scale) {
        throw ValidationError("design: penalty matrix is not symmetric");
    }
    design.penalty = 0.5 * (design.penalty + design.penalty.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(design.penalty);
    if (es.info() != Eigen::Success) {
        throw NumericalError("design: penalty eigendecomposition failed");
    }
    Eigen::VectorXd evals = es.eigenvalues();
    const double emax = std::max(evals.cwiseAbs().maxCoeff(), 1.0);
    const double floor = -design.penalty_rank_tolerance * emax;
    if (evals.minCoeff() < floor) {
        throw ValidationError("design: penalty has negative eigenvalues beyond tolerance");
    }
    if (evals.minCoeff() < 0.0) {
        evals = evals.cwiseMax(0.0);
        design.penalty = es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().transpose();
    }
}

void validate_params(const ModelParams& params) {
    if (!(params.lambda >= 0.0)) throw ValidationError("params: lambda must be >= 0");
    if (!(params.sigma2 > 0.0)) throw ValidationError("params: sigma2 must be > 0");
}

SpatialDesign with_intercept(const SpatialDesign& design) {
    const Eigen::Index n = design.n();
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    if (design.p() > 0) {
        Eigen::VectorXd coef = design.basis.colPivHouseholderQr().solve(ones);
        const double resid = (design.basis * coef - ones).norm();
        if (resid < 1e-8 * std::sqrt(static_cast<double>(n))) return design;
    }
    SpatialDesign out = design;
    const Eigen::Index p = design.p();
    out.basis.conservativeResize(n, p + 1);
    out.basis.col(p) = ones;
    out.penalty.conservativeResize(p + 1, p + 1);
    out.penalty.row(p).setZero();
    out.penalty.col(p).setZero();
    return out;
}

Eigen::VectorXd smoothing_weights(const Eigen::VectorXd& penalty_eigenvalues,
                                  const ModelParams& params) {
    validate_params(params);
    const double inv_s2 = 1.0 / params.sigma2;
    Eigen::VectorXd w(penalty_eigenvalues.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double la = params.lambda * penalty_eigenvalues[i];
        w[i] = (la > 0.0) ? la / (inv_s2 + la) : 0.0;
    }
    return w;
}

SpectralDecomposition decompose(const SpatialDesign& design_in, const ModelParams& params) {
    SpatialDesign design = design_in;
    validate_design(design);
    validate_params(params);

    const Eigen::Index n = design.n();
    const Eigen::Index p = design.p();

    SpectralDecomposition out;
    out.lambda = params.lambda;
    out.sigma2 = params.sigma2;

    if (p == 0) {
        out.eigenbasis = Eigen::MatrixXd::Identity(n, n);
        out.penalty_eigenvalues.resize(0);
        out.weights.resize(0);
        out.split = n;
        return out;
    }

    // Pseudo-inverse square root of S: columns G = B * V * diag(alpha^{-1/2})
    // give B S^- B^T = G G^T without forming the n x n product rank-deficiently.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_s(design.penalty);
    if (es_s.info() != Eigen::Success) {
        throw NumericalError("decompose: penalty eigendecomposition failed");
    }
    const Eigen::VectorXd alpha_s = es_s.eigenvalues().cwiseMax(0.0);
    const double a_max = alpha_s.maxCoeff();
    const double a_thr = design.penalty_rank_tolerance * std::max(a_max, 0.0);
    Eigen::VectorXd inv_sqrt(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        inv_sqrt[i] = (alpha_s[i] > a_thr && alpha_s[i] > 0.0) ? 1.0 / std::sqrt(alpha_s[i]) : 0.0;
    }
    const Eigen::MatrixXd G = design.basis * es_s.eigenvectors() * inv_sqrt.asDiagonal();

    // Orthonormal basis of the image of B_sp and its complement.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.basis);
    const Eigen::Index r = qr.rank();
    if (r == 0) throw ValidationError("decompose: basis matrix is zero");
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    const Eigen::Ref<const Eigen::MatrixXd> Q1 = Q.leftCols(r);

    // Effective penalties: eigenvalues d of Q1^T (B S^- B^T) Q1 map to
    // alpha = 1/d; d = 0 marks unpenalised spatial directions.
    const Eigen::MatrixXd QG = Q1.transpose() * G;  // r x p
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_m(QG * QG.transpose());
    if (es_m.info() != Eigen::Success) {
        throw NumericalError("decompose: spatial eigendecomposition failed; "
                             "penalty/basis may be severely ill-conditioned");
    }
    const Eigen::VectorXd d = es_m.eigenvalues().cwiseMax(0.0);  // ascending
    const double d_thr = d.maxCoeff() * std::max(design.penalty_rank_tolerance, 1e-13);

    // Ascending alpha order: unpenalised (d ~ 0) first, then descending d.
    std::vector<Eigen::Index> order;
    order.reserve(r);
    for (Eigen::Index i = 0; i < r; ++i)
        if (d[i] <= d_thr) order.push_back(i);
    for (Eigen::Index i = r - 1; i >= 0; --i)
        if (d[i] > d_thr) order.push_back(i);

    out.split = n - r;
    out.eigenbasis.resize(n, n);
    out.eigenbasis.leftCols(out.split) = Q.rightCols(n - r);
    out.penalty_eigenvalues.resize(r);
    for (Eigen::Index j = 0; j < r; ++j) {
        const Eigen::Index i = order[j];
        out.eigenbasis.col(out.split + j) = Q1 * es_m.eigenvectors().col(i);
        out.penalty_eigenvalues[j] = (d[i] > d_thr) ? 1.0 / d[i] : 0.0;
    }
    out.weights = smoothing_weights(out.penalty_eigenvalues, params);
    return out;
}

SpectralDecomposition reweight(const SpectralDecomposition& decomp, const ModelParams& params) {
    SpectralDecomposition out = decomp;
    out.lambda = params.lambda;
    out.sigma2 = params.sigma2;
    out.weights = smoothing_weights(decomp.penalty_eigenvalues, params);
    return out;
}

SpectralDecomposition remove_frequencies(const SpectralDecomposition& decomp,
                                         const std::vector<Eigen::Index>& spatial_indices) {
    const Eigen::Index p = decomp.p();
    std::vector<bool> removed(static_cast<std::size_t>(p), false);
    for (Eigen::Index idx : spatial_indices) {
        if (idx < 0 || idx >= p) throw ValidationError("remove_frequencies: index out of range");
        removed[static_cast<std::size_t>(idx)] = true;
    }
    const Eigen::Index n_removed =
        static_cast<Eigen::Index>(std::count(removed.begin(), removed.end(), true));

    SpectralDecomposition out;
    out.lambda = decomp.lambda;
    out.sigma2 = decomp.sigma2;
    out.split = decomp.split + n_removed;
    out.eigenbasis.resize(decomp.n(), decomp.n());
    out.eigenbasis.leftCols(decomp.split) = decomp.eigenbasis.leftCols(decomp.split);
    out.penalty_eigenvalues.resize(p - n_removed);
    out.weights.resize(p - n_removed);
    Eigen::Index ns = decomp.split, sp = 0;
    for (Eigen::Index i = 0; i < p; ++i) {
        if (removed[static_cast<std::size_t>(i)]) {
            out.eigenbasis.col(ns++) = decomp.eigenbasis.col(decomp.split + i);
        } else {
            out.penalty_eigenvalues[sp] = decomp.penalty_eigenvalues[i];
            out.weights[sp] = decomp.weights[i];
            out.eigenbasis.col(out.split + sp) = decomp.eigenbasis.col(decomp.split + i);
            ++sp;
        }
    }
    return out;
}

FrequencyCoordinates coordinates(const SpectralDecomposition& decomp, const Eigen::VectorXd& v) {
    if (v.size() != decomp.n()) {
        throw ValidationError("coordinates: vector length does not match decomposition");
    }
    FrequencyCoordinates xi;
    xi.nonspatial = decomp.nonspatial_basis().transpose() * v;
    xi.spatial = decomp.spatial_basis().transpose() * v;
    return xi;
}

Eigen::VectorXd assemble(const SpectralDecomposition& decomp, const FrequencyCoordinates& xi) {
    if (xi.nonspatial.size() != decomp.split || xi.spatial.size() != decomp.p()) {
        throw ValidationError("assemble: coordinate lengths do not match decomposition");
    }
    return decomp.nonspatial_basis() * xi.nonspatial + decomp.spatial_basis() * xi.spatial;
}

double weighted_inner_product(const SpectralDecomposition& decomp,
                              const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != decomp.n() || b.size() != decomp.n()) {
        throw ValidationError("weighted_inner_product: vector length mismatch");
    }
    const FrequencyCoordinates xa = coordinates(decomp, a);
    const FrequencyCoordinates xb = coordinates(decomp, b);
    const double ns = xa.nonspatial.dot(xb.nonspatial);
    const double sp = (xa.spatial.array() * xb.spatial.array() * decomp.weights.array()).sum();
    return (ns + sp) / decomp.sigma2;
}

}  // namespace spacon
