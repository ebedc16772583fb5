#include "spacon/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spacon {

namespace {

constexpr double kDegenerateTol = 1e-6;

double normal_two_sided_p(double t) {
    return std::erfc(std::abs(t) / std::sqrt(2.0));
}

double gaussian_aic(double edf, double rss, double sigma2, Eigen::Index n) {
    const double loglik = -0.5 * static_cast<double>(n) * std::log(2.0 * M_PI * sigma2) -
                          rss / (2.0 * sigma2);
    return 2.0 * (edf + 1.0) - 2.0 * loglik;  // +1 for the scale parameter
}

/// Joint penalized fit of y ~ beta*x + spatial effect, evaluated in the
/// precision eigenbasis. All quantities are O(n) per smoothing value once
/// the coordinates of x and y are computed.
class JointSpectralFit {
public:
    JointSpectralFit(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                     const SpectralDecomposition& decomp)
        : d_(decomp), y_(y), x_(x), xi_x_(coordinates(decomp, x)), xi_y_(coordinates(decomp, y)) {}

    struct Eval {
        double beta = 0.0;
        double sxx = 0.0;  // sigma2 * <x,x>_{Sigma^-1}
        double rss = 0.0;
        double trh = 0.0;
        double gcv = std::numeric_limits<double>::infinity();
        bool valid = false;
    };

    Eval evaluate(double ltilde) const {
        Eval e;
        const Eigen::ArrayXd w = weights_for(ltilde);
        const double sxy = xi_x_.nonspatial.dot(xi_y_.nonspatial) +
                           (xi_x_.spatial.array() * xi_y_.spatial.array() * w).sum();
        e.sxx = xi_x_.nonspatial.squaredNorm() + (xi_x_.spatial.array().square() * w).sum();
        if (!(e.sxx > kDegenerateTol * kDegenerateTol * x_.squaredNorm())) return e;
        e.beta = sxy / e.sxx;

        const Eigen::ArrayXd rs = xi_y_.spatial.array() - e.beta * xi_x_.spatial.array();
        const Eigen::VectorXd rn = xi_y_.nonspatial - e.beta * xi_x_.nonspatial;
        e.rss = rn.squaredNorm() + (rs.square() * w.square()).sum();
        const double xterm = (xi_x_.nonspatial.squaredNorm() +
                              (xi_x_.spatial.array().square() * w.square()).sum()) /
                             e.sxx;
        e.trh = (1.0 - w).sum() + xterm;
        const double n = static_cast<double>(d_.n());
        const double denom = n - e.trh;
        if (denom > 0.0) e.gcv = n * e.rss / (denom * denom);
        e.valid = true;
        return e;
    }

    FitResult finalize(double ltilde, const Eval& e) const {
        FitResult f;
        const Eigen::Index n = d_.n();
        f.beta_hat = e.beta;
        f.edf = e.trh;
        f.gcv = e.gcv;
        const Eigen::ArrayXd w = weights_for(ltilde);
        const Eigen::VectorXd rs =
            ((xi_y_.spatial - e.beta * xi_x_.spatial).array() * w).matrix();
        const Eigen::VectorXd rn = xi_y_.nonspatial - e.beta * xi_x_.nonspatial;
        f.residuals = d_.nonspatial_basis() * rn + d_.spatial_basis() * rs;
        f.fitted = y_ - f.residuals;
        const double dof = std::max(static_cast<double>(n) - e.trh, 1.0);
        f.sigma2_hat = e.rss / dof;
        f.lambda_hat = (f.sigma2_hat > 0.0) ? ltilde / f.sigma2_hat : 0.0;
        f.beta_variance = f.sigma2_hat / e.sxx;
        f.p_value = (f.beta_variance > 0.0)
                        ? normal_two_sided_p(f.beta_hat / std::sqrt(f.beta_variance))
                        : 0.0;
        f.aic = gaussian_aic(e.trh, e.rss, f.sigma2_hat, n);
        return f;
    }

    const FrequencyCoordinates& xi_x() const { return xi_x_; }

private:
    Eigen::ArrayXd weights_for(double ltilde) const {
        // w = ltilde*alpha / (1 + ltilde*alpha), ltilde = lambda*sigma2.
        Eigen::ArrayXd la = ltilde * d_.penalty_eigenvalues.array();
        return la / (1.0 + la);
    }

    const SpectralDecomposition& d_;
    Eigen::VectorXd y_, x_;
    FrequencyCoordinates xi_x_, xi_y_;
};

/// Golden-section minimization of GCV over log(ltilde).
template <typename F>
std::pair<double, bool> minimize_log_golden(F&& objective, double lo, double hi, int grid_points) {
    const double llo = std::log(lo), lhi = std::log(hi);
    double best = llo;
    double best_val = std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i < grid_points; ++i) {
        const double t = llo + (lhi - llo) * i / (grid_points - 1);
        const double v = objective(std::exp(t));
        if (v < best_val) {
            best_val = v;
            best = t;
            best_i = i;
        }
    }
    const bool boundary = (best_i == 0 || best_i == grid_points - 1);
    const double step = (lhi - llo) / (grid_points - 1);
    double a = std::max(llo, best - step), b = std::min(lhi, best + step);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = objective(std::exp(c)), fd = objective(std::exp(d));
    for (int it = 0; it < 60 && (b - a) > 1e-10; ++it) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - gr * (b - a);
            fc = objective(std::exp(c));
        } else {
            a = c; c = d; fc = fd;
            d = a + gr * (b - a);
            fd = objective(std::exp(d));
        }
    }
    const double refined = 0.5 * (a + b);
    if (objective(std::exp(refined)) < best_val) best = refined;
    return {std::exp(best), boundary};
}

FitResult fit_at(const JointSpectralFit& jf, double ltilde) {
    const auto e = jf.evaluate(ltilde);
    if (!e.valid) {
        throw ValidationError(
            "fit: covariate has no information at this smoothing level (rank deficiency)");
    }
    return jf.finalize(ltilde, e);
}

}  // namespace

FitResult fit_gls(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                  const SpectralDecomposition& decomp) {
    if (y.size() != decomp.n() || x.size() != decomp.n()) {
        throw ValidationError("fit_gls: length mismatch");
    }
    if (!(x.squaredNorm() > 0.0)) throw ValidationError("fit_gls: zero covariate");
    JointSpectralFit jf(y, x, decomp);
    const double ltilde = decomp.lambda * decomp.sigma2;
    FitResult f = fit_at(jf, ltilde);
    // At fixed params, report the analysis-model variance at the given sigma2.
    const double sxx = jf.evaluate(ltilde).sxx;
    f.beta_variance = decomp.sigma2 / sxx;
    f.lambda_hat = decomp.lambda;
    return f;
}

FitResult fit_gls(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                  const SpatialDesign& design, const ModelParams& params) {
    return fit_gls(y, x, decompose(with_intercept(design), params));
}

FitResult select_lambda_gcv(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                            const SpectralDecomposition& decomp,
                            double ltilde_lo, double ltilde_hi) {
    if (y.size() != decomp.n() || x.size() != decomp.n()) {
        throw ValidationError("select_lambda_gcv: length mismatch");
    }
    if (!(ltilde_lo > 0.0) || !(ltilde_hi > ltilde_lo)) {
        throw ValidationError("select_lambda_gcv: invalid search bracket");
    }
    JointSpectralFit jf(y, x, decomp);
    auto objective = [&](double lt) { return jf.evaluate(lt).gcv; };
    auto [ltilde, boundary] = minimize_log_golden(objective, ltilde_lo, ltilde_hi, 25);
    FitResult f = fit_at(jf, ltilde);
    f.gcv_boundary_warning = boundary;
    return f;
}

FitResult select_lambda_gcv(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                            const SpatialDesign& design,
                            double ltilde_lo, double ltilde_hi) {
    const SpectralDecomposition decomp =
        decompose(with_intercept(design), ModelParams{1.0, 1.0});
    return select_lambda_gcv(y, x, decomp, ltilde_lo, ltilde_hi);
}

FitResult fit_nonspatial(const Eigen::VectorXd& y, const Eigen::VectorXd& x) {
    if (y.size() != x.size()) throw ValidationError("fit_nonspatial: length mismatch");
    const Eigen::Index n = y.size();
    if (n < 3) throw ValidationError("fit_nonspatial: too few observations");
    const Eigen::VectorXd xc = x.array() - x.mean();
    const double sxx = xc.squaredNorm();
    if (!(sxx > 0.0)) throw ValidationError("fit_nonspatial: constant covariate");

    FitResult f;
    f.beta_hat = xc.dot(y) / sxx;
    const double intercept = y.mean() - f.beta_hat * x.mean();
    f.fitted = intercept + f.beta_hat * x.array();
    f.residuals = y - f.fitted;
    const double rss = f.residuals.squaredNorm();
    f.edf = 2.0;
    f.sigma2_hat = rss / static_cast<double>(n - 2);
    f.beta_variance = f.sigma2_hat / sxx;
    f.lambda_hat = 0.0;
    f.p_value = normal_two_sided_p(f.beta_hat / std::sqrt(f.beta_variance));
    f.aic = gaussian_aic(2.0, rss, f.sigma2_hat, n);
    f.gcv = static_cast<double>(n) * rss / std::pow(static_cast<double>(n) - 2.0, 2);
    return f;
}

FitResult spatial_plus(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                       const SpectralDecomposition& decomp, const SmoothingPolicy& policy) {
    if (y.size() != decomp.n() || x.size() != decomp.n()) {
        throw ValidationError("spatial_plus: length mismatch");
    }
    const FrequencyCoordinates xi_x = coordinates(decomp, x);
    const bool low_info = xi_x.nonspatial.norm() < kDegenerateTol * x.norm();

    // Step (i): smooth-only fit of x; residuals carry its non-spatial part.
    Eigen::VectorXd rx;
    if (policy.mode == SmoothingPolicy::Mode::projection) {
        rx = decomp.nonspatial_basis() * xi_x.nonspatial;
    } else {
        auto shrink = [&](double ltilde) {
            Eigen::ArrayXd la = ltilde * decomp.penalty_eigenvalues.array();
            return (la / (1.0 + la)).eval();  // penalized-away fraction
        };
        auto smooth_resid = [&](const Eigen::ArrayXd& w) {
            return (decomp.nonspatial_basis() * xi_x.nonspatial +
                    decomp.spatial_basis() * (xi_x.spatial.array() * w).matrix())
                .eval();
        };
        double ltilde;
        if (policy.mode == SmoothingPolicy::Mode::fixed) {
            validate_params(policy.params);
            ltilde = policy.params.lambda * policy.params.sigma2;
        } else {
            const double n = static_cast<double>(decomp.n());
            auto gcv = [&](double lt) {
                const Eigen::ArrayXd w = shrink(lt);
                const double rss =
                    xi_x.nonspatial.squaredNorm() + (xi_x.spatial.array().square() * w.square()).sum();
                const double trh = (1.0 - w).sum();
                const double denom = n - trh;
                return denom > 0.0 ? n * rss / (denom * denom)
                                   : std::numeric_limits<double>::infinity();
            };
            ltilde = minimize_log_golden(gcv, 1e-8, 1e8, 25).first;
        }
        rx = smooth_resid(shrink(ltilde));
    }
    if (rx.norm() < kDegenerateTol * x.norm()) {
        throw ValidationError("spatial_plus: first-stage residuals are numerically zero");
    }

    // Step (ii): refit the spatial model with the residuals as covariate.
    FitResult f = (policy.mode == SmoothingPolicy::Mode::fixed)
                      ? fit_gls(y, rx, reweight(decomp, policy.params))
                      : select_lambda_gcv(y, rx, decomp);
    f.low_information_warning = low_info;
    return f;
}

FitResult spatial_plus(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                       const SpatialDesign& design, const SmoothingPolicy& policy) {
    const SpectralDecomposition decomp =
        decompose(with_intercept(design), ModelParams{1.0, 1.0});
    return spatial_plus(y, x, decomp, policy);
}

std::vector<Eigen::Index> cap_indices(const CapSpec& cap, Eigen::Index p) {
    if (cap.k < 1 || cap.k > p) throw ValidationError("cap: k must be in [1, p]");
    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(cap.k));
    switch (cap.mode) {
        case CapSpec::Mode::highest_k:
            for (Eigen::Index i = p - cap.k; i < p; ++i) idx.push_back(i);
            break;
        case CapSpec::Mode::lowest_k:
            for (Eigen::Index i = 0; i < cap.k; ++i) idx.push_back(i);
            break;
        case CapSpec::Mode::window: {
            if (cap.start < 1 || cap.start + cap.k - 1 > p) {
                throw ValidationError("cap: window out of range");
            }
            for (Eigen::Index i = p - cap.start - cap.k + 1; i <= p - cap.start; ++i) {
                idx.push_back(i);
            }
            break;
        }
    }
    return idx;
}

FitResult capped_spatial_plus(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                              const SpectralDecomposition& decomp, const CapSpec& cap,
                              const std::optional<ModelParams>& params) {
    if (y.size() != decomp.n() || x.size() != decomp.n()) {
        throw ValidationError("capped_spatial_plus: length mismatch");
    }
    const std::vector<Eigen::Index> sel = cap_indices(cap, decomp.p());
    const FrequencyCoordinates xi_x = coordinates(decomp, x);

    // Step (i): exact projection of x onto the selected frequencies.
    Eigen::VectorXd rk = Eigen::VectorXd::Zero(x.size());
    for (Eigen::Index i : sel) {
        rk += xi_x.spatial[i] * decomp.spatial_basis().col(i);
    }
    if (rk.norm() < kDegenerateTol * x.norm()) {
        throw ValidationError(
            "capped_spatial_plus: covariate has insufficient content at the selected frequencies");
    }

    // Step (ii): drop the selected spatial columns from the analysis model.
    const SpectralDecomposition reduced = remove_frequencies(decomp, sel);
    if (params) {
        return fit_gls(y, rk, reweight(reduced, *params));
    }
    return select_lambda_gcv(y, rk, reduced);
}

FitResult capped_spatial_plus(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                              const SpatialDesign& design, const CapSpec& cap,
                              const std::optional<ModelParams>& params) {
    const SpectralDecomposition decomp =
        decompose(with_intercept(design), ModelParams{1.0, 1.0});
    return capped_spatial_plus(y, x, decomp, cap, params);
}

Eigen::VectorXd smooth_gcv(const Eigen::VectorXd& v, const SpectralDecomposition& decomp) {
    if (v.size() != decomp.n()) throw ValidationError("smooth_gcv: length mismatch");
    const FrequencyCoordinates xi = coordinates(decomp, v);
    const double n = static_cast<double>(decomp.n());
    auto penalized_fraction = [&](double lt) {
        Eigen::ArrayXd la = lt * decomp.penalty_eigenvalues.array();
        return (la / (1.0 + la)).eval();
    };
    auto gcv = [&](double lt) {
        const Eigen::ArrayXd w = penalized_fraction(lt);
        const double rss =
            xi.nonspatial.squaredNorm() + (xi.spatial.array().square() * w.square()).sum();
        const double trh = (1.0 - w).sum();
        const double denom = n - trh;
        return denom > 0.0 ? n * rss / (denom * denom) : std::numeric_limits<double>::infinity();
    };
    const double ltilde = minimize_log_golden(gcv, 1e-8, 1e8, 25).first;
    const Eigen::ArrayXd w = penalized_fraction(ltilde);
    return decomp.spatial_basis() * (xi.spatial.array() * (1.0 - w)).matrix();
}

CapSweepResult cap_sweep(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                         const SpectralDecomposition& decomp,
                         const std::vector<CapSpec>& caps,
                         const std::optional<ModelParams>& params) {
    if (caps.empty()) throw ValidationError("cap_sweep: empty cap list");
    CapSweepResult out;
    out.caps = caps;
    out.fits.reserve(caps.size());
    for (const CapSpec& cap : caps) {
        try {
            out.fits.emplace_back(capped_spatial_plus(y, x, decomp, cap, params));
        } catch (const std::exception& ex) {
            out.fits.emplace_back(std::nullopt);
            out.errors.emplace_back(ex.what());
        }
    }
    for (std::size_t i = 0; i < out.fits.size(); ++i) {
        if (!out.fits[i] || !out.fits[i]->significant()) continue;
        for (std::size_t j = i + 1; j < out.fits.size(); ++j) {
            if (!out.fits[j] || !out.fits[j]->significant()) continue;
            out.stability =
                std::max(out.stability, std::abs(out.fits[i]->beta_hat - out.fits[j]->beta_hat));
        }
    }
    return out;
}

}  // namespace spacon
