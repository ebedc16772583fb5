#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spacon/spectral.hpp"

namespace spacon {

/// Result of fitting one of the analysis models.
struct FitResult {
    double beta_hat = 0.0;
    double beta_variance = 0.0;
    double lambda_hat = 0.0;   // paper parameterization: lambda = ltilde / sigma2_hat
    double sigma2_hat = 0.0;   // RSS / (n - edf)
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
    double edf = 0.0;          // trace of the joint influence matrix
    double aic = 0.0;
    double gcv = 0.0;
    std::optional<double> rmse_vs_truth;
    double p_value = 1.0;      // Wald test against a normal reference

    bool gcv_boundary_warning = false;    // 1-D search ended at the bracket edge
    bool low_information_warning = false; // covariate nearly fully spatial

    bool significant(double level = 0.05) const { return p_value < level; }
};

/// Frequency selection for capped spatial+. `k` counts selected frequencies;
/// window mode selects k consecutive frequencies whose highest member has
/// rank `start` counted down from the top of the spectrum (start = 1 picks
/// the k highest, larger values slide deeper into the low frequencies).
struct CapSpec {
    enum class Mode { highest_k, lowest_k, window };
    Mode mode = Mode::highest_k;
    Eigen::Index k = 1;
    Eigen::Index start = 1;  // window mode only
};

/// First-stage smoothing choice for spatial+.
struct SmoothingPolicy {
    enum class Mode { gcv, fixed, projection };
    Mode mode = Mode::gcv;
    ModelParams params;  // fixed mode only
};

/// GLS fit of the spatial model at fixed (lambda, sigma2).
FitResult fit_gls(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                  const SpatialDesign& design, const ModelParams& params);

/// Same, on a precomputed decomposition (fits at the decomposition's params).
FitResult fit_gls(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                  const SpectralDecomposition& decomp);

/// GCV-selected smoothing: minimizes n*RSS / (n - tr H)^2 over ltilde =
/// lambda*sigma2 by golden section on a log grid. Returns the fit at the
/// minimizer; lambda_hat and sigma2_hat are filled from the selected fit.
FitResult select_lambda_gcv(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                            const SpatialDesign& design,
                            double ltilde_lo = 1e-8, double ltilde_hi = 1e8);
FitResult select_lambda_gcv(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                            const SpectralDecomposition& decomp,
                            double ltilde_lo = 1e-8, double ltilde_hi = 1e8);

/// OLS with intercept (the non-spatial analysis model).
FitResult fit_nonspatial(const Eigen::VectorXd& y, const Eigen::VectorXd& x);

/// Two-step spatial+: smooth x, replace it by the smoothing residuals,
/// refit the spatial model with GCV smoothing.
FitResult spatial_plus(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                       const SpatialDesign& design,
                       const SmoothingPolicy& policy = SmoothingPolicy{});
FitResult spatial_plus(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                       const SpectralDecomposition& decomp,
                       const SmoothingPolicy& policy = SmoothingPolicy{});

/// Capped spatial+: project x onto the cap-selected frequencies (exact, no
/// smoothing), drop the matching spatial columns from the analysis model and
/// fit with the projection as covariate. GCV smoothing unless params given.
FitResult capped_spatial_plus(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                              const SpectralDecomposition& decomp, const CapSpec& cap,
                              const std::optional<ModelParams>& params = std::nullopt);
FitResult capped_spatial_plus(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                              const SpatialDesign& design, const CapSpec& cap,
                              const std::optional<ModelParams>& params = std::nullopt);

/// Spatial-eigenbasis indices (ascending frequency order) selected by a cap.
std::vector<Eigen::Index> cap_indices(const CapSpec& cap, Eigen::Index p);

/// Smooth-only fit (no covariate) of v with GCV-selected smoothing; returns
/// the fitted values.
Eigen::VectorXd smooth_gcv(const Eigen::VectorXd& v, const SpectralDecomposition& decomp);

struct CapSweepResult {
    std::vector<CapSpec> caps;
    std::vector<std::optional<FitResult>> fits;  // nullopt when the cap failed
    std::vector<std::string> errors;             // one entry per failed cap
    double stability = 0.0;  // max pairwise |beta_hat| gap among significant caps
};

/// Capped spatial+ over a list of caps; per-cap failures are collected.
CapSweepResult cap_sweep(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                         const SpectralDecomposition& decomp,
                         const std::vector<CapSpec>& caps,
                         const std::optional<ModelParams>& params = std::nullopt);

}  // namespace spacon
