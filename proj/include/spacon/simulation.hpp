#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spacon/basis.hpp"
#include "spacon/estimators.hpp"

namespace spacon {

/// Full description of a confounding data-generating process. Scenario
/// names: S1, S2, S3a, S3b, S4, S5, capped.
struct ScenarioSpec {
    std::string name = "S1";
    Eigen::Index n = 1000;
    double kappa = 0.1;
    double xi_x_low = 1.0, xi_x_high = 1.0;
    double xi_z_low = 0.0, xi_z_high = 1.0;
    double sigma_x = 1.0;
    double sigma = 1.0;
    double beta_true = 0.5;
    Eigen::Index num_low_basis = 10;
    Eigen::Index num_high_basis = 800;
    Eigen::Index analysis_basis = 600;
    int replicates = 100;
    std::uint64_t seed = 1;
    std::optional<Eigen::Index> cap_truth;   // capped scenario: true k
    std::optional<double> amplitude_a;       // capped scenario: high-frequency amplitude
    bool resample_locations = true;          // fresh locations each replicate
    bool truth_gp_direct = false;            // raw GP fields, no spline filtering
};

void validate_spec(const ScenarioSpec& spec);

struct Replicate {
    Eigen::MatrixXd locations;
    Eigen::VectorXd x, y, z, expected_y;
};

/// Which estimators a study runs.
struct EstimatorSpec {
    enum class Kind { nonspatial, spatial, spatial_plus, capped };
    Kind kind = Kind::spatial;
    CapSpec cap;  // capped only
    std::string label() const;
};

struct EstimatorSummary {
    std::string name;
    double mean_bias = 0.0;
    double se_bias = 0.0;        // sd / sqrt(replicates)
    double variance = 0.0;       // empirical variance of beta_hat
    double mse_fitted = 0.0;     // mean over replicates of mean((fitted - E y)^2)
    int failures = 0;
    std::vector<double> beta_hats;    // replicate-level, NaN for failures
    std::vector<double> lambda_hats;
};

struct StudySummary {
    ScenarioSpec spec;
    std::vector<EstimatorSummary> estimators;
};

/// Draw from N(0, C), C_ij = exp(-h/kappa), via Cholesky with nugget.
Eigen::VectorXd sample_gp(const Eigen::MatrixXd& locations, double kappa, std::uint64_t seed);

/// Cached-factorization sampler for repeated draws at fixed locations.
class GpSampler {
public:
    GpSampler(const Eigen::MatrixXd& locations, double kappa);
    Eigen::VectorXd draw(std::mt19937_64& rng) const;

private:
    Eigen::MatrixXd chol_;
};

/// Low/high frequency fields: GCV spline fits of a GP draw with num_low and
/// num_high basis functions.
std::pair<Eigen::VectorXd, Eigen::VectorXd> make_frequency_fields(
    const Eigen::VectorXd& gp_draw, const Eigen::MatrixXd& locations,
    Eigen::Index num_low, Eigen::Index num_high);

/// Generates the replicate datasets of a scenario.
std::vector<Replicate> generate_scenario(const ScenarioSpec& spec);

/// Runs the full replicate study and summarises each estimator.
StudySummary run_study(const ScenarioSpec& spec, const std::vector<EstimatorSpec>& estimators);

}  // namespace spacon
