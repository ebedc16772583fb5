#include "spacon/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spacon/bias.hpp"
#include "spacon/rng.hpp"

namespace spacon {

namespace {

constexpr std::uint64_t kLocationStream = 0x4c4f434154ULL;

Eigen::MatrixXd uniform_locations(Eigen::Index n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd loc(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        loc(i, 0) = unif(rng);
        loc(i, 1) = unif(rng);
    }
    return loc;
}

Eigen::VectorXd normals(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
}

Eigen::VectorXd band_field(const SpectralDecomposition& decomp, const Eigen::VectorXd& xi_sp,
                           Eigen::Index from, Eigen::Index to) {  // [from, to)
    Eigen::VectorXd out = Eigen::VectorXd::Zero(decomp.n());
    if (to > from) {
        out = decomp.spatial_basis().middleCols(from, to - from) * xi_sp.segment(from, to - from);
    }
    return out;
}

struct ReplicateContext {
    Replicate rep;
    std::shared_ptr<const SpectralDecomposition> analysis;
};

class ScenarioEngine {
public:
    explicit ScenarioEngine(const ScenarioSpec& spec) : spec_(spec) {
        validate_spec(spec);
        if (!spec_.resample_locations) {
            auto rng = stream_rng(spec_.seed, kLocationStream);
            fixed_.locations = uniform_locations(spec_.n, rng);
            prepare(fixed_, fixed_.locations);
        }
    }

    ReplicateContext make(int replicate_index) {
        auto rng = stream_rng(spec_.seed, static_cast<std::uint64_t>(replicate_index));
        Cache local;
        Cache* cache = &fixed_;
        if (spec_.resample_locations) {
            local.locations = uniform_locations(spec_.n, rng);
            prepare(local, local.locations);
            cache = &local;
        }
        return build(*cache, rng);
    }

private:
    struct Cache {
        Eigen::MatrixXd locations;
        std::shared_ptr<GpSampler> gp;
        std::shared_ptr<SpectralDecomposition> low;       // generation, num_low_basis
        std::shared_ptr<SpectralDecomposition> high;      // generation, num_high_basis
        std::shared_ptr<SpectralDecomposition> analysis;  // analysis model
    };

    bool full_rank_scenario() const {
        return spec_.name == "S3a" || spec_.name == "S3b" || spec_.name == "capped";
    }

    void prepare(Cache& c, const Eigen::MatrixXd& loc) {
        const ModelParams unit{1.0, 1.0};
        c.gp = std::make_shared<GpSampler>(loc, spec_.kappa);
        if (full_rank_scenario()) {
            c.analysis = std::make_shared<SpectralDecomposition>(
                decompose(build_thin_plate(loc, spec_.n), unit));
        } else {
            if (!spec_.truth_gp_direct) {
                c.low = std::make_shared<SpectralDecomposition>(
                    decompose(build_thin_plate(loc, spec_.num_low_basis), unit));
                c.high = std::make_shared<SpectralDecomposition>(
                    decompose(build_thin_plate(loc, spec_.num_high_basis), unit));
            }
            c.analysis = std::make_shared<SpectralDecomposition>(
                decompose(build_thin_plate(loc, spec_.analysis_basis), unit));
        }
    }

    ReplicateContext build(const Cache& c, std::mt19937_64& rng) {
        const Eigen::Index n = spec_.n;
        ReplicateContext ctx;
        ctx.rep.locations = c.locations;
        ctx.analysis = c.analysis;

        Eigen::VectorXd zx;
        if (spec_.name == "capped") {
            const SpectralDecomposition& d = *c.analysis;
            const Eigen::Index p = d.p();
            const Eigen::Index k = spec_.cap_truth.value();
            const Eigen::Index n_low = std::min(spec_.num_low_basis, p - k);
            const double a = spec_.amplitude_a.value_or(1.0);
            const FrequencyCoordinates xi1 = coordinates(d, c.gp->draw(rng));
            const FrequencyCoordinates xi2 = coordinates(d, c.gp->draw(rng));
            const Eigen::VectorXd medium = band_field(d, xi1.spatial, n_low, p - k);
            ctx.rep.x = band_field(d, xi1.spatial, 0, n_low) + medium +
                        a * band_field(d, xi1.spatial, p - k, p);
            ctx.rep.z = band_field(d, xi2.spatial, 0, n_low) + medium;
        } else if (spec_.name == "S3a" || spec_.name == "S3b") {
            const SpectralDecomposition& d = *c.analysis;
            const Eigen::Index p = d.p();
            const Eigen::Index n_high = std::min<Eigen::Index>(75, p);
            const FrequencyCoordinates xi = coordinates(d, c.gp->draw(rng));
            const Eigen::VectorXd z_low = band_field(d, xi.spatial, 0, p - n_high);
            const Eigen::VectorXd z_high = band_field(d, xi.spatial, p - n_high, p);
            ctx.rep.z = spec_.xi_z_low * z_low + spec_.xi_z_high * z_high;
            zx = spec_.xi_x_low * z_low + spec_.xi_x_high * z_high;
            ctx.rep.x = zx + spec_.sigma_x * normals(n, rng);
        } else {
            Eigen::VectorXd z_low, z_high;
            if (spec_.truth_gp_direct) {
                z_low = c.gp->draw(rng);
                z_high = c.gp->draw(rng);
            } else {
                const Eigen::VectorXd gamma = c.gp->draw(rng);
                z_low = smooth_gcv(gamma, *c.low);
                z_high = smooth_gcv(gamma, *c.high);
            }
            ctx.rep.z = spec_.xi_z_low * z_low + spec_.xi_z_high * z_high;
            zx = spec_.xi_x_low * z_low + spec_.xi_x_high * z_high;
            ctx.rep.x = zx + spec_.sigma_x * normals(n, rng);
        }
        ctx.rep.expected_y = spec_.beta_true * ctx.rep.x + ctx.rep.z;
        ctx.rep.y = ctx.rep.expected_y + spec_.sigma * normals(n, rng);
        return ctx;
    }

    ScenarioSpec spec_;
    Cache fixed_;
};

}  // namespace

void validate_spec(const ScenarioSpec& spec) {
    static const std::vector<std::string> names{"S1", "S2", "S3a", "S3b", "S4", "S5", "capped"};
    if (std::find(names.begin(), names.end(), spec.name) == names.end()) {
        throw ValidationError("scenario: unknown name '" + spec.name + "'");
    }
    if (spec.n < 10) throw ValidationError("scenario: n too small");
    if (!(spec.kappa > 0.0)) throw ValidationError("scenario: kappa must be positive");
    if (!(spec.sigma > 0.0)) throw ValidationError("scenario: sigma must be positive");
    if (spec.sigma_x < 0.0) throw ValidationError("scenario: sigma_x must be nonnegative");
    if (spec.replicates < 1) throw ValidationError("scenario: replicates must be >= 1");
    if (spec.name == "capped") {
        if (!spec.cap_truth || *spec.cap_truth < 1) {
            throw ValidationError("scenario: capped requires cap_truth >= 1");
        }
        if (spec.amplitude_a && !(*spec.amplitude_a > 0.0)) {
            throw ValidationError("scenario: amplitude_a must be positive");
        }
    }
}

std::string EstimatorSpec::label() const {
    switch (kind) {
        case Kind::nonspatial: return "nonspatial";
        case Kind::spatial: return "spatial";
        case Kind::spatial_plus: return "spatial_plus";
        case Kind::capped: {
            switch (cap.mode) {
                case CapSpec::Mode::highest_k: return "capped_k" + std::to_string(cap.k);
                case CapSpec::Mode::lowest_k: return "capped_low_k" + std::to_string(cap.k);
                case CapSpec::Mode::window:
                    return "window_s" + std::to_string(cap.start) + "_k" + std::to_string(cap.k);
            }
        }
    }
    return "unknown";
}

GpSampler::GpSampler(const Eigen::MatrixXd& locations, double kappa) {
    if (!(kappa > 0.0)) throw ValidationError("GpSampler: kappa must be positive");
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
    Eigen::LLT<Eigen::MatrixXd> llt(cov + 1e-10 * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() != Eigen::Success) {
        llt.compute(cov + 1e-6 * Eigen::MatrixXd::Identity(n, n));
        if (llt.info() != Eigen::Success) {
            throw NumericalError("GpSampler: covariance factorization failed");
        }
    }
    chol_ = llt.matrixL();
}

Eigen::VectorXd GpSampler::draw(std::mt19937_64& rng) const {
    return chol_ * normals(chol_.rows(), rng);
}

Eigen::VectorXd sample_gp(const Eigen::MatrixXd& locations, double kappa, std::uint64_t seed) {
    auto rng = stream_rng(seed, 0);
    return GpSampler(locations, kappa).draw(rng);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> make_frequency_fields(
    const Eigen::VectorXd& gp_draw, const Eigen::MatrixXd& locations,
    Eigen::Index num_low, Eigen::Index num_high) {
    if (num_low > num_high) {
        throw ValidationError("make_frequency_fields: num_low must be <= num_high");
    }
    const ModelParams unit{1.0, 1.0};
    const auto low = decompose(build_thin_plate(locations, num_low), unit);
    const Eigen::VectorXd z_low = smooth_gcv(gp_draw, low);
    if (num_low == num_high) return {z_low, z_low};
    const auto high = decompose(build_thin_plate(locations, num_high), unit);
    return {z_low, smooth_gcv(gp_draw, high)};
}

std::vector<Replicate> generate_scenario(const ScenarioSpec& spec) {
    ScenarioEngine engine(spec);
    std::vector<Replicate> out;
    out.reserve(static_cast<std::size_t>(spec.replicates));
    for (int r = 0; r < spec.replicates; ++r) out.push_back(engine.make(r).rep);
    return out;
}

StudySummary run_study(const ScenarioSpec& spec, const std::vector<EstimatorSpec>& estimators) {
    if (estimators.empty()) throw ValidationError("run_study: no estimators");
    ScenarioEngine engine(spec);

    StudySummary summary;
    summary.spec = spec;
    summary.estimators.resize(estimators.size());
    for (std::size_t e = 0; e < estimators.size(); ++e) {
        summary.estimators[e].name = estimators[e].label();
    }

    std::vector<std::vector<double>> mse(estimators.size());
    for (int r = 0; r < spec.replicates; ++r) {
        const ReplicateContext ctx = engine.make(r);
        for (std::size_t e = 0; e < estimators.size(); ++e) {
            EstimatorSummary& s = summary.estimators[e];
            try {
                FitResult fit;
                switch (estimators[e].kind) {
                    case EstimatorSpec::Kind::nonspatial:
                        fit = fit_nonspatial(ctx.rep.y, ctx.rep.x);
                        break;
                    case EstimatorSpec::Kind::spatial:
                        fit = select_lambda_gcv(ctx.rep.y, ctx.rep.x, *ctx.analysis);
                        break;
                    case EstimatorSpec::Kind::spatial_plus:
                        fit = spatial_plus(ctx.rep.y, ctx.rep.x, *ctx.analysis);
                        break;
                    case EstimatorSpec::Kind::capped:
                        fit = capped_spatial_plus(ctx.rep.y, ctx.rep.x, *ctx.analysis,
                                                  estimators[e].cap);
                        break;
                }
                s.beta_hats.push_back(fit.beta_hat);
                s.lambda_hats.push_back(fit.lambda_hat);
                mse[e].push_back((fit.fitted - ctx.rep.expected_y).squaredNorm() /
                                 static_cast<double>(spec.n));
            } catch (const std::exception&) {
                s.beta_hats.push_back(std::numeric_limits<double>::quiet_NaN());
                s.lambda_hats.push_back(std::numeric_limits<double>::quiet_NaN());
                ++s.failures;
            }
        }
    }

    for (std::size_t e = 0; e < estimators.size(); ++e) {
        EstimatorSummary& s = summary.estimators[e];
        double sum = 0.0, sum2 = 0.0;
        int count = 0;
        for (double b : s.beta_hats) {
            if (std::isnan(b)) continue;
            sum += b - spec.beta_true;
            sum2 += (b - spec.beta_true) * (b - spec.beta_true);
            ++count;
        }
        if (count > 0) {
            s.mean_bias = sum / count;
            const double var = (count > 1) ? (sum2 - sum * sum / count) / (count - 1) : 0.0;
            s.variance = std::max(var, 0.0);
            s.se_bias = std::sqrt(s.variance / count);
            double m = 0.0;
            for (double v : mse[e]) m += v;
            s.mse_fitted = m / count;
        }
    }
    return summary;
}

}  // namespace spacon
