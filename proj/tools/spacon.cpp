#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spacon/io.hpp"

namespace {

using namespace spacon;

std::string default_out_dir() {
    const char* env = std::getenv("SPACON_OUT_DIR");
    return env ? env : ".";
}

[[noreturn]] void fail(const std::string& code, const std::string& msg) {
    std::cerr << "ERROR " << code << ": " << msg << "\n";
    std::exit(1);
}

Eigen::VectorXd read_vector_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IO", "cannot open '" + path + "'");
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        char* end = nullptr;
        const double v = std::strtod(field.c_str(), &end);
        if (end == field.c_str()) {
            if (values.empty()) continue;  // header line
            fail("VALIDATION", "unparsable number in '" + path + "': " + field);
        }
        values.push_back(v);
    }
    if (values.empty()) fail("VALIDATION", "no numeric rows in '" + path + "'");
    return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IO", "cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string field;
        bool numeric = true;
        while (std::getline(ss, field, ',')) {
            char* end = nullptr;
            const double v = std::strtod(field.c_str(), &end);
            if (end == field.c_str()) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (rows.empty()) continue;  // header line
            fail("VALIDATION", "unparsable row in '" + path + "'");
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            fail("VALIDATION", "ragged rows in '" + path + "'");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) fail("VALIDATION", "no numeric rows in '" + path + "'");
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

/// Design description file: key = value with kind, locations/adjacency paths.
SpatialDesign load_design(const std::string& path) {
    const auto kv = load_config(path);
    const auto get = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) fail("VALIDATION", "design file missing key '" + key + "'");
        return it->second;
    };
    const std::string kind = get("kind");
    if (kind == "thin_plate") {
        return build_thin_plate(read_matrix_csv(get("locations")),
                                std::stol(get("num_basis")));
    }
    if (kind == "gp_exponential") {
        return build_gp_exponential(read_matrix_csv(get("locations")), std::stod(get("kappa")));
    }
    if (kind == "graph_laplacian") {
        return build_graph_laplacian(read_matrix_csv(get("adjacency")));
    }
    fail("VALIDATION", "unknown design kind '" + kind + "'");
}

std::vector<EstimatorSpec> estimators_from_config(const std::map<std::string, std::string>& kv) {
    std::string list = "nonspatial,spatial,spatial_plus";
    if (auto it = kv.find("estimators"); it != kv.end()) list = it->second;
    std::vector<EstimatorSpec> out;
    std::stringstream ss(list);
    std::string name;
    while (std::getline(ss, name, ',')) {
        EstimatorSpec e;
        if (name == "nonspatial") {
            e.kind = EstimatorSpec::Kind::nonspatial;
        } else if (name == "spatial") {
            e.kind = EstimatorSpec::Kind::spatial;
        } else if (name == "spatial_plus") {
            e.kind = EstimatorSpec::Kind::spatial_plus;
        } else if (name.rfind("cap=", 0) == 0) {
            e.kind = EstimatorSpec::Kind::capped;
            e.cap = CapSpec{CapSpec::Mode::highest_k, std::stol(name.substr(4)), 1};
        } else {
            fail("VALIDATION", "unknown estimator '" + name + "'");
        }
        out.push_back(e);
    }
    if (out.empty()) fail("VALIDATION", "empty estimator list");
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IO", "cannot write '" + path + "'");
    out << text;
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int run_simulate(const std::string& scenario, const std::string& config_path,
                 const std::string& out_dir) {
    auto kv = config_path.empty() ? std::map<std::string, std::string>{}
                                  : load_config(config_path);
    if (!scenario.empty()) kv["scenario"] = scenario;
    const ScenarioSpec spec = scenario_from_config(kv);
    const std::vector<EstimatorSpec> estimators = estimators_from_config(kv);
    const StudySummary study = run_study(spec, estimators);

    std::filesystem::create_directories(out_dir);
    std::string summary = "estimator,mean_bias,se_bias,variance,mse_fitted,failures\n";
    std::string reps = "estimator,replicate,beta_hat,lambda_hat\n";
    for (const EstimatorSummary& est : study.estimators) {
        summary += est.name + ',' + num(est.mean_bias) + ',' + num(est.se_bias) + ',' +
                   num(est.variance) + ',' + num(est.mse_fitted) + ',' +
                   std::to_string(est.failures) + '\n';
        for (std::size_t r = 0; r < est.beta_hats.size(); ++r) {
            reps += est.name + ',' + std::to_string(r) + ',' + num(est.beta_hats[r]) + ',' +
                    num(r < est.lambda_hats.size() ? est.lambda_hats[r] : 0.0) + '\n';
        }
    }
    write_text(out_dir + "/summary.csv", summary);
    write_text(out_dir + "/replicates.csv", reps);
    std::map<std::string, std::string> manifest = kv;
    manifest["scenario"] = spec.name;
    manifest["seed"] = std::to_string(spec.seed);
    emit_plot_data(plot_points(study), out_dir + "/study_points", manifest);
    std::cout << summary;
    return 0;
}

int run_analyze(const std::string& data_path, const std::string& config_path,
                const std::string& out_dir) {
    const auto kv = config_path.empty() ? std::map<std::string, std::string>{}
                                        : load_config(config_path);
    const AnalysisConfig config = analysis_from_config(kv);
    const StationDataset dataset = ingest_csv(data_path);
    if (dataset.dropped_rows > 0) {
        std::cerr << "note: dropped " << dataset.dropped_rows << " rows with missing values\n";
    }
    const AnalysisReport report = monthly_analysis(dataset, config);

    std::filesystem::create_directories(out_dir);
    const std::string table = render_report(report);
    write_text(out_dir + "/report.txt", table);
    std::map<std::string, std::string> manifest = kv;
    manifest["data"] = data_path;
    manifest["seed"] = std::to_string(config.seed);
    emit_plot_data(plot_points(report), out_dir + "/analysis_points", manifest);
    std::cout << table;
    return 0;
}

int run_bias(const std::string& design_path, const std::string& x_path,
             const std::string& z_path, double lambda, double sigma2) {
    const SpatialDesign design = load_design(design_path);
    const Eigen::VectorXd x = read_vector_csv(x_path);
    const Eigen::VectorXd z = read_vector_csv(z_path);
    if (x.size() != design.n() || z.size() != design.n()) {
        fail("VALIDATION", "x/z length does not match the design");
    }
    const SpectralDecomposition decomp = decompose(design, ModelParams{lambda, sigma2});
    const BiasReport report = bias_exact(x, z, decomp);
    std::cout << "bias," << num(report.bias) << "\n"
              << "correlation_term," << num(report.correlation_term) << "\n"
              << "relative_size_term," << num(report.relative_size_term) << "\n"
              << "nonspatial_bias," << num(bias_nonspatial(x, z)) << "\n";
    return 0;
}

int run_sweep_lambda(const std::string& design_path, const std::string& x_path,
                     const std::string& z_path, double sigma2, double lo, double hi,
                     int points, const std::string& out_dir) {
    if (points < 2 || lo <= 0 || hi <= lo) fail("VALIDATION", "bad lambda grid");
    const SpatialDesign design = load_design(design_path);
    const Eigen::VectorXd x = read_vector_csv(x_path);
    const Eigen::VectorXd z = read_vector_csv(z_path);
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) {
        grid[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1));
    }
    const std::vector<SweepPoint> sweep = bias_lambda_sweep(x, z, design, sigma2, grid);
    std::filesystem::create_directories(out_dir);
    std::string csv = "lambda,spatial_bias,nonspatial_bias\n";
    for (const SweepPoint& pt : sweep) {
        csv += num(pt.lambda) + ',' + num(pt.spatial_bias) + ',' + num(pt.nonspatial_bias) + '\n';
    }
    write_text(out_dir + "/lambda_sweep.csv", csv);
    emit_plot_data(plot_points(sweep), out_dir + "/lambda_sweep_points",
                   {{"design", design_path}, {"sigma2", num(sigma2)}});
    std::cout << csv;
    return 0;
}

int run_sweep_caps(const std::string& kind, const std::string& design_path,
                   const std::string& x_path, const std::string& y_path, Eigen::Index cap_min,
                   Eigen::Index cap_max, Eigen::Index window_length, const std::string& out_dir) {
    const SpatialDesign design = load_design(design_path);
    const Eigen::VectorXd x = read_vector_csv(x_path);
    const Eigen::VectorXd y = read_vector_csv(y_path);
    if (x.size() != design.n() || y.size() != design.n()) {
        fail("VALIDATION", "x/y length does not match the design");
    }
    const SpectralDecomposition decomp = decompose(design, ModelParams{1.0, 1.0});
    std::vector<CapSpec> caps;
    for (Eigen::Index v = cap_min; v <= cap_max; ++v) {
        if (kind == "cap") {
            caps.push_back({CapSpec::Mode::highest_k, v, 1});
        } else {
            caps.push_back({CapSpec::Mode::window, window_length, v});
        }
    }
    const CapSweepResult sweep = cap_sweep(y, x, decomp, caps);
    std::filesystem::create_directories(out_dir);
    std::string csv = "value,beta_hat,se,p_value,edf\n";
    for (std::size_t i = 0; i < caps.size(); ++i) {
        const Eigen::Index value = (kind == "cap") ? caps[i].k : caps[i].start;
        if (!sweep.fits[i]) {
            csv += std::to_string(value) + ",nan,nan,nan,nan\n";
            continue;
        }
        const FitResult& fit = *sweep.fits[i];
        csv += std::to_string(value) + ',' + num(fit.beta_hat) + ',' +
               num(std::sqrt(fit.beta_variance)) + ',' + num(fit.p_value) + ',' +
               num(fit.edf) + '\n';
    }
    write_text(out_dir + "/" + kind + "_sweep.csv", csv);
    std::cout << csv;
    std::cout << "stability," << num(sweep.stability) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral spatial-confounding toolkit"};
    app.require_subcommand(1);

    std::string scenario, config_path, data_path, design_path, x_path, z_path, y_path, kind;
    std::string out_dir = default_out_dir();
    double lambda = 1.0, sigma2 = 1.0, grid_lo = 1e-6, grid_hi = 1e6;
    int grid_points = 49;
    Eigen::Index cap_min = 5, cap_max = 15, window_length = 15;

    CLI::App* sim = app.add_subcommand("simulate", "Run a replicate study of a scenario");
    sim->add_option("--scenario", scenario, "Scenario name (S1,S2,S3a,S3b,S4,S5,capped)");
    sim->add_option("--config", config_path, "key = value config file");
    sim->add_option("--out", out_dir, "Output directory");

    CLI::App* ana = app.add_subcommand("analyze", "Monthly station-data analysis");
    ana->add_option("--data", data_path, "Station CSV")->required();
    ana->add_option("--config", config_path, "key = value config file");
    ana->add_option("--out", out_dir, "Output directory");

    CLI::App* bias = app.add_subcommand("bias", "Exact confounding bias for given x, z");
    bias->add_option("--design", design_path, "Design description file")->required();
    bias->add_option("--x", x_path, "Covariate CSV (single column)")->required();
    bias->add_option("--z", z_path, "Confounder CSV (single column)")->required();
    bias->add_option("--lambda", lambda, "Smoothing parameter");
    bias->add_option("--sigma2", sigma2, "Noise variance");

    CLI::App* sweep = app.add_subcommand("sweep", "Bias or estimate sweeps");
    sweep->add_option("--kind", kind, "lambda | cap | window")->required();
    sweep->add_option("--design", design_path, "Design description file")->required();
    sweep->add_option("--x", x_path, "Covariate CSV")->required();
    sweep->add_option("--z", z_path, "Confounder CSV (lambda kind)");
    sweep->add_option("--y", y_path, "Response CSV (cap/window kinds)");
    sweep->add_option("--sigma2", sigma2, "Noise variance (lambda kind)");
    sweep->add_option("--grid-min", grid_lo, "Smallest lambda");
    sweep->add_option("--grid-max", grid_hi, "Largest lambda");
    sweep->add_option("--grid-points", grid_points, "Grid size");
    sweep->add_option("--cap-min", cap_min, "First cap / window start");
    sweep->add_option("--cap-max", cap_max, "Last cap / window start");
    sweep->add_option("--window-length", window_length, "Window length");
    sweep->add_option("--out", out_dir, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return run_simulate(scenario, config_path, out_dir);
        if (ana->parsed()) return run_analyze(data_path, config_path, out_dir);
        if (bias->parsed()) return run_bias(design_path, x_path, z_path, lambda, sigma2);
        if (sweep->parsed()) {
            if (kind == "lambda") {
                if (z_path.empty()) fail("VALIDATION", "--z required for lambda sweeps");
                return run_sweep_lambda(design_path, x_path, z_path, sigma2, grid_lo, grid_hi,
                                        grid_points, out_dir);
            }
            if (kind == "cap" || kind == "window") {
                if (y_path.empty()) fail("VALIDATION", "--y required for cap/window sweeps");
                return run_sweep_caps(kind, design_path, x_path, y_path, cap_min, cap_max,
                                      window_length, out_dir);
            }
            fail("VALIDATION", "unknown sweep kind '" + kind + "'");
        }
    } catch (const ValidationError& e) {
        fail("VALIDATION", e.what());
    } catch (const NumericalError& e) {
        fail("NUMERICAL", e.what());
    } catch (const std::exception& e) {
        fail("INTERNAL", e.what());
    }
    return 0;
}
