#include "spacon/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace spacon {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = strip(s);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && std::isfinite(out);
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

struct Standardizer {
    double mean = 0.0, sd = 1.0;
    explicit Standardizer(const Eigen::VectorXd& v) {
        mean = v.mean();
        const double var = (v.array() - mean).square().sum() / (v.size() - 1);
        sd = std::sqrt(std::max(var, 1e-300));
    }
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return (v.array() - mean) / sd; }
};

ReportRow make_row(int month, const std::string& model, const FitResult& fit,
                   double sd_x, double sd_y, Eigen::Index n) {
    ReportRow row;
    row.month = month;
    row.model = model;
    // Back-transform to the original scale; the Gaussian likelihood shifts by
    // n*log(sd_y) under rescaling of the response.
    row.beta = fit.beta_hat * sd_y / sd_x;
    row.p_value = fit.p_value;
    row.aic = fit.aic + 2.0 * static_cast<double>(n) * std::log(sd_y);
    row.rmse = std::sqrt(fit.residuals.squaredNorm() / static_cast<double>(n)) * sd_y;
    row.significant = fit.significant();
    return row;
}

}  // namespace

StationDataset ingest_csv(const std::string& path, const ColumnMap& map) {
    std::ifstream in(path);
    if (!in) throw ValidationError("ingest_csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("ingest_csv: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_csv_line(line);

    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (strip(header[i]) == name) return static_cast<int>(i);
        }
        throw ValidationError("ingest_csv: missing column '" + name + "'");
    };
    const int c_id = col(map.id), c_lon = col(map.longitude), c_lat = col(map.latitude);
    const int c_month = col(map.month), c_resp = col(map.response), c_cov = col(map.covariate);
    const int needed = std::max({c_id, c_lon, c_lat, c_month, c_resp, c_cov});

    StationDataset ds;
    std::set<std::pair<std::string, int>> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (strip(line).empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) <= needed) {
            throw ValidationError("ingest_csv: too few fields at line " + std::to_string(line_no));
        }
        StationRecord rec;
        rec.station_id = strip(fields[c_id]);
        double month_val = 0.0;
        const bool ok = parse_double(fields[c_lon], rec.longitude) &&
                        parse_double(fields[c_lat], rec.latitude) &&
                        parse_double(fields[c_month], month_val);
        if (!ok) throw ValidationError("ingest_csv: unparsable value at line " +
                                       std::to_string(line_no));
        rec.month = static_cast<int>(month_val);
        if (rec.month < 1 || rec.month > 12) {
            throw ValidationError("ingest_csv: month out of range at line " +
                                  std::to_string(line_no));
        }
        if (!parse_double(fields[c_resp], rec.response) ||
            !parse_double(fields[c_cov], rec.covariate)) {
            ++ds.dropped_rows;  // missing measurement, drop with count
            continue;
        }
        if (!seen.insert({rec.station_id, rec.month}).second) {
            throw ValidationError("ingest_csv: duplicate (station, month) at line " +
                                  std::to_string(line_no));
        }
        ds.records.push_back(rec);
    }
    return ds;
}

void export_csv(const StationDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("export_csv: cannot write '" + path + "'");
    out << "station_id,longitude,latitude,month,response,covariate\n";
    for (const StationRecord& r : dataset.records) {
        out << r.station_id << ',' << fmt("%.17g", r.longitude) << ',' << fmt("%.17g", r.latitude)
            << ',' << r.month << ',' << fmt("%.17g", r.response) << ','
            << fmt("%.17g", r.covariate) << '\n';
    }
}

Eigen::MatrixXd project_locations(const Eigen::VectorXd& longitude,
                                  const Eigen::VectorXd& latitude) {
    if (longitude.size() != latitude.size() || longitude.size() == 0) {
        throw ValidationError("project_locations: bad coordinate vectors");
    }
    const double lon0 = longitude.mean();
    const double lat0 = latitude.mean();
    const double deg = M_PI / 180.0;
    Eigen::MatrixXd xy(longitude.size(), 2);
    xy.col(0) = (longitude.array() - lon0) * std::cos(lat0 * deg);
    xy.col(1) = latitude.array() - lat0;
    const double span = std::max((xy.colwise().maxCoeff() - xy.colwise().minCoeff()).maxCoeff(),
                                 1e-12);
    xy.col(0) = (xy.col(0).array() - xy.col(0).minCoeff()) / span;
    xy.col(1) = (xy.col(1).array() - xy.col(1).minCoeff()) / span;
    return xy;
}

void validate_config(const AnalysisConfig& config) {
    if (config.cap_min < 1 || config.cap_max < config.cap_min) {
        throw ValidationError("config: invalid cap range");
    }
    if (config.cap_max >= config.basis_size) {
        throw ValidationError("config: cap range exceeds basis dimension");
    }
    if (config.window_length < 1 || config.window_start_min < 1 ||
        config.window_start_max < config.window_start_min) {
        throw ValidationError("config: invalid window settings");
    }
    if (config.basis_size < 4) throw ValidationError("config: basis_size too small");
    if (config.min_stations < 10) throw ValidationError("config: min_stations too small");
}

AnalysisReport monthly_analysis(const StationDataset& dataset, const AnalysisConfig& config) {
    validate_config(config);
    AnalysisReport report;
    for (int month = 1; month <= 12; ++month) {
        std::vector<const StationRecord*> recs;
        for (const StationRecord& r : dataset.records) {
            if (r.month == month) recs.push_back(&r);
        }
        if (recs.empty()) continue;
        MonthReport mr;
        mr.month = month;
        const Eigen::Index n = static_cast<Eigen::Index>(recs.size());
        if (n < config.min_stations) {
            mr.skipped = true;
            mr.notice = "skipped: only " + std::to_string(n) + " stations";
            report.months.push_back(std::move(mr));
            continue;
        }
        Eigen::VectorXd lon(n), lat(n), x(n), y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            lon[i] = recs[i]->longitude;
            lat[i] = recs[i]->latitude;
            x[i] = recs[i]->covariate;
            y[i] = recs[i]->response;
        }
        const Eigen::MatrixXd loc = project_locations(lon, lat);
        const Standardizer sx(x), sy(y);
        Eigen::VectorXd xs = x, ys = y;
        if (config.standardize) {
            xs = sx.apply(x);
            ys = sy.apply(y);
        }
        const double sd_x = config.standardize ? sx.sd : 1.0;
        const double sd_y = config.standardize ? sy.sd : 1.0;

        const Eigen::Index basis = std::min(config.basis_size, n);
        const SpatialDesign design = build_thin_plate(loc, basis);
        const SpectralDecomposition decomp = decompose(design, ModelParams{1.0, 1.0});

        if (config.run_nonspatial) {
            mr.rows.push_back(make_row(month, "non-spatial", fit_nonspatial(ys, xs), sd_x, sd_y, n));
        }
        if (config.run_spatial) {
            mr.rows.push_back(
                make_row(month, "spatial", select_lambda_gcv(ys, xs, decomp), sd_x, sd_y, n));
        }
        if (config.run_capped) {
            std::vector<CapSpec> caps;
            for (Eigen::Index k = config.cap_min; k <= config.cap_max; ++k) {
                caps.push_back({CapSpec::Mode::highest_k, k, 1});
            }
            const CapSweepResult sweep = cap_sweep(ys, xs, decomp, caps);
            double max_se = 0.0;
            int n_sig = 0;
            for (std::size_t i = 0; i < caps.size(); ++i) {
                if (!sweep.fits[i]) continue;
                mr.rows.push_back(make_row(month, "cap =" + std::to_string(caps[i].k),
                                           *sweep.fits[i], sd_x, sd_y, n));
                if (sweep.fits[i]->significant()) {
                    max_se = std::max(max_se, std::sqrt(sweep.fits[i]->beta_variance));
                    ++n_sig;
                }
            }
            mr.cap_stability = sweep.stability * sd_y / sd_x;
            // stable when all significant capped estimates agree within a few
            // standard errors of the least precise one
            mr.caps_stable = n_sig >= 2 && sweep.stability < 4.0 * max_se;
        }
        if (config.run_window) {
            for (Eigen::Index start = config.window_start_min; start <= config.window_start_max;
                 ++start) {
                const CapSpec spec{CapSpec::Mode::window, config.window_length, start};
                try {
                    const FitResult fit = capped_spatial_plus(ys, xs, decomp, spec);
                    mr.rows.push_back(make_row(month, "window start=" + std::to_string(start), fit,
                                               sd_x, sd_y, n));
                    if (fit.significant() && mr.first_significant_window_start < 0) {
                        mr.first_significant_window_start = static_cast<int>(start);
                    }
                } catch (const std::exception&) {
                    // window without covariate content; skip
                }
            }
        }
        report.months.push_back(std::move(mr));
    }
    return report;
}

std::string render_row(const ReportRow& row) {
    return std::to_string(row.month) + " & " + row.model + " & " + fmt("%.7f", row.beta) + " & " +
           fmt("%.7f", row.p_value) + " & " + fmt("%.4f", row.aic) + " & " +
           fmt("%.4f", row.rmse);
}

std::string render_report(const AnalysisReport& report) {
    std::string out = "month & model/cap & beta & p-value & AIC & RMSE\n";
    for (const MonthReport& mr : report.months) {
        if (mr.skipped) {
            out += std::to_string(mr.month) + " & " + mr.notice + "\n";
            continue;
        }
        for (const ReportRow& row : mr.rows) out += render_row(row) + "\n";
    }
    return out;
}

void emit_plot_data(const std::vector<PlotPoint>& points, const std::string& path,
                    const std::map<std::string, std::string>& manifest_config) {
    std::ofstream csv(path + ".csv", std::ios::binary);
    if (!csv) throw ValidationError("emit_plot_data: cannot write '" + path + ".csv'");
    csv << "series,x,y,group\n";
    for (const PlotPoint& pt : points) {
        csv << pt.series << ',' << fmt("%.17g", pt.x) << ',' << fmt("%.17g", pt.y) << ','
            << pt.group << '\n';
    }
    std::ofstream json(path + ".json", std::ios::binary);
    if (!json) throw ValidationError("emit_plot_data: cannot write '" + path + ".json'");
    json << "{\n  \"schema\": 1,\n  \"points\": " << points.size() << ",\n  \"config\": {";
    bool first = true;
    for (const auto& [key, value] : manifest_config) {
        json << (first ? "\n" : ",\n") << "    \"" << key << "\": \"" << value << "\"";
        first = false;
    }
    json << "\n  }\n}\n";
}

std::vector<PlotPoint> plot_points(const StudySummary& study) {
    std::vector<PlotPoint> out;
    for (const EstimatorSummary& est : study.estimators) {
        for (std::size_t r = 0; r < est.beta_hats.size(); ++r) {
            if (std::isnan(est.beta_hats[r])) continue;
            out.push_back({est.name, static_cast<double>(r), est.beta_hats[r], study.spec.name});
        }
    }
    return out;
}

std::vector<PlotPoint> plot_points(const std::vector<SweepPoint>& sweep) {
    std::vector<PlotPoint> out;
    for (const SweepPoint& pt : sweep) {
        out.push_back({"spatial", pt.lambda, pt.spatial_bias, "bias"});
        out.push_back({"nonspatial", pt.lambda, pt.nonspatial_bias, "bias"});
    }
    return out;
}

std::vector<PlotPoint> plot_points(const AnalysisReport& report) {
    std::vector<PlotPoint> out;
    for (const MonthReport& mr : report.months) {
        if (mr.skipped) continue;
        for (const ReportRow& row : mr.rows) {
            out.push_back({row.model, static_cast<double>(row.month), row.beta,
                           row.significant ? "significant" : "insignificant"});
        }
    }
    return out;
}

std::map<std::string, std::string> load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::string t = strip(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ValidationError("config: expected key = value: " + t);
        kv[strip(t.substr(0, eq))] = strip(t.substr(eq + 1));
    }
    return kv;
}

namespace {

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key,
                 double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    double v = 0.0;
    if (!parse_double(it->second, v)) throw ValidationError("config: bad number for " + key);
    return v;
}

long kv_long(const std::map<std::string, std::string>& kv, const std::string& key, long fallback) {
    return static_cast<long>(kv_double(kv, key, static_cast<double>(fallback)));
}

bool kv_bool(const std::map<std::string, std::string>& kv, const std::string& key, bool fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ValidationError("config: bad boolean for " + key);
}

}  // namespace

ScenarioSpec scenario_from_config(const std::map<std::string, std::string>& kv) {
    ScenarioSpec s;
    if (auto it = kv.find("scenario"); it != kv.end()) s.name = it->second;
    s.n = kv_long(kv, "n", s.n);
    s.kappa = kv_double(kv, "kappa", s.kappa);
    s.xi_x_low = kv_double(kv, "xi_x_low", s.xi_x_low);
    s.xi_x_high = kv_double(kv, "xi_x_high", s.xi_x_high);
    s.xi_z_low = kv_double(kv, "xi_z_low", s.xi_z_low);
    s.xi_z_high = kv_double(kv, "xi_z_high", s.xi_z_high);
    s.sigma_x = kv_double(kv, "sigma_x", s.sigma_x);
    s.sigma = kv_double(kv, "sigma", s.sigma);
    s.beta_true = kv_double(kv, "beta", s.beta_true);
    s.num_low_basis = kv_long(kv, "num_low_basis", s.num_low_basis);
    s.num_high_basis = kv_long(kv, "num_high_basis", s.num_high_basis);
    s.analysis_basis = kv_long(kv, "analysis_basis", s.analysis_basis);
    s.replicates = static_cast<int>(kv_long(kv, "replicates", s.replicates));
    s.seed = static_cast<std::uint64_t>(kv_long(kv, "seed", static_cast<long>(s.seed)));
    if (auto it = kv.find("cap_truth"); it != kv.end()) s.cap_truth = kv_long(kv, "cap_truth", 0);
    if (auto it = kv.find("amplitude_a"); it != kv.end()) {
        s.amplitude_a = kv_double(kv, "amplitude_a", 1.0);
    }
    s.resample_locations = kv_bool(kv, "resample_locations", s.resample_locations);
    s.truth_gp_direct = kv_bool(kv, "truth_gp_direct", s.truth_gp_direct);
    validate_spec(s);
    return s;
}

AnalysisConfig analysis_from_config(const std::map<std::string, std::string>& kv) {
    AnalysisConfig c;
    c.run_nonspatial = kv_bool(kv, "run_nonspatial", c.run_nonspatial);
    c.run_spatial = kv_bool(kv, "run_spatial", c.run_spatial);
    c.run_capped = kv_bool(kv, "run_capped", c.run_capped);
    c.run_window = kv_bool(kv, "run_window", c.run_window);
    c.cap_min = kv_long(kv, "cap_min", c.cap_min);
    c.cap_max = kv_long(kv, "cap_max", c.cap_max);
    c.window_length = kv_long(kv, "window_length", c.window_length);
    c.window_start_min = kv_long(kv, "window_start_min", c.window_start_min);
    c.window_start_max = kv_long(kv, "window_start_max", c.window_start_max);
    c.basis_size = kv_long(kv, "basis_size", c.basis_size);
    c.standardize = kv_bool(kv, "standardize", c.standardize);
    c.min_stations = kv_long(kv, "min_stations", c.min_stations);
    c.seed = static_cast<std::uint64_t>(kv_long(kv, "seed", static_cast<long>(c.seed)));
    if (auto it = kv.find("out_dir"); it != kv.end()) c.out_dir = it->second;
    validate_config(c);
    return c;
}

}  // namespace spacon
