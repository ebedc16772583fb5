#pragma once

#include <map>
#include <string>
#include <vector>

#include "spacon/bias.hpp"
#include "spacon/simulation.hpp"

namespace spacon {

struct StationRecord {
    std::string station_id;
    double longitude = 0.0;
    double latitude = 0.0;
    int month = 1;
    double response = 0.0;   // temperature, degrees C
    double covariate = 0.0;  // precipitation, units of 10 mm
};

struct StationDataset {
    std::vector<StationRecord> records;
    Eigen::Index dropped_rows = 0;  // rows discarded for missing values
};

/// Names of the CSV columns carrying each field.
struct ColumnMap {
    std::string id = "station_id";
    std::string longitude = "longitude";
    std::string latitude = "latitude";
    std::string month = "month";
    std::string response = "response";
    std::string covariate = "covariate";
};

StationDataset ingest_csv(const std::string& path, const ColumnMap& map = ColumnMap{});
void export_csv(const StationDataset& dataset, const std::string& path);

/// Local equirectangular projection about the centroid, rescaled to fit
/// the unit square.
Eigen::MatrixXd project_locations(const Eigen::VectorXd& longitude,
                                  const Eigen::VectorXd& latitude);

struct AnalysisConfig {
    bool run_nonspatial = true;
    bool run_spatial = true;
    bool run_capped = true;
    bool run_window = false;
    Eigen::Index cap_min = 5, cap_max = 15;
    Eigen::Index window_length = 15;
    Eigen::Index window_start_min = 1, window_start_max = 10;
    Eigen::Index basis_size = 150;
    bool standardize = true;
    Eigen::Index min_stations = 30;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
};

void validate_config(const AnalysisConfig& config);

struct ReportRow {
    int month = 0;
    std::string model;
    double beta = 0.0;
    double p_value = 1.0;
    double aic = 0.0;
    double rmse = 0.0;
    bool significant = false;
};

struct MonthReport {
    int month = 0;
    bool skipped = false;
    std::string notice;
    std::vector<ReportRow> rows;
    double cap_stability = 0.0;     // max gap among significant capped estimates
    bool caps_stable = false;
    int first_significant_window_start = -1;
};

struct AnalysisReport {
    std::vector<MonthReport> months;
};

/// Fits the configured models independently per month on standardized
/// variables and back-transforms the coefficients.
AnalysisReport monthly_analysis(const StationDataset& dataset, const AnalysisConfig& config);

/// "1 & spatial & -0.3885536 & 0.0000000 & 650.9834 & 0.1441"
std::string render_row(const ReportRow& row);
std::string render_report(const AnalysisReport& report);

/// Tidy long-format series point for plot-data files.
struct PlotPoint {
    std::string series;
    double x = 0.0;
    double y = 0.0;
    std::string group;
};

/// Writes <path>.csv (series,x,y,group) and <path>.json (manifest).
void emit_plot_data(const std::vector<PlotPoint>& points, const std::string& path,
                    const std::map<std::string, std::string>& manifest_config);

std::vector<PlotPoint> plot_points(const StudySummary& study);
std::vector<PlotPoint> plot_points(const std::vector<SweepPoint>& sweep);
std::vector<PlotPoint> plot_points(const AnalysisReport& report);

/// Flat `key = value` config file (# comments, blank lines ignored).
std::map<std::string, std::string> load_config(const std::string& path);

ScenarioSpec scenario_from_config(const std::map<std::string, std::string>& kv);
AnalysisConfig analysis_from_config(const std::map<std::string, std::string>& kv);

}  // namespace spacon
