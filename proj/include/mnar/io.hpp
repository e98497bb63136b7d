#pragma once

#include "mnar/eval.hpp"

#include <filesystem>
#include <string>

namespace mnar {

namespace fs = std::filesystem;

// Shortest decimal that parses back to the same double; "nan", "inf", "-inf"
// for non-finite values.
std::string format_double(double v);
double parse_double(const std::string& s);

// Dense CSV, one matrix row per line, no header.
void write_matrix_csv(const fs::path& path, const Matrix& m);
Matrix read_matrix_csv(const fs::path& path);

// Long panel format: header t,i,j,observed,value with 0-based indices. The
// value field is empty on unobserved entries.
void write_panel_csv(const fs::path& path, const PanelSeries& panel);
// Dimensions come from the largest indices present; absent rows count as
// unobserved. Duplicated (t, i, j) keys are rejected.
PanelSeries read_panel_csv(const fs::path& path);

// Complete responses in long format t,i,j,value.
void write_series_csv(const fs::path& path, const std::vector<Matrix>& series);
std::vector<Matrix> read_series_csv(const fs::path& path);

// Edge list src,dst for each nonzero a(src, dst).
void write_edge_list(const fs::path& path, const Matrix& a);
Matrix read_edge_list(const fs::path& path, Index n);

// Covariates with header x0,...,x{p-1}.
void write_covariates_csv(const fs::path& path, const Covariates& cov);
Covariates read_covariates_csv(const fs::path& path);

// File names used inside a data directory.
inline constexpr const char* kPanelFile = "panel.csv";
inline constexpr const char* kRowNetworkFile = "row_network.csv";
inline constexpr const char* kColNetworkFile = "col_network.csv";
inline constexpr const char* kCovariatesFile = "covariates.csv";
inline constexpr const char* kTruthFile = "truth.json";
inline constexpr const char* kTruthBFile = "truth_b.csv";
inline constexpr const char* kTruthYFile = "truth_y.csv";
inline constexpr const char* kFitFile = "fit.json";

struct Dataset {
  PanelSeries panel;
  NetworkPair nets;
  Covariates cov;
};

// panel.csv, the two edge lists, covariates.csv, truth.json (lambda, gamma,
// beta, B factors), truth_b.csv and truth_y.csv.
void write_simulation(const fs::path& dir, const SimulatedData& data);
Dataset read_dataset(const fs::path& dir);

// Parameters as stored in truth.json / fit.json.
ModelParams read_truth(const fs::path& dir);

struct FitTimings {
  double missing_ms = 0.0;
  double total_ms = 0.0;
};

// fit.json plus dense sidecars b_org.csv and b_adj.csv next to it.
void write_fit(const fs::path& dir, const MnarFit& fit, const FitConfig& cfg, const FitTimings& timings);

struct StoredFit {
  ModelParams org;
  ModelParams adj;
  MissingModel missing;
};
StoredFit read_fit(const fs::path& dir);

// Configuration file: JSON object with optional blocks "sim", "fit"
// (mechanism, debias_rounds), "step1", "step2", "cv" and "benchmark".
// Unknown keys are rejected.
struct RunConfig {
  SimConfig sim;
  FitConfig fit;
  CvPlan cv;
  BenchmarkSpec bench;
  std::uint64_t seed = 1;
  int threads = 1;
};

RunConfig default_run_config();
RunConfig load_run_config(const fs::path& path);

}  // namespace mnar
