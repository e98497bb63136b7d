#pragma once

#include "mnar/baselines.hpp"
#include "mnar/pipeline.hpp"
#include "mnar/simulate.hpp"

#include <array>
#include <functional>
#include <string>

namespace mnar {

// ---------------------------------------------------------------------------
// Metrics

// A_1 from Z_0 = Z_1, then A_t = Lambda W1 A_{t-1} + A_{t-1} W2 Gamma + X beta + B.
std::vector<Matrix> rolling_recover(const ModelParams& params_hat, const WeightedPanel& wp,
                                    const NetworkPair& nets, const Covariates& cov);

// sum over unobserved (A_hat - Y)^2 / sum over unobserved Y^2, with the
// complete responses `y_truth` supplied by the caller.
double test_error(const std::vector<Matrix>& a_hat, const std::vector<Matrix>& y_truth,
                  const std::vector<MaskMatrix>& mask);

// Running sums of squared errors; rmse() = sqrt(sum / count).
struct SquaredError {
  double sum = 0.0;
  double count = 0.0;

  void add(const Matrix& est, const Matrix& truth);
  void add(const Vector& est, const Vector& truth);
  void merge(const SquaredError& other) {
    sum += other.sum;
    count += other.count;
  }
  double rmse() const;
};

// ---------------------------------------------------------------------------
// Cross-validation

struct TuningPoint {
  double nu1 = 0.0;
  double nu2 = 0.0;
  double nu3 = 0.0;
  double nu4 = 0.0;
  double mix_alpha = 1.0;

  auto as_tuple() const { return std::tuple(nu1, nu2, nu3, nu4, mix_alpha); }
  bool operator==(const TuningPoint& o) const { return as_tuple() == o.as_tuple(); }
};

FitConfig apply_tuning(FitConfig base, const TuningPoint& tp);

enum class FoldScheme { Entry, TimeBlock };

struct CvPlan {
  int folds = 5;
  std::vector<double> nu1_grid{1e2, 1e3, 1e4};
  std::vector<double> nu2_grid{1e2, 1e3, 1e4};
  std::vector<double> nu3_grid{0.1, 1.0, 10.0};
  std::vector<double> nu4_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  std::vector<double> mix_alpha_grid{0.5, 0.8, 1.0};
  FoldScheme scheme = FoldScheme::Entry;
  std::uint64_t seed = 1;

  std::vector<TuningPoint> grid() const;
};

struct CvResult {
  TuningPoint best;
  double best_score = 0.0;
  std::vector<std::pair<TuningPoint, double>> scores;  // mean held-out RMSE per grid point
};

// Fold id (0..folds-1) for every observed entry, in (t, j, i) scan order.
std::vector<int> assign_folds(const PanelSeries& panel, const CvPlan& plan);

// Joint grid search: each fold is hidden in turn, the full two-step fit is
// rerun, and rolling recovery predictions are scored on the hidden entries.
// Ties go to the larger penalties.
CvResult cross_validate(const PanelSeries& panel, const NetworkPair& nets, const Covariates& cov,
                        const CvPlan& plan, const FitConfig& base);

// ---------------------------------------------------------------------------
// Monte-Carlo benchmark

enum class Method { SEP = 0, AVG = 1, SUM = 2, ORG = 3, ADJ = 4 };
inline constexpr std::array<const char*, 5> kMethodNames{"SEP", "AVG", "SUM", "ORG", "ADJ"};
inline constexpr std::array<const char*, 6> kMetricNames{"Lambda", "Gamma", "Beta(x100)", "B", "A", "Error"};

struct BenchmarkCell {
  Index n = 100;
  Index horizon = 30;
  Mechanism mechanism = Mechanism::MAR;
};

// Penalties for the benchmark: nu1 = nu2 = 1e4, nu3 = 100, nu4 = 10, alpha = 1.
// The step-1 objective is a raw sum over N2 (T - 1) terms, so the ridge has
// to be of that order to keep the rolling recursion stable at p near 0.2.
FitConfig benchmark_fit_config();

struct BenchmarkSpec {
  std::vector<BenchmarkCell> cells;
  int replications = 200;
  SimConfig sim;    // n1, n2, horizon, mechanism, seed are overridden per replication
  FitConfig fit = benchmark_fit_config();  // mechanism and debias_rounds are overridden per cell
  std::uint64_t seed = 1;
  int threads = 1;
  int debias_rounds = -1;  // negative: default by horizon
};

// Per-replication raw errors for one method.
struct MethodErrors {
  SquaredError lambda, gamma, beta, b, a;
  double test_error = 0.0;
};

struct ReplicationResult {
  bool ok = false;
  std::string failure;
  std::array<MethodErrors, 5> methods;
};

// Aggregate over replications. RMSEs pool squared errors across
// replications; test error is the replication mean. beta is reported x100.
struct MetricReport {
  double rmse_lambda = 0.0;
  double rmse_gamma = 0.0;
  double rmse_beta = 0.0;
  double rmse_b = 0.0;
  double rmse_a = 0.0;
  double test_error = 0.0;
  std::vector<double> test_errors;       // per replication
  std::vector<double> theta_rmse_reps;   // per replication, (lambda, gamma) pooled
};

struct CellResult {
  BenchmarkCell cell;
  int replications = 0;
  int failures = 0;
  std::array<MetricReport, 5> methods;
  std::vector<std::string> failure_messages;
};

struct BenchmarkTable {
  std::vector<CellResult> cells;
};

ReplicationResult run_replication(const BenchmarkSpec& spec, const BenchmarkCell& cell, std::uint64_t seed);

// Simulate, fit every method and score, for each cell and replication.
// Deterministic for a given spec regardless of `threads`.
BenchmarkTable run_benchmark(const BenchmarkSpec& spec,
                             const std::function<void(const std::string&)>& progress = {});

std::string render_table(const BenchmarkTable& table);
std::string table_to_csv(const BenchmarkTable& table);

// Metric row for the table: Lambda, Gamma, Beta(x100), B, A, Error.
double metric_value(const MetricReport& m, int row);

}  // namespace mnar
