#include "mnar/eval.hpp"

#include "mnar/io.hpp"
#include "mnar/log.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace mnar {

namespace {

constexpr const char* kModule = "eval_tuning";

// Larger penalties win ties.
bool better(double score, const TuningPoint& tp, double best_score, const TuningPoint& best) {
  const double slack = 1e-12 * std::max(1.0, std::abs(best_score));
  if (score < best_score - slack) return true;
  if (score > best_score + slack) return false;
  return tp.as_tuple() > best.as_tuple();
}

}  // namespace

std::vector<Matrix> rolling_recover(const ModelParams& params_hat, const WeightedPanel& wp,
                                    const NetworkPair& nets, const Covariates& cov) {
  const Index T = wp.horizon();
  if (T < 1) throw ShapeError(kModule, "rolling recovery needs at least one period");
  check_shapes(params_hat, nets, cov);
  const Matrix offset = cov.x * params_hat.beta + params_hat.intercept_b;
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(T));
  const Matrix* prev = &wp.z.front();  // Z_0 = Z_1
  for (Index t = 0; t < T; ++t) {
    Matrix a = network_operator(*prev, params_hat.lambda, params_hat.gamma, nets);
    a += offset;
    out.push_back(std::move(a));
    prev = &out.back();
  }
  return out;
}

double test_error(const std::vector<Matrix>& a_hat, const std::vector<Matrix>& y_truth,
                  const std::vector<MaskMatrix>& mask) {
  if (a_hat.size() != y_truth.size() || a_hat.size() != mask.size()) {
    throw ShapeError(kModule, "test error inputs differ in length");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t < a_hat.size(); ++t) {
    const auto hidden = (mask[t].array() == 0).cast<double>();
    num += (hidden * (a_hat[t] - y_truth[t]).array().square()).sum();
    den += (hidden * y_truth[t].array().square()).sum();
  }
  if (!(den > 0.0)) throw NumericError(kModule, "test error undefined: no unobserved signal");
  return num / den;
}

void SquaredError::add(const Matrix& est, const Matrix& truth) {
  sum += (est - truth).squaredNorm();
  count += static_cast<double>(truth.size());
}

void SquaredError::add(const Vector& est, const Vector& truth) {
  sum += (est - truth).squaredNorm();
  count += static_cast<double>(truth.size());
}

double SquaredError::rmse() const {
  return count > 0 ? std::sqrt(sum / count) : std::numeric_limits<double>::quiet_NaN();
}

FitConfig benchmark_fit_config() {
  FitConfig cfg;
  cfg.step1.nu1 = 1e4;
  cfg.step1.nu2 = 1e4;
  cfg.step2.nu3 = 100.0;
  cfg.step2.nu4 = 10.0;
  cfg.step2.mix_alpha = 1.0;
  return cfg;
}

FitConfig apply_tuning(FitConfig base, const TuningPoint& tp) {
  base.step1.nu1 = tp.nu1;
  base.step1.nu2 = tp.nu2;
  base.step2.nu3 = tp.nu3;
  base.step2.nu4 = tp.nu4;
  base.step2.mix_alpha = tp.mix_alpha;
  return base;
}

std::vector<TuningPoint> CvPlan::grid() const {
  std::vector<TuningPoint> g;
  for (double a : nu1_grid)
    for (double b : nu2_grid)
      for (double c : nu3_grid)
        for (double d : nu4_grid)
          for (double e : mix_alpha_grid) g.push_back({a, b, c, d, e});
  return g;
}

std::vector<int> assign_folds(const PanelSeries& panel, const CvPlan& plan) {
  if (plan.folds < 2) throw ConfigError(kModule, "cross-validation needs at least 2 folds");
  const Index count = panel.observed_count();
  if (count < plan.folds) throw ConfigError(kModule, "fewer observed entries than folds");
  std::vector<int> fold(static_cast<std::size_t>(count));
  if (plan.scheme == FoldScheme::TimeBlock) {
    std::size_t k = 0;
    const Index T = panel.horizon();
    for (Index t = 0; t < T; ++t) {
      const int f = static_cast<int>((t * plan.folds) / T);
      for (Index j = 0; j < panel.n2(); ++j)
        for (Index i = 0; i < panel.n1(); ++i)
          if (panel.observed(t, i, j)) fold[k++] = f;
    }
    return fold;
  }
  for (std::size_t k = 0; k < fold.size(); ++k) fold[k] = static_cast<int>(k % static_cast<std::size_t>(plan.folds));
  Rng rng(plan.seed);
  std::shuffle(fold.begin(), fold.end(), rng);
  return fold;
}

CvResult cross_validate(const PanelSeries& panel, const NetworkPair& nets, const Covariates& cov,
                        const CvPlan& plan, const FitConfig& base) {
  const std::vector<TuningPoint> grid = plan.grid();
  if (grid.empty()) throw ConfigError(kModule, "empty tuning grid");
  if (panel.observed_count() < static_cast<Index>(plan.folds) * 50) {
    throw ConfigError(kModule, "cross-validation needs at least 50 observed entries per fold");
  }
  const std::vector<int> fold = assign_folds(panel, plan);
  const Index T = panel.horizon();
  const std::size_t n_s2 = plan.nu3_grid.size() * plan.nu4_grid.size() * plan.mix_alpha_grid.size();

  std::vector<double> total(grid.size(), 0.0);
  for (int f = 0; f < plan.folds; ++f) {
    std::vector<MaskMatrix> train = panel.masks();
    std::vector<MaskMatrix> held(static_cast<std::size_t>(T));
    std::size_t k = 0;
    for (Index t = 0; t < T; ++t) {
      auto& h = held[static_cast<std::size_t>(t)];
      h = MaskMatrix::Zero(panel.n1(), panel.n2());
      for (Index j = 0; j < panel.n2(); ++j)
        for (Index i = 0; i < panel.n1(); ++i)
          if (panel.observed(t, i, j) && fold[k++] == f) {
            train[static_cast<std::size_t>(t)](i, j) = 0;
            h(i, j) = 1;
          }
    }
    const PanelSeries train_panel = panel.with_mask(std::move(train));

    auto score = [&](const ModelParams& params, const WeightedPanel& wp) {
      const std::vector<Matrix> a_hat = rolling_recover(params, wp, nets, cov);
      double sse = 0.0;
      double n = 0.0;
      for (Index t = 0; t < T; ++t) {
        const auto& h = held[static_cast<std::size_t>(t)];
        const auto hidden = h.cast<double>().array();
        sse += (hidden * (a_hat[static_cast<std::size_t>(t)] - panel.observed_values(t)).array().square()).sum();
        n += hidden.sum();
      }
      return std::sqrt(sse / n);
    };

    std::optional<WeightedPanel> wp;
    MissingModel mm;
    try {
      mm = fit_missing_model(base.mechanism, train_panel, cov);
      wp = build_weighted_panel(train_panel, mm);
    } catch (const Error& e) {
      log::warn("cv fold {} unusable: {}", f, e.what());
    }

    std::size_t g = 0;
    for (double nu1 : plan.nu1_grid) {
      for (double nu2 : plan.nu2_grid) {
        // Step 1 and debiasing depend only on (nu1, nu2); step 2 runs per
        // (nu3, nu4, alpha) on the shared residual mean.
        std::optional<Matrix> resid_mean;
        Vector lambda;
        Vector gamma;
        if (wp) {
          try {
            FitConfig cfg = apply_tuning(base, grid[g]);
            const Step1Problem prob(*wp, nets, cfg.step1);
            const Step1Fit s1 = fit_step1(prob);
            const int rounds = cfg.debias_rounds < 0 ? default_debias_rounds(T) : cfg.debias_rounds;
            lambda = s1.lambda_hat;
            gamma = s1.gamma_hat;
            if (rounds > 0) {
              const BiasState bias = debias_rounds(s1, *wp, nets, prob, rounds);
              lambda = bias.lambda;
              gamma = bias.gamma;
            }
            resid_mean = time_average(residual_panel(*wp, nets, lambda, gamma));
          } catch (const Error& e) {
            log::debug("cv step 1 failed at nu1={} nu2={}: {}", nu1, nu2, e.what());
          }
        }
        for (std::size_t s = 0; s < n_s2; ++s, ++g) {
          double value = std::numeric_limits<double>::infinity();
          if (resid_mean) {
            try {
              const FitConfig cfg = apply_tuning(base, grid[g]);
              const Step2Fit s2 = fit_step2_from_mean(*resid_mean, cov, cfg.step2);
              ModelParams params{lambda, gamma, s2.beta_hat, s2.b_hat, s2.b_rank_hat};
              value = score(params, *wp);
            } catch (const Error& e) {
              log::debug("cv step 2 failed: {}", e.what());
            }
          }
          total[g] += value / static_cast<double>(plan.folds);
        }
      }
    }
  }

  CvResult res;
  res.best = grid.front();
  res.best_score = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    res.scores.emplace_back(grid[g], total[g]);
    if (!std::isfinite(total[g])) continue;
    if (!found || better(total[g], grid[g], res.best_score, res.best)) {
      res.best = grid[g];
      res.best_score = total[g];
      found = true;
    }
  }
  if (!found) throw NumericError(kModule, "every tuning point failed during cross-validation");
  return res;
}

ReplicationResult run_replication(const BenchmarkSpec& spec, const BenchmarkCell& cell, std::uint64_t seed) {
  ReplicationResult res;
  try {
    SimConfig sim = spec.sim;
    sim.n1 = cell.n;
    sim.n2 = cell.n;
    sim.horizon = cell.horizon;
    sim.mechanism = cell.mechanism;
    sim.seed = seed;
    const SimulatedData data = simulate(sim);

    FitConfig fit_cfg = spec.fit;
    fit_cfg.mechanism = cell.mechanism;
    fit_cfg.debias_rounds = spec.debias_rounds;
    const MissingModel mm = fit_missing_model(cell.mechanism, data.panel, data.cov);
    const WeightedPanel wp = build_weighted_panel(data.panel, mm);
    const MnarFit fit = fit_mnar(wp, mm, data.nets, data.cov, fit_cfg);
    const ModelParams& truth = data.truth;
    const auto& masks = data.panel.masks();

    auto score_mnar = [&](const ModelParams& est, MethodErrors& m) {
      m.lambda.add(est.lambda, truth.lambda);
      m.gamma.add(est.gamma, truth.gamma);
      m.beta.add(Matrix(100.0 * est.beta), Matrix(100.0 * truth.beta));
      m.b.add(est.intercept_b, truth.intercept_b);
      const std::vector<Matrix> a_hat = rolling_recover(est, wp, data.nets, data.cov);
      for (std::size_t t = 0; t < a_hat.size(); ++t) m.a.add(a_hat[t], data.cond_mean[t]);
      m.test_error = test_error(a_hat, data.y_full, masks);
    };
    score_mnar(fit.org, res.methods[static_cast<int>(Method::ORG)]);
    score_mnar(fit.adj, res.methods[static_cast<int>(Method::ADJ)]);

    auto score_static = [&](const std::vector<SvtEstimate>& per_time, MethodErrors& m) {
      std::vector<Matrix> a_hat;
      a_hat.reserve(data.cond_mean.size());
      for (std::size_t t = 0; t < data.cond_mean.size(); ++t) {
        const SvtEstimate& est = per_time.size() == 1 ? per_time.front() : per_time[t];
        if (per_time.size() > 1 || t == 0) {
          m.beta.add(Matrix(100.0 * est.beta), Matrix(100.0 * truth.beta));
          m.b.add(est.b, truth.intercept_b);
        }
        a_hat.push_back(est.fitted(data.cov));
        m.a.add(a_hat.back(), data.cond_mean[t]);
      }
      m.test_error = test_error(a_hat, data.y_full, masks);
    };
    const std::vector<SvtEstimate> sep = svt_sep(wp, data.cov, fit_cfg.step2);
    score_static(sep, res.methods[static_cast<int>(Method::SEP)]);
    score_static({svt_avg(sep)}, res.methods[static_cast<int>(Method::AVG)]);
    score_static({svt_sum(wp, data.cov, fit_cfg.step2)}, res.methods[static_cast<int>(Method::SUM)]);
    res.ok = true;
  } catch (const Error& e) {
    res.failure = e.what();
  }
  return res;
}

BenchmarkTable run_benchmark(const BenchmarkSpec& spec, const std::function<void(const std::string&)>& progress) {
  if (spec.replications < 1) throw ConfigError(kModule, "replications must be at least 1");
  if (spec.cells.empty()) throw ConfigError(kModule, "benchmark has no cells");
  const std::size_t reps = static_cast<std::size_t>(spec.replications);
  const std::size_t tasks = spec.cells.size() * reps;
  std::vector<ReplicationResult> results(tasks);

  std::atomic<std::size_t> next{0};
  std::mutex progress_mu;
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks; k = next++) {
      const std::size_t c = k / reps;
      const std::size_t r = k % reps;
      const std::uint64_t seed = derive_seed(derive_seed(spec.seed, c), r);
      results[k] = run_replication(spec, spec.cells[c], seed);
      if (progress) {
        std::lock_guard lock(progress_mu);
        progress("cell " + std::to_string(c + 1) + "/" + std::to_string(spec.cells.size()) + " rep " +
                 std::to_string(r + 1) + "/" + std::to_string(reps) + (results[k].ok ? "" : " FAILED"));
      }
    }
  };
  const int threads = std::max(1, spec.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  BenchmarkTable table;
  for (std::size_t c = 0; c < spec.cells.size(); ++c) {
    CellResult cell;
    cell.cell = spec.cells[c];
    cell.replications = spec.replications;
    std::array<MethodErrors, 5> pooled{};
    for (std::size_t r = 0; r < reps; ++r) {
      const ReplicationResult& rep = results[c * reps + r];
      if (!rep.ok) {
        ++cell.failures;
        cell.failure_messages.push_back(rep.failure);
        continue;
      }
      for (std::size_t m = 0; m < 5; ++m) {
        const MethodErrors& e = rep.methods[m];
        pooled[m].lambda.merge(e.lambda);
        pooled[m].gamma.merge(e.gamma);
        pooled[m].beta.merge(e.beta);
        pooled[m].b.merge(e.b);
        pooled[m].a.merge(e.a);
        cell.methods[m].test_errors.push_back(e.test_error);
        SquaredError theta = e.lambda;
        theta.merge(e.gamma);
        cell.methods[m].theta_rmse_reps.push_back(theta.rmse());
      }
    }
    for (std::size_t m = 0; m < 5; ++m) {
      MetricReport& rep = cell.methods[m];
      rep.rmse_lambda = pooled[m].lambda.rmse();
      rep.rmse_gamma = pooled[m].gamma.rmse();
      rep.rmse_beta = pooled[m].beta.rmse();
      rep.rmse_b = pooled[m].b.rmse();
      rep.rmse_a = pooled[m].a.rmse();
      double sum = 0.0;
      for (double v : rep.test_errors) sum += v;
      rep.test_error = rep.test_errors.empty() ? std::numeric_limits<double>::quiet_NaN()
                                               : sum / static_cast<double>(rep.test_errors.size());
    }
    table.cells.push_back(std::move(cell));
  }
  return table;
}

double metric_value(const MetricReport& m, int row) {
  switch (row) {
    case 0: return m.rmse_lambda;
    case 1: return m.rmse_gamma;
    case 2: return m.rmse_beta;
    case 3: return m.rmse_b;
    case 4: return m.rmse_a;
    default: return m.test_error;
  }
}

std::string render_table(const BenchmarkTable& table) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  for (const CellResult& cell : table.cells) {
    os << "N1=N2=" << cell.cell.n << "  T=" << cell.cell.horizon << "  " << to_string(cell.cell.mechanism)
       << "  R=" << cell.replications << "  failures=" << cell.failures << "\n";
    os << std::setw(12) << "";
    for (const char* name : kMethodNames) os << std::setw(9) << name;
    os << "\n";
    for (int row = 0; row < 6; ++row) {
      os << std::setw(12) << std::left << kMetricNames[static_cast<std::size_t>(row)] << std::right;
      for (std::size_t m = 0; m < 5; ++m) {
        const double v = metric_value(cell.methods[m], row);
        if (std::isnan(v)) {
          os << std::setw(9) << "-";
        } else if (std::abs(v) >= 1e4) {
          os << std::setw(9) << std::scientific << std::setprecision(1) << v << std::fixed << std::setprecision(3);
        } else {
          os << std::setw(9) << v;
        }
      }
      os << "\n";
    }
    os << "\n";
  }
  return os.str();
}

std::string table_to_csv(const BenchmarkTable& table) {
  std::ostringstream os;
  os << "n1,n2,T,mechanism,metric,method,value,replications,failures\n";
  for (const CellResult& cell : table.cells) {
    for (int row = 0; row < 6; ++row) {
      for (std::size_t m = 0; m < 5; ++m) {
        os << cell.cell.n << ',' << cell.cell.n << ',' << cell.cell.horizon << ','
           << to_string(cell.cell.mechanism) << ',' << kMetricNames[static_cast<std::size_t>(row)] << ','
           << kMethodNames[m] << ',' << format_double(metric_value(cell.methods[m], row)) << ','
           << cell.replications << ',' << cell.failures << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace mnar
