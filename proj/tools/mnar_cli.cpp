#include "mnar/io.hpp"
#include "mnar/log.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

using namespace mnar;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cli", "cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cli", "cannot write " + path.string());
  out << text;
  if (!out.flush()) throw IoError("cli", "write failed for " + path.string());
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = ".";

  RunConfig load() const {
    RunConfig rc = config.empty() ? default_run_config() : load_run_config(config);
    if (seed) rc.seed = *seed;
    if (threads) rc.threads = *threads;
    return rc;
  }
};

void add_common(CLI::App* cmd, Common& c, bool with_threads) {
  cmd->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Master seed");
  if (with_threads) cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();
  CLI::App app{"Matrix network autoregression with missing entries"};
  app.require_subcommand(1);

  Common sim_opts;
  std::optional<Index> sim_n1, sim_n2, sim_t, sim_rank;
  std::string sim_mech;
  bool sim_dense = false;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic panel with ground truth");
  add_common(sim_cmd, sim_opts, false);
  sim_cmd->add_option("--n1", sim_n1, "Row nodes")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--n2", sim_n2, "Column nodes")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--horizon", sim_t, "Time periods")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--b-rank", sim_rank, "Rank of the intercept matrix")->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--mechanism", sim_mech, "MAR or UNI");
  sim_cmd->add_flag("--dense", sim_dense, "Also write per-period dense y_<t>.csv and mask_<t>.csv");

  Common est_opts;
  std::string est_input;
  std::string est_mech;
  std::optional<int> est_rounds;
  auto* est_cmd = app.add_subcommand("estimate", "Fit the two-step estimator to a data directory");
  add_common(est_cmd, est_opts, false);
  est_cmd->add_option("--input", est_input, "Data directory")->required()->check(CLI::ExistingDirectory);
  est_cmd->add_option("--mechanism", est_mech, "MAR or UNI");
  est_cmd->add_option("--rounds", est_rounds, "Debiasing rounds (0 disables)")->check(CLI::NonNegativeNumber);

  Common cmp_opts;
  std::string cmp_input, cmp_fit;
  std::string cmp_use = "adj";
  auto* cmp_cmd = app.add_subcommand("complete", "Fill unobserved entries by rolling recovery");
  add_common(cmp_cmd, cmp_opts, false);
  cmp_cmd->add_option("--input", cmp_input, "Data directory")->required()->check(CLI::ExistingDirectory);
  cmp_cmd->add_option("--fit", cmp_fit, "Directory holding fit.json (default: --input)");
  cmp_cmd->add_option("--use", cmp_use, "Which estimate to use")->check(CLI::IsMember({"org", "adj"}));

  Common bench_opts;
  std::optional<int> bench_reps;
  bool bench_smoke = false;
  auto* bench_cmd = app.add_subcommand("benchmark", "Monte-Carlo comparison of all methods");
  add_common(bench_cmd, bench_opts, true);
  bench_cmd->add_option("--replications", bench_reps, "Replications per cell")->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--smoke", bench_smoke, "Single N=20, T=10 cell");

  Common cv_opts;
  std::string cv_input;
  auto* cv_cmd = app.add_subcommand("cv", "Cross-validate the penalty grid on a data directory");
  add_common(cv_cmd, cv_opts, false);
  cv_cmd->add_option("--input", cv_input, "Data directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*sim_cmd) {
      RunConfig rc = sim_opts.load();
      SimConfig cfg = rc.sim;
      cfg.seed = rc.seed;
      if (sim_n1) cfg.n1 = *sim_n1;
      if (sim_n2) cfg.n2 = *sim_n2;
      if (sim_t) cfg.horizon = *sim_t;
      if (sim_rank) cfg.b_rank = *sim_rank;
      if (!sim_mech.empty()) cfg.mechanism = mechanism_from_string(sim_mech);
      const SimulatedData data = simulate(cfg);
      write_simulation(sim_opts.out, data);
      if (sim_dense) {
        const fs::path dense = fs::path(sim_opts.out) / "dense";
        ensure_dir(dense);
        for (Index t = 0; t < data.panel.horizon(); ++t) {
          write_matrix_csv(dense / ("y_" + std::to_string(t) + ".csv"), data.panel.observed_values(t));
          write_matrix_csv(dense / ("mask_" + std::to_string(t) + ".csv"), data.panel.mask(t).cast<double>());
        }
      }
      log::info("wrote {}x{}x{} panel to {}", cfg.n1, cfg.n2, cfg.horizon, sim_opts.out);
    } else if (*est_cmd) {
      const auto t0 = std::chrono::steady_clock::now();
      RunConfig rc = est_opts.load();
      FitConfig cfg = rc.fit;
      if (!est_mech.empty()) cfg.mechanism = mechanism_from_string(est_mech);
      if (est_rounds) cfg.debias_rounds = *est_rounds;
      const Dataset d = read_dataset(est_input);
      FitTimings timings;
      const auto t1 = std::chrono::steady_clock::now();
      const MissingModel mm = fit_missing_model(cfg.mechanism, d.panel, d.cov);
      const WeightedPanel wp = build_weighted_panel(d.panel, mm);
      timings.missing_ms = ms_since(t1);
      const MnarFit fit = fit_mnar(wp, mm, d.nets, d.cov, cfg);
      timings.total_ms = ms_since(t0);
      write_fit(est_opts.out, fit, cfg, timings);
      log::info("step 1 took {} sweeps; fit written to {}", fit.step1.iterations, est_opts.out);
    } else if (*cmp_cmd) {
      const Dataset d = read_dataset(cmp_input);
      const StoredFit sf = read_fit(cmp_fit.empty() ? cmp_input : cmp_fit);
      const ModelParams& params = cmp_use == "org" ? sf.org : sf.adj;
      if (sf.missing.probs.size() != d.panel.n1()) {
        throw ShapeError("cli", "fit.json does not match the data directory");
      }
      const WeightedPanel wp = build_weighted_panel(d.panel, sf.missing);
      const std::vector<Matrix> a_hat = rolling_recover(params, wp, d.nets, d.cov);
      std::vector<Matrix> filled = a_hat;
      for (Index t = 0; t < d.panel.horizon(); ++t) {
        auto& f = filled[static_cast<std::size_t>(t)];
        for (Index j = 0; j < d.panel.n2(); ++j)
          for (Index i = 0; i < d.panel.n1(); ++i)
            if (d.panel.observed(t, i, j)) f(i, j) = d.panel.value(t, i, j);
      }
      const fs::path out = cmp_opts.out;
      ensure_dir(out);
      write_series_csv(out / "recovered.csv", a_hat);
      std::vector<MaskMatrix> full(filled.size(), MaskMatrix::Ones(d.panel.n1(), d.panel.n2()));
      write_panel_csv(out / "completed_panel.csv", PanelSeries(filled, full));
    } else if (*bench_cmd) {
      RunConfig rc = bench_opts.load();
      BenchmarkSpec spec = rc.bench;
      spec.seed = rc.seed;
      spec.threads = rc.threads;
      if (bench_reps) spec.replications = *bench_reps;
      if (bench_smoke) spec.cells = {{20, 10, spec.sim.mechanism}};
      const BenchmarkTable table = run_benchmark(spec, [](const std::string& msg) { log::info("{}", msg); });
      const fs::path out = bench_opts.out;
      ensure_dir(out);
      write_text(out / "results.csv", table_to_csv(table));
      const std::string rendered = render_table(table);
      write_text(out / "results.txt", rendered);
      std::cout << rendered;
      for (const CellResult& c : table.cells)
        for (const std::string& m : c.failure_messages) log::warn("replication failed: {}", m);
    } else if (*cv_cmd) {
      RunConfig rc = cv_opts.load();
      CvPlan plan = rc.cv;
      plan.seed = rc.seed;
      const Dataset d = read_dataset(cv_input);
      const CvResult res = cross_validate(d.panel, d.nets, d.cov, plan, rc.fit);
      nlohmann::json j;
      auto point = [](const TuningPoint& p) {
        return nlohmann::json{{"nu1", p.nu1}, {"nu2", p.nu2}, {"nu3", p.nu3}, {"nu4", p.nu4}, {"mix_alpha", p.mix_alpha}};
      };
      j["best"] = point(res.best);
      j["best_score"] = res.best_score;
      j["scores"] = nlohmann::json::array();
      for (const auto& [p, s] : res.scores) {
        nlohmann::json e = point(p);
        e["score"] = std::isfinite(s) ? nlohmann::json(s) : nlohmann::json(nullptr);
        j["scores"].push_back(e);
      }
      const fs::path out = cv_opts.out;
      ensure_dir(out);
      write_text(out / "cv.json", j.dump(2) + "\n");
      std::cout << j["best"].dump() << "\n";
    }
  } catch (const NumericError& e) {
    log::error("{}", e.what());
    return 2;
  } catch (const Error& e) {
    log::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    log::error("{}", e.what());
    return 1;
  }
  return 0;
}
