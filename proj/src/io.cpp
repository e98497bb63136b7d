#include "mnar/io.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace mnar {

using nlohmann::json;

namespace {

constexpr const char* kModule = "cli";

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(kModule, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(kModule, "cannot read " + path.string());
  return in;
}

void check_written(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError(kModule, "write failed for " + path.string());
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

Index parse_index(const std::string& s, const fs::path& path, std::size_t line) {
  long long v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || v < 0) {
    throw IoError(kModule, path.string() + ":" + std::to_string(line) + ": bad index '" + s + "'");
  }
  return static_cast<Index>(v);
}

double parse_at(const std::string& s, const fs::path& path, std::size_t line) {
  try {
    return parse_double(s);
  } catch (const IoError&) {
    throw IoError(kModule, path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
}

void expect_header(std::istream& in, const std::string& header, const fs::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw IoError(kModule, path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw IoError(kModule, path.string() + ": expected header '" + header + "'");
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_json(const Matrix& m) {
  json a = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

Vector json_vec(const json& a) {
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Index>(i)) = a[i].get<double>();
  return v;
}

Matrix json_mat(const json& a) {
  if (a.empty()) return Matrix();
  const std::size_t cols = a[0].size();
  Matrix m(static_cast<Index>(a.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != cols) throw IoError(kModule, "ragged matrix in JSON");
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = a[i][j].get<double>();
  }
  return m;
}

json read_json(const fs::path& path) {
  std::ifstream in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(kModule, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  check_written(out, path);
}

json params_json(const ModelParams& p) {
  return {{"lambda", vec_json(p.lambda)}, {"gamma", vec_json(p.gamma)}, {"beta", mat_json(p.beta)},
          {"rank_b", p.rank_b}};
}

// Copies known keys from `j` into fields; anything else is a config error.
class Reader {
 public:
  Reader(const json& j, std::string block) : j_(j), block_(std::move(block)) {
    if (!j_.is_object()) throw ConfigError("config", "block '" + block_ + "' must be an object");
  }
  template <class T>
  Reader& get(const char* key, T& field) {
    seen_.insert(key);
    if (j_.contains(key)) {
      try {
        field = j_.at(key).get<T>();
      } catch (const json::exception&) {
        throw ConfigError("config", block_ + "." + key + " has the wrong type");
      }
    }
    return *this;
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("config", "unknown key " + block_ + "." + k);
    }
  }

 private:
  const json& j_;
  std::string block_;
  std::set<std::string> seen_;
};

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || s.empty()) throw IoError(kModule, "bad number '" + s + "'");
  return v;
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  std::ofstream out = open_out(path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  check_written(out, path);
}

Matrix read_matrix_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    for (const auto& f : split(line)) row.push_back(parse_at(f, path, lineno));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError(kModule, path.string() + ":" + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

void write_panel_csv(const fs::path& path, const PanelSeries& panel) {
  std::ofstream out = open_out(path);
  out << "t,i,j,observed,value\n";
  for (Index t = 0; t < panel.horizon(); ++t)
    for (Index i = 0; i < panel.n1(); ++i)
      for (Index j = 0; j < panel.n2(); ++j) {
        out << t << ',' << i << ',' << j << ',';
        if (panel.observed(t, i, j)) {
          out << "1," << format_double(panel.value(t, i, j)) << '\n';
        } else {
          out << "0,\n";
        }
      }
  check_written(out, path);
}

PanelSeries read_panel_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  expect_header(in, "t,i,j,observed,value", path);
  struct Row {
    Index t, i, j;
    bool obs;
    double v;
  };
  std::vector<Row> rows;
  Index T = 0, n1 = 0, n2 = 0;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 5) throw IoError(kModule, path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
    Row r{parse_index(f[0], path, lineno), parse_index(f[1], path, lineno), parse_index(f[2], path, lineno), false, 0.0};
    if (f[3] == "1") {
      r.obs = true;
      r.v = parse_at(f[4], path, lineno);
      if (!std::isfinite(r.v)) throw IoError(kModule, path.string() + ":" + std::to_string(lineno) + ": non-finite value");
    } else if (f[3] != "0") {
      throw IoError(kModule, path.string() + ":" + std::to_string(lineno) + ": observed must be 0 or 1");
    }
    T = std::max(T, r.t + 1);
    n1 = std::max(n1, r.i + 1);
    n2 = std::max(n2, r.j + 1);
    rows.push_back(r);
  }
  if (rows.empty()) throw IoError(kModule, path.string() + " has no data rows");
  std::vector<Matrix> y(static_cast<std::size_t>(T), Matrix::Zero(n1, n2));
  std::vector<MaskMatrix> mask(static_cast<std::size_t>(T), MaskMatrix::Zero(n1, n2));
  std::vector<MaskMatrix> seen(static_cast<std::size_t>(T), MaskMatrix::Zero(n1, n2));
  for (const Row& r : rows) {
    auto& s = seen[static_cast<std::size_t>(r.t)](r.i, r.j);
    if (s) {
      throw IoError(kModule, path.string() + ": duplicate entry t=" + std::to_string(r.t) + " i=" +
                                 std::to_string(r.i) + " j=" + std::to_string(r.j));
    }
    s = 1;
    if (r.obs) {
      y[static_cast<std::size_t>(r.t)](r.i, r.j) = r.v;
      mask[static_cast<std::size_t>(r.t)](r.i, r.j) = 1;
    }
  }
  return PanelSeries(std::move(y), std::move(mask));
}

void write_series_csv(const fs::path& path, const std::vector<Matrix>& series) {
  std::ofstream out = open_out(path);
  out << "t,i,j,value\n";
  for (std::size_t t = 0; t < series.size(); ++t)
    for (Index i = 0; i < series[t].rows(); ++i)
      for (Index j = 0; j < series[t].cols(); ++j)
        out << t << ',' << i << ',' << j << ',' << format_double(series[t](i, j)) << '\n';
  check_written(out, path);
}

std::vector<Matrix> read_series_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  expect_header(in, "t,i,j,value", path);
  std::vector<std::tuple<Index, Index, Index, double>> rows;
  Index T = 0, n1 = 0, n2 = 0;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 4) throw IoError(kModule, path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    const Index t = parse_index(f[0], path, lineno), i = parse_index(f[1], path, lineno),
                j = parse_index(f[2], path, lineno);
    rows.emplace_back(t, i, j, parse_at(f[3], path, lineno));
    T = std::max(T, t + 1);
    n1 = std::max(n1, i + 1);
    n2 = std::max(n2, j + 1);
  }
  std::vector<Matrix> out(static_cast<std::size_t>(T), Matrix::Zero(n1, n2));
  for (const auto& [t, i, j, v] : rows) out[static_cast<std::size_t>(t)](i, j) = v;
  return out;
}

void write_edge_list(const fs::path& path, const Matrix& a) {
  std::ofstream out = open_out(path);
  out << "src,dst\n";
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) out << i << ',' << j << '\n';
  check_written(out, path);
}

Matrix read_edge_list(const fs::path& path, Index n) {
  std::ifstream in = open_in(path);
  expect_header(in, "src,dst", path);
  Matrix a = Matrix::Zero(n, n);
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != 2) throw IoError(kModule, path.string() + ":" + std::to_string(lineno) + ": expected src,dst");
    const Index s = parse_index(f[0], path, lineno);
    const Index d = parse_index(f[1], path, lineno);
    if (s >= n || d >= n) {
      throw IoError(kModule, path.string() + ":" + std::to_string(lineno) + ": node outside 0.." + std::to_string(n - 1));
    }
    a(s, d) = 1.0;
  }
  return a;
}

void write_covariates_csv(const fs::path& path, const Covariates& cov) {
  std::ofstream out = open_out(path);
  for (Index k = 0; k < cov.p(); ++k) out << (k ? "," : "") << 'x' << k;
  out << '\n';
  for (Index i = 0; i < cov.n1(); ++i) {
    for (Index k = 0; k < cov.p(); ++k) out << (k ? "," : "") << format_double(cov.x(i, k));
    out << '\n';
  }
  check_written(out, path);
}

Covariates read_covariates_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string header;
  if (!std::getline(in, header)) throw IoError(kModule, path.string() + " is empty");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const std::size_t p = split(header).size();
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != p) throw IoError(kModule, path.string() + ":" + std::to_string(lineno) + ": wrong field count");
    std::vector<double> row;
    for (const auto& s : f) row.push_back(parse_at(s, path, lineno));
    rows.push_back(std::move(row));
  }
  Covariates cov;
  cov.x.resize(static_cast<Index>(rows.size()), static_cast<Index>(p));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < p; ++k) cov.x(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
  return cov;
}

void write_simulation(const fs::path& dir, const SimulatedData& data) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(kModule, "cannot create " + dir.string() + ": " + ec.message());
  write_panel_csv(dir / kPanelFile, data.panel);
  write_edge_list(dir / kRowNetworkFile, data.nets.a1);
  write_edge_list(dir / kColNetworkFile, data.nets.a2);
  write_covariates_csv(dir / kCovariatesFile, data.cov);
  json truth = params_json(data.truth);
  truth["b_left"] = mat_json(data.b_factors.left);
  truth["b_right"] = mat_json(data.b_factors.right);
  truth["b_file"] = kTruthBFile;
  truth["probs"] = vec_json(data.probs);
  write_json(dir / kTruthFile, truth);
  write_matrix_csv(dir / kTruthBFile, data.truth.intercept_b);
  write_series_csv(dir / kTruthYFile, data.y_full);
}

Dataset read_dataset(const fs::path& dir) {
  Dataset d;
  d.panel = read_panel_csv(dir / kPanelFile);
  d.cov = read_covariates_csv(dir / kCovariatesFile);
  if (d.cov.n1() != d.panel.n1()) {
    throw ShapeError(kModule, "covariates have " + std::to_string(d.cov.n1()) + " rows but the panel has " +
                                  std::to_string(d.panel.n1()));
  }
  d.nets = normalize_networks(read_edge_list(dir / kRowNetworkFile, d.panel.n1()),
                              read_edge_list(dir / kColNetworkFile, d.panel.n2()));
  return d;
}

ModelParams read_truth(const fs::path& dir) {
  const json j = read_json(dir / kTruthFile);
  ModelParams p;
  try {
    p.lambda = json_vec(j.at("lambda"));
    p.gamma = json_vec(j.at("gamma"));
    p.beta = json_mat(j.at("beta"));
    p.rank_b = j.at("rank_b").get<Index>();
    p.intercept_b = read_matrix_csv(dir / j.at("b_file").get<std::string>());
  } catch (const json::exception& e) {
    throw IoError(kModule, (dir / kTruthFile).string() + ": " + e.what());
  }
  return p;
}

void write_fit(const fs::path& dir, const MnarFit& fit, const FitConfig& cfg, const FitTimings& timings) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(kModule, "cannot create " + dir.string() + ": " + ec.message());
  json j;
  j["mechanism"] = to_string(cfg.mechanism);
  j["tuning"] = {{"nu1", cfg.step1.nu1},
                 {"nu2", cfg.step1.nu2},
                 {"nu3", cfg.step2.nu3},
                 {"nu4", cfg.step2.nu4},
                 {"mix_alpha", cfg.step2.mix_alpha}};
  j["missing"] = {{"alpha", vec_json(fit.missing.alpha)},
                  {"probs", vec_json(fit.missing.probs)},
                  {"iterations", fit.missing.iterations},
                  {"converged", fit.missing.converged}};
  j["step1"] = {{"iterations", fit.step1.iterations},
                {"converged", fit.step1.converged},
                {"monotone", fit.step1.monotone},
                {"objective_trace", fit.step1.objective_trace},
                {"kappa", vec_json(fit.step1.kappa)},
                {"corr_gamma", vec_json(fit.step1.corr_gamma)}};
  j["debias"] = {{"rounds", fit.rounds}, {"sigma2_condition", fit.sigma2_condition}};
  if (fit.bias) {
    j["debias"]["b_sup_norms"] = fit.bias->b_sup_norms;
    j["debias"]["contraction_ok"] = fit.bias->contraction_ok;
  }
  j["org"] = params_json(fit.org);
  j["org"]["b_file"] = "b_org.csv";
  j["org"]["b_singular_values"] = vec_json(fit.step2_org.singular_values);
  j["adj"] = params_json(fit.adj);
  j["adj"]["b_file"] = "b_adj.csv";
  j["adj"]["b_singular_values"] = vec_json(fit.step2_adj.singular_values);
  j["timings_ms"] = {{"missing", timings.missing_ms}, {"total", timings.total_ms}};
  write_matrix_csv(dir / "b_org.csv", fit.org.intercept_b);
  write_matrix_csv(dir / "b_adj.csv", fit.adj.intercept_b);
  write_json(dir / kFitFile, j);
}

StoredFit read_fit(const fs::path& dir) {
  const fs::path path = dir / kFitFile;
  if (!fs::exists(path)) throw IoError(kModule, "missing " + path.string());
  const json j = read_json(path);
  StoredFit out;
  try {
    auto params = [&](const json& b) {
      ModelParams p;
      p.lambda = json_vec(b.at("lambda"));
      p.gamma = json_vec(b.at("gamma"));
      p.beta = json_mat(b.at("beta"));
      p.rank_b = b.at("rank_b").get<Index>();
      p.intercept_b = read_matrix_csv(dir / b.at("b_file").get<std::string>());
      return p;
    };
    out.org = params(j.at("org"));
    out.adj = params(j.at("adj"));
    out.missing.alpha = json_vec(j.at("missing").at("alpha"));
    out.missing.probs = json_vec(j.at("missing").at("probs"));
    out.missing.mechanism = mechanism_from_string(j.at("mechanism").get<std::string>());
  } catch (const json::exception& e) {
    throw IoError(kModule, path.string() + ": " + e.what());
  }
  return out;
}

RunConfig default_run_config() {
  RunConfig rc;
  rc.fit = benchmark_fit_config();
  rc.bench.cells = {{100, 30, Mechanism::MAR}, {100, 60, Mechanism::MAR}, {100, 100, Mechanism::MAR}};
  rc.bench.fit = rc.fit;
  rc.bench.sim = rc.sim;
  return rc;
}

RunConfig load_run_config(const fs::path& path) {
  const json root = read_json(path);
  RunConfig rc = default_run_config();
  Reader top(root, "config");
  json sim = json::object(), fit = json::object(), s1 = json::object(), s2 = json::object(),
       cv = json::object(), bench = json::object();
  top.get("seed", rc.seed).get("threads", rc.threads).get("sim", sim).get("fit", fit).get("step1", s1)
      .get("step2", s2).get("cv", cv).get("benchmark", bench);
  top.finish();

  std::string mech = to_string(rc.sim.mechanism);
  Reader(sim, "sim")
      .get("n1", rc.sim.n1)
      .get("n2", rc.sim.n2)
      .get("horizon", rc.sim.horizon)
      .get("powerlaw_exponent", rc.sim.powerlaw_exponent)
      .get("p", rc.sim.p)
      .get("beta_sparsity", rc.sim.beta_sparsity)
      .get("beta_low", rc.sim.beta_low)
      .get("beta_high", rc.sim.beta_high)
      .get("b_rank", rc.sim.b_rank)
      .get("b_scale", rc.sim.b_scale)
      .get("lambda_val", rc.sim.lambda_val)
      .get("gamma_val", rc.sim.gamma_val)
      .get("noise_sd", rc.sim.noise_sd)
      .get("mechanism", mech)
      .get("alpha0", rc.sim.alpha0)
      .get("alpha_slope", rc.sim.alpha_slope)
      .get("uni_prob", rc.sim.uni_prob)
      .get("burn_in", rc.sim.burn_in)
      .finish();
  rc.sim.mechanism = mechanism_from_string(mech);

  std::string fit_mech = to_string(rc.fit.mechanism);
  Reader(fit, "fit").get("mechanism", fit_mech).get("debias_rounds", rc.fit.debias_rounds).finish();
  rc.fit.mechanism = mechanism_from_string(fit_mech);
  Reader(s1, "step1")
      .get("nu1", rc.fit.step1.nu1)
      .get("nu2", rc.fit.step1.nu2)
      .get("tol", rc.fit.step1.tol)
      .get("max_iter", rc.fit.step1.max_iter)
      .finish();
  Reader(s2, "step2")
      .get("nu3", rc.fit.step2.nu3)
      .get("nu4", rc.fit.step2.nu4)
      .get("mix_alpha", rc.fit.step2.mix_alpha)
      .finish();

  std::string scheme = rc.cv.scheme == FoldScheme::Entry ? "entry" : "time";
  Reader(cv, "cv")
      .get("folds", rc.cv.folds)
      .get("nu1", rc.cv.nu1_grid)
      .get("nu2", rc.cv.nu2_grid)
      .get("nu3", rc.cv.nu3_grid)
      .get("nu4", rc.cv.nu4_grid)
      .get("mix_alpha", rc.cv.mix_alpha_grid)
      .get("scheme", scheme)
      .finish();
  if (scheme == "entry") {
    rc.cv.scheme = FoldScheme::Entry;
  } else if (scheme == "time") {
    rc.cv.scheme = FoldScheme::TimeBlock;
  } else {
    throw ConfigError("config", "cv.scheme must be 'entry' or 'time'");
  }

  json cells = json::array();
  Reader(bench, "benchmark")
      .get("replications", rc.bench.replications)
      .get("debias_rounds", rc.bench.debias_rounds)
      .get("cells", cells)
      .finish();
  if (!cells.empty()) {
    rc.bench.cells.clear();
    for (const json& c : cells) {
      BenchmarkCell cell;
      std::string m = "MAR";
      Reader(c, "benchmark.cells").get("n", cell.n).get("horizon", cell.horizon).get("mechanism", m).finish();
      cell.mechanism = mechanism_from_string(m);
      rc.bench.cells.push_back(cell);
    }
  }

  rc.sim.validate();
  rc.fit.step1.validate();
  rc.fit.step2.validate();
  rc.bench.sim = rc.sim;
  rc.bench.fit = rc.fit;
  return rc;
}

}  // namespace mnar
