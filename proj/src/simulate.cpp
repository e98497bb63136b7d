#include "mnar/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mnar {

namespace {

constexpr const char* kModule = "simulate";

Matrix normal_matrix(Index rows, Index cols, double sd, Rng& rng) {
  std::normal_distribution<double> norm(0.0, sd);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = norm(rng);
  return m;
}

}  // namespace

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void SimConfig::validate() const {
  if (n1 < 2 || n2 < 2) throw ConfigError(kModule, "n1 and n2 must be at least 2");
  if (horizon < 1) throw ConfigError(kModule, "horizon must be positive");
  if (!(powerlaw_exponent > 1.0)) throw ConfigError(kModule, "power-law exponent must exceed 1");
  if (p < 1) throw ConfigError(kModule, "covariate dimension p must be at least 1");
  if (beta_sparsity < 0.0 || beta_sparsity > 1.0) {
    throw ConfigError(kModule, "beta_sparsity must lie in [0,1]");
  }
  if (!(uni_prob > 0.0 && uni_prob <= 1.0)) throw ConfigError(kModule, "uni_prob must lie in (0,1]");
  if (burn_in < 0) throw ConfigError(kModule, "burn_in must be nonnegative");
  if (b_rank < 0 || b_rank >= std::min(n1, n2)) {
    throw ConfigError(kModule, "b_rank must be below min(n1, n2)");
  }
  if (!(std::abs(lambda_val) + std::abs(gamma_val) < 1.0)) {
    throw ConfigError(kModule, "lambda_val + gamma_val must be below 1");
  }
  if (noise_sd < 0.0) throw ConfigError(kModule, "noise_sd must be nonnegative");
}

Vector SimConfig::alpha() const {
  Vector a = Vector::Constant(p + 1, alpha_slope);
  a(0) = alpha0;
  return a;
}

Vector powerlaw_pmf(Index n, double exponent) {
  if (n < 2) throw ConfigError(kModule, "power-law network needs n >= 2");
  Vector w(n - 1);
  for (Index h = 1; h < n; ++h) w(h - 1) = std::pow(static_cast<double>(h), -exponent);
  return w / w.sum();
}

Matrix gen_powerlaw_network(Index n, double exponent, Rng& rng) {
  const Vector pmf = powerlaw_pmf(n, exponent);
  std::discrete_distribution<Index> degree(pmf.data(), pmf.data() + pmf.size());
  Matrix a = Matrix::Zero(n, n);
  std::vector<Index> others(static_cast<std::size_t>(n - 1));
  for (Index i = 0; i < n; ++i) {
    const Index h = degree(rng) + 1;
    // candidates are every node except i
    for (Index k = 0, c = 0; k < n; ++k)
      if (k != i) others[static_cast<std::size_t>(c++)] = k;
    for (Index s = 0; s < h; ++s) {
      std::uniform_int_distribution<Index> pick(s, n - 2);
      std::swap(others[static_cast<std::size_t>(s)], others[static_cast<std::size_t>(pick(rng))]);
      a(others[static_cast<std::size_t>(s)], i) = 1.0;
    }
  }
  return a;
}

Covariates gen_covariates(Index n1, Index p, Rng& rng) {
  if (p < 1) throw ConfigError(kModule, "covariate dimension p must be at least 1");
  Covariates cov{Matrix(n1, p)};
  cov.x.col(0).setOnes();
  if (p > 1) cov.x.rightCols(p - 1) = normal_matrix(n1, p - 1, 1.0, rng);
  return cov;
}

ModelParams gen_parameters(const SimConfig& cfg, const Covariates& cov, Rng& rng,
                           LowRankFactors* factors) {
  const Index n1 = cov.n1();
  const Index n2 = cfg.n2;
  const Index p = cov.p();
  if (cfg.b_rank >= std::min(n1, n2)) {
    throw ConfigError(kModule, "b_rank must be below min(n1, n2)");
  }

  ModelParams params;
  std::uniform_real_distribution<double> unif(cfg.beta_low, cfg.beta_high);
  params.beta.resize(p, n2);
  for (Index j = 0; j < n2; ++j)
    for (Index i = 0; i < p; ++i) params.beta(i, j) = unif(rng);
  const Index total = p * n2;
  const auto zeroed = static_cast<Index>(std::llround(cfg.beta_sparsity * static_cast<double>(total)));
  std::vector<Index> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  for (Index k = 0; k < zeroed; ++k) params.beta.data()[idx[static_cast<std::size_t>(k)]] = 0.0;

  const Matrix u = normal_matrix(n1, cfg.b_rank, cfg.b_scale, rng);
  const Matrix v = normal_matrix(n2, cfg.b_rank, cfg.b_scale, rng);
  // P_X^perp U via the thin Q factor of X.
  Eigen::HouseholderQR<Matrix> qr(cov.x);
  const Matrix q = qr.householderQ() * Matrix::Identity(n1, p);
  Matrix left = u - q * (q.transpose() * u);
  params.intercept_b = left * v.transpose();
  params.rank_b = cfg.b_rank;
  params.lambda = Vector::Constant(n1, cfg.lambda_val);
  params.gamma = Vector::Constant(n2, cfg.gamma_val);
  if (factors) {
    factors->left = std::move(left);
    factors->right = v;
  }
  return params;
}

Vector observation_probs(const SimConfig& cfg, const Covariates& cov) {
  if (cfg.mechanism == Mechanism::UNI) return Vector::Constant(cov.n1(), cfg.uni_prob);
  const Vector alpha = cfg.alpha();
  if (alpha.size() != cov.p() + 1) {
    throw ConfigError(kModule, "alpha length must equal p + 1");
  }
  Vector probs(cov.n1());
  for (Index i = 0; i < cov.n1(); ++i) {
    probs(i) = logistic(alpha(0) + cov.x.row(i).dot(alpha.tail(cov.p())));
  }
  return probs;
}

SimulatedData simulate_panel(const SimConfig& cfg, const NetworkPair& nets,
                             const ModelParams& params, const Covariates& cov, Rng& rng) {
  check_shapes(params, nets, cov);
  const StationarityReport st = check_stationarity(params);
  if (!st.stationary) {
    throw NumericError(kModule, "parameters violate the stationarity bound (kappa1 + kappa2 = " +
                                    std::to_string(st.kappa_sum) + ")");
  }
  const Index n1 = nets.n1();
  const Index n2 = nets.n2();

  SimulatedData out;
  out.nets = nets;
  out.cov = cov;
  out.truth = params;
  out.probs = observation_probs(cfg, cov);

  const Matrix offset = cov.x * params.beta + params.intercept_b;
  auto step_mean = [&](const Matrix& prev) {
    Matrix m = network_operator(prev, params.lambda, params.gamma, nets);
    m += offset;
    return m;
  };

  Matrix y = Matrix::Zero(n1, n2);
  for (Index s = 0; s < cfg.burn_in; ++s) {
    y = step_mean(y) + normal_matrix(n1, n2, cfg.noise_sd, rng);
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Matrix> observed;
  std::vector<MaskMatrix> masks;
  out.y_full.reserve(static_cast<std::size_t>(cfg.horizon));
  out.cond_mean.reserve(static_cast<std::size_t>(cfg.horizon));
  for (Index t = 0; t < cfg.horizon; ++t) {
    Matrix a = step_mean(y);
    y = a + normal_matrix(n1, n2, cfg.noise_sd, rng);
    MaskMatrix r(n1, n2);
    for (Index j = 0; j < n2; ++j)
      for (Index i = 0; i < n1; ++i) r(i, j) = unif(rng) < out.probs(i) ? 1 : 0;
    out.cond_mean.push_back(std::move(a));
    out.y_full.push_back(y);
    observed.push_back(y);
    masks.push_back(std::move(r));
  }
  out.panel = PanelSeries(std::move(observed), std::move(masks));
  return out;
}

SimulatedData simulate(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Matrix a1 = gen_powerlaw_network(cfg.n1, cfg.powerlaw_exponent, rng);
  const Matrix a2 = gen_powerlaw_network(cfg.n2, cfg.powerlaw_exponent, rng);
  NetworkPair nets = normalize_networks(a1, a2);
  Covariates cov = gen_covariates(cfg.n1, cfg.p, rng);
  LowRankFactors factors;
  ModelParams params = gen_parameters(cfg, cov, rng, &factors);
  SimulatedData data = simulate_panel(cfg, nets, params, cov, rng);
  data.b_factors = std::move(factors);
  return data;
}

}  // namespace mnar
