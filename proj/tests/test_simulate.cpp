#include "helpers.hpp"

#include "doctest.h"

#include <cmath>
#include <map>

using namespace th;

TEST_CASE("power-law pmf is the normalized truncated law") {
  const Vector pmf = powerlaw_pmf(6, 2.5);
  double c = 0.0;
  for (int h = 1; h <= 5; ++h) c += std::pow(h, -2.5);
  for (int h = 1; h <= 5; ++h) CHECK(pmf(h - 1) == doctest::Approx(std::pow(h, -2.5) / c).epsilon(1e-14));
  CHECK(pmf.sum() == doctest::Approx(1.0));
}

TEST_CASE("power-law network on two nodes is forced") {
  Rng rng(1);
  const Matrix a = gen_powerlaw_network(2, 2.5, rng);
  Matrix want(2, 2);
  want << 0, 1, 1, 0;
  CHECK(max_abs(a - want) == 0.0);
  CHECK_THROWS(gen_powerlaw_network(1, 2.5, rng));
}

TEST_CASE("power-law network structure") {
  Rng rng(2);
  const Matrix a = gen_powerlaw_network(60, 2.5, rng);
  CHECK(a.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK(((a.array() == 0.0) || (a.array() == 1.0)).all());
  for (Index j = 0; j < 60; ++j) {
    CHECK(a.col(j).sum() >= 1.0);
    CHECK(a.col(j).sum() <= 59.0);
  }
}

TEST_CASE("in-degree tail follows the power law") {
  // Pool the in-degrees of several n=500 networks and fit the log-log CCDF
  // slope over 1..30 against the exact law.
  Rng rng(2024);
  const Index n = 500;
  std::vector<double> degs;
  for (int rep = 0; rep < 8; ++rep) {
    const Matrix a = gen_powerlaw_network(n, 2.5, rng);
    for (Index j = 0; j < n; ++j) degs.push_back(a.col(j).sum());
  }
  const Vector pmf = powerlaw_pmf(n, 2.5);
  std::vector<double> xs, ys, exact;
  for (int h = 1; h <= 30; ++h) {
    const double emp = static_cast<double>(std::count_if(degs.begin(), degs.end(), [&](double d) { return d >= h; })) /
                       static_cast<double>(degs.size());
    double tail = 0.0;
    for (Index k = h; k <= n - 1; ++k) tail += pmf(k - 1);
    if (emp <= 0.0) continue;
    xs.push_back(std::log(h));
    ys.push_back(std::log(emp));
    exact.push_back(std::log(tail));
  }
  auto slope = [&](const std::vector<double>& y) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      sxy += (xs[k] - mx) * (y[k] - my);
      sxx += (xs[k] - mx) * (xs[k] - mx);
    }
    return sxy / sxx;
  };
  const double emp_slope = slope(ys);
  CHECK(std::abs(emp_slope - (-1.5)) < 0.3);
  CHECK(std::abs(emp_slope - slope(exact)) < 0.1);
}

TEST_CASE("generated parameters") {
  SimConfig cfg;
  cfg.n1 = 40;
  cfg.n2 = 40;
  Rng rng(9);
  const Covariates cov = gen_covariates(cfg.n1, cfg.p, rng);
  CHECK(cov.x.col(0).isOnes());
  LowRankFactors f;
  const ModelParams p = gen_parameters(cfg, cov, rng, &f);
  CHECK(identification_gap(cov, p.intercept_b) < 1e-8);
  const Index zeros = (p.beta.array() == 0.0).count();
  const double frac = static_cast<double>(zeros) / static_cast<double>(p.beta.size());
  CHECK(std::abs(frac - 0.95) <= 1.0 / static_cast<double>(p.beta.size()) + 1e-12);
  CHECK(p.beta.cwiseAbs().maxCoeff() <= 0.01);
  Eigen::JacobiSVD<Matrix> svd(p.intercept_b);
  const Vector sv = svd.singularValues();
  CHECK((sv.array() > 1e-8 * sv(0)).count() <= 10);
  CHECK(max_abs(f.left * f.right.transpose() - p.intercept_b) < 1e-12);
  CHECK((p.lambda.array() == 0.45).all());
  CHECK((p.gamma.array() == 0.45).all());

  cfg.n1 = 10;
  cfg.n2 = 30;
  const Covariates small = gen_covariates(10, cfg.p, rng);
  CHECK_THROWS_AS(gen_parameters(cfg, small, rng), ConfigError);
}

TEST_CASE("SimConfig validation") {
  SimConfig cfg;
  cfg.lambda_val = 0.5;
  cfg.gamma_val = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SimConfig{};
  cfg.powerlaw_exponent = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SimConfig{};
  cfg.uni_prob = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("noiseless static panel equals X beta + B") {
  SimConfig cfg;
  cfg.n1 = 15;
  cfg.n2 = 12;
  cfg.horizon = 5;
  cfg.b_rank = 3;
  cfg.noise_sd = 0.0;
  Rng rng(4);
  const Covariates cov = gen_covariates(cfg.n1, cfg.p, rng);
  ModelParams p = gen_parameters(cfg, cov, rng);
  p.lambda.setZero();
  p.gamma.setZero();
  const NetworkPair nets = normalize_networks(gen_powerlaw_network(15, 2.5, rng), gen_powerlaw_network(12, 2.5, rng));
  const SimulatedData d = simulate_panel(cfg, nets, p, cov, rng);
  const Matrix want = cov.x * p.beta + p.intercept_b;
  for (const Matrix& y : d.y_full) CHECK(max_abs(y - want) == 0.0);
}

TEST_CASE("noiseless burn-in reaches the fixed point") {
  SimConfig cfg;
  cfg.n1 = 10;
  cfg.n2 = 10;
  cfg.horizon = 3;
  cfg.b_rank = 2;
  cfg.noise_sd = 0.0;
  Rng rng(12);
  const Covariates cov = gen_covariates(10, cfg.p, rng);
  const ModelParams p = gen_parameters(cfg, cov, rng);
  const NetworkPair nets = normalize_networks(random_adjacency(10, 0.3, rng), random_adjacency(10, 0.3, rng));
  const SimulatedData d = simulate_panel(cfg, nets, p, cov, rng);
  // Fixed point of vec(A) = K vec(A) + vec(X beta + B) by a dense solve.
  const Index n = 100;
  Matrix k = Matrix::Zero(n, n);
  const Matrix lw1 = p.lambda.asDiagonal() * nets.w1;
  const Matrix w2g = nets.w2 * p.gamma.asDiagonal();
  for (Index c = 0; c < 10; ++c) k.block(c * 10, c * 10, 10, 10) += lw1;
  for (Index c = 0; c < 10; ++c)
    for (Index e = 0; e < 10; ++e) k.block(c * 10, e * 10, 10, 10) += w2g(e, c) * Matrix::Identity(10, 10);
  const Matrix off = cov.x * p.beta + p.intercept_b;
  const Vector fp = (Matrix::Identity(n, n) - k).partialPivLu().solve(Eigen::Map<const Vector>(off.data(), n));
  const Matrix fixed = Eigen::Map<const Matrix>(fp.data(), 10, 10);
  for (const Matrix& y : d.y_full) CHECK(max_abs(y - fixed) < 1e-6);
}

TEST_CASE("MAR probabilities with zero covariates") {
  SimConfig cfg;
  cfg.p = 3;
  Covariates cov{Matrix::Zero(4, 3)};
  const Vector p = observation_probs(cfg, cov);
  for (Index i = 0; i < 4; ++i) CHECK(p(i) == doctest::Approx(1.0 / (1.0 + std::exp(1.3))).epsilon(1e-14));
  CHECK(p(0) == doctest::Approx(0.2142).epsilon(1e-3));
  // The design prepends its own 1, so a ones column in X adds alpha_1.
  cov.x.col(0).setOnes();
  CHECK(observation_probs(cfg, cov)(0) == doctest::Approx(1.0 / (1.0 + std::exp(1.2))).epsilon(1e-14));
  cfg.mechanism = Mechanism::UNI;
  CHECK((observation_probs(cfg, cov).array() == 0.2).all());
}

TEST_CASE("UNI observation rate") {
  SimConfig cfg;
  cfg.mechanism = Mechanism::UNI;
  cfg.n1 = 100;
  cfg.n2 = 100;
  cfg.horizon = 30;
  cfg.seed = 77;
  const SimulatedData d = simulate(cfg);
  CHECK(std::abs(d.panel.observed_fraction() - 0.2) < 0.005);
}

TEST_CASE("MAR per-row frequencies match the probabilities") {
  SimConfig cfg;
  cfg.n1 = 30;
  cfg.n2 = 100;
  cfg.horizon = 30;
  cfg.seed = 5;
  const SimulatedData d = simulate(cfg);
  const double draws = static_cast<double>(cfg.n2 * cfg.horizon);
  for (Index i = 0; i < cfg.n1; ++i) {
    double hits = 0.0;
    for (Index t = 0; t < cfg.horizon; ++t) hits += d.panel.mask(t).row(i).cast<double>().sum();
    const double pi = d.probs(i);
    CHECK(std::abs(hits / draws - pi) < 3.0 * std::sqrt(pi * (1 - pi) / draws));
  }
}

TEST_CASE("simulation is seed-deterministic") {
  SimConfig cfg;
  cfg.n1 = 20;
  cfg.n2 = 20;
  cfg.horizon = 6;
  cfg.b_rank = 3;
  cfg.seed = 99;
  const SimulatedData a = simulate(cfg), b = simulate(cfg);
  for (Index t = 0; t < 6; ++t) {
    CHECK((a.y_full[t].array() == b.y_full[t].array()).all());
    CHECK((a.panel.mask(t).array() == b.panel.mask(t).array()).all());
  }
  cfg.seed = 100;
  const SimulatedData c = simulate(cfg);
  CHECK(max_abs(a.y_full[0] - c.y_full[0]) > 0.0);
}

TEST_CASE("stationarity failure aborts simulation") {
  SimConfig cfg;
  cfg.n1 = 5;
  cfg.n2 = 5;
  cfg.b_rank = 1;
  Rng rng(1);
  const Covariates cov = gen_covariates(5, cfg.p, rng);
  ModelParams p = gen_parameters(cfg, cov, rng);
  p.lambda.setConstant(0.7);
  const NetworkPair nets = normalize_networks(random_adjacency(5, 0.5, rng), random_adjacency(5, 0.5, rng));
  CHECK_THROWS(simulate_panel(cfg, nets, p, cov, rng));
}
