#pragma once

#include "mnar/model.hpp"
#include "mnar/rng.hpp"

namespace mnar {

struct SimConfig {
  Index n1 = 100;
  Index n2 = 100;
  Index horizon = 30;
  double powerlaw_exponent = 2.5;
  Index p = 6;
  double beta_sparsity = 0.95;
  double beta_low = -0.01;
  double beta_high = 0.01;
  Index b_rank = 10;
  double b_scale = 0.5;
  double lambda_val = 0.45;
  double gamma_val = 0.45;
  double noise_sd = 1.0;
  Mechanism mechanism = Mechanism::MAR;
  double alpha0 = -1.3;
  double alpha_slope = 0.1;
  double uni_prob = 0.2;
  std::uint64_t seed = 1;
  Index burn_in = 200;

  void validate() const;
  // (alpha0, alpha_slope, ..., alpha_slope), length p + 1.
  Vector alpha() const;
};

// Low-rank intercept kept in factored form: B = left * right^T.
struct LowRankFactors {
  Matrix left;   // N1 x r, already projected onto the orthogonal complement of X
  Matrix right;  // N2 x r
};

struct SimulatedData {
  NetworkPair nets;
  Covariates cov;
  ModelParams truth;
  LowRankFactors b_factors;
  Vector probs;                        // true per-row observation probabilities
  PanelSeries panel;                   // what an analyst sees
  std::vector<Matrix> y_full;          // complete responses, for evaluation only
  std::vector<Matrix> cond_mean;       // A_t = E(Y_t | Y_{t-1})
};

// In-degree of each node drawn from P(h) proportional to h^-exponent on
// 1..n-1; each node then receives that many distinct followers. a(f, i) = 1
// means f follows i, so column sums are the in-degrees.
Matrix gen_powerlaw_network(Index n, double exponent, Rng& rng);

// Exact truncated power-law probabilities P(h), h = 1..n-1 (index h-1).
Vector powerlaw_pmf(Index n, double exponent);

// X = (1, standard normal block), N1 x p.
Covariates gen_covariates(Index n1, Index p, Rng& rng);

// Ground-truth parameters; fills `factors` with the projected low-rank pair.
ModelParams gen_parameters(const SimConfig& cfg, const Covariates& cov, Rng& rng,
                           LowRankFactors* factors = nullptr);

// Observation probabilities under the configured mechanism: logistic of
// (1, X_i)^T alpha for MAR, the constant uni_prob for UNI.
Vector observation_probs(const SimConfig& cfg, const Covariates& cov);

// Burn-in from the zero matrix, then `horizon` kept steps with masks drawn
// independently over (i, j, t).
SimulatedData simulate_panel(const SimConfig& cfg, const NetworkPair& nets,
                             const ModelParams& params, const Covariates& cov, Rng& rng);

// Full pipeline seeded from cfg.seed: networks, covariates, parameters, panel.
SimulatedData simulate(const SimConfig& cfg);

double logistic(double x);

}  // namespace mnar
