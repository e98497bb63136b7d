#pragma once

#include "mnar/model.hpp"

namespace mnar {

// Probabilities below this abort estimation; inverse weights explode.
inline constexpr double kProbFloor = 1e-3;

struct MissingModel {
  Vector alpha;  // length p + 1 under MAR; empty under UNI
  Vector probs;  // N1, per-row observation probabilities
  Mechanism mechanism = Mechanism::UNI;
  int iterations = 0;
  bool converged = true;
};

// Inverse-probability-weighted panel. Time index t = 0..T-1; lag-centered
// matrices are indexed by the lagged time s = 0..T-2 (they pair with t = s+1).
struct WeightedPanel {
  std::vector<Matrix> z;               // Z_t = R_t o Y_t / p_i
  std::vector<Matrix> z_centered;      // Z_t - Zbar
  std::vector<Matrix> z_lag_centered;  // Z_s - Zbar_lag, s = 0..T-2
  std::vector<Matrix> inflation;       // Z_t (Y_t - Z_t) = Z_t^2 (p_i - 1) on observed entries
  Matrix zbar;                         // T^-1 sum_t Z_t
  Matrix zbar_lag;                     // (T-1)^-1 sum_{s<T-1} Z_s
  Vector probs;

  Index horizon() const { return static_cast<Index>(z.size()); }
  Index n1() const { return z.empty() ? 0 : z.front().rows(); }
  Index n2() const { return z.empty() ? 0 : z.front().cols(); }
};

struct LogisticFitOptions {
  double grad_tol = 1e-8;  // on the per-observation averaged log-likelihood
  int max_iter = 100;
  double separation_norm = 50.0;
};

// Maximum likelihood for P(R_ijt = 1) = logistic((1, X_i)^T alpha) by damped
// Newton. Covariate columns that are constant across rows duplicate the
// intercept; their coefficients are pinned to 0 and absorbed into alpha_0.
MissingModel fit_logistic_missing(const std::vector<MaskMatrix>& mask, const Covariates& cov,
                                  const LogisticFitOptions& opts = {});

// Grand mean of the mask, assigned to every row.
MissingModel estimate_uniform_rate(const std::vector<MaskMatrix>& mask);

MissingModel fit_missing_model(Mechanism mechanism, const PanelSeries& panel, const Covariates& cov);

WeightedPanel build_weighted_panel(const PanelSeries& panel, const MissingModel& mm,
                                   double prob_floor = kProbFloor);

}  // namespace mnar
