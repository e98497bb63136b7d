#pragma once

#include "mnar/missingness.hpp"

namespace mnar {

struct Step2Config {
  double nu3 = 0.0;        // ridge penalty on beta
  double nu4 = 0.0;        // scale of the low-rank penalty on B
  double mix_alpha = 1.0;  // weight of the nuclear norm vs squared Frobenius in the B penalty

  void validate() const;
  // Singular-value threshold mix_alpha * nu4 / 2.
  double threshold() const { return mix_alpha * nu4 / 2.0; }
};

struct Step2Fit {
  Matrix beta_hat;             // p x N2
  Matrix b_hat;                // N1 x N2
  Index b_rank_hat = 0;
  Vector singular_values;      // kept singular values of b_hat
  Matrix residual_mean;        // time-averaged residual
};

// E_t = Z_t - Lambda W1 Z_{t-1} - Z_{t-1} W2 Gamma for t = 2..T (T-1 matrices).
std::vector<Matrix> residual_panel(const WeightedPanel& wp, const NetworkPair& nets,
                                   const Vector& lambda_hat, const Vector& gamma_hat);

Matrix time_average(const std::vector<Matrix>& mats);

// (X^T X + nu3 I)^-1 X^T Ebar.
Matrix fit_beta(const Matrix& residual_mean, const Covariates& cov, const Step2Config& cfg);
Matrix fit_beta(const std::vector<Matrix>& residuals, const Covariates& cov, const Step2Config& cfg);

// U diag((sigma - c)_+) V^T. Also reports the retained singular values.
Matrix soft_threshold_svd(const Matrix& mat, double c, Vector* kept = nullptr);

// (1 + (1 - alpha) nu4)^-1 tau_{alpha nu4 / 2}(P_X^perp Ebar).
Step2Fit fit_intercept_b(const Matrix& residual_mean, const Covariates& cov, const Step2Config& cfg);

// beta and B from a precomputed residual average.
Step2Fit fit_step2_from_mean(const Matrix& residual_mean, const Covariates& cov, const Step2Config& cfg);
Step2Fit fit_step2(const WeightedPanel& wp, const NetworkPair& nets, const Vector& lambda_hat,
                   const Vector& gamma_hat, const Covariates& cov, const Step2Config& cfg);

// ||Ebar - X beta - B||_F^2 + nu3 ||beta||_F^2 + nu4 (alpha ||B||_* + (1 - alpha) ||B||_F^2).
double step2_objective(const Matrix& residual_mean, const Covariates& cov, const Matrix& beta,
                       const Matrix& b, const Step2Config& cfg);

double nuclear_norm(const Matrix& m);

// I - X (X^T X)^-1 X^T applied to `m`.
Matrix project_out_covariates(const Covariates& cov, const Matrix& m);

}  // namespace mnar
