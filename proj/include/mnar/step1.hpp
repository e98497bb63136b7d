#pragma once

#include "mnar/missingness.hpp"

namespace mnar {

struct Step1Config {
  double nu1 = 0.0;
  double nu2 = 0.0;
  double tol = 1e-6;
  int max_iter = 100;
  double denominator_floor = 1e-10;

  void validate() const;
};

struct Step1Fit {
  Vector lambda_hat;
  Vector gamma_hat;
  Vector kappa;       // row correction scalars, <= 0
  Vector corr_gamma;  // column correction scalars, <= 0
  std::vector<double> objective_trace;  // penalized objective after each full sweep
  int iterations = 0;
  bool converged = false;
  bool monotone = true;
};

// Sufficient statistics of the penalized profile objective. With
// G_s = W1 Zlag_s and H_s = Zlag_s W2 (Zlag the lag-centered IPW matrices),
//   Q(lambda, gamma) = c - 2 sum_i lambda_i l_i - 2 sum_j gamma_j g_j
//                    + sum_i lambda_i^2 (lambda_quad_i + kappa_i + nu1)
//                    + sum_j gamma_j^2 (gamma_quad_j + corr_gamma_j + nu2)
//                    + 2 sum_ij lambda_i gamma_j cross_ij.
// Time sums run over t = 2..T (1-based), the periods with a lag.
class Step1Problem {
 public:
  Step1Problem(const WeightedPanel& wp, const NetworkPair& nets, const Step1Config& cfg);

  Index n1() const { return lambda_lin_.size(); }
  Index n2() const { return gamma_lin_.size(); }
  Index horizon() const { return horizon_; }
  const Step1Config& config() const { return cfg_; }

  const Vector& kappa() const { return kappa_; }
  const Vector& corr_gamma() const { return corr_gamma_; }
  const Vector& lambda_quad() const { return lambda_quad_; }
  const Vector& gamma_quad() const { return gamma_quad_; }
  const Matrix& cross() const { return cross_; }
  const Vector& lambda_lin() const { return lambda_lin_; }
  const Vector& gamma_lin() const { return gamma_lin_; }

  // lambda_quad + kappa + nu1 (and the gamma analogue).
  Vector lambda_denominators() const;
  Vector gamma_denominators() const;

  // Penalized objective from the sufficient statistics.
  double objective(const Vector& lambda, const Vector& gamma) const;
  // Gradient in (lambda, gamma), length N1 + N2.
  Vector gradient(const Vector& lambda, const Vector& gamma) const;

 private:
  Step1Config cfg_;
  Index horizon_;
  Vector kappa_;
  Vector corr_gamma_;
  Vector lambda_quad_;
  Vector gamma_quad_;
  Matrix cross_;
  Vector lambda_lin_;
  Vector gamma_lin_;
  double constant_ = 0.0;  // data-only part: sum ||Ztilde_t||^2 + (1-1/T) sum Z(Y-Z)
};

// Penalized profile objective evaluated term by term from the residuals,
// without the sufficient-statistic shortcut.
double profile_objective(const WeightedPanel& wp, const NetworkPair& nets, const Vector& lambda,
                         const Vector& gamma, const Step1Config& cfg);

// Exact minimizer of each lambda_i with gamma fixed.
Vector update_lambda_block(const Step1Problem& prob, const Vector& gamma);
// Exact minimizer of each gamma_j with lambda fixed.
Vector update_gamma_block(const Step1Problem& prob, const Vector& lambda);

Step1Fit fit_step1(const Step1Problem& prob);
Step1Fit fit_step1(const WeightedPanel& wp, const NetworkPair& nets, const Step1Config& cfg);

// (mT)^-1 times the Hessian of the penalized profile objective in
// (lambda, gamma), m = N1 + N2. Constant because the objective is quadratic.
Matrix hessian_sigma2(const Step1Problem& prob);
Matrix hessian_sigma2(const WeightedPanel& wp, const NetworkPair& nets, const Step1Config& cfg);

}  // namespace mnar
