#include "mnar/step1.hpp"

#include <cmath>

namespace mnar {

namespace {

constexpr const char* kModule = "step1_estimator";

}  // namespace

void Step1Config::validate() const {
  if (nu1 < 0.0 || nu2 < 0.0) throw ConfigError(kModule, "ridge penalties must be nonnegative");
  if (!(tol > 0.0)) throw ConfigError(kModule, "tol must be positive");
  if (max_iter < 1) throw ConfigError(kModule, "max_iter must be at least 1");
}

Step1Problem::Step1Problem(const WeightedPanel& wp, const NetworkPair& nets, const Step1Config& cfg)
    : cfg_(cfg), horizon_(wp.horizon()) {
  cfg_.validate();
  const Index T = horizon_;
  if (T < 2) throw ShapeError(kModule, "profile objective needs T >= 2 (lag undefined)");
  const Index n1 = wp.n1();
  const Index n2 = wp.n2();
  if (nets.n1() != n1 || nets.n2() != n2) {
    throw ShapeError(kModule, "network sizes differ from panel dimensions");
  }

  lambda_quad_ = Vector::Zero(n1);
  gamma_quad_ = Vector::Zero(n2);
  lambda_lin_ = Vector::Zero(n1);
  gamma_lin_ = Vector::Zero(n2);
  cross_ = Matrix::Zero(n1, n2);
  Matrix infl_lag = Matrix::Zero(n1, n2);
  double infl_now = 0.0;
  constant_ = 0.0;
  for (Index s = 0; s + 1 < T; ++s) {
    const auto su = static_cast<std::size_t>(s);
    const Matrix& lag = wp.z_lag_centered[su];
    const Matrix& target = wp.z_centered[su + 1];
    const Matrix g = nets.w1 * lag;
    const Matrix h = lag * nets.w2;
    lambda_quad_ += g.cwiseAbs2().rowwise().sum();
    gamma_quad_ += h.cwiseAbs2().colwise().sum().transpose();
    lambda_lin_ += g.cwiseProduct(target).rowwise().sum();
    gamma_lin_ += h.cwiseProduct(target).colwise().sum().transpose();
    cross_ += g.cwiseProduct(h);
    constant_ += target.squaredNorm();
    infl_lag += wp.inflation[su];
    infl_now += wp.inflation[su + 1].sum();
  }
  const double shrink = 1.0 - 1.0 / static_cast<double>(T);
  constant_ += shrink * infl_now;
  const Vector row_infl = infl_lag.rowwise().sum();
  const Vector col_infl = infl_lag.colwise().sum().transpose();
  kappa_ = shrink * (nets.w1.cwiseAbs2() * row_infl);
  corr_gamma_ = shrink * (nets.w2.cwiseAbs2().transpose() * col_infl);
}

Vector Step1Problem::lambda_denominators() const {
  return (lambda_quad_ + kappa_).array() + cfg_.nu1;
}

Vector Step1Problem::gamma_denominators() const {
  return (gamma_quad_ + corr_gamma_).array() + cfg_.nu2;
}

double Step1Problem::objective(const Vector& lambda, const Vector& gamma) const {
  if (lambda.size() != n1() || gamma.size() != n2()) throw ShapeError(kModule, "parameter length mismatch");
  return constant_ - 2.0 * lambda.dot(lambda_lin_) - 2.0 * gamma.dot(gamma_lin_) +
         lambda.cwiseAbs2().dot(lambda_denominators()) + gamma.cwiseAbs2().dot(gamma_denominators()) +
         2.0 * lambda.dot(cross_ * gamma);
}

Vector Step1Problem::gradient(const Vector& lambda, const Vector& gamma) const {
  Vector grad(n1() + n2());
  grad.head(n1()) = 2.0 * (lambda.cwiseProduct(lambda_denominators()) - lambda_lin_ + cross_ * gamma);
  grad.tail(n2()) =
      2.0 * (gamma.cwiseProduct(gamma_denominators()) - gamma_lin_ + cross_.transpose() * lambda);
  return grad;
}

double profile_objective(const WeightedPanel& wp, const NetworkPair& nets, const Vector& lambda,
                         const Vector& gamma, const Step1Config& cfg) {
  const Index T = wp.horizon();
  if (T < 2) throw ShapeError(kModule, "profile objective needs T >= 2 (lag undefined)");
  if (lambda.size() != wp.n1() || gamma.size() != wp.n2() || nets.n1() != wp.n1() ||
      nets.n2() != wp.n2()) {
    throw ShapeError(kModule, "profile objective shape mismatch");
  }
  const double shrink = 1.0 - 1.0 / static_cast<double>(T);
  const Matrix w1sq = nets.w1.cwiseAbs2();
  const Matrix w2sq = nets.w2.cwiseAbs2();
  double value = 0.0;
  for (Index s = 0; s + 1 < T; ++s) {
    const auto su = static_cast<std::size_t>(s);
    const Matrix& lag = wp.z_lag_centered[su];
    const Matrix resid = wp.z_centered[su + 1] - lambda.asDiagonal() * (nets.w1 * lag) -
                         (lag * nets.w2) * gamma.asDiagonal();
    value += resid.squaredNorm();
    const Matrix& infl_lag = wp.inflation[su];
    // lambda_i^2 (1-1/T) sum_k W1_ik^2 Z_kj(Y_kj - Z_kj), likewise for gamma_j
    value += shrink * lambda.cwiseAbs2().dot((w1sq * infl_lag).rowwise().sum());
    value += shrink * gamma.cwiseAbs2().dot((infl_lag * w2sq).colwise().sum().transpose());
    value += shrink * wp.inflation[su + 1].sum();
  }
  value += cfg.nu1 * lambda.squaredNorm() + cfg.nu2 * gamma.squaredNorm();
  return value;
}

Vector update_lambda_block(const Step1Problem& prob, const Vector& gamma) {
  if (gamma.size() != prob.n2()) throw ShapeError(kModule, "gamma length mismatch");
  const Vector denom = prob.lambda_denominators();
  const Vector numer = prob.lambda_lin() - prob.cross() * gamma;
  for (Index i = 0; i < denom.size(); ++i) {
    if (!(denom(i) > prob.config().denominator_floor)) {
      throw NumericError(kModule, "ill-conditioned lambda block at row node " + std::to_string(i) +
                                      " (denominator " + std::to_string(denom(i)) + ")");
    }
  }
  return numer.cwiseQuotient(denom);
}

Vector update_gamma_block(const Step1Problem& prob, const Vector& lambda) {
  if (lambda.size() != prob.n1()) throw ShapeError(kModule, "lambda length mismatch");
  const Vector denom = prob.gamma_denominators();
  const Vector numer = prob.gamma_lin() - prob.cross().transpose() * lambda;
  for (Index j = 0; j < denom.size(); ++j) {
    if (!(denom(j) > prob.config().denominator_floor)) {
      throw NumericError(kModule, "ill-conditioned gamma block at column node " + std::to_string(j) +
                                      " (denominator " + std::to_string(denom(j)) + ")");
    }
  }
  return numer.cwiseQuotient(denom);
}

Step1Fit fit_step1(const Step1Problem& prob) {
  const Step1Config& cfg = prob.config();
  Step1Fit fit;
  fit.lambda_hat = Vector::Zero(prob.n1());
  fit.gamma_hat = Vector::Zero(prob.n2());
  fit.kappa = prob.kappa();
  fit.corr_gamma = prob.corr_gamma();

  double prev_obj = prob.objective(fit.lambda_hat, fit.gamma_hat);
  for (int it = 0; it < cfg.max_iter; ++it) {
    Vector lambda = update_lambda_block(prob, fit.gamma_hat);
    Vector gamma = update_gamma_block(prob, lambda);
    const double change = std::max((lambda - fit.lambda_hat).cwiseAbs().maxCoeff(),
                                   (gamma - fit.gamma_hat).cwiseAbs().maxCoeff());
    fit.lambda_hat = std::move(lambda);
    fit.gamma_hat = std::move(gamma);
    const double obj = prob.objective(fit.lambda_hat, fit.gamma_hat);
    // Exact block minimization never increases the objective; allow rounding.
    if (obj > prev_obj + 1e-10 * std::max(1.0, std::abs(prev_obj))) fit.monotone = false;
    fit.objective_trace.push_back(obj);
    prev_obj = obj;
    fit.iterations = it + 1;
    if (change < cfg.tol) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

Step1Fit fit_step1(const WeightedPanel& wp, const NetworkPair& nets, const Step1Config& cfg) {
  return fit_step1(Step1Problem(wp, nets, cfg));
}

Matrix hessian_sigma2(const Step1Problem& prob) {
  const Index n1 = prob.n1();
  const Index n2 = prob.n2();
  const double scale = 2.0 / (static_cast<double>(n1 + n2) * static_cast<double>(prob.horizon()));
  Matrix hess = Matrix::Zero(n1 + n2, n1 + n2);
  hess.topLeftCorner(n1, n1).diagonal() = prob.lambda_denominators();
  hess.bottomRightCorner(n2, n2).diagonal() = prob.gamma_denominators();
  hess.topRightCorner(n1, n2) = prob.cross();
  hess.bottomLeftCorner(n2, n1) = prob.cross().transpose();
  return scale * hess;
}

Matrix hessian_sigma2(const WeightedPanel& wp, const NetworkPair& nets, const Step1Config& cfg) {
  return hessian_sigma2(Step1Problem(wp, nets, cfg));
}

}  // namespace mnar
