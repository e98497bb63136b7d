#include "mnar/step2.hpp"

#include "mnar/model.hpp"

#include <Eigen/SVD>

namespace mnar {

namespace {

constexpr const char* kModule = "step2_estimator";

}  // namespace

void Step2Config::validate() const {
  if (nu3 < 0.0 || nu4 < 0.0) throw ConfigError(kModule, "penalties must be nonnegative");
  if (mix_alpha < 0.0 || mix_alpha > 1.0) throw ConfigError(kModule, "mix_alpha must lie in [0,1]");
}

std::vector<Matrix> residual_panel(const WeightedPanel& wp, const NetworkPair& nets,
                                   const Vector& lambda_hat, const Vector& gamma_hat) {
  const Index T = wp.horizon();
  if (T < 2) throw ShapeError(kModule, "residuals need T >= 2");
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(T - 1));
  for (Index t = 1; t < T; ++t) {
    const auto tu = static_cast<std::size_t>(t);
    out.push_back(wp.z[tu] - network_operator(wp.z[tu - 1], lambda_hat, gamma_hat, nets));
  }
  return out;
}

Matrix time_average(const std::vector<Matrix>& mats) {
  if (mats.empty()) throw ShapeError(kModule, "cannot average an empty sequence");
  Matrix acc = mats.front();
  for (std::size_t k = 1; k < mats.size(); ++k) acc += mats[k];
  return acc / static_cast<double>(mats.size());
}

Matrix fit_beta(const Matrix& residual_mean, const Covariates& cov, const Step2Config& cfg) {
  cfg.validate();
  if (residual_mean.rows() != cov.n1()) throw ShapeError(kModule, "residual rows differ from X rows");
  Matrix normal = cov.x.transpose() * cov.x;
  normal.diagonal().array() += cfg.nu3;
  Eigen::LDLT<Matrix> ldlt(normal);
  const Vector piv = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14 ||
      !(piv.minCoeff() > 1e-14 * piv.maxCoeff())) {
    throw NumericError(kModule, "X^T X + nu3 I is singular");
  }
  return ldlt.solve(cov.x.transpose() * residual_mean);
}

Matrix fit_beta(const std::vector<Matrix>& residuals, const Covariates& cov, const Step2Config& cfg) {
  return fit_beta(time_average(residuals), cov, cfg);
}

Matrix soft_threshold_svd(const Matrix& mat, double c, Vector* kept) {
  if (c < 0.0) throw ConfigError(kModule, "threshold must be nonnegative");
  if (mat.size() == 0) {
    if (kept) kept->resize(0);
    return mat;
  }
  Eigen::BDCSVD<Matrix> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericError(kModule, "SVD failed");
  const Vector shrunk = (svd.singularValues().array() - c).max(0.0).matrix();
  Index rank = 0;
  while (rank < shrunk.size() && shrunk(rank) > 0.0) ++rank;
  if (kept) *kept = shrunk.head(rank);
  if (rank == 0) return Matrix::Zero(mat.rows(), mat.cols());
  return svd.matrixU().leftCols(rank) * shrunk.head(rank).asDiagonal() *
         svd.matrixV().leftCols(rank).transpose();
}

Matrix project_out_covariates(const Covariates& cov, const Matrix& m) {
  if (m.rows() != cov.n1()) throw ShapeError(kModule, "projection row mismatch");
  Eigen::ColPivHouseholderQR<Matrix> qr(cov.x);
  const Index rank = qr.rank();
  const Matrix q = qr.householderQ() * Matrix::Identity(cov.n1(), cov.p());
  const auto basis = q.leftCols(rank);
  return m - basis * (basis.transpose() * m);
}

Step2Fit fit_intercept_b(const Matrix& residual_mean, const Covariates& cov, const Step2Config& cfg) {
  cfg.validate();
  Step2Fit fit;
  fit.residual_mean = residual_mean;
  const Matrix b1 = project_out_covariates(cov, residual_mean);
  Vector kept;
  fit.b_hat = soft_threshold_svd(b1, cfg.threshold(), &kept) / (1.0 + (1.0 - cfg.mix_alpha) * cfg.nu4);
  fit.singular_values = kept / (1.0 + (1.0 - cfg.mix_alpha) * cfg.nu4);
  fit.b_rank_hat = kept.size();
  // The thin SVD keeps the left singular vectors inside range(P_X^perp) only
  // up to rounding; project again so X^T B stays at machine precision.
  fit.b_hat = project_out_covariates(cov, fit.b_hat);
  return fit;
}

Step2Fit fit_step2_from_mean(const Matrix& residual_mean, const Covariates& cov, const Step2Config& cfg) {
  Step2Fit fit = fit_intercept_b(residual_mean, cov, cfg);
  fit.beta_hat = fit_beta(residual_mean, cov, cfg);
  return fit;
}

Step2Fit fit_step2(const WeightedPanel& wp, const NetworkPair& nets, const Vector& lambda_hat,
                   const Vector& gamma_hat, const Covariates& cov, const Step2Config& cfg) {
  return fit_step2_from_mean(time_average(residual_panel(wp, nets, lambda_hat, gamma_hat)), cov, cfg);
}

double nuclear_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

double step2_objective(const Matrix& residual_mean, const Covariates& cov, const Matrix& beta,
                       const Matrix& b, const Step2Config& cfg) {
  return (residual_mean - cov.x * beta - b).squaredNorm() + cfg.nu3 * beta.squaredNorm() +
         cfg.nu4 * (cfg.mix_alpha * nuclear_norm(b) + (1.0 - cfg.mix_alpha) * b.squaredNorm());
}

}  // namespace mnar
