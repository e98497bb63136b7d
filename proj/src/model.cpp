#include "mnar/model.hpp"

#include <cmath>
#include <random>

namespace mnar {

namespace {

constexpr const char* kModule = "model_core";

void require_square_binary(const Matrix& a, const char* name) {
  if (a.rows() != a.cols()) {
    throw ShapeError(kModule, std::string(name) + " must be square");
  }
  for (Index i = 0; i < a.rows(); ++i) {
    if (a(i, i) != 0.0) {
      throw ShapeError(kModule, std::string(name) + " has a nonzero diagonal at node " +
                                    std::to_string(i));
    }
    for (Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != 0.0 && a(i, j) != 1.0) {
        throw ShapeError(kModule, std::string(name) + " must be binary");
      }
    }
  }
}

}  // namespace

PanelSeries::PanelSeries(std::vector<Matrix> responses, std::vector<MaskMatrix> mask)
    : responses_(std::move(responses)), mask_(std::move(mask)) {
  if (responses_.size() != mask_.size()) {
    throw ShapeError(kModule, "responses and mask differ in length");
  }
  if (responses_.empty()) return;
  n1_ = responses_.front().rows();
  n2_ = responses_.front().cols();
  for (std::size_t t = 0; t < responses_.size(); ++t) {
    const Matrix& y = responses_[t];
    const MaskMatrix& r = mask_[t];
    if (y.rows() != n1_ || y.cols() != n2_ || r.rows() != n1_ || r.cols() != n2_) {
      throw ShapeError(kModule, "panel slice " + std::to_string(t) + " has inconsistent shape");
    }
    for (Index j = 0; j < n2_; ++j) {
      for (Index i = 0; i < n1_; ++i) {
        if (r(i, j) > 1) throw ShapeError(kModule, "mask entries must be 0 or 1");
        if (r(i, j) == 0) responses_[t](i, j) = 0.0;
      }
    }
  }
}

double PanelSeries::value(Index t, Index i, Index j) const {
  if (!observed(t, i, j)) {
    throw std::out_of_range("panel entry (" + std::to_string(t) + "," + std::to_string(i) + "," +
                            std::to_string(j) + ") is unobserved");
  }
  return responses_[t](i, j);
}

Index PanelSeries::observed_count() const {
  Index n = 0;
  for (const auto& r : mask_) n += r.cast<Index>().sum();
  return n;
}

double PanelSeries::observed_fraction() const {
  const double total = static_cast<double>(n1_ * n2_ * horizon());
  return total > 0 ? static_cast<double>(observed_count()) / total : 0.0;
}

PanelSeries PanelSeries::with_mask(std::vector<MaskMatrix> mask) const {
  if (mask.size() != mask_.size()) throw ShapeError(kModule, "mask length mismatch");
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask[t].rows() != n1_ || mask[t].cols() != n2_) {
      throw ShapeError(kModule, "mask shape mismatch");
    }
    if (((mask[t].array() != 0) && (mask_[t].array() == 0)).any()) {
      throw ShapeError(kModule, "replacement mask reveals unobserved entries");
    }
  }
  return PanelSeries(responses_, std::move(mask));
}

NetworkPair normalize_networks(const Matrix& a1, const Matrix& a2) {
  require_square_binary(a1, "row adjacency A1");
  require_square_binary(a2, "column adjacency A2");
  NetworkPair nets{a1, a2, Matrix::Zero(a1.rows(), a1.cols()), Matrix::Zero(a2.rows(), a2.cols())};
  for (Index i = 0; i < a1.rows(); ++i) {
    const double d = a1.row(i).sum();
    if (d > 0) nets.w1.row(i) = a1.row(i) / d;
  }
  for (Index j = 0; j < a2.cols(); ++j) {
    const double d = a2.col(j).sum();
    if (d > 0) nets.w2.col(j) = a2.col(j) / d;
  }
  return nets;
}

Matrix network_operator(const Matrix& prev, const Vector& lambda, const Vector& gamma,
                        const NetworkPair& nets) {
  if (prev.rows() != nets.n1() || prev.cols() != nets.n2() || lambda.size() != prev.rows() ||
      gamma.size() != prev.cols()) {
    throw ShapeError(kModule, "network operator shape mismatch");
  }
  return lambda.asDiagonal() * (nets.w1 * prev) + (prev * nets.w2) * gamma.asDiagonal();
}

void check_shapes(const ModelParams& params, const NetworkPair& nets, const Covariates& cov) {
  const Index n1 = nets.n1();
  const Index n2 = nets.n2();
  if (params.lambda.size() != n1 || params.gamma.size() != n2 || cov.n1() != n1 ||
      params.beta.rows() != cov.p() || params.beta.cols() != n2 ||
      params.intercept_b.rows() != n1 || params.intercept_b.cols() != n2) {
    throw ShapeError(kModule, "parameter, network and covariate shapes are inconsistent");
  }
}

Matrix conditional_mean(const Matrix& prev, const ModelParams& params, const NetworkPair& nets,
                        const Covariates& cov) {
  check_shapes(params, nets, cov);
  Matrix out = network_operator(prev, params.lambda, params.gamma, nets);
  out.noalias() += cov.x * params.beta;
  out += params.intercept_b;
  return out;
}

StationarityReport check_stationarity(const ModelParams& params) {
  StationarityReport rep;
  rep.kappa1 = params.lambda.size() ? params.lambda.cwiseAbs().maxCoeff() : 0.0;
  rep.kappa2 = params.gamma.size() ? params.gamma.cwiseAbs().maxCoeff() : 0.0;
  rep.kappa_sum = rep.kappa1 + rep.kappa2;
  rep.stationary = rep.kappa_sum < 1.0;
  return rep;
}

StationarityReport check_stationarity(const ModelParams& params, const NetworkPair& nets,
                                      int max_iter, double tol) {
  StationarityReport rep = check_stationarity(params);
  const Index n1 = nets.n1();
  const Index n2 = nets.n2();
  if (n1 == 0 || n2 == 0) return rep;

  // Power iteration on the operator itself; the N1N2 x N1N2 companion matrix
  // is never formed.
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Matrix x(n1, n2);
  for (Index j = 0; j < n2; ++j)
    for (Index i = 0; i < n1; ++i) x(i, j) = unif(rng);
  x /= x.norm();

  double prev = -1.0;
  std::vector<double> growth;
  for (int it = 0; it < max_iter; ++it) {
    Matrix y = network_operator(x, params.lambda, params.gamma, nets);
    const double g = y.norm();
    rep.power_iterations = it + 1;
    if (g == 0.0) {
      rep.spectral_radius = 0.0;
      return rep;
    }
    growth.push_back(g);
    x = y / g;
    if (prev >= 0.0 && std::abs(g - prev) < tol) {
      rep.spectral_radius = g;
      return rep;
    }
    prev = g;
  }
  // No settled ratio (complex dominant pair); use the geometric mean of the
  // trailing growth factors.
  const std::size_t window = std::min<std::size_t>(20, growth.size());
  double log_sum = 0.0;
  for (std::size_t k = growth.size() - window; k < growth.size(); ++k) log_sum += std::log(growth[k]);
  rep.spectral_radius = std::exp(log_sum / static_cast<double>(window));
  return rep;
}

double identification_gap(const Covariates& cov, const Matrix& b) {
  if (cov.x.rows() != b.rows()) throw ShapeError(kModule, "X and B row counts differ");
  if (b.size() == 0 || cov.x.size() == 0) return 0.0;
  return (cov.x.transpose() * b).cwiseAbs().maxCoeff();
}

}  // namespace mnar
