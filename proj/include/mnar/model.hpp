#pragma once

#include "mnar/types.hpp"

namespace mnar {

// Ordered sequence of N1 x N2 response matrices with an aligned 0/1
// observation mask. Unobserved entries hold the placeholder 0 and cannot be
// read through value().
class PanelSeries {
 public:
  PanelSeries() = default;
  // Entries of `responses` where the mask is 0 are overwritten with the
  // placeholder.
  PanelSeries(std::vector<Matrix> responses, std::vector<MaskMatrix> mask);

  Index n1() const { return n1_; }
  Index n2() const { return n2_; }
  Index horizon() const { return static_cast<Index>(responses_.size()); }

  bool observed(Index t, Index i, Index j) const { return mask_[t](i, j) != 0; }
  double value(Index t, Index i, Index j) const;

  const MaskMatrix& mask(Index t) const { return mask_[t]; }
  const std::vector<MaskMatrix>& masks() const { return mask_; }

  // R_t o Y_t: observed values, zero elsewhere.
  const Matrix& observed_values(Index t) const { return responses_[t]; }

  Index observed_count() const;
  double observed_fraction() const;

  // Copy with a different mask; newly hidden entries are zeroed. The new
  // mask must be a subset of the old one.
  PanelSeries with_mask(std::vector<MaskMatrix> mask) const;

 private:
  Index n1_ = 0;
  Index n2_ = 0;
  std::vector<Matrix> responses_;
  std::vector<MaskMatrix> mask_;
};

// Row network (W1 row-normalized) and column network (W2 column-normalized).
struct NetworkPair {
  Matrix a1;
  Matrix a2;
  Matrix w1;
  Matrix w2;

  Index n1() const { return a1.rows(); }
  Index n2() const { return a2.rows(); }
};

struct Covariates {
  Matrix x;  // N1 x p; first column all ones by convention

  Index n1() const { return x.rows(); }
  Index p() const { return x.cols(); }
};

struct ModelParams {
  Vector lambda;       // N1, diagonal of Lambda
  Vector gamma;        // N2, diagonal of Gamma
  Matrix beta;         // p x N2
  Matrix intercept_b;  // N1 x N2
  Index rank_b = 0;
};

struct StationarityReport {
  double kappa1 = 0.0;  // max_i |lambda_i|
  double kappa2 = 0.0;  // max_j |gamma_j|
  double kappa_sum = 0.0;
  bool stationary = false;  // kappa_sum < 1
  double spectral_radius = 0.0;
  int power_iterations = 0;
};

// Builds W1 (rows of A1 divided by out-degree) and W2 (columns of A2 divided
// by in-degree). Zero-degree rows/columns stay zero.
NetworkPair normalize_networks(const Matrix& a1, const Matrix& a2);

// Lambda W1 prev + prev W2 Gamma + X beta + B.
Matrix conditional_mean(const Matrix& prev, const ModelParams& params, const NetworkPair& nets,
                        const Covariates& cov);

// Same map without the X beta + B offset.
Matrix network_operator(const Matrix& prev, const Vector& lambda, const Vector& gamma,
                        const NetworkPair& nets);

// kappa bound plus a power-iteration estimate of the spectral radius of
// M -> Lambda W1 M + M W2 Gamma. Requires nets for the sharper diagnostic;
// without nets only the kappa bound is filled in.
StationarityReport check_stationarity(const ModelParams& params, const NetworkPair& nets,
                                      int max_iter = 200, double tol = 1e-8);
StationarityReport check_stationarity(const ModelParams& params);

// max |X^T B|
double identification_gap(const Covariates& cov, const Matrix& b);

void check_shapes(const ModelParams& params, const NetworkPair& nets, const Covariates& cov);

}  // namespace mnar
