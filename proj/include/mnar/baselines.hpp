#pragma once

#include "mnar/step2.hpp"

namespace mnar {

// Static covariate-plus-low-rank estimates that ignore the network dynamics.
struct SvtEstimate {
  Matrix beta;
  Matrix b;

  Matrix fitted(const Covariates& cov) const { return cov.x * beta + b; }
};

// One estimate per time point, each treating Z_t as the residual.
std::vector<SvtEstimate> svt_sep(const WeightedPanel& wp, const Covariates& cov, const Step2Config& cfg);

// Mean of the per-time estimates.
SvtEstimate svt_avg(const std::vector<SvtEstimate>& per_time);
SvtEstimate svt_avg(const WeightedPanel& wp, const Covariates& cov, const Step2Config& cfg);

// Minimizer of T^-1 sum_t ||Z_t - X beta - B||_F^2 + penalties, i.e. the
// closed forms applied to the time mean of Z.
SvtEstimate svt_sum(const WeightedPanel& wp, const Covariates& cov, const Step2Config& cfg);

// T^-1 sum_t ||Z_t - X beta - B||_F^2 + nu3 ||beta||^2 + nu4 (alpha ||B||_* + (1-alpha) ||B||_F^2).
double svt_sum_objective(const WeightedPanel& wp, const Covariates& cov, const SvtEstimate& est,
                         const Step2Config& cfg);

}  // namespace mnar
