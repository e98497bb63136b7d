#include "mnar/baselines.hpp"

namespace mnar {

std::vector<SvtEstimate> svt_sep(const WeightedPanel& wp, const Covariates& cov, const Step2Config& cfg) {
  std::vector<SvtEstimate> out;
  out.reserve(wp.z.size());
  for (const auto& z : wp.z) {
    Step2Fit fit = fit_step2_from_mean(z, cov, cfg);
    out.push_back({std::move(fit.beta_hat), std::move(fit.b_hat)});
  }
  return out;
}

SvtEstimate svt_avg(const std::vector<SvtEstimate>& per_time) {
  if (per_time.empty()) throw ShapeError("baselines_svt", "no per-time estimates to average");
  SvtEstimate avg = per_time.front();
  for (std::size_t k = 1; k < per_time.size(); ++k) {
    avg.beta += per_time[k].beta;
    avg.b += per_time[k].b;
  }
  const double n = static_cast<double>(per_time.size());
  avg.beta /= n;
  avg.b /= n;
  return avg;
}

SvtEstimate svt_avg(const WeightedPanel& wp, const Covariates& cov, const Step2Config& cfg) {
  return svt_avg(svt_sep(wp, cov, cfg));
}

SvtEstimate svt_sum(const WeightedPanel& wp, const Covariates& cov, const Step2Config& cfg) {
  Step2Fit fit = fit_step2_from_mean(time_average(wp.z), cov, cfg);
  return {std::move(fit.beta_hat), std::move(fit.b_hat)};
}

double svt_sum_objective(const WeightedPanel& wp, const Covariates& cov, const SvtEstimate& est,
                         const Step2Config& cfg) {
  const Matrix fitted = est.fitted(cov);
  double loss = 0.0;
  for (const auto& z : wp.z) loss += (z - fitted).squaredNorm();
  loss /= static_cast<double>(wp.z.size());
  return loss + cfg.nu3 * est.beta.squaredNorm() +
         cfg.nu4 * (cfg.mix_alpha * nuclear_norm(est.b) + (1.0 - cfg.mix_alpha) * est.b.squaredNorm());
}

}  // namespace mnar
