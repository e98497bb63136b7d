#include "mnar/pipeline.hpp"

#include "mnar/log.hpp"

namespace mnar {

namespace {

ModelParams assemble(const Vector& lambda, const Vector& gamma, const Step2Fit& s2) {
  ModelParams p;
  p.lambda = lambda;
  p.gamma = gamma;
  p.beta = s2.beta_hat;
  p.intercept_b = s2.b_hat;
  p.rank_b = s2.b_rank_hat;
  return p;
}

}  // namespace

MnarFit fit_mnar(const WeightedPanel& wp, const MissingModel& mm, const NetworkPair& nets,
                 const Covariates& cov, const FitConfig& cfg) {
  cfg.step2.validate();
  MnarFit out;
  out.missing = mm;
  const Step1Problem prob(wp, nets, cfg.step1);
  out.step1 = fit_step1(prob);
  if (!out.step1.converged) {
    log::warn("step 1 did not converge within {} sweeps", cfg.step1.max_iter);
  }
  out.rounds = cfg.debias_rounds < 0 ? default_debias_rounds(wp.horizon()) : cfg.debias_rounds;

  const std::vector<Matrix> resid_org = residual_panel(wp, nets, out.step1.lambda_hat, out.step1.gamma_hat);
  out.step2_org = fit_step2_from_mean(time_average(resid_org), cov, cfg.step2);
  out.org = assemble(out.step1.lambda_hat, out.step1.gamma_hat, out.step2_org);

  if (out.rounds > 0) {
    out.bias = debias_rounds(out.step1, wp, nets, prob, out.rounds);
    out.sigma2_condition = out.bias->condition_number;
    if (!out.bias->contraction_ok) log::warn("debiasing corrections did not shrink across rounds");
    out.step2_adj = fit_step2(wp, nets, out.bias->lambda, out.bias->gamma, cov, cfg.step2);
    out.adj = assemble(out.bias->lambda, out.bias->gamma, out.step2_adj);
  } else {
    out.step2_adj = out.step2_org;
    out.adj = out.org;
  }
  return out;
}

MnarFit fit_mnar(const PanelSeries& panel, const NetworkPair& nets, const Covariates& cov,
                 const FitConfig& cfg) {
  const MissingModel mm = fit_missing_model(cfg.mechanism, panel, cov);
  const WeightedPanel wp = build_weighted_panel(panel, mm);
  return fit_mnar(wp, mm, nets, cov, cfg);
}

}  // namespace mnar
