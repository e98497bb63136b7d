#pragma once

#include "mnar/debias.hpp"
#include "mnar/step2.hpp"

#include <optional>

namespace mnar {

struct FitConfig {
  Mechanism mechanism = Mechanism::MAR;
  Step1Config step1;
  Step2Config step2;
  // Debiasing rounds; negative selects default_debias_rounds(T), 0 disables.
  int debias_rounds = -1;
};

// Output of the full two-step procedure: the raw (ORG) estimate and the
// debiased (ADJ) estimate, each with its own second step.
struct MnarFit {
  MissingModel missing;
  Step1Fit step1;
  std::optional<BiasState> bias;
  ModelParams org;
  ModelParams adj;
  Step2Fit step2_org;
  Step2Fit step2_adj;
  int rounds = 0;
  double sigma2_condition = 0.0;
};

// Missingness model, IPW panel, step 1, debiasing and step 2.
MnarFit fit_mnar(const PanelSeries& panel, const NetworkPair& nets, const Covariates& cov,
                 const FitConfig& cfg);

// Same, with the missingness model and weighted panel already built.
MnarFit fit_mnar(const WeightedPanel& wp, const MissingModel& mm, const NetworkPair& nets,
                 const Covariates& cov, const FitConfig& cfg);

}  // namespace mnar
