#pragma once

#include "mnar/step1.hpp"

namespace mnar {

struct BiasState {
  int round = 0;
  Vector b_hat_raw;  // bias score of the latest round, length N1 + N2
  Vector b_hat;      // signed Sigma2^-1 correction of the latest round
  Vector lambda;     // debiased estimates after `round` rounds
  Vector gamma;
  std::vector<double> b_sup_norms;  // ||b_hat_r||_inf for r = 1..round
  double condition_number = 0.0;     // of Sigma2
  bool contraction_ok = true;         // sup norms shrink round over round
};

// Rounds used when the caller does not choose: two for short panels (T <= 30),
// otherwise one.
int default_debias_rounds(Index horizon);

// Largest admissible condition number of Sigma2.
inline constexpr double kMaxSigma2Condition = 1e12;

// First-round plug-in bias b1 = Sigma2^-1 (b^(1) - r / (mT)), theta_hat = theta_tilde - b1.
BiasState estimate_bias_round1(const Step1Fit& fit, const WeightedPanel& wp, const NetworkPair& nets,
                               const Step1Problem& prob);

// Round 1, then b_r = (-1)^(r+1) Sigma2^-1 b^(r) with b^(r) rescaling b_{r-1}
// by the row/column inflation sums; theta_r = theta_{r-1} - b_r.
BiasState debias_rounds(const Step1Fit& fit, const WeightedPanel& wp, const NetworkPair& nets,
                        const Step1Problem& prob, int rounds);

}  // namespace mnar
