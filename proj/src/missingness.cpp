#include "mnar/missingness.hpp"

#include "mnar/simulate.hpp"

#include <cmath>

namespace mnar {

namespace {

constexpr const char* kModule = "missingness";
constexpr double kSeparationLogit = 15.0;

struct RowCounts {
  Vector successes;  // per row
  double trials = 0; // per row
};

RowCounts count_rows(const std::vector<MaskMatrix>& mask) {
  if (mask.empty()) throw ShapeError(kModule, "empty mask sequence");
  const Index n1 = mask.front().rows();
  const Index n2 = mask.front().cols();
  RowCounts c{Vector::Zero(n1), static_cast<double>(n2) * static_cast<double>(mask.size())};
  for (const auto& r : mask) {
    if (r.rows() != n1 || r.cols() != n2) throw ShapeError(kModule, "mask slices differ in shape");
    c.successes += r.cast<double>().rowwise().sum();
  }
  return c;
}

}  // namespace

MissingModel fit_logistic_missing(const std::vector<MaskMatrix>& mask, const Covariates& cov,
                                  const LogisticFitOptions& opts) {
  const RowCounts counts = count_rows(mask);
  const Index n1 = counts.successes.size();
  if (cov.n1() != n1) throw ShapeError(kModule, "covariate rows differ from mask rows");
  const double total_ones = counts.successes.sum();
  const double total = counts.trials * static_cast<double>(n1);
  if (total_ones <= 0.0 || total_ones >= total) {
    throw NumericError(kModule, "logistic fit needs both observed and missing entries");
  }

  // Active design columns: the intercept plus every non-constant covariate.
  std::vector<Index> active;
  for (Index k = 0; k < cov.p(); ++k) {
    const auto col = cov.x.col(k);
    if (col.maxCoeff() - col.minCoeff() > 0.0) active.push_back(k);
  }
  const Index q = static_cast<Index>(active.size()) + 1;
  Matrix design(n1, q);
  design.col(0).setOnes();
  for (Index k = 0; k + 1 < q; ++k) design.col(k + 1) = cov.x.col(active[static_cast<std::size_t>(k)]);

  const double n = counts.trials;
  auto loglik = [&](const Vector& a) {
    const Vector eta = design * a;
    double ll = 0.0;
    for (Index i = 0; i < n1; ++i) {
      const double e = eta(i);
      const double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      ll += counts.successes(i) * e - n * log1pexp;
    }
    return ll / total;
  };

  Vector a = Vector::Zero(q);
  a(0) = std::log(total_ones / (total - total_ones));
  double ll = loglik(a);
  MissingModel mm;
  mm.mechanism = Mechanism::MAR;
  mm.converged = false;
  for (int it = 0; it < opts.max_iter; ++it) {
    const Vector eta = design * a;
    Vector resid(n1);
    Vector weight(n1);
    for (Index i = 0; i < n1; ++i) {
      const double pi = logistic(eta(i));
      resid(i) = (counts.successes(i) - n * pi) / total;
      weight(i) = n * pi * (1.0 - pi) / total;
    }
    const Vector grad = design.transpose() * resid;
    mm.iterations = it;
    if (grad.cwiseAbs().maxCoeff() < opts.grad_tol) {
      mm.converged = true;
      break;
    }
    const Matrix hess = design.transpose() * weight.asDiagonal() * design;
    Eigen::LDLT<Matrix> ldlt(hess);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-300) {
      throw NumericError(kModule, "logistic Hessian is singular (perfect separation?)");
    }
    const Vector step = ldlt.solve(grad);
    double scale = 1.0;
    Vector cand = a + step;
    double cand_ll = loglik(cand);
    for (int h = 0; h < 60 && !(cand_ll >= ll); ++h) {
      scale *= 0.5;
      cand = a + scale * step;
      cand_ll = loglik(cand);
    }
    if (!(cand_ll >= ll)) break;  // no ascent direction left; treat as converged below
    a = cand;
    ll = cand_ll;
    if (a.norm() > opts.separation_norm) {
      throw NumericError(kModule, "logistic coefficients diverge (perfect separation)");
    }
  }
  if (!mm.converged) {
    const Vector eta = design * a;
    Vector resid(n1);
    for (Index i = 0; i < n1; ++i) resid(i) = (counts.successes(i) - n * logistic(eta(i))) / total;
    const double g = (design.transpose() * resid).cwiseAbs().maxCoeff();
    if (a.norm() > opts.separation_norm && g > opts.grad_tol) {
      throw NumericError(kModule, "logistic fit stalled at a diverging solution");
    }
    mm.converged = g < 1e3 * opts.grad_tol;
  }

  // separation can pass the gradient test with rates pinned at 0 or 1
  if ((design * a).cwiseAbs().maxCoeff() > kSeparationLogit) {
    throw NumericError(kModule, "fitted probabilities collapse to 0 or 1 (perfect separation)");
  }

  mm.alpha = Vector::Zero(cov.p() + 1);
  mm.alpha(0) = a(0);
  for (Index k = 0; k + 1 < q; ++k) mm.alpha(active[static_cast<std::size_t>(k)] + 1) = a(k + 1);
  mm.probs.resize(n1);
  const Vector eta = design * a;
  for (Index i = 0; i < n1; ++i) mm.probs(i) = logistic(eta(i));
  return mm;
}

MissingModel estimate_uniform_rate(const std::vector<MaskMatrix>& mask) {
  const RowCounts counts = count_rows(mask);
  const double rate =
      counts.successes.sum() / (counts.trials * static_cast<double>(counts.successes.size()));
  MissingModel mm;
  mm.mechanism = Mechanism::UNI;
  mm.probs = Vector::Constant(counts.successes.size(), rate);
  return mm;
}

MissingModel fit_missing_model(Mechanism mechanism, const PanelSeries& panel, const Covariates& cov) {
  return mechanism == Mechanism::MAR ? fit_logistic_missing(panel.masks(), cov)
                                     : estimate_uniform_rate(panel.masks());
}

WeightedPanel build_weighted_panel(const PanelSeries& panel, const MissingModel& mm,
                                   double prob_floor) {
  const Index n1 = panel.n1();
  const Index n2 = panel.n2();
  const Index T = panel.horizon();
  if (mm.probs.size() != n1) throw ShapeError(kModule, "probability vector length differs from N1");
  if (T < 1) throw ShapeError(kModule, "panel has no time points");
  for (Index i = 0; i < n1; ++i) {
    if (!(mm.probs(i) >= prob_floor) || mm.probs(i) > 1.0) {
      throw NumericError(kModule, "ill-posed weighting: probability " + std::to_string(mm.probs(i)) +
                                      " for row " + std::to_string(i) + " is outside [" +
                                      std::to_string(prob_floor) + ", 1]");
    }
  }

  WeightedPanel wp;
  wp.probs = mm.probs;
  const Vector inv = mm.probs.cwiseInverse();
  const Vector pm1 = mm.probs.array() - 1.0;
  wp.z.reserve(static_cast<std::size_t>(T));
  wp.inflation.reserve(static_cast<std::size_t>(T));
  wp.zbar = Matrix::Zero(n1, n2);
  for (Index t = 0; t < T; ++t) {
    // Stored responses are already zero where unobserved.
    Matrix z = inv.asDiagonal() * panel.observed_values(t);
    Matrix infl = pm1.asDiagonal() * z.cwiseAbs2();
    wp.zbar += z;
    wp.z.push_back(std::move(z));
    wp.inflation.push_back(std::move(infl));
  }
  wp.zbar /= static_cast<double>(T);

  wp.zbar_lag = Matrix::Zero(n1, n2);
  if (T >= 2) {
    for (Index s = 0; s + 1 < T; ++s) wp.zbar_lag += wp.z[static_cast<std::size_t>(s)];
    wp.zbar_lag /= static_cast<double>(T - 1);
  }
  wp.z_centered.reserve(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) wp.z_centered.push_back(wp.z[static_cast<std::size_t>(t)] - wp.zbar);
  for (Index s = 0; s + 1 < T; ++s) {
    wp.z_lag_centered.push_back(wp.z[static_cast<std::size_t>(s)] - wp.zbar_lag);
  }
  return wp;
}

}  // namespace mnar
