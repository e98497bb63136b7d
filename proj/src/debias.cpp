#include "mnar/debias.hpp"

#include <algorithm>
#include <cmath>

namespace mnar {

namespace {

constexpr const char* kModule = "debias";

struct BiasContext {
  Vector row_weight;  // sum_k W1_ik^2 sum_j Mbar_kj
  Vector col_weight;  // sum_k W2_kj^2 sum_i Mbar_ik
  Eigen::LDLT<Matrix> sigma2;
  double condition = 0.0;
  double mt = 0.0;
};

// Mbar = T^-1 sum_t Zhat_t^2 (p_hat - 1), over every period.
BiasContext make_context(const WeightedPanel& wp, const NetworkPair& nets, const Step1Problem& prob) {
  const Index T = wp.horizon();
  Matrix mbar = Matrix::Zero(wp.n1(), wp.n2());
  for (const auto& infl : wp.inflation) mbar += infl;
  mbar /= static_cast<double>(T);

  BiasContext ctx;
  ctx.row_weight = nets.w1.cwiseAbs2() * mbar.rowwise().sum();
  ctx.col_weight = nets.w2.cwiseAbs2().transpose() * mbar.colwise().sum().transpose();
  ctx.mt = static_cast<double>(wp.n1() + wp.n2()) * static_cast<double>(T);

  const Matrix sigma2 = hessian_sigma2(prob);
  ctx.sigma2.compute(sigma2);
  if (ctx.sigma2.info() != Eigen::Success) throw NumericError(kModule, "Sigma2 factorization failed");
  // rcond() ignores zero pivots
  const double rcond = ctx.sigma2.rcond();
  const Vector piv = ctx.sigma2.vectorD().cwiseAbs();
  const double spread = piv.minCoeff() > 0.0 ? piv.maxCoeff() / piv.minCoeff() : std::numeric_limits<double>::infinity();
  ctx.condition = rcond > 0.0 ? std::max(1.0 / rcond, spread) : std::numeric_limits<double>::infinity();
  if (!(ctx.condition <= kMaxSigma2Condition)) {
    throw NumericError(kModule, "Sigma2 is too ill-conditioned to solve (condition estimate " +
                                    std::to_string(ctx.condition) + ")");
  }
  return ctx;
}

void record(BiasState& st) {
  const double sup = st.b_hat.size() ? st.b_hat.cwiseAbs().maxCoeff() : 0.0;
  if (!st.b_sup_norms.empty() && sup > st.b_sup_norms.back()) st.contraction_ok = false;
  st.b_sup_norms.push_back(sup);
}

BiasState round1(const Step1Fit& fit, const Step1Problem& prob, const BiasContext& ctx) {
  const Index n1 = prob.n1();
  const Index n2 = prob.n2();
  if (fit.lambda_hat.size() != n1 || fit.gamma_hat.size() != n2) {
    throw ShapeError(kModule, "step-1 fit does not match the problem dimensions");
  }
  BiasState st;
  st.round = 1;
  st.condition_number = ctx.condition;
  st.b_hat_raw.resize(n1 + n2);
  st.b_hat_raw.head(n1) = (2.0 / ctx.mt) * fit.lambda_hat.cwiseProduct(ctx.row_weight);
  st.b_hat_raw.tail(n2) = (2.0 / ctx.mt) * fit.gamma_hat.cwiseProduct(ctx.col_weight);

  Vector ridge(n1 + n2);
  ridge.head(n1) = 2.0 * prob.config().nu1 * fit.lambda_hat;
  ridge.tail(n2) = 2.0 * prob.config().nu2 * fit.gamma_hat;
  st.b_hat = ctx.sigma2.solve(st.b_hat_raw - ridge / ctx.mt);
  st.lambda = fit.lambda_hat - st.b_hat.head(n1);
  st.gamma = fit.gamma_hat - st.b_hat.tail(n2);
  record(st);
  return st;
}

}  // namespace

int default_debias_rounds(Index horizon) { return horizon <= 30 ? 2 : 1; }

BiasState estimate_bias_round1(const Step1Fit& fit, const WeightedPanel& wp, const NetworkPair& nets,
                               const Step1Problem& prob) {
  return round1(fit, prob, make_context(wp, nets, prob));
}

BiasState debias_rounds(const Step1Fit& fit, const WeightedPanel& wp, const NetworkPair& nets,
                        const Step1Problem& prob, int rounds) {
  if (rounds < 1) throw ConfigError(kModule, "rounds must be at least 1");
  const BiasContext ctx = make_context(wp, nets, prob);
  BiasState st = round1(fit, prob, ctx);
  const Index n1 = prob.n1();
  const Index n2 = prob.n2();
  for (int r = 2; r <= rounds; ++r) {
    Vector raw(n1 + n2);
    raw.head(n1) = ctx.row_weight.cwiseProduct(st.b_hat.head(n1)) / ctx.mt;
    raw.tail(n2) = ctx.col_weight.cwiseProduct(st.b_hat.tail(n2)) / ctx.mt;
    const double sign = (r % 2 == 0) ? -1.0 : 1.0;  // (-1)^(r+1)
    st.b_hat_raw = std::move(raw);
    st.b_hat = sign * ctx.sigma2.solve(st.b_hat_raw);
    st.lambda -= st.b_hat.head(n1);
    st.gamma -= st.b_hat.tail(n2);
    st.round = r;
    record(st);
  }
  return st;
}

}  // namespace mnar
