#include "helpers.hpp"

#include "doctest.h"

using namespace th;

namespace {

// Term-by-term evaluation straight from the definition, using the complete
// responses held by the instance.
double naive_objective(const Instance& in, const Vector& lam, const Vector& gam, double nu1, double nu2) {
  const Index T = static_cast<Index>(in.y.size());
  const Index n1 = lam.size(), n2 = gam.size();
  const Matrix& w1 = in.nets.w1;
  const Matrix& w2 = in.nets.w2;
  auto z = [&](Index t, Index i, Index j) {
    return in.panel.observed(t, i, j) ? in.y[t](i, j) / in.mm.probs(i) : 0.0;
  };
  auto zy = [&](Index t, Index i, Index j) { return z(t, i, j) * (in.y[t](i, j) - z(t, i, j)); };
  auto zbar = [&](Index i, Index j) {
    double s = 0;
    for (Index t = 0; t < T; ++t) s += z(t, i, j);
    return s / T;
  };
  auto zbar_lag = [&](Index i, Index j) {
    double s = 0;
    for (Index t = 0; t + 1 < T; ++t) s += z(t, i, j);
    return s / (T - 1);
  };
  const double shrink = 1.0 - 1.0 / T;
  double total = 0.0;
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j) {
      for (Index t = 1; t < T; ++t) {
        double row = 0, col = 0;
        for (Index k = 0; k < n1; ++k) row += w1(i, k) * (z(t - 1, k, j) - zbar_lag(k, j));
        for (Index k = 0; k < n2; ++k) col += (z(t - 1, i, k) - zbar_lag(i, k)) * w2(k, j);
        const double d = z(t, i, j) - zbar(i, j) - lam(i) * row - col * gam(j);
        total += d * d;
        double cl = 0, cg = 0;
        for (Index k = 0; k < n1; ++k) cl += w1(i, k) * w1(i, k) * zy(t - 1, k, j);
        for (Index k = 0; k < n2; ++k) cg += w2(k, j) * w2(k, j) * zy(t - 1, i, k);
        total += shrink * (lam(i) * lam(i) * cl + gam(j) * gam(j) * cg + zy(t, i, j));
      }
    }
  return total + nu1 * lam.squaredNorm() + nu2 * gam.squaredNorm();
}

// Stacked least squares for the fully observed case: one row per (i, j, t).
Vector dense_joint_solve(const Instance& in, double nu1, double nu2) {
  const Index T = static_cast<Index>(in.y.size());
  const Index n1 = in.y[0].rows(), n2 = in.y[0].cols();
  Matrix zbar = Matrix::Zero(n1, n2), zlag = Matrix::Zero(n1, n2);
  for (Index t = 0; t < T; ++t) zbar += in.y[t] / T;
  for (Index t = 0; t + 1 < T; ++t) zlag += in.y[t] / (T - 1);
  Matrix D = Matrix::Zero(n1 * n2 * (T - 1), n1 + n2);
  Vector r(D.rows());
  Index row = 0;
  for (Index t = 1; t < T; ++t) {
    const Matrix lag = in.y[t - 1] - zlag;
    const Matrix g = in.nets.w1 * lag, h = lag * in.nets.w2;
    for (Index i = 0; i < n1; ++i)
      for (Index j = 0; j < n2; ++j, ++row) {
        D(row, i) = g(i, j);
        D(row, n1 + j) = h(i, j);
        r(row) = in.y[t](i, j) - zbar(i, j);
      }
  }
  Vector pen(n1 + n2);
  pen.head(n1).setConstant(nu1);
  pen.tail(n2).setConstant(nu2);
  const Matrix lhs = D.transpose() * D + Matrix(pen.asDiagonal());
  return lhs.ldlt().solve(D.transpose() * r);
}

}  // namespace

TEST_CASE("objective matches the brute-force evaluator") {
  const Instance in = make_instance(3, 3, 3, 41);
  Rng rng(1);
  for (int rep = 0; rep < 5; ++rep) {
    const Vector lam = randu(3, rng, -0.5, 0.5), gam = randu(3, rng, -0.5, 0.5);
    Step1Config cfg;
    cfg.nu1 = 0.3;
    cfg.nu2 = 1.7;
    const double want = naive_objective(in, lam, gam, cfg.nu1, cfg.nu2);
    CHECK(std::abs(profile_objective(in.wp, in.nets, lam, gam, cfg) - want) < 1e-10 * std::max(1.0, std::abs(want)));
    const Step1Problem prob(in.wp, in.nets, cfg);
    CHECK(std::abs(prob.objective(lam, gam) - want) < 1e-10 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("objective special cases") {
  Step1Config cfg;
  const Instance full = make_instance(4, 3, 5, 2, true);
  Rng rng(2);
  const Vector lam = randu(4, rng, -0.4, 0.4), gam = randu(3, rng, -0.4, 0.4);
  const Step1Problem fp(full.wp, full.nets, cfg);
  CHECK(fp.kappa().cwiseAbs().maxCoeff() == 0.0);
  CHECK(fp.corr_gamma().cwiseAbs().maxCoeff() == 0.0);
  double plain = 0.0;
  for (Index t = 1; t < 5; ++t) {
    const Matrix& lag = full.wp.z_lag_centered[t - 1];
    plain += (full.wp.z_centered[t] - lam.asDiagonal() * (full.nets.w1 * lag) - (lag * full.nets.w2) * gam.asDiagonal())
                 .squaredNorm();
  }
  CHECK(profile_objective(full.wp, full.nets, lam, gam, cfg) == doctest::Approx(plain).epsilon(1e-12));

  const Instance in = make_instance(4, 3, 5, 3);
  double base = 0.0;
  for (Index t = 1; t < 5; ++t) base += in.wp.z_centered[t].squaredNorm() + 0.8 * in.wp.inflation[t].sum();
  CHECK(profile_objective(in.wp, in.nets, Vector::Zero(4), Vector::Zero(3), cfg) == doctest::Approx(base).epsilon(1e-12));

  const Instance one = make_instance(3, 3, 1, 4);
  CHECK_THROWS_AS(Step1Problem(one.wp, one.nets, cfg), ShapeError);
  CHECK_THROWS_AS(profile_objective(one.wp, one.nets, Vector::Zero(3), Vector::Zero(3), cfg), ShapeError);
}

TEST_CASE("correction scalars are nonpositive") {
  const Instance in = make_instance(6, 5, 6, 5);
  const Step1Problem prob(in.wp, in.nets, Step1Config{});
  CHECK(prob.kappa().maxCoeff() <= 0.0);
  CHECK(prob.corr_gamma().maxCoeff() <= 0.0);
}

TEST_CASE("block updates minimize the one-dimensional parabola") {
  const Instance in = make_instance(4, 3, 6, 6);
  Step1Config cfg;
  cfg.nu1 = 2.0;
  cfg.nu2 = 2.0;
  const Step1Problem prob(in.wp, in.nets, cfg);
  Rng rng(7);
  const Vector gam = randu(3, rng, -0.3, 0.3);
  const Vector lam0 = randu(4, rng, -0.3, 0.3);
  const Vector lam = update_lambda_block(prob, gam);
  for (Index i = 0; i < 4; ++i) {
    // Fit f(x) = a x^2 + b x + c through three points of the objective.
    auto f = [&](double x) {
      Vector l = lam0;
      l(i) = x;
      return profile_objective(in.wp, in.nets, l, gam, cfg);
    };
    const double f0 = f(0.0), f1 = f(1.0), fm = f(-1.0);
    const double a = (f1 + fm - 2 * f0) / 2, b = (f1 - fm) / 2;
    CHECK(lam(i) == doctest::Approx(-b / (2 * a)).epsilon(1e-8));
  }
  const Vector gnew = update_gamma_block(prob, lam0);
  for (Index j = 0; j < 3; ++j) {
    auto f = [&](double x) {
      Vector g = gam;
      g(j) = x;
      return profile_objective(in.wp, in.nets, lam0, g, cfg);
    };
    const double f0 = f(0.0), f1 = f(1.0), fm = f(-1.0);
    CHECK(gnew(j) == doctest::Approx(-((f1 - fm) / 2) / (f1 + fm - 2 * f0)).epsilon(1e-8));
  }
}

TEST_CASE("block optimality of the partial derivatives") {
  const Instance in = make_instance(7, 6, 8, 8);
  const Step1Problem prob(in.wp, in.nets, Step1Config{});
  Rng rng(3);
  const Vector gam = randu(6, rng, -0.3, 0.3);
  const Vector lam = update_lambda_block(prob, gam);
  const Vector g = prob.gradient(lam, gam);
  const double scale = prob.lambda_denominators().cwiseAbs().maxCoeff();
  CHECK(g.head(7).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, scale));
  const Vector gam2 = update_gamma_block(prob, lam);
  CHECK(prob.gradient(lam, gam2).tail(6).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, scale));
}

TEST_CASE("gradient matches central differences") {
  const Instance in = make_instance(4, 4, 5, 9);
  Step1Config cfg;
  cfg.nu1 = 0.5;
  const Step1Problem prob(in.wp, in.nets, cfg);
  Rng rng(4);
  const Vector lam = randu(4, rng, -0.3, 0.3), gam = randu(4, rng, -0.3, 0.3);
  const Vector g = prob.gradient(lam, gam);
  const double h = 1e-5;
  for (Index k = 0; k < 8; ++k) {
    Vector lp = lam, lm = lam, gp = gam, gm = gam;
    if (k < 4) {
      lp(k) += h;
      lm(k) -= h;
    } else {
      gp(k - 4) += h;
      gm(k - 4) -= h;
    }
    const double fd = (profile_objective(in.wp, in.nets, lp, gp, cfg) - profile_objective(in.wp, in.nets, lm, gm, cfg)) / (2 * h);
    CHECK(g(k) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("transposed data swaps the roles of the blocks") {
  const Instance in = make_instance(5, 4, 6, 10, true);
  Instance tr;
  std::vector<MaskMatrix> masks;
  for (const Matrix& y : in.y) {
    tr.y.push_back(y.transpose());
    masks.push_back(MaskMatrix::Ones(4, 5));
  }
  tr.nets = normalize_networks(in.nets.a2.transpose(), in.nets.a1.transpose());
  tr.mm.probs = Vector::Ones(4);
  tr.panel = PanelSeries(tr.y, masks);
  tr.wp = build_weighted_panel(tr.panel, tr.mm);
  Step1Config cfg;
  cfg.nu1 = 0.7;
  cfg.nu2 = 0.7;
  const Step1Problem a(in.wp, in.nets, cfg), b(tr.wp, tr.nets, cfg);
  Rng rng(5);
  const Vector lam = randu(5, rng, -0.3, 0.3);
  const Vector gam = randu(4, rng, -0.3, 0.3);
  CHECK(max_abs(update_gamma_block(a, lam) - update_lambda_block(b, lam)) < 1e-12);
  CHECK(max_abs(update_lambda_block(a, gam) - update_gamma_block(b, gam)) < 1e-12);
}

TEST_CASE("large ridge on gamma drives it to zero") {
  const Instance in = make_instance(5, 5, 8, 11);
  Step1Config cfg;
  cfg.nu1 = 1.0;
  cfg.nu2 = 1e12;
  const Step1Fit fit = fit_step1(in.wp, in.nets, cfg);
  CHECK(fit.gamma_hat.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("static noiseless data gives zero network effects") {
  Rng rng(12);
  Instance in = make_instance(5, 4, 10, 12, true);
  const Matrix level = randn(5, 4, rng);
  for (auto& y : in.y) y = level;
  in.panel = PanelSeries(in.y, std::vector<MaskMatrix>(10, MaskMatrix::Ones(5, 4)));
  in.wp = build_weighted_panel(in.panel, in.mm);
  Step1Config cfg;
  cfg.nu1 = 1e-3;
  cfg.nu2 = 1e-3;
  const Step1Fit fit = fit_step1(in.wp, in.nets, cfg);
  CHECK(fit.lambda_hat.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(fit.gamma_hat.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("full-observation fit equals the dense joint solve") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance in = make_instance(4, 4, 50, 100 + seed, true);
    Step1Config cfg;
    cfg.tol = 1e-12;
    cfg.max_iter = 10000;
    const Step1Fit fit = fit_step1(in.wp, in.nets, cfg);
    const Vector want = dense_joint_solve(in, 0.0, 0.0);
    CHECK(fit.converged);
    CHECK(max_abs(fit.lambda_hat - want.head(4)) < 1e-6);
    CHECK(max_abs(fit.gamma_hat - want.tail(4)) < 1e-6);
  }
}

TEST_CASE("fit is monotone and stationary at convergence") {
  const Instance in = make_instance(8, 7, 12, 13);
  Step1Config cfg;
  cfg.nu1 = 5;
  cfg.nu2 = 5;
  cfg.tol = 1e-10;
  cfg.max_iter = 5000;
  const Step1Problem prob(in.wp, in.nets, cfg);
  const Step1Fit fit = fit_step1(prob);
  CHECK(fit.monotone);
  for (std::size_t k = 1; k < fit.objective_trace.size(); ++k)
    CHECK(fit.objective_trace[k] <= fit.objective_trace[k - 1] + 1e-9 * std::abs(fit.objective_trace[k - 1]));
  CHECK(fit.converged);
  CHECK(prob.gradient(fit.lambda_hat, fit.gamma_hat).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("relabeling row nodes permutes lambda and keeps gamma") {
  const Instance in = make_instance(6, 5, 9, 14);
  Rng rng(15);
  const auto perm = random_perm(6, rng);
  const Instance pin = permute_rows(in, perm);
  Step1Config cfg;
  cfg.nu1 = 2;
  cfg.nu2 = 2;
  cfg.tol = 1e-12;
  cfg.max_iter = 5000;
  const Step1Fit a = fit_step1(in.wp, in.nets, cfg), b = fit_step1(pin.wp, pin.nets, cfg);
  CHECK(max_abs(perm_matrix(perm) * a.lambda_hat - b.lambda_hat) < 1e-10);
  CHECK(max_abs(a.gamma_hat - b.gamma_hat) < 1e-10);
}

TEST_CASE("nonpositive denominators name the node") {
  Instance in = make_instance(4, 4, 5, 16, true);
  Matrix a1 = in.nets.a1;
  a1.row(2).setZero();
  in.nets = normalize_networks(a1, in.nets.a2);
  const Step1Problem prob(in.wp, in.nets, Step1Config{});
  try {
    update_lambda_block(prob, Vector::Zero(4));
    FAIL("expected an error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("row node 2") != std::string::npos);
  }
}

TEST_CASE("analytic Hessian matches finite differences") {
  const Instance in = make_instance(3, 3, 4, 17);
  Step1Config cfg;
  cfg.nu1 = 0.4;
  cfg.nu2 = 0.9;
  const Matrix sigma = hessian_sigma2(in.wp, in.nets, cfg);
  Rng rng(18);
  const Vector x = randu(6, rng, -0.3, 0.3);
  auto f = [&](const Vector& v) { return profile_objective(in.wp, in.nets, v.head(3), v.tail(3), cfg); };
  const Matrix fd = fd_hessian(f, x, 1e-4) / (6.0 * 4.0);
  CHECK(max_abs(sigma - fd) <= 1e-5 * max_abs(fd));
  CHECK(max_abs(sigma - sigma.transpose()) == 0.0);

  const Step1Problem prob(in.wp, in.nets, cfg);
  const double scale = 2.0 / (6.0 * 4.0);
  CHECK(max_abs(sigma.diagonal().head(3) - scale * prob.lambda_denominators()) < 1e-14 * max_abs(sigma));
  CHECK(max_abs(sigma.diagonal().tail(3) - scale * prob.gamma_denominators()) < 1e-14 * max_abs(sigma));
  Matrix offd = sigma.topLeftCorner(3, 3);
  offd.diagonal().setZero();
  CHECK(max_abs(offd) == 0.0);
}

TEST_CASE("Hessian with constant data carries only the corrections") {
  Rng rng(19);
  Instance in = make_instance(4, 3, 5, 19);
  const Matrix level = randn(4, 3, rng);
  const MaskMatrix m = in.panel.mask(0);
  in.y.assign(5, level);
  in.panel = PanelSeries(in.y, std::vector<MaskMatrix>(5, m));
  in.wp = build_weighted_panel(in.panel, in.mm);
  const Step1Problem prob(in.wp, in.nets, Step1Config{});
  const Matrix sigma = hessian_sigma2(prob);
  const double scale = 2.0 / (7.0 * 5.0);
  Vector diag(7);
  diag << prob.kappa(), prob.corr_gamma();
  Matrix want = scale * Matrix(diag.asDiagonal());
  CHECK(max_abs(sigma - want) < 1e-12);
}
