#pragma once

#include "mnar/eval.hpp"

#include <algorithm>
#include <numeric>

namespace th {

using namespace mnar;

inline Matrix randn(Index r, Index c, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

inline Vector randu(Index n, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> ud(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = ud(rng);
  return v;
}

// Binary, zero diagonal, every row and column with at least one edge.
inline Matrix random_adjacency(Index n, double density, Rng& rng) {
  std::bernoulli_distribution bd(density);
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && bd(rng)) a(i, j) = 1.0;
  for (Index i = 0; i < n && n > 1; ++i) {
    if (a.row(i).sum() == 0.0) a(i, (i + 1) % n) = 1.0;
    if (a.col(i).sum() == 0.0) a((i + 1) % n, i) = 1.0;
  }
  return a;
}

inline std::vector<MaskMatrix> random_masks(Index T, const Vector& probs, Index n2, Rng& rng) {
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  std::vector<MaskMatrix> m(static_cast<std::size_t>(T), MaskMatrix::Zero(probs.size(), n2));
  for (auto& mt : m)
    for (Index j = 0; j < n2; ++j)
      for (Index i = 0; i < probs.size(); ++i) mt(i, j) = ud(rng) < probs(i) ? 1 : 0;
  return m;
}

// Small random instance with known complete responses and per-row
// probabilities used directly as the missingness model.
struct Instance {
  std::vector<Matrix> y;
  PanelSeries panel;
  NetworkPair nets;
  Covariates cov;
  MissingModel mm;
  WeightedPanel wp;
};

inline Instance make_instance(Index n1, Index n2, Index T, std::uint64_t seed, bool full = false, Index p = 2) {
  Rng rng(seed);
  Instance in;
  for (Index t = 0; t < T; ++t) in.y.push_back(randn(n1, n2, rng));
  in.nets = normalize_networks(random_adjacency(n1, 0.5, rng), random_adjacency(n2, 0.5, rng));
  in.cov.x = randn(n1, p, rng);
  in.cov.x.col(0).setOnes();
  in.mm.mechanism = Mechanism::MAR;
  in.mm.probs = full ? Vector::Ones(n1) : randu(n1, rng, 0.4, 0.9);
  std::vector<MaskMatrix> masks = full ? std::vector<MaskMatrix>(static_cast<std::size_t>(T), MaskMatrix::Ones(n1, n2))
                                       : random_masks(T, in.mm.probs, n2, rng);
  in.panel = PanelSeries(in.y, masks);
  in.wp = build_weighted_panel(in.panel, in.mm);
  return in;
}

// Permutation matrix sending index i to perm[i].
inline Matrix perm_matrix(const std::vector<int>& perm) {
  const Index n = static_cast<Index>(perm.size());
  Matrix p = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) p(perm[static_cast<std::size_t>(i)], i) = 1.0;
  return p;
}

inline std::vector<int> random_perm(int n, Rng& rng) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace th

namespace th {

// Row nodes relabeled so that old node i becomes perm[i].
inline Instance permute_rows(const Instance& in, const std::vector<int>& perm) {
  const Matrix P = perm_matrix(perm);
  Instance out;
  std::vector<MaskMatrix> masks;
  for (std::size_t t = 0; t < in.y.size(); ++t) {
    out.y.push_back(P * in.y[t]);
    masks.push_back((P * in.panel.mask(static_cast<Index>(t)).cast<double>()).cast<std::uint8_t>());
  }
  out.nets = normalize_networks(P * in.nets.a1 * P.transpose(), in.nets.a2);
  out.cov.x = P * in.cov.x;
  out.mm = in.mm;
  out.mm.probs = P * in.mm.probs;
  out.panel = PanelSeries(out.y, masks);
  out.wp = build_weighted_panel(out.panel, out.mm);
  return out;
}

// Central-difference Hessian of f at x.
template <class F>
Matrix fd_hessian(F&& f, const Vector& x, double h) {
  const Index n = x.size();
  Matrix H(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) {
      auto at = [&](double da, double db) {
        Vector y = x;
        y(a) += da;
        y(b) += db;
        return f(y);
      };
      H(a, b) = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
    }
  return H;
}

}  // namespace th

namespace th {

// Nuclear-norm prox argmin_B ||M - B||_F^2 + 2c ||B||_* via projected gradient
// on its dual: W in the unit spectral-norm ball minimizing ||M - cW||_F^2,
// then B = M - cW.
inline Matrix prox_oracle(const Matrix& m, double c, int iters = 10000) {
  if (c == 0.0) return m;
  Matrix w = Matrix::Zero(m.rows(), m.cols());
  const double step = 0.1 / (c * c);
  for (int k = 0; k < iters; ++k) {
    w += step * 2.0 * c * (m - c * w);
    Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = svd.singularValues().cwiseMin(1.0);
    w = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  }
  return m - c * w;
}

// Plain subgradient descent on the primal with step 1/(2k).
inline Matrix prox_subgradient(const Matrix& m, double c, int iters = 10000) {
  Matrix b = Matrix::Zero(m.rows(), m.cols());
  for (int k = 1; k <= iters; ++k) {
    Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Matrix g = 2.0 * (b - m);
    for (Index r = 0; r < svd.singularValues().size(); ++r)
      if (svd.singularValues()(r) > 0.0) g += 2.0 * c * svd.matrixU().col(r) * svd.matrixV().col(r).transpose();
    b -= g / (2.0 * k);
  }
  return b;
}

inline double prox_objective(const Matrix& m, const Matrix& b, double c) {
  return (m - b).squaredNorm() + 2.0 * c * Eigen::JacobiSVD<Matrix>(b).singularValues().sum();
}

}  // namespace th
