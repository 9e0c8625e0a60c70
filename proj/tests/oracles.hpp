#pragma once

// Reference computations used only by the tests.

#include "prb/prb.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <functional>
#include <vector>

namespace prb::oracle {

inline double matern52(double var, const Vec& ls, const Vec& x, const Vec& y) {
  const double r = ((x - y).array() / ls.array()).matrix().norm();
  const double s = std::sqrt(5.0) * r;
  return var * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

inline Mat gram(const GPHyperparams& h, const Mat& A, const Mat& B) {
  Mat K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.rows(); ++j)
      K(i, j) = matern52(h.kernel.variance, h.kernel.lengthscales, A.row(i).transpose(), B.row(j).transpose());
  return K;
}

struct DenseMoments {
  Vec mean;
  Mat cov;
};

/// Posterior by dense LU solve, no Cholesky.
inline DenseMoments dense_posterior(const GPHyperparams& h, const Mat& X, const Vec& y, const Mat& Q) {
  DenseMoments out;
  const Mat Kqq = gram(h, Q, Q);
  if (X.rows() == 0) {
    out.mean = Vec::Constant(Q.rows(), h.mean_constant);
    out.cov = Kqq;
    return out;
  }
  Mat L = gram(h, X, X);
  L.diagonal().array() += h.noise_variance;
  const Mat Kqx = gram(h, Q, X);
  const Eigen::FullPivLU<Mat> lu(L);
  out.mean = (Kqx * lu.solve((y.array() - h.mean_constant).matrix())).array() + h.mean_constant;
  out.cov = Kqq - Kqx * lu.solve(Mat(Kqx.transpose()));
  return out;
}

/// Beta quantile by plain bisection on boost's regularized incomplete beta.
inline double beta_quantile(double p, double a, double b) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (boost::math::ibeta(a, b, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline Mat grid_1d(int n) {
  Mat g(n, 1);
  for (int i = 0; i < n; ++i) g(i, 0) = static_cast<double>(i) / (n - 1);
  return g;
}

inline double grid_max(const std::function<double(const Vec&)>& f, int n, Vec* argmax = nullptr) {
  double best = -kInf;
  Vec x(1);
  for (int i = 0; i < n; ++i) {
    x[0] = static_cast<double>(i) / (n - 1);
    const double v = f(x);
    if (v > best) {
      best = v;
      if (argmax) *argmax = x;
    }
  }
  return best;
}

/// A fixed 1D posterior with `t` observations of a smooth function.
inline PosteriorGP fixture_1d(int t, double noise, Seed seed, double ls = 0.2) {
  GPHyperparams h;
  h.kernel = KernelSpec(1.0, Vec::Constant(1, ls));
  h.noise_variance = noise;
  Rng rng = make_rng(seed);
  Dataset d(1);
  for (int i = 0; i < t; ++i) {
    const Vec x = uniform_point(rng, 1);
    d.add(x, std::sin(6.0 * x[0]) + 0.5 * std::cos(11.0 * x[0]));
  }
  return PosteriorGP(h, d);
}

}  // namespace prb::oracle

namespace prb::oracle {

/// P(max_j F_j - F_i <= eps) for every grid point i, by exact joint sampling
/// of F ~ N(mu, K) on the grid (Cholesky location-scale).
inline Vec grid_psi(const PosteriorGP& gp, const Mat& grid, double eps, int samples, Seed seed) {
  const auto mom = dense_posterior(gp.hyper(), gp.points(), gp.latent_values(), grid);
  Mat K = mom.cov;
  K.diagonal().array() += 1e-10;
  const Eigen::LLT<Mat> llt(K);
  const Mat L = llt.matrixL();
  Rng rng = make_rng(seed);
  Vec hits = Vec::Zero(grid.rows());
  for (int s = 0; s < samples; ++s) {
    const Vec f = mom.mean + L * standard_normal_vector(rng, grid.rows());
    const double top = f.maxCoeff();
    hits.array() += (top - f.array() <= eps).cast<double>();
  }
  return hits / samples;
}

/// The eight-observation 1D benchmark used for the estimator comparison.
inline PosteriorGP psi_fixture() { return fixture_1d(8, 1e-3, 2024, 0.15); }

}  // namespace prb::oracle
