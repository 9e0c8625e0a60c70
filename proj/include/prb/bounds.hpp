#pragma once

// Computable convergence diagnostics: Gaussian supremum tail and expectation
// bounds, posterior variance contraction under covers, the canonical
// pseudo-metric and fill distance.

#include "prb/common.hpp"
#include "prb/space_model.hpp"

#include <vector>

namespace prb {

struct BoundInputs {
  double epsilon = 0.0;
  double expected_sup = 0.0;
  double sigma_max = 0.0;
  double lipschitz_k = 0.0;
  int dim = 1;
  double edge = 1.0;
  double cover_radius = 0.0;
  double noise_variance = 0.0;
};

/// exp(-1/2 ((eps - E g*) / (2 sigma))^2).
inline double borell_tis_tail(double epsilon, double expected_sup, double sigma_max) {
  if (!(epsilon >= expected_sup)) throw std::invalid_argument("borell_tis_tail: need epsilon >= expected supremum");
  if (!(sigma_max > 0.0)) throw std::invalid_argument("borell_tis_tail: sigma must be positive");
  const double z = (epsilon - expected_sup) / (2.0 * sigma_max);
  return std::exp(-0.5 * z * z);
}

inline double borell_tis_tail(const BoundInputs& in) { return borell_tis_tail(in.epsilon, in.expected_sup, in.sigma_max); }

/// 12 sigma sqrt(2D + D log(1 + 4 L_k r / sigma^2)).
inline double expected_sup_bound(double sigma, int dim, double lipschitz_k, double edge) {
  if (!(sigma > 0.0)) throw std::invalid_argument("expected_sup_bound: sigma must be positive");
  if (dim < 1 || lipschitz_k < 0.0 || edge < 0.0) throw std::invalid_argument("expected_sup_bound: invalid inputs");
  const double D = dim;
  return 12.0 * sigma * std::sqrt(2.0 * D + D * std::log1p(4.0 * lipschitz_k * edge / (sigma * sigma)));
}

inline double expected_sup_bound(const BoundInputs& in) {
  return expected_sup_bound(in.sigma_max, in.dim, in.lipschitz_k, in.edge);
}

/// Ratio [(4 L rho k - L^2 rho^2) eta + g k] / [(k + 2 L rho) eta + g] for an
/// explicit radius rho and ball count eta; eta = inf gives the limit.
inline double variance_contraction_ratio(double k, double lipschitz_k, double noise, double rho, double eta) {
  const double a = 4.0 * lipschitz_k * rho * k - lipschitz_k * lipschitz_k * rho * rho;
  const double b = k + 2.0 * lipschitz_k * rho;
  const double v = std::isinf(eta) ? a / b : (a * eta + noise * k) / (b * eta + noise);
  return std::clamp(v, 0.0, k);
}

/// kappa_eps(x) with rho = eps^eps and eta = max{1, rho / (4 eps)}^D.
inline double variance_contraction_bound(double k, double lipschitz_k, double noise, double eps_cov, int dim) {
  if (!(lipschitz_k > 0.0)) throw std::invalid_argument("variance_contraction_bound: L_k must be positive");
  if (dim < 1 || k < 0.0 || noise < 0.0) throw std::invalid_argument("variance_contraction_bound: invalid inputs");
  if (eps_cov < 0.0 || eps_cov > std::min(1.0, k / lipschitz_k)) {
    throw std::invalid_argument("variance_contraction_bound: cover radius too large");
  }
  const double rho = std::pow(eps_cov, eps_cov);
  const double eta = eps_cov == 0.0 ? kInf : std::pow(std::max(1.0, rho / (4.0 * eps_cov)), dim);
  return variance_contraction_ratio(k, lipschitz_k, noise, rho, eta);
}

/// True when rho = eps^eps <= k / L_k.
inline bool variance_contraction_applies(double k, double lipschitz_k, double eps_cov) {
  return lipschitz_k > 0.0 && eps_cov > 0.0 && std::pow(eps_cov, eps_cov) <= k / lipschitz_k;
}

inline double variance_contraction_bound(double k, const BoundInputs& in) {
  return variance_contraction_bound(k, in.lipschitz_k, in.noise_variance, in.cover_radius, in.dim);
}

/// Lipschitz constant of k(., x') under the sup-norm for Matern-5/2:
/// sigma^2 max_r (5/3) r (1 + sqrt5 r) e^{-sqrt5 r} * ||1/l||_2, attained at
/// r = (sqrt5 + 5) / 10.
inline double matern52_lipschitz(const KernelSpec& spec) {
  spec.validate();
  const double s5 = std::sqrt(5.0);
  const double r = (s5 + 5.0) / 10.0;
  const double slope = (5.0 / 3.0) * r * (1.0 + s5 * r) * std::exp(-s5 * r);
  return spec.variance * slope * spec.lengthscales.cwiseInverse().norm();
}

/// d_{k_t}(x, x') = sqrt(k_t(x,x) - 2 k_t(x,x') + k_t(x',x')), clamped at 0.
inline double pseudo_metric(const PosteriorGP& gp, const Vec& x, const Vec& y) {
  Mat xs(2, x.size());
  xs.row(0) = x.transpose();
  xs.row(1) = y.transpose();
  const Mat c = gp.cross_cov(xs, xs);
  return std::sqrt(std::max(0.0, c(0, 0) - 2.0 * c(0, 1) + c(1, 1)));
}

/// Grid approximation of max_x min_i ||x - x_i||_inf (grid_resolution points
/// per axis, D <= 3).
inline double fill_distance(const Mat& points, int grid_resolution) {
  if (points.rows() == 0) throw std::invalid_argument("fill_distance: empty point set");
  if (grid_resolution < 2) throw std::invalid_argument("fill_distance: resolution must be at least 2");
  const int D = static_cast<int>(points.cols());
  if (D > 3) throw std::invalid_argument("fill_distance: grid approximation limited to D <= 3");
  long total = 1;
  for (int d = 0; d < D; ++d) total *= grid_resolution;
  double worst = 0.0;
  Vec g(D);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int d = 0; d < D; ++d) {
      g[d] = static_cast<double>(rem % grid_resolution) / (grid_resolution - 1);
      rem /= grid_resolution;
    }
    double nearest = kInf;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      nearest = std::min(nearest, (points.row(i).transpose() - g).lpNorm<Eigen::Infinity>());
    }
    worst = std::max(worst, nearest);
  }
  return worst;
}

}  // namespace prb
