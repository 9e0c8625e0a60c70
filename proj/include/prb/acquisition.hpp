#pragma once

// In-sample knowledge gradient. Fantasizing an observation at x shifts the
// posterior mean at X_t and x along k_t(., x) / sqrt(k_t(x,x) + noise); the
// value is the expected gain of the best in-sample mean.

#include "prb/common.hpp"
#include "prb/sample_opt.hpp"
#include "prb/space_model.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <numeric>
#include <vector>

namespace prb {

struct ISKGConfig {
  int quadrature_nodes = 16;
  // Identity link: exact integral of the piecewise-linear max.
  bool exact_identity = true;
  OptimizerConfig optimizer;

  void validate() const {
    if (quadrature_nodes < 2) throw std::invalid_argument("ISKGConfig: need at least two quadrature nodes");
    optimizer.validate();
  }
};

struct QuadratureRule {
  Vec nodes;
  Vec weights;  // sum to one; E[h(Z)] ~ sum w_i h(z_i) for Z ~ N(0,1)
};

/// Probabilists' Gauss-Hermite rule via Golub-Welsch.
inline QuadratureRule gauss_hermite(int q) {
  if (q < 1) throw std::invalid_argument("gauss_hermite: need at least one node");
  Mat J = Mat::Zero(q, q);
  for (int i = 1; i < q; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  QuadratureRule r;
  r.nodes = es.eigenvalues();
  r.weights = es.eigenvectors().row(0).transpose().array().square();
  r.weights /= r.weights.sum();
  return r;
}

inline const QuadratureRule& cached_gauss_hermite(int q) {
  static std::mutex mu;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(q);
  if (it == cache.end()) it = cache.emplace(q, gauss_hermite(q)).first;
  return it->second;
}

/// E[g^{-1}(F)] for F ~ N(mean, variance).
inline double expected_inverse_link(Link link, double mean, double variance, const QuadratureRule& rule) {
  if (link == Link::identity) return mean;
  const double s = std::sqrt(std::max(variance, 0.0));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * inverse_link(link, mean + s * rule.nodes[i]);
  return acc;
}

/// E[max_i (a_i + b_i Z)] for Z ~ N(0,1), by integrating over the upper
/// envelope of the lines.
inline double expected_max_affine(const Vec& a, const Vec& b) {
  const Eigen::Index n = a.size();
  if (n == 0) throw std::invalid_argument("expected_max_affine: empty input");
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index i, Eigen::Index j) { return b[i] < b[j] || (b[i] == b[j] && a[i] < a[j]); });

  // Keep the largest intercept per slope.
  std::vector<Eigen::Index> lines;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (k + 1 < idx.size() && b[idx[k + 1]] == b[idx[k]]) continue;
    lines.push_back(idx[k]);
  }
  // Envelope in increasing slope order with breakpoints c (line i wins on [c_i, c_{i+1})).
  std::vector<Eigen::Index> hull;
  std::vector<double> cuts;
  for (Eigen::Index l : lines) {
    while (!hull.empty()) {
      const Eigen::Index top = hull.back();
      const double c = (a[top] - a[l]) / (b[l] - b[top]);
      if (c <= cuts.back()) {
        hull.pop_back();
        cuts.pop_back();
      } else {
        hull.push_back(l);
        cuts.push_back(c);
        break;
      }
    }
    if (hull.empty()) {
      hull.push_back(l);
      cuts.push_back(-kInf);
    }
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < hull.size(); ++k) {
    const double lo = cuts[k];
    const double hi = k + 1 < hull.size() ? cuts[k + 1] : kInf;
    const double mass = normal_cdf(hi) - normal_cdf(lo);
    const double pdf_lo = std::isfinite(lo) ? normal_pdf(lo) : 0.0;
    const double pdf_hi = std::isfinite(hi) ? normal_pdf(hi) : 0.0;
    acc += a[hull[k]] * mass + b[hull[k]] * (pdf_lo - pdf_hi);
  }
  return acc;
}

/// Per-posterior quantities reused across every acquisition evaluation.
class ISKGContext {
 public:
  explicit ISKGContext(const PosteriorGP& gp) : gp_(gp) {
    if (gp.size() == 0) throw std::invalid_argument("ISKG: need at least one observation");
    noise_ = gp.hyper().noise_variance + gp.jitter();
    // mu_t(X) = z - noise * alpha.
    mu_data_ = gp.latent_values() - noise_ * gp.alpha();
    var_data_.resize(gp.size());
    const Mat Linv = gp.half_solve(Mat::Identity(gp.size(), gp.size()));
    // k_t(x_i, x_i) = noise - noise^2 [Lambda^{-1}]_ii
    for (Eigen::Index i = 0; i < gp.size(); ++i) {
      var_data_[i] = std::max(0.0, noise_ - noise_ * noise_ * Linv.col(i).squaredNorm());
    }
  }

  const PosteriorGP& posterior() const { return gp_; }
  const Vec& data_means() const { return mu_data_; }
  const Vec& data_variances() const { return var_data_; }
  double noise() const { return noise_; }

  struct Query {
    Vec cov_data;  // k_t(X_t, x)
    double mean = 0.0;
    double variance = 0.0;
  };

  Query query(const Vec& x) const {
    const Vec kx = gp_.kernel_column(x);
    const Vec w = gp_.solve(kx);
    Query q;
    q.cov_data = noise_ * w;
    q.mean = gp_.hyper().mean_constant + kx.dot(gp_.alpha());
    q.variance = std::clamp(gp_.prior_variance() - kx.dot(w), 0.0, gp_.prior_variance());
    return q;
  }

 private:
  const PosteriorGP& gp_;
  double noise_ = 0.0;
  Vec mu_data_;
  Vec var_data_;
};

struct FantasyMoments {
  Vec means;  // mu_{t+1} at X_t then x
  double query_mean = 0.0;
  double query_variance = 0.0;
};

/// Posterior after fantasizing y(x) = mu_t(x) + sqrt(k_t(x,x) + noise) z.
inline FantasyMoments fantasy_moments(const PosteriorGP& gp, const Vec& x, double z, const Vec& query) {
  const Moments mx = gp.moments(x);
  const double total = mx.variance + gp.hyper().noise_variance;
  if (!(total > 0.0)) throw NumericalError("fantasy_moments: zero total variance at x");
  const double root = std::sqrt(total);
  const Eigen::Index t = gp.size();
  Mat pts(t + 1, gp.dim());
  if (t > 0) pts.topRows(t) = gp.points();
  pts.row(t) = x.transpose();
  Mat q(1, query.size());
  q.row(0) = query.transpose();
  Mat xm(1, x.size());
  xm.row(0) = x.transpose();
  const Vec kax = gp.cross_cov(pts, xm).col(0);
  FantasyMoments out;
  out.means.resize(t + 1);
  for (Eigen::Index i = 0; i < t; ++i) out.means[i] = gp.mean(gp.data().point(i)) + kax[i] * z / root;
  out.means[t] = mx.mean + kax[t] * z / root;
  const double kqx = gp.cross_cov(q, xm)(0, 0);
  const Moments mq = gp.moments(query);
  out.query_mean = mq.mean + kqx * z / root;
  out.query_variance = std::max(0.0, mq.variance - kqx * kqx / total);
  return out;
}

/// ISKG value using a prepared context.
inline double iskg_value(const ISKGContext& ctx, const Vec& x, const ISKGConfig& cfg = {}) {
  const PosteriorGP& gp = ctx.posterior();
  const Link link = gp.hyper().link;
  const ISKGContext::Query q = ctx.query(x);
  const double total = q.variance + gp.hyper().noise_variance;
  const Eigen::Index t = gp.size();
  if (!(total > 0.0)) return 0.0;
  const double root = std::sqrt(total);

  Vec a(t + 1), b(t + 1);
  a.head(t) = ctx.data_means();
  a[t] = q.mean;
  b.head(t) = q.cov_data / root;
  b[t] = q.variance / root;

  double value = 0.0;
  if (link == Link::identity) {
    const double current = ctx.data_means().maxCoeff();
    if (cfg.exact_identity) {
      value = expected_max_affine(a, b) - current;
    } else {
      const QuadratureRule& rule = cached_gauss_hermite(cfg.quadrature_nodes);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * (a + b * rule.nodes[i]).maxCoeff();
      value = acc - current;
    }
  } else {
    const QuadratureRule& rule = cached_gauss_hermite(cfg.quadrature_nodes);
    Vec var(t + 1);
    var.head(t) = ctx.data_variances();
    var[t] = q.variance;
    const Vec var_next = (var.array() - b.array().square()).cwiseMax(0.0);
    double current = -kInf;
    for (Eigen::Index i = 0; i < t; ++i) current = std::max(current, expected_inverse_link(link, a[i], var[i], rule));
    double acc = 0.0;
    for (Eigen::Index k = 0; k < rule.nodes.size(); ++k) {
      double best = -kInf;
      for (Eigen::Index i = 0; i <= t; ++i) {
        best = std::max(best, expected_inverse_link(link, a[i] + b[i] * rule.nodes[k], var_next[i], rule));
      }
      acc += rule.weights[k] * best;
    }
    value = acc - current;
  }
  return std::max(value, 0.0);
}

inline double iskg_value(const PosteriorGP& gp, const Vec& x, const ISKGConfig& cfg = {}) {
  return iskg_value(ISKGContext(gp), x, cfg);
}

struct QuerySelection {
  Vec point;
  double value = 0.0;
};

/// Multistart maximization of ISKG over the cube (central-difference gradients).
inline QuerySelection select_query(const PosteriorGP& gp, const ISKGConfig& cfg, Seed seed) {
  cfg.validate();
  const ISKGContext ctx(gp);
  auto f = [&](const Vec& x) { return iskg_value(ctx, x, cfg); };
  const MaximizeResult r = maximize(with_numeric_gradient(f), gp.dim(), cfg.optimizer, seed);
  return {r.argmax, r.value};
}

}  // namespace prb
