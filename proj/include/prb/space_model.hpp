#pragma once

// Search space, data, Matern-5/2 ARD Gaussian process with constant mean,
// exact posterior moments, and MAP hyperparameter fitting.

#include "prb/common.hpp"
#include "prb/lbfgs.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <vector>

namespace prb {

struct SearchSpace {
  int dim = 1;

  explicit SearchSpace(int d) : dim(d) {
    if (d < 1) throw std::invalid_argument("SearchSpace: dim must be >= 1");
  }
  bool contains(const Vec& x) const { return x.size() == dim && in_unit_cube(x, 1e-12); }
};

enum class Link { identity, logit };

inline double apply_link(Link link, double y_raw) {
  if (link == Link::identity) return y_raw;
  if (!(y_raw > 0.0 && y_raw < 1.0)) throw std::domain_error("logit link requires observations in (0,1)");
  return std::log(y_raw) - std::log1p(-y_raw);
}

inline double inverse_link(Link link, double latent) {
  if (link == Link::identity) return latent;
  return latent >= 0 ? 1.0 / (1.0 + std::exp(-latent)) : std::exp(latent) / (1.0 + std::exp(latent));
}

/// Ordered observations; points are rows of `points()`.
class Dataset {
 public:
  explicit Dataset(int dim) : X_(0, dim), y_(0) {
    if (dim < 1) throw std::invalid_argument("Dataset: dim must be >= 1");
  }
  Dataset(Mat points, Vec values) : X_(std::move(points)), y_(std::move(values)) {
    if (X_.rows() != y_.size()) throw std::invalid_argument("Dataset: length mismatch");
    for (Eigen::Index i = 0; i < X_.rows(); ++i) {
      if (!in_unit_cube(X_.row(i).transpose(), 1e-12)) throw std::domain_error("Dataset: point outside [0,1]^D");
    }
  }

  void add(const Vec& x, double y) {
    if (x.size() != X_.cols()) throw std::invalid_argument("Dataset::add: wrong dimension");
    if (!in_unit_cube(x, 1e-12)) throw std::domain_error("Dataset::add: point outside [0,1]^D");
    X_.conservativeResize(X_.rows() + 1, Eigen::NoChange);
    X_.row(X_.rows() - 1) = x.transpose();
    y_.conservativeResize(y_.size() + 1);
    y_[y_.size() - 1] = y;
  }

  Dataset prefix(Eigen::Index t) const {
    if (t < 0 || t > size()) throw std::out_of_range("Dataset::prefix");
    return Dataset(X_.topRows(t), y_.head(t));
  }

  Eigen::Index size() const { return y_.size(); }
  int dim() const { return static_cast<int>(X_.cols()); }
  const Mat& points() const { return X_; }
  const Vec& values() const { return y_; }
  Vec point(Eigen::Index i) const { return X_.row(i).transpose(); }

 private:
  Mat X_;
  Vec y_;
};

enum class KernelFamily { matern52 };

/// Matern-5/2 with ARD lengthscales.
struct KernelSpec {
  double variance = 1.0;
  Vec lengthscales;
  KernelFamily family = KernelFamily::matern52;

  KernelSpec() = default;
  KernelSpec(double var, Vec ls) : variance(var), lengthscales(std::move(ls)) {}

  int dim() const { return static_cast<int>(lengthscales.size()); }

  void validate() const {
    if (!(variance >= 0.0)) throw std::invalid_argument("KernelSpec: variance must be nonnegative");
    if (lengthscales.size() < 1 || !(lengthscales.array() > 0.0).all()) {
      throw std::invalid_argument("KernelSpec: lengthscales must be positive");
    }
  }

  static double profile(double r) {
    const double s = std::sqrt(5.0) * r;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
  }

  // -(1/r) d profile / dr, finite at r = 0.
  static double slope_over_r(double r) {
    const double s = std::sqrt(5.0) * r;
    return (5.0 / 3.0) * (1.0 + s) * std::exp(-s);
  }

  double scaled_distance(const Vec& x, const Vec& y) const {
    return ((x - y).array() / lengthscales.array()).matrix().norm();
  }

  double operator()(const Vec& x, const Vec& y) const { return variance * profile(scaled_distance(x, y)); }

  /// k(A_i, B_j) for rows of A and B.
  Mat cross(const Mat& A, const Mat& B) const {
    const Vec inv = lengthscales.cwiseInverse();
    const Mat As = A * inv.asDiagonal();
    const Mat Bs = B * inv.asDiagonal();
    Mat out(A.rows(), B.rows());
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
      for (Eigen::Index i = 0; i < A.rows(); ++i) {
        out(i, j) = variance * profile((As.row(i) - Bs.row(j)).norm());
      }
    }
    return out;
  }

  /// k(A_i, x) as a column vector.
  Vec column(const Mat& A, const Vec& x) const {
    Vec out(A.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      out[i] = variance * profile(((A.row(i).transpose() - x).array() / lengthscales.array()).matrix().norm());
    }
    return out;
  }

  /// Row i holds d k(x, A_i) / dx.
  Mat column_grad(const Mat& A, const Vec& x) const {
    const Vec inv2 = lengthscales.array().square().inverse();
    Mat out(A.rows(), x.size());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      const Vec diff = x - A.row(i).transpose();
      const double r = (diff.array() / lengthscales.array()).matrix().norm();
      out.row(i) = (-variance * slope_over_r(r) * diff.cwiseProduct(inv2)).transpose();
    }
    return out;
  }
};

inline double kernel_eval(const KernelSpec& spec, const Vec& x, const Vec& y) { return spec(x, y); }

struct GPHyperparams {
  double mean_constant = 0.0;
  KernelSpec kernel;
  double noise_variance = 0.0;
  Link link = Link::identity;

  void validate() const {
    kernel.validate();
    if (!(kernel.variance > 0.0)) throw std::invalid_argument("GPHyperparams: kernel variance must be positive");
    if (!(noise_variance >= 0.0)) throw std::invalid_argument("GPHyperparams: noise variance must be nonnegative");
  }
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

namespace detail {

// Cholesky of a symmetric matrix, escalating diagonal jitter before failing.
inline Eigen::LLT<Mat> robust_cholesky(const Mat& A, double scale, double* jitter_used = nullptr) {
  static constexpr std::array<double, 6> jitters{0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
  for (double j : jitters) {
    Mat B = A;
    if (j > 0) B.diagonal().array() += j * scale;
    Eigen::LLT<Mat> llt(B);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = j * scale;
      return llt;
    }
  }
  throw NumericalError("Cholesky factorization failed: Gram matrix is not positive definite");
}

}  // namespace detail

/// Exact GP posterior given hyperparameters and data. Immutable.
class PosteriorGP {
 public:
  PosteriorGP(GPHyperparams hyper, Dataset data) : hyper_(std::move(hyper)), data_(std::move(data)) {
    hyper_.validate();
    if (hyper_.kernel.dim() != data_.dim()) throw std::invalid_argument("PosteriorGP: dimension mismatch");
    const auto t = data_.size();
    latent_.resize(t);
    for (Eigen::Index i = 0; i < t; ++i) latent_[i] = apply_link(hyper_.link, data_.values()[i]);
    if (t > 0) {
      Mat lambda = hyper_.kernel.cross(data_.points(), data_.points());
      lambda.diagonal().array() += hyper_.noise_variance;
      chol_ = detail::robust_cholesky(lambda, hyper_.kernel.variance, &jitter_);
      alpha_ = chol_.solve((latent_.array() - hyper_.mean_constant).matrix());
    } else {
      alpha_.resize(0);
    }
  }

  const GPHyperparams& hyper() const { return hyper_; }
  const Dataset& data() const { return data_; }
  const Mat& points() const { return data_.points(); }
  const Vec& latent_values() const { return latent_; }
  const Vec& alpha() const { return alpha_; }
  Eigen::Index size() const { return data_.size(); }
  int dim() const { return data_.dim(); }
  double jitter() const { return jitter_; }
  const KernelSpec& kernel() const { return hyper_.kernel; }

  /// Lambda^{-1} v.
  Vec solve(const Vec& v) const { return chol_.solve(v); }
  Mat solve(const Mat& v) const { return chol_.solve(v); }
  /// L^{-1} v with Lambda = L L^T.
  Mat half_solve(const Mat& v) const { return chol_.matrixL().solve(v); }

  Vec kernel_column(const Vec& x) const { return hyper_.kernel.column(data_.points(), x); }

  double mean(const Vec& x) const {
    if (size() == 0) return hyper_.mean_constant;
    return hyper_.mean_constant + kernel_column(x).dot(alpha_);
  }

  double prior_variance() const { return hyper_.kernel.variance; }

  double variance(const Vec& x) const {
    const double prior = prior_variance();
    if (size() == 0) return prior;
    const Vec v = chol_.matrixL().solve(kernel_column(x));
    return std::clamp(prior - v.squaredNorm(), 0.0, prior);
  }

  Moments moments(const Vec& x) const {
    const double prior = prior_variance();
    if (size() == 0) return {hyper_.mean_constant, prior};
    const Vec kx = kernel_column(x);
    const Vec v = chol_.matrixL().solve(kx);
    return {hyper_.mean_constant + kx.dot(alpha_), std::clamp(prior - v.squaredNorm(), 0.0, prior)};
  }

  double mean_with_grad(const Vec& x, Vec* grad) const {
    if (size() == 0) {
      if (grad) *grad = Vec::Zero(x.size());
      return hyper_.mean_constant;
    }
    if (grad) *grad = hyper_.kernel.column_grad(data_.points(), x).transpose() * alpha_;
    return mean(x);
  }

  /// Posterior variance and its gradient in x (unclamped gradient).
  double variance_with_grad(const Vec& x, Vec* grad) const {
    const double prior = prior_variance();
    if (size() == 0) {
      if (grad) *grad = Vec::Zero(x.size());
      return prior;
    }
    const Vec kx = kernel_column(x);
    const Vec w = chol_.solve(kx);
    if (grad) *grad = -2.0 * hyper_.kernel.column_grad(data_.points(), x).transpose() * w;
    return std::clamp(prior - kx.dot(w), 0.0, prior);
  }

  /// k_t(A_i, B_j).
  Mat cross_cov(const Mat& A, const Mat& B) const {
    Mat out = hyper_.kernel.cross(A, B);
    if (size() == 0) return out;
    const Mat va = half_solve(hyper_.kernel.cross(data_.points(), A));
    const Mat vb = half_solve(hyper_.kernel.cross(data_.points(), B));
    out.noalias() -= va.transpose() * vb;
    return out;
  }

  /// k_t(xs, xs), symmetrized and with the diagonal clamped at zero.
  Mat cov(const Mat& xs) const {
    if (xs.rows() == 0) throw std::invalid_argument("posterior_cov: empty point list");
    Mat c = cross_cov(xs, xs);
    c = 0.5 * (c + c.transpose());
    c.diagonal() = c.diagonal().cwiseMax(0.0);
    return c;
  }

  double cov(const Vec& x, const Vec& y) const {
    Mat a(1, x.size()), b(1, y.size());
    a.row(0) = x.transpose();
    b.row(0) = y.transpose();
    return cross_cov(a, b)(0, 0);
  }

 private:
  GPHyperparams hyper_;
  Dataset data_;
  Vec latent_;
  Eigen::LLT<Mat> chol_;
  Vec alpha_;
  double jitter_ = 0.0;
};

inline Moments posterior_moments(const PosteriorGP& gp, const Vec& x) { return gp.moments(x); }
inline Mat posterior_cov(const PosteriorGP& gp, const Mat& xs) { return gp.cov(xs); }

/// Broad hyperpriors derived from the observations: uniform on the constant
/// mean, log kernel variance and log noise variance; LogNormal lengthscales.
struct HyperpriorSpec {
  double mean_lo = 0.0, mean_hi = 0.0;
  double log_variance_lo = 0.0, log_variance_hi = 0.0;
  double log_noise_lo = 0.0, log_noise_hi = 0.0;
  Vec lengthscale_mu;  // location of log(lengthscale)
  double lengthscale_sigma = 1.0;
  double nu = 0.0;     // empirical variance of the (latent) observations

  void validate() const {
    if (!(mean_lo <= mean_hi) || !(log_variance_lo <= log_variance_hi) || !(log_noise_lo <= log_noise_hi)) {
      throw std::invalid_argument("HyperpriorSpec: unordered bounds");
    }
    if (!(lengthscale_sigma > 0)) throw std::invalid_argument("HyperpriorSpec: lengthscale sigma must be positive");
  }

  /// Empirical quantile with linear interpolation between order statistics.
  static double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  }

  static HyperpriorSpec from_data(const Dataset& data, Link link = Link::identity) {
    const auto t = data.size();
    if (t < 1) throw std::invalid_argument("HyperpriorSpec: empty dataset");
    std::vector<double> z(t);
    for (Eigen::Index i = 0; i < t; ++i) z[i] = apply_link(link, data.values()[i]);
    double m = 0.0;
    for (double v : z) m += v;
    m /= static_cast<double>(t);
    double nu = 0.0;
    for (double v : z) nu += (v - m) * (v - m);
    nu /= static_cast<double>(t);
    if (!(nu > 1e-12 * std::max(1.0, m * m))) throw DegenerateData("degenerate data: observations are (nearly) constant");

    HyperpriorSpec p;
    p.nu = nu;
    p.mean_lo = quantile(z, 0.05);
    p.mean_hi = quantile(z, 0.95);
    p.log_variance_lo = std::log(0.1 * nu);
    p.log_variance_hi = std::log(10.0 * nu);
    p.log_noise_lo = std::log(1e-9 * nu);
    p.log_noise_hi = std::log(10.0 * nu);
    // Half the design range of the normalized cube.
    p.lengthscale_mu = Vec::Constant(data.dim(), 0.5);
    p.lengthscale_sigma = 1.0;
    return p;
  }
};

struct FitConfig {
  int restarts = 8;
  int max_iters = 200;
  double grad_tol = 1e-6;
  Link link = Link::identity;
};

namespace detail {

inline double sigmoid(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }
inline double logit(double p) { return std::log(p) - std::log1p(-p); }

struct BoundedParam {
  double lo, hi;
  bool fixed() const { return !(hi > lo); }
  double value(double u) const { return fixed() ? lo : lo + (hi - lo) * sigmoid(u); }
  double dvalue(double u) const {
    if (fixed()) return 0.0;
    const double s = sigmoid(u);
    return (hi - lo) * s * (1.0 - s);
  }
  double to_internal(double v) const {
    if (fixed()) return 0.0;
    const double p = std::clamp((v - lo) / (hi - lo), 1e-12, 1.0 - 1e-12);
    return logit(p);
  }
};

// Natural parameters: [c, log s2, log g2, log l_1..l_D].
struct MapProblem {
  const Mat& X;
  const Vec& z;
  const HyperpriorSpec& prior;
  std::array<BoundedParam, 3> bounded;

  MapProblem(const Mat& X_, const Vec& z_, const HyperpriorSpec& p)
      : X(X_), z(z_), prior(p),
        bounded{BoundedParam{p.mean_lo, p.mean_hi}, BoundedParam{p.log_variance_lo, p.log_variance_hi},
                BoundedParam{p.log_noise_lo, p.log_noise_hi}} {}

  Eigen::Index dim() const { return X.cols(); }

  GPHyperparams hyper(const Vec& u, Link link) const {
    GPHyperparams h;
    h.mean_constant = bounded[0].value(u[0]);
    h.kernel.variance = std::exp(bounded[1].value(u[1]));
    h.noise_variance = std::exp(bounded[2].value(u[2]));
    h.kernel.lengthscales = u.tail(dim()).array().exp();
    h.link = link;
    return h;
  }

  double log_prior(const Vec& log_ls, Vec* grad) const {
    double lp = 0.0;
    for (int i = 0; i < 3; ++i) {
      if (!bounded[i].fixed()) lp -= std::log(bounded[i].hi - bounded[i].lo);
    }
    const double s2 = prior.lengthscale_sigma * prior.lengthscale_sigma;
    const Vec diff = log_ls - prior.lengthscale_mu;
    lp += -0.5 * diff.squaredNorm() / s2 -
          static_cast<double>(dim()) * std::log(prior.lengthscale_sigma * std::sqrt(2.0 * std::numbers::pi));
    if (grad) *grad = -diff / s2;
    return lp;
  }

  // Log marginal likelihood plus log hyperprior in natural parameters.
  double natural(double c, double log_var, double log_noise, const Vec& log_ls, Vec* grad) const {
    const Eigen::Index t = X.rows();
    const Eigen::Index D = dim();
    const double var = std::exp(log_var), noise = std::exp(log_noise);
    const Vec ls = log_ls.array().exp();
    const KernelSpec k(var, ls);
    const Mat K = k.cross(X, X);
    Mat lambda = K;
    lambda.diagonal().array() += noise;
    Eigen::LLT<Mat> llt;
    try {
      llt = robust_cholesky(lambda, var);
    } catch (const NumericalError&) {
      return -kInf;
    }
    const Vec r = (z.array() - c).matrix();
    const Vec alpha = llt.solve(r);
    const Mat& L = llt.matrixLLT();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < t; ++i) logdet += 2.0 * std::log(L(i, i));
    Vec prior_grad;
    double out = -0.5 * r.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(t) * std::log(2.0 * std::numbers::pi) +
                 log_prior(log_ls, grad ? &prior_grad : nullptr);
    if (grad) {
      grad->resize(3 + D);
      const Mat W = alpha * alpha.transpose() - llt.solve(Mat::Identity(t, t));
      (*grad)[0] = alpha.sum();
      (*grad)[1] = 0.5 * (W.array() * K.array()).sum();
      (*grad)[2] = 0.5 * noise * W.trace();
      const Vec inv2 = ls.array().square().inverse();
      Mat S(t, t);
      for (Eigen::Index j = 0; j < t; ++j) {
        for (Eigen::Index i = j + 1; i < t; ++i) {
          const double rr = ((X.row(i) - X.row(j)).transpose().array() / ls.array()).matrix().norm();
          S(i, j) = 2.0 * W(i, j) * var * KernelSpec::slope_over_r(rr);
        }
      }
      for (Eigen::Index d = 0; d < D; ++d) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < t; ++j) {
          for (Eigen::Index i = j + 1; i < t; ++i) {
            const double diff = X(i, d) - X(j, d);
            acc += S(i, j) * diff * diff;
          }
        }
        acc *= inv2[d];
        (*grad)[3 + d] = 0.5 * acc + prior_grad[d];
      }
    }
    return out;
  }

  double internal(const Vec& u, Vec* grad) const {
    Vec g;
    const double v = natural(bounded[0].value(u[0]), bounded[1].value(u[1]), bounded[2].value(u[2]), u.tail(dim()),
                             grad ? &g : nullptr);
    if (grad) {
      if (!std::isfinite(v)) {
        *grad = Vec::Zero(u.size());
      } else {
        *grad = g;
        for (int i = 0; i < 3; ++i) (*grad)[i] = g[i] * bounded[i].dvalue(u[i]);
      }
    }
    return v;
  }
};

}  // namespace detail

/// Log marginal likelihood + log hyperprior density at `hyper`.
inline double map_objective(const Dataset& data, const HyperpriorSpec& prior, const GPHyperparams& hyper) {
  prior.validate();
  Vec z(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) z[i] = apply_link(hyper.link, data.values()[i]);
  detail::MapProblem prob(data.points(), z, prior);
  return prob.natural(hyper.mean_constant, std::log(hyper.kernel.variance), std::log(hyper.noise_variance),
                      hyper.kernel.lengthscales.array().log().matrix(), nullptr);
}

/// Multistart bounded L-BFGS on the MAP objective. Deterministic given seed.
inline GPHyperparams fit_map(const Dataset& data, const HyperpriorSpec& prior, Seed seed, const FitConfig& cfg = {}) {
  if (data.size() < 2) throw std::invalid_argument("fit_map: need at least two observations");
  if (cfg.restarts < 1) throw std::invalid_argument("fit_map: restarts must be positive");
  prior.validate();
  if (!(prior.nu > 0.0)) throw DegenerateData("degenerate data: zero empirical variance");
  Vec z(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) z[i] = apply_link(cfg.link, data.values()[i]);
  {
    const double m = z.mean();
    const double nu = (z.array() - m).square().mean();
    if (!(nu > 1e-12 * std::max(1.0, m * m))) throw DegenerateData("degenerate data: observations are (nearly) constant");
  }
  detail::MapProblem prob(data.points(), z, prior);
  const Eigen::Index D = data.dim();
  const Eigen::Index n = 3 + D;

  LbfgsOptions opts;
  opts.grad_tol = cfg.grad_tol;
  opts.max_iters = cfg.max_iters;
  opts.max_step = 1.0;
  opts.lower = Vec::Constant(n, -30.0);
  opts.upper = Vec::Constant(n, 30.0);
  opts.lower.tail(D).setConstant(std::log(1e-3));
  opts.upper.tail(D).setConstant(std::log(1e3));

  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss;
  double best = -kInf;
  Vec best_u;
  for (int r = 0; r < cfg.restarts; ++r) {
    Vec u0(n);
    if (r == 0) {
      u0.head(3).setZero();
      u0.tail(D) = prior.lengthscale_mu;
    } else {
      for (int i = 0; i < 3; ++i) u0[i] = 1.5 * gauss(rng);
      for (Eigen::Index d = 0; d < D; ++d) u0[3 + d] = prior.lengthscale_mu[d] + prior.lengthscale_sigma * gauss(rng);
    }
    u0 = u0.cwiseMax(opts.lower).cwiseMin(opts.upper);
    if (!std::isfinite(prob.internal(u0, nullptr))) continue;
    auto fn = [&](const Vec& u, Vec* g) {
      const double v = prob.internal(u, g);
      return std::isfinite(v) ? v : -1e300;
    };
    LbfgsResult res = lbfgs_maximize(fn, u0, opts);
    if (res.value > best && res.value > -1e299) {
      best = res.value;
      best_u = res.x;
    }
  }
  if (!std::isfinite(best)) throw DegenerateData("degenerate data: no restart produced a finite MAP objective");
  return prob.hyper(best_u, cfg.link);
}

}  // namespace prb
