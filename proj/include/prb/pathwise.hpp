#pragma once

// Approximate posterior function draws: a random Fourier feature prior draw
// plus a Matheron-rule correction from the residuals at the data.

#include "prb/common.hpp"
#include "prb/space_model.hpp"

#include <memory>

namespace prb {

/// phi(x) = scale * cos(Omega x + b) with Omega drawn from the Matern-5/2
/// spectral density.
struct FeatureMap {
  KernelSpec kernel;
  Mat frequencies;  // m x D
  Vec phases;       // m
  double scale = 0.0;

  int size() const { return static_cast<int>(phases.size()); }
  int dim() const { return static_cast<int>(frequencies.cols()); }

  Vec features(const Vec& x) const { return scale * (frequencies * x + phases).array().cos().matrix(); }

  /// Row i holds phi(X_i).
  Mat features(const Mat& X) const {
    Mat arg = X * frequencies.transpose();
    arg.rowwise() += phases.transpose();
    return scale * arg.array().cos().matrix();
  }
};

inline FeatureMap build_feature_map(const KernelSpec& spec, int m, Seed seed) {
  if (m < 1) throw std::invalid_argument("build_feature_map: need at least one feature");
  spec.validate();
  const int D = spec.dim();
  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss;
  std::chi_squared_distribution<double> chi2(5.0);
  std::uniform_real_distribution<double> unif(0.0, 2.0 * std::numbers::pi);
  FeatureMap fm;
  fm.kernel = spec;
  fm.frequencies.resize(m, D);
  fm.phases.resize(m);
  for (int j = 0; j < m; ++j) {
    const double u = chi2(rng);
    const double mix = std::sqrt(5.0 / u);
    for (int d = 0; d < D; ++d) fm.frequencies(j, d) = gauss(rng) * mix / spec.lengthscales[d];
    fm.phases[j] = unif(rng);
  }
  fm.scale = std::sqrt(2.0 * spec.variance / m);
  return fm;
}

/// A deterministic, differentiable sample path
///   f(x) = c + phi(x)^T w + k(x, X_t) v,   v = Lambda^{-1}(y - c - phi(X_t) w - eps).
class PathwiseSample {
 public:
  PathwiseSample(std::shared_ptr<const FeatureMap> fmap, Vec weights, Vec noise_draw, Vec correction, Mat train_points,
                 double mean_constant)
      : fmap_(std::move(fmap)),
        weights_(std::move(weights)),
        noise_(std::move(noise_draw)),
        correction_(std::move(correction)),
        train_(std::move(train_points)),
        mean_(mean_constant) {
    if (weights_.size() != fmap_->size()) throw std::invalid_argument("PathwiseSample: weight size mismatch");
    if (correction_.size() != train_.rows()) throw std::invalid_argument("PathwiseSample: correction size mismatch");
  }

  const FeatureMap& feature_map() const { return *fmap_; }
  const Vec& weights() const { return weights_; }
  const Vec& noise_draw() const { return noise_; }
  const Vec& correction() const { return correction_; }
  const Mat& train_points() const { return train_; }
  double mean_constant() const { return mean_; }

  double value(const Vec& x) const {
    double v = mean_ + fmap_->features(x).dot(weights_);
    if (train_.rows() > 0) v += fmap_->kernel.column(train_, x).dot(correction_);
    return v;
  }

  Vec gradient(const Vec& x) const {
    const Vec arg = fmap_->frequencies * x + fmap_->phases;
    const Vec coeff = (-fmap_->scale * arg.array().sin() * weights_.array()).matrix();
    Vec g = fmap_->frequencies.transpose() * coeff;
    if (train_.rows() > 0) g += fmap_->kernel.column_grad(train_, x).transpose() * correction_;
    return g;
  }

  double operator()(const Vec& x, Vec* grad) const {
    if (!grad) return value(x);
    const Vec arg = fmap_->frequencies * x + fmap_->phases;
    const Eigen::ArrayXd c = arg.array().cos(), s = arg.array().sin();
    double v = mean_ + fmap_->scale * (c * weights_.array()).sum();
    *grad = fmap_->frequencies.transpose() * (-fmap_->scale * s * weights_.array()).matrix();
    if (train_.rows() > 0) {
      v += fmap_->kernel.column(train_, x).dot(correction_);
      *grad += fmap_->kernel.column_grad(train_, x).transpose() * correction_;
    }
    return v;
  }

  /// Values at the rows of X, in row blocks to bound memory.
  Vec batch(const Mat& X) const {
    constexpr Eigen::Index block = 1024;
    Vec v(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); r += block) {
      const Eigen::Index n = std::min(block, X.rows() - r);
      const Mat rows = X.middleRows(r, n);
      v.segment(r, n) = fmap_->features(rows) * weights_;
      if (train_.rows() > 0) v.segment(r, n) += fmap_->kernel.cross(rows, train_) * correction_;
    }
    return v.array() + mean_;
  }

 private:
  std::shared_ptr<const FeatureMap> fmap_;
  Vec weights_;
  Vec noise_;
  Vec correction_;
  Mat train_;
  double mean_;
};

/// Draws one path given phi(X_t) (rows), which callers may cache per step.
inline PathwiseSample draw_path(const PosteriorGP& gp, std::shared_ptr<const FeatureMap> fmap,
                                const Mat& train_features, Seed seed) {
  if (fmap->dim() != gp.dim()) throw std::invalid_argument("draw_path: dimension mismatch");
  if (std::abs(fmap->kernel.variance - gp.kernel().variance) > 1e-12 * std::max(1.0, gp.kernel().variance) ||
      !fmap->kernel.lengthscales.isApprox(gp.kernel().lengthscales, 1e-12)) {
    throw std::invalid_argument("draw_path: feature map and posterior use different kernels");
  }
  Rng rng = make_rng(seed);
  Vec w = standard_normal_vector(rng, fmap->size());
  const Eigen::Index t = gp.size();
  Vec eps = standard_normal_vector(rng, t) * std::sqrt(gp.hyper().noise_variance);
  Vec v(t);
  if (t > 0) {
    const Vec resid = (gp.latent_values().array() - gp.hyper().mean_constant).matrix() - train_features * w - eps;
    v = gp.solve(resid);
  }
  return PathwiseSample(std::move(fmap), std::move(w), std::move(eps), std::move(v), gp.points(),
                        gp.hyper().mean_constant);
}

inline PathwiseSample draw_path(const PosteriorGP& gp, std::shared_ptr<const FeatureMap> fmap, Seed seed) {
  const Mat phi = gp.size() > 0 ? fmap->features(gp.points()) : Mat(0, fmap->size());
  return draw_path(gp, std::move(fmap), phi, seed);
}

inline double eval_path(const PathwiseSample& s, const Vec& x) { return s.value(x); }
inline Vec eval_path_grad(const PathwiseSample& s, const Vec& x) { return s.gradient(x); }

}  // namespace prb
