#pragma once

// Fixtures and error measurements shared by the unit tests and the
// acceptance binary.

#include "oracles.hpp"

#include <prb/acquisition.hpp>
#include <prb/bounds.hpp>

#include <vector>

namespace prb::check {

struct GridMoments {
  double mean_err = 0.0;
  double cov_err = 0.0;
};

/// Max abs error of sampled path moments on a 50-point grid.
inline GridMoments moment_error(const PosteriorGP& gp, int m, int draws, Seed seed) {
  auto fmap = std::make_shared<const FeatureMap>(build_feature_map(gp.kernel(), m, split_seed(seed, 0)));
  const Mat grid = oracle::grid_1d(50);
  const Mat phi = fmap->features(gp.points());
  Mat F(draws, 50);
  for (int i = 0; i < draws; ++i) F.row(i) = draw_path(gp, fmap, phi, split_seed(seed, i + 1)).batch(grid).transpose();
  const Vec mean = F.colwise().mean();
  const Mat centered = F.rowwise() - mean.transpose();
  const Mat cov = centered.transpose() * centered / (draws - 1);
  const auto ref = oracle::dense_posterior(gp.hyper(), gp.points(), gp.latent_values(), grid);
  return {(mean - ref.mean).cwiseAbs().maxCoeff(), (cov - ref.cov).cwiseAbs().maxCoeff()};
}

/// Worst central-difference error of path gradients over `pairs` random
/// (path, point) pairs in 1-3 dimensions.
inline double path_gradient_error(int pairs, Seed seed) {
  Rng rng = make_rng(seed);
  double worst = 0.0;
  for (int rep = 0; rep < pairs; ++rep) {
    const int dim = 1 + rep % 3;
    GPHyperparams h;
    h.kernel = KernelSpec(1.0, Vec::Constant(dim, 0.3));
    h.noise_variance = 1e-4;
    Dataset d(dim);
    for (int i = 0; i < 5; ++i) d.add(uniform_point(rng, dim), std::normal_distribution<double>()(rng));
    const PosteriorGP gp(h, d);
    auto fmap = std::make_shared<const FeatureMap>(build_feature_map(h.kernel, 512, split_seed(seed, rep)));
    const PathwiseSample s = draw_path(gp, fmap, split_seed(seed + 1, rep));
    const Vec x = 0.05 + 0.9 * uniform_point(rng, dim).array();
    const Vec g = eval_path_grad(s, x);
    for (int k = 0; k < dim; ++k) {
      Vec xp = x, xm = x;
      xp[k] += 1e-5;
      xm[k] -= 1e-5;
      worst = std::max(worst, std::abs(g[k] - (eval_path(s, xp) - eval_path(s, xm)) / 2e-5));
    }
  }
  return worst;
}

struct Fidelity {
  double joint = 0.0, orange = 0.0, green = 0.0, red = 0.0;
};

/// Mean abs deviation of each Psi estimator from the grid oracle over 101
/// points of the 1D benchmark posterior.
inline Fidelity estimator_fidelity(std::size_t draws = 1000) {
  const PosteriorGP gp = oracle::psi_fixture();
  const double eps = 0.1;
  const Mat fine = oracle::grid_1d(201);
  const Vec truth = oracle::grid_psi(gp, fine, eps, 20000, 1);
  Mat coarse(101, 1);
  for (int i = 0; i < 101; ++i) coarse(i, 0) = fine(2 * i, 0);
  auto fmap = std::make_shared<const FeatureMap>(build_feature_map(gp.kernel(), 2048, 2));
  const auto est = estimate_psi_many(gp, fmap, coarse, eps, draws, {}, 3);
  const auto sups = sample_suprema(gp, fmap, draws, {}, 4);
  Fidelity f;
  for (int i = 0; i < 101; ++i) {
    const Vec x = coarse.row(i).transpose();
    const auto alt = psi_alternatives(gp, x, eps, sups);
    f.joint += std::abs(est[i].mean - truth[2 * i]);
    f.orange += std::abs(alt.orange - truth[2 * i]);
    f.green += std::abs(alt.green - truth[2 * i]);
    f.red += std::abs(alt.red - truth[2 * i]);
  }
  f.joint /= 101;
  f.orange /= 101;
  f.green /= 101;
  f.red /= 101;
  return f;
}

inline double noisy_ei(double mu, double M, double k, double noise) {
  const double s = k / std::sqrt(k + noise);
  const double u = (mu - M) / s;
  return s * normal_pdf(u) + (mu - M) * normal_cdf(u);
}

// One observation at 0.1 with a very short lengthscale: mu_t(0.9) = mu,
// k_t(0.9, 0.9) = k and the posterior mean at the observation equals M.
inline PosteriorGP uncorrelated_fixture(double mu, double M, double k, double noise) {
  GPHyperparams h;
  h.mean_constant = mu;
  h.kernel = KernelSpec(k, Vec::Constant(1, 0.005));
  h.noise_variance = noise;
  Dataset d(1);
  d.add(Vec::Constant(1, 0.1), mu + (M - mu) * (k + noise) / k);
  return PosteriorGP(h, d);
}

/// Worst |ISKG - noisy EI| over random uncorrelated configurations.
inline double iskg_ei_error(int configs, int nodes, Seed seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ISKGConfig cfg;
  cfg.quadrature_nodes = nodes;
  double worst = 0.0;
  for (int rep = 0; rep < configs; ++rep) {
    const double mu = 2 * u(rng) - 1, M = 2 * u(rng) - 1, k = 0.1 + 1.9 * u(rng), noise = 1e-4 + 0.5 * u(rng);
    const PosteriorGP gp = uncorrelated_fixture(mu, M, k, noise);
    worst = std::max(worst, std::abs(iskg_value(gp, Vec::Constant(1, 0.9), cfg) - noisy_ei(mu, M, k, noise)));
  }
  return worst;
}

struct TailCheck {
  double bound = 0.0;
  double empirical = 0.0;
  double se = 0.0;

  bool dominates() const { return bound >= empirical - 3.0 * se; }
};

// g(x) = [f(x) - mu(x)] - [f(s) - mu(s)] on a 201-point grid, s the incumbent.
inline std::vector<TailCheck> borell_tis_checks(int configs, int samples, Seed seed) {
  std::vector<TailCheck> out;
  const Mat grid = oracle::grid_1d(201);
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < configs; ++c) {
    const PosteriorGP gp = oracle::fixture_1d(2 + c % 7, 1e-3 + 0.05 * u(rng), split_seed(seed, c), 0.1 + 0.3 * u(rng));
    const Vec s = incumbent(gp, IncumbentMode::evaluated_only);
    Mat pts(202, 1);
    pts.topRows(201) = grid;
    pts(201, 0) = s[0];
    Mat K = gp.cov(pts);
    K.diagonal().array() += 1e-10;
    const Mat L = Eigen::LLT<Mat>(K).matrixL();
    const Mat Z = L * Mat(Mat::NullaryExpr(202, samples, [&]() { return std::normal_distribution<double>()(rng); }));
    Vec sup(samples);
    for (int j = 0; j < samples; ++j) sup[j] = (Z.col(j).head(201).array() - Z(201, j)).maxCoeff();
    const double e_sup = sup.mean();
    double sigma = 0.0;
    for (int i = 0; i < 201; ++i) sigma = std::max(sigma, std::sqrt(K(i, i)));
    const double eps = e_sup + (0.05 + 3.0 * u(rng)) * sigma;
    const double p = (sup.array() >= eps).cast<double>().mean();
    out.push_back({borell_tis_tail(eps, e_sup, sigma), p, std::sqrt(std::max(p * (1 - p), 1.0 / samples) / samples)});
  }
  return out;
}

/// Prior GPs in 1-2 dimensions: bound vs mean of 512 path suprema.
inline std::vector<TailCheck> expected_sup_checks() {
  OptimizerConfig cfg;
  cfg.random_search_points = 512;
  cfg.num_starts = 2;
  std::vector<TailCheck> out;
  int total = 0;
  for (int dim : {1, 2}) {
    for (double var : {0.25, 1.0, 4.0}) {
      for (double ls : {0.1, 0.3}) {
        GPHyperparams h;
        h.kernel = KernelSpec(var, Vec::Constant(dim, ls));
        const PosteriorGP prior(h, Dataset(dim));
        auto fmap = std::make_shared<const FeatureMap>(build_feature_map(h.kernel, 1024, split_seed(dim, total)));
        Vec sups(512);
        for (int i = 0; i < 512; ++i) sups[i] = maximize(draw_path(prior, fmap, split_seed(99, i)), dim, cfg, i).value;
        const double se = std::sqrt((sups.array() - sups.mean()).square().sum() / 511.0 / 512.0);
        out.push_back({expected_sup_bound(std::sqrt(var), dim, matern52_lipschitz(h.kernel), 1.0), sups.mean(), se});
        ++total;
      }
    }
  }
  return out;
}

struct CoverCase {
  bool applies = false;
  bool dominated = false;
};

/// 1D eps-cover datasets: bound vs the largest posterior variance on a fine grid.
inline std::vector<CoverCase> cover_cases() {
  std::vector<CoverCase> out;
  for (double var : {0.5, 1.0, 2.0}) {
    for (double ls : {0.1, 0.3, 0.6, 1.0, 2.0}) {
      for (double noise : {1e-4, 1e-2, 0.1}) {
        GPHyperparams h;
        h.kernel = KernelSpec(var, Vec::Constant(1, ls));
        h.noise_variance = noise;
        const double L = matern52_lipschitz(h.kernel);
        for (double eps : {0.02, 0.05, 0.1, 0.2}) {
          if (eps > std::min(1.0, var / L)) continue;
          Dataset d(1);
          const int n = static_cast<int>(std::ceil(1.0 / (2 * eps)));
          for (int i = 0; i < n; ++i) d.add(Vec::Constant(1, std::min(1.0, (2 * i + 1) * eps)), 0.0);
          const PosteriorGP gp(h, d);
          double worst = 0.0;
          for (int i = 0; i < 1001; ++i) worst = std::max(worst, gp.variance(Vec::Constant(1, i / 1000.0)));
          out.push_back({variance_contraction_applies(var, L, eps),
                         variance_contraction_bound(var, L, noise, eps, 1) >= worst - 1e-12});
        }
      }
    }
  }
  return out;
}

}  // namespace prb::check
