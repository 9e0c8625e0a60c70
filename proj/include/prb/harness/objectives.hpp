#pragma once

// Benchmark objectives on the unit cube, maximization convention
// (minimization problems are negated).

#include "prb/common.hpp"
#include "prb/pathwise.hpp"
#include "prb/sample_opt.hpp"
#include "prb/space_model.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace prb::harness {

struct Objective {
  std::string name;
  int dim = 1;
  std::function<double(const Vec&)> evaluate;
  double optimum = 0.0;
  double noise_variance = 0.0;
  std::optional<GPHyperparams> true_hyper;  // set for draws from a known prior

  double regret(const Vec& x) const { return optimum - evaluate(x); }
  bool is_epsilon_optimal(const Vec& x, double eps) const { return regret(x) <= eps; }

  double observe(const Vec& x, Rng& rng) const {
    const double f = evaluate(x);
    if (noise_variance <= 0.0) return f;
    std::normal_distribution<double> gauss;
    return f + std::sqrt(noise_variance) * gauss(rng);
  }
};

inline double branin_raw(double x1, double x2) {
  const double pi = std::numbers::pi;
  const double b = 5.1 / (4.0 * pi * pi), c = 5.0 / pi, t = 1.0 / (8.0 * pi);
  const double q = x2 - b * x1 * x1 + c * x1 - 6.0;
  return q * q + 10.0 * (1.0 - t) * std::cos(x1) + 10.0;
}

inline Objective branin(double noise = 0.0) {
  Objective o;
  o.name = "branin";
  o.dim = 2;
  o.noise_variance = noise;
  o.evaluate = [](const Vec& u) { return -branin_raw(15.0 * u[0] - 5.0, 15.0 * u[1]); };
  o.optimum = -0.39788735772973816;
  return o;
}

namespace detail {

inline double hartmann(const Vec& x, const double (*A)[6], const double (*P)[6], int dim) {
  static constexpr double alpha[4] = {1.0, 1.2, 3.0, 3.2};
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int j = 0; j < dim; ++j) inner += A[i][j] * (x[j] - P[i][j]) * (x[j] - P[i][j]);
    s += alpha[i] * std::exp(-inner);
  }
  return s;
}

}  // namespace detail

inline Objective hartmann3(double noise = 0.0) {
  static constexpr double A[4][6] = {{3, 10, 30}, {0.1, 10, 35}, {3, 10, 30}, {0.1, 10, 35}};
  static constexpr double P[4][6] = {{0.3689, 0.1170, 0.2673},
                                     {0.4699, 0.4387, 0.7470},
                                     {0.1091, 0.8732, 0.5547},
                                     {0.0381, 0.5743, 0.8828}};
  Objective o;
  o.name = "hartmann3";
  o.dim = 3;
  o.noise_variance = noise;
  o.evaluate = [](const Vec& x) { return detail::hartmann(x, A, P, 3); };
  o.optimum = 3.86278214782076;
  return o;
}

inline Objective hartmann6(double noise = 0.0) {
  static constexpr double A[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                     {0.05, 10, 17, 0.1, 8, 14},
                                     {3, 3.5, 1.7, 10, 17, 8},
                                     {17, 8, 0.05, 10, 0.1, 14}};
  static constexpr double P[4][6] = {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                     {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                     {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                     {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};
  Objective o;
  o.name = "hartmann6";
  o.dim = 6;
  o.noise_variance = noise;
  o.evaluate = [](const Vec& x) { return detail::hartmann(x, A, P, 6); };
  o.optimum = 3.32236801141551;
  return o;
}

/// Rescaled Rosenbrock on [-5, 10]^4: (sum - 3.827e5) / 3.755e5, negated.
inline Objective rosenbrock4(double noise = 0.0) {
  Objective o;
  o.name = "rosenbrock4";
  o.dim = 4;
  o.noise_variance = noise;
  o.evaluate = [](const Vec& u) {
    const Vec x = 15.0 * u.array() - 5.0;
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
    return -(s - 3.827e5) / 3.755e5;
  };
  o.optimum = 3.827e5 / 3.755e5;
  return o;
}

inline GPHyperparams gp_draw_hyperparams(int dim, double noise) {
  GPHyperparams h;
  h.mean_constant = 0.0;
  h.kernel = KernelSpec(1.0, Vec::Constant(dim, std::sqrt(static_cast<double>(dim)) / 4.0));
  h.noise_variance = noise;
  return h;
}

/// Dense multistart maximization used to locate optima of sampled objectives.
inline OptimizerConfig dense_optimizer(int dim) {
  OptimizerConfig cfg;
  cfg.random_search_points = dim <= 2 ? 1 << 14 : 1 << 15;
  cfg.num_starts = 32;
  cfg.max_iters = 500;
  cfg.grad_tol = 1e-9;
  return cfg;
}

/// A fixed draw from GP(0, Matern-5/2) with unit variance and l = sqrt(D)/4,
/// represented by random features.
inline Objective gp_draw(int dim, double noise, Seed seed, int num_features = 4096) {
  const GPHyperparams h = gp_draw_hyperparams(dim, noise);
  auto fmap = std::make_shared<const FeatureMap>(build_feature_map(h.kernel, num_features, split_seed(seed, 1)));
  const PosteriorGP prior(h, Dataset(dim));
  auto path = std::make_shared<const PathwiseSample>(draw_path(prior, fmap, split_seed(seed, 2)));
  Objective o;
  o.name = "gp";
  o.dim = dim;
  o.noise_variance = noise;
  o.true_hyper = h;
  o.evaluate = [path](const Vec& x) { return path->value(x); };
  o.optimum = maximize(*path, dim, dense_optimizer(dim), split_seed(seed, 3)).value;
  return o;
}

inline Objective make_objective(const std::string& name, int dim, double noise, Seed seed) {
  if (name == "branin") return branin(noise);
  if (name == "hartmann3") return hartmann3(noise);
  if (name == "hartmann6") return hartmann6(noise);
  if (name == "rosenbrock4") return rosenbrock4(noise);
  if (name == "gp") return gp_draw(dim, noise, seed);
  throw std::invalid_argument("unknown objective: " + name);
}

inline std::vector<std::string> builtin_objective_names() {
  return {"branin", "hartmann3", "hartmann6", "rosenbrock4", "gp"};
}

/// The fixed-dimension benchmarks plus one GP draw per {2, 4, 6}.
inline std::vector<Objective> builtin_objectives(Seed seed = 0) {
  std::vector<Objective> out{branin(), hartmann3(), hartmann6(), rosenbrock4()};
  for (int d : {2, 4, 6}) out.push_back(gp_draw(d, 1e-6, split_seed(seed, d)));
  return out;
}

}  // namespace prb::harness
