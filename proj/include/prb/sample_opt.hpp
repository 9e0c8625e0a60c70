#pragma once

// Box-constrained global maximization of deterministic differentiable fields
// on [0,1]^D: low-discrepancy random search followed by projected L-BFGS from
// the best probes.

#include "prb/common.hpp"
#include "prb/lbfgs.hpp"

#include <boost/random/sobol.hpp>

#include <algorithm>
#include <concepts>
#include <numeric>
#include <optional>
#include <vector>

namespace prb {

struct OptimizerConfig {
  int random_search_points = 2048;
  int num_starts = 8;
  double grad_tol = 1e-6;
  int max_iters = 200;

  void validate() const {
    if (random_search_points < 1 || num_starts < 1 || !(grad_tol > 0) || max_iters < 1) {
      throw std::invalid_argument("OptimizerConfig: all fields must be positive");
    }
  }
};

/// fn(x, grad) -> value; grad may be null, otherwise it must be filled.
template <class Fn>
concept ScalarField = requires(Fn& f, const Vec& x, Vec* g) {
  { f(x, g) } -> std::convertible_to<double>;
};

/// Fields that can evaluate many points at once (rows of a matrix).
template <class Fn>
concept BatchField = ScalarField<Fn> && requires(Fn& f, const Mat& xs) {
  { f.batch(xs) } -> std::convertible_to<Vec>;
};

/// Scrambled (random digital shift) Sobol points, one per row.
inline Mat sobol_design(int n, int dim, Seed seed) {
  if (n < 1 || dim < 1) throw std::invalid_argument("sobol_design: n and dim must be positive");
  boost::random::sobol gen(static_cast<std::size_t>(dim));
  Rng rng = make_rng(seed);
  std::vector<std::uint64_t> shift(dim);
  for (auto& s : shift) s = rng();
  constexpr double scale = 1.0 / 18446744073709551616.0;  // 2^-64
  Mat out(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) {
      // boost omits the origin.
      const std::uint64_t raw = i == 0 ? 0 : static_cast<std::uint64_t>(gen());
      const std::uint64_t v = raw ^ shift[d];
      out(i, d) = static_cast<double>(v) * scale;
    }
  }
  return out;
}

struct MaximizeResult {
  Vec argmax;
  double value = -kInf;
  double best_probe = -kInf;  // best random-search value
  long evaluations = 0;
  // Set when an evaluated point exceeded the early-exit level; that point is
  // retained as the witness.
  bool exited_early = false;
  std::optional<Vec> witness;
  double witness_value = -kInf;
};

namespace detail {

inline LbfgsOptions cube_options(const OptimizerConfig& cfg, Eigen::Index dim) {
  LbfgsOptions o;
  o.grad_tol = cfg.grad_tol;
  o.max_iters = cfg.max_iters;
  o.lower = Vec::Zero(dim);
  o.upper = Vec::Ones(dim);
  return o;
}

template <ScalarField Fn>
Vec evaluate_design(Fn& fn, const Mat& design) {
  if constexpr (BatchField<Fn>) {
    return fn.batch(design);
  } else {
    Vec out(design.rows());
    for (Eigen::Index i = 0; i < design.rows(); ++i) out[i] = fn(Vec(design.row(i).transpose()), nullptr);
    return out;
  }
}

}  // namespace detail

/// Refinement stage given precomputed probe values. Probes above `exit_above`
/// (or line-search iterates above it) end the search with a witness.
template <ScalarField Fn>
MaximizeResult refine(Fn& fn, const Mat& design, const Vec& values, const OptimizerConfig& cfg,
                      double exit_above = kInf) {
  cfg.validate();
  const Eigen::Index n = design.rows();
  MaximizeResult res;
  res.evaluations = n;
  if (n == 0) throw std::invalid_argument("refine: empty design");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(values[i])) throw std::domain_error("non-finite objective value");
  }

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto k = std::min<Eigen::Index>(cfg.num_starts, n);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });
  res.best_probe = values[order[0]];
  res.argmax = design.row(order[0]).transpose();
  res.value = res.best_probe;
  if (res.best_probe > exit_above) {
    res.exited_early = true;
    res.witness = res.argmax;
    res.witness_value = res.value;
    return res;
  }

  const LbfgsOptions opts = detail::cube_options(cfg, design.cols());
  for (Eigen::Index s = 0; s < k; ++s) {
    const Vec x0 = design.row(order[s]).transpose();
    auto watch = [&](const Vec&, double v) { return v > exit_above; };
    LbfgsResult r = lbfgs_maximize(fn, x0, opts, watch);
    res.evaluations += r.evaluations;
    if (r.value > res.value) {
      res.value = r.value;
      res.argmax = r.x;
    }
    if (r.interrupted) {
      res.exited_early = true;
      res.witness = r.x;
      res.witness_value = r.value;
      return res;
    }
  }
  return res;
}

template <ScalarField Fn>
MaximizeResult maximize(Fn&& fn, int dim, const OptimizerConfig& cfg, Seed seed, double exit_above = kInf) {
  cfg.validate();
  const Mat design = sobol_design(cfg.random_search_points, dim, seed);
  const Vec values = detail::evaluate_design(fn, design);
  return refine(fn, design, values, cfg, exit_above);
}

struct GapResult {
  bool exceeds = false;
  double base = 0.0;  // fn(x0)
  std::optional<Vec> witness;
  double witness_value = -kInf;
  long evaluations = 0;
};

/// True only with a certificate: some evaluated x' has fn(x') > fn(x0) + eps.
template <ScalarField Fn>
GapResult exceeds_gap(Fn&& fn, const Vec& x0, double epsilon, const OptimizerConfig& cfg, Seed seed) {
  GapResult out;
  out.base = fn(x0, nullptr);
  if (!std::isfinite(out.base)) throw std::domain_error("non-finite objective value");
  const double level = out.base + epsilon;
  MaximizeResult r = maximize(fn, static_cast<int>(x0.size()), cfg, seed, level);
  out.evaluations = r.evaluations + 1;
  if (r.exited_early) {
    out.exceeds = true;
    out.witness = r.witness;
    out.witness_value = r.witness_value;
  }
  return out;
}

/// Wraps a value-only function with central-difference gradients on the cube.
template <class F>
auto with_numeric_gradient(F f, double h = 1e-6) {
  return [f = std::move(f), h](const Vec& x, Vec* grad) -> double {
    const double v = f(x);
    if (grad) {
      grad->resize(x.size());
      Vec xp = x, xm = x;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double up = std::min(1.0, x[i] + h), lo = std::max(0.0, x[i] - h);
        xp[i] = up;
        xm[i] = lo;
        (*grad)[i] = (f(xp) - f(xm)) / (up - lo);
        xp[i] = x[i];
        xm[i] = x[i];
      }
    }
    return v;
  };
}

}  // namespace prb
