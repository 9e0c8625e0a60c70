#pragma once

// Projected limited-memory BFGS ascent on a box (or unbounded when no bounds
// are given). Shared by the sample-path optimizer and MAP fitting.

#include "prb/common.hpp"

#include <deque>

namespace prb {

struct LbfgsOptions {
  double grad_tol = 1e-6;
  int max_iters = 200;
  int memory = 8;
  double max_step = 0.25;  // cap on the first step in the infinity norm
  Vec lower;               // empty => unbounded
  Vec upper;
};

struct LbfgsResult {
  Vec x;
  double value = -kInf;
  Vec grad;
  int iterations = 0;
  long evaluations = 0;
  bool interrupted = false;  // the watcher asked to stop
};

namespace detail {

inline bool bounded(const LbfgsOptions& o) { return o.lower.size() > 0; }

inline Vec project(const LbfgsOptions& o, Vec x) {
  if (bounded(o)) x = x.cwiseMax(o.lower).cwiseMin(o.upper);
  return x;
}

inline void check_finite(double v) {
  if (!std::isfinite(v)) throw std::domain_error("non-finite objective value");
}

}  // namespace detail

/// Maximizes fn(x, &grad). `watch(x, value)` sees every evaluation and may
/// return true to abort immediately (used for early-exit certificates).
template <class Fn, class Watch>
LbfgsResult lbfgs_maximize(Fn&& fn, const Vec& x0, const LbfgsOptions& opts, Watch&& watch) {
  const Eigen::Index n = x0.size();
  LbfgsResult res;
  Vec x = detail::project(opts, x0);
  Vec g(n);
  double f = fn(x, &g);
  detail::check_finite(f);
  res.evaluations = 1;
  res.x = x;
  res.value = f;
  res.grad = g;
  if (watch(x, f)) {
    res.interrupted = true;
    return res;
  }

  std::deque<std::pair<Vec, Vec>> mem;  // (s, y) pairs for -f
  for (int it = 0; it < opts.max_iters; ++it) {
    res.iterations = it + 1;
    Vec pg = detail::project(opts, x + g) - x;
    if (pg.lpNorm<Eigen::Infinity>() <= opts.grad_tol) break;

    // Coordinates pinned at an active bound are frozen for this step.
    Vec mask = Vec::Ones(n);
    if (detail::bounded(opts)) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if ((x[i] <= opts.lower[i] && g[i] < 0) || (x[i] >= opts.upper[i] && g[i] > 0)) mask[i] = 0;
      }
    }
    Vec q = g.cwiseProduct(mask);
    std::vector<double> alphas(mem.size());
    for (std::size_t k = mem.size(); k-- > 0;) {
      const auto& [s, y] = mem[k];
      const double rho = 1.0 / y.dot(s);
      alphas[k] = rho * s.dot(q);
      q -= alphas[k] * y;
    }
    if (!mem.empty()) {
      const auto& [s, y] = mem.back();
      q *= s.dot(y) / y.dot(y);
    }
    for (std::size_t k = 0; k < mem.size(); ++k) {
      const auto& [s, y] = mem[k];
      const double rho = 1.0 / y.dot(s);
      const double beta = rho * y.dot(q);
      q += (alphas[k] - beta) * s;
    }
    Vec d = q.cwiseProduct(mask);
    if (!(d.dot(g) > 0)) {
      d = g.cwiseProduct(mask);
      mem.clear();
    }
    const double dnorm = d.lpNorm<Eigen::Infinity>();
    if (!(dnorm > 0)) break;
    double step = mem.empty() ? std::min(1.0, opts.max_step / dnorm) : 1.0;

    bool accepted = false;
    Vec xn, gn(n);
    double fn_val = -kInf;
    for (int ls = 0; ls < 40; ++ls) {
      xn = detail::project(opts, x + step * d);
      Vec dx = xn - x;
      if (dx.lpNorm<Eigen::Infinity>() < 1e-15) break;
      fn_val = fn(xn, &gn);
      detail::check_finite(fn_val);
      ++res.evaluations;
      if (watch(xn, fn_val)) {
        res.x = xn;
        res.value = fn_val;
        res.grad = gn;
        res.interrupted = true;
        return res;
      }
      if (fn_val >= f + 1e-4 * g.dot(dx)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Vec s = xn - x;
    Vec y = g - gn;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      mem.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
    }
    const double prev = f;
    x = xn;
    f = fn_val;
    g = gn;
    if (std::abs(f - prev) <= 1e-15 * std::max(1.0, std::abs(f))) break;
  }
  res.x = x;
  res.value = f;
  res.grad = g;
  return res;
}

template <class Fn>
LbfgsResult lbfgs_maximize(Fn&& fn, const Vec& x0, const LbfgsOptions& opts) {
  return lbfgs_maximize(std::forward<Fn>(fn), x0, opts, [](const Vec&, double) { return false; });
}

}  // namespace prb
