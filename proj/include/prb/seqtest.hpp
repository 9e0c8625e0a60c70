#pragma once

// Confidence intervals for Bernoulli / bounded means, test schedules, and the
// adaptive threshold test: draw in geometrically growing rounds until the
// level leaves the interval.

#include "prb/common.hpp"

#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace prb {

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw std::invalid_argument("incomplete_beta: a, b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta(b, a, 1.0 - x);

  const double log_front = a * std::log(x) + b * std::log1p(-x) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  constexpr double tiny = 1e-300;
  double f = 1.0, c = 1.0, d = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const int m = i / 2;
    double num;
    if (i == 0) {
      num = 1.0;
    } else if (i % 2 == 0) {
      num = (m * (b - m) * x) / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
    } else {
      num = -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
    }
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    const double cd = c * d;
    f *= cd;
    if (std::abs(1.0 - cd) < 1e-15) break;
  }
  return std::exp(log_front) * (f - 1.0) / a;
}

inline double beta_log_pdf(double a, double b, double x) {
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

/// Quantile of Beta(a, b): bisection to 1e-10 followed by guarded Newton steps.
inline double beta_quantile(double p, double a, double b) {
  if (!(a > 0) || !(b > 0)) throw std::invalid_argument("beta_quantile: a, b must be positive");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("beta_quantile: p must lie in [0,1]");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (incomplete_beta(a, b, mid) < p ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 3; ++i) {
    if (x <= 0.0 || x >= 1.0) break;
    const double step = (incomplete_beta(a, b, x) - p) / std::exp(beta_log_pdf(a, b, x));
    const double next = x - step;
    if (!(next > lo && next < hi)) break;
    x = next;
  }
  return x;
}

enum class IntervalMethod { clopper_pearson, jeffreys, empirical_bernstein };

inline const char* to_string(IntervalMethod m) {
  switch (m) {
    case IntervalMethod::clopper_pearson: return "cp";
    case IntervalMethod::jeffreys: return "jeffreys";
    case IntervalMethod::empirical_bernstein: return "bernstein";
  }
  return "?";
}

inline IntervalMethod interval_method_from_string(const std::string& s) {
  if (s == "cp" || s == "clopper_pearson") return IntervalMethod::clopper_pearson;
  if (s == "jeffreys") return IntervalMethod::jeffreys;
  if (s == "bernstein" || s == "empirical_bernstein") return IntervalMethod::empirical_bernstein;
  throw std::invalid_argument("unknown interval method: " + s);
}

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 1.0;
  IntervalMethod method = IntervalMethod::clopper_pearson;
  double nominal_delta = 0.0;

  bool contains(double v) const { return lo <= v && v <= hi; }
  double width() const { return hi - lo; }
};

namespace detail {
inline void check_counts(std::size_t k, std::size_t n, double delta) {
  if (n < 1 || k > n) throw std::invalid_argument("interval: need 0 <= k <= n and n >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("interval: delta must lie in (0,1)");
}
}  // namespace detail

inline ConfidenceInterval clopper_pearson(std::size_t k, std::size_t n, double delta) {
  detail::check_counts(k, n, delta);
  const double kd = static_cast<double>(k), nd = static_cast<double>(n);
  ConfidenceInterval ci;
  ci.method = IntervalMethod::clopper_pearson;
  ci.nominal_delta = delta;
  ci.lo = k == 0 ? 0.0 : beta_quantile(0.5 * delta, kd, nd - kd + 1.0);
  ci.hi = k == n ? 1.0 : beta_quantile(1.0 - 0.5 * delta, kd + 1.0, nd - kd);
  return ci;
}

inline ConfidenceInterval jeffreys_interval(std::size_t k, std::size_t n, double delta) {
  detail::check_counts(k, n, delta);
  const double kd = static_cast<double>(k), nd = static_cast<double>(n);
  ConfidenceInterval ci;
  ci.method = IntervalMethod::jeffreys;
  ci.nominal_delta = delta;
  ci.lo = beta_quantile(0.5 * delta, kd + 0.5, nd - kd + 0.5);
  ci.hi = beta_quantile(1.0 - 0.5 * delta, kd + 0.5, nd - kd + 0.5);
  return ci;
}

/// Mean +- S_n sqrt(2 log(3/delta)/n) + 3 (b - a) log(3/delta)/n, clipped to [a, b].
inline ConfidenceInterval bernstein_from_moments(double mean, double sd, std::size_t n, double delta, double a = 0.0,
                                                 double b = 1.0) {
  const double nd = static_cast<double>(n);
  const double L = std::log(3.0 / delta);
  const double half = sd * std::sqrt(2.0 * L / nd) + 3.0 * (b - a) * L / nd;
  ConfidenceInterval ci;
  ci.method = IntervalMethod::empirical_bernstein;
  ci.nominal_delta = delta;
  ci.lo = std::max(a, mean - half);
  ci.hi = std::min(b, mean + half);
  return ci;
}

inline ConfidenceInterval empirical_bernstein(std::span<const double> values, double delta, double a = 0.0,
                                              double b = 1.0) {
  if (values.empty()) throw std::invalid_argument("empirical_bernstein: need at least one value");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("empirical_bernstein: delta must lie in (0,1)");
  if (!(a < b)) throw std::invalid_argument("empirical_bernstein: need a < b");
  double mean = 0.0;
  for (double v : values) {
    if (v < a || v > b) throw std::domain_error("empirical_bernstein: value outside [a,b]");
    mean += v;
  }
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return bernstein_from_moments(mean, std::sqrt(var), values.size(), delta, a, b);
}

/// Interval for a Bernoulli mean from k successes in n draws.
inline ConfidenceInterval bernoulli_interval(IntervalMethod method, std::size_t k, std::size_t n, double delta) {
  switch (method) {
    case IntervalMethod::clopper_pearson: return clopper_pearson(k, n, delta);
    case IntervalMethod::jeffreys: return jeffreys_interval(k, n, delta);
    case IntervalMethod::empirical_bernstein: {
      detail::check_counts(k, n, delta);
      const double p = static_cast<double>(k) / static_cast<double>(n);
      return bernstein_from_moments(p, std::sqrt(p * (1.0 - p)), n, delta);
    }
  }
  throw std::invalid_argument("bernoulli_interval: unknown method");
}

struct PsiEstimate {
  double mean = 0.0;
  std::size_t num_draws = 0;
  std::size_t successes = 0;
  ConfidenceInterval interval;
};

/// Round j uses n_j = ceil(beta^(j-1) N) draws and risk d_j = j^-alpha (alpha-1)/alpha delta.
struct TestSchedule {
  double alpha = 1.1;
  double beta = 1.5;
  std::size_t n0 = 64;
  double delta_est_step = 0.05;
  std::optional<std::size_t> hard_cap = 1000;

  double risk(std::size_t j) const {
    return std::pow(static_cast<double>(j), -alpha) * (alpha - 1.0) / alpha * delta_est_step;
  }

  std::size_t draws(std::size_t j) const {
    std::size_t prev = 0;
    std::size_t out = 0;
    for (std::size_t i = 1; i <= j; ++i) {
      const double raw = std::pow(beta, static_cast<double>(i - 1)) * static_cast<double>(n0);
      out = std::max(static_cast<std::size_t>(std::ceil(raw - 1e-9)), prev + 1);
      prev = out;
    }
    return out;
  }
};

inline TestSchedule make_schedule(double delta_est_step, double alpha = 1.1, double beta = 1.5, std::size_t n0 = 64,
                                  std::optional<std::size_t> cap = 1000) {
  if (!(alpha > 1.0)) throw std::invalid_argument("make_schedule: alpha must exceed 1");
  if (!(beta > 1.0)) throw std::invalid_argument("make_schedule: beta must exceed 1");
  if (n0 < 1) throw std::invalid_argument("make_schedule: n0 must be positive");
  if (!(delta_est_step > 0.0 && delta_est_step < 1.0)) throw std::invalid_argument("make_schedule: delta must lie in (0,1)");
  if (cap && *cap < 1) throw std::invalid_argument("make_schedule: cap must be positive");
  return TestSchedule{alpha, beta, n0, delta_est_step, cap};
}

enum class Decision { above, below, inconclusive_capped };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::above: return "above";
    case Decision::below: return "below";
    case Decision::inconclusive_capped: return "inconclusive_capped";
  }
  return "?";
}

struct DecisionOutcome {
  Decision decision = Decision::inconclusive_capped;
  bool above = false;  // final comparison mean >= lambda, made even when capped
  PsiEstimate estimate;
  std::size_t draws_used = 0;
  std::size_t rounds = 0;
  bool guaranteed = false;
};

/// sampler(count) draws `count` fresh Bernoulli variables and returns the
/// number of successes.
template <class S>
concept BernoulliSampler = requires(S& s, std::size_t count) {
  { s(count) } -> std::convertible_to<std::size_t>;
};

template <BernoulliSampler Sampler>
DecisionOutcome decide_threshold(Sampler&& sampler, double lambda, const TestSchedule& schedule,
                                 IntervalMethod method = IntervalMethod::clopper_pearson) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("decide_threshold: lambda must lie in (0,1)");
  constexpr std::size_t kMaxRounds = 90;
  DecisionOutcome out;
  std::size_t k = 0, n = 0;
  for (std::size_t j = 1; j <= kMaxRounds; ++j) {
    std::size_t target = schedule.draws(j);
    const bool at_cap = schedule.hard_cap && target >= *schedule.hard_cap;
    if (at_cap) target = *schedule.hard_cap;
    if (target > n) {
      const std::size_t got = sampler(target - n);
      if (got > target - n) throw std::logic_error("decide_threshold: sampler reported too many successes");
      k += got;
      n = target;
    }
    out.rounds = j;
    const ConfidenceInterval ci = bernoulli_interval(method, k, n, schedule.risk(j));
    out.estimate = {static_cast<double>(k) / static_cast<double>(n), n, k, ci};
    out.draws_used = n;
    out.above = out.estimate.mean >= lambda;
    if (!ci.contains(lambda)) {
      out.decision = out.above ? Decision::above : Decision::below;
      out.guaranteed = true;
      return out;
    }
    if (at_cap) break;
  }
  out.decision = Decision::inconclusive_capped;
  out.guaranteed = false;
  return out;
}

}  // namespace prb
