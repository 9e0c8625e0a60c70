#pragma once

// Simulators for interval coverage and for the adaptive threshold test on
// synthetic Bernoulli streams.

#include "prb/common.hpp"
#include "prb/harness/experiment.hpp"
#include "prb/seqtest.hpp"

#include <ostream>
#include <vector>

namespace prb::harness {

struct CoverageCell {
  double p = 0.0;
  std::size_t n = 0;
  double delta = 0.0;
  IntervalMethod method = IntervalMethod::clopper_pearson;
  std::size_t sims = 0;
  double coverage = 0.0;
};

inline CoverageCell coverage_cell(double p, std::size_t n, double delta, std::size_t sims, IntervalMethod method,
                                  Seed seed) {
  std::vector<char> covers(n + 1);
  for (std::size_t k = 0; k <= n; ++k) covers[k] = bernoulli_interval(method, k, n, delta).contains(p) ? 1 : 0;
  Rng rng = make_rng(seed);
  std::binomial_distribution<std::size_t> binom(n, p);
  std::size_t hit = 0;
  for (std::size_t s = 0; s < sims; ++s) hit += covers[binom(rng)];
  return {p, n, delta, method, sims, static_cast<double>(hit) / static_cast<double>(sims)};
}

inline std::vector<CoverageCell> coverage_table(const std::vector<double>& ps, const std::vector<std::size_t>& ns,
                                                double delta, std::size_t sims, IntervalMethod method, Seed seed) {
  std::vector<CoverageCell> out;
  std::uint64_t stream = 0;
  for (double p : ps) {
    for (std::size_t n : ns) out.push_back(coverage_cell(p, n, delta, sims, method, split_seed(seed, stream++)));
  }
  return out;
}

inline void write_coverage_csv(std::ostream& os, const std::vector<CoverageCell>& cells) {
  os << "method,p,n,delta,sims,coverage\n";
  for (const CoverageCell& c : cells) {
    os << to_string(c.method) << ',' << c.p << ',' << c.n << ',' << c.delta << ',' << c.sims << ',' << c.coverage << '\n';
  }
}

/// Bernoulli(p) source drawing `count` variables at once.
class BernoulliStream {
 public:
  BernoulliStream(double p, Seed seed) : p_(p), rng_(make_rng(seed)) {}
  std::size_t operator()(std::size_t count) {
    std::binomial_distribution<std::size_t> binom(count, p_);
    return binom(rng_);
  }

 private:
  double p_;
  Rng rng_;
};

struct DecisionStats {
  double p = 0.0;
  double lambda = 0.0;
  double delta = 0.0;
  std::size_t reps = 0;
  double draws_q25 = 0.0, draws_q50 = 0.0, draws_q75 = 0.0;
  double guaranteed_rate = 0.0;
  double wrong_guaranteed_rate = 0.0;  // guaranteed and on the wrong side of lambda
};

inline DecisionStats simulate_decisions(double p, double lambda, const TestSchedule& schedule, std::size_t reps,
                                        IntervalMethod method, Seed seed) {
  std::vector<double> draws;
  draws.reserve(reps);
  std::size_t guaranteed = 0, wrong = 0;
  const bool truth_above = p >= lambda;
  for (std::size_t r = 0; r < reps; ++r) {
    BernoulliStream stream(p, split_seed(seed, r));
    const DecisionOutcome o = decide_threshold(stream, lambda, schedule, method);
    draws.push_back(static_cast<double>(o.draws_used));
    if (o.guaranteed) {
      ++guaranteed;
      if (o.above != truth_above) ++wrong;
    }
  }
  DecisionStats s;
  s.p = p;
  s.lambda = lambda;
  s.delta = schedule.delta_est_step;
  s.reps = reps;
  s.draws_q25 = quantile(draws, 0.25);
  s.draws_q50 = quantile(draws, 0.5);
  s.draws_q75 = quantile(draws, 0.75);
  s.guaranteed_rate = static_cast<double>(guaranteed) / static_cast<double>(reps);
  s.wrong_guaranteed_rate = static_cast<double>(wrong) / static_cast<double>(reps);
  return s;
}

/// Median draws of the threshold test over a grid of success probabilities
/// and risk tolerances.
inline std::vector<DecisionStats> fig3_sweep(const std::vector<double>& ps, double lambda,
                                             const std::vector<double>& deltas, std::size_t reps,
                                             std::optional<std::size_t> cap, IntervalMethod method, Seed seed) {
  std::vector<DecisionStats> out;
  std::uint64_t stream = 0;
  for (double d : deltas) {
    const TestSchedule sch = make_schedule(d, 1.1, 1.5, 64, cap);
    for (double p : ps) out.push_back(simulate_decisions(p, lambda, sch, reps, method, split_seed(seed, stream++)));
  }
  return out;
}

inline void write_fig3_csv(std::ostream& os, const std::vector<DecisionStats>& rows) {
  os << "p,lambda,delta,reps,draws_q25,draws_q50,draws_q75,guaranteed_rate,wrong_guaranteed_rate\n";
  for (const DecisionStats& s : rows) {
    os << s.p << ',' << s.lambda << ',' << s.delta << ',' << s.reps << ',' << s.draws_q25 << ',' << s.draws_q50 << ','
       << s.draws_q75 << ',' << s.guaranteed_rate << ',' << s.wrong_guaranteed_rate << '\n';
  }
}

}  // namespace prb::harness
