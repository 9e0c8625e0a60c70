#pragma once

// Stopping rules over a common per-step view: probabilistic regret bound
// (PRB) and the baselines (oracle, budget, acquisition cutoff, confidence
// bound gap, change in expected supremum).

#include "prb/common.hpp"
#include "prb/pathwise.hpp"
#include "prb/regret.hpp"
#include "prb/sample_opt.hpp"
#include "prb/seqtest.hpp"
#include "prb/space_model.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>

namespace prb {

enum class StepSchedule { constant_over_budget, geometric };

inline StepSchedule step_schedule_from_string(const std::string& s) {
  if (s == "constant") return StepSchedule::constant_over_budget;
  if (s == "geometric") return StepSchedule::geometric;
  throw std::invalid_argument("unknown schedule: " + s);
}

inline const char* to_string(StepSchedule s) {
  return s == StepSchedule::constant_over_budget ? "constant" : "geometric";
}

struct PRBParams {
  double epsilon = 0.1;
  double delta = 0.05;
  double delta_mod = 0.025;
  double delta_est = 0.025;
  StepSchedule schedule = StepSchedule::constant_over_budget;
  int budget = 64;        // T
  int initial_design = 5; // T0
  double checkpoint_ratio = 1.5;

  // Inner test.
  double alpha = 1.1;
  double beta = 1.5;
  std::size_t n0 = 64;
  std::optional<std::size_t> cap = 1000;
  IntervalMethod interval = IntervalMethod::clopper_pearson;

  int num_features = 2048;
  OptimizerConfig optimizer;
  bool surrogate_candidates = false;
  std::size_t surrogate_draws = 64;

  double lambda() const { return 1.0 - delta_mod; }

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("PRBParams: epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("PRBParams: delta must lie in (0,1)");
    if (!(delta_mod > 0.0) || !(delta_est > 0.0)) throw std::invalid_argument("PRBParams: risk splits must be positive");
    if (delta_mod + delta_est > delta * (1.0 + 1e-12)) throw std::invalid_argument("PRBParams: delta_mod + delta_est > delta");
    if (schedule == StepSchedule::constant_over_budget && budget <= initial_design) {
      throw std::invalid_argument("PRBParams: constant schedule needs budget > initial design");
    }
    if (!(alpha > 1.0) || !(checkpoint_ratio > 1.0)) throw std::invalid_argument("PRBParams: invalid schedule growth");
    optimizer.validate();
  }

  bool is_checkpoint(int t) const {
    if (t < initial_design) return false;
    if (schedule == StepSchedule::constant_over_budget) return true;
    double c = std::max(1, initial_design);
    int prev = 0;
    while (true) {
      const int ti = std::max(static_cast<int>(std::ceil(c - 1e-9)), prev + 1);
      if (ti == t) return true;
      if (ti > t) return false;
      prev = ti;
      c *= checkpoint_ratio;
    }
  }

  /// delta_est^t; zero when t is not a checkpoint.
  double step_delta(int t) const {
    if (!is_checkpoint(t)) return 0.0;
    if (schedule == StepSchedule::constant_over_budget) return delta_est / static_cast<double>(budget - initial_design);
    return std::pow(static_cast<double>(t), -alpha) * (alpha - 1.0) / alpha * delta_est;
  }
};

/// Known optimum of the true objective (maximization convention).
struct OracleHandle {
  std::function<double(const Vec&)> value;
  double optimum = 0.0;
};

struct StepView {
  const PosteriorGP* posterior = nullptr;
  int t = 0;
  const OracleHandle* oracle = nullptr;
  std::optional<double> acq_value;

  const PosteriorGP& gp() const {
    if (!posterior) throw std::invalid_argument("StepView: missing posterior");
    return *posterior;
  }
  const Dataset& data() const { return gp().data(); }
};

struct Diagnostics {
  std::map<std::string, double> values;
  std::map<std::string, std::string> tags;
};

struct StopVerdict {
  bool stop = false;
  std::optional<Vec> returned_point;
  Diagnostics diagnostics;
};

inline StopVerdict prb_rule(const StepView& view, const PRBParams& params, Seed seed) {
  params.validate();
  const PosteriorGP& gp = view.gp();
  if (gp.size() < 1) throw std::invalid_argument("prb_rule: need at least one observation");
  StopVerdict out;
  Diagnostics& dg = out.diagnostics;
  const double step_delta = params.step_delta(view.t);
  dg.values["lambda"] = params.lambda();
  dg.values["step_delta"] = step_delta;
  if (step_delta <= 0.0) {
    out.returned_point = incumbent(gp, IncumbentMode::evaluated_only);
    dg.tags["status"] = "not_a_checkpoint";
    return out;
  }

  auto fmap = std::make_shared<const FeatureMap>(build_feature_map(gp.kernel(), params.num_features, split_seed(seed, 1)));
  const CandidateSet cands =
      params.surrogate_candidates
          ? candidate_set_surrogate(gp, fmap, params.epsilon, params.surrogate_draws, params.optimizer, split_seed(seed, 3))
          : candidate_set(gp, params.epsilon, params.delta_mod);
  const auto nc = static_cast<std::size_t>(cands.size());
  const TestSchedule schedule =
      make_schedule(step_delta / static_cast<double>(nc), params.alpha, params.beta, params.n0, params.cap);

  RegretEngine engine(gp, fmap, cands.points, {params.epsilon, params.optimizer, 32}, split_seed(seed, 2));
  std::size_t best = 0;
  double best_mean = -1.0;
  std::size_t max_draws = 0;
  bool best_guaranteed = false;
  std::size_t best_rounds = 0;
  bool any_above = false;
  for (std::size_t c = 0; c < nc; ++c) {
    std::size_t used = 0;
    auto sampler = [&](std::size_t count) {
      const std::size_t k = engine.successes(c, used, used + count);
      used += count;
      return k;
    };
    const DecisionOutcome o = decide_threshold(sampler, params.lambda(), schedule, params.interval);
    max_draws = std::max(max_draws, o.draws_used);
    any_above = any_above || o.above;
    if (o.estimate.mean > best_mean) {
      best_mean = o.estimate.mean;
      best = c;
      best_guaranteed = o.guaranteed;
      best_rounds = o.rounds;
    }
  }
  out.stop = any_above;
  out.returned_point = cands.point(static_cast<Eigen::Index>(best));
  dg.values["num_candidates"] = static_cast<double>(nc);
  dg.values["max_estimate"] = best_mean;
  dg.values["draws_used"] = static_cast<double>(max_draws);
  dg.values["paths"] = static_cast<double>(engine.paths_drawn());
  dg.values["rounds"] = static_cast<double>(best_rounds);
  dg.values["guaranteed"] = best_guaranteed ? 1.0 : 0.0;
  dg.tags["candidates"] = to_string(cands.provenance);
  return out;
}

inline StopVerdict acq_rule(const StepView& view, double cutoff) {
  if (!view.acq_value) throw std::invalid_argument("acq_rule: acquisition value missing");
  StopVerdict out;
  out.stop = *view.acq_value <= cutoff;
  out.returned_point = incumbent(view.gp(), IncumbentMode::evaluated_only);
  out.diagnostics.values["acq_value"] = *view.acq_value;
  out.diagnostics.values["cutoff"] = cutoff;
  return out;
}

/// beta_t = 0.4 log(D t^2 pi^2 / (6 delta)).
inline double cb_beta(int dim, int t, double delta) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  return 0.4 * std::log(dim * static_cast<double>(t) * t * pi2 / (6.0 * delta));
}

inline StopVerdict delta_cb_rule(const StepView& view, double cutoff, double delta, const OptimizerConfig& cfg,
                                 Seed seed) {
  const PosteriorGP& gp = view.gp();
  if (gp.size() < 1 || view.t < 1) throw std::invalid_argument("delta_cb_rule: need t >= 1");
  const Link link = gp.hyper().link;
  const double beta = cb_beta(gp.dim(), view.t, delta);
  const double rb = std::sqrt(std::max(beta, 0.0));
  auto ucb = [&](const Vec& x, Vec* grad) {
    Vec gm, gv;
    const double m = gp.mean_with_grad(x, grad ? &gm : nullptr);
    const double v = gp.variance_with_grad(x, grad ? &gv : nullptr);
    const double s = std::sqrt(v);
    if (grad) {
      *grad = gm;
      if (s > 1e-12) *grad += (rb * 0.5 / s) * gv;
    }
    return m + rb * s;
  };
  const MaximizeResult r = maximize(ucb, gp.dim(), cfg, seed);
  double ucb_max = inverse_link(link, r.value);
  double lcb_max = -kInf;
  Eigen::Index lcb_arg = 0;
  for (Eigen::Index i = 0; i < gp.size(); ++i) {
    const Moments mo = gp.moments(gp.data().point(i));
    const double s = std::sqrt(mo.variance);
    ucb_max = std::max(ucb_max, inverse_link(link, mo.mean + rb * s));
    const double l = inverse_link(link, mo.mean - rb * s);
    if (l > lcb_max) {
      lcb_max = l;
      lcb_arg = i;
    }
  }
  StopVerdict out;
  const double gap = ucb_max - lcb_max;
  out.stop = gap <= cutoff;
  out.returned_point = gp.data().point(lcb_arg);
  out.diagnostics.values["beta"] = beta;
  out.diagnostics.values["gap"] = gap;
  out.diagnostics.values["ucb_max"] = ucb_max;
  out.diagnostics.values["lcb_max"] = lcb_max;
  out.diagnostics.values["cutoff"] = cutoff;
  return out;
}

struct ESConfig {
  std::size_t n_paths = 32;
  int num_features = 2048;
  OptimizerConfig optimizer;
};

/// Mean of path suprema (objective scale) from common random numbers.
inline std::pair<double, double> expected_supremum(const PosteriorGP& gp, const ESConfig& cfg, Seed seed) {
  auto fmap = std::make_shared<const FeatureMap>(build_feature_map(gp.kernel(), cfg.num_features, split_seed(seed, 1)));
  const std::vector<Supremum> sups = sample_suprema(gp, fmap, cfg.n_paths, cfg.optimizer, split_seed(seed, 2));
  double mean = 0.0, sq = 0.0;
  for (const Supremum& s : sups) {
    const double v = inverse_link(gp.hyper().link, s.value);
    mean += v;
    sq += v * v;
  }
  const double n = static_cast<double>(sups.size());
  mean /= n;
  const double var = sups.size() > 1 ? std::max(0.0, (sq - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, var};
}

/// Monte Carlo stand-in for the expected-supremum change bound: both
/// expectations are estimated from the same seeds.
inline StopVerdict delta_es_rule(const StepView& prev, const StepView& curr, double cutoff, const ESConfig& cfg,
                                 Seed seed) {
  if (cfg.n_paths < 1) throw std::invalid_argument("delta_es_rule: need at least one path");
  const auto [m_prev, v_prev] = expected_supremum(prev.gp(), cfg, seed);
  const auto [m_curr, v_curr] = expected_supremum(curr.gp(), cfg, seed);
  StopVerdict out;
  const double change = std::abs(m_curr - m_prev);
  out.stop = change <= cutoff;
  out.returned_point = incumbent(curr.gp(), IncumbentMode::evaluated_only);
  out.diagnostics.values["es_prev"] = m_prev;
  out.diagnostics.values["es_curr"] = m_curr;
  out.diagnostics.values["change"] = change;
  out.diagnostics.values["cutoff"] = cutoff;
  out.diagnostics.values["n_paths"] = static_cast<double>(cfg.n_paths);
  out.diagnostics.tags["estimator"] = "monte_carlo_proxy";
  if (cfg.n_paths == 1) {
    out.diagnostics.tags["variance"] = "degenerate_single_path";
  } else {
    out.diagnostics.values["change_se"] = std::sqrt((v_prev + v_curr) / static_cast<double>(cfg.n_paths));
  }
  return out;
}

inline StopVerdict oracle_rule(const StepView& view, double epsilon) {
  if (!view.oracle || !view.oracle->value) throw std::invalid_argument("oracle_rule: missing oracle handle");
  const Dataset& d = view.data();
  StopVerdict out;
  double best = -kInf;
  Eigen::Index arg = -1;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double v = view.oracle->value(d.point(i));
    if (v > best) {
      best = v;
      arg = i;
    }
  }
  if (arg >= 0) out.returned_point = d.point(arg);
  out.stop = arg >= 0 && view.oracle->optimum - best <= epsilon;
  out.diagnostics.values["best_true"] = best;
  return out;
}

inline StopVerdict budget_rule(const StepView& view, int budget) {
  StopVerdict out;
  out.stop = view.t >= budget;
  if (view.posterior && view.gp().size() > 0) out.returned_point = incumbent(view.gp(), IncumbentMode::evaluated_only);
  out.diagnostics.values["budget"] = budget;
  return out;
}

}  // namespace prb
