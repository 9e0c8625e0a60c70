#pragma once

// Seeded BO runs, replay of recorded runs under any stopping rule, and
// Table-style summaries.

#include "prb/acquisition.hpp"
#include "prb/harness/objectives.hpp"
#include "prb/harness/record.hpp"
#include "prb/regret.hpp"
#include "prb/space_model.hpp"
#include "prb/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace prb::harness {

struct RunConfig {
  int budget = 64;
  int initial_design = 5;
  ModelMode model = ModelMode::true_hyper;
  Link link = Link::identity;
  ISKGConfig acquisition;
  FitConfig fit;
};

/// Hyperparameters used before two observations are available.
inline GPHyperparams prior_median_hyperparams(const Dataset& data, Link link) {
  GPHyperparams h;
  h.link = link;
  h.mean_constant = data.size() > 0 ? apply_link(link, data.values()[0]) : 0.0;
  h.kernel = KernelSpec(1.0, Vec::Constant(data.dim(), std::exp(0.5)));
  h.noise_variance = 1e-4;
  return h;
}

inline RunRecord run_bo(const Objective& objective, const RunConfig& cfg, Seed seed, const std::string& run_id = "",
                        Seed objective_seed = 0) {
  if (!(cfg.budget > cfg.initial_design) || cfg.initial_design < 1) {
    throw std::invalid_argument("run_bo: need budget > initial design >= 1");
  }
  if (cfg.model == ModelMode::true_hyper && !objective.true_hyper) {
    throw std::invalid_argument("run_bo: objective has no known hyperparameters");
  }
  RunRecord rec;
  rec.run_id = run_id.empty() ? objective.name + "-" + std::to_string(seed) : run_id;
  rec.seed = seed;
  rec.objective = objective.name;
  rec.dim = objective.dim;
  rec.noise = objective.noise_variance;
  rec.objective_seed = objective_seed;
  rec.budget = cfg.budget;
  rec.initial_design = cfg.initial_design;
  rec.model = cfg.model;
  rec.link = cfg.link;

  Rng design_rng = make_rng(split_seed(seed, 1));
  Rng noise_rng = make_rng(split_seed(seed, 2));
  Dataset data(objective.dim);
  std::optional<GPHyperparams> previous;
  Vec next;
  try {
    for (int t = 1; t <= cfg.budget; ++t) {
      const Vec x = t <= cfg.initial_design ? uniform_point(design_rng, objective.dim) : next;
      const double y = objective.observe(x, noise_rng);
      if (!std::isfinite(y)) throw std::runtime_error("objective returned a non-finite value");
      data.add(x, y);

      GPHyperparams hyper;
      if (cfg.model == ModelMode::true_hyper) {
        hyper = *objective.true_hyper;
        hyper.link = cfg.link;
      } else if (t < 2) {
        hyper = prior_median_hyperparams(data, cfg.link);
      } else {
        FitConfig fc = cfg.fit;
        fc.link = cfg.link;
        try {
          hyper = fit_map(data, HyperpriorSpec::from_data(data, cfg.link), split_seed(seed, 5000 + t), fc);
        } catch (const DegenerateData&) {
          hyper = previous ? *previous : prior_median_hyperparams(data, cfg.link);
        }
      }
      previous = hyper;
      const PosteriorGP gp(hyper, data);
      StepEntry e;
      e.t = t;
      e.x = x;
      e.y = y;
      e.hyper = hyper;
      e.incumbent = incumbent(gp, IncumbentMode::evaluated_only);
      if (t >= cfg.initial_design) {
        const QuerySelection q = select_query(gp, cfg.acquisition, split_seed(seed, 1000 + t));
        e.acq_value = q.value;
        next = q.point;
      }
      rec.steps.push_back(std::move(e));
    }
  } catch (const std::exception& ex) {
    rec.valid = false;
    rec.error = ex.what();
  }
  return rec;
}

enum class RuleKind { prb, acq, delta_cb, delta_es, oracle, budget };

inline RuleKind rule_kind_from_string(const std::string& s) {
  if (s == "prb") return RuleKind::prb;
  if (s == "acq") return RuleKind::acq;
  if (s == "delta_cb" || s == "dcb") return RuleKind::delta_cb;
  if (s == "delta_es" || s == "des") return RuleKind::delta_es;
  if (s == "oracle") return RuleKind::oracle;
  if (s == "budget") return RuleKind::budget;
  throw std::invalid_argument("unknown rule: " + s);
}

inline const char* to_string(RuleKind k) {
  switch (k) {
    case RuleKind::prb: return "prb";
    case RuleKind::acq: return "acq";
    case RuleKind::delta_cb: return "delta_cb";
    case RuleKind::delta_es: return "delta_es";
    case RuleKind::oracle: return "oracle";
    case RuleKind::budget: return "budget";
  }
  return "?";
}

struct RuleSpec {
  RuleKind kind = RuleKind::prb;
  std::string label;  // defaults to the kind
  double epsilon = 0.1;
  double cutoff = 0.0;
  double delta = 0.05;
  int budget = 0;
  PRBParams prb;
  ESConfig es;
  OptimizerConfig optimizer;
  Seed seed = 0;

  std::string name() const { return label.empty() ? to_string(kind) : label; }
};

struct ReplayResult {
  std::string rule;
  std::string run_id;
  int stop_t = 0;
  bool terminated = false;
  Vec returned;
  double regret = std::numeric_limits<double>::quiet_NaN();
  bool success = false;
  StopVerdict verdict;
};

/// Walks a record and applies the rule at each step; the first stop wins.
/// Rules that never stop report t = T with terminated = false.
inline ReplayResult replay(const RunRecord& rec, const RuleSpec& spec, const Objective* objective = nullptr) {
  if (!rec.valid) throw std::invalid_argument("replay: record is flagged invalid");
  if (rec.length() < 1) throw std::invalid_argument("replay: empty record");
  const int T = rec.length();
  ReplayResult out;
  out.rule = spec.name();
  out.run_id = rec.run_id;

  OracleHandle oracle;
  if (objective) {
    oracle.value = objective->evaluate;
    oracle.optimum = objective->optimum;
  }
  PRBParams prb = spec.prb;
  prb.epsilon = spec.epsilon;
  prb.budget = rec.budget;
  prb.initial_design = rec.initial_design;

  auto evaluate = [&](int t) -> StopVerdict {
    const PosteriorGP gp = rec.posterior(t);
    StepView view;
    view.posterior = &gp;
    view.t = t;
    view.oracle = objective ? &oracle : nullptr;
    view.acq_value = rec.step(t).acq_value;
    const Seed s = split_seed(spec.seed, static_cast<std::uint64_t>(t));
    switch (spec.kind) {
      case RuleKind::prb: return prb_rule(view, prb, s);
      case RuleKind::acq: return acq_rule(view, spec.cutoff);
      case RuleKind::delta_cb: return delta_cb_rule(view, spec.cutoff, spec.delta, spec.optimizer, s);
      case RuleKind::delta_es: {
        const PosteriorGP prev_gp = rec.posterior(t - 1);
        StepView prev = view;
        prev.posterior = &prev_gp;
        prev.t = t - 1;
        return delta_es_rule(prev, view, spec.cutoff, spec.es, s);
      }
      case RuleKind::oracle: return oracle_rule(view, spec.epsilon);
      case RuleKind::budget: return budget_rule(view, spec.budget);
    }
    throw std::logic_error("replay: unhandled rule");
  };

  int first = rec.initial_design;
  if (spec.kind == RuleKind::oracle) first = 1;
  if (spec.kind == RuleKind::delta_es) first = std::max(first, 2);
  if (spec.kind == RuleKind::budget) first = std::clamp(spec.budget, 1, T);
  first = std::min(first, T);

  for (int t = first; t <= T; ++t) {
    StopVerdict v = evaluate(t);
    if (v.stop) {
      out.stop_t = t;
      out.terminated = true;
      out.verdict = std::move(v);
      break;
    }
    if (t == T) {
      out.stop_t = T;
      out.terminated = false;
      out.verdict = std::move(v);
    }
  }
  out.returned = out.verdict.returned_point ? *out.verdict.returned_point : rec.step(out.stop_t).incumbent;
  if (objective) {
    out.regret = std::max(0.0, objective->regret(out.returned));
    out.success = out.regret <= spec.epsilon;
  }
  return out;
}

/// Linear-interpolation quantile of a nonempty sample.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double log10_regret(double r) { return std::max(-9.0, std::log10(std::max(r, 1e-300))); }

struct SummaryRow {
  std::string rule;
  std::string objective;
  int dim = 0;
  double noise = 0.0;
  int n_runs = 0;
  double success_rate = 0.0;
  double term_rate = 0.0;
  double stop_q[3] = {0, 0, 0};
  double regret_q[3] = {0, 0, 0};  // log10, floored at -9
  double excess_q[3] = {0, 0, 0};  // log10(regret - eps) over failures; NaN when none
};

inline SummaryRow summarize(const std::vector<ReplayResult>& replays, const std::string& objective, int dim,
                            double noise, double epsilon) {
  if (replays.empty()) throw std::invalid_argument("summarize: no replays");
  SummaryRow row;
  row.rule = replays.front().rule;
  row.objective = objective;
  row.dim = dim;
  row.noise = noise;
  row.n_runs = static_cast<int>(replays.size());
  std::vector<double> stops, regrets, excess;
  int succ = 0, term = 0;
  for (const ReplayResult& r : replays) {
    succ += r.success ? 1 : 0;
    term += r.terminated ? 1 : 0;
    stops.push_back(r.stop_t);
    regrets.push_back(log10_regret(r.regret));
    if (r.regret > epsilon) excess.push_back(log10_regret(r.regret - epsilon));
  }
  row.success_rate = static_cast<double>(succ) / row.n_runs;
  row.term_rate = static_cast<double>(term) / row.n_runs;
  const double qs[3] = {0.25, 0.5, 0.75};
  for (int i = 0; i < 3; ++i) {
    row.stop_q[i] = quantile(stops, qs[i]);
    row.regret_q[i] = quantile(regrets, qs[i]);
    row.excess_q[i] = quantile(excess, qs[i]);
  }
  return row;
}

inline const char* summary_csv_header() {
  return "rule,objective,dim,noise,n_runs,success_rate,term_rate,stop_q25,stop_q50,stop_q75,regret_q25,regret_q50,"
         "regret_q75";
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << summary_csv_header() << '\n';
  for (const SummaryRow& r : rows) {
    os << r.rule << ',' << r.objective << ',' << r.dim << ',' << r.noise << ',' << r.n_runs << ',' << r.success_rate
       << ',' << r.term_rate;
    for (double q : r.stop_q) os << ',' << q;
    for (double q : r.regret_q) os << ',' << q;
    os << '\n';
  }
}

/// Smallest T_b at which at least `target` of the runs' incumbents are
/// eps-optimal; the record length when no such T_b exists.
inline int budget_oracle(const std::vector<RunRecord>& records, const Objective& objective, double epsilon,
                         double target = 0.95) {
  if (records.empty()) throw std::invalid_argument("budget_oracle: no records");
  int T = records.front().length();
  for (const RunRecord& r : records) T = std::min(T, r.length());
  for (int tb = 1; tb <= T; ++tb) {
    int ok = 0;
    for (const RunRecord& r : records) ok += objective.is_epsilon_optimal(r.step(tb).incumbent, epsilon) ? 1 : 0;
    if (static_cast<double>(ok) >= target * static_cast<double>(records.size())) return tb;
  }
  return T;
}

/// Rebuilds the objective a record was produced on.
inline Objective objective_for(const RunRecord& rec) {
  return make_objective(rec.objective, rec.dim, rec.noise, rec.objective_seed);
}

}  // namespace prb::harness
