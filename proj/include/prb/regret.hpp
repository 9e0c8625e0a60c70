#pragma once

// Model-based regret r_t(x) = f_t* - f_t(x) by joint sampling of pathwise
// draws, Monte Carlo estimates of P(r_t(x) <= eps), the closed-form
// alternatives, incumbents and candidate sets.

#include "prb/common.hpp"
#include "prb/pathwise.hpp"
#include "prb/sample_opt.hpp"
#include "prb/seqtest.hpp"
#include "prb/space_model.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <vector>

namespace prb {

struct RegretDraw {
  bool indicator = true;
  std::optional<Vec> witness;
  Seed path_seed = 0;
  long evaluations = 0;
};

/// Supremum of one path on the latent scale.
struct Supremum {
  double value = -kInf;  // latent scale
  Vec argmax;
};

namespace detail {

inline double outcome_scale(Link link, double latent) { return inverse_link(link, latent); }

/// Latent level corresponding to "objective value of `latent` plus eps".
inline double latent_gap_level(Link link, double latent, double eps) {
  if (link == Link::identity) return latent + eps;
  const double p = inverse_link(link, latent) + eps;
  return p >= 1.0 ? kInf : apply_link(link, p);
}

}  // namespace detail

inline RegretDraw draw_regret_indicator(const PosteriorGP& gp, std::shared_ptr<const FeatureMap> fmap, const Vec& x,
                                        double epsilon, const OptimizerConfig& cfg, Seed seed) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("draw_regret_indicator: epsilon must be positive");
  if (!in_unit_cube(x, 1e-12)) throw std::invalid_argument("draw_regret_indicator: x outside the cube");
  const PathwiseSample path = draw_path(gp, std::move(fmap), seed);
  const Link link = gp.hyper().link;
  const double base = path.value(x);
  const double level = detail::latent_gap_level(link, base, epsilon);
  RegretDraw out;
  out.path_seed = seed;
  if (!std::isfinite(level)) return out;
  MaximizeResult r = maximize(path, gp.dim(), cfg, split_seed(seed, 0xD1), level);
  out.evaluations = r.evaluations + 1;
  if (r.exited_early) {
    out.indicator = false;
    out.witness = r.witness;
  }
  return out;
}

/// Joint-sampling engine shared by every quantity computed from one batch of
/// paths at a fixed step. Path i is drawn from split_seed(root, i); all paths
/// share one random-search design with precomputed features; the search stage
/// is a matrix product. Each path is maximized once with early
/// exit at the largest candidate level, and the result answers the indicator
/// for every candidate.
class RegretEngine {
 public:
  struct Options {
    double epsilon = 0.1;
    OptimizerConfig optimizer;
    int batch = 32;
  };

  RegretEngine(const PosteriorGP& gp, std::shared_ptr<const FeatureMap> fmap, Mat candidates, Options opts, Seed root)
      : gp_(gp), fmap_(std::move(fmap)), candidates_(std::move(candidates)), opts_(opts), root_(root) {
    opts_.optimizer.validate();
    if (candidates_.rows() > 0 && !(opts_.epsilon > 0.0)) {
      throw std::invalid_argument("RegretEngine: epsilon must be positive");
    }
    if (opts_.batch < 1) opts_.batch = 1;
    const int D = gp_.dim();
    if (candidates_.rows() > 0 && candidates_.cols() != D) throw std::invalid_argument("RegretEngine: dimension mismatch");
    design_ = sobol_design(opts_.optimizer.random_search_points, D, split_seed(root_, kDesignStream));
    phi_design_ = fmap_->features(design_);
    phi_train_ = gp_.size() > 0 ? fmap_->features(gp_.points()) : Mat(0, fmap_->size());
    if (gp_.size() > 0) k_design_ = gp_.kernel().cross(design_, gp_.points());
    if (candidates_.rows() > 0) {
      phi_cand_ = fmap_->features(candidates_);
      if (gp_.size() > 0) k_cand_ = gp_.kernel().cross(candidates_, gp_.points());
    }
  }

  Seed path_seed(std::size_t i) const { return split_seed(root_, i); }
  std::size_t num_candidates() const { return static_cast<std::size_t>(candidates_.rows()); }
  std::size_t paths_drawn() const { return outcomes_.size(); }
  long evaluations() const { return evaluations_; }
  const Mat& candidates() const { return candidates_; }

  /// Ensures paths [0, n) have been processed.
  void ensure(std::size_t n) {
    while (outcomes_.size() < n) process_batch(std::min<std::size_t>(opts_.batch, n - outcomes_.size()));
  }

  bool indicator(std::size_t path, std::size_t cand) {
    ensure(path + 1);
    return outcomes_[path].indicators[cand];
  }

  std::size_t successes(std::size_t cand, std::size_t begin, std::size_t end) {
    ensure(end);
    std::size_t k = 0;
    for (std::size_t i = begin; i < end; ++i) k += outcomes_[i].indicators[cand] ? 1 : 0;
    return k;
  }

  RegretDraw draw(std::size_t path, std::size_t cand) {
    ensure(path + 1);
    const Outcome& o = outcomes_[path];
    RegretDraw d;
    d.indicator = o.indicators[cand];
    d.path_seed = path_seed(path);
    d.evaluations = o.evaluations;
    if (!d.indicator) d.witness = o.argmax;
    return d;
  }

  /// Latent supremum estimate of path i. Lower bound only when the path
  /// exited early (possible only with candidates).
  Supremum supremum(std::size_t path) {
    ensure(path + 1);
    return {outcomes_[path].sup, outcomes_[path].argmax};
  }

  bool exited_early(std::size_t path) {
    ensure(path + 1);
    return outcomes_[path].exited;
  }

 private:
  static constexpr std::uint64_t kDesignStream = 0xFFFFFFFFFFFF0001ULL;

  struct Outcome {
    double sup = -kInf;
    Vec argmax;
    bool exited = false;
    long evaluations = 0;
    std::vector<bool> indicators;
  };

  void process_batch(std::size_t count) {
    const Eigen::Index m = fmap_->size(), t = gp_.size();
    const auto B = static_cast<Eigen::Index>(count);
    std::vector<PathwiseSample> paths;
    paths.reserve(count);
    Mat W(m, B), V(t, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      paths.push_back(draw_path(gp_, fmap_, phi_train_, path_seed(outcomes_.size() + b)));
      W.col(b) = paths.back().weights();
      if (t > 0) V.col(b) = paths.back().correction();
    }
    const double c = gp_.hyper().mean_constant;
    Mat values = phi_design_ * W;
    if (t > 0) values.noalias() += k_design_ * V;
    values.array() += c;
    Mat cand_values;
    if (candidates_.rows() > 0) {
      cand_values = phi_cand_ * W;
      if (t > 0) cand_values.noalias() += k_cand_ * V;
      cand_values.array() += c;
    }

    const Link link = gp_.hyper().link;
    for (Eigen::Index b = 0; b < B; ++b) {
      Outcome o;
      double level = kInf;
      double best_cand = -kInf;
      Eigen::Index best_idx = -1;
      if (candidates_.rows() > 0) {
        best_idx = 0;
        best_cand = cand_values.col(b).maxCoeff(&best_idx);
        level = detail::latent_gap_level(link, best_cand, opts_.epsilon);
      }
      const Vec col = values.col(b);
      MaximizeResult r = refine(paths[b], design_, col, opts_.optimizer, level);
      o.evaluations = r.evaluations;
      evaluations_ += r.evaluations;
      o.exited = r.exited_early;
      o.sup = r.value;
      o.argmax = r.argmax;
      if (best_idx >= 0 && best_cand > o.sup) {
        o.sup = best_cand;
        o.argmax = candidates_.row(best_idx).transpose();
      }
      o.indicators.resize(candidates_.rows());
      const double sup_out = detail::outcome_scale(link, o.sup);
      for (Eigen::Index j = 0; j < candidates_.rows(); ++j) {
        o.indicators[j] = !o.exited && sup_out - detail::outcome_scale(link, cand_values(j, b)) <= opts_.epsilon;
      }
      outcomes_.push_back(std::move(o));
    }
  }

  const PosteriorGP& gp_;
  std::shared_ptr<const FeatureMap> fmap_;
  Mat candidates_;
  Options opts_;
  Seed root_;
  Mat design_, phi_design_, phi_train_, k_design_, phi_cand_, k_cand_;
  std::vector<Outcome> outcomes_;
  long evaluations_ = 0;
};

struct IntervalConfig {
  IntervalMethod method = IntervalMethod::clopper_pearson;
  double delta = 0.05;
};

inline PsiEstimate make_estimate(std::size_t k, std::size_t n, const IntervalConfig& icfg) {
  PsiEstimate e;
  e.successes = k;
  e.num_draws = n;
  e.mean = static_cast<double>(k) / static_cast<double>(n);
  e.interval = bernoulli_interval(icfg.method, k, n, icfg.delta);
  return e;
}

/// Psi_t^n(x) for each row of `xs` from the same n joint draws.
inline std::vector<PsiEstimate> estimate_psi_many(const PosteriorGP& gp, std::shared_ptr<const FeatureMap> fmap,
                                                  const Mat& xs, double epsilon, std::size_t n,
                                                  const IntervalConfig& icfg, Seed root_seed,
                                                  const OptimizerConfig& cfg = {}) {
  if (n < 1) throw std::invalid_argument("estimate_psi: need at least one draw");
  if (!(epsilon > 0.0)) throw std::invalid_argument("estimate_psi: epsilon must be positive");
  RegretEngine engine(gp, std::move(fmap), xs, {epsilon, cfg, 32}, root_seed);
  std::vector<PsiEstimate> out;
  out.reserve(xs.rows());
  for (Eigen::Index j = 0; j < xs.rows(); ++j) out.push_back(make_estimate(engine.successes(j, 0, n), n, icfg));
  return out;
}

inline PsiEstimate estimate_psi(const PosteriorGP& gp, std::shared_ptr<const FeatureMap> fmap, const Vec& x,
                                double epsilon, std::size_t n, const IntervalConfig& icfg, Seed root_seed,
                                const OptimizerConfig& cfg = {}) {
  Mat xs(1, x.size());
  xs.row(0) = x.transpose();
  return estimate_psi_many(gp, std::move(fmap), xs, epsilon, n, icfg, root_seed, cfg)[0];
}

/// Jointly sampled (f*, x*) pairs, one per path.
inline std::vector<Supremum> sample_suprema(const PosteriorGP& gp, std::shared_ptr<const FeatureMap> fmap,
                                            std::size_t n, const OptimizerConfig& cfg, Seed root_seed) {
  RegretEngine engine(gp, std::move(fmap), Mat(0, gp.dim()), {0.0, cfg, 32}, root_seed);
  std::vector<Supremum> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(engine.supremum(i));
  return out;
}

// Closed-form alternatives evaluated per (f*, x*) pair, identity link.

inline double psi_orange(const PosteriorGP& gp, const Vec& x, double epsilon, const std::vector<Supremum>& draws) {
  if (draws.empty()) throw std::invalid_argument("psi_orange: no draws");
  const Moments mo = gp.moments(x);
  const double s = std::sqrt(mo.variance);
  double acc = 0.0;
  for (const Supremum& d : draws) {
    const double gap = mo.mean - d.value + epsilon;
    acc += s > 0.0 ? normal_cdf(gap / s) : (gap >= 0.0 ? 1.0 : 0.0);
  }
  return std::clamp(acc / static_cast<double>(draws.size()), 0.0, 1.0);
}

namespace detail {

/// P(f* - eps <= F <= f* | F <= f*) for F ~ N(mu, s^2).
inline double truncated_window(double mu, double s, double fstar, double epsilon) {
  if (s <= 1e-12) return (mu <= fstar + 1e-12 && mu >= fstar - epsilon) ? 1.0 : 0.0;
  const double upper = normal_cdf((fstar - mu) / s);
  const double lower = normal_cdf((fstar - epsilon - mu) / s);
  return std::clamp((upper - lower) / std::max(upper, 1e-12), 0.0, 1.0);
}

}  // namespace detail

inline double psi_green(const PosteriorGP& gp, const Vec& x, double epsilon, const std::vector<Supremum>& draws) {
  if (draws.empty()) throw std::invalid_argument("psi_green: no draws");
  const Moments mo = gp.moments(x);
  if (!(mo.variance > 0.0)) throw NumericalError("conditioned variance zero");
  const double s = std::sqrt(mo.variance);
  double acc = 0.0;
  for (const Supremum& d : draws) acc += detail::truncated_window(mo.mean, s, d.value, epsilon);
  return std::clamp(acc / static_cast<double>(draws.size()), 0.0, 1.0);
}

/// Truncated window after conditioning f_t on f(x*) = f* for each draw.
inline double psi_red(const PosteriorGP& gp, const Vec& x, double epsilon, const std::vector<Supremum>& draws) {
  if (draws.empty()) throw std::invalid_argument("psi_red: no draws");
  const Moments mo = gp.moments(x);
  if (!(mo.variance > 0.0)) throw NumericalError("conditioned variance zero");
  double acc = 0.0;
  for (const Supremum& d : draws) {
    const Moments ms = gp.moments(d.argmax);
    double mu = mo.mean, var = mo.variance;
    if (ms.variance > 1e-12) {
      const double kxs = gp.cov(x, d.argmax);
      mu += kxs / ms.variance * (d.value - ms.mean);
      var = std::max(0.0, var - kxs * kxs / ms.variance);
    }
    acc += detail::truncated_window(mu, std::sqrt(var), d.value, epsilon);
  }
  return std::clamp(acc / static_cast<double>(draws.size()), 0.0, 1.0);
}

struct PsiAlternatives {
  double orange = 0.0;
  double green = 0.0;
  double red = 0.0;
};

inline PsiAlternatives psi_alternatives(const PosteriorGP& gp, const Vec& x, double epsilon,
                                        const std::vector<Supremum>& draws) {
  return {psi_orange(gp, x, epsilon, draws), psi_green(gp, x, epsilon, draws), psi_red(gp, x, epsilon, draws)};
}

enum class IncumbentMode { evaluated_only, whole_space };

inline Vec incumbent(const PosteriorGP& gp, IncumbentMode mode, const OptimizerConfig& cfg = {}, Seed seed = 0) {
  if (mode == IncumbentMode::evaluated_only) {
    if (gp.size() == 0) throw std::invalid_argument("incumbent: empty dataset");
    const Vec mu = (gp.hyper().kernel.cross(gp.points(), gp.points()) * gp.alpha()).array() + gp.hyper().mean_constant;
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < mu.size(); ++i) {
      if (mu[i] > mu[best]) best = i;
    }
    return gp.data().point(best);
  }
  auto mean_fn = [&gp](const Vec& x, Vec* g) { return gp.mean_with_grad(x, g); };
  return maximize(mean_fn, gp.dim(), cfg, seed).argmax;
}

enum class CandidateProvenance { in_sample_filter, surrogate_optimized, incumbent_only };

inline const char* to_string(CandidateProvenance p) {
  switch (p) {
    case CandidateProvenance::in_sample_filter: return "in_sample_filter";
    case CandidateProvenance::surrogate_optimized: return "surrogate_optimized";
    case CandidateProvenance::incumbent_only: return "incumbent_only";
  }
  return "?";
}

struct CandidateSet {
  Mat points;  // rows; the incumbent is row 0
  CandidateProvenance provenance = CandidateProvenance::in_sample_filter;
  std::vector<double> filter_probability;  // in-sample mode only

  Eigen::Index size() const { return points.rows(); }
  Vec point(Eigen::Index i) const { return points.row(i).transpose(); }
};

namespace detail {

inline bool contains_row(const std::vector<Vec>& rows, const Vec& x) {
  return std::any_of(rows.begin(), rows.end(), [&](const Vec& r) { return (r - x).lpNorm<Eigen::Infinity>() <= 1e-9; });
}

inline Mat stack_rows(const std::vector<Vec>& rows, int dim) {
  Mat out(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return out;
}

}  // namespace detail

/// P(f_t(s) - f_t(x) <= eps) under the joint Gaussian posterior.
inline double pairwise_probability(const PosteriorGP& gp, const Vec& s, const Vec& x, double epsilon) {
  Mat xs(2, s.size());
  xs.row(0) = s.transpose();
  xs.row(1) = x.transpose();
  const Mat c = gp.cov(xs);
  const double d = gp.mean(s) - gp.mean(x);
  const double var = c(0, 0) + c(1, 1) - 2.0 * c(0, 1);
  if (var <= 1e-14) return d <= epsilon ? 1.0 : 0.0;
  return normal_cdf((epsilon - d) / std::sqrt(var));
}

/// In-sample filter: evaluated points that are eps-close to the incumbent
/// with probability at least 1 - delta_mod. The incumbent is always kept.
inline CandidateSet candidate_set(const PosteriorGP& gp, double epsilon, double delta_mod) {
  if (gp.size() == 0) throw std::invalid_argument("candidate_set: empty dataset");
  const Vec s = incumbent(gp, IncumbentMode::evaluated_only);
  std::vector<Vec> rows{s};
  CandidateSet out;
  out.provenance = CandidateProvenance::in_sample_filter;
  out.filter_probability.push_back(1.0);
  for (Eigen::Index i = 0; i < gp.size(); ++i) {
    const Vec x = gp.data().point(i);
    if (detail::contains_row(rows, x)) continue;
    const double p = pairwise_probability(gp, s, x, epsilon);
    if (p >= 1.0 - delta_mod) {
      rows.push_back(x);
      out.filter_probability.push_back(p);
    }
  }
  out.points = detail::stack_rows(rows, gp.dim());
  if (out.points.rows() == 1) out.provenance = CandidateProvenance::incumbent_only;
  return out;
}

/// Surrogate mode: maximizes the average red closed form over joint
/// (f*, x*) draws and returns its maximizer alongside the incumbent.
inline CandidateSet candidate_set_surrogate(const PosteriorGP& gp, std::shared_ptr<const FeatureMap> fmap,
                                            double epsilon, std::size_t num_draws, const OptimizerConfig& cfg,
                                            Seed seed) {
  const std::vector<Supremum> draws = sample_suprema(gp, std::move(fmap), num_draws, cfg, split_seed(seed, 1));
  const Vec s = gp.size() > 0 ? incumbent(gp, IncumbentMode::evaluated_only)
                              : incumbent(gp, IncumbentMode::whole_space, cfg, split_seed(seed, 2));
  auto surrogate = [&](const Vec& x) {
    if (!(gp.variance(x) > 0.0)) return psi_orange(gp, x, epsilon, draws);
    return psi_red(gp, x, epsilon, draws);
  };
  OptimizerConfig small = cfg;
  small.random_search_points = std::min(cfg.random_search_points, 256);
  small.num_starts = std::min(cfg.num_starts, 4);
  const MaximizeResult best = maximize(with_numeric_gradient(surrogate), gp.dim(), small, split_seed(seed, 3));
  std::vector<Vec> rows{s};
  if (!detail::contains_row(rows, best.argmax)) rows.push_back(best.argmax);
  CandidateSet out;
  out.points = detail::stack_rows(rows, gp.dim());
  out.provenance = CandidateProvenance::surrogate_optimized;
  return out;
}

}  // namespace prb
