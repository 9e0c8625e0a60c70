// Acceptance checks: one PASS/FAIL line per criterion.

#include "checks.hpp"

#include <prb/harness/experiment.hpp>
#include <prb/harness/simulate.hpp>

#include <chrono>
#include <cstdio>
#include <string>

using namespace prb;
using namespace prb::harness;

namespace {

int failures = 0;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("%s  C%-2d %-34s %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void coverage() {
  Timer tm;
  const auto cells = coverage_table({0.05, 0.5, 0.95}, {10, 100}, 0.1, 10000, IntervalMethod::clopper_pearson, 101);
  double lo = 1.0;
  for (const CoverageCell& c : cells) lo = std::min(lo, c.coverage);
  const double s = tm.seconds();
  report(1, "clopper-pearson coverage", lo >= 0.90 && s < 30.0,
         fmt("min coverage %.4f >= 0.90 over %zu cells; %.1f s < 30 s", lo, cells.size(), s));
}

void error_control() {
  Timer tm;
  const TestSchedule sch = make_schedule(0.05, 1.1, 1.5, 64, std::nullopt);
  const DecisionStats st = simulate_decisions(0.9, 0.95, sch, 1000, IntervalMethod::clopper_pearson, 102);
  const double limit = 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / 1000.0);
  const double s = tm.seconds();
  report(2, "threshold test error control", st.wrong_guaranteed_rate <= limit && s < 120.0,
         fmt("wrong-side guaranteed %.4f <= %.4f; %.1f s < 120 s", st.wrong_guaranteed_rate, limit, s));
}

void draws_trend() {
  const TestSchedule sch = make_schedule(0.05, 1.1, 1.5, 64, std::nullopt);
  double med[3];
  const double ps[3] = {0.999, 0.97, 0.955};
  for (int i = 0; i < 3; ++i) {
    med[i] = simulate_decisions(ps[i], 0.95, sch, 200, IntervalMethod::clopper_pearson, split_seed(103, i)).draws_q50;
  }
  report(3, "median draws shrink with margin", med[0] < med[1] && med[1] < med[2],
         fmt("median draws p=0.999: %.0f < p=0.97: %.0f < p=0.955: %.0f", med[0], med[1], med[2]));
}

void moment_matching() {
  Timer tm;
  const check::GridMoments e = check::moment_error(oracle::fixture_1d(8, 1e-4, 104), 2048, 4096, 105);
  const double s = tm.seconds();
  report(4, "pathwise moment matching", e.mean_err <= 0.05 && e.cov_err <= 0.1 && s < 60.0,
         fmt("mean err %.4f <= 0.05, cov err %.4f <= 0.1; %.1f s < 60 s", e.mean_err, e.cov_err, s));
}

void estimator_fidelity() {
  Timer tm;
  const check::Fidelity f = check::estimator_fidelity(1000);
  const double s = tm.seconds();
  report(5, "psi estimator fidelity", f.joint <= 0.05 && f.red < f.orange && s < 300.0,
         fmt("mad %.4f <= 0.05; red %.4f < orange %.4f (green %.4f); %.1f s < 300 s", f.joint, f.red, f.orange,
             f.green, s));
}

struct RowStats {
  double success = 0.0;
  double term = 0.0;
  double median_stop = 0.0;
};

RowStats row_stats(const std::vector<ReplayResult>& rs) {
  const SummaryRow row = summarize(rs, "gp", 2, 0.0, 0.1);
  return {row.success_rate, row.term_rate, row.stop_q[1]};
}

RuleSpec prb_spec(Seed seed) {
  RuleSpec r;
  r.kind = RuleKind::prb;
  r.epsilon = 0.1;
  r.prb.delta = 0.05;
  r.prb.delta_mod = 0.025;
  r.prb.delta_est = 0.025;
  r.prb.optimizer.num_starts = 2;
  r.seed = seed;
  return r;
}

void table_row() {
  Timer tm;
  RunConfig cfg;
  cfg.budget = 64;
  std::vector<ReplayResult> prb, orc;
  for (Seed i = 0; i < 20; ++i) {
    const Seed seed = split_seed(106, i);
    const Objective obj = gp_draw(2, 1e-6, split_seed(seed, 77));
    const RunRecord rec = run_bo(obj, cfg, seed);
    if (!rec.valid) throw std::runtime_error("run failed: " + rec.error);
    prb.push_back(replay(rec, prb_spec(split_seed(seed, 3)), &obj));
    RuleSpec o;
    o.kind = RuleKind::oracle;
    o.epsilon = 0.1;
    orc.push_back(replay(rec, o, &obj));
    std::printf("      run %2llu: prb stop %2d ok %d | oracle stop %2d\n", static_cast<unsigned long long>(i),
                prb.back().stop_t, prb.back().success ? 1 : 0, orc.back().stop_t);
  }
  const RowStats p = row_stats(prb), o = row_stats(orc);
  report(6, "gp 2d noise 1e-6 table row",
         p.success >= 0.90 && p.median_stop >= 10 && p.median_stop <= 30 && o.median_stop >= 6 && o.median_stop <= 16,
         fmt("prb success %.2f >= 0.90, prb median stop %.1f in [10,30], oracle median %.1f in [6,16]; %.0f s",
             p.success, p.median_stop, o.median_stop, tm.seconds()));
}

void noise_pathology() {
  Timer tm;
  RunConfig cfg;
  cfg.budget = 128;
  std::vector<ReplayResult> prb, dcb;
  for (Seed i = 0; i < 20; ++i) {
    const Seed seed = split_seed(107, i);
    const Objective obj = gp_draw(2, 1e-2, split_seed(seed, 77));
    const RunRecord rec = run_bo(obj, cfg, seed);
    if (!rec.valid) throw std::runtime_error("run failed: " + rec.error);
    prb.push_back(replay(rec, prb_spec(split_seed(seed, 3)), &obj));
    RuleSpec c;
    c.kind = RuleKind::delta_cb;
    c.epsilon = 0.1;
    c.cutoff = 0.1;
    c.delta = 0.05;
    c.seed = split_seed(seed, 4);
    dcb.push_back(replay(rec, c, &obj));
    std::printf("      run %2llu: prb stop %3d term %d ok %d | delta_cb stop %3d term %d ok %d\n",
                static_cast<unsigned long long>(i), prb.back().stop_t, prb.back().terminated ? 1 : 0,
                prb.back().success ? 1 : 0, dcb.back().stop_t, dcb.back().terminated ? 1 : 0,
                dcb.back().success ? 1 : 0);
  }
  const RowStats p = row_stats(prb), c = row_stats(dcb);
  report(7, "delta-cb noise pathology", c.term < p.term,
         fmt("delta_cb termination %.2f < prb termination %.2f (medians %.1f vs %.1f, success %.2f vs %.2f); %.0f s",
             c.term, p.term, c.median_stop, p.median_stop, c.success, p.success, tm.seconds()));
}

void bound_domination() {
  Timer tm;
  auto rate = [](const auto& checks) {
    int ok = 0;
    for (const auto& c : checks) ok += c.dominates();
    return static_cast<double>(ok) / static_cast<double>(checks.size());
  };
  const double bt = rate(check::borell_tis_checks(200, 2000, 108));
  const double es = rate(check::expected_sup_checks());
  int ok = 0, total = 0;
  for (const check::CoverCase& c : check::cover_cases()) {
    if (!c.applies) continue;
    ok += c.dominated;
    ++total;
  }
  const double vc = total > 0 ? static_cast<double>(ok) / total : 0.0;
  const double s = tm.seconds();
  report(8, "bound domination", bt >= 0.95 && es >= 0.95 && vc >= 0.95 && s < 300.0,
         fmt("borell-tis %.3f, expected sup %.3f, variance contraction %.3f (%d configs) >= 0.95; %.1f s < 300 s", bt,
             es, vc, total, s));
}

void iskg_closed_form() {
  Timer tm;
  const double worst = check::iskg_ei_error(100, 32, 109);
  const double s = tm.seconds();
  report(9, "iskg vs noisy ei", worst <= 1e-4 && s < 60.0, fmt("max abs err %.2e <= 1e-4; %.2f s", worst, s));
}

void gradient_check() {
  Timer tm;
  const double worst = check::path_gradient_error(50, 110);
  const double s = tm.seconds();
  report(10, "path gradient check", worst <= 1e-4 && s < 60.0, fmt("max abs err %.2e <= 1e-4; %.2f s", worst, s));
}

}  // namespace

int main() {
  try {
    coverage();
    error_control();
    draws_trend();
    moment_matching();
    estimator_fidelity();
    iskg_closed_form();
    gradient_check();
    bound_domination();
    table_row();
    noise_pathology();
  } catch (const std::exception& e) {
    std::printf("FAIL  aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
