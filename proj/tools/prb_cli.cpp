// Command-line driver for BO runs, replays and the sequential-test simulators.

#include <prb/harness/experiment.hpp>
#include <prb/harness/simulate.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace prb;
using namespace prb::harness;

namespace {

struct Settings {
  std::string objective = "gp";
  int dim = 2;
  double noise = 1e-6;
  double epsilon = 0.1;
  double delta = 0.05;
  double delta_split = 0.5;
  int budget = 64;
  int initial_design = 5;
  std::string seeds = "0..0";
  Seed seed = 0;
  std::string rules = "prb";
  std::optional<double> cutoff;
  std::string interval = "cp";
  std::string schedule = "constant";
  std::size_t cap = 1000;
  std::string out;
  int features = 2048;
  std::string model = "true";
  int starts = 2;
};

std::vector<Seed> parse_seeds(const std::string& s) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) return {std::stoull(s)};
  const Seed a = std::stoull(s.substr(0, dots)), b = std::stoull(s.substr(dots + 2));
  if (b < a) throw CLI::ValidationError("--seeds", "empty range " + s);
  std::vector<Seed> out;
  for (Seed i = a; i <= b; ++i) out.push_back(i);
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v;
    is >> v;
    if (is.fail()) throw CLI::ValidationError("list", "cannot parse '" + item + "'");
    out.push_back(v);
  }
  return out;
}

PRBParams prb_params(const Settings& st) {
  PRBParams p;
  p.epsilon = st.epsilon;
  p.delta = st.delta;
  p.delta_mod = st.delta_split * st.delta;
  p.delta_est = (1.0 - st.delta_split) * st.delta;
  p.schedule = step_schedule_from_string(st.schedule);
  p.interval = interval_method_from_string(st.interval);
  p.cap = st.cap == 0 ? std::nullopt : std::optional<std::size_t>(st.cap);
  p.num_features = st.features;
  p.optimizer.num_starts = st.starts;
  return p;
}

RuleSpec rule_spec(const Settings& st, const std::string& name) {
  RuleSpec r;
  r.kind = rule_kind_from_string(name);
  r.epsilon = st.epsilon;
  r.cutoff = st.cutoff.value_or(st.epsilon);
  r.delta = st.delta;
  r.budget = st.budget;
  r.prb = prb_params(st);
  r.es.num_features = st.features;
  r.seed = st.seed;
  return r;
}

std::vector<fs::path> record_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const std::string& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".jsonl") out.push_back(e.path());
      }
    } else {
      out.emplace_back(in);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::ostream& output(const Settings& st, const std::string& name, std::ofstream& file) {
  if (st.out.empty()) return std::cout;
  fs::create_directories(st.out);
  file.open(fs::path(st.out) / name);
  if (!file) throw std::runtime_error("cannot write " + (fs::path(st.out) / name).string());
  return file;
}

int cmd_run(const Settings& st) {
  RunConfig cfg;
  cfg.budget = st.budget;
  cfg.initial_design = st.initial_design;
  cfg.model = model_mode_from_string(st.model);
  const fs::path dir = st.out.empty() ? fs::path("records") : fs::path(st.out);
  fs::create_directories(dir);
  int failures = 0;
  for (Seed i : parse_seeds(st.seeds)) {
    const Seed seed = split_seed(st.seed, i);
    const Seed obj_seed = split_seed(seed, 77);
    const Objective obj = make_objective(st.objective, st.dim, st.noise, obj_seed);
    const std::string id = obj.name + "-d" + std::to_string(obj.dim) + "-s" + std::to_string(i);
    const RunRecord rec = run_bo(obj, cfg, seed, id, obj_seed);
    write_record((dir / (id + ".jsonl")).string(), rec);
    const double regret = obj.regret(rec.steps.back().incumbent);
    std::printf("%s steps=%d valid=%d final_regret=%.3g\n", id.c_str(), rec.length(), rec.valid ? 1 : 0, regret);
    failures += rec.valid ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}

int cmd_replay(const Settings& st, const std::vector<std::string>& inputs) {
  const auto files = record_files(inputs);
  if (files.empty()) throw std::runtime_error("replay: no records found");
  std::vector<RunRecord> records;
  for (const fs::path& f : files) records.push_back(read_record(f.string()));
  const RunRecord& first = records.front();
  const Objective obj = objective_for(first);
  std::vector<SummaryRow> rows;
  std::ofstream detail_file;
  std::ostream& detail = st.out.empty() ? std::cerr : output(st, "replays.csv", detail_file);
  detail << "rule,run_id,stop_t,terminated,regret,success\n";
  for (const std::string& name : parse_list<std::string>(st.rules)) {
    const RuleSpec spec = rule_spec(st, name);
    std::vector<ReplayResult> results;
    for (const RunRecord& rec : records) {
      const Objective o = rec.objective == first.objective && rec.objective_seed == first.objective_seed ? obj
                                                                                                         : objective_for(rec);
      results.push_back(replay(rec, spec, &o));
      const ReplayResult& r = results.back();
      detail << r.rule << ',' << r.run_id << ',' << r.stop_t << ',' << r.terminated << ',' << r.regret << ','
             << r.success << '\n';
    }
    rows.push_back(summarize(results, first.objective, first.dim, first.noise, st.epsilon));
  }
  std::ofstream summary_file;
  write_summary_csv(output(st, "summary.csv", summary_file), rows);
  return 0;
}

int cmd_decide(const Settings& st, const std::string& record_path, int step, const std::string& point) {
  const RunRecord rec = read_record(record_path);
  const int t = step > 0 ? step : rec.length();
  const PosteriorGP gp = rec.posterior(t);
  const Vec x = point.empty() ? rec.step(t).incumbent : Eigen::Map<const Vec>(parse_list<double>(point).data(), rec.dim);
  if (x.size() != rec.dim || !in_unit_cube(x)) throw std::invalid_argument("decide: point must lie in the unit cube");
  const PRBParams p = prb_params(st);
  auto fmap = std::make_shared<const FeatureMap>(build_feature_map(gp.kernel(), p.num_features, split_seed(st.seed, 1)));
  RegretEngine engine(gp, fmap, x.transpose(), {p.epsilon, p.optimizer, 32}, split_seed(st.seed, 2));
  std::size_t used = 0;
  auto sampler = [&](std::size_t count) {
    const std::size_t k = engine.successes(0, used, used + count);
    used += count;
    return k;
  };
  const TestSchedule sch = make_schedule(p.delta_est, p.alpha, p.beta, p.n0, p.cap);
  const DecisionOutcome o = decide_threshold(sampler, p.lambda(), sch, p.interval);
  nlohmann::json j{{"run_id", rec.run_id},
                   {"t", t},
                   {"point", std::vector<double>(x.data(), x.data() + x.size())},
                   {"lambda", p.lambda()},
                   {"decision", to_string(o.decision)},
                   {"above", o.above},
                   {"guaranteed", o.guaranteed},
                   {"estimate", o.estimate.mean},
                   {"lo", o.estimate.interval.lo},
                   {"hi", o.estimate.interval.hi},
                   {"draws_used", o.draws_used},
                   {"rounds", o.rounds}};
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_coverage(const Settings& st, const std::string& ps, const std::string& ns, double delta, std::size_t sims) {
  const auto cells = coverage_table(parse_list<double>(ps), parse_list<std::size_t>(ns), delta, sims,
                                    interval_method_from_string(st.interval), st.seed);
  std::ofstream file;
  write_coverage_csv(output(st, "coverage.csv", file), cells);
  return 0;
}

int cmd_bench(const Settings& st) {
  std::printf("objective,dim,stated_optimum,found,gap\n");
  for (const Objective& o : builtin_objectives(st.seed)) {
    auto f = with_numeric_gradient([&o](const Vec& x) { return o.evaluate(x); });
    const MaximizeResult r = maximize(f, o.dim, dense_optimizer(o.dim), split_seed(st.seed, 9));
    std::printf("%s,%d,%.10g,%.10g,%.3g\n", o.name.c_str(), o.dim, o.optimum, r.value, o.optimum - r.value);
  }
  return 0;
}

int cmd_fig3(const Settings& st, const std::string& ps, double lambda, const std::string& deltas, std::size_t reps) {
  const auto rows = fig3_sweep(parse_list<double>(ps), lambda, parse_list<double>(deltas), reps,
                               st.cap == 0 ? std::nullopt : std::optional<std::size_t>(st.cap),
                               interval_method_from_string(st.interval), st.seed);
  std::ofstream file;
  write_fig3_csv(output(st, "fig3.csv", file), rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian optimization with probabilistic regret bounds"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file with option values; flags override it");
  Settings st;
  app.add_option("--objective", st.objective, "branin, hartmann3, hartmann6, rosenbrock4 or gp")->capture_default_str();
  app.add_option("--dim", st.dim, "dimension of gp objectives")->capture_default_str();
  app.add_option("--noise", st.noise, "observation noise variance")->capture_default_str();
  app.add_option("--epsilon", st.epsilon, "regret tolerance")->capture_default_str();
  app.add_option("--delta", st.delta, "risk tolerance")->capture_default_str();
  app.add_option("--delta-split", st.delta_split, "share of delta given to the model term")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--budget", st.budget, "BO budget T, or T_b for the budget rule")->capture_default_str();
  app.add_option("--initial-design", st.initial_design, "random initial queries T0")->capture_default_str();
  app.add_option("--seeds", st.seeds, "run indices a..b")->capture_default_str();
  app.add_option("--seed", st.seed, "root seed")->envname("PRB_SEED")->capture_default_str();
  app.add_option("--rule", st.rules, "comma list of prb, acq, delta_cb, delta_es, oracle, budget")->capture_default_str();
  app.add_option("--cutoff", st.cutoff, "baseline cutoff (default: epsilon)");
  app.add_option("--interval", st.interval, "cp, jeffreys or bernstein")->capture_default_str();
  app.add_option("--schedule", st.schedule, "constant or geometric")->capture_default_str();
  app.add_option("--cap", st.cap, "draw cap per decision, 0 for none")->capture_default_str();
  app.add_option("--out", st.out, "output directory");
  app.add_option("--features", st.features, "random features m")->capture_default_str();
  app.add_option("--model", st.model, "true or map hyperparameters")->capture_default_str();
  app.add_option("--starts", st.starts, "gradient restarts per path maximization")->capture_default_str();

  auto* run = app.add_subcommand("run", "execute and record BO runs");

  auto* rep = app.add_subcommand("replay", "apply stopping rules to recorded runs");
  std::vector<std::string> inputs;
  rep->add_option("records", inputs, "record files or directories")->required();

  auto* dec = app.add_subcommand("decide", "one threshold decision for a recorded model and point");
  std::string record_path, point;
  int step = 0;
  dec->add_option("--record", record_path, "record file")->required()->check(CLI::ExistingFile);
  dec->add_option("--step", step, "step t (default: last)");
  dec->add_option("--point", point, "comma list, default: incumbent");

  auto* cov = app.add_subcommand("coverage", "interval coverage simulation");
  std::string cov_ps = "0.05,0.5,0.95", cov_ns = "10,100";
  double cov_delta = 0.1;
  std::size_t cov_sims = 10000;
  cov->add_option("--ps", cov_ps)->capture_default_str();
  cov->add_option("--ns", cov_ns)->capture_default_str();
  cov->add_option("--level-delta", cov_delta, "interval risk")->capture_default_str();
  cov->add_option("--sims", cov_sims)->capture_default_str();

  auto* bench = app.add_subcommand("bench", "objective sanity and oracle optima");

  auto* fig = app.add_subcommand("sweep-fig3", "median draws of the threshold test");
  std::string fig_ps = "0.955,0.96,0.97,0.98,0.99,0.999", fig_deltas = "0.05,0.01,0.001";
  double fig_lambda = 0.95;
  std::size_t fig_reps = 200;
  fig->add_option("--ps", fig_ps)->capture_default_str();
  fig->add_option("--lambda", fig_lambda)->capture_default_str();
  fig->add_option("--deltas", fig_deltas)->capture_default_str();
  fig->add_option("--reps", fig_reps)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(st);
    if (*rep) return cmd_replay(st, inputs);
    if (*dec) return cmd_decide(st, record_path, step, point);
    if (*cov) return cmd_coverage(st, cov_ps, cov_ns, cov_delta, cov_sims);
    if (*bench) return cmd_bench(st);
    if (*fig) return cmd_fig3(st, fig_ps, fig_lambda, fig_deltas, fig_reps);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
