#pragma once

// Run records: one header line with run metadata followed by one JSON object
// per BO step.

#include "prb/common.hpp"
#include "prb/space_model.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace prb::harness {

using json = nlohmann::json;

enum class ModelMode { true_hyper, map };

inline const char* to_string(ModelMode m) { return m == ModelMode::true_hyper ? "true" : "map"; }

inline ModelMode model_mode_from_string(const std::string& s) {
  if (s == "true") return ModelMode::true_hyper;
  if (s == "map") return ModelMode::map;
  throw std::invalid_argument("unknown model mode: " + s);
}

struct StepEntry {
  int t = 0;
  Vec x;
  double y = 0.0;
  GPHyperparams hyper;
  Vec incumbent;
  std::optional<double> acq_value;
};

struct RunRecord {
  std::string run_id;
  Seed seed = 0;
  std::string objective;
  int dim = 1;
  double noise = 0.0;
  Seed objective_seed = 0;
  int budget = 0;
  int initial_design = 5;
  ModelMode model = ModelMode::map;
  Link link = Link::identity;
  bool valid = true;
  std::string error;
  std::vector<StepEntry> steps;

  int length() const { return static_cast<int>(steps.size()); }

  Dataset dataset(int t) const {
    if (t < 0 || t > length()) throw std::out_of_range("RunRecord: step out of range");
    Dataset d(dim);
    for (int i = 0; i < t; ++i) d.add(steps[i].x, steps[i].y);
    return d;
  }

  const StepEntry& step(int t) const {
    if (t < 1 || t > length()) throw std::out_of_range("RunRecord: step out of range");
    return steps[t - 1];
  }

  /// Posterior after t observations using the logged hyperparameters.
  PosteriorGP posterior(int t) const { return PosteriorGP(step(t).hyper, dataset(t)); }
};

namespace detail {

inline json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vec vec_from_json(const json& a) {
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

inline json hyper_to_json(const GPHyperparams& h) {
  return json{{"mean", h.mean_constant},
              {"log_variance", std::log(h.kernel.variance)},
              {"log_noise", detail::finite_or_null(std::log(h.noise_variance))},
              {"lengthscales", detail::vec_to_json(h.kernel.lengthscales)}};
}

inline GPHyperparams hyper_from_json(const json& j, Link link) {
  GPHyperparams h;
  h.mean_constant = j.at("mean").get<double>();
  h.kernel = KernelSpec(std::exp(j.at("log_variance").get<double>()), detail::vec_from_json(j.at("lengthscales")));
  h.noise_variance = j.at("log_noise").is_null() ? 0.0 : std::exp(j.at("log_noise").get<double>());
  h.link = link;
  return h;
}

inline json header_to_json(const RunRecord& r) {
  return json{{"type", "header"},
              {"run_id", r.run_id},
              {"seed", r.seed},
              {"objective", r.objective},
              {"dim", r.dim},
              {"noise", r.noise},
              {"objective_seed", r.objective_seed},
              {"budget", r.budget},
              {"initial_design", r.initial_design},
              {"model", to_string(r.model)},
              {"link", r.link == Link::logit ? "logit" : "identity"},
              {"valid", r.valid},
              {"error", r.error}};
}

inline json step_to_json(const RunRecord& r, const StepEntry& s) {
  return json{{"run_id", r.run_id},
              {"seed", r.seed},
              {"t", s.t},
              {"x", detail::vec_to_json(s.x)},
              {"y", s.y},
              {"hyperparams", hyper_to_json(s.hyper)},
              {"incumbent", detail::vec_to_json(s.incumbent)},
              {"acq_value", s.acq_value ? json(*s.acq_value) : json(nullptr)}};
}

inline void write_record(std::ostream& os, const RunRecord& r) {
  os << header_to_json(r).dump() << '\n';
  for (const StepEntry& s : r.steps) os << step_to_json(r, s).dump() << '\n';
}

inline void write_record(const std::string& path, const RunRecord& r) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  write_record(f, r);
}

/// Parses one record; throws std::runtime_error on corrupt input.
inline RunRecord read_record(std::istream& is) {
  RunRecord r;
  std::string line;
  bool have_header = false;
  int expected_t = 1;
  try {
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("type", "") != "header") throw std::runtime_error("missing header line");
        r.run_id = j.at("run_id").get<std::string>();
        r.seed = j.at("seed").get<Seed>();
        r.objective = j.at("objective").get<std::string>();
        r.dim = j.at("dim").get<int>();
        r.noise = j.at("noise").get<double>();
        r.objective_seed = j.at("objective_seed").get<Seed>();
        r.budget = j.at("budget").get<int>();
        r.initial_design = j.at("initial_design").get<int>();
        r.model = model_mode_from_string(j.at("model").get<std::string>());
        r.link = j.at("link").get<std::string>() == "logit" ? Link::logit : Link::identity;
        r.valid = j.at("valid").get<bool>();
        r.error = j.value("error", "");
        have_header = true;
        continue;
      }
      StepEntry s;
      s.t = j.at("t").get<int>();
      if (s.t != expected_t++) throw std::runtime_error("non-contiguous step index");
      s.x = detail::vec_from_json(j.at("x"));
      if (s.x.size() != r.dim) throw std::runtime_error("point dimension mismatch");
      s.y = j.at("y").get<double>();
      s.hyper = hyper_from_json(j.at("hyperparams"), r.link);
      s.incumbent = detail::vec_from_json(j.at("incumbent"));
      if (!j.at("acq_value").is_null()) s.acq_value = j.at("acq_value").get<double>();
      r.steps.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("corrupt record: ") + e.what());
  }
  if (!have_header) throw std::runtime_error("corrupt record: empty input");
  return r;
}

inline RunRecord read_record(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  return read_record(f);
}

}  // namespace prb::harness
