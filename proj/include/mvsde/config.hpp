// Copyright 2026 The mvsde Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment configuration: JSON in, validated ExperimentConfig out.
//
// Every problem found is reported (not just the first), each prefixed with
// the JSON pointer of the offending field, or with line:column for syntax
// errors.  Unknown keys are rejected so that typos do not silently fall back
// to defaults.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/estimator.hpp"
#include "mvsde/model.hpp"
#include "mvsde/segment_path.hpp"

namespace mvsde {

using Json = nlohmann::ordered_json;

/// xi(s) = value + slope * s on [-r0, 0]; "constant" forces slope = 0.
struct InitialPathConfig {
  std::string kind = "linear";
  double value = 1.0;
  double slope = 1.0;

  bool operator==(const InitialPathConfig&) const = default;
};

struct ModelConfig {
  std::string name = "example";
  std::string kernel = "sincos";
  InitialPathConfig xi;

  bool operator==(const ModelConfig&) const = default;
};

/// Time horizon, memory length and (for single runs) the step.  Exactly one
/// of `delta` and `n` may be given; sweeps derive n from epsilon instead.
struct GridConfig {
  double horizon = 1.0;
  double memory = 0.25;
  std::optional<double> delta;
  std::optional<std::size_t> n;

  bool operator==(const GridConfig&) const = default;
};

enum class PilotKind { center, truth, fixed };

/// Parameter the estimation-time ensemble is simulated at.
struct PilotConfig {
  PilotKind kind = PilotKind::center;
  std::vector<double> value;  // kind == fixed

  bool operator==(const PilotConfig&) const = default;
};

struct RateConfig {
  std::vector<double> epsilon_list{0.2, 0.1, 0.05, 0.025};
  double delta_epsilon = 0.01;
  std::size_t delta_levels = 3;
  /// Coarsest step of the delta sweep; default r0 (M = 1).
  std::optional<double> delta_start;

  bool operator==(const RateConfig&) const = default;
};

struct ExperimentConfig {
  ModelConfig model;
  std::vector<double> theta0{1.0, 0.5};
  std::vector<double> theta_lower{0.0, 0.0};
  std::vector<double> theta_upper{2.0, 2.0};
  GridConfig grid;
  std::size_t fine_factor = 8;
  std::vector<double> epsilon_list{0.2, 0.1, 0.05, 0.02};
  /// Empty: one cell per epsilon with n = ceil(n_scale / epsilon).
  /// Otherwise the sweep is epsilon_list x n_list.
  std::vector<std::size_t> n_list;
  double n_scale = 10.0;
  std::size_t n_particles = 256;
  std::size_t n_replications = 200;
  MeasureMode measure_mode = MeasureMode::ensemble;
  PilotConfig pilot;
  std::size_t refine_passes = 1;
  std::uint64_t rng_seed = 20260101;
  std::string output_dir = "out";
  std::size_t limit_samples = 10000;
  RateConfig rate;

  bool operator==(const ExperimentConfig&) const = default;
};

// ---------------------------------------------------------------------------

inline std::string_view to_string(PilotKind k) {
  switch (k) {
    case PilotKind::center: return "center";
    case PilotKind::truth: return "truth";
    case PilotKind::fixed: return "fixed";
  }
  return "?";
}

inline Json to_json(const ExperimentConfig& c) {
  Json xi{{"kind", c.model.xi.kind}, {"value", c.model.xi.value}};
  if (c.model.xi.kind == "linear") xi["slope"] = c.model.xi.slope;
  Json grid{{"T", c.grid.horizon}, {"memory", c.grid.memory}};
  if (c.grid.delta) grid["delta"] = *c.grid.delta;
  if (c.grid.n) grid["n"] = *c.grid.n;
  Json pilot = c.pilot.kind == PilotKind::fixed ? Json(c.pilot.value)
                                                : Json(std::string(to_string(c.pilot.kind)));
  Json rate{{"epsilon_list", c.rate.epsilon_list},
            {"delta_epsilon", c.rate.delta_epsilon},
            {"delta_levels", c.rate.delta_levels}};
  if (c.rate.delta_start) rate["delta_start"] = *c.rate.delta_start;
  return Json{
      {"model", {{"name", c.model.name}, {"kernel", c.model.kernel}, {"xi", xi}}},
      {"theta0", c.theta0},
      {"theta_box", {{"lower", c.theta_lower}, {"upper", c.theta_upper}}},
      {"grid", grid},
      {"fine_factor", c.fine_factor},
      {"epsilon_list", c.epsilon_list},
      {"n_list", c.n_list},
      {"n_scale", c.n_scale},
      {"n_particles", c.n_particles},
      {"n_replications", c.n_replications},
      {"measure_mode", std::string(to_string(c.measure_mode))},
      {"pilot", pilot},
      {"refine_passes", c.refine_passes},
      {"rng_seed", c.rng_seed},
      {"output_dir", c.output_dir},
      {"limit_samples", c.limit_samples},
      {"rate", rate},
  };
}

inline std::string serialize(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Grid arithmetic shared by validation and the experiments.

namespace detail {

inline bool near_integer(double x, double tol = 1e-9) {
  return std::abs(x - std::round(x)) <= tol * std::max(1.0, std::abs(x));
}

}  // namespace detail

/// Grid with n steps over [0, T] and memory r0, or nullopt when r0 n / T is
/// not a whole number of steps.
inline std::optional<Grid> grid_for_steps(const GridConfig& g, std::size_t n) {
  if (n < 1 || !(g.horizon > 0.0) || !(g.memory > 0.0)) return std::nullopt;
  const double m = g.memory * static_cast<double>(n) / g.horizon;
  if (!detail::near_integer(m) || std::round(m) < 1.0) return std::nullopt;
  return Grid(g.horizon / static_cast<double>(n), n, static_cast<std::size_t>(std::round(m)));
}

/// Smallest n' >= n for which r0 n' / T is a whole number of steps.
inline std::size_t round_up_steps(const GridConfig& g, std::size_t n) {
  for (std::size_t k = std::max<std::size_t>(n, 1); k < n + 100000; ++k) {
    if (grid_for_steps(g, k)) return k;
  }
  throw std::invalid_argument("no admissible step count near " + std::to_string(n) +
                              " for T and memory");
}

/// n = ceil(C / epsilon), rounded up to an admissible grid.
inline std::size_t matched_steps(const GridConfig& g, double n_scale, double epsilon) {
  const double raw = n_scale / epsilon;
  const auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9 * raw));
  return round_up_steps(g, n);
}

/// The single-run grid (simulate / estimate / rate check).
inline Grid base_grid(const ExperimentConfig& c) {
  std::size_t n = 0;
  if (c.grid.n) {
    n = *c.grid.n;
  } else if (c.grid.delta) {
    n = static_cast<std::size_t>(std::llround(c.grid.horizon / *c.grid.delta));
  } else {
    n = static_cast<std::size_t>(std::llround(c.grid.horizon / 0.01));
  }
  auto g = grid_for_steps(c.grid, n);
  if (!g) throw std::invalid_argument("grid: memory is not a whole number of steps");
  return *g;
}

/// Coarsest grid of the rate check's delta sweep.
inline Grid delta_sweep_base(const ExperimentConfig& c) {
  const double d = c.rate.delta_start.value_or(c.grid.memory);
  auto g = grid_for_steps(c.grid, static_cast<std::size_t>(std::llround(c.grid.horizon / d)));
  if (!g) throw std::invalid_argument("rate: delta_start does not give an admissible grid");
  return *g;
}

inline InitialPathFn initial_path(const InitialPathConfig& xi) {
  const double a = xi.value;
  const double s = xi.kind == "constant" ? 0.0 : xi.slope;
  return [a, s](double t) { return Vector::Constant(1, a + s * t); };
}

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline ModelSpec build_model(const ExperimentConfig& c) {
  if (c.model.name != "example") {
    throw ConfigError({"/model/name: unknown model '" + c.model.name + "'"});
  }
  return build_example_model(named_kernel(c.model.kernel),
                             ThetaBox(to_vector(c.theta_lower), to_vector(c.theta_upper)),
                             initial_path(c.model.xi));
}

/// The pilot for EstimatorOptions; nullopt means the centre of Theta.
inline std::optional<ThetaPoint> resolve_pilot(const ExperimentConfig& c) {
  switch (c.pilot.kind) {
    case PilotKind::center: return std::nullopt;
    case PilotKind::truth: return to_vector(c.theta0);
    case PilotKind::fixed: return to_vector(c.pilot.value);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace detail {

class ConfigReader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& what) {
    errors.push_back((path.empty() ? std::string("/") : path) + ": " + what);
  }

  /// Object at `path`, or nullptr after recording an error.
  const Json* object(const Json& j, const std::string& path) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return nullptr;
    }
    return &j;
  }

  void reject_unknown(const Json& obj, const std::string& path,
                      std::initializer_list<std::string_view> known) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
        fail(path + "/" + it.key(), "unknown key");
      }
    }
  }

  void number(const Json& obj, const std::string& path, const char* key, double& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_number()) return fail(path + "/" + key, "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) fail(path + "/" + key, "must be finite");
  }

  void count(const Json& obj, const std::string& path, const char* key, std::size_t& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (v.is_number_integer() && v.get<long long>() < 0) {
      return fail(path + "/" + key, "must be >= 0");
    }
    if (!v.is_number_unsigned()) return fail(path + "/" + key, "expected a non-negative integer");
    out = v.get<std::size_t>();
  }

  void text(const Json& obj, const std::string& path, const char* key, std::string& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    if (!v.is_string()) return fail(path + "/" + key, "expected a string");
    out = v.get<std::string>();
  }

  void numbers(const Json& obj, const std::string& path, const char* key,
               std::vector<double>& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    const std::string p = path + "/" + key;
    if (!v.is_array()) return fail(p, "expected an array of numbers");
    std::vector<double> tmp;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        fail(p + "/" + std::to_string(i), "expected a number");
        continue;
      }
      tmp.push_back(v[i].get<double>());
    }
    if (tmp.size() == v.size()) out = std::move(tmp);
  }

  void counts(const Json& obj, const std::string& path, const char* key,
              std::vector<std::size_t>& out) {
    if (!obj.contains(key)) return;
    const Json& v = obj.at(key);
    const std::string p = path + "/" + key;
    if (!v.is_array()) return fail(p, "expected an array of integers");
    std::vector<std::size_t> tmp;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_unsigned()) {
        fail(p + "/" + std::to_string(i), "expected a non-negative integer");
        continue;
      }
      tmp.push_back(v[i].get<std::size_t>());
    }
    if (tmp.size() == v.size()) out = std::move(tmp);
  }
};

}  // namespace detail

/// Semantic checks on an already-typed config; returns one message per
/// violated constraint.
inline std::vector<std::string> config_problems(const ExperimentConfig& c) {
  std::vector<std::string> e;
  auto eps_ok = [](double x) { return x > 0.0 && x < 1.0; };

  if (c.model.name == "custom") {
    e.push_back("/model/name: 'custom' models are available through the library API only");
  } else if (c.model.name != "example") {
    e.push_back("/model/name: unknown model '" + c.model.name + "' (known: example)");
  }
  static const std::set<std::string> kernels{"sincos", "zero", "state"};
  if (!kernels.count(c.model.kernel)) {
    e.push_back("/model/kernel: unknown kernel '" + c.model.kernel +
                "' (known: sincos, zero, state)");
  }
  if (c.model.xi.kind != "constant" && c.model.xi.kind != "linear") {
    e.push_back("/model/xi/kind: must be 'constant' or 'linear'");
  }

  const std::size_t p = 2;  // the example model's parameter dimension
  bool box_ok = true;
  if (c.theta_lower.size() != p || c.theta_upper.size() != p) {
    e.push_back("/theta_box: lower and upper must have " + std::to_string(p) + " components");
    box_ok = false;
  } else {
    for (std::size_t j = 0; j < p; ++j) {
      if (!(c.theta_lower[j] < c.theta_upper[j])) {
        e.push_back("/theta_box: lower[" + std::to_string(j) + "] must be < upper[" +
                    std::to_string(j) + "]");
        box_ok = false;
      }
    }
  }
  if (c.theta0.size() != p) {
    e.push_back("/theta0: must have " + std::to_string(p) + " components");
  } else if (box_ok) {
    for (std::size_t j = 0; j < p; ++j) {
      if (!(c.theta0[j] > c.theta_lower[j] && c.theta0[j] < c.theta_upper[j])) {
        e.push_back("/theta0/" + std::to_string(j) +
                    ": must lie strictly inside theta_box (Theta is open)");
      }
    }
  }
  if (c.pilot.kind == PilotKind::fixed && c.pilot.value.size() != p) {
    e.push_back("/pilot: must have " + std::to_string(p) + " components");
  }

  if (!(c.grid.horizon > 0.0)) e.push_back("/grid/T: must be > 0");
  if (!(c.grid.memory > 0.0)) e.push_back("/grid/memory: must be > 0");
  if (c.grid.delta && c.grid.n) e.push_back("/grid: give at most one of delta and n");
  if (c.grid.horizon > 0.0 && c.grid.memory > 0.0) {
    std::optional<double> steps;
    if (c.grid.n) {
      if (*c.grid.n < 1) e.push_back("/grid/n: n must be >= 1");
      else steps = static_cast<double>(*c.grid.n);
    } else if (c.grid.delta) {
      if (!(*c.grid.delta > 0.0)) e.push_back("/grid/delta: must be > 0");
      else steps = c.grid.horizon / *c.grid.delta;
    } else {
      steps = c.grid.horizon / 0.01;
    }
    if (steps) {
      const double m = c.grid.memory * *steps / c.grid.horizon;
      if (!detail::near_integer(*steps) || std::round(*steps) < 1.0) {
        e.push_back("/grid/delta: T / delta must be a whole number n >= 1");
      } else if (!detail::near_integer(m) || std::round(m) < 1.0) {
        e.push_back("/grid: memory / delta must be a whole number M >= 1");
      }
    }
  }
  for (std::size_t i = 0; i < c.n_list.size(); ++i) {
    const std::string path = "/n_list/" + std::to_string(i);
    if (c.n_list[i] < 1) {
      e.push_back(path + ": n must be >= 1");
    } else if (c.grid.horizon > 0.0 && c.grid.memory > 0.0 && !grid_for_steps(c.grid, c.n_list[i])) {
      e.push_back(path + ": memory * n / T must be a whole number M >= 1");
    }
  }
  if (!(c.n_scale > 0.0)) e.push_back("/n_scale: must be > 0");

  if (c.epsilon_list.empty()) e.push_back("/epsilon_list: must not be empty");
  for (std::size_t i = 0; i < c.epsilon_list.size(); ++i) {
    if (!eps_ok(c.epsilon_list[i])) {
      e.push_back("/epsilon_list/" + std::to_string(i) + ": epsilon must lie in (0,1)");
    }
  }
  if (c.rate.epsilon_list.size() < 2) e.push_back("/rate/epsilon_list: need at least 2 values");
  for (std::size_t i = 0; i < c.rate.epsilon_list.size(); ++i) {
    if (!eps_ok(c.rate.epsilon_list[i])) {
      e.push_back("/rate/epsilon_list/" + std::to_string(i) + ": epsilon must lie in (0,1)");
    }
  }
  if (!eps_ok(c.rate.delta_epsilon)) e.push_back("/rate/delta_epsilon: epsilon must lie in (0,1)");
  if (c.rate.delta_levels < 2) e.push_back("/rate/delta_levels: must be >= 2");
  if (c.rate.delta_start && c.grid.horizon > 0.0 && c.grid.memory > 0.0) {
    const double d = *c.rate.delta_start;
    if (!(d > 0.0) || !detail::near_integer(c.grid.horizon / d) ||
        !grid_for_steps(c.grid, static_cast<std::size_t>(std::llround(c.grid.horizon / d)))) {
      e.push_back("/rate/delta_start: T / delta and memory / delta must be whole numbers >= 1");
    }
  }

  if (c.fine_factor < 1) e.push_back("/fine_factor: must be >= 1");
  if (c.n_particles < 1) e.push_back("/n_particles: must be >= 1");
  if (c.n_replications < 1) e.push_back("/n_replications: must be >= 1");
  if (c.limit_samples < 1) e.push_back("/limit_samples: must be >= 1");
  if (c.output_dir.empty()) e.push_back("/output_dir: must not be empty");
  return e;
}

/// Parse and validate JSON config text; throws ConfigError listing every
/// problem found.
inline ExperimentConfig validate_config(std::string_view raw) {
  Json root;
  try {
    root = Json::parse(raw.begin(), raw.end());
  } catch (const Json::parse_error& ex) {
    throw ConfigError({std::string("syntax error: ") + ex.what()});
  }

  ExperimentConfig c;
  detail::ConfigReader r;
  if (!r.object(root, "")) throw ConfigError(r.errors);
  r.reject_unknown(root, "",
                   {"model", "theta0", "theta_box", "grid", "fine_factor", "epsilon_list",
                    "n_list", "n_scale", "n_particles", "n_replications", "measure_mode", "pilot",
                    "refine_passes", "rng_seed", "output_dir", "limit_samples", "rate"});

  if (root.contains("model") && r.object(root["model"], "/model")) {
    const Json& m = root["model"];
    r.reject_unknown(m, "/model", {"name", "kernel", "xi"});
    r.text(m, "/model", "name", c.model.name);
    r.text(m, "/model", "kernel", c.model.kernel);
    if (m.contains("xi") && r.object(m["xi"], "/model/xi")) {
      const Json& xi = m["xi"];
      r.reject_unknown(xi, "/model/xi", {"kind", "value", "slope"});
      r.text(xi, "/model/xi", "kind", c.model.xi.kind);
      r.number(xi, "/model/xi", "value", c.model.xi.value);
      r.number(xi, "/model/xi", "slope", c.model.xi.slope);
      if (c.model.xi.kind == "constant") {
        if (xi.contains("slope")) r.fail("/model/xi/slope", "not allowed for a constant xi");
        c.model.xi.slope = 0.0;
      }
    }
  }
  r.numbers(root, "", "theta0", c.theta0);
  if (root.contains("theta_box") && r.object(root["theta_box"], "/theta_box")) {
    const Json& b = root["theta_box"];
    r.reject_unknown(b, "/theta_box", {"lower", "upper"});
    r.numbers(b, "/theta_box", "lower", c.theta_lower);
    r.numbers(b, "/theta_box", "upper", c.theta_upper);
  }
  if (root.contains("grid") && r.object(root["grid"], "/grid")) {
    const Json& g = root["grid"];
    r.reject_unknown(g, "/grid", {"T", "memory", "delta", "n"});
    r.number(g, "/grid", "T", c.grid.horizon);
    r.number(g, "/grid", "memory", c.grid.memory);
    if (g.contains("delta")) {
      double d = 0.0;
      r.number(g, "/grid", "delta", d);
      c.grid.delta = d;
    }
    if (g.contains("n")) {
      std::size_t n = 0;
      r.count(g, "/grid", "n", n);
      c.grid.n = n;
    }
  }
  r.count(root, "", "fine_factor", c.fine_factor);
  r.numbers(root, "", "epsilon_list", c.epsilon_list);
  r.counts(root, "", "n_list", c.n_list);
  r.number(root, "", "n_scale", c.n_scale);
  r.count(root, "", "n_particles", c.n_particles);
  r.count(root, "", "n_replications", c.n_replications);
  if (root.contains("measure_mode")) {
    std::string mode;
    r.text(root, "", "measure_mode", mode);
    if (mode == "ensemble") c.measure_mode = MeasureMode::ensemble;
    else if (mode == "dirac") c.measure_mode = MeasureMode::dirac;
    else if (root["measure_mode"].is_string()) r.fail("/measure_mode", "must be 'ensemble' or 'dirac'");
  }
  if (root.contains("pilot")) {
    const Json& pj = root["pilot"];
    if (pj == "center") {
      c.pilot = {PilotKind::center, {}};
    } else if (pj == "truth") {
      c.pilot = {PilotKind::truth, {}};
    } else if (pj.is_array()) {
      c.pilot.kind = PilotKind::fixed;
      r.numbers(root, "", "pilot", c.pilot.value);
    } else {
      r.fail("/pilot", "must be 'center', 'truth' or an array of numbers");
    }
  }
  r.count(root, "", "refine_passes", c.refine_passes);
  if (root.contains("rng_seed")) {
    if (root["rng_seed"].is_number_unsigned()) c.rng_seed = root["rng_seed"].get<std::uint64_t>();
    else r.fail("/rng_seed", "expected an unsigned 64-bit integer");
  }
  r.text(root, "", "output_dir", c.output_dir);
  r.count(root, "", "limit_samples", c.limit_samples);
  if (root.contains("rate") && r.object(root["rate"], "/rate")) {
    const Json& rt = root["rate"];
    r.reject_unknown(rt, "/rate", {"epsilon_list", "delta_epsilon", "delta_levels", "delta_start"});
    r.numbers(rt, "/rate", "epsilon_list", c.rate.epsilon_list);
    r.number(rt, "/rate", "delta_epsilon", c.rate.delta_epsilon);
    r.count(rt, "/rate", "delta_levels", c.rate.delta_levels);
    if (rt.contains("delta_start")) {
      double d = 0.0;
      r.number(rt, "/rate", "delta_start", d);
      c.rate.delta_start = d;
    }
  }

  auto problems = config_problems(c);
  r.errors.insert(r.errors.end(), problems.begin(), problems.end());
  if (!r.errors.empty()) throw ConfigError(std::move(r.errors));
  return c;
}

}  // namespace mvsde
