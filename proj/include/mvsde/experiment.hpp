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

// Monte Carlo experiments: consistency sweep, limit-law comparison and the
// small-noise / step-size rate checks.
//
// Every replication draws from its own seed, derive_seed(master, path), and
// writes into a pre-sized slot, so outputs do not depend on the thread count
// or on which other cells are in the sweep.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "mvsde/asymptotics.hpp"
#include "mvsde/config.hpp"
#include "mvsde/csv.hpp"
#include "mvsde/estimator.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/simulator.hpp"
#include "mvsde/stats.hpp"

namespace mvsde {

/// Runs fn(0..count-1) on up to `threads` workers.  If any call throws, the
/// exception of the lowest failing index is rethrown after all workers stop.
template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t k = std::max<std::size_t>(1, std::min(threads, count));
  if (k == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(k);
    for (std::size_t t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct RunOptions {
  std::size_t threads = 1;
};

// ---------------------------------------------------------------------------
// Sweep cells and single replications.

struct SweepCell {
  std::size_t eps_index = 0;
  std::size_t n_index = 0;
  double epsilon = 0.0;
  Grid grid;
};

inline std::vector<SweepCell> sweep_cells(const ExperimentConfig& cfg) {
  std::vector<SweepCell> cells;
  for (std::size_t i = 0; i < cfg.epsilon_list.size(); ++i) {
    const double eps = cfg.epsilon_list[i];
    if (cfg.n_list.empty()) {
      const std::size_t n = matched_steps(cfg.grid, cfg.n_scale, eps);
      cells.push_back({i, 0, eps, *grid_for_steps(cfg.grid, n)});
      continue;
    }
    for (std::size_t j = 0; j < cfg.n_list.size(); ++j) {
      auto g = grid_for_steps(cfg.grid, cfg.n_list[j]);
      if (!g) throw std::invalid_argument("n_list entry does not give a whole memory window");
      cells.push_back({i, j, eps, *g});
    }
  }
  return cells;
}

inline std::uint64_t cell_seed(std::uint64_t master, const SweepCell& cell,
                               std::size_t replication) {
  return derive_seed(master, {cell.eps_index, cell.n_index, replication});
}

/// Simulates one observation at theta0 and estimates theta from it.
inline EstimationResult run_replication(const ModelSpec& spec, const ExperimentConfig& cfg,
                                        const SweepCell& cell, std::size_t replication) {
  const std::uint64_t seed = cell_seed(cfg.rng_seed, cell, replication);
  SimConfig sim;
  sim.epsilon = cell.epsilon;
  sim.grid = cell.grid;
  sim.n_particles = cfg.n_particles;
  sim.fine_factor = cfg.fine_factor;
  sim.rng_seed = derive_seed(seed, {0});
  const TrajectoryRecord obs = simulate_observation(spec, sim, to_vector(cfg.theta0));

  EstimatorOptions opt;
  opt.measure_mode = cfg.measure_mode;
  opt.pilot = resolve_pilot(cfg);
  opt.refine_passes = cfg.refine_passes;
  opt.n_particles = cfg.n_particles;
  opt.seed = derive_seed(seed, {1});
  return estimate_lse(spec, obs, cell.epsilon, opt);
}

// ---------------------------------------------------------------------------
// Consistency.

struct ConsistencyRecord {
  double epsilon = 0.0;
  std::size_t n = 0;
  std::size_t replication = 0;
  Vector theta_hat;
  double abs_error = 0.0;  // |theta_hat - theta0|_inf
  EstimationMethod method = EstimationMethod::closed_form;
  bool converged = false;
};

struct CellStatistics {
  double epsilon = 0.0;
  std::size_t n = 0;
  std::size_t replications = 0;
  Vector bias;
  Vector rmse;
  double median_abs_error = 0.0;
  std::size_t not_converged = 0;
};

struct ConsistencyReport {
  std::vector<ConsistencyRecord> records;  // cell-major, replication-minor
  std::vector<CellStatistics> cells;
  std::size_t p = 0;

  bool all_converged() const {
    return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.converged; });
  }
};

inline CellStatistics summarize_cell(const std::vector<ConsistencyRecord>& recs,
                                     const Vector& theta0) {
  CellStatistics s;
  s.epsilon = recs.front().epsilon;
  s.n = recs.front().n;
  s.replications = recs.size();
  s.bias = Vector::Zero(theta0.size());
  s.rmse = Vector::Zero(theta0.size());
  std::vector<double> errs;
  for (const auto& r : recs) {
    const Vector e = r.theta_hat - theta0;
    s.bias += e;
    s.rmse += e.cwiseProduct(e);
    errs.push_back(r.abs_error);
    if (!r.converged) ++s.not_converged;
  }
  s.bias /= static_cast<double>(recs.size());
  s.rmse = (s.rmse / static_cast<double>(recs.size())).cwiseSqrt();
  s.median_abs_error = stats::median(errs);
  return s;
}

inline ConsistencyReport run_consistency(const ExperimentConfig& cfg, const RunOptions& run = {}) {
  const ModelSpec spec = build_model(cfg);
  const Vector theta0 = to_vector(cfg.theta0);
  const auto cells = sweep_cells(cfg);
  const std::size_t reps = cfg.n_replications;

  ConsistencyReport rep;
  rep.p = spec.dims.p;
  rep.records.resize(cells.size() * reps);
  parallel_for(rep.records.size(), run.threads, [&](std::size_t idx) {
    const SweepCell& cell = cells[idx / reps];
    const std::size_t r = idx % reps;
    const EstimationResult est = run_replication(spec, cfg, cell, r);
    ConsistencyRecord& out = rep.records[idx];
    out.epsilon = cell.epsilon;
    out.n = cell.grid.n_steps();
    out.replication = r;
    out.theta_hat = est.theta_hat;
    out.abs_error = (est.theta_hat - theta0).cwiseAbs().maxCoeff();
    out.method = est.method;
    out.converged = est.converged;
  });
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<ConsistencyRecord> slice(rep.records.begin() + static_cast<std::ptrdiff_t>(c * reps),
                                         rep.records.begin() + static_cast<std::ptrdiff_t>((c + 1) * reps));
    rep.cells.push_back(summarize_cell(slice, theta0));
  }
  return rep;
}

inline csv::Table consistency_table(const ConsistencyReport& rep) {
  csv::Table t;
  t.header = {"epsilon", "n", "replication"};
  for (std::size_t j = 0; j < rep.p; ++j) t.header.push_back("theta_hat_" + std::to_string(j + 1));
  t.header.insert(t.header.end(), {"abs_error", "method", "converged"});
  for (const auto& r : rep.records) {
    std::vector<std::string> row{csv::format_double(r.epsilon), std::to_string(r.n),
                                 std::to_string(r.replication)};
    for (Eigen::Index j = 0; j < r.theta_hat.size(); ++j) {
      row.push_back(csv::format_double(r.theta_hat[j]));
    }
    row.push_back(csv::format_double(r.abs_error));
    row.emplace_back(to_string(r.method));
    row.emplace_back(r.converged ? "true" : "false");
    t.add_row(std::move(row));
  }
  return t;
}

inline csv::Table cell_summary_table(const ConsistencyReport& rep) {
  csv::Table t;
  t.header = {"epsilon", "n", "replications"};
  for (std::size_t j = 0; j < rep.p; ++j) t.header.push_back("bias_" + std::to_string(j + 1));
  for (std::size_t j = 0; j < rep.p; ++j) t.header.push_back("rmse_" + std::to_string(j + 1));
  t.header.insert(t.header.end(), {"median_abs_error", "not_converged"});
  for (const auto& c : rep.cells) {
    std::vector<std::string> row{csv::format_double(c.epsilon), std::to_string(c.n),
                                 std::to_string(c.replications)};
    for (Eigen::Index j = 0; j < c.bias.size(); ++j) row.push_back(csv::format_double(c.bias[j]));
    for (Eigen::Index j = 0; j < c.rmse.size(); ++j) row.push_back(csv::format_double(c.rmse[j]));
    row.push_back(csv::format_double(c.median_abs_error));
    row.push_back(std::to_string(c.not_converged));
    t.add_row(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Limit law.

struct AsymptoticsReport {
  double epsilon = 0.0;
  std::size_t n = 0;
  std::vector<Vector> scaled_errors;  // (theta_hat - theta0) / eps
  std::vector<bool> converged;
  std::vector<Vector> limit_samples;
  Matrix information;
  Matrix noise_covariance;
  Matrix limit_covariance;
  Matrix empirical_covariance;
  std::vector<double> ks;
  double ks_critical = 0.0;  // 1% level

  /// |empirical variance / limit variance - 1| per coordinate.
  Vector variance_relative_error() const {
    return (empirical_covariance.diagonal().array() / limit_covariance.diagonal().array() - 1.0)
        .abs()
        .matrix();
  }
};

/// The comparison runs at the smallest epsilon of the sweep (and the largest
/// n when n_list is given); its replications coincide with that consistency
/// cell's.
inline AsymptoticsReport run_asymptotics(const ExperimentConfig& cfg, const RunOptions& run = {}) {
  const ModelSpec spec = build_model(cfg);
  if (spec.dims.p > 3) throw std::invalid_argument("run_asymptotics: needs p <= 3");
  const Vector theta0 = to_vector(cfg.theta0);
  const auto cells = sweep_cells(cfg);
  const SweepCell cell = *std::min_element(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    if (a.epsilon != b.epsilon) return a.epsilon < b.epsilon;
    return a.grid.n_steps() > b.grid.n_steps();
  });

  AsymptoticsReport rep;
  rep.epsilon = cell.epsilon;
  rep.n = cell.grid.n_steps();

  const LimitPath path(spec, cell.grid, theta0, cfg.fine_factor);
  rep.information = information_matrix(spec, path, theta0);
  rep.noise_covariance = noise_covariance(spec, path, theta0);
  const Matrix inv = checked_inverse_information(rep.information);
  rep.limit_covariance = inv * rep.noise_covariance * inv;

  const std::size_t reps = cfg.n_replications;
  rep.scaled_errors.resize(reps);
  std::vector<char> conv(reps, 0);
  parallel_for(reps, run.threads, [&](std::size_t r) {
    const EstimationResult est = run_replication(spec, cfg, cell, r);
    rep.scaled_errors[r] = (est.theta_hat - theta0) / cell.epsilon;
    conv[r] = est.converged ? 1 : 0;
  });
  rep.converged.assign(conv.begin(), conv.end());

  // Limit draws in fixed-size blocks so the sample does not depend on threads.
  const std::size_t total = cfg.limit_samples;
  const std::size_t block = 250;
  const std::size_t blocks = (total + block - 1) / block;
  const std::uint64_t limit_seed = derive_seed(cfg.rng_seed, {0x6C696D6974ull});
  rep.limit_samples.resize(total);
  parallel_for(blocks, run.threads, [&](std::size_t b) {
    const std::size_t lo = b * block;
    const std::size_t count = std::min(block, total - lo);
    const auto draws = sample_limit_law(spec, path, theta0, count, derive_seed(limit_seed, {b}));
    std::copy(draws.begin(), draws.end(), rep.limit_samples.begin() + static_cast<std::ptrdiff_t>(lo));
  });

  rep.empirical_covariance = stats::covariance(rep.scaled_errors);
  rep.ks_critical = stats::ks_critical_value(0.01, reps, total);
  for (std::size_t j = 0; j < spec.dims.p; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    std::vector<double> a, b;
    for (const auto& z : rep.scaled_errors) a.push_back(z[jj]);
    for (const auto& z : rep.limit_samples) b.push_back(z[jj]);
    rep.ks.push_back(stats::ks_statistic(a, b));
  }
  return rep;
}

inline csv::Table scaled_error_table(const AsymptoticsReport& rep) {
  csv::Table t;
  t.header = {"epsilon", "n", "replication"};
  const auto p = rep.limit_covariance.rows();
  for (Eigen::Index j = 0; j < p; ++j) t.header.push_back("z_" + std::to_string(j + 1));
  t.header.push_back("converged");
  for (std::size_t r = 0; r < rep.scaled_errors.size(); ++r) {
    std::vector<std::string> row{csv::format_double(rep.epsilon), std::to_string(rep.n),
                                 std::to_string(r)};
    for (Eigen::Index j = 0; j < p; ++j) row.push_back(csv::format_double(rep.scaled_errors[r][j]));
    row.emplace_back(rep.converged[r] ? "true" : "false");
    t.add_row(std::move(row));
  }
  return t;
}

inline csv::Table limit_sample_table(const AsymptoticsReport& rep) {
  csv::Table t;
  t.header = {"sample"};
  const auto p = rep.limit_covariance.rows();
  for (Eigen::Index j = 0; j < p; ++j) t.header.push_back("z_" + std::to_string(j + 1));
  for (std::size_t i = 0; i < rep.limit_samples.size(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (Eigen::Index j = 0; j < p; ++j) row.push_back(csv::format_double(rep.limit_samples[i][j]));
    t.add_row(std::move(row));
  }
  return t;
}

inline csv::Table asymptotics_stats_table(const AsymptoticsReport& rep) {
  csv::Table t;
  t.header = {"coordinate",        "ks_statistic",   "ks_critical_1pct",
              "empirical_variance", "limit_variance", "variance_relative_error"};
  const Vector rel = rep.variance_relative_error();
  for (std::size_t j = 0; j < rep.ks.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    t.add_row({std::to_string(j + 1), csv::format_double(rep.ks[j]),
               csv::format_double(rep.ks_critical),
               csv::format_double(rep.empirical_covariance(jj, jj)),
               csv::format_double(rep.limit_covariance(jj, jj)), csv::format_double(rel[jj])});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Rate checks.

struct RatePoint {
  double x = 0.0;  // epsilon or delta
  std::size_t n = 0;
  double mean_sq_error = 0.0;
  double std_error = 0.0;
};

struct RateReport {
  std::vector<RatePoint> epsilon_sweep;
  stats::LineFit epsilon_fit;  // log E|X^eps - X0|^2 against log eps
  double delta_sweep_epsilon = 0.0;
  std::vector<RatePoint> delta_sweep;  // delta halves from row to row
  stats::LineFit delta_fit;

  bool delta_nonincreasing() const {
    for (std::size_t i = 1; i < delta_sweep.size(); ++i) {
      if (delta_sweep[i].mean_sq_error > delta_sweep[i - 1].mean_sq_error) return false;
    }
    return true;
  }
};

namespace detail {

inline RatePoint mean_point(double x, std::size_t n, const std::vector<double>& v) {
  RatePoint pt{x, n, stats::mean(v), 0.0};
  if (v.size() > 1) pt.std_error = std::sqrt(stats::variance(v) / static_cast<double>(v.size()));
  return pt;
}

/// sup over the knots of `reference` of |coarse(s) - reference(s)|, where
/// `coarse` is read by linear interpolation.  Both windows cover [t - r0, t].
inline double interpolated_sup_distance(const Segment& coarse, const Segment& reference) {
  const double ratio = static_cast<double>(coarse.memory_steps()) /
                       static_cast<double>(reference.memory_steps());
  double best = 0.0;
  for (std::size_t j = 0; j < reference.size(); ++j) {
    const Vector c = coarse.interpolate(ratio * static_cast<double>(j));
    best = std::max(best, (c - reference.point(j)).norm());
  }
  return best;
}

}  // namespace detail

/// epsilon sweep: particle 0 of the interacting system on the fine grid
/// delta/F against the limit ODE on the same grid, E sup_{[T-r0,T]}|.|^2.
/// Replication r uses the same Brownian path at every epsilon.
///
/// delta sweep: at fixed epsilon the scheme runs on delta_start,
/// delta_start/2, ...  Every level sums its increments from one finest-level
/// Brownian path, and the interpolated segment at T is compared with the ODE
/// on the finest grid refined by F.
inline RateReport run_rate_check(const ExperimentConfig& cfg, const RunOptions& run = {}) {
  const ModelSpec spec = build_model(cfg);
  const Vector theta0 = to_vector(cfg.theta0);
  const Grid grid = base_grid(cfg);
  const std::size_t reps = cfg.n_replications;
  constexpr std::uint64_t tag = 0x72617465ull;
  RateReport rep;

  {
    const Grid fine = grid.refined(cfg.fine_factor);
    const TrajectoryRecord ode = solve_limit_ode(spec, fine, theta0, 1);
    const Segment x0 = segment_at(ode, fine.n_steps());
    const auto& eps = cfg.rate.epsilon_list;
    std::vector<double> err(eps.size() * reps);
    parallel_for(err.size(), run.threads, [&](std::size_t idx) {
      const std::size_t i = idx / reps, r = idx % reps;
      SimConfig sim;
      sim.epsilon = eps[i];
      sim.grid = fine;
      sim.n_particles = cfg.n_particles;
      sim.rng_seed = derive_seed(cfg.rng_seed, {tag, 0, r});
      const ParticleEnsemble ens = simulate_particles(spec, sim, theta0);
      const double d = sup_distance(segment_at(ens.trajectories.front(), fine.n_steps()), x0);
      err[idx] = d * d;
    });
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      std::vector<double> v(err.begin() + static_cast<std::ptrdiff_t>(i * reps),
                            err.begin() + static_cast<std::ptrdiff_t>((i + 1) * reps));
      rep.epsilon_sweep.push_back(detail::mean_point(eps[i], fine.n_steps(), v));
      xs.push_back(eps[i]);
      ys.push_back(rep.epsilon_sweep.back().mean_sq_error);
    }
    rep.epsilon_fit = stats::fit_loglog(xs, ys);
  }

  {
    const std::size_t levels = cfg.rate.delta_levels;
    const Grid coarsest = delta_sweep_base(cfg);
    std::vector<Grid> grids;
    for (std::size_t l = 0; l < levels; ++l) {
      auto g = grid_for_steps(cfg.grid, coarsest.n_steps() << l);
      if (!g) throw std::invalid_argument("run_rate_check: refined grid is not admissible");
      grids.push_back(*g);
    }
    const Grid finest = grids.back().refined(cfg.fine_factor);
    const TrajectoryRecord ode = solve_limit_ode(spec, finest, theta0, 1);
    const Segment x0 = segment_at(ode, finest.n_steps());
    rep.delta_sweep_epsilon = cfg.rate.delta_epsilon;

    std::vector<double> err(levels * reps);
    parallel_for(err.size(), run.threads, [&](std::size_t idx) {
      const std::size_t l = idx / reps, r = idx % reps;
      SimConfig sim;
      sim.epsilon = cfg.rate.delta_epsilon;
      sim.grid = grids[l];
      sim.n_particles = cfg.n_particles;
      sim.noise_substeps = std::size_t{1} << (levels - 1 - l);
      sim.rng_seed = derive_seed(cfg.rng_seed, {tag, 1, r});
      const ParticleEnsemble ens = simulate_particles(spec, sim, theta0);
      const double d = detail::interpolated_sup_distance(
          segment_at(ens.trajectories.front(), grids[l].n_steps()), x0);
      err[idx] = d * d;
    });
    std::vector<double> xs, ys;
    for (std::size_t l = 0; l < levels; ++l) {
      std::vector<double> v(err.begin() + static_cast<std::ptrdiff_t>(l * reps),
                            err.begin() + static_cast<std::ptrdiff_t>((l + 1) * reps));
      rep.delta_sweep.push_back(detail::mean_point(grids[l].delta(), grids[l].n_steps(), v));
      xs.push_back(grids[l].delta());
      ys.push_back(rep.delta_sweep.back().mean_sq_error);
    }
    rep.delta_fit = stats::fit_loglog(xs, ys);
  }
  return rep;
}

inline csv::Table rate_table(const RateReport& rep) {
  csv::Table t;
  t.header = {"sweep", "epsilon", "delta", "n", "mean_sq_error", "std_error"};
  for (const auto& p : rep.epsilon_sweep) {
    t.add_row({"epsilon", csv::format_double(p.x), "", std::to_string(p.n),
               csv::format_double(p.mean_sq_error), csv::format_double(p.std_error)});
  }
  for (const auto& p : rep.delta_sweep) {
    t.add_row({"delta", csv::format_double(rep.delta_sweep_epsilon), csv::format_double(p.x),
               std::to_string(p.n), csv::format_double(p.mean_sq_error),
               csv::format_double(p.std_error)});
  }
  return t;
}

inline csv::Table rate_fit_table(const RateReport& rep) {
  csv::Table t;
  t.header = {"sweep", "loglog_slope", "loglog_intercept"};
  t.add_row({"epsilon", csv::format_double(rep.epsilon_fit.slope),
             csv::format_double(rep.epsilon_fit.intercept)});
  t.add_row({"delta", csv::format_double(rep.delta_fit.slope),
             csv::format_double(rep.delta_fit.intercept)});
  return t;
}

// ---------------------------------------------------------------------------
// Output.

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Writes `<dir>/<name>.csv`.
inline std::filesystem::path write_table(const std::filesystem::path& dir, const std::string& name,
                                         const csv::Table& table) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (name + ".csv");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  csv::write(os, table);
  return path;
}

/// Writes `<dir>/<name>.meta.json`: everything that may differ between two
/// otherwise identical runs lives here, never in the CSV bodies.
inline void write_metadata(const std::filesystem::path& dir, const std::string& name,
                           const ExperimentConfig& cfg, const RunOptions& run,
                           std::chrono::system_clock::time_point started,
                           std::chrono::system_clock::time_point finished,
                           const std::vector<std::string>& files) {
  std::filesystem::create_directories(dir);
  Json meta{
      {"experiment", name},
      {"started_utc", utc_timestamp(started)},
      {"finished_utc", utc_timestamp(finished)},
      {"wall_seconds", std::chrono::duration<double>(finished - started).count()},
      {"threads", run.threads},
      {"files", files},
      {"config", to_json(cfg)},
  };
  std::ofstream os(dir / (name + ".meta.json"));
  if (!os) throw std::runtime_error("cannot write metadata for " + name);
  os << meta.dump(2) << "\n";
}

}  // namespace mvsde
