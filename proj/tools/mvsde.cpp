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

// mvsde command-line tool.
//
// Exit codes: 0 success, 1 I/O or usage failure, 2 configuration error,
// 3 numerical failure, 4 optimizer did not converge.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mvsde/config.hpp"
#include "mvsde/csv.hpp"
#include "mvsde/errors.hpp"
#include "mvsde/estimator.hpp"
#include "mvsde/experiment.hpp"
#include "mvsde/model.hpp"
#include "mvsde/simulator.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;
constexpr int kNotConverged = 4;

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t threads = 1;
  std::optional<std::string> measure_mode;
};

mvsde::ExperimentConfig load_config(const GlobalFlags& flags) {
  mvsde::ExperimentConfig cfg;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw mvsde::ConfigError({"cannot open config file '" + flags.config_path + "'"});
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = mvsde::validate_config(ss.str());
  }
  if (flags.seed) cfg.rng_seed = *flags.seed;
  if (flags.out) cfg.output_dir = *flags.out;
  if (flags.measure_mode) {
    try {
      cfg.measure_mode = mvsde::parse_measure_mode(*flags.measure_mode);
    } catch (const std::invalid_argument&) {
      throw mvsde::ConfigError({"--measure-mode: must be 'ensemble' or 'dirac'"});
    }
  }
  auto problems = mvsde::config_problems(cfg);
  if (!problems.empty()) throw mvsde::ConfigError(std::move(problems));
  return cfg;
}

mvsde::RunOptions run_options(const GlobalFlags& flags) {
  mvsde::RunOptions run;
  run.threads = flags.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                   : flags.threads;
  return run;
}

std::string format_vector(const mvsde::Vector& v) {
  std::string s = "[";
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (j) s += ", ";
    s += mvsde::csv::format_double(v[j]);
  }
  return s + "]";
}

mvsde::EstimatorOptions estimator_options(const mvsde::ExperimentConfig& cfg) {
  mvsde::EstimatorOptions opt;
  opt.measure_mode = cfg.measure_mode;
  opt.pilot = mvsde::resolve_pilot(cfg);
  opt.refine_passes = cfg.refine_passes;
  opt.n_particles = cfg.n_particles;
  opt.seed = mvsde::derive_seed(cfg.rng_seed, {1});
  return opt;
}

double pick_epsilon(const mvsde::ExperimentConfig& cfg, std::optional<double> eps) {
  const double e = eps.value_or(cfg.epsilon_list.front());
  if (!(e > 0.0 && e < 1.0)) throw mvsde::ConfigError({"--epsilon: must lie in (0,1)"});
  return e;
}

int cmd_simulate(const GlobalFlags& flags, std::optional<double> eps_flag) {
  const auto cfg = load_config(flags);
  const auto started = std::chrono::system_clock::now();
  const auto spec = mvsde::build_model(cfg);
  mvsde::SimConfig sim;
  sim.epsilon = pick_epsilon(cfg, eps_flag);
  sim.grid = mvsde::base_grid(cfg);
  sim.n_particles = cfg.n_particles;
  sim.fine_factor = cfg.fine_factor;
  sim.rng_seed = mvsde::derive_seed(cfg.rng_seed, {0});
  const auto obs = mvsde::simulate_observation(spec, sim, mvsde::to_vector(cfg.theta0));
  const auto path = mvsde::write_table(cfg.output_dir, "trajectory", mvsde::csv::trajectory_table(obs));
  mvsde::write_metadata(cfg.output_dir, "trajectory", cfg, run_options(flags), started,
                        std::chrono::system_clock::now(), {path.filename().string()});
  std::cout << "wrote " << path.string() << " (epsilon " << sim.epsilon << ", n "
            << sim.grid.n_steps() << ", M " << sim.grid.memory_steps() << ")\n";
  return kOk;
}

int cmd_estimate(const GlobalFlags& flags, const std::string& trajectory,
                 std::optional<double> eps_flag) {
  const auto cfg = load_config(flags);
  const auto spec = mvsde::build_model(cfg);
  std::ifstream in(trajectory, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trajectory '" + trajectory + "'");
  const auto obs = mvsde::csv::trajectory_from_table(mvsde::csv::read(in));
  if (obs.dim() != spec.dims.d) throw std::runtime_error("trajectory dimension does not match model");
  const double eps = pick_epsilon(cfg, eps_flag);
  const auto est = mvsde::estimate_lse(spec, obs, eps, estimator_options(cfg));
  std::cout << "theta_hat = " << format_vector(est.theta_hat) << "\n"
            << "method = " << mvsde::to_string(est.method) << "\n"
            << "converged = " << (est.converged ? "true" : "false") << "\n"
            << "in_box = " << (est.in_box ? "true" : "false") << "\n"
            << "contrast = " << mvsde::csv::format_double(est.contrast_value) << "\n";
  return est.converged ? kOk : kNotConverged;
}

int cmd_consistency(const GlobalFlags& flags) {
  const auto cfg = load_config(flags);
  const auto run = run_options(flags);
  const auto started = std::chrono::system_clock::now();
  const auto rep = mvsde::run_consistency(cfg, run);
  std::vector<std::string> files;
  files.push_back(mvsde::write_table(cfg.output_dir, "consistency", mvsde::consistency_table(rep))
                      .filename().string());
  files.push_back(mvsde::write_table(cfg.output_dir, "consistency_cells", mvsde::cell_summary_table(rep))
                      .filename().string());
  mvsde::write_metadata(cfg.output_dir, "consistency", cfg, run, started,
                        std::chrono::system_clock::now(), files);
  std::cout << std::setw(10) << "epsilon" << std::setw(8) << "n" << std::setw(16)
            << "median|err|" << "  rmse\n";
  for (const auto& c : rep.cells) {
    std::cout << std::setw(10) << c.epsilon << std::setw(8) << c.n << std::setw(16)
              << c.median_abs_error << "  " << format_vector(c.rmse) << "\n";
  }
  return rep.all_converged() ? kOk : kNotConverged;
}

int cmd_asymptotics(const GlobalFlags& flags) {
  const auto cfg = load_config(flags);
  const auto run = run_options(flags);
  const auto started = std::chrono::system_clock::now();
  const auto rep = mvsde::run_asymptotics(cfg, run);
  std::vector<std::string> files;
  files.push_back(mvsde::write_table(cfg.output_dir, "asymptotics_scaled", mvsde::scaled_error_table(rep))
                      .filename().string());
  files.push_back(mvsde::write_table(cfg.output_dir, "asymptotics_limit", mvsde::limit_sample_table(rep))
                      .filename().string());
  files.push_back(mvsde::write_table(cfg.output_dir, "asymptotics_stats", mvsde::asymptotics_stats_table(rep))
                      .filename().string());
  mvsde::write_metadata(cfg.output_dir, "asymptotics", cfg, run, started,
                        std::chrono::system_clock::now(), files);
  const auto rel = rep.variance_relative_error();
  std::cout << "epsilon " << rep.epsilon << ", n " << rep.n << ", critical KS "
            << rep.ks_critical << "\n";
  for (std::size_t j = 0; j < rep.ks.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    std::cout << "  theta_" << j + 1 << ": KS " << rep.ks[j] << ", variance "
              << rep.empirical_covariance(jj, jj) << " vs limit " << rep.limit_covariance(jj, jj)
              << " (rel. error " << rel[jj] << ")\n";
  }
  const bool all = std::all_of(rep.converged.begin(), rep.converged.end(), [](bool b) { return b; });
  return all ? kOk : kNotConverged;
}

int cmd_rate(const GlobalFlags& flags) {
  const auto cfg = load_config(flags);
  const auto run = run_options(flags);
  const auto started = std::chrono::system_clock::now();
  const auto rep = mvsde::run_rate_check(cfg, run);
  std::vector<std::string> files;
  files.push_back(mvsde::write_table(cfg.output_dir, "rate", mvsde::rate_table(rep)).filename().string());
  files.push_back(mvsde::write_table(cfg.output_dir, "rate_fit", mvsde::rate_fit_table(rep)).filename().string());
  mvsde::write_metadata(cfg.output_dir, "rate", cfg, run, started, std::chrono::system_clock::now(),
                        files);
  std::cout << "epsilon sweep:\n";
  for (const auto& p : rep.epsilon_sweep) {
    std::cout << "  eps " << p.x << ": E|X^eps - X0|^2 = " << p.mean_sq_error << " +- " << p.std_error << "\n";
  }
  std::cout << "  log-log slope " << rep.epsilon_fit.slope << "\n";
  std::cout << "delta sweep at eps " << rep.delta_sweep_epsilon << ":\n";
  for (const auto& p : rep.delta_sweep) {
    std::cout << "  delta " << p.x << ": E|Y - X0|^2 = " << p.mean_sq_error << " +- " << p.std_error << "\n";
  }
  std::cout << "  nonincreasing: " << (rep.delta_nonincreasing() ? "yes" : "no") << "\n";
  return kOk;
}

int cmd_probe(const GlobalFlags& flags, std::size_t samples) {
  const auto cfg = load_config(flags);
  const auto spec = mvsde::build_model(cfg);
  const auto r = mvsde::lipschitz_probe(spec, samples, cfg.rng_seed);
  std::cout << "samples " << r.samples << " (skipped singular: " << r.skipped_singular << ")\n"
            << "alpha1_hat " << r.alpha1_hat << "\n"
            << "alpha2_hat " << r.alpha2_hat << "\n"
            << "beta1_hat " << r.beta1_hat << "\n"
            << "beta2_hat " << r.beta2_hat << "\n"
            << "L1_hat " << r.L1_hat << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and drift estimation for small-noise McKean-Vlasov delay equations"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "JSON experiment configuration");
  app.add_option("--seed", flags.seed, "Master seed (overrides rng_seed)");
  app.add_option("--out", flags.out, "Output directory (overrides output_dir)");
  app.add_option("--threads", flags.threads, "Worker threads; 0 = all cores")->capture_default_str();
  app.add_option("--measure-mode", flags.measure_mode, "ensemble or dirac");

  std::optional<double> eps_flag;
  std::string trajectory;
  std::size_t probe_samples = 2000;

  auto* simulate = app.add_subcommand("simulate", "Simulate one observed trajectory to CSV");
  simulate->add_option("--epsilon", eps_flag, "Noise level (default: first of epsilon_list)");

  auto* estimate = app.add_subcommand("estimate", "Estimate theta from a trajectory CSV");
  estimate->add_option("--trajectory", trajectory, "Trajectory CSV")->required();
  estimate->add_option("--epsilon", eps_flag, "Noise level (default: first of epsilon_list)");

  auto* experiment = app.add_subcommand("experiment", "Monte Carlo experiments");
  experiment->require_subcommand(1);
  auto* consistency = experiment->add_subcommand("consistency", "Error of theta_hat across the sweep");
  auto* asymptotics = experiment->add_subcommand("asymptotics", "Scaled errors against the limit law");
  auto* rate = experiment->add_subcommand("rate", "Small-noise and step-size error rates");

  auto* probe = app.add_subcommand("probe", "Empirical Lipschitz ratios of the model");
  probe->add_option("--samples", probe_samples, "Number of random probes")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*simulate) return cmd_simulate(flags, eps_flag);
    if (*estimate) return cmd_estimate(flags, trajectory, eps_flag);
    if (*consistency) return cmd_consistency(flags);
    if (*asymptotics) return cmd_asymptotics(flags);
    if (*rate) return cmd_rate(flags);
    if (*probe) return cmd_probe(flags, probe_samples);
  } catch (const mvsde::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kConfigError;
  } catch (const mvsde::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
