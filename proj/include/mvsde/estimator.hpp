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

// Least-squares estimation of the drift parameter from discrete observations.
//
// The contrast is
//
//   Psi(theta) = eps^-2 delta^-1 sum_{k=1..n} P_k(theta)^T W_{k-1} P_k(theta),
//   P_k(theta) = Y(t_k) - Y(t_{k-1}) - b(Y_{k-1}, mu_{k-1}, theta) delta,
//   W_{k-1}    = (sigma sigma^T)^{-1}(Y_{k-1}, mu_{k-1}),
//
// where Y_{k-1} is the interpolated window at t_{k-1} and mu_{k-1} stands in
// for its law.  When sigma is square and invertible, P^T W P equals
// |sigma^{-1} P|^2, so no separate code path is needed for that case.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mvsde/errors.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/model.hpp"
#include "mvsde/nelder_mead.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/segment_path.hpp"
#include "mvsde/simulator.hpp"

namespace mvsde {

enum class MeasureMode { ensemble, dirac };

inline std::string_view to_string(MeasureMode m) {
  return m == MeasureMode::ensemble ? "ensemble" : "dirac";
}

inline MeasureMode parse_measure_mode(std::string_view s) {
  if (s == "ensemble") return MeasureMode::ensemble;
  if (s == "dirac") return MeasureMode::dirac;
  throw std::invalid_argument("unknown measure mode '" + std::string(s) +
                              "' (expected ensemble or dirac)");
}

/// Everything the contrast needs, fixed once: windows, measures and weights.
class ContrastContext {
 public:
  ContrastContext(ModelSpec spec, TrajectoryRecord observed, double epsilon,
                  std::vector<EmpiricalMeasure> measure_path)
      : spec_(std::move(spec)),
        observed_(std::move(observed)),
        epsilon_(epsilon),
        measures_(std::move(measure_path)) {
    const std::size_t n = observed_.n_steps();
    if (!(epsilon_ > 0.0)) throw std::invalid_argument("ContrastContext: epsilon must be > 0");
    if (measures_.size() != n) {
      throw std::invalid_argument("ContrastContext: need one measure per step (n)");
    }
    segments_.reserve(n);
    weights_.reserve(n);
    for (std::size_t k = 1; k <= n; ++k) {
      segments_.push_back(segment_at(observed_, k - 1));
      Matrix w = sigma_hat(spec_, segments_.back(), measures_[k - 1]);
      if (!w.isApprox(w.transpose(), 1e-12)) {
        throw SingularDiffusion("weight matrix at step " + std::to_string(k - 1) +
                                " is not symmetric");
      }
      weights_.push_back(std::move(w));
    }
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  const TrajectoryRecord& observed() const noexcept { return observed_; }
  double epsilon() const noexcept { return epsilon_; }
  double delta() const noexcept { return observed_.grid().delta(); }
  std::size_t n_steps() const noexcept { return observed_.n_steps(); }

  /// Window, measure and weight used by residual k (1-based).
  const Segment& window(std::size_t k) const { return segments_.at(k - 1); }
  const EmpiricalMeasure& measure(std::size_t k) const { return measures_.at(k - 1); }
  const Matrix& weight(std::size_t k) const { return weights_.at(k - 1); }

  Vector increment(std::size_t k) const {
    return observed_.observation(k) - observed_.observation(k - 1);
  }

 private:
  ModelSpec spec_;
  TrajectoryRecord observed_;
  double epsilon_;
  std::vector<EmpiricalMeasure> measures_;
  std::vector<Segment> segments_;
  std::vector<Matrix> weights_;
};

/// Dirac at the observed window: mu_{k-1} = delta_{Y_{k-1}}.
inline std::vector<EmpiricalMeasure> dirac_measure_path(const ModelSpec& spec,
                                                        const TrajectoryRecord& observed) {
  std::vector<EmpiricalMeasure> out;
  out.reserve(observed.n_steps());
  for (std::size_t k = 0; k < observed.n_steps(); ++k) {
    out.push_back(spec.prepare(EmpiricalMeasure::dirac(segment_at(observed, k))));
  }
  return out;
}

/// Empirical measures of an N-particle ensemble simulated from xi at `pilot`.
inline std::vector<EmpiricalMeasure> ensemble_measure_path(const ModelSpec& spec,
                                                           const Grid& grid, double epsilon,
                                                           const ThetaPoint& pilot,
                                                           std::size_t n_particles,
                                                           std::uint64_t seed) {
  SimConfig cfg;
  cfg.epsilon = epsilon;
  cfg.grid = grid;
  cfg.n_particles = n_particles;
  cfg.rng_seed = seed;
  const ParticleEnsemble ens = simulate_particles(spec, cfg, pilot);
  std::vector<EmpiricalMeasure> out;
  out.reserve(grid.n_steps());
  for (std::size_t k = 0; k < grid.n_steps(); ++k) out.push_back(spec.prepare(ens.measure_at(k)));
  return out;
}

/// P_k(theta), 1 <= k <= n.
inline Vector residual(const ContrastContext& ctx, std::size_t k, const ThetaPoint& theta) {
  if (k < 1 || k > ctx.n_steps()) throw std::out_of_range("residual: k must be in [1, n]");
  return ctx.increment(k) -
         ctx.spec().drift(ctx.window(k), ctx.measure(k), theta) * ctx.delta();
}

inline double contrast(const ContrastContext& ctx, const ThetaPoint& theta) {
  double acc = 0.0;
  for (std::size_t k = 1; k <= ctx.n_steps(); ++k) {
    const Vector r = residual(ctx, k, theta);
    acc += r.dot(ctx.weight(k) * r);
  }
  return acc / (ctx.epsilon() * ctx.epsilon() * ctx.delta());
}

/// eps^2 (Psi(theta) - Psi(theta0))
inline double phi(const ContrastContext& ctx, const ThetaPoint& theta, const ThetaPoint& theta0) {
  return ctx.epsilon() * ctx.epsilon() * (contrast(ctx, theta) - contrast(ctx, theta0));
}

enum class EstimationMethod { closed_form, nelder_mead, grid };

inline std::string_view to_string(EstimationMethod m) {
  switch (m) {
    case EstimationMethod::closed_form: return "closed_form";
    case EstimationMethod::nelder_mead: return "nelder_mead";
    case EstimationMethod::grid: return "grid";
  }
  return "unknown";
}

struct EstimationResult {
  ThetaPoint theta_hat;
  double contrast_value = 0.0;
  EstimationMethod method = EstimationMethod::closed_form;
  std::size_t iterations = 0;
  bool converged = false;
  /// The unconstrained minimizer lies in the closure of Theta.  Only the
  /// closed form can report false; estimate_lse then returns the minimizer
  /// over the box instead and keeps this flag.
  bool in_box = true;
};

/// Exact minimizer over R^p for affine drift b = b_c + G theta, from
/// (delta sum G^T W G) theta = sum G^T W (dY - b_c delta).
inline EstimationResult estimate_closed_form(const ContrastContext& ctx) {
  const ModelSpec& spec = ctx.spec();
  if (!spec.affine_in_theta) {
    throw std::invalid_argument("estimate_closed_form: model drift is not affine in theta");
  }
  const auto p = static_cast<Eigen::Index>(spec.theta_box.dim());
  const ThetaPoint zero = ThetaPoint::Zero(p);
  Matrix normal = Matrix::Zero(p, p);
  Vector rhs = Vector::Zero(p);
  const double delta = ctx.delta();
  for (std::size_t k = 1; k <= ctx.n_steps(); ++k) {
    const Matrix g = grad_theta_drift(spec, ctx.window(k), ctx.measure(k), zero);
    const Vector bc = spec.drift(ctx.window(k), ctx.measure(k), zero);
    const Matrix gw = g.transpose() * ctx.weight(k);
    normal += delta * gw * g;
    rhs += gw * (ctx.increment(k) - bc * delta);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(normal, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0) || lo <= 1e-13 * hi) {
    throw DegenerateNormalEquations(
        "normal equations are singular; the data do not identify theta");
  }
  EstimationResult r;
  r.theta_hat = normal.ldlt().solve(rhs);
  r.contrast_value = contrast(ctx, r.theta_hat);
  r.method = EstimationMethod::closed_form;
  r.iterations = 0;
  r.converged = true;
  r.in_box = spec.theta_box.in_closure(r.theta_hat);
  return r;
}

/// Scalar example only: the explicit A1..A5 solution
///   theta1 = (A2 A5 - A3 A4) / (delta (A1 A5 - A4^2)),
///   theta2 = (A1 A3 - A2 A4) / (delta (A1 A5 - A4^2)).
/// Reads sigma = 1 + |Y(t_{k-1})| and the kernel integral directly, without
/// going through the model callbacks.
inline EstimationResult example_closed_form(const ContrastContext& ctx,
                                            const InteractionKernel& kernel) {
  double a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0;
  const TrajectoryRecord& y = ctx.observed();
  for (std::size_t k = 1; k <= ctx.n_steps(); ++k) {
    const double prev = y.observation(k - 1)[0];
    const double dy = y.observation(k)[0] - prev;
    const double w = 1.0 / ((1.0 + std::abs(prev)) * (1.0 + std::abs(prev)));
    const Segment& seg = ctx.window(k);
    const double g =
        integrate(ctx.measure(k), [&](const Segment& other) { return kernel.b0(seg, other); });
    a1 += w;
    a2 += dy * w;
    a3 += dy * g * w;
    a4 += g * w;
    a5 += g * g * w;
  }
  const double det = a1 * a5 - a4 * a4;
  if (!(std::abs(det) > 1e-14 * std::abs(a1 * a5))) {
    throw DegenerateNormalEquations("A1 A5 - A4^2 vanishes; the data do not identify theta");
  }
  EstimationResult r;
  r.theta_hat = ThetaPoint(2);
  r.theta_hat << (a2 * a5 - a3 * a4) / (ctx.delta() * det),
      (a1 * a3 - a2 * a4) / (ctx.delta() * det);
  r.contrast_value = contrast(ctx, r.theta_hat);
  r.method = EstimationMethod::closed_form;
  r.converged = true;
  r.in_box = ctx.spec().theta_box.in_closure(r.theta_hat);
  return r;
}

/// Nelder-Mead over the closure of Theta.
inline EstimationResult estimate_numeric(const ContrastContext& ctx, const ThetaPoint& start,
                                         const NelderMeadOptions& options = {}) {
  const ThetaBox& box = ctx.spec().theta_box;
  if (!box.in_closure(start)) throw std::invalid_argument("estimate_numeric: start not in Theta");
  const auto nm = nelder_mead_box([&](const Vector& t) { return contrast(ctx, t); }, start,
                                  box.lower(), box.upper(), options);
  EstimationResult r;
  r.theta_hat = nm.x;
  r.contrast_value = nm.value;
  r.method = EstimationMethod::nelder_mead;
  r.iterations = nm.iterations;
  r.converged = nm.converged;
  r.in_box = true;
  return r;
}

/// Argmin of f over the uniform grid with `resolution` points per axis on
/// the closed box.  Visits points in lexicographic order and keeps the first
/// strict minimum, so ties go to the lexicographically smallest point.
template <class F>
ThetaPoint grid_argmin(const ThetaBox& box, std::size_t resolution, F&& f) {
  const std::size_t p = box.dim();
  if (resolution < 2) throw std::invalid_argument("grid_oracle: resolution must be >= 2");
  if (p > 3) throw std::invalid_argument("grid_oracle: exhaustive search needs p <= 3");
  std::vector<std::size_t> idx(p, 0);
  const Vector step = box.width() / static_cast<double>(resolution - 1);
  ThetaPoint best, t(static_cast<Eigen::Index>(p));
  double best_value = std::numeric_limits<double>::infinity();
  while (true) {
    for (std::size_t j = 0; j < p; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      t[jj] = idx[j] + 1 == resolution ? box.upper()[jj]
                                       : box.lower()[jj] + static_cast<double>(idx[j]) * step[jj];
    }
    const double v = f(t);
    if (v < best_value || best.size() == 0) {
      best_value = v;
      best = t;
    }
    // Last coordinate varies fastest.
    std::size_t j = p;
    while (j > 0) {
      --j;
      if (++idx[j] < resolution) break;
      idx[j] = 0;
      if (j == 0) return best;
    }
  }
}

inline ThetaPoint grid_oracle(const ContrastContext& ctx, std::size_t resolution) {
  return grid_argmin(ctx.spec().theta_box, resolution,
                     [&](const ThetaPoint& t) { return contrast(ctx, t); });
}

// ---------------------------------------------------------------------------

struct EstimatorOptions {
  MeasureMode measure_mode = MeasureMode::ensemble;
  /// Ensemble pilot; defaults to the centre of Theta.
  std::optional<ThetaPoint> pilot;
  /// Re-estimation passes that rebuild the ensemble at the previous estimate.
  std::size_t refine_passes = 1;
  std::size_t n_particles = 256;
  std::uint64_t seed = 0;
  NelderMeadOptions nelder_mead;
};

/// Context for the configured measure mode.
inline ContrastContext make_context(const ModelSpec& spec, const TrajectoryRecord& observed,
                                    double epsilon, MeasureMode mode, const ThetaPoint& pilot,
                                    std::size_t n_particles, std::uint64_t seed) {
  if (mode == MeasureMode::dirac) {
    return ContrastContext(spec, observed, epsilon, dirac_measure_path(spec, observed));
  }
  return ContrastContext(
      spec, observed, epsilon,
      ensemble_measure_path(spec, observed.grid(), epsilon, pilot, n_particles, seed));
}

/// Full LSE over the closure of Theta: closed form for affine drift (box-
/// constrained Nelder-Mead if it lands outside), Nelder-Mead otherwise.  In
/// ensemble mode the measure path is rebuilt `refine_passes` times at the
/// current estimate.
inline EstimationResult estimate_lse(const ModelSpec& spec, const TrajectoryRecord& observed,
                                     double epsilon, const EstimatorOptions& opt) {
  ThetaPoint pilot = opt.pilot.value_or(spec.theta_box.center());
  auto run = [&](const ContrastContext& ctx) {
    if (!spec.affine_in_theta) {
      return estimate_numeric(ctx, spec.theta_box.project(pilot), opt.nelder_mead);
    }
    EstimationResult r = estimate_closed_form(ctx);
    if (r.in_box) return r;
    // The LSE minimizes over Theta: fall back to the box-constrained minimum
    // of the (convex, quadratic) contrast.
    EstimationResult c = estimate_numeric(ctx, spec.theta_box.project(r.theta_hat), opt.nelder_mead);
    c.in_box = false;
    return c;
  };
  const std::size_t passes =
      opt.measure_mode == MeasureMode::ensemble ? opt.refine_passes + 1 : 1;
  EstimationResult r;
  for (std::size_t pass = 0; pass < passes; ++pass) {
    const ContrastContext ctx =
        make_context(spec, observed, epsilon, opt.measure_mode, pilot, opt.n_particles, opt.seed);
    r = run(ctx);
    pilot = spec.theta_box.project(r.theta_hat);
  }
  return r;
}

}  // namespace mvsde
