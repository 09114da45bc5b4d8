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

// Interacting-particle Euler-Maruyama scheme and the limiting delay ODE.
//
// The law argument of the coefficients is realized by the empirical measure
// of N particle segments, rebuilt after every step.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/errors.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/model.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/segment_path.hpp"

namespace mvsde {

struct SimConfig {
  double epsilon = 0.1;
  Grid grid;
  std::size_t n_particles = 256;
  std::uint64_t rng_seed = 0;
  /// Truth generation runs on delta / fine_factor.
  std::size_t fine_factor = 8;
  /// Each increment is the sum of this many finer N(0, delta/R) draws keyed
  /// by (particle, step*R + r).  Grids related by refinement with matching
  /// R share one Brownian path.
  std::size_t noise_substeps = 1;
};

inline void validate(const SimConfig& cfg) {
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0)) {
    throw std::invalid_argument("SimConfig: epsilon must lie in [0, 1)");
  }
  if (cfg.n_particles < 1) throw std::invalid_argument("SimConfig: need n_particles >= 1");
  if (cfg.fine_factor < 1) throw std::invalid_argument("SimConfig: need fine_factor >= 1");
  if (cfg.noise_substeps < 1) throw std::invalid_argument("SimConfig: need noise_substeps >= 1");
  if (cfg.n_particles > 0xFFFFFFFFull) throw std::invalid_argument("SimConfig: too many particles");
}

/// N particle trajectories evolved in lockstep.
struct ParticleEnsemble {
  std::vector<TrajectoryRecord> trajectories;
  std::size_t current_step = 0;

  std::size_t size() const noexcept { return trajectories.size(); }
  const Grid& grid() const { return trajectories.front().grid(); }

  /// Empirical measure of all particle segments at step k (no summary).
  EmpiricalMeasure measure_at(std::size_t k) const {
    std::vector<Segment> atoms;
    atoms.reserve(trajectories.size());
    for (const auto& t : trajectories) atoms.push_back(segment_at(t, k));
    return EmpiricalMeasure(std::move(atoms));
  }
};

/// Y^i(t_k) = Y^i(t_{k-1}) + b(Y^i_{k-1}, mu_{k-1}, theta) delta
///            + eps sigma(Y^i_{k-1}, mu_{k-1}) dB^i_k.
inline ParticleEnsemble simulate_particles(const ModelSpec& spec, const SimConfig& cfg,
                                           const ThetaPoint& theta) {
  validate(cfg);
  const Grid& grid = cfg.grid;
  const std::size_t n_part = cfg.n_particles;
  const std::size_t d = spec.dims.d;
  const std::size_t m = spec.dims.m;
  const std::size_t mem = grid.memory_steps();
  const Segment xi = spec.initial_segment(grid);

  std::vector<std::shared_ptr<std::vector<double>>> buffers(n_part);
  for (auto& b : buffers) {
    b = std::make_shared<std::vector<double>>(grid.path_points() * d, 0.0);
    auto h = xi.values();
    std::copy(h.begin(), h.end(), b->begin());
  }

  const NormalStream stream(cfg.rng_seed);
  const std::size_t substeps = cfg.noise_substeps;
  const double sub_scale = std::sqrt(grid.delta() / static_cast<double>(substeps));
  std::vector<double> z(m);
  Vector dB(static_cast<Eigen::Index>(m));
  std::vector<Segment> atoms(n_part);

  for (std::size_t k = 1; k <= grid.n_steps(); ++k) {
    for (std::size_t i = 0; i < n_part; ++i) {
      atoms[i] = Segment::window(buffers[i], k - 1, mem + 1, d);
    }
    const EmpiricalMeasure mu = spec.prepare(EmpiricalMeasure(atoms));
    for (std::size_t i = 0; i < n_part; ++i) {
      const Segment& seg = atoms[i];
      Vector next = seg.head() + spec.drift(seg, mu, theta) * grid.delta();
      if (cfg.epsilon > 0.0) {
        dB.setZero();
        for (std::size_t r = 0; r < substeps; ++r) {
          stream.fill(static_cast<std::uint32_t>(i), (k - 1) * substeps + r, z);
          for (std::size_t c = 0; c < m; ++c) dB[static_cast<Eigen::Index>(c)] += z[c];
        }
        next += cfg.epsilon * (spec.diffusion(seg, mu) * (sub_scale * dB));
      }
      if (!next.allFinite()) {
        throw NonFinite("particle " + std::to_string(i) + " left the finite range at step " +
                        std::to_string(k));
      }
      std::copy(next.data(), next.data() + d, buffers[i]->begin() +
                                                  static_cast<std::ptrdiff_t>((mem + k) * d));
    }
  }

  ParticleEnsemble out;
  out.current_step = grid.n_steps();
  out.trajectories.reserve(n_part);
  for (auto& b : buffers) out.trajectories.emplace_back(grid, d, std::move(b));
  return out;
}

/// "True" data: particle 0 of an ensemble run on delta/F, subsampled to the
/// coarse grid.
inline TrajectoryRecord simulate_observation(const ModelSpec& spec, const SimConfig& cfg,
                                             const ThetaPoint& theta0) {
  validate(cfg);
  SimConfig fine = cfg;
  fine.grid = cfg.grid.refined(cfg.fine_factor);
  const ParticleEnsemble ens = simulate_particles(spec, fine, theta0);
  return ens.trajectories.front().subsampled(cfg.fine_factor);
}

/// Deterministic limit dX = b(X_t, delta_{X_t}, theta0) dt by explicit Euler
/// on delta/F, subsampled to `grid`.
inline TrajectoryRecord solve_limit_ode(const ModelSpec& spec, const Grid& grid,
                                        const ThetaPoint& theta0, std::size_t fine_factor) {
  const Grid fine = grid.refined(fine_factor);
  const std::size_t d = spec.dims.d;
  const std::size_t mem = fine.memory_steps();
  auto buf = std::make_shared<std::vector<double>>(fine.path_points() * d, 0.0);
  const Segment xi = spec.initial_segment(fine);
  std::copy(xi.values().begin(), xi.values().end(), buf->begin());

  for (std::size_t k = 1; k <= fine.n_steps(); ++k) {
    const Segment seg = Segment::window(buf, k - 1, mem + 1, d);
    const EmpiricalMeasure mu = spec.prepare(EmpiricalMeasure::dirac(seg));
    const Vector next = seg.head() + spec.drift(seg, mu, theta0) * fine.delta();
    if (!next.allFinite()) {
      throw NonFinite("limit ODE blew up at fine step " + std::to_string(k));
    }
    std::copy(next.data(), next.data() + d,
              buf->begin() + static_cast<std::ptrdiff_t>((mem + k) * d));
  }
  TrajectoryRecord rec(fine, d, std::move(buf));
  return fine_factor == 1 ? rec : rec.subsampled(fine_factor);
}

}  // namespace mvsde
