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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace mvsde {

struct NelderMeadOptions {
  double simplex_tol = 1e-8;     // max inf-distance of any vertex from the best
  // f(worst) - f(best).  Off by default: an absolute spread of 1e-10 on a
  // contrast with curvature ~1e2 still leaves the simplex ~1e-6 wide.
  double value_tol = 0.0;
  std::size_t max_evaluations = 10000;
  double initial_step = 0.1;     // fraction of the box width
  std::size_t max_restarts = 4;  // fresh simplex around the best point
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::size_t evaluations = 0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Nelder-Mead on the box [lower, upper]; every trial point is projected
/// onto the box before evaluation.
template <class F>
NelderMeadResult nelder_mead_box(F&& f, const Eigen::VectorXd& start,
                                 const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                 const NelderMeadOptions& opt = {}) {
  using Vec = Eigen::VectorXd;
  const auto p = start.size();
  if (lower.size() != p || upper.size() != p) {
    throw std::invalid_argument("nelder_mead_box: dimension mismatch");
  }
  const auto np = static_cast<std::size_t>(p);
  auto project = [&](const Vec& x) -> Vec { return x.cwiseMax(lower).cwiseMin(upper); };

  NelderMeadResult res;
  auto eval = [&](const Vec& x) {
    ++res.evaluations;
    return static_cast<double>(f(x));
  };

  Vec best = project(start);
  double best_value = eval(best);
  const Vec width = upper - lower;
  double step_fraction = opt.initial_step;

  for (std::size_t attempt = 0; attempt <= opt.max_restarts; ++attempt) {
    std::vector<Vec> simplex(np + 1, best);
    std::vector<double> values(np + 1, best_value);
    for (std::size_t j = 0; j < np; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      Vec v = best;
      const double h = step_fraction * width[jj];
      v[jj] = (best[jj] + h <= upper[jj]) ? best[jj] + h : best[jj] - h;
      simplex[j + 1] = project(v);
      values[j + 1] = eval(simplex[j + 1]);
    }

    std::vector<std::size_t> order(np + 1);
    bool stopped_by_tolerance = false;
    while (res.evaluations < opt.max_evaluations) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
      const std::size_t ib = order.front();
      const std::size_t iw = order.back();
      const std::size_t isw = order[np - 1];

      double diameter = 0.0;
      for (const auto& v : simplex) {
        diameter = std::max(diameter, (v - simplex[ib]).cwiseAbs().maxCoeff());
      }
      if (diameter < opt.simplex_tol || values[iw] - values[ib] < opt.value_tol) {
        stopped_by_tolerance = true;
        break;
      }
      ++res.iterations;

      Vec centroid = Vec::Zero(p);
      for (std::size_t j = 0; j <= np; ++j) {
        if (j != iw) centroid += simplex[j];
      }
      centroid /= static_cast<double>(np);

      const Vec xr = project(centroid + (centroid - simplex[iw]));
      const double fr = eval(xr);
      if (fr < values[ib]) {
        const Vec xe = project(centroid + 2.0 * (xr - centroid));
        const double fe = eval(xe);
        if (fe < fr) {
          simplex[iw] = xe;
          values[iw] = fe;
        } else {
          simplex[iw] = xr;
          values[iw] = fr;
        }
      } else if (fr < values[isw]) {
        simplex[iw] = xr;
        values[iw] = fr;
      } else {
        const bool outside = fr < values[iw];
        const Vec xc = outside ? project(centroid + 0.5 * (xr - centroid))
                               : project(centroid + 0.5 * (simplex[iw] - centroid));
        const double fc = eval(xc);
        if (fc < (outside ? fr : values[iw])) {
          simplex[iw] = xc;
          values[iw] = fc;
        } else {
          for (std::size_t j = 0; j <= np; ++j) {
            if (j == ib) continue;
            simplex[j] = project(simplex[ib] + 0.5 * (simplex[j] - simplex[ib]));
            values[j] = eval(simplex[j]);
          }
        }
      }
    }

    const auto ib = static_cast<std::size_t>(
        std::min_element(values.begin(), values.end()) - values.begin());
    const double improvement = best_value - values[ib];
    const double moved = (simplex[ib] - best).cwiseAbs().maxCoeff();
    if (values[ib] <= best_value) {
      best = simplex[ib];
      best_value = values[ib];
    }
    if (!stopped_by_tolerance) break;  // evaluation budget exhausted
    res.converged = true;
    // A restart that neither improves nor moves confirms the minimum.
    if (attempt > 0 && improvement <= opt.value_tol && moved < opt.simplex_tol) break;
    step_fraction = std::max(1e-3 * opt.initial_step, 0.1 * step_fraction);
  }
  if (res.evaluations >= opt.max_evaluations) res.converged = false;
  res.x = best;
  res.value = best_value;
  return res;
}

}  // namespace mvsde
