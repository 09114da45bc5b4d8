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
//
// Small models and path builders shared by the unit tests.

#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "mvsde/measure.hpp"
#include "mvsde/model.hpp"
#include "mvsde/segment_path.hpp"

namespace mvsde::testing {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Segment scalar_segment(std::vector<double> v) { return Segment(std::move(v), 1); }

/// Trajectory from all knots (history then observations), dimension 1.
inline TrajectoryRecord scalar_trajectory(const Grid& grid, std::vector<double> knots) {
  return TrajectoryRecord(grid, 1, std::make_shared<std::vector<double>>(std::move(knots)));
}

/// The worked example: b = theta1 + theta2 int b0 dmu, sigma = 1 + |zeta(0)|,
/// Theta = (0, 2)^2, xi(s) = 1 + s.
inline ModelSpec example_model(const std::string& kernel = "sincos") {
  return build_example_model(named_kernel(kernel), ThetaBox(vec({0.0, 0.0}), vec({2.0, 2.0})),
                             [](double s) { return Vector::Constant(1, 1.0 + s); });
}

/// dX = theta dt + eps * sigma dB in one dimension, constant sigma and xi.
inline ModelSpec drift_only_model(double sigma = 1.0, double xi0 = 0.0, double lo = -5.0,
                                  double hi = 5.0) {
  ModelSpec spec;
  spec.name = "custom";
  spec.dims = {1, 1, 1};
  spec.theta_box = ThetaBox(vec({lo}), vec({hi}));
  spec.xi = [xi0](double) { return Vector::Constant(1, xi0); };
  spec.affine_in_theta = true;
  spec.drift = [](const Segment&, const EmpiricalMeasure&, const ThetaPoint& th) {
    return Vector::Constant(1, th[0]);
  };
  spec.diffusion = [sigma](const Segment&, const EmpiricalMeasure&) {
    return Matrix::Constant(1, 1, sigma);
  };
  spec.drift_jacobian = [](const Segment&, const EmpiricalMeasure&, const ThetaPoint&) {
    return Matrix::Constant(1, 1, 1.0);
  };
  return spec;
}

/// dX = theta^2 g(X) dt with g(zeta) = 1 + sin(zeta(0))^2, sigma = 1.
/// No Jacobian or Hessian callbacks: the library differentiates numerically.
inline ModelSpec quadratic_model() {
  ModelSpec spec;
  spec.dims = {1, 1, 1};
  spec.theta_box = ThetaBox(vec({0.1}), vec({3.0}));
  spec.xi = [](double s) { return Vector::Constant(1, 0.5 + s); };
  spec.drift = [](const Segment& z, const EmpiricalMeasure&, const ThetaPoint& th) {
    const double g = 1.0 + std::pow(std::sin(z.head()[0]), 2);
    return Vector::Constant(1, th[0] * th[0] * g);
  };
  spec.diffusion = [](const Segment&, const EmpiricalMeasure&) {
    return Matrix::Constant(1, 1, 1.0);
  };
  return spec;
}

}  // namespace mvsde::testing
