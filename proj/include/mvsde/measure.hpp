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

// Equal-weight empirical measures on segment space.

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

#include "mvsde/assignment.hpp"
#include "mvsde/segment_path.hpp"

namespace mvsde {

/// Uniform probability measure over N segments sharing one shape.
///
/// A measure may carry a `summary`: model-specific statistics computed once
/// (see ModelSpec::summarize) so that drift evaluations against the same
/// measure do not repeat an O(N) integral for every atom.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;

  explicit EmpiricalMeasure(std::vector<Segment> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw std::invalid_argument("EmpiricalMeasure: need N >= 1 atoms");
    for (const auto& a : atoms_) {
      if (!a.same_shape(atoms_.front())) {
        throw std::invalid_argument("EmpiricalMeasure: atoms must share grid and dimension");
      }
    }
  }

  static EmpiricalMeasure dirac(Segment atom) {
    return EmpiricalMeasure(std::vector<Segment>{std::move(atom)});
  }

  /// Copy of this measure carrying `summary`.
  EmpiricalMeasure with_summary(std::vector<double> summary) const {
    EmpiricalMeasure m = *this;
    m.summary_ = std::move(summary);
    return m;
  }

  std::size_t size() const noexcept { return atoms_.size(); }
  const Segment& atom(std::size_t i) const { return atoms_[i]; }
  const std::vector<Segment>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& summary() const noexcept { return summary_; }
  bool has_summary() const noexcept { return !summary_.empty(); }

 private:
  std::vector<Segment> atoms_;
  std::vector<double> summary_;
};

/// (1/N) sum_i f(atom_i), summed in atom order.
template <class F>
auto integrate(const EmpiricalMeasure& mu, F&& f) {
  using R = std::decay_t<decltype(f(mu.atom(0)))>;
  const double w = 1.0 / static_cast<double>(mu.size());
  if constexpr (std::is_arithmetic_v<R>) {
    double acc = 0.0;
    for (const auto& a : mu.atoms()) acc += f(a);
    return acc * w;
  } else {
    Eigen::VectorXd acc = f(mu.atom(0));
    for (std::size_t i = 1; i < mu.size(); ++i) acc += f(mu.atom(i));
    return Eigen::VectorXd(acc * w);
  }
}

/// (1/N) sum_i ||atom_i||^2
inline double second_moment(const EmpiricalMeasure& mu) {
  return integrate(mu, [](const Segment& s) {
    const double r = sup_norm(s);
    return r * r;
  });
}

/// N x N matrix of squared sup-norm distances between atoms.
inline Eigen::MatrixXd transport_costs(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  const auto n = static_cast<Eigen::Index>(mu.size());
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = sup_distance(mu.atom(static_cast<std::size_t>(i)),
                                    nu.atom(static_cast<std::size_t>(j)));
      cost(i, j) = d * d;
    }
  }
  return cost;
}

/// Exact W2 between same-size empirical measures under the segment sup-norm.
///
/// For equal weights the Kantorovich optimum is attained by a permutation,
/// so an assignment solve on squared distances is exact.
inline double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.size() != nu.size()) {
    throw std::invalid_argument("wasserstein2: measures must have equal atom counts");
  }
  if (!mu.atom(0).same_shape(nu.atom(0))) {
    throw std::invalid_argument("wasserstein2: measures live on different grids");
  }
  const Assignment a = solve_assignment(transport_costs(mu, nu));
  return std::sqrt(std::max(0.0, a.total_cost / static_cast<double>(mu.size())));
}

}  // namespace mvsde
