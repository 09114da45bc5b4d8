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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "mvsde/assignment.hpp"
#include "mvsde/measure.hpp"
#include "support.hpp"

namespace mvsde {
namespace {

using testing::scalar_segment;

std::vector<Segment> random_atoms(std::mt19937_64& gen, std::size_t n, std::size_t points,
                                  std::size_t dim) {
  std::normal_distribution<double> nd;
  std::vector<Segment> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(points * dim);
    for (double& x : v) x = nd(gen);
    out.emplace_back(std::move(v), dim);
  }
  return out;
}

// W2 by enumerating every coupling permutation.
double brute_force_w2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  std::vector<std::size_t> perm(mu.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      const auto a = mu.atom(i).values();
      const auto b = nu.atom(perm[i]).values();
      const std::size_t d = mu.atom(i).dim();
      double worst = 0.0;
      for (std::size_t k = 0; k < a.size(); k += d) {
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) sq += (a[k + c] - b[k + c]) * (a[k + c] - b[k + c]);
        worst = std::max(worst, sq);
      }
      cost += worst;
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(mu.size()));
}

TEST(Integrate, ConstantAndHeadMean) {
  const EmpiricalMeasure mu({scalar_segment({0, 1}), scalar_segment({0, 2}), scalar_segment({0, 3})});
  EXPECT_DOUBLE_EQ(integrate(mu, [](const Segment&) { return 1.0; }), 1.0);
  EXPECT_DOUBLE_EQ(integrate(mu, [](const Segment& s) { return s.head()[0]; }), 2.0);
  const Eigen::VectorXd v =
      integrate(mu, [](const Segment& s) { return Eigen::VectorXd(s.head() * 2.0); });
  EXPECT_DOUBLE_EQ(v[0], 4.0);
}

TEST(Integrate, DiracEvaluates) {
  const auto mu = EmpiricalMeasure::dirac(scalar_segment({1.5, -0.25}));
  EXPECT_EQ(integrate(mu, [](const Segment& s) { return s.tail()[0] * 3.0; }), 4.5);
}

TEST(Integrate, Linearity) {
  std::mt19937_64 gen(5);
  const EmpiricalMeasure mu(random_atoms(gen, 17, 4, 2));
  auto f = [](const Segment& s) { return std::sin(s.value(1, 0)); };
  auto g = [](const Segment& s) { return s.value(3, 1) * s.value(0, 0); };
  const double a = 1.7, b = -0.3;
  EXPECT_NEAR(integrate(mu, [&](const Segment& s) { return a * f(s) + b * g(s); }),
              a * integrate(mu, f) + b * integrate(mu, g), 1e-14);
}

TEST(SecondMoment, Examples) {
  EXPECT_EQ(second_moment(EmpiricalMeasure::dirac(scalar_segment({0, 0}))), 0.0);
  EXPECT_DOUBLE_EQ(second_moment(EmpiricalMeasure({scalar_segment({1, -1}), scalar_segment({3, 0})})),
                   5.0);
  EXPECT_DOUBLE_EQ(second_moment(EmpiricalMeasure::dirac(scalar_segment({-2, -2, -2}))), 4.0);
}

TEST(Wasserstein, IdenticalMeasuresAreAtZeroDistance) {
  std::mt19937_64 gen(9);
  const EmpiricalMeasure mu(random_atoms(gen, 5, 3, 1));
  EXPECT_EQ(wasserstein2(mu, mu), 0.0);
}

TEST(Wasserstein, SingleAtomsGiveSupDistance) {
  const auto a = scalar_segment({0, 1, 2});
  const auto b = scalar_segment({0.5, -1, 2});
  EXPECT_DOUBLE_EQ(wasserstein2(EmpiricalMeasure::dirac(a), EmpiricalMeasure::dirac(b)), 2.0);
}

TEST(Wasserstein, ShiftedCopy) {
  std::mt19937_64 gen(21);
  auto atoms = random_atoms(gen, 3, 4, 1);
  std::vector<Segment> shifted;
  for (const auto& s : atoms) shifted.push_back(s + Segment::constant(Eigen::VectorXd::Constant(1, 0.7), 3));
  EXPECT_NEAR(wasserstein2(EmpiricalMeasure(atoms), EmpiricalMeasure(shifted)), 0.7, 1e-12);
}

TEST(Wasserstein, MatchesPermutationBruteForce) {
  std::mt19937_64 gen(20260101);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t dim = 1 + static_cast<std::size_t>(trial % 2);
      const EmpiricalMeasure mu(random_atoms(gen, n, 4, dim));
      const EmpiricalMeasure nu(random_atoms(gen, n, 4, dim));
      EXPECT_NEAR(wasserstein2(mu, nu), brute_force_w2(mu, nu), 1e-12) << "N = " << n;
    }
  }
}

TEST(Wasserstein, MetricAxioms) {
  std::mt19937_64 gen(33);
  for (int trial = 0; trial < 100; ++trial) {
    const EmpiricalMeasure a(random_atoms(gen, 4, 3, 1));
    const EmpiricalMeasure b(random_atoms(gen, 4, 3, 1));
    const EmpiricalMeasure c(random_atoms(gen, 4, 3, 1));
    const double ab = wasserstein2(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(ab, wasserstein2(b, a), 1e-12);
    EXPECT_LE(wasserstein2(a, c), ab + wasserstein2(b, c) + 1e-12);
  }
}

TEST(Wasserstein, DistanceToZeroIsRootSecondMoment) {
  std::mt19937_64 gen(41);
  const auto atoms = random_atoms(gen, 5, 4, 2);
  const std::vector<Segment> zeros(5, Segment::constant(Eigen::VectorXd::Zero(2), 3));
  const EmpiricalMeasure mu(atoms);
  const double w = wasserstein2(mu, EmpiricalMeasure(zeros));
  EXPECT_NEAR(w * w, second_moment(mu), 1e-12);
}

TEST(Wasserstein, RejectsMismatchedMeasures) {
  const EmpiricalMeasure one = EmpiricalMeasure::dirac(scalar_segment({0, 1}));
  const EmpiricalMeasure two({scalar_segment({0, 1}), scalar_segment({1, 1})});
  const EmpiricalMeasure longer = EmpiricalMeasure::dirac(scalar_segment({0, 1, 2}));
  EXPECT_THROW(wasserstein2(one, two), std::invalid_argument);
  EXPECT_THROW(wasserstein2(one, longer), std::invalid_argument);
  EXPECT_THROW(EmpiricalMeasure({scalar_segment({0, 1}), scalar_segment({0, 1, 2})}),
               std::invalid_argument);
  EXPECT_THROW(EmpiricalMeasure(std::vector<Segment>{}), std::invalid_argument);
}

TEST(Assignment, MatchesBruteForce) {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> ud(0.0, 10.0);
  for (int n = 1; n <= 7; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::MatrixXd c(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) c(i, j) = ud(gen);
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      double best = std::numeric_limits<double>::infinity();
      do {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += c(i, perm[static_cast<std::size_t>(i)]);
        best = std::min(best, s);
      } while (std::next_permutation(perm.begin(), perm.end()));
      const Assignment a = solve_assignment(c);
      EXPECT_NEAR(a.total_cost, best, 1e-9);
      double check = 0.0;
      std::vector<bool> used(static_cast<std::size_t>(n), false);
      for (int i = 0; i < n; ++i) {
        const auto j = a.column_of_row[static_cast<std::size_t>(i)];
        EXPECT_FALSE(used[j]);
        used[j] = true;
        check += c(i, static_cast<Eigen::Index>(j));
      }
      EXPECT_NEAR(check, a.total_cost, 1e-9);
    }
  }
}

}  // namespace
}  // namespace mvsde
