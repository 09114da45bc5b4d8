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

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "mvsde/model.hpp"
#include "support.hpp"

namespace mvsde {
namespace {

using testing::example_model;
using testing::scalar_segment;
using testing::vec;

Segment random_segment(std::mt19937_64& gen, std::size_t points, std::size_t dim = 1) {
  std::normal_distribution<double> nd;
  std::vector<double> v(points * dim);
  for (double& x : v) x = nd(gen);
  return Segment(std::move(v), dim);
}

EmpiricalMeasure random_measure(std::mt19937_64& gen, std::size_t n, std::size_t points) {
  std::vector<Segment> atoms;
  for (std::size_t i = 0; i < n; ++i) atoms.push_back(random_segment(gen, points));
  return EmpiricalMeasure(atoms);
}

ModelSpec constant_diffusion_model(Matrix sigma) {
  ModelSpec spec;
  spec.dims = {static_cast<std::size_t>(sigma.rows()), static_cast<std::size_t>(sigma.cols()), 1};
  spec.theta_box = ThetaBox(vec({0.0}), vec({1.0}));
  spec.xi = [d = sigma.rows()](double) { return Vector::Zero(d); };
  spec.drift = [d = sigma.rows()](const Segment&, const EmpiricalMeasure&, const ThetaPoint&) {
    return Vector::Zero(d);
  };
  spec.diffusion = [sigma](const Segment&, const EmpiricalMeasure&) { return sigma; };
  return spec;
}

TEST(SigmaHat, Identity) {
  const ModelSpec spec = constant_diffusion_model(Matrix::Identity(3, 3));
  const Segment z = Segment::constant(Vector::Zero(3), 2);
  EXPECT_TRUE(sigma_hat(spec, z, EmpiricalMeasure::dirac(z)).isApprox(Matrix::Identity(3, 3)));
}

TEST(SigmaHat, ExampleAtOne) {
  const ModelSpec spec = example_model();
  const Segment z = scalar_segment({0.3, 1.0});
  EXPECT_DOUBLE_EQ(sigma_hat(spec, z, EmpiricalMeasure::dirac(z))(0, 0), 0.25);
}

TEST(SigmaHat, RectangularNoiseAgainstDenseSolve) {
  std::mt19937_64 gen(12);
  std::normal_distribution<double> nd;
  Matrix s(3, 4);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = nd(gen);
  const ModelSpec spec = constant_diffusion_model(s);
  const Segment z = Segment::constant(Vector::Zero(3), 1);
  const Matrix w = sigma_hat(spec, z, EmpiricalMeasure::dirac(z));
  const Matrix gram = s * s.transpose();
  const Matrix expected = gram.fullPivLu().solve(Matrix::Identity(3, 3));
  EXPECT_LT((w - expected).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((w * gram - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SigmaHat, SingularDiffusionIsReported) {
  Matrix s(2, 2);
  s << 1, 2, 2, 4;
  const ModelSpec spec = constant_diffusion_model(s);
  const Segment z = Segment::constant(Vector::Zero(2), 1);
  EXPECT_THROW(sigma_hat(spec, z, EmpiricalMeasure::dirac(z)), SingularDiffusion);
  const ModelSpec wide = constant_diffusion_model(Matrix::Ones(2, 1));
  EXPECT_THROW(sigma_hat(wide, z, EmpiricalMeasure::dirac(z)), SingularDiffusion);
}

TEST(GradTheta, ExampleColumns) {
  const ModelSpec spec = example_model();
  const Segment z = scalar_segment({0.4, 0.9});
  const EmpiricalMeasure mu = spec.prepare(
      EmpiricalMeasure({scalar_segment({0, 0.1}), scalar_segment({1, -0.7})}));
  const Matrix g = grad_theta_drift(spec, z, mu, vec({1.0, 0.5}));
  EXPECT_EQ(g(0, 0), 1.0);
  const double integral = std::sin(0.4) + 0.5 * (std::cos(0.1) + std::cos(-0.7));
  EXPECT_NEAR(g(0, 1), integral, 1e-15);
}

TEST(GradTheta, AnalyticAgainstFiniteDifferences) {
  std::mt19937_64 gen(2026);
  std::uniform_real_distribution<double> ud(0.0, 2.0);
  for (const char* kernel : {"sincos", "state", "zero"}) {
    const ModelSpec spec = example_model(kernel);
    ModelSpec numeric = spec;
    numeric.drift_jacobian = nullptr;
    for (int trial = 0; trial < 200; ++trial) {
      const Segment z = random_segment(gen, 6);
      const EmpiricalMeasure mu = spec.prepare(random_measure(gen, 4, 6));
      const ThetaPoint th = vec({ud(gen), ud(gen)});
      const Matrix a = grad_theta_drift(spec, z, mu, th);
      const Matrix f = grad_theta_drift(numeric, z, mu, th);
      EXPECT_LE((a - f).cwiseAbs().maxCoeff(), 1e-5) << kernel;
    }
  }
}

TEST(GradTheta, DriftWithoutThetaHasZeroGradient) {
  ModelSpec spec = constant_diffusion_model(Matrix::Identity(1, 1));
  spec.drift = [](const Segment& z, const EmpiricalMeasure&, const ThetaPoint&) {
    return Vector::Constant(1, std::cos(z.head()[0]));
  };
  const Segment z = scalar_segment({0, 1});
  EXPECT_EQ(grad_theta_drift(spec, z, EmpiricalMeasure::dirac(z), vec({0.5}))(0, 0), 0.0);
}

TEST(GradTheta, SquareOfTheta) {
  ModelSpec spec = constant_diffusion_model(Matrix::Identity(1, 1));
  spec.drift = [](const Segment&, const EmpiricalMeasure&, const ThetaPoint& t) {
    return Vector::Constant(1, t[0] * t[0]);
  };
  const Segment z = scalar_segment({0, 1});
  EXPECT_NEAR(grad_theta_drift(spec, z, EmpiricalMeasure::dirac(z), vec({3.0}))(0, 0), 6.0, 1e-8);
  EXPECT_NEAR(hess_theta_drift(spec, z, EmpiricalMeasure::dirac(z), vec({3.0}))(0, 0), 2.0, 1e-5);
}

TEST(HessTheta, BlockLayoutForVectorDrift) {
  // b = (t1^2 t2, t1 t2^3): block k holds d^2 b_j / dt_k dt_i at (i, j).
  ModelSpec spec = constant_diffusion_model(Matrix::Identity(2, 2));
  spec.dims.p = 2;
  spec.theta_box = ThetaBox(vec({0, 0}), vec({3, 3}));
  spec.drift = [](const Segment&, const EmpiricalMeasure&, const ThetaPoint& t) {
    return vec({t[0] * t[0] * t[1], t[0] * t[1] * t[1] * t[1]});
  };
  const Segment z = Segment::constant(Vector::Zero(2), 1);
  const double a = 1.3, b = 0.7;
  const Matrix h = hess_theta_drift(spec, z, EmpiricalMeasure::dirac(z), vec({a, b}));
  ASSERT_EQ(h.rows(), 2);
  ASSERT_EQ(h.cols(), 4);
  Matrix expected(2, 4);
  // k = 1: rows i = 1, 2; columns j = 1, 2
  expected(0, 0) = 2 * b;     expected(0, 1) = 0;
  expected(1, 0) = 2 * a;     expected(1, 1) = 3 * b * b;
  // k = 2
  expected(0, 2) = 2 * a;     expected(0, 3) = 3 * b * b;
  expected(1, 2) = 0;         expected(1, 3) = 6 * a * b;
  EXPECT_LT((h - expected).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(ExampleModel, DriftValues) {
  const ModelSpec zero = example_model("zero");
  const Segment z = scalar_segment({0.2, -0.4});
  const EmpiricalMeasure dz = zero.prepare(EmpiricalMeasure::dirac(z));
  EXPECT_EQ(zero.drift(z, dz, vec({1.25, 1.9}))[0], 1.25);

  const ModelSpec state = example_model("state");
  const Segment c = Segment::constant(Vector::Constant(1, 0.6), 3);
  const EmpiricalMeasure dc = state.prepare(EmpiricalMeasure::dirac(c));
  EXPECT_DOUBLE_EQ(state.drift(c, dc, vec({0.5, 2.0}))[0], 0.5 + 2.0 * 0.6);

  const ModelSpec sc = example_model("sincos");
  const EmpiricalMeasure ds = sc.prepare(EmpiricalMeasure::dirac(z));
  EXPECT_DOUBLE_EQ(sc.drift(z, ds, vec({1.0, 0.5}))[0],
                   1.0 + 0.5 * (std::sin(0.2) + std::cos(-0.4)));
  EXPECT_DOUBLE_EQ(sc.diffusion(z, ds)(0, 0), 1.4);
}

TEST(ExampleModel, SummaryMatchesDirectIntegral) {
  std::mt19937_64 gen(8);
  const ModelSpec spec = example_model();
  const EmpiricalMeasure raw = random_measure(gen, 9, 5);
  const EmpiricalMeasure prepared = spec.prepare(raw);
  const Segment z = random_segment(gen, 5);
  EXPECT_NEAR(spec.drift(z, raw, vec({0.3, 1.7}))[0], spec.drift(z, prepared, vec({0.3, 1.7}))[0],
              1e-14);
}

TEST(ExampleModel, AffineSuperposition) {
  std::mt19937_64 gen(14);
  std::uniform_real_distribution<double> ud(0.0, 2.0);
  const ModelSpec spec = example_model();
  for (int trial = 0; trial < 50; ++trial) {
    const Segment z = random_segment(gen, 4);
    const EmpiricalMeasure mu = spec.prepare(random_measure(gen, 3, 4));
    const ThetaPoint a = vec({ud(gen), ud(gen)}), b = vec({ud(gen), ud(gen)});
    const double s = ud(gen) / 2.0;
    const ThetaPoint zero = vec({0, 0});
    const double lhs = spec.drift(z, mu, s * a + (1 - s) * b)[0];
    const double rhs = s * spec.drift(z, mu, a)[0] + (1 - s) * spec.drift(z, mu, b)[0];
    EXPECT_NEAR(lhs, rhs, 1e-13);
    EXPECT_NEAR(spec.drift(z, mu, a)[0],
                spec.drift(z, mu, zero)[0] + (grad_theta_drift(spec, z, mu, a) * a)[0], 1e-13);
  }
}

TEST(ThetaBox, InteriorClosureAndProjection) {
  const ThetaBox box(vec({0, 0}), vec({2, 2}));
  EXPECT_TRUE(box.in_interior(vec({1, 1})));
  EXPECT_FALSE(box.in_interior(vec({0, 1})));
  EXPECT_TRUE(box.in_closure(vec({0, 2})));
  EXPECT_FALSE(box.in_closure(vec({-0.1, 1})));
  EXPECT_EQ(box.project(vec({-1, 3})), vec({0, 2}));
  EXPECT_EQ(box.center(), vec({1, 1}));
  EXPECT_THROW(ThetaBox(vec({0, 1}), vec({1, 1})), std::invalid_argument);
  EXPECT_THROW(ThetaBox(vec({0}), vec({1, 1})), std::invalid_argument);
}

TEST(LipschitzProbe, ConstantCoefficientsGiveZero) {
  ModelSpec spec = constant_diffusion_model(Matrix::Identity(1, 1));
  spec.drift = [](const Segment&, const EmpiricalMeasure&, const ThetaPoint& t) {
    return Vector::Constant(1, t[0]);
  };
  const auto r = lipschitz_probe(spec, 500, 1);
  EXPECT_EQ(r.alpha1_hat, 0.0);
  EXPECT_EQ(r.alpha2_hat, 0.0);
  EXPECT_EQ(r.beta1_hat, 0.0);
  EXPECT_EQ(r.beta2_hat, 0.0);
  EXPECT_EQ(r.L1_hat, 0.0);
  EXPECT_EQ(r.samples, 500u);
}

TEST(LipschitzProbe, HeadDriftHasUnitConstant) {
  ModelSpec spec = constant_diffusion_model(Matrix::Identity(1, 1));
  spec.drift = [](const Segment& z, const EmpiricalMeasure&, const ThetaPoint&) {
    return Vector::Constant(1, z.head()[0]);
  };
  const auto r = lipschitz_probe(spec, 10000, 3);
  EXPECT_GE(r.alpha1_hat, 0.9);
  EXPECT_LE(r.alpha1_hat, 1.0 + 1e-12);
}

TEST(LipschitzProbe, ExampleRatiosWithinTheoreticalBound) {
  // |b(z1) - b(z2)| <= theta2 ||z1 - z2|| and |b(mu) - b(nu)| <= theta2 W2 since
  // sin and cos are 1-Lipschitz; sigma = 1 + |z(0)| is 1-Lipschitz in z.
  const ModelSpec spec = example_model();
  const auto r = lipschitz_probe(spec, 4000, 20260101);
  EXPECT_LE(r.alpha1_hat, 2.0 * 1.01);
  EXPECT_LE(r.alpha2_hat, 2.0 * 1.01);
  EXPECT_LE(r.beta1_hat, 1.0 * 1.01);
  EXPECT_EQ(r.beta2_hat, 0.0);
  EXPECT_GT(r.alpha1_hat, 0.0);

  const ModelSpec unit = build_example_model(named_kernel("sincos"),
                                             ThetaBox(vec({0.0, 0.0}), vec({1.0, 1.0})),
                                             [](double s) { return Vector::Constant(1, 1 + s); });
  const auto u = lipschitz_probe(unit, 4000, 20260101);
  EXPECT_LE(std::max(u.alpha1_hat, u.alpha2_hat), 1.05);
}

TEST(NamedKernel, UnknownNameThrows) {
  EXPECT_THROW(named_kernel("gaussian"), std::invalid_argument);
}

}  // namespace
}  // namespace mvsde
