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

// Path-distribution dependent models
//
//   dX(t) = b(X_t, Law(X_t), theta) dt + eps * sigma(X_t, Law(X_t)) dB(t),
//
// with X_0 = xi on [-r0, 0].  Coefficients are user callbacks and must be
// pure: the simulator and estimator call them concurrently.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mvsde/errors.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/segment_path.hpp"

namespace mvsde {

using ThetaPoint = Vector;

using DriftFn = std::function<Vector(const Segment&, const EmpiricalMeasure&, const ThetaPoint&)>;
using DiffusionFn = std::function<Matrix(const Segment&, const EmpiricalMeasure&)>;
/// d x p, row i = d b_i / d theta.
using DriftJacobianFn =
    std::function<Matrix(const Segment&, const EmpiricalMeasure&, const ThetaPoint&)>;
/// p x (p*d): block k (p x d) holds d/d theta_k of (grad_theta b)^T.
using DriftHessianFn =
    std::function<Matrix(const Segment&, const EmpiricalMeasure&, const ThetaPoint&)>;
using MeasureSummaryFn = std::function<std::vector<double>(const EmpiricalMeasure&)>;
/// xi(s) for s in [-r0, 0].
using InitialPathFn = std::function<Vector(double)>;

struct ModelDims {
  std::size_t d = 1;  // state
  std::size_t m = 1;  // noise
  std::size_t p = 1;  // parameter
};

/// Axis-aligned parameter box; Theta is the open box, optimizers work on its closure.
class ThetaBox {
 public:
  ThetaBox() = default;
  ThetaBox(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size() || lower_.size() == 0) {
      throw std::invalid_argument("ThetaBox: bounds must be non-empty and of equal length");
    }
    for (Eigen::Index j = 0; j < lower_.size(); ++j) {
      if (!(lower_[j] < upper_[j])) {
        throw std::invalid_argument("ThetaBox: need lower < upper in every coordinate");
      }
    }
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(lower_.size()); }
  const Vector& lower() const noexcept { return lower_; }
  const Vector& upper() const noexcept { return upper_; }
  Vector center() const { return 0.5 * (lower_ + upper_); }
  Vector width() const { return upper_ - lower_; }

  bool in_closure(const ThetaPoint& t) const {
    return t.size() == lower_.size() && (t.array() >= lower_.array()).all() &&
           (t.array() <= upper_.array()).all();
  }
  bool in_interior(const ThetaPoint& t) const {
    return t.size() == lower_.size() && (t.array() > lower_.array()).all() &&
           (t.array() < upper_.array()).all();
  }
  ThetaPoint project(const ThetaPoint& t) const { return t.cwiseMax(lower_).cwiseMin(upper_); }

  bool operator==(const ThetaBox& o) const { return lower_ == o.lower_ && upper_ == o.upper_; }

 private:
  Vector lower_;
  Vector upper_;
};

struct ModelSpec {
  std::string name = "custom";
  ModelDims dims;
  DriftFn drift;
  DiffusionFn diffusion;
  DriftJacobianFn drift_jacobian;  // empty: finite differences
  DriftHessianFn drift_hessian;    // empty: finite differences
  MeasureSummaryFn summarize;      // empty: drift integrates the measure itself
  ThetaBox theta_box;
  InitialPathFn xi;
  /// b(zeta, mu, theta) = b(zeta, mu, 0) + G(zeta, mu) theta exactly.
  bool affine_in_theta = false;

  /// xi sampled at the knots of `grid`'s memory window.
  Segment initial_segment(const Grid& grid) const {
    const std::size_t mem = grid.memory_steps();
    std::vector<double> v;
    v.reserve((mem + 1) * dims.d);
    for (std::size_t i = 0; i <= mem; ++i) {
      const double s = grid.time(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(mem));
      const Vector x = xi(s);
      if (static_cast<std::size_t>(x.size()) != dims.d) {
        throw std::invalid_argument("ModelSpec: initial datum has wrong dimension");
      }
      v.insert(v.end(), x.data(), x.data() + x.size());
    }
    return Segment(std::move(v), dims.d);
  }

  /// Attach this model's measure summary, if it defines one.
  EmpiricalMeasure prepare(EmpiricalMeasure mu) const {
    if (!summarize) return mu;
    auto s = summarize(mu);
    return mu.with_summary(std::move(s));
  }
};

/// (sigma sigma^T)^{-1} from a d x d Gram matrix.
inline Matrix inverse_gram(const Matrix& gram) {
  const Eigen::Index d = gram.rows();
  if (d == 1) {
    const double g = gram(0, 0);
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw SingularDiffusion("sigma sigma^T is not positive definite");
    }
    return Matrix::Constant(1, 1, 1.0 / g);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw SingularDiffusion("sigma sigma^T is singular or has condition number above 1e12");
  }
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw SingularDiffusion("Cholesky factorization of sigma sigma^T failed");
  }
  Matrix inv = llt.solve(Matrix::Identity(d, d));
  return 0.5 * (inv + inv.transpose());
}

/// sigma_hat = (sigma sigma^T)^{-1} at (seg, mu).
inline Matrix sigma_hat(const ModelSpec& spec, const Segment& seg, const EmpiricalMeasure& mu) {
  const Matrix s = spec.diffusion(seg, mu);
  return inverse_gram(s * s.transpose());
}

/// grad_theta b: analytic when supplied, else central differences with
/// h = 1e-5 * max(1, |theta_j|).
inline Matrix grad_theta_drift(const ModelSpec& spec, const Segment& seg,
                               const EmpiricalMeasure& mu, const ThetaPoint& theta) {
  if (spec.drift_jacobian) return spec.drift_jacobian(seg, mu, theta);
  const auto p = theta.size();
  Matrix jac(static_cast<Eigen::Index>(spec.dims.d), p);
  ThetaPoint t = theta;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(theta[j]));
    t[j] = theta[j] + h;
    const Vector up = spec.drift(seg, mu, t);
    t[j] = theta[j] - h;
    const Vector down = spec.drift(seg, mu, t);
    t[j] = theta[j];
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

/// Second theta-derivative of b^T in p x (p*d) block layout: block k holds
/// entries d^2 b_j / (d theta_k d theta_i) at (i, j).  Falls back to central
/// differences with h = 1e-4 * max(1, |theta_k|).
inline Matrix hess_theta_drift(const ModelSpec& spec, const Segment& seg,
                               const EmpiricalMeasure& mu, const ThetaPoint& theta) {
  if (spec.drift_hessian) return spec.drift_hessian(seg, mu, theta);
  const auto p = theta.size();
  const auto d = static_cast<Eigen::Index>(spec.dims.d);
  Matrix out(p, p * d);
  ThetaPoint t = theta;
  if (spec.drift_jacobian) {
    for (Eigen::Index k = 0; k < p; ++k) {
      const double h = 1e-4 * std::max(1.0, std::abs(theta[k]));
      t[k] = theta[k] + h;
      const Matrix up = spec.drift_jacobian(seg, mu, t);
      t[k] = theta[k] - h;
      const Matrix down = spec.drift_jacobian(seg, mu, t);
      t[k] = theta[k];
      out.block(0, k * d, p, d) = ((up - down) / (2.0 * h)).transpose();
    }
    return out;
  }
  const Vector centre = spec.drift(seg, mu, theta);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double hk = 1e-4 * std::max(1.0, std::abs(theta[k]));
    for (Eigen::Index i = 0; i < p; ++i) {
      Vector second(d);
      if (i == k) {
        t[k] = theta[k] + hk;
        const Vector up = spec.drift(seg, mu, t);
        t[k] = theta[k] - hk;
        const Vector down = spec.drift(seg, mu, t);
        t[k] = theta[k];
        second = (up - 2.0 * centre + down) / (hk * hk);
      } else {
        const double hi = 1e-4 * std::max(1.0, std::abs(theta[i]));
        auto eval = [&](double sk, double si) {
          t[k] = theta[k] + sk * hk;
          t[i] = theta[i] + si * hi;
          Vector v = spec.drift(seg, mu, t);
          t[k] = theta[k];
          t[i] = theta[i];
          return v;
        };
        second = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * hk * hi);
      }
      out.block(i, k * d, 1, d) = second.transpose();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scalar example with an interaction kernel b0:
//
//   b(zeta, mu, theta) = theta_1 + theta_2 * int b0(zeta, zeta') mu(d zeta')
//   sigma(zeta, mu)    = 1 + |zeta(0)|

/// b0(zeta, zeta').  When `self_part`/`other_part` are set the kernel is
/// separable, b0(z, z') = self_part(z) + other_part(z'), and the measure
/// integral reduces to a per-measure mean that is computed once.
struct InteractionKernel {
  std::string name;
  std::function<double(const Segment&, const Segment&)> b0;
  std::function<double(const Segment&)> self_part;
  std::function<double(const Segment&)> other_part;

  bool separable() const noexcept { return self_part && other_part; }
};

/// Named kernels: "sincos", "zero", "state".
inline InteractionKernel named_kernel(const std::string& name) {
  InteractionKernel k;
  k.name = name;
  if (name == "sincos") {
    k.self_part = [](const Segment& z) { return std::sin(z.tail()[0]); };
    k.other_part = [](const Segment& z) { return std::cos(z.head()[0]); };
  } else if (name == "zero") {
    k.self_part = [](const Segment&) { return 0.0; };
    k.other_part = [](const Segment&) { return 0.0; };
  } else if (name == "state") {
    k.self_part = [](const Segment&) { return 0.0; };
    k.other_part = [](const Segment& z) { return z.head()[0]; };
  } else {
    throw std::invalid_argument("unknown interaction kernel '" + name + "'");
  }
  k.b0 = [self = k.self_part, other = k.other_part](const Segment& a, const Segment& b) {
    return self(a) + other(b);
  };
  return k;
}

/// int b0(zeta, zeta') mu(d zeta'), using the measure summary when present.
inline double kernel_integral(const InteractionKernel& kernel, const Segment& seg,
                              const EmpiricalMeasure& mu) {
  if (kernel.separable() && mu.has_summary()) return kernel.self_part(seg) + mu.summary()[0];
  return integrate(mu, [&](const Segment& other) { return kernel.b0(seg, other); });
}

inline ModelSpec build_example_model(InteractionKernel kernel, ThetaBox box,
                                     InitialPathFn xi) {
  if (!kernel.b0) throw std::invalid_argument("build_example_model: kernel has no b0");
  if (box.dim() != 2) throw std::invalid_argument("build_example_model: Theta must be 2-d");
  ModelSpec spec;
  spec.name = "example";
  spec.dims = {1, 1, 2};
  spec.theta_box = std::move(box);
  spec.xi = std::move(xi);
  spec.affine_in_theta = true;

  auto k = std::make_shared<const InteractionKernel>(std::move(kernel));
  spec.drift = [k](const Segment& z, const EmpiricalMeasure& mu, const ThetaPoint& th) {
    return Vector::Constant(1, th[0] + th[1] * kernel_integral(*k, z, mu));
  };
  spec.diffusion = [](const Segment& z, const EmpiricalMeasure&) {
    return Matrix::Constant(1, 1, 1.0 + std::abs(z.head()[0]));
  };
  spec.drift_jacobian = [k](const Segment& z, const EmpiricalMeasure& mu, const ThetaPoint&) {
    Matrix g(1, 2);
    g << 1.0, kernel_integral(*k, z, mu);
    return g;
  };
  spec.drift_hessian = [](const Segment&, const EmpiricalMeasure&, const ThetaPoint&) {
    return Matrix::Zero(2, 2);
  };
  if (k->separable()) {
    spec.summarize = [k](const EmpiricalMeasure& mu) {
      return std::vector<double>{integrate(mu, k->other_part)};
    };
  }
  return spec;
}

// ---------------------------------------------------------------------------

/// Empirical lower bounds on the Lipschitz ratios of b, sigma and
/// (sigma sigma^T)^{-1}.  Advisory only.
struct LipschitzProbeReport {
  double alpha1_hat = 0.0;  // |b(z1,mu) - b(z2,mu)| / ||z1 - z2||
  double alpha2_hat = 0.0;  // |b(z,mu) - b(z,nu)| / W2(mu,nu)
  double beta1_hat = 0.0;   // same for sigma, Hilbert-Schmidt norm
  double beta2_hat = 0.0;
  double L1_hat = 0.0;      // ||sh(z1,mu) - sh(z2,nu)|| / (||z1-z2|| + W2)
  std::size_t samples = 0;
  std::size_t skipped_singular = 0;
};

inline LipschitzProbeReport lipschitz_probe(const ModelSpec& spec, std::size_t n_samples,
                                            std::uint64_t rng_seed,
                                            std::size_t memory_steps = 8,
                                            std::size_t atoms = 3) {
  if (n_samples < 2) throw std::invalid_argument("lipschitz_probe: need n_samples >= 2");
  const std::size_t d = spec.dims.d;
  const std::size_t knots = (memory_steps + 1) * d;
  const NormalStream normals(rng_seed);
  const std::size_t p = spec.theta_box.dim();

  auto random_segment = [&](std::uint32_t stream, std::uint64_t tag) {
    std::vector<double> v(knots);
    normals.fill(stream, tag, v);
    return Segment(std::move(v), d);
  };
  auto perturbed = [&](const Segment& base, std::uint32_t stream, std::uint64_t tag) {
    std::vector<double> v(knots);
    normals.fill(stream, tag, v);
    const double scale = std::pow(10.0, -3.0 * normals.uniform(stream, tag));
    auto b = base.values();
    for (std::size_t i = 0; i < knots; ++i) v[i] = b[i] + scale * v[i];
    return Segment(std::move(v), d);
  };

  LipschitzProbeReport r;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto tag = static_cast<std::uint64_t>(s) * 64;
    ThetaPoint theta(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
      const double u = normals.uniform(static_cast<std::uint32_t>(j), tag);
      theta[static_cast<Eigen::Index>(j)] =
          spec.theta_box.lower()[static_cast<Eigen::Index>(j)] +
          u * spec.theta_box.width()[static_cast<Eigen::Index>(j)];
    }
    const Segment z1 = random_segment(0, tag + 1);
    const Segment z2 = perturbed(z1, 1, tag + 2);
    std::vector<Segment> mu_atoms, nu_atoms;
    for (std::size_t a = 0; a < atoms; ++a) {
      mu_atoms.push_back(random_segment(2, tag + 3 + a));
      nu_atoms.push_back(perturbed(mu_atoms.back(), 3, tag + 3 + a));
    }
    const EmpiricalMeasure mu = spec.prepare(EmpiricalMeasure(mu_atoms));
    const EmpiricalMeasure nu = spec.prepare(EmpiricalMeasure(nu_atoms));
    const double dz = sup_distance(z1, z2);
    const double w2 = wasserstein2(mu, nu);

    const Vector b11 = spec.drift(z1, mu, theta);
    const Vector b21 = spec.drift(z2, mu, theta);
    const Vector b12 = spec.drift(z1, nu, theta);
    if (dz > 0.0) r.alpha1_hat = std::max(r.alpha1_hat, (b11 - b21).norm() / dz);
    if (w2 > 0.0) r.alpha2_hat = std::max(r.alpha2_hat, (b11 - b12).norm() / w2);

    const Matrix s11 = spec.diffusion(z1, mu);
    const Matrix s21 = spec.diffusion(z2, mu);
    const Matrix s12 = spec.diffusion(z1, nu);
    if (dz > 0.0) r.beta1_hat = std::max(r.beta1_hat, (s11 - s21).norm() / dz);
    if (w2 > 0.0) r.beta2_hat = std::max(r.beta2_hat, (s11 - s12).norm() / w2);

    try {
      const Matrix h1 = inverse_gram(s11 * s11.transpose());
      const Matrix s22 = spec.diffusion(z2, nu);
      const Matrix h2 = inverse_gram(s22 * s22.transpose());
      if (dz + w2 > 0.0) r.L1_hat = std::max(r.L1_hat, (h1 - h2).norm() / (dz + w2));
    } catch (const SingularDiffusion&) {
      ++r.skipped_singular;
    }
    ++r.samples;
  }
  return r;
}

}  // namespace mvsde
