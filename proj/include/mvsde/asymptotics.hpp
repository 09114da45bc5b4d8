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

// Small-noise limit objects along the deterministic path X0.
//
// Wherever a law appears it is the Dirac at the current window of X0.
// Deterministic integrals use the composite trapezoid rule on the fine ODE
// grid; the stochastic integral uses left-point (Ito) sums.
//
//   Xi(theta)  = int_0^T L^T sh L dt,              L = b(theta0) - b(theta)
//   I(theta)   = int_0^T (grad b)^T sh (grad b) ds
//   K(theta)   = -2 int_0^T (grad^2 b^T) o (sh L) ds
//   K0(theta)  = K(theta) + 2 I(theta)
//   Ups(z)     = (grad b)^T sh sigma                (p x m)
//
// with sh = (sigma sigma^T)^{-1}.  For A = (A_1 .. A_p), A_k in R^{p x d},
// and B in R^d, A o B = (A_1 B, ..., A_p B) in R^{p x p}.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvsde/errors.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/model.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/segment_path.hpp"
#include "mvsde/simulator.hpp"

namespace mvsde {

/// X0 on the fine grid delta/F, with its windows and Dirac laws cached.
class LimitPath {
 public:
  LimitPath(const ModelSpec& spec, const Grid& grid, const ThetaPoint& theta0,
            std::size_t fine_factor)
      : ode_(solve_limit_ode(spec, grid.refined(fine_factor), theta0, 1)) {
    nodes_.reserve(ode_.n_steps() + 1);
    laws_.reserve(ode_.n_steps() + 1);
    for (std::size_t j = 0; j <= ode_.n_steps(); ++j) {
      nodes_.push_back(segment_at(ode_, j));
      laws_.push_back(spec.prepare(EmpiricalMeasure::dirac(nodes_.back())));
    }
  }

  const TrajectoryRecord& ode() const noexcept { return ode_; }
  /// Quadrature step.
  double step() const noexcept { return ode_.grid().delta(); }
  std::size_t nodes() const noexcept { return nodes_.size(); }
  const Segment& window(std::size_t j) const { return nodes_.at(j); }
  const EmpiricalMeasure& law(std::size_t j) const { return laws_.at(j); }

 private:
  TrajectoryRecord ode_;
  std::vector<Segment> nodes_;
  std::vector<EmpiricalMeasure> laws_;
};

/// Composite trapezoid of a matrix-valued integrand over the path's nodes.
template <class F>
Matrix trapezoid(const LimitPath& path, F&& integrand) {
  const std::size_t n = path.nodes();
  Matrix acc = 0.5 * integrand(std::size_t{0});
  for (std::size_t j = 1; j + 1 < n; ++j) acc += integrand(j);
  acc += 0.5 * integrand(n - 1);
  return acc * path.step();
}

/// b(zeta, mu, theta0) - b(zeta, mu, theta)
inline Vector lambda_mismatch(const ModelSpec& spec, const Segment& seg,
                              const EmpiricalMeasure& mu, const ThetaPoint& theta,
                              const ThetaPoint& theta0) {
  return spec.drift(seg, mu, theta0) - spec.drift(seg, mu, theta);
}

inline double capital_xi(const ModelSpec& spec, const LimitPath& path, const ThetaPoint& theta,
                         const ThetaPoint& theta0) {
  const Matrix v = trapezoid(path, [&](std::size_t j) {
    const Vector l = lambda_mismatch(spec, path.window(j), path.law(j), theta, theta0);
    return Matrix::Constant(1, 1, l.dot(sigma_hat(spec, path.window(j), path.law(j)) * l));
  });
  return v(0, 0);
}

inline Matrix information_matrix(const ModelSpec& spec, const LimitPath& path,
                                 const ThetaPoint& theta) {
  const Matrix i = trapezoid(path, [&](std::size_t j) -> Matrix {
    const Matrix g = grad_theta_drift(spec, path.window(j), path.law(j), theta);
    return g.transpose() * sigma_hat(spec, path.window(j), path.law(j)) * g;
  });
  return 0.5 * (i + i.transpose());
}

/// A o B for A in R^{p x (p d)} and B in R^d.
inline Matrix circ_product(const Matrix& a, const Vector& b) {
  const auto d = b.size();
  const auto p = a.rows();
  if (a.cols() != p * d) throw std::invalid_argument("circ_product: shape mismatch");
  Matrix out(p, p);
  for (Eigen::Index k = 0; k < p; ++k) out.col(k) = a.block(0, k * d, p, d) * b;
  return out;
}

inline Matrix k_matrix(const ModelSpec& spec, const LimitPath& path, const ThetaPoint& theta,
                       const ThetaPoint& theta0) {
  return -2.0 * trapezoid(path, [&](std::size_t j) -> Matrix {
    const Segment& z = path.window(j);
    const EmpiricalMeasure& mu = path.law(j);
    const Vector weighted = sigma_hat(spec, z, mu) * lambda_mismatch(spec, z, mu, theta, theta0);
    return circ_product(hess_theta_drift(spec, z, mu, theta), weighted);
  });
}

inline Matrix k0_matrix(const ModelSpec& spec, const LimitPath& path, const ThetaPoint& theta,
                        const ThetaPoint& theta0) {
  return k_matrix(spec, path, theta, theta0) + 2.0 * information_matrix(spec, path, theta);
}

/// p x m integrand of the limiting stochastic integral.
inline Matrix upsilon(const ModelSpec& spec, const Segment& seg, const EmpiricalMeasure& mu,
                      const ThetaPoint& theta0) {
  const Matrix s = spec.diffusion(seg, mu);
  return grad_theta_drift(spec, seg, mu, theta0).transpose() * inverse_gram(s * s.transpose()) *
         s;
}

/// V = int Ups Ups^T ds
inline Matrix noise_covariance(const ModelSpec& spec, const LimitPath& path,
                               const ThetaPoint& theta0) {
  return trapezoid(path, [&](std::size_t j) -> Matrix {
    const Matrix u = upsilon(spec, path.window(j), path.law(j), theta0);
    return u * u.transpose();
  });
}

/// I^{-1}, rejecting information matrices with condition number >= 1e10.
inline Matrix checked_inverse_information(const Matrix& info) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(info, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo >= 1e10) {
    throw SingularInformation("information matrix at theta0 is singular (condition >= 1e10)");
  }
  Matrix inv = info.ldlt().solve(Matrix::Identity(info.rows(), info.cols()));
  return 0.5 * (inv + inv.transpose());
}

/// Covariance of the limit law, I^{-1} V I^{-1}.
inline Matrix limit_covariance(const ModelSpec& spec, const LimitPath& path,
                               const ThetaPoint& theta0) {
  const Matrix inv = checked_inverse_information(information_matrix(spec, path, theta0));
  return inv * noise_covariance(spec, path, theta0) * inv;
}

/// Draws of I^{-1}(theta0) sum_j Ups(X0_{s_j}) dB_j on the fine grid.
/// Sample i uses noise stream i, so draws do not depend on n_samples.
inline std::vector<Vector> sample_limit_law(const ModelSpec& spec, const LimitPath& path,
                                            const ThetaPoint& theta0, std::size_t n_samples,
                                            std::uint64_t rng_seed) {
  const Matrix inv = checked_inverse_information(information_matrix(spec, path, theta0));
  const std::size_t steps = path.nodes() - 1;
  std::vector<Matrix> ups;
  ups.reserve(steps);
  for (std::size_t j = 0; j < steps; ++j) {
    ups.push_back(inv * upsilon(spec, path.window(j), path.law(j), theta0));
  }
  const auto m = static_cast<Eigen::Index>(spec.dims.m);
  const auto p = inv.rows();
  const double scale = std::sqrt(path.step());
  const NormalStream stream(rng_seed);
  std::vector<double> z(static_cast<std::size_t>(m));
  std::vector<Vector> out;
  out.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    Vector acc = Vector::Zero(p);
    for (std::size_t j = 0; j < steps; ++j) {
      stream.fill(static_cast<std::uint32_t>(i), j, z);
      acc += ups[j] * (scale * Eigen::Map<const Vector>(z.data(), m));
    }
    out.push_back(std::move(acc));
  }
  return out;
}

struct AsymptoticReport {
  double xi_of_theta = 0.0;
  Matrix i_matrix;
  Matrix k_matrix;
  Matrix k0_matrix;
  std::size_t quadrature_nodes = 0;
  std::string quadrature_rule = "composite-trapezoid";
};

inline AsymptoticReport asymptotic_report(const ModelSpec& spec, const LimitPath& path,
                                          const ThetaPoint& theta, const ThetaPoint& theta0) {
  AsymptoticReport r;
  r.xi_of_theta = capital_xi(spec, path, theta, theta0);
  r.i_matrix = information_matrix(spec, path, theta);
  r.k_matrix = k_matrix(spec, path, theta, theta0);
  r.k0_matrix = r.k_matrix + 2.0 * r.i_matrix;
  r.quadrature_nodes = path.nodes();
  return r;
}

}  // namespace mvsde
