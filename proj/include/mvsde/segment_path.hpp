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

// Paths on a uniform grid and their memory-window (segment) processes.
//
// A path is stored as its knot values at times (-M..n)*delta.  A segment is a
// window of M+1 consecutive knots; the continuous function it stands for is
// the piecewise-linear interpolant, so knots are a lossless representation
// and the sup-norm over knots is exact.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mvsde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ConstPoint = Eigen::Map<const Eigen::VectorXd>;

/// Uniform time grid.  Times are integer step counts against one delta.
class Grid {
 public:
  Grid() = default;
  Grid(double delta, std::size_t n_steps, std::size_t memory_steps)
      : delta_(delta), n_steps_(n_steps), memory_steps_(memory_steps) {
    if (!(delta > 0.0) || !std::isfinite(delta)) {
      throw std::invalid_argument("Grid: delta must be positive and finite");
    }
    if (n_steps < 1) throw std::invalid_argument("Grid: n_steps must be >= 1");
    if (memory_steps < 1) {
      throw std::invalid_argument("Grid: memory_steps must be >= 1");
    }
  }

  double delta() const noexcept { return delta_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  std::size_t memory_steps() const noexcept { return memory_steps_; }

  double horizon() const noexcept { return static_cast<double>(n_steps_) * delta_; }
  double memory() const noexcept { return static_cast<double>(memory_steps_) * delta_; }

  /// Time of step k; k may be negative (history).
  double time(std::ptrdiff_t k) const noexcept { return static_cast<double>(k) * delta_; }

  /// Total number of stored knots on [-r0, T].
  std::size_t path_points() const noexcept { return memory_steps_ + n_steps_ + 1; }

  /// Same horizon and memory with delta/factor.
  Grid refined(std::size_t factor) const {
    if (factor < 1) throw std::invalid_argument("Grid::refined: factor must be >= 1");
    return Grid(delta_ / static_cast<double>(factor), n_steps_ * factor,
                memory_steps_ * factor);
  }

  bool operator==(const Grid&) const = default;

 private:
  double delta_ = 1.0;
  std::size_t n_steps_ = 1;
  std::size_t memory_steps_ = 1;
};

/// M+1 knot values of a function on [-r0, 0] in R^d.
///
/// Either owns its values or is a window into a shared path buffer; in both
/// cases the viewed values never change after construction.
class Segment {
 public:
  Segment() = default;

  /// Owning segment from row-major knots: values[i*dim + c].
  Segment(std::vector<double> values, std::size_t dim)
      : dim_(dim), offset_(0) {
    if (dim == 0) throw std::invalid_argument("Segment: dim must be >= 1");
    if (values.size() % dim != 0 || values.size() / dim < 2) {
      throw std::invalid_argument("Segment: need at least two knots of full dimension");
    }
    points_ = values.size() / dim;
    storage_ = std::make_shared<const std::vector<double>>(std::move(values));
  }

  /// Window of `points` knots starting at knot `first_point` of `buffer`.
  static Segment window(std::shared_ptr<const std::vector<double>> buffer,
                        std::size_t first_point, std::size_t points,
                        std::size_t dim) {
    if (!buffer || (first_point + points) * dim > buffer->size()) {
      throw std::out_of_range("Segment::window: window exceeds buffer");
    }
    Segment s;
    s.storage_ = std::move(buffer);
    s.offset_ = first_point * dim;
    s.points_ = points;
    s.dim_ = dim;
    return s;
  }

  /// Constant segment equal to `value` at every knot.
  static Segment constant(const Vector& value, std::size_t memory_steps) {
    std::vector<double> v;
    v.reserve((memory_steps + 1) * static_cast<std::size_t>(value.size()));
    for (std::size_t i = 0; i <= memory_steps; ++i) {
      v.insert(v.end(), value.data(), value.data() + value.size());
    }
    return Segment(std::move(v), static_cast<std::size_t>(value.size()));
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return points_; }
  std::size_t memory_steps() const noexcept { return points_ - 1; }

  std::span<const double> values() const noexcept {
    return {storage_->data() + offset_, points_ * dim_};
  }

  /// Knot i, i.e. the value at s = -r0 + i*delta.
  ConstPoint point(std::size_t i) const noexcept {
    return ConstPoint(storage_->data() + offset_ + i * dim_,
                      static_cast<Eigen::Index>(dim_));
  }

  double value(std::size_t i, std::size_t c = 0) const noexcept {
    return (*storage_)[offset_ + i * dim_ + c];
  }

  /// zeta(0)
  ConstPoint head() const noexcept { return point(points_ - 1); }
  /// zeta(-r0)
  ConstPoint tail() const noexcept { return point(0); }

  /// Linear interpolant at fractional knot position x in [0, M].
  Vector interpolate(double x) const {
    const double clamped = std::clamp(x, 0.0, static_cast<double>(points_ - 1));
    auto i = static_cast<std::size_t>(std::floor(clamped));
    if (i >= points_ - 1) return point(points_ - 1);
    const double w = clamped - static_cast<double>(i);
    return (1.0 - w) * point(i) + w * point(i + 1);
  }

  bool same_shape(const Segment& other) const noexcept {
    return dim_ == other.dim_ && points_ == other.points_;
  }

  Segment operator-(const Segment& other) const { return combine(other, -1.0); }
  Segment operator+(const Segment& other) const { return combine(other, 1.0); }
  Segment scaled(double a) const {
    std::vector<double> v(values().begin(), values().end());
    for (double& x : v) x *= a;
    return Segment(std::move(v), dim_);
  }

 private:
  Segment combine(const Segment& other, double sign) const {
    if (!same_shape(other)) throw std::invalid_argument("Segment: shape mismatch");
    auto a = values();
    auto b = other.values();
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i] + sign * b[i];
    return Segment(std::move(v), dim_);
  }

  std::shared_ptr<const std::vector<double>> storage_;
  std::size_t dim_ = 0;
  std::size_t offset_ = 0;
  std::size_t points_ = 0;
};

/// Max over knots of the Euclidean norm.
inline double sup_norm(const Segment& seg) {
  double best = 0.0;
  for (std::size_t i = 0; i < seg.size(); ++i) best = std::max(best, seg.point(i).norm());
  return best;
}

/// sup-norm of the difference of two same-shape segments, without allocating.
inline double sup_distance(const Segment& a, const Segment& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("sup_distance: shape mismatch");
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    best = std::max(best, (a.point(i) - b.point(i)).norm());
  }
  return best;
}

/// Observed path: history on [-r0, 0] followed by observations at t_1..t_n.
///
/// Knot j of the buffer is the value at time (j - M)*delta, so knot M is
/// both the last history value and observation 0.
class TrajectoryRecord {
 public:
  TrajectoryRecord() = default;

  /// From a full knot buffer of grid.path_points() points.
  TrajectoryRecord(Grid grid, std::size_t dim,
                   std::shared_ptr<const std::vector<double>> path)
      : grid_(grid), dim_(dim), path_(std::move(path)) {
    if (dim_ == 0) throw std::invalid_argument("TrajectoryRecord: dim must be >= 1");
    if (!path_ || path_->size() != grid_.path_points() * dim_) {
      throw std::invalid_argument("TrajectoryRecord: buffer length does not match grid");
    }
  }

  /// From a history segment and n+1 observations (row-major).
  TrajectoryRecord(Grid grid, const Segment& history, std::span<const double> observations)
      : grid_(grid), dim_(history.dim()) {
    if (history.size() != grid.memory_steps() + 1) {
      throw std::invalid_argument("TrajectoryRecord: history length must be M+1");
    }
    if (observations.size() != (grid.n_steps() + 1) * dim_) {
      throw std::invalid_argument("TrajectoryRecord: need n+1 observations");
    }
    for (std::size_t c = 0; c < dim_; ++c) {
      if (observations[c] != history.head()[static_cast<Eigen::Index>(c)]) {
        throw std::invalid_argument(
            "TrajectoryRecord: observations[0] must equal the history value at 0");
      }
    }
    auto buf = std::make_shared<std::vector<double>>();
    buf->reserve(grid.path_points() * dim_);
    auto h = history.values();
    buf->insert(buf->end(), h.begin(), h.end());
    buf->insert(buf->end(), observations.begin() + static_cast<std::ptrdiff_t>(dim_),
                observations.end());
    path_ = std::move(buf);
  }

  const Grid& grid() const noexcept { return grid_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t n_steps() const noexcept { return grid_.n_steps(); }

  Segment history() const {
    return Segment::window(path_, 0, grid_.memory_steps() + 1, dim_);
  }

  /// X(t_k), 0 <= k <= n.
  ConstPoint observation(std::size_t k) const {
    if (k > grid_.n_steps()) throw std::out_of_range("TrajectoryRecord::observation");
    return knot(grid_.memory_steps() + k);
  }

  /// Knot j of the full path, time (j - M)*delta.
  ConstPoint knot(std::size_t j) const noexcept {
    return ConstPoint(path_->data() + j * dim_, static_cast<Eigen::Index>(dim_));
  }

  std::span<const double> path_values() const noexcept { return *path_; }
  const std::shared_ptr<const std::vector<double>>& buffer() const noexcept { return path_; }

  /// Every `factor`-th knot; the grid becomes delta*factor.
  TrajectoryRecord subsampled(std::size_t factor) const {
    if (factor < 1 || grid_.n_steps() % factor != 0 || grid_.memory_steps() % factor != 0) {
      throw std::invalid_argument("TrajectoryRecord::subsampled: factor must divide n and M");
    }
    Grid coarse(grid_.delta() * static_cast<double>(factor), grid_.n_steps() / factor,
                grid_.memory_steps() / factor);
    auto buf = std::make_shared<std::vector<double>>();
    buf->reserve(coarse.path_points() * dim_);
    for (std::size_t j = 0; j < grid_.path_points(); j += factor) {
      buf->insert(buf->end(), path_->begin() + static_cast<std::ptrdiff_t>(j * dim_),
                  path_->begin() + static_cast<std::ptrdiff_t>((j + 1) * dim_));
    }
    return TrajectoryRecord(coarse, dim_, std::move(buf));
  }

 private:
  Grid grid_;
  std::size_t dim_ = 0;
  std::shared_ptr<const std::vector<double>> path_;
};

/// The window segment at t_k: knots Y((k-M)delta), ..., Y(k delta).
///
/// Knots coincide with observation times, so the piecewise-linear
/// reconstruction between grid points is carried exactly by the knots.
inline Segment segment_at(const TrajectoryRecord& traj, std::size_t k) {
  if (k > traj.n_steps()) {
    throw std::out_of_range("segment_at: step " + std::to_string(k) + " exceeds n = " +
                            std::to_string(traj.n_steps()));
  }
  return Segment::window(traj.buffer(), k, traj.grid().memory_steps() + 1, traj.dim());
}

/// ||segment_at(traj, k)|| <= 2 sup_{-r0 <= s <= k delta} |Y(s)|.
inline bool segment_sup_bound_check(const TrajectoryRecord& traj, std::size_t k) {
  const double seg = sup_norm(segment_at(traj, k));
  double running = 0.0;
  for (std::size_t j = 0; j <= traj.grid().memory_steps() + k; ++j) {
    running = std::max(running, traj.knot(j).norm());
  }
  return seg <= 2.0 * running;
}

}  // namespace mvsde
