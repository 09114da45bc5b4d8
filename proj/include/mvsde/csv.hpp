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

// CSV in/out: RFC-4180 quoting, UTF-8, '.' decimal separator, shortest
// round-trip formatting of doubles.

#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mvsde/segment_path.hpp"

namespace mvsde::csv {

/// Shortest decimal string that parses back to exactly `x`.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc{}) throw std::runtime_error("format_double: to_chars failed");
  return std::string(buf, end);
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  return x;
}

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) {
      throw std::invalid_argument("csv::Table: row width does not match header");
    }
    rows.push_back(std::move(row));
  }
};

inline void write(std::ostream& os, const Table& t) {
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) os << ',';
      os << quote(fields[i]);
    }
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

inline std::string to_string(const Table& t) {
  std::ostringstream os;
  write(os, t);
  return os.str();
}

/// Parse RFC-4180 text; the first record is the header.
inline Table read(std::istream& is) {
  Table t;
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false, field_started = false;
  char c;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    if (field_started || !record.empty()) {
      end_field();
      records.push_back(std::move(record));
      record.clear();
    }
  };
  while (is.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (is.peek() == '"') {
          is.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"': in_quotes = true; field_started = true; break;
      case ',': end_field(); break;
      case '\r': break;
      case '\n': end_record(); break;
      default: field += c; field_started = true;
    }
  }
  if (in_quotes) throw std::invalid_argument("csv: unterminated quoted field");
  end_record();
  if (records.empty()) throw std::invalid_argument("csv: empty input");
  t.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != t.header.size()) {
      throw std::invalid_argument("csv: record " + std::to_string(i + 1) + " has " +
                                  std::to_string(records[i].size()) + " fields, expected " +
                                  std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Trajectory files: one row per knot, step = -M..n, columns step,time,x_1..x_d.

inline Table trajectory_table(const TrajectoryRecord& traj) {
  Table t;
  t.header = {"step", "time"};
  for (std::size_t c = 0; c < traj.dim(); ++c) t.header.push_back("x_" + std::to_string(c + 1));
  const auto mem = static_cast<std::ptrdiff_t>(traj.grid().memory_steps());
  for (std::size_t j = 0; j < traj.grid().path_points(); ++j) {
    const std::ptrdiff_t step = static_cast<std::ptrdiff_t>(j) - mem;
    std::vector<std::string> row{std::to_string(step), format_double(traj.grid().time(step))};
    const auto x = traj.knot(j);
    for (Eigen::Index c = 0; c < x.size(); ++c) row.push_back(format_double(x[c]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Inverse of trajectory_table; delta is recovered as time(n) / n.
inline TrajectoryRecord trajectory_from_table(const Table& t) {
  if (t.header.size() < 3 || t.header[0] != "step" || t.header[1] != "time") {
    throw std::invalid_argument("trajectory csv: header must be step,time,x_1,...");
  }
  const std::size_t dim = t.header.size() - 2;
  if (t.rows.size() < 3) throw std::invalid_argument("trajectory csv: too few rows");
  std::vector<long long> steps;
  std::vector<double> values;
  values.reserve(t.rows.size() * dim);
  for (const auto& r : t.rows) {
    steps.push_back(std::stoll(r[0]));
    for (std::size_t c = 0; c < dim; ++c) values.push_back(parse_double(r[2 + c]));
  }
  const long long first = steps.front();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] != first + static_cast<long long>(i)) {
      throw std::invalid_argument("trajectory csv: steps must be consecutive");
    }
  }
  if (first >= 0 || steps.back() < 1) {
    throw std::invalid_argument("trajectory csv: need history rows (step < 0) and n >= 1");
  }
  const auto mem = static_cast<std::size_t>(-first);
  const auto n = static_cast<std::size_t>(steps.back());
  const double delta = parse_double(t.rows.back()[1]) / static_cast<double>(n);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double expected = static_cast<double>(steps[i]) * delta;
    if (std::abs(parse_double(t.rows[i][1]) - expected) > 1e-9 * std::max(1.0, std::abs(expected))) {
      throw std::invalid_argument("trajectory csv: times are not on a uniform grid");
    }
  }
  return TrajectoryRecord(Grid(delta, n, mem), dim,
                          std::make_shared<const std::vector<double>>(std::move(values)));
}

}  // namespace mvsde::csv
