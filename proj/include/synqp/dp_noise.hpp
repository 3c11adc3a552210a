// Copyright 2026 The synqp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "synqp/error.hpp"
#include "synqp/parallel.hpp"
#include "synqp/rng.hpp"
#include "synqp/table.hpp"

namespace synqp {

// How the second Laplace argument is read: `stddev` treats it as the noise
// standard deviation (scale = sigma / sqrt 2); `scale` uses it directly.
enum class LaplaceParam { stddev, scale };

inline std::optional<LaplaceParam> parse_laplace_param(std::string_view s) {
  if (s == "stddev") return LaplaceParam::stddev;
  if (s == "scale") return LaplaceParam::scale;
  return std::nullopt;
}

constexpr std::string_view to_string(LaplaceParam p) {
  return p == LaplaceParam::stddev ? "stddev" : "scale";
}

struct ColumnStats {
  double mean = 0.0;
  double stddev = 0.0;
};

struct DpConfig {
  double epsilon_dp = 0.0;
  // Empty selects every numeric non-target column.
  std::vector<std::string> columns;
  std::map<std::string, ColumnStats> stats_override;
  LaplaceParam laplace_param = LaplaceParam::stddev;
  std::uint64_t seed = 0;
};

inline double laplace_scale(double sigma, LaplaceParam param) {
  return param == LaplaceParam::stddev ? sigma / std::sqrt(2.0) : sigma;
}

// Inverse-CDF Laplace draw for u in (0, 1).
inline double laplace_inverse_cdf(double location, double scale, double u) {
  const double d = u - 0.5;
  const double sign = d < 0 ? -1.0 : (d > 0 ? 1.0 : 0.0);
  return location - scale * sign * std::log(1.0 - 2.0 * std::abs(d));
}

// (1 - eps) * x + eps * Laplace(mu, b), u in (0, 1). eps == 0 returns x
// unchanged.
inline double dp_perturb_value(double x, double epsilon_dp, double mu, double sigma, double u,
                               LaplaceParam param = LaplaceParam::stddev) {
  if (epsilon_dp == 0.0) return x;
  const double noise = laplace_inverse_cdf(mu, laplace_scale(sigma, param), u);
  return (1.0 - epsilon_dp) * x + epsilon_dp * noise;
}

// Mean and sample standard deviation (0 for fewer than two rows).
inline ColumnStats column_stats(const std::vector<double>& v) {
  ColumnStats s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

inline std::vector<std::size_t> dp_selected_columns(const Table& table, const DpConfig& config) {
  std::vector<std::size_t> out;
  const auto& schema = table.schema();
  if (config.columns.empty()) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (schema[c].role != ColumnRole::target && is_numeric_dtype(schema[c].dtype)) out.push_back(c);
    }
    return out;
  }
  for (const auto& name : config.columns) {
    const auto c = schema.index_of(name);
    if (!is_numeric_dtype(schema[c].dtype)) {
      throw Error(Errc::non_numeric_column, "cannot perturb a non-numeric column", name);
    }
    out.push_back(c);
  }
  return out;
}

// Perturbs each selected cell independently. Cell (r, c) uses counter r of
// the stream named after column c. Integer columns are rounded and clamped
// to the column's observed range so the output still validates.
inline Table dp_perturb_table(const Table& table, const DpConfig& config) {
  if (!(config.epsilon_dp >= 0.0 && config.epsilon_dp <= 1.0)) {
    throw Error(Errc::config_error, "epsilon_dp must lie in [0, 1]");
  }
  const auto selected = dp_selected_columns(table, config);
  if (config.epsilon_dp == 0.0) return table;
  const Stream root = Stream(config.seed).child("dp");
  std::vector<ColumnData> columns;
  for (std::size_t c = 0; c < table.cols(); ++c) columns.push_back(table.column(c));
  for (auto c : selected) {
    const auto& spec = table.schema()[c];
    const auto values = table.numeric_column(c);
    if (values.empty()) continue;
    ColumnStats stats = column_stats(values);
    if (auto it = config.stats_override.find(spec.name); it != config.stats_override.end()) {
      stats = it->second;
    }
    if (!(stats.stddev >= 0.0)) throw Error(Errc::config_error, "negative stddev", spec.name);
    const Stream stream = root.child(spec.name);
    std::vector<double> out(values.size());
    parallel_for(values.size(), [&](std::size_t r) {
      out[r] = dp_perturb_value(values[r], config.epsilon_dp, stats.mean, stats.stddev,
                                stream.open_uniform(r), config.laplace_param);
    });
    if (spec.dtype == Dtype::integer) {
      const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      std::vector<std::int64_t> ints(out.size());
      for (std::size_t r = 0; r < out.size(); ++r) {
        ints[r] = static_cast<std::int64_t>(std::clamp(std::round(out[r]), *lo, *hi));
      }
      columns[c] = std::move(ints);
    } else {
      columns[c] = std::move(out);
    }
  }
  return Table(table.schema(), std::move(columns));
}

}  // namespace synqp
