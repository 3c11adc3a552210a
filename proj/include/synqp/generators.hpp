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

// Built-in reference synthesizers: an independent-marginal sampler and a
// classical Gaussian copula over normal scores of the numeric columns.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "synqp/error.hpp"
#include "synqp/parallel.hpp"
#include "synqp/rng.hpp"
#include "synqp/table.hpp"

namespace synqp {

enum class GeneratorKind { independent, gaussian_copula };

constexpr std::string_view to_string(GeneratorKind k) {
  return k == GeneratorKind::independent ? "independent" : "gaussian_copula";
}

inline std::optional<GeneratorKind> parse_generator_kind(std::string_view s) {
  if (s == "independent") return GeneratorKind::independent;
  if (s == "gaussian_copula") return GeneratorKind::gaussian_copula;
  return std::nullopt;
}

struct GeneratorOptions {
  // Linear interpolation between order statistics instead of reusing
  // observed values.
  bool interpolate = false;
};

struct NumericMarginal {
  std::size_t column;
  std::vector<double> sorted;
};

struct CategoricalMarginal {
  std::size_t column;
  std::vector<Cell> categories;
  std::vector<std::size_t> counts;
  std::vector<double> cumulative;
};

struct GeneratorModel {
  GeneratorKind kind = GeneratorKind::independent;
  GeneratorOptions options;
  Schema schema;
  std::vector<NumericMarginal> numeric;
  std::vector<CategoricalMarginal> categorical;
  // Copula only: correlation of normal scores (after repair) and its
  // Cholesky factor, ordered as `numeric`.
  Eigen::MatrixXd correlation;
  Eigen::MatrixXd cholesky;
  bool repaired = false;
};

// 1-based ranks with ties sharing their mean rank.
inline std::vector<double> mid_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

// Phi^-1((rank - 0.5) / n) per value.
inline std::vector<double> normal_scores(const std::vector<double>& v) {
  const auto ranks = mid_ranks(v);
  const double n = static_cast<double>(v.size());
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = normal_quantile((ranks[i] - 0.5) / n);
  return out;
}

// Pearson correlation; 0 when either side has no variance.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(mid_ranks(x), mid_ranks(y));
}

// Floors eigenvalues at 1e-10 when the matrix is not positive definite
// enough for a Cholesky factor, then rescales to unit diagonal. Returns
// whether a repair was applied.
inline bool repair_correlation(Eigen::MatrixXd& c) {
  constexpr double kFloor = 1e-10;
  if (c.rows() == 0) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.eigenvalues().minCoeff() >= kFloor) return false;
  Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(kFloor);
  Eigen::MatrixXd r = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::VectorXd d = r.diagonal().cwiseSqrt();
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.cols(); ++j) {
      r(i, j) = i == j ? 1.0 : std::clamp(r(i, j) / (d(i) * d(j)), -1.0, 1.0);
    }
  }
  c = 0.5 * (r + r.transpose());
  return true;
}

inline GeneratorModel fit(const Table& train, GeneratorKind kind, GeneratorOptions options = {}) {
  if (train.rows() == 0) throw Error(Errc::empty_training_set, "cannot fit on an empty table");
  GeneratorModel model;
  model.kind = kind;
  model.options = options;
  model.schema = train.schema();
  for (std::size_t c = 0; c < train.cols(); ++c) {
    if (is_numeric_role(train.schema()[c].role)) {
      auto v = train.numeric_column(c);
      std::sort(v.begin(), v.end());
      model.numeric.push_back({c, std::move(v)});
    } else {
      std::map<Cell, std::size_t> freq;
      for (std::size_t r = 0; r < train.rows(); ++r) ++freq[train.cell(r, c)];
      CategoricalMarginal m{c, {}, {}, {}};
      double acc = 0;
      for (const auto& [value, count] : freq) {
        m.categories.push_back(value);
        m.counts.push_back(count);
        acc += static_cast<double>(count);
        m.cumulative.push_back(acc / static_cast<double>(train.rows()));
      }
      model.categorical.push_back(std::move(m));
    }
  }
  if (kind == GeneratorKind::gaussian_copula) {
    const auto d = static_cast<Eigen::Index>(model.numeric.size());
    std::vector<std::vector<double>> scores;
    for (const auto& m : model.numeric) scores.push_back(normal_scores(train.numeric_column(m.column)));
    model.correlation = Eigen::MatrixXd::Identity(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = i + 1; j < d; ++j) {
        const double r = pearson(scores[i], scores[j]);
        model.correlation(i, j) = r;
        model.correlation(j, i) = r;
      }
    }
    model.repaired = repair_correlation(model.correlation);
    Eigen::LLT<Eigen::MatrixXd> llt(model.correlation);
    if (llt.info() != Eigen::Success) {
      throw Error(Errc::config_error, "correlation matrix has no Cholesky factor");
    }
    model.cholesky = llt.matrixL();
  }
  return model;
}

// Inverse empirical CDF at q in [0, 1]: order statistic ceil(q n) - 1, or
// linear interpolation between order statistics.
inline double empirical_quantile(const std::vector<double>& sorted, double q, bool interpolate) {
  const std::size_t n = sorted.size();
  if (interpolate) {
    const double h = std::clamp(q, 0.0, 1.0) * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= n) return sorted[n - 1];
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
  }
  const double pos = std::ceil(q * static_cast<double>(n)) - 1.0;
  const auto idx = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(n - 1)));
  return sorted[idx];
}

// Row r reads counters derived from r only, so rows can be produced in any
// order and in parallel.
inline Table generate(const GeneratorModel& model, std::size_t rows, std::uint64_t seed) {
  const Stream root = Stream(seed).child("generate");
  const auto& schema = model.schema;
  std::vector<std::vector<double>> numeric_out(model.numeric.size(), std::vector<double>(rows));
  std::vector<std::vector<std::size_t>> cat_out(model.categorical.size(),
                                                std::vector<std::size_t>(rows));
  const Stream copula = root.child("copula");
  const auto d = static_cast<Eigen::Index>(model.numeric.size());
  parallel_for(rows, [&](std::size_t r) {
    if (model.kind == GeneratorKind::gaussian_copula && d > 0) {
      Eigen::VectorXd g(d);
      for (Eigen::Index j = 0; j < d; ++j) {
        g(j) = normal_quantile(copula.child(static_cast<std::uint64_t>(j)).open_uniform(r));
      }
      const Eigen::VectorXd z = model.cholesky * g;
      for (Eigen::Index j = 0; j < d; ++j) {
        numeric_out[j][r] = empirical_quantile(model.numeric[j].sorted, normal_cdf(z(j)),
                                               model.options.interpolate);
      }
    } else {
      for (std::size_t j = 0; j < model.numeric.size(); ++j) {
        const Stream s = root.child(schema[model.numeric[j].column].name);
        numeric_out[j][r] =
            empirical_quantile(model.numeric[j].sorted, s.uniform(r), model.options.interpolate);
      }
    }
    for (std::size_t j = 0; j < model.categorical.size(); ++j) {
      const Stream s = root.child(schema[model.categorical[j].column].name);
      cat_out[j][r] = inverse_cdf_index(model.categorical[j].cumulative, s.uniform(r));
    }
  });
  std::vector<ColumnData> columns(schema.size());
  for (std::size_t j = 0; j < model.numeric.size(); ++j) {
    const auto c = model.numeric[j].column;
    if (schema[c].dtype == Dtype::integer) {
      std::vector<std::int64_t> v(rows);
      for (std::size_t r = 0; r < rows; ++r) v[r] = static_cast<std::int64_t>(std::round(numeric_out[j][r]));
      columns[c] = std::move(v);
    } else {
      columns[c] = std::move(numeric_out[j]);
    }
  }
  for (std::size_t j = 0; j < model.categorical.size(); ++j) {
    const auto& m = model.categorical[j];
    columns[m.column] = std::visit(
        [&](const auto& first) -> ColumnData {
          using T = std::decay_t<decltype(first)>;
          std::vector<T> v(rows);
          for (std::size_t r = 0; r < rows; ++r) v[r] = std::get<T>(m.categories[cat_out[j][r]]);
          return v;
        },
        m.categories.front());
  }
  return Table(schema, std::move(columns));
}

}  // namespace synqp
