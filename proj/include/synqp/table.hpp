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
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <unordered_set>
#include <variant>
#include <vector>

#include "synqp/error.hpp"
#include "synqp/rng.hpp"

namespace synqp {

enum class ColumnRole {
  quasi_categorical,
  quasi_numeric,
  data_categorical,
  data_numeric,
  target,
};

enum class Dtype { integer, real, string };

constexpr std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::quasi_categorical: return "quasi_categorical";
    case ColumnRole::quasi_numeric: return "quasi_numeric";
    case ColumnRole::data_categorical: return "data_categorical";
    case ColumnRole::data_numeric: return "data_numeric";
    case ColumnRole::target: return "target";
  }
  return "";
}

constexpr std::string_view to_string(Dtype dtype) {
  switch (dtype) {
    case Dtype::integer: return "integer";
    case Dtype::real: return "real";
    case Dtype::string: return "string";
  }
  return "";
}

inline std::optional<ColumnRole> parse_role(std::string_view s) {
  for (auto r : {ColumnRole::quasi_categorical, ColumnRole::quasi_numeric,
                 ColumnRole::data_categorical, ColumnRole::data_numeric,
                 ColumnRole::target}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

inline std::optional<Dtype> parse_dtype(std::string_view s) {
  for (auto d : {Dtype::integer, Dtype::real, Dtype::string}) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

constexpr bool is_quasi_identifier(ColumnRole r) {
  return r == ColumnRole::quasi_categorical || r == ColumnRole::quasi_numeric;
}
constexpr bool is_numeric_role(ColumnRole r) {
  return r == ColumnRole::quasi_numeric || r == ColumnRole::data_numeric;
}
constexpr bool is_numeric_dtype(Dtype d) {
  return d == Dtype::integer || d == Dtype::real;
}

struct ColumnSpec {
  std::string name;
  ColumnRole role;
  Dtype dtype;

  bool operator==(const ColumnSpec&) const = default;
};

class Schema {
 public:
  Schema() = default;

  explicit Schema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
    std::unordered_set<std::string> seen;
    bool has_target = false;
    for (const auto& c : columns_) {
      if (c.name.empty()) {
        throw Error(Errc::schema_error, "column name must be nonempty");
      }
      if (!seen.insert(c.name).second) {
        throw Error(Errc::schema_error, "duplicate column name", c.name);
      }
      if (is_numeric_role(c.role) && !is_numeric_dtype(c.dtype)) {
        throw Error(Errc::schema_error,
                    std::string(to_string(c.role)) +
                        " column needs dtype integer or real",
                    c.name);
      }
      if (c.role == ColumnRole::target) {
        if (has_target) {
          throw Error(Errc::schema_error, "schema has more than one target",
                      c.name);
        }
        has_target = true;
      }
    }
  }

  std::size_t size() const noexcept { return columns_.size(); }
  const ColumnSpec& operator[](std::size_t i) const { return columns_[i]; }
  const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }
  auto begin() const noexcept { return columns_.begin(); }
  auto end() const noexcept { return columns_.end(); }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i].name == name) return i;
    }
    return std::nullopt;
  }

  std::size_t index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw Error(Errc::unknown_column, "not in schema", std::string(name));
  }

  std::optional<std::size_t> target() const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i].role == ColumnRole::target) return i;
    }
    return std::nullopt;
  }

  std::vector<std::size_t> quasi_identifiers() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (is_quasi_identifier(columns_[i].role)) out.push_back(i);
    }
    return out;
  }

  bool operator==(const Schema&) const = default;

 private:
  std::vector<ColumnSpec> columns_;
};

using Cell = std::variant<std::int64_t, double, std::string>;
using ColumnData = std::variant<std::vector<std::int64_t>, std::vector<double>,
                                std::vector<std::string>>;

// Shortest decimal text that parses back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_integer(std::int64_t v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::optional<std::int64_t> parse_integer(std::string_view s) {
  std::int64_t v = 0;
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Finite reals only; "nan"/"inf" are rejected.
inline std::optional<double> parse_real(std::string_view s) {
  double v = 0;
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string cell_text(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::int64_t>) return format_integer(v);
        else if constexpr (std::is_same_v<T, double>) return format_real(v);
        else return v;
      },
      c);
}

inline ColumnData empty_column(Dtype dtype) {
  switch (dtype) {
    case Dtype::integer: return std::vector<std::int64_t>{};
    case Dtype::real: return std::vector<double>{};
    case Dtype::string: return std::vector<std::string>{};
  }
  return std::vector<std::string>{};
}

inline std::size_t column_length(const ColumnData& col) {
  return std::visit([](const auto& v) { return v.size(); }, col);
}

// Immutable columnar table. Construction validates dtype agreement, equal
// column lengths, finiteness of reals and the binary target rule.
class Table {
 public:
  Table() = default;

  Table(Schema schema, std::vector<ColumnData> columns)
      : schema_(std::move(schema)), columns_(std::move(columns)) {
    if (columns_.size() != schema_.size()) {
      throw Error(Errc::schema_mismatch, "column count differs from schema");
    }
    rows_ = columns_.empty() ? 0 : column_length(columns_[0]);
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      const auto& spec = schema_[c];
      const bool ok = (spec.dtype == Dtype::integer &&
                       std::holds_alternative<std::vector<std::int64_t>>(columns_[c])) ||
                      (spec.dtype == Dtype::real &&
                       std::holds_alternative<std::vector<double>>(columns_[c])) ||
                      (spec.dtype == Dtype::string &&
                       std::holds_alternative<std::vector<std::string>>(columns_[c]));
      if (!ok) throw Error(Errc::type_error, "storage dtype mismatch", spec.name);
      if (column_length(columns_[c]) != rows_) {
        throw Error(Errc::missing_cell, "column length differs", spec.name);
      }
      if (const auto* reals = std::get_if<std::vector<double>>(&columns_[c])) {
        for (std::size_t r = 0; r < reals->size(); ++r) {
          if (!std::isfinite((*reals)[r])) {
            throw Error(Errc::type_error, "non-finite real", spec.name, r + 1);
          }
        }
      }
    }
    if (auto t = schema_.target()) {
      std::set<std::string> values;
      for (std::size_t r = 0; r < rows_ && values.size() <= 2; ++r) {
        values.insert(text(r, *t));
      }
      if (values.size() > 2) {
        throw Error(Errc::schema_error, "target column has more than two values",
                    schema_[*t].name);
      }
    }
  }

  static Table empty(Schema schema) {
    std::vector<ColumnData> cols;
    for (const auto& c : schema) cols.push_back(empty_column(c.dtype));
    return Table(std::move(schema), std::move(cols));
  }

  const Schema& schema() const noexcept { return schema_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return columns_.size(); }

  const ColumnData& column(std::size_t c) const { return columns_.at(c); }
  const ColumnData& column(std::string_view name) const {
    return columns_[schema_.index_of(name)];
  }

  template <class T>
  const std::vector<T>& values(std::size_t c) const {
    return std::get<std::vector<T>>(columns_.at(c));
  }

  bool is_numeric(std::size_t c) const { return is_numeric_dtype(schema_[c].dtype); }

  double numeric(std::size_t r, std::size_t c) const {
    const auto& col = columns_[c];
    if (const auto* i = std::get_if<std::vector<std::int64_t>>(&col)) {
      return static_cast<double>((*i)[r]);
    }
    if (const auto* d = std::get_if<std::vector<double>>(&col)) return (*d)[r];
    throw Error(Errc::non_numeric_column, "column is not numeric", schema_[c].name);
  }

  std::vector<double> numeric_column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = numeric(r, c);
    return out;
  }

  Cell cell(std::size_t r, std::size_t c) const {
    return std::visit([r](const auto& v) -> Cell { return v[r]; }, columns_.at(c));
  }

  std::string text(std::size_t r, std::size_t c) const { return cell_text(cell(r, c)); }

  // Rows in the given order (indices may repeat).
  Table take_rows(std::span<const std::size_t> indices) const {
    std::vector<ColumnData> out;
    out.reserve(columns_.size());
    for (const auto& col : columns_) {
      out.push_back(std::visit(
          [&](const auto& v) -> ColumnData {
            std::decay_t<decltype(v)> picked;
            picked.reserve(indices.size());
            for (auto i : indices) picked.push_back(v.at(i));
            return picked;
          },
          col));
    }
    return Table(schema_, std::move(out));
  }

  // Projection onto `target` by column name. Roles come from `target`;
  // dtypes must agree.
  Table select(const Schema& target) const {
    std::vector<ColumnData> out;
    for (const auto& spec : target) {
      auto idx = schema_.find(spec.name);
      if (!idx) throw Error(Errc::unknown_column, "missing for projection", spec.name);
      if (schema_[*idx].dtype != spec.dtype) {
        throw Error(Errc::schema_mismatch, "dtype differs in projection", spec.name);
      }
      out.push_back(columns_[*idx]);
    }
    return Table(target, std::move(out));
  }

  // Returns a table with `other`'s columns appended (equal row counts).
  Table append_columns(const Table& other) const {
    if (other.rows() != rows_ && !columns_.empty()) {
      throw Error(Errc::schema_mismatch, "row counts differ when appending columns");
    }
    auto specs = schema_.columns();
    specs.insert(specs.end(), other.schema().begin(), other.schema().end());
    auto cols = columns_;
    for (std::size_t c = 0; c < other.cols(); ++c) cols.push_back(other.column(c));
    return Table(Schema(std::move(specs)), std::move(cols));
  }

  // Cell-for-cell equality; reals compare by bit pattern.
  bool operator==(const Table& o) const {
    if (!(schema_ == o.schema_) || rows_ != o.rows_) return false;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (const auto* a = std::get_if<std::vector<double>>(&columns_[c])) {
        const auto& b = std::get<std::vector<double>>(o.columns_[c]);
        for (std::size_t r = 0; r < rows_; ++r) {
          if (std::bit_cast<std::uint64_t>((*a)[r]) !=
              std::bit_cast<std::uint64_t>(b[r])) {
            return false;
          }
        }
      } else if (columns_[c] != o.columns_[c]) {
        return false;
      }
    }
    return true;
  }

 private:
  Schema schema_;
  std::vector<ColumnData> columns_;
  std::size_t rows_ = 0;
};

// Seeded Fisher-Yates shuffle, then the first `train_count` rows become the
// training table and the rest the holdout. Both outputs keep shuffled order.
inline std::pair<Table, Table> split(const Table& table, std::size_t train_count,
                                     std::uint64_t seed) {
  if (train_count == 0 || train_count >= table.rows()) {
    throw Error(Errc::bad_split, "train_count " + std::to_string(train_count) +
                                     " must lie in (0, " +
                                     std::to_string(table.rows()) + ")");
  }
  std::vector<std::size_t> order(table.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const Stream stream = Stream(seed).child("split");
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[stream.below(i, i + 1)]);
  }
  std::span<const std::size_t> all(order);
  return {table.take_rows(all.first(train_count)),
          table.take_rows(all.subspan(train_count))};
}

}  // namespace synqp
