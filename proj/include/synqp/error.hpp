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

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace synqp {

enum class Errc {
  parse_error,
  schema_error,
  header_mismatch,
  type_error,
  missing_cell,
  io_error,
  bad_split,
  missing_condition_key,
  empty_source,
  non_numeric_column,
  empty_training_set,
  alignment_error,
  unknown_column,
  schema_mismatch,
  missing_target,
  single_class_training,
  single_class_evaluation,
  empty_table,
  config_error,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::parse_error: return "ParseError";
    case Errc::schema_error: return "SchemaError";
    case Errc::header_mismatch: return "HeaderMismatch";
    case Errc::type_error: return "TypeError";
    case Errc::missing_cell: return "MissingCell";
    case Errc::io_error: return "IoError";
    case Errc::bad_split: return "BadSplit";
    case Errc::missing_condition_key: return "MissingConditionKey";
    case Errc::empty_source: return "EmptySource";
    case Errc::non_numeric_column: return "NonNumericColumn";
    case Errc::empty_training_set: return "EmptyTrainingSet";
    case Errc::alignment_error: return "AlignmentError";
    case Errc::unknown_column: return "UnknownColumn";
    case Errc::schema_mismatch: return "SchemaMismatch";
    case Errc::missing_target: return "MissingTarget";
    case Errc::single_class_training: return "SingleClassTraining";
    case Errc::single_class_evaluation: return "SingleClassEvaluation";
    case Errc::empty_table: return "EmptyTable";
    case Errc::config_error: return "ConfigError";
  }
  return "Error";
}

// Every failure in the library surfaces as an Error. `row` is the 1-based
// data row (header excluded) for ingestion errors; `column` names the
// offending column when one is involved.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::string column = {},
        std::optional<std::size_t> row = std::nullopt)
      : std::runtime_error(format(code, message, column, row)),
        code_(code),
        column_(std::move(column)),
        row_(row) {}

  Errc code() const noexcept { return code_; }
  const std::string& column() const noexcept { return column_; }
  std::optional<std::size_t> row() const noexcept { return row_; }

  // Re-raises with a stage prefix, keeping code/column/row.
  [[noreturn]] void rethrow_with_context(std::string_view context) const {
    throw Error(code_, std::string(context) + ": " + what(), column_, row_,
                raw_tag{});
  }

 private:
  struct raw_tag {};
  Error(Errc code, const std::string& full, std::string column,
        std::optional<std::size_t> row, raw_tag)
      : std::runtime_error(full),
        code_(code),
        column_(std::move(column)),
        row_(row) {}

  static std::string format(Errc code, const std::string& message,
                            const std::string& column,
                            std::optional<std::size_t> row) {
    std::string out(to_string(code));
    if (row || !column.empty()) {
      out += "(";
      if (row) out += "row " + std::to_string(*row);
      if (row && !column.empty()) out += ", ";
      if (!column.empty()) out += "column '" + column + "'";
      out += ")";
    }
    out += ": ";
    out += message;
    return out;
  }

  Errc code_;
  std::string column_;
  std::optional<std::size_t> row_;
};

}  // namespace synqp
