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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "synqp/error.hpp"
#include "synqp/table.hpp"

namespace synqp {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temporary and renames over `path`, so readers never
// observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(Errc::io_error, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(Errc::io_error, "cannot rename onto " + path.string());
  }
}

namespace csv {

struct Field {
  std::string text;
  bool quoted = false;
};
using Record = std::vector<Field>;

// RFC-4180 reader. Records end at '\n' (an optional preceding '\r' outside
// quotes is dropped). A trailing newline at end of input does not start a
// new record.
inline std::vector<Record> parse(std::string_view in) {
  std::vector<Record> records;
  Record current;
  Field field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    current.push_back(std::move(field));
    field = Field{};
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char ch = in[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < in.size() && in[i + 1] == '"') {
          field.text.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.text.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      if (field_started) {
        throw Error(Errc::parse_error,
                    "stray quote inside unquoted field on line " + std::to_string(line));
      }
      in_quotes = true;
      field.quoted = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\n') {
      if (!field.quoted && !field.text.empty() && field.text.back() == '\r') {
        field.text.pop_back();
      }
      end_record();
      ++line;
    } else {
      if (field.quoted) {
        throw Error(Errc::parse_error,
                    "text after closing quote on line " + std::to_string(line));
      }
      field.text.push_back(ch);
      field_started = true;
    }
  }
  if (in_quotes) throw Error(Errc::parse_error, "unterminated quoted field");
  if (field_started || !current.empty()) end_record();
  return records;
}

inline bool needs_quotes(std::string_view s) {
  return s.empty() || s.find_first_of(",\"\n\r") != std::string_view::npos;
}

inline void append_field(std::string& out, std::string_view s, bool force_quotes) {
  if (!force_quotes && !needs_quotes(s)) {
    out.append(s);
    return;
  }
  out.push_back('"');
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
}

}  // namespace csv

inline Schema schema_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array()) {
    throw Error(Errc::schema_error, "expected an object with a \"columns\" array");
  }
  std::vector<ColumnSpec> specs;
  for (const auto& col : doc["columns"]) {
    const std::string name =
        col.contains("name") && col["name"].is_string() ? col["name"].get<std::string>() : "";
    if (!col.is_object() || name.empty()) {
      throw Error(Errc::schema_error, "column entry needs a nonempty string \"name\"", name);
    }
    if (!col.contains("role") || !col["role"].is_string()) {
      throw Error(Errc::schema_error, "missing role", name);
    }
    if (!col.contains("dtype") || !col["dtype"].is_string()) {
      throw Error(Errc::schema_error, "missing dtype", name);
    }
    auto role = parse_role(col["role"].get<std::string>());
    if (!role) throw Error(Errc::schema_error, "unknown role '" + col["role"].get<std::string>() + "'", name);
    auto dtype = parse_dtype(col["dtype"].get<std::string>());
    if (!dtype) throw Error(Errc::schema_error, "unknown dtype '" + col["dtype"].get<std::string>() + "'", name);
    specs.push_back({name, *role, *dtype});
  }
  return Schema(std::move(specs));
}

inline nlohmann::ordered_json schema_to_json(const Schema& schema) {
  nlohmann::ordered_json cols = nlohmann::ordered_json::array();
  for (const auto& c : schema) {
    cols.push_back({{"name", c.name},
                    {"role", std::string(to_string(c.role))},
                    {"dtype", std::string(to_string(c.dtype))}});
  }
  return {{"columns", cols}};
}

inline Schema parse_schema(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
  return schema_from_json(doc);
}

inline Schema load_schema(const std::filesystem::path& path) {
  return parse_schema(read_file(path));
}

inline void save_schema(const Schema& schema, const std::filesystem::path& path) {
  write_file_atomic(path, schema_to_json(schema).dump(2) + "\n");
}

// Unquoted empty fields are missing cells; a quoted "" is the empty string.
inline Table parse_table(std::string_view text, const Schema& schema) {
  auto records = csv::parse(text);
  if (records.empty()) throw Error(Errc::header_mismatch, "missing header row");
  const auto& header = records.front();
  bool header_ok = header.size() == schema.size();
  for (std::size_t c = 0; header_ok && c < header.size(); ++c) {
    header_ok = header[c].text == schema[c].name;
  }
  if (!header_ok) {
    std::string got;
    for (const auto& f : header) got += (got.empty() ? "" : ",") + f.text;
    throw Error(Errc::header_mismatch, "header [" + got + "] does not match schema order");
  }
  std::vector<ColumnData> cols;
  for (const auto& spec : schema) cols.push_back(empty_column(spec.dtype));
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() > schema.size()) {
      throw Error(Errc::parse_error,
                  "row has " + std::to_string(rec.size()) + " fields, expected " +
                      std::to_string(schema.size()),
                  "", r);
    }
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto& spec = schema[c];
      if (c >= rec.size() || (rec[c].text.empty() && !rec[c].quoted)) {
        throw Error(Errc::missing_cell, "empty or absent field", spec.name, r);
      }
      const std::string& s = rec[c].text;
      switch (spec.dtype) {
        case Dtype::integer: {
          auto v = parse_integer(s);
          if (!v) throw Error(Errc::type_error, "'" + s + "' is not an integer", spec.name, r);
          std::get<std::vector<std::int64_t>>(cols[c]).push_back(*v);
          break;
        }
        case Dtype::real: {
          auto v = parse_real(s);
          if (!v) throw Error(Errc::type_error, "'" + s + "' is not a finite real", spec.name, r);
          std::get<std::vector<double>>(cols[c]).push_back(*v);
          break;
        }
        case Dtype::string:
          std::get<std::vector<std::string>>(cols[c]).push_back(s);
          break;
      }
    }
  }
  return Table(schema, std::move(cols));
}

inline Table load_table(const std::filesystem::path& path, const Schema& schema) {
  return parse_table(read_file(path), schema);
}

inline std::string format_table(const Table& table) {
  std::string out;
  const auto& schema = table.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (c) out.push_back(',');
    csv::append_field(out, schema[c].name, false);
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (c) out.push_back(',');
      csv::append_field(out, table.text(r, c), false);
    }
    out.push_back('\n');
  }
  return out;
}

inline void save_table(const Table& table, const std::filesystem::path& path) {
  write_file_atomic(path, format_table(table));
}

}  // namespace synqp
