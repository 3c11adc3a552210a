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

// Simulated pseudo-identifiable population: quasi-identifiers are seeded
// from configured distributions and payload columns are infilled from a
// non-identifiable source table by nearest-neighbour linkage.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

#include "synqp/error.hpp"
#include "synqp/io.hpp"
#include "synqp/parallel.hpp"
#include "synqp/rng.hpp"
#include "synqp/table.hpp"

namespace synqp {

namespace detail {

inline constexpr double kProbabilityTolerance = 1e-9;

inline std::vector<double> cumulative(const std::vector<double>& p,
                                      const std::string& what) {
  if (p.empty()) throw Error(Errc::config_error, what + ": empty probability list");
  std::vector<double> cum(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0) {
      throw Error(Errc::config_error, what + ": negative or non-finite probability");
    }
    total += p[i];
    cum[i] = total;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw Error(Errc::config_error,
                what + ": probabilities sum to " + format_real(total) + ", not 1");
  }
  return cum;
}

}  // namespace detail

// Discrete distribution over increasing support values. With a bin width
// the support entries are bin lower edges and emit() returns bin midpoints.
class NumericDistribution {
 public:
  NumericDistribution(std::vector<double> support, std::vector<double> probabilities,
                      std::optional<double> bin_width = std::nullopt)
      : support_(std::move(support)),
        probabilities_(std::move(probabilities)),
        bin_width_(bin_width) {
    if (support_.size() != probabilities_.size()) {
      throw Error(Errc::config_error, "support and probabilities differ in length");
    }
    cumulative_ = detail::cumulative(probabilities_, "numeric distribution");
    for (std::size_t i = 1; i < support_.size(); ++i) {
      if (!(support_[i] > support_[i - 1])) {
        throw Error(Errc::config_error, "support must be strictly increasing");
      }
    }
    if (bin_width_ && !(*bin_width_ > 0.0)) {
      throw Error(Errc::config_error, "bin_width must be positive");
    }
  }

  double sample(double u) const { return support_[inverse_cdf_index(cumulative_, u)]; }
  double emit(double u) const { return sample(u) + (bin_width_ ? *bin_width_ / 2.0 : 0.0); }

  // True when every emitted value is an integer.
  bool integral() const {
    if (bin_width_) return false;
    return std::all_of(support_.begin(), support_.end(),
                       [](double v) { return std::trunc(v) == v; });
  }

  // Values emit() can return.
  std::vector<double> reachable() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < support_.size(); ++i) {
      if (probabilities_[i] > 0) out.push_back(support_[i] + (bin_width_ ? *bin_width_ / 2.0 : 0.0));
    }
    return out;
  }

  const std::vector<double>& support() const noexcept { return support_; }
  const std::vector<double>& probabilities() const noexcept { return probabilities_; }
  std::optional<double> bin_width() const noexcept { return bin_width_; }

 private:
  std::vector<double> support_;
  std::vector<double> probabilities_;
  std::optional<double> bin_width_;
  std::vector<double> cumulative_;
};

inline double inverse_transform_sample(const NumericDistribution& dist, double u) {
  return dist.sample(u);
}

class WeightedCategories {
 public:
  WeightedCategories(std::vector<std::string> categories, std::vector<double> weights)
      : categories_(std::move(categories)), weights_(std::move(weights)) {
    if (categories_.empty()) throw Error(Errc::config_error, "empty category list");
    if (categories_.size() != weights_.size()) {
      throw Error(Errc::config_error, "categories and weights differ in length");
    }
    cumulative_ = detail::cumulative(weights_, "weighted categories");
  }

  const std::string& sample(double u) const {
    return categories_[inverse_cdf_index(cumulative_, u)];
  }
  const std::vector<std::string>& categories() const noexcept { return categories_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  std::vector<std::string> categories_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

// Category distribution keyed by the value of another column: numeric
// values select a half-open bin [lo, hi); any value may also match an exact
// text key (checked first).
class ConditionalCategorical {
 public:
  struct Bin {
    double lo;
    double hi;
    WeightedCategories categories;
  };

  ConditionalCategorical(std::string condition_column, std::vector<Bin> bins,
                         std::map<std::string, WeightedCategories> keyed = {})
      : condition_column_(std::move(condition_column)),
        bins_(std::move(bins)),
        keyed_(std::move(keyed)) {
    for (const auto& b : bins_) {
      if (!(b.lo < b.hi)) throw Error(Errc::config_error, "conditional bin needs lo < hi");
    }
    if (bins_.empty() && keyed_.empty()) {
      throw Error(Errc::config_error, "conditional distribution has no keys");
    }
  }

  const std::string& condition_column() const noexcept { return condition_column_; }

  const WeightedCategories& lookup(const Cell& value) const {
    if (auto it = keyed_.find(cell_text(value)); it != keyed_.end()) return it->second;
    if (!std::holds_alternative<std::string>(value)) {
      const double v = std::holds_alternative<double>(value)
                           ? std::get<double>(value)
                           : static_cast<double>(std::get<std::int64_t>(value));
      for (const auto& b : bins_) {
        if (b.lo <= v && v < b.hi) return b.categories;
      }
    }
    throw Error(Errc::missing_condition_key, "no key covers value '" + cell_text(value) + "'",
                condition_column_);
  }

  std::vector<std::string> all_categories() const {
    std::set<std::string> out;
    for (const auto& b : bins_) out.insert(b.categories.categories().begin(), b.categories.categories().end());
    for (const auto& [k, w] : keyed_) out.insert(w.categories().begin(), w.categories().end());
    return {out.begin(), out.end()};
  }

 private:
  std::string condition_column_;
  std::vector<Bin> bins_;
  std::map<std::string, WeightedCategories> keyed_;
};

inline const std::string& sample_conditional(const ConditionalCategorical& cc,
                                             const Cell& condition_value, double u) {
  return cc.lookup(condition_value).sample(u);
}

class CategoricalPool {
 public:
  CategoricalPool(std::string name, std::vector<std::string> entries,
                  std::optional<std::vector<double>> weights = std::nullopt)
      : name_(std::move(name)), entries_(std::move(entries)) {
    if (entries_.empty()) throw Error(Errc::config_error, "pool '" + name_ + "' is empty");
    std::unordered_set<std::string> seen;
    for (const auto& e : entries_) {
      if (e.empty()) throw Error(Errc::config_error, "pool '" + name_ + "' has an empty entry");
      if (!seen.insert(e).second) {
        throw Error(Errc::config_error, "pool '" + name_ + "' repeats '" + e + "'");
      }
    }
    if (weights) {
      if (weights->size() != entries_.size()) {
        throw Error(Errc::config_error, "pool '" + name_ + "' weights differ in length");
      }
      cumulative_ = detail::cumulative(*weights, "pool '" + name_ + "'");
    }
  }

  const std::string& sample(double u) const {
    if (cumulative_.empty()) {
      auto k = static_cast<std::size_t>(u * static_cast<double>(entries_.size()));
      return entries_[std::min(k, entries_.size() - 1)];
    }
    return entries_[inverse_cdf_index(cumulative_, u)];
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& entries() const noexcept { return entries_; }

 private:
  std::string name_;
  std::vector<std::string> entries_;
  std::vector<double> cumulative_;
};

inline const std::string& sample_categorical(const CategoricalPool& pool, double u) {
  return pool.sample(u);
}

// One category per line; blank lines are skipped.
inline CategoricalPool load_pool(const std::filesystem::path& path,
                                 std::optional<std::vector<double>> weights = std::nullopt) {
  std::vector<std::string> entries;
  std::string text = read_file(path);
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) entries.push_back(std::move(line));
    start = end + 1;
  }
  return CategoricalPool(path.stem().string(), std::move(entries), std::move(weights));
}

struct StateZip {
  std::string state;
  std::string zip_prefix;
};

class AddressModel {
 public:
  AddressModel(CategoricalPool streets, CategoricalPool cities, std::vector<StateZip> states,
               std::int64_t number_lo, std::int64_t number_hi)
      : streets_(std::move(streets)),
        cities_(std::move(cities)),
        states_(std::move(states)),
        lo_(number_lo),
        hi_(number_hi) {
    if (states_.empty()) throw Error(Errc::config_error, "address model has no states");
    for (const auto& s : states_) {
      const bool digits = std::all_of(s.zip_prefix.begin(), s.zip_prefix.end(),
                                      [](char c) { return c >= '0' && c <= '9'; });
      if (s.state.empty() || s.zip_prefix.empty() || s.zip_prefix.size() > 5 || !digits) {
        throw Error(Errc::config_error, "state '" + s.state + "' needs a 1-5 digit zip prefix");
      }
    }
    if (lo_ > hi_) throw Error(Errc::config_error, "street number range needs lo <= hi");
  }

  const CategoricalPool& streets() const noexcept { return streets_; }
  const CategoricalPool& cities() const noexcept { return cities_; }
  const std::vector<StateZip>& states() const noexcept { return states_; }
  std::int64_t number_lo() const noexcept { return lo_; }
  std::int64_t number_hi() const noexcept { return hi_; }

 private:
  CategoricalPool streets_;
  CategoricalPool cities_;
  std::vector<StateZip> states_;
  std::int64_t lo_;
  std::int64_t hi_;
};

struct Address {
  std::int64_t street_number;
  std::string street;
  std::string city;
  std::string state;
  std::string zip;
};

inline constexpr std::uint64_t kAddressDraws = 5;

// Consumes exactly kAddressDraws draws from the cursor.
inline Address generate_address(const AddressModel& model, StreamCursor& draws) {
  Address a;
  const auto span = static_cast<std::uint64_t>(model.number_hi() - model.number_lo()) + 1;
  a.street_number = model.number_lo() + static_cast<std::int64_t>(draws.below(span));
  a.street = model.streets().sample(draws.uniform());
  a.city = model.cities().sample(draws.uniform());
  const auto& st = model.states()[draws.below(model.states().size())];
  a.state = st.state;
  const std::size_t digits = 5 - st.zip_prefix.size();
  std::uint64_t range = 1;
  for (std::size_t i = 0; i < digits; ++i) range *= 10;
  std::string suffix = std::to_string(draws.below(range));
  a.zip = st.zip_prefix + std::string(digits - std::min(digits, suffix.size()), '0') +
          (digits ? suffix : "");
  return a;
}

// Height and weight drawn from gender-conditioned binned distributions; BMI
// is derived (kg / m^2, one decimal).
class BodyModel {
 public:
  struct Group {
    NumericDistribution height_cm;
    NumericDistribution weight_kg;
  };

  BodyModel(std::string condition_column, std::map<std::string, Group> groups)
      : condition_column_(std::move(condition_column)), groups_(std::move(groups)) {
    if (groups_.empty()) throw Error(Errc::config_error, "body model has no groups");
  }

  const std::string& condition_column() const noexcept { return condition_column_; }
  const std::map<std::string, Group>& groups() const noexcept { return groups_; }

  const Group& lookup(const std::string& key) const {
    auto it = groups_.find(key);
    if (it == groups_.end()) {
      throw Error(Errc::missing_condition_key, "no body group for '" + key + "'",
                  condition_column_);
    }
    return it->second;
  }

  static double bmi(double height_cm, double weight_kg) {
    const double m = height_cm / 100.0;
    return std::round(weight_kg / (m * m) * 10.0) / 10.0;
  }

 private:
  std::string condition_column_;
  std::map<std::string, Group> groups_;
};

// Nearest-neighbour infill specification. Normalization stats are fit on
// the source table at construction.
class LinkSpec {
 public:
  LinkSpec(Table source, std::vector<std::string> join, std::vector<std::string> infill,
           bool normalize = true)
      : source_(std::move(source)),
        join_(std::move(join)),
        infill_(std::move(infill)),
        normalize_(normalize) {
    if (source_.rows() == 0) throw Error(Errc::empty_source, "link source table has no rows");
    if (join_.empty()) throw Error(Errc::config_error, "link needs at least one join feature");
    for (const auto& name : join_) {
      const auto c = source_.schema().index_of(name);
      if (!source_.is_numeric(c)) {
        throw Error(Errc::non_numeric_column, "join feature must be numeric", name);
      }
      const auto v = source_.numeric_column(c);
      double mean = 0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      means_.push_back(mean);
      stddevs_.push_back(std::max(sd, 1e-12));
    }
    for (const auto& name : infill_) source_.schema().index_of(name);
  }

  const Table& source() const noexcept { return source_; }
  const std::vector<std::string>& join() const noexcept { return join_; }
  const std::vector<std::string>& infill() const noexcept { return infill_; }
  bool normalize() const noexcept { return normalize_; }
  const std::vector<double>& means() const noexcept { return means_; }
  const std::vector<double>& stddevs() const noexcept { return stddevs_; }

 private:
  Table source_;
  std::vector<std::string> join_;
  std::vector<std::string> infill_;
  bool normalize_;
  std::vector<double> means_;
  std::vector<double> stddevs_;
};

// Index of the nearest source row for every population row, using squared
// Euclidean distance over (optionally z-scored) join features. Ties go to
// the lowest source index.
inline std::vector<std::size_t> nearest_source_rows(const Table& population, const LinkSpec& link) {
  const auto& source = link.source();
  const std::size_t d = link.join().size();
  std::vector<std::size_t> pop_cols, src_cols;
  for (const auto& name : link.join()) {
    const auto pc = population.schema().index_of(name);
    if (!population.is_numeric(pc)) {
      throw Error(Errc::non_numeric_column, "join feature must be numeric", name);
    }
    pop_cols.push_back(pc);
    src_cols.push_back(source.schema().index_of(name));
  }
  // Differences are taken on raw values and then scaled, so exact ties on
  // the raw grid stay exact ties.
  std::vector<double> scale(d, 1.0);
  if (link.normalize()) {
    for (std::size_t j = 0; j < d; ++j) scale[j] = link.stddevs()[j];
  }
  std::vector<double> src(source.rows() * d);
  for (std::size_t s = 0; s < source.rows(); ++s) {
    for (std::size_t j = 0; j < d; ++j) src[s * d + j] = source.numeric(s, src_cols[j]);
  }
  std::vector<std::size_t> nearest(population.rows());
  parallel_for(population.rows(), [&](std::size_t p) {
    std::vector<double> q(d);
    for (std::size_t j = 0; j < d; ++j) q[j] = population.numeric(p, pop_cols[j]);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_row = 0;
    for (std::size_t s = 0; s < source.rows(); ++s) {
      double dist = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = (q[j] - src[s * d + j]) / scale[j];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        best_row = s;
      }
    }
    nearest[p] = best_row;
  });
  return nearest;
}

inline Table link_nearest(const Table& population, const LinkSpec& link) {
  for (const auto& name : link.infill()) {
    if (population.schema().find(name)) {
      throw Error(Errc::schema_error, "infill column already present in population", name);
    }
  }
  const auto nearest = nearest_source_rows(population, link);
  std::vector<ColumnSpec> specs;
  for (const auto& name : link.infill()) {
    specs.push_back(link.source().schema()[link.source().schema().index_of(name)]);
  }
  const Table infill = link.source().take_rows(nearest).select(Schema(specs));
  return population.append_columns(infill);
}

// Pipeline stages, executed in list order. Each stage reads only columns
// produced by earlier stages and draws from its own named stream.
struct NumericStage {
  std::string column;
  NumericDistribution distribution;
  ColumnRole role = ColumnRole::quasi_numeric;
};

struct ConditionalStage {
  std::string column;
  ConditionalCategorical distribution;
  ColumnRole role = ColumnRole::quasi_categorical;
};

struct PoolStage {
  std::string column;
  CategoricalPool pool;
  ColumnRole role = ColumnRole::quasi_categorical;
};

struct AddressStage {
  AddressModel model;
};

struct BodyStage {
  BodyModel model;
  std::string height_column = "height";
  std::string weight_column = "weight";
  std::string bmi_column = "bmi";
};

struct LinkStage {
  LinkSpec link;
};

using SimulationStage =
    std::variant<NumericStage, ConditionalStage, PoolStage, AddressStage, BodyStage, LinkStage>;

struct SimulationConfig {
  std::vector<SimulationStage> stages;
};

inline std::string stage_label(const SimulationStage& stage) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, NumericStage>) return "numeric '" + s.column + "'";
        else if constexpr (std::is_same_v<T, ConditionalStage>) return "conditional '" + s.column + "'";
        else if constexpr (std::is_same_v<T, PoolStage>) return "pool '" + s.column + "'";
        else if constexpr (std::is_same_v<T, AddressStage>) return "address";
        else if constexpr (std::is_same_v<T, BodyStage>) return "body";
        else return "link";
      },
      stage);
}

namespace detail {

// Population under construction: finished columns plus, per column, the
// set of values it can take (used to check conditional key coverage).
struct PopulationBuilder {
  std::size_t rows;
  std::vector<ColumnSpec> specs;
  std::vector<ColumnData> columns;
  std::vector<std::vector<Cell>> reachable;

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (specs[i].name == name) return i;
    }
    throw Error(Errc::unknown_column, "not produced by an earlier stage", name);
  }

  Cell cell(std::size_t r, std::size_t c) const {
    return std::visit([r](const auto& v) -> Cell { return v[r]; }, columns[c]);
  }

  void add(ColumnSpec spec, ColumnData data, std::vector<Cell> values) {
    for (const auto& s : specs) {
      if (s.name == spec.name) throw Error(Errc::schema_error, "column produced twice", spec.name);
    }
    specs.push_back(std::move(spec));
    columns.push_back(std::move(data));
    reachable.push_back(std::move(values));
  }
};

inline std::vector<Cell> string_cells(const std::vector<std::string>& v) {
  return {v.begin(), v.end()};
}

inline void run_stage(PopulationBuilder& b, const NumericStage& s, const Stream& root) {
  const Stream stream = root.child(s.column);
  const bool integral = s.distribution.integral();
  std::vector<Cell> values;
  for (double v : s.distribution.reachable()) {
    values.push_back(integral ? Cell(static_cast<std::int64_t>(v)) : Cell(v));
  }
  if (integral) {
    std::vector<std::int64_t> col(b.rows);
    parallel_for(b.rows, [&](std::size_t r) {
      col[r] = static_cast<std::int64_t>(s.distribution.emit(stream.uniform(r)));
    });
    b.add({s.column, s.role, Dtype::integer}, std::move(col), std::move(values));
  } else {
    std::vector<double> col(b.rows);
    parallel_for(b.rows, [&](std::size_t r) { col[r] = s.distribution.emit(stream.uniform(r)); });
    b.add({s.column, s.role, Dtype::real}, std::move(col), std::move(values));
  }
}

inline void run_stage(PopulationBuilder& b, const ConditionalStage& s, const Stream& root) {
  const auto cond = b.index_of(s.distribution.condition_column());
  for (const auto& v : b.reachable[cond]) s.distribution.lookup(v);
  const Stream stream = root.child(s.column);
  std::vector<std::string> col(b.rows);
  parallel_for(b.rows, [&](std::size_t r) {
    col[r] = sample_conditional(s.distribution, b.cell(r, cond), stream.uniform(r));
  });
  b.add({s.column, s.role, Dtype::string}, std::move(col),
        string_cells(s.distribution.all_categories()));
}

inline void run_stage(PopulationBuilder& b, const PoolStage& s, const Stream& root) {
  const Stream stream = root.child(s.column);
  std::vector<std::string> col(b.rows);
  parallel_for(b.rows, [&](std::size_t r) { col[r] = s.pool.sample(stream.uniform(r)); });
  b.add({s.column, s.role, Dtype::string}, std::move(col), string_cells(s.pool.entries()));
}

inline void run_stage(PopulationBuilder& b, const AddressStage& s, const Stream& root) {
  const Stream stream = root.child("address");
  std::vector<Address> out(b.rows);
  parallel_for(b.rows, [&](std::size_t r) {
    StreamCursor cursor(stream, r * kAddressDraws);
    out[r] = generate_address(s.model, cursor);
  });
  std::vector<std::int64_t> number(b.rows);
  std::vector<std::string> street(b.rows), city(b.rows), state(b.rows), zip(b.rows);
  std::set<std::string> states;
  for (const auto& st : s.model.states()) states.insert(st.state);
  for (std::size_t r = 0; r < b.rows; ++r) {
    number[r] = out[r].street_number;
    street[r] = std::move(out[r].street);
    city[r] = std::move(out[r].city);
    state[r] = std::move(out[r].state);
    zip[r] = std::move(out[r].zip);
  }
  const auto qc = ColumnRole::quasi_categorical;
  b.add({"street_number", qc, Dtype::integer}, std::move(number), {});
  b.add({"street", qc, Dtype::string}, std::move(street), string_cells(s.model.streets().entries()));
  b.add({"city", qc, Dtype::string}, std::move(city), string_cells(s.model.cities().entries()));
  b.add({"state", qc, Dtype::string}, std::move(state),
        string_cells(std::vector<std::string>(states.begin(), states.end())));
  b.add({"zip", qc, Dtype::string}, std::move(zip), {});
}

inline void run_stage(PopulationBuilder& b, const BodyStage& s, const Stream& root) {
  const auto cond = b.index_of(s.model.condition_column());
  for (const auto& v : b.reachable[cond]) s.model.lookup(cell_text(v));
  const Stream hs = root.child(s.height_column);
  const Stream ws = root.child(s.weight_column);
  std::vector<double> height(b.rows), weight(b.rows), bmi(b.rows);
  parallel_for(b.rows, [&](std::size_t r) {
    const auto& g = s.model.lookup(cell_text(b.cell(r, cond)));
    height[r] = g.height_cm.emit(hs.uniform(r));
    weight[r] = g.weight_kg.emit(ws.uniform(r));
    bmi[r] = BodyModel::bmi(height[r], weight[r]);
  });
  const auto dn = ColumnRole::data_numeric;
  b.add({s.height_column, dn, Dtype::real}, std::move(height), {});
  b.add({s.weight_column, dn, Dtype::real}, std::move(weight), {});
  b.add({s.bmi_column, dn, Dtype::real}, std::move(bmi), {});
}

inline void run_stage(PopulationBuilder& b, const LinkStage& s, const Stream&) {
  const Table partial(Schema(b.specs), b.columns);
  const Table linked = link_nearest(partial, s.link);
  for (std::size_t c = partial.cols(); c < linked.cols(); ++c) {
    b.add(linked.schema()[c], linked.column(c), {});
  }
}

}  // namespace detail

// Runs the configured stages in order. Output is a pure function of
// (config, rows, seed); row r of every stage reads counter r of that
// stage's stream, so thread count does not affect the result.
inline Table build_population(const SimulationConfig& config, std::size_t rows,
                              std::uint64_t seed) {
  if (rows == 0) throw Error(Errc::config_error, "population needs at least one row");
  detail::PopulationBuilder builder{rows, {}, {}, {}};
  const Stream root = Stream(seed).child("simulate");
  for (const auto& stage : config.stages) {
    try {
      std::visit([&](const auto& s) { detail::run_stage(builder, s, root); }, stage);
    } catch (const Error& e) {
      e.rethrow_with_context("simulation stage " + stage_label(stage));
    }
  }
  return Table(Schema(builder.specs), std::move(builder.columns));
}

// ---- Configuration files -------------------------------------------------

namespace detail {

inline nlohmann::json load_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, path.string() + ": " + e.what());
  }
}

// A config value may be inline JSON or a string path relative to `base`.
inline nlohmann::json inline_or_file(const nlohmann::json& v, const std::filesystem::path& base) {
  if (v.is_string()) return load_json(base / v.get<std::string>());
  return v;
}

inline NumericDistribution numeric_from_json(const nlohmann::json& j) {
  std::optional<double> width;
  if (j.contains("bin_width")) width = j.at("bin_width").get<double>();
  return NumericDistribution(j.at("support").get<std::vector<double>>(),
                             j.at("probabilities").get<std::vector<double>>(), width);
}

inline WeightedCategories weighted_from_json(const nlohmann::json& j) {
  return WeightedCategories(j.at("categories").get<std::vector<std::string>>(),
                            j.at("weights").get<std::vector<double>>());
}

inline ConditionalCategorical conditional_from_json(const nlohmann::json& j) {
  std::vector<ConditionalCategorical::Bin> bins;
  for (const auto& b : j.value("bins", nlohmann::json::array())) {
    bins.push_back({b.at("lo").get<double>(), b.at("hi").get<double>(), weighted_from_json(b)});
  }
  std::map<std::string, WeightedCategories> keyed;
  for (const auto& k : j.value("keys", nlohmann::json::array())) {
    keyed.emplace(k.at("key").get<std::string>(), weighted_from_json(k));
  }
  return ConditionalCategorical(j.at("condition_column").get<std::string>(), std::move(bins),
                                std::move(keyed));
}

inline ColumnRole role_from_json(const nlohmann::json& stage, ColumnRole fallback) {
  if (!stage.contains("role")) return fallback;
  auto r = parse_role(stage.at("role").get<std::string>());
  if (!r) throw Error(Errc::config_error, "unknown role in simulation stage");
  return *r;
}

inline SimulationStage stage_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "numeric") {
    return NumericStage{j.at("column").get<std::string>(),
                        numeric_from_json(inline_or_file(j.at("distribution"), base)),
                        role_from_json(j, ColumnRole::quasi_numeric)};
  }
  if (type == "conditional") {
    return ConditionalStage{j.at("column").get<std::string>(),
                            conditional_from_json(inline_or_file(j.at("distribution"), base)),
                            role_from_json(j, ColumnRole::quasi_categorical)};
  }
  if (type == "pool") {
    std::optional<std::vector<double>> weights;
    if (j.contains("weights")) weights = j.at("weights").get<std::vector<double>>();
    const auto& p = j.at("pool");
    CategoricalPool pool = p.is_string()
                               ? load_pool(base / p.get<std::string>(), weights)
                               : CategoricalPool(j.at("column").get<std::string>(),
                                                 p.get<std::vector<std::string>>(), weights);
    return PoolStage{j.at("column").get<std::string>(), std::move(pool),
                     role_from_json(j, ColumnRole::quasi_categorical)};
  }
  if (type == "address") {
    auto pool = [&](const char* key) {
      const auto& p = j.at(key);
      return p.is_string() ? load_pool(base / p.get<std::string>())
                           : CategoricalPool(key, p.get<std::vector<std::string>>());
    };
    std::vector<StateZip> states;
    for (const auto& s : j.at("states")) {
      states.push_back({s.at("state").get<std::string>(), s.at("zip_prefix").get<std::string>()});
    }
    const auto range = j.at("street_number").get<std::vector<std::int64_t>>();
    if (range.size() != 2) throw Error(Errc::config_error, "street_number must be [lo, hi]");
    return AddressStage{AddressModel(pool("streets"), pool("cities"), std::move(states),
                                     range[0], range[1])};
  }
  if (type == "body") {
    const auto m = inline_or_file(j.at("model"), base);
    std::map<std::string, BodyModel::Group> groups;
    for (const auto& [key, g] : m.at("groups").items()) {
      groups.emplace(key, BodyModel::Group{numeric_from_json(g.at("height")),
                                           numeric_from_json(g.at("weight"))});
    }
    return BodyStage{BodyModel(m.at("condition_column").get<std::string>(), std::move(groups))};
  }
  if (type == "link") {
    const Schema src_schema = load_schema(base / j.at("source_schema").get<std::string>());
    Table source = load_table(base / j.at("source").get<std::string>(), src_schema);
    return LinkStage{LinkSpec(std::move(source), j.at("join").get<std::vector<std::string>>(),
                              j.at("infill").get<std::vector<std::string>>(),
                              j.value("normalize", true))};
  }
  throw Error(Errc::config_error, "unknown simulation stage type '" + type + "'");
}

}  // namespace detail

inline SimulationConfig simulation_config_from_json(const nlohmann::json& doc,
                                                    const std::filesystem::path& base) {
  SimulationConfig config;
  try {
    for (const auto& s : doc.at("stages")) config.stages.push_back(detail::stage_from_json(s, base));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config_error, std::string("simulation config: ") + e.what());
  }
  return config;
}

inline SimulationConfig load_simulation_config(const std::filesystem::path& path) {
  return simulation_config_from_json(detail::load_json(path), path.parent_path());
}

}  // namespace synqp
