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

// Identity disclosure risk (IDR) with a budget-relaxed match indicator
// (SD-IDR) and the IDR-difference membership inference score (SD-MIA).
//
// For an anchor table A matched against a lookup table L, the directional
// risk is
//
//   R(A -> L) = (1 / |A|) * sum_{s in A} I_s / k_s
//
// where k_s is the number of rows of L sharing the exact active
// quasi-identifier tuple of s, and I_s = 1 when some row of L agrees with s
// on every categorical QI and has sum_c |s_c - l_c| / divisor_c <= budget
// over the numeric QIs. IDR(real, synth) = max(R(real -> synth),
// R(synth -> real)). Class sizes never depend on the budget; only I_s does.
// A record with k_s = 0 can still match once budget > 0, and
// RelaxedClassMode decides what that term contributes.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "synqp/error.hpp"
#include "synqp/parallel.hpp"
#include "synqp/rng.hpp"
#include "synqp/table.hpp"

namespace synqp {

enum class RelaxedClassMode {
  // Term 1 / max(k_s, 1): an unmatched exact class counts as a class of one.
  unit,
  // Term 1 / (number of budget-matching lookup rows).
  relaxed_count,
  // Term 0: only records with a nonempty exact class contribute.
  drop,
};

constexpr std::string_view to_string(RelaxedClassMode m) {
  switch (m) {
    case RelaxedClassMode::unit: return "unit";
    case RelaxedClassMode::relaxed_count: return "relaxed_count";
    case RelaxedClassMode::drop: return "drop";
  }
  return "";
}

inline std::optional<RelaxedClassMode> parse_relaxed_class_mode(std::string_view s) {
  for (auto m : {RelaxedClassMode::unit, RelaxedClassMode::relaxed_count, RelaxedClassMode::drop}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

struct MatchRule {
  // Active quasi-identifier columns; empty selects every QI column of the
  // real table's schema.
  std::vector<std::string> qi_columns;
  double budget = 0.0;
  // Per numeric QI divisor applied to absolute differences (default 1).
  std::map<std::string, double> divisors;
  RelaxedClassMode relaxed_class_mode = RelaxedClassMode::unit;
};

namespace detail {

struct ResolvedQi {
  std::vector<std::string> categorical;
  std::vector<std::string> numeric;
  std::vector<double> divisors;
};

inline ResolvedQi resolve_qi(const Schema& schema, const MatchRule& rule) {
  std::vector<std::string> names = rule.qi_columns;
  if (names.empty()) {
    for (auto c : schema.quasi_identifiers()) names.push_back(schema[c].name);
  }
  if (names.empty()) throw Error(Errc::schema_error, "no active quasi-identifier columns");
  if (!(rule.budget >= 0.0) || !std::isfinite(rule.budget)) {
    throw Error(Errc::config_error, "budget must be a finite nonnegative number");
  }
  ResolvedQi out;
  for (const auto& name : names) {
    const auto& spec = schema[schema.index_of(name)];
    if (!is_quasi_identifier(spec.role)) {
      throw Error(Errc::schema_error, "active column is not a quasi-identifier", name);
    }
    if (spec.role == ColumnRole::quasi_numeric) {
      out.numeric.push_back(name);
      double div = 1.0;
      if (auto it = rule.divisors.find(name); it != rule.divisors.end()) div = it->second;
      if (!(div > 0.0)) throw Error(Errc::config_error, "divisor must be positive", name);
      out.divisors.push_back(div);
    } else {
      out.categorical.push_back(name);
    }
  }
  return out;
}

// Quasi-identifier values of one table, with categorical text interned into
// ids shared by every table encoded against the same dictionary.
struct QiMatrix {
  std::size_t rows = 0;
  std::size_t n_cat = 0;
  std::size_t n_num = 0;
  std::vector<std::uint32_t> cat;
  std::vector<double> num;

  const std::uint32_t* cat_row(std::size_t r) const { return cat.data() + r * n_cat; }
  const double* num_row(std::size_t r) const { return num.data() + r * n_num; }
};

class QiDictionary {
 public:
  explicit QiDictionary(std::size_t columns) : ids_(columns) {}

  QiMatrix encode(const Table& t, const ResolvedQi& qi) {
    QiMatrix m;
    m.rows = t.rows();
    m.n_cat = qi.categorical.size();
    m.n_num = qi.numeric.size();
    m.cat.resize(m.rows * m.n_cat);
    m.num.resize(m.rows * m.n_num);
    for (std::size_t j = 0; j < m.n_cat; ++j) {
      const auto c = t.schema().index_of(qi.categorical[j]);
      if (t.schema()[c].role != ColumnRole::quasi_categorical) {
        throw Error(Errc::schema_mismatch, "quasi-identifier role differs between tables",
                    qi.categorical[j]);
      }
      auto& ids = ids_[j];
      for (std::size_t r = 0; r < m.rows; ++r) {
        auto [it, inserted] = ids.try_emplace(t.text(r, c), static_cast<std::uint32_t>(ids.size()));
        m.cat[r * m.n_cat + j] = it->second;
      }
    }
    for (std::size_t j = 0; j < m.n_num; ++j) {
      const auto c = t.schema().index_of(qi.numeric[j]);
      if (t.schema()[c].role != ColumnRole::quasi_numeric) {
        throw Error(Errc::schema_mismatch, "quasi-identifier role differs between tables",
                    qi.numeric[j]);
      }
      for (std::size_t r = 0; r < m.rows; ++r) {
        const double v = t.numeric(r, c);
        m.num[r * m.n_num + j] = v == 0.0 ? 0.0 : v;  // fold -0 into +0
      }
    }
    return m;
  }

 private:
  std::vector<std::unordered_map<std::string, std::uint32_t>> ids_;
};

struct TupleKey {
  std::vector<std::uint64_t> parts;
  bool operator==(const TupleKey&) const = default;
};

struct TupleKeyHash {
  std::size_t operator()(const TupleKey& k) const noexcept {
    std::uint64_t h = 0x84222325CBF29CE4ULL;
    for (auto p : k.parts) h = splitmix64(h ^ p);
    return static_cast<std::size_t>(h);
  }
};

inline TupleKey full_key(const QiMatrix& m, std::size_t r) {
  TupleKey k;
  k.parts.reserve(m.n_cat + m.n_num);
  for (std::size_t j = 0; j < m.n_cat; ++j) k.parts.push_back(m.cat_row(r)[j]);
  for (std::size_t j = 0; j < m.n_num; ++j) k.parts.push_back(std::bit_cast<std::uint64_t>(m.num_row(r)[j]));
  return k;
}

inline TupleKey categorical_key(const QiMatrix& m, std::size_t r) {
  TupleKey k;
  k.parts.assign(m.cat_row(r), m.cat_row(r) + m.n_cat);
  return k;
}

// Cumulative scaled L1 distance over numeric QIs, summed in column order.
inline double numeric_distance(const double* a, const double* b, const std::vector<double>& div) {
  double acc = 0.0;
  for (std::size_t j = 0; j < div.size(); ++j) acc += std::abs(a[j] - b[j]) / div[j];
  return acc;
}

// Lookup-side index: exact class sizes, plus rows grouped by categorical
// tuple and sorted by the first numeric QI for windowed budget scans.
class LookupIndex {
 public:
  LookupIndex(const QiMatrix& lookup, std::vector<double> divisors)
      : lookup_(lookup), divisors_(std::move(divisors)) {
    for (std::size_t r = 0; r < lookup.rows; ++r) {
      ++class_size_[full_key(lookup, r)];
      groups_[categorical_key(lookup, r)].push_back(r);
    }
    if (lookup.n_num > 0) {
      for (auto& [key, rows] : groups_) {
        std::stable_sort(rows.begin(), rows.end(), [&](auto a, auto b) {
          return lookup.num_row(a)[0] < lookup.num_row(b)[0];
        });
      }
    }
  }

  std::size_t class_size(const QiMatrix& anchor, std::size_t r) const {
    auto it = class_size_.find(full_key(anchor, r));
    return it == class_size_.end() ? 0 : it->second;
  }

  // Number of lookup rows within budget of anchor row r; stops after the
  // first hit unless `count_all`.
  std::size_t matches(const QiMatrix& anchor, std::size_t r, double budget, bool count_all) const {
    auto it = groups_.find(categorical_key(anchor, r));
    if (it == groups_.end()) return 0;
    const auto& rows = it->second;
    if (lookup_.n_num == 0) return count_all ? rows.size() : 1;
    const double* a = anchor.num_row(r);
    const double half = budget * divisors_[0] * (1.0 + 1e-9) + 1e-12 * (std::abs(a[0]) + 1.0);
    auto first = std::lower_bound(rows.begin(), rows.end(), a[0] - half, [&](std::size_t row, double v) {
      return lookup_.num_row(row)[0] < v;
    });
    std::size_t hits = 0;
    for (auto p = first; p != rows.end() && lookup_.num_row(*p)[0] <= a[0] + half; ++p) {
      if (numeric_distance(a, lookup_.num_row(*p), divisors_) <= budget) {
        ++hits;
        if (!count_all) return hits;
      }
    }
    return hits;
  }

 private:
  const QiMatrix& lookup_;
  std::vector<double> divisors_;
  std::unordered_map<TupleKey, std::size_t, TupleKeyHash> class_size_;
  std::unordered_map<TupleKey, std::vector<std::size_t>, TupleKeyHash> groups_;
};

// Encodes both tables of one IDR comparison against a shared dictionary.
struct EncodedPair {
  ResolvedQi qi;
  QiMatrix real;
  QiMatrix synth;
};

inline EncodedPair encode_pair(const Table& real, const Table& synth, const MatchRule& rule) {
  EncodedPair p;
  p.qi = resolve_qi(real.schema(), rule);
  QiDictionary dict(p.qi.categorical.size());
  p.real = dict.encode(real, p.qi);
  p.synth = dict.encode(synth, p.qi);
  return p;
}

inline double directional_risk(const QiMatrix& anchor, const LookupIndex& index, double budget,
                               RelaxedClassMode mode) {
  std::vector<double> terms(anchor.rows, 0.0);
  parallel_for(anchor.rows, [&](std::size_t s) {
    const std::size_t k = index.class_size(anchor, s);
    if (k > 0) {
      terms[s] = 1.0 / static_cast<double>(k);
      return;
    }
    if (mode == RelaxedClassMode::drop || budget == 0.0) return;
    const std::size_t hits = index.matches(anchor, s, budget, mode == RelaxedClassMode::relaxed_count);
    if (hits == 0) return;
    terms[s] = mode == RelaxedClassMode::unit ? 1.0 : 1.0 / static_cast<double>(hits);
  });
  double sum = 0.0;
  for (double t : terms) sum += t;
  return sum / static_cast<double>(anchor.rows);
}

}  // namespace detail

// For each anchor row, the number of lookup rows sharing its exact tuple on
// `qi_columns` (numeric columns by value, everything else by text).
inline std::vector<std::size_t> equivalence_class_sizes(const Table& anchor, const Table& lookup,
                                                        const std::vector<std::string>& qi_columns) {
  struct Col {
    std::size_t a, l;
    bool numeric;
  };
  std::vector<Col> cols;
  for (const auto& name : qi_columns) {
    const auto a = anchor.schema().index_of(name);
    const auto l = lookup.schema().index_of(name);
    cols.push_back({a, l, anchor.is_numeric(a) && lookup.is_numeric(l)});
  }
  std::vector<std::unordered_map<std::string, std::uint64_t>> dict(cols.size());
  auto key = [&](const Table& t, std::size_t r, bool is_anchor) {
    detail::TupleKey k;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto c = is_anchor ? cols[j].a : cols[j].l;
      if (cols[j].numeric) {
        const double v = t.numeric(r, c);
        k.parts.push_back(std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v));
      } else {
        auto [it, _] = dict[j].try_emplace(t.text(r, c), dict[j].size());
        k.parts.push_back(it->second);
      }
    }
    return k;
  };
  std::unordered_map<detail::TupleKey, std::size_t, detail::TupleKeyHash> sizes;
  for (std::size_t r = 0; r < lookup.rows(); ++r) ++sizes[key(lookup, r, false)];
  std::vector<std::size_t> out(anchor.rows());
  for (std::size_t r = 0; r < anchor.rows(); ++r) {
    auto it = sizes.find(key(anchor, r, true));
    out[r] = it == sizes.end() ? 0 : it->second;
  }
  return out;
}

// 1 iff some candidate agrees with anchor row `row` on every categorical QI
// and lies within the budget on the numeric QIs.
inline int match_indicator(const Table& anchor, std::size_t row, const Table& candidates,
                           const MatchRule& rule) {
  const auto pair = detail::encode_pair(anchor, candidates, rule);
  for (std::size_t r = 0; r < pair.synth.rows; ++r) {
    if (!std::equal(pair.real.cat_row(row), pair.real.cat_row(row) + pair.real.n_cat,
                    pair.synth.cat_row(r))) {
      continue;
    }
    if (detail::numeric_distance(pair.real.num_row(row), pair.synth.num_row(r), pair.qi.divisors) <=
        rule.budget) {
      return 1;
    }
  }
  return 0;
}

struct IdrResult {
  double value = 0.0;
  double real_to_synth = 0.0;
  double synth_to_real = 0.0;
};

// Precomputed lookup structures for one (real, synth) pair, reusable across
// budgets.
class IdrEvaluator {
 public:
  IdrEvaluator(const Table& real, const Table& synth, const MatchRule& rule)
      : rule_(rule), pair_(detail::encode_pair(real, synth, rule)) {
    if (real.rows() == 0 || synth.rows() == 0) {
      throw Error(Errc::empty_table, "IDR needs nonempty real and synthetic tables");
    }
    synth_index_.emplace(pair_.synth, pair_.qi.divisors);
    real_index_.emplace(pair_.real, pair_.qi.divisors);
  }

  IdrResult at(double budget) const {
    if (!(budget >= 0.0) || !std::isfinite(budget)) {
      throw Error(Errc::config_error, "budget must be a finite nonnegative number");
    }
    IdrResult r;
    r.real_to_synth = detail::directional_risk(pair_.real, *synth_index_, budget, rule_.relaxed_class_mode);
    r.synth_to_real = detail::directional_risk(pair_.synth, *real_index_, budget, rule_.relaxed_class_mode);
    r.value = std::max(r.real_to_synth, r.synth_to_real);
    return r;
  }

  const std::vector<std::string>& categorical_qi() const noexcept { return pair_.qi.categorical; }
  const std::vector<std::string>& numeric_qi() const noexcept { return pair_.qi.numeric; }

 private:
  MatchRule rule_;
  detail::EncodedPair pair_;
  std::optional<detail::LookupIndex> synth_index_;
  std::optional<detail::LookupIndex> real_index_;
};

inline IdrResult idr_detail(const Table& real, const Table& synth, const MatchRule& rule) {
  return IdrEvaluator(real, synth, rule).at(rule.budget);
}

inline double idr(const Table& real, const Table& synth, const MatchRule& rule) {
  return idr_detail(real, synth, rule).value;
}

inline void require_ascending(const std::vector<double>& budgets) {
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (!(budgets[i] >= 0.0) || !std::isfinite(budgets[i])) {
      throw Error(Errc::config_error, "budgets must be finite and nonnegative");
    }
    if (i && !(budgets[i] > budgets[i - 1])) {
      throw Error(Errc::config_error, "budgets must be strictly ascending");
    }
  }
}

// IDR at every budget; the rule's own budget is ignored.
inline std::vector<std::pair<double, double>> sd_idr_sweep(const Table& real, const Table& synth,
                                                           const MatchRule& rule,
                                                           const std::vector<double>& budgets) {
  require_ascending(budgets);
  const IdrEvaluator eval(real, synth, rule);
  std::vector<std::pair<double, double>> out;
  for (double b : budgets) out.emplace_back(b, eval.at(b).value);
  return out;
}

enum class AttackerProvenance { holdout, population_resample, external };

constexpr std::string_view to_string(AttackerProvenance p) {
  switch (p) {
    case AttackerProvenance::holdout: return "holdout";
    case AttackerProvenance::population_resample: return "population-resample";
    case AttackerProvenance::external: return "external";
  }
  return "";
}

inline std::optional<AttackerProvenance> parse_attacker_provenance(std::string_view s) {
  for (auto p : {AttackerProvenance::holdout, AttackerProvenance::population_resample,
                 AttackerProvenance::external}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

struct AttackerSample {
  Table table;
  AttackerProvenance provenance = AttackerProvenance::holdout;
};

struct MiaResult {
  double value = 0.0;
  double idr_synth = 0.0;
  double idr_attacker = 0.0;
  std::optional<double> ratio;
};

inline MiaResult sd_mia(const Table& real, const Table& synth, const AttackerSample& attacker,
                        const MatchRule& rule) {
  MiaResult r;
  r.idr_synth = idr(real, synth, rule);
  r.idr_attacker = idr(real, attacker.table, rule);
  r.value = r.idr_synth - r.idr_attacker;
  if (r.idr_attacker > 0.0) r.ratio = r.idr_synth / r.idr_attacker;
  return r;
}

// Sign-based reading of SD-MIA; `band` is the half-width treated as zero.
inline std::string mia_diagnostic(double mia, double band) {
  if (std::abs(mia) < band) return "no-leak";
  return mia > 0 ? "overfit" : "underfit";
}

struct PrivacyConfig {
  std::vector<double> budgets{0, 1, 2, 3};
  std::vector<std::string> qi_columns;
  std::map<std::string, double> divisors;
  double threshold = 0.09;
  RelaxedClassMode relaxed_class_mode = RelaxedClassMode::unit;
  double no_leak_band = 0.005;
};

struct BudgetResult {
  double budget = 0.0;
  IdrResult sd_idr;
  MiaResult sd_mia;
  std::string diagnostic;
  bool within_threshold = true;
};

struct PrivacyReport {
  std::vector<BudgetResult> per_budget;
  double threshold = 0.09;
  bool pass = true;
  std::vector<double> failing_budgets;
  std::vector<std::string> categorical_qi;
  std::vector<std::string> numeric_qi;
  RelaxedClassMode relaxed_class_mode = RelaxedClassMode::unit;
  AttackerProvenance attacker_provenance = AttackerProvenance::holdout;
  double no_leak_band = 0.005;
};

inline PrivacyReport evaluate_privacy(const Table& real, const Table& synth,
                                      const AttackerSample& attacker, const PrivacyConfig& config) {
  require_ascending(config.budgets);
  if (!(config.threshold > 0.0)) throw Error(Errc::config_error, "threshold must be positive");
  MatchRule rule;
  rule.qi_columns = config.qi_columns;
  rule.divisors = config.divisors;
  rule.relaxed_class_mode = config.relaxed_class_mode;
  const IdrEvaluator vs_synth(real, synth, rule);
  const IdrEvaluator vs_attacker(real, attacker.table, rule);
  PrivacyReport rep;
  rep.threshold = config.threshold;
  rep.categorical_qi = vs_synth.categorical_qi();
  rep.numeric_qi = vs_synth.numeric_qi();
  rep.relaxed_class_mode = config.relaxed_class_mode;
  rep.attacker_provenance = attacker.provenance;
  rep.no_leak_band = config.no_leak_band;
  for (double b : config.budgets) {
    BudgetResult br;
    br.budget = b;
    br.sd_idr = vs_synth.at(b);
    br.sd_mia.idr_synth = br.sd_idr.value;
    br.sd_mia.idr_attacker = vs_attacker.at(b).value;
    br.sd_mia.value = br.sd_mia.idr_synth - br.sd_mia.idr_attacker;
    if (br.sd_mia.idr_attacker > 0.0) br.sd_mia.ratio = br.sd_mia.idr_synth / br.sd_mia.idr_attacker;
    br.diagnostic = mia_diagnostic(br.sd_mia.value, config.no_leak_band);
    br.within_threshold = br.sd_idr.value <= config.threshold;
    if (!br.within_threshold) {
      rep.pass = false;
      rep.failing_budgets.push_back(b);
    }
    rep.per_budget.push_back(std::move(br));
  }
  return rep;
}

}  // namespace synqp
