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

// Full benchmark runs: simulate, split, perturb, generate or ingest,
// evaluate, report. Gates and the evaluation matrix are always derived
// from the report JSON itself, so a saved report can be re-gated.

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "synqp/dp_noise.hpp"
#include "synqp/error.hpp"
#include "synqp/generators.hpp"
#include "synqp/io.hpp"
#include "synqp/parallel.hpp"
#include "synqp/privacy.hpp"
#include "synqp/quality.hpp"
#include "synqp/rng.hpp"
#include "synqp/simulate.hpp"
#include "synqp/table.hpp"
#include "synqp/version.hpp"

namespace synqp {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct QualityGate {
  double max_average_hd = 0.2;
  double min_auc_ratio = 0.8;
};

struct QualitySettings {
  std::size_t bins = 32;
  LogisticHyper logistic;
  QualityGate gate;
};

struct PrivacySettings {
  PrivacyConfig config;
  // "train" or "population".
  std::string real_side = "train";
  AttackerProvenance attacker = AttackerProvenance::holdout;
  std::string attacker_path;
};

struct GeneratorEntry {
  std::string label;
  std::optional<GeneratorKind> kind;  // empty for an external CSV
  GeneratorOptions options;
  std::string synthetic_path;
  std::optional<double> epsilon_dp;
};

struct PipelineConfig {
  fs::path base_dir;
  std::string simulation;
  std::string study_schema;
  std::size_t rows = 10000;
  std::size_t train_count = 7000;
  std::size_t holdout_count = 3000;
  std::optional<std::size_t> synthetic_rows;
  std::vector<double> epsilons{0.0};
  std::vector<std::string> dp_columns;
  LaplaceParam laplace_param = LaplaceParam::stddev;
  std::vector<GeneratorEntry> generators;
  QualitySettings quality;
  PrivacySettings privacy;
  std::uint64_t seed = 0;
  fs::path output_dir = "out";
};

inline std::string budget_key(double b) { return format_real(b); }

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline void validate(const PipelineConfig& c) {
  if (c.rows == 0) throw Error(Errc::config_error, "rows must be positive");
  if (c.train_count == 0 || c.holdout_count == 0) {
    throw Error(Errc::config_error, "train_count and holdout_count must be positive");
  }
  if (c.train_count + c.holdout_count > c.rows) {
    throw Error(Errc::config_error, "train_count + holdout_count exceeds simulated rows");
  }
  if (c.synthetic_rows && *c.synthetic_rows == 0) {
    throw Error(Errc::config_error, "synthetic_rows must be positive");
  }
  std::set<double> seen_eps;
  for (double e : c.epsilons) {
    if (!(e >= 0.0 && e <= 1.0)) throw Error(Errc::config_error, "epsilon_dp must lie in [0, 1]");
    if (!seen_eps.insert(e).second) throw Error(Errc::config_error, "duplicate epsilon_dp");
  }
  if (c.quality.bins == 0) throw Error(Errc::config_error, "bins must be positive");
  require_ascending(c.privacy.config.budgets);
  if (c.privacy.config.budgets.empty()) throw Error(Errc::config_error, "at least one budget");
  if (!(c.privacy.config.threshold > 0.0)) throw Error(Errc::config_error, "threshold must be positive");
  if (c.privacy.real_side != "train" && c.privacy.real_side != "population") {
    throw Error(Errc::config_error, "privacy.real_side must be train or population");
  }
  if (c.privacy.attacker == AttackerProvenance::external && c.privacy.attacker_path.empty()) {
    throw Error(Errc::config_error, "external attacker sample needs a path");
  }
  if (c.privacy.attacker == AttackerProvenance::population_resample && c.holdout_count >= c.rows) {
    throw Error(Errc::config_error, "attacker resample must be smaller than the population");
  }
  std::set<std::string> labels;
  for (const auto& g : c.generators) {
    if (g.label.empty()) throw Error(Errc::config_error, "generator label must be nonempty");
    if (!labels.insert(g.label).second) throw Error(Errc::config_error, "duplicate generator label " + g.label);
    if (g.label.find_first_of("/\\") != std::string::npos || g.label.front() == '.') {
      throw Error(Errc::config_error, "generator label is not a plain name: " + g.label);
    }
  }
}

}  // namespace detail

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const fs::path& base) {
  using detail::get_or;
  PipelineConfig c;
  c.base_dir = base;
  try {
    c.simulation = j.at("simulation").get<std::string>();
    c.study_schema = j.at("study_schema").get<std::string>();
    c.rows = get_or<std::size_t>(j, "rows", c.rows);
    if (j.contains("split")) {
      c.train_count = get_or<std::size_t>(j["split"], "train_count", c.train_count);
      c.holdout_count = get_or<std::size_t>(j["split"], "holdout_count", c.holdout_count);
    }
    if (j.contains("synthetic_rows") && !j["synthetic_rows"].is_null()) {
      c.synthetic_rows = j["synthetic_rows"].get<std::size_t>();
    }
    if (j.contains("dp")) {
      const auto& d = j["dp"];
      c.epsilons = get_or(d, "epsilons", c.epsilons);
      c.dp_columns = get_or(d, "columns", c.dp_columns);
      if (d.contains("laplace_param")) {
        auto p = parse_laplace_param(d["laplace_param"].get<std::string>());
        if (!p) throw Error(Errc::config_error, "laplace_param must be stddev or scale");
        c.laplace_param = *p;
      }
    }
    for (const auto& g : j.value("generators", nlohmann::json::array())) {
      GeneratorEntry e;
      if (g.contains("external")) {
        e.synthetic_path = g["external"].get<std::string>();
        e.label = get_or<std::string>(g, "label", "");
        if (g.contains("epsilon_dp") && !g["epsilon_dp"].is_null()) e.epsilon_dp = g["epsilon_dp"].get<double>();
      } else {
        const auto name = g.at("kind").get<std::string>();
        e.kind = parse_generator_kind(name);
        if (!e.kind) throw Error(Errc::config_error, "unknown generator kind " + name);
        e.label = get_or<std::string>(g, "label", name);
        e.options.interpolate = get_or(g, "interpolate", false);
      }
      c.generators.push_back(std::move(e));
    }
    if (j.contains("quality")) {
      const auto& q = j["quality"];
      c.quality.bins = get_or(q, "bins", c.quality.bins);
      if (q.contains("logistic")) {
        const auto& l = q["logistic"];
        c.quality.logistic.learning_rate = get_or(l, "learning_rate", c.quality.logistic.learning_rate);
        c.quality.logistic.iterations = get_or(l, "iterations", c.quality.logistic.iterations);
        c.quality.logistic.l2 = get_or(l, "l2", c.quality.logistic.l2);
      }
      if (q.contains("gate")) {
        c.quality.gate.max_average_hd = get_or(q["gate"], "max_average_hd", c.quality.gate.max_average_hd);
        c.quality.gate.min_auc_ratio = get_or(q["gate"], "min_auc_ratio", c.quality.gate.min_auc_ratio);
      }
    }
    if (j.contains("privacy")) {
      const auto& p = j["privacy"];
      auto& pc = c.privacy.config;
      pc.budgets = get_or(p, "budgets", pc.budgets);
      pc.qi_columns = get_or(p, "qi_columns", pc.qi_columns);
      pc.divisors = get_or(p, "divisors", pc.divisors);
      pc.threshold = get_or(p, "threshold", pc.threshold);
      pc.no_leak_band = get_or(p, "no_leak_band", pc.no_leak_band);
      if (p.contains("relaxed_class_mode")) {
        auto m = parse_relaxed_class_mode(p["relaxed_class_mode"].get<std::string>());
        if (!m) throw Error(Errc::config_error, "relaxed_class_mode must be unit, relaxed_count or drop");
        pc.relaxed_class_mode = *m;
      }
      c.privacy.real_side = get_or<std::string>(p, "real_side", c.privacy.real_side);
      if (p.contains("attacker")) {
        const auto& a = p["attacker"];
        auto prov = parse_attacker_provenance(a.at("provenance").get<std::string>());
        if (!prov) throw Error(Errc::config_error, "attacker provenance must be holdout, population-resample or external");
        c.privacy.attacker = *prov;
        c.privacy.attacker_path = get_or<std::string>(a, "path", "");
      }
    }
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = base / get_or<std::string>(j, "output_dir", "out");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config_error, std::string("pipeline config: ") + e.what());
  }
  std::size_t external = 0;
  for (auto& g : c.generators) {
    if (!g.kind && g.label.empty()) g.label = "external_" + std::to_string(++external);
  }
  detail::validate(c);
  return c;
}

inline PipelineConfig load_pipeline_config(const fs::path& path) {
  return pipeline_config_from_json(detail::load_json(path), path.parent_path());
}

// Every setting that can change a number in the report. Output location is
// excluded so that runs into different directories stay comparable.
inline ojson resolved_config_json(const PipelineConfig& c) {
  ojson gens = ojson::array();
  for (const auto& g : c.generators) {
    if (g.kind) {
      gens.push_back({{"label", g.label},
                      {"kind", std::string(to_string(*g.kind))},
                      {"interpolate", g.options.interpolate}});
    } else {
      ojson e{{"label", g.label}, {"external", g.synthetic_path}};
      e["epsilon_dp"] = g.epsilon_dp ? ojson(*g.epsilon_dp) : ojson(nullptr);
      gens.push_back(std::move(e));
    }
  }
  const auto& pc = c.privacy.config;
  ojson divisors = ojson::object();
  for (const auto& [k, v] : pc.divisors) divisors[k] = v;
  ojson out;
  out["simulation"] = c.simulation;
  out["study_schema"] = c.study_schema;
  out["rows"] = c.rows;
  out["split"] = {{"train_count", c.train_count}, {"holdout_count", c.holdout_count}};
  out["synthetic_rows"] = c.synthetic_rows ? ojson(*c.synthetic_rows) : ojson(nullptr);
  out["dp"] = {{"epsilons", c.epsilons},
               {"columns", c.dp_columns},
               {"laplace_param", std::string(to_string(c.laplace_param))}};
  out["generators"] = gens;
  out["quality"] = {{"bins", c.quality.bins},
                    {"logistic",
                     {{"learning_rate", c.quality.logistic.learning_rate},
                      {"iterations", c.quality.logistic.iterations},
                      {"l2", c.quality.logistic.l2}}},
                    {"gate",
                     {{"max_average_hd", c.quality.gate.max_average_hd},
                      {"min_auc_ratio", c.quality.gate.min_auc_ratio}}}};
  out["privacy"] = {{"budgets", pc.budgets},
                    {"qi_columns", pc.qi_columns},
                    {"divisors", divisors},
                    {"threshold", pc.threshold},
                    {"relaxed_class_mode", std::string(to_string(pc.relaxed_class_mode))},
                    {"no_leak_band", pc.no_leak_band},
                    {"real_side", c.privacy.real_side},
                    {"attacker",
                     {{"provenance", std::string(to_string(c.privacy.attacker))},
                      {"path", c.privacy.attacker_path}}}};
  out["seed"] = c.seed;
  return out;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// SYNQP_SEED, when set, replaces the configured master seed.
inline std::optional<std::uint64_t> seed_from_env() {
  const char* s = std::getenv("SYNQP_SEED");
  if (!s || !*s) return std::nullopt;
  std::uint64_t v = 0;
  const char* end = s + std::char_traits<char>::length(s);
  auto [p, ec] = std::from_chars(s, end, v);
  if (ec != std::errc() || p != end) throw Error(Errc::config_error, "SYNQP_SEED is not an unsigned integer");
  return v;
}

// ---- Cells -----------------------------------------------------------------

struct CellResult {
  std::string label;
  std::string generator;
  bool external = false;
  std::optional<double> epsilon_dp;
  std::string real_side;
  ojson artifacts = ojson::object();
  FidelityReport fidelity;
  MleResult mle;
  QualityGate gate;
  PrivacyReport privacy;
};

// Quality against `real_quality` (with `test` as the MLE test set) and
// privacy against `real_privacy`.
inline void score_cell(CellResult& cell, const Table& synth, const Table& real_quality, const Table& test,
                       const Table& real_privacy, const AttackerSample& attacker,
                       const QualitySettings& quality, const PrivacyConfig& privacy) {
  try {
    cell.fidelity = compare_fidelity(real_quality, synth, quality.bins);
  } catch (const Error& e) {
    e.rethrow_with_context("fidelity");
  }
  try {
    cell.mle = mle(real_quality, synth, test, real_quality.schema(), quality.logistic);
  } catch (const Error& e) {
    e.rethrow_with_context("machine-learning efficiency");
  }
  try {
    cell.privacy = evaluate_privacy(real_privacy, synth, attacker, privacy);
  } catch (const Error& e) {
    e.rethrow_with_context("privacy");
  }
  cell.gate = quality.gate;
}

inline std::vector<std::string> privacy_notes(const PrivacyReport& p) {
  std::vector<std::string> notes{
      "IDR is the larger of two directional risks: real-to-synthetic averaged over every real row and "
      "synthetic-to-real averaged over every synthetic row.",
      "Equivalence class sizes use exact quasi-identifier equality at every budget; only the match indicator "
      "is relaxed, accepting lookup rows with equal categorical values and sum |difference| / divisor <= budget.",
  };
  switch (p.relaxed_class_mode) {
    case RelaxedClassMode::unit:
      notes.push_back("relaxed_class_mode unit: a budget match whose exact class is empty contributes 1.");
      break;
    case RelaxedClassMode::relaxed_count:
      notes.push_back("relaxed_class_mode relaxed_count: a budget match whose exact class is empty contributes "
                      "1 / (budget-matching rows); this mode is not monotone in budget.");
      break;
    case RelaxedClassMode::drop:
      notes.push_back("relaxed_class_mode drop: a budget match whose exact class is empty contributes 0.");
      break;
  }
  std::string numeric;
  for (const auto& n : p.numeric_qi) numeric += (numeric.empty() ? "" : ", ") + n;
  notes.push_back("Numeric quasi-identifiers in the budget sum: " + (numeric.empty() ? "none" : numeric) + ".");
  notes.push_back("SD-MIA diagnostic: |SD-MIA| < " + format_real(p.no_leak_band) +
                  " is no-leak, positive is overfit, negative is underfit.");
  return notes;
}

inline ojson cell_to_json(const CellResult& c) {
  ojson q;
  q["bins"] = c.fidelity.bins;
  ojson cols = ojson::array();
  for (const auto& col : c.fidelity.per_column) {
    cols.push_back({{"column", col.column}, {"hellinger", col.hellinger}, {"grade", col.grade}});
  }
  q["per_column"] = cols;
  q["average_hellinger"] = c.fidelity.average;
  q["grade"] = c.fidelity.grade;
  q["mle"] = {{"auc_synth", c.mle.auc_synth}, {"auc_real_baseline", c.mle.auc_real_baseline}};
  q["gate"] = {{"max_average_hd", c.gate.max_average_hd}, {"min_auc_ratio", c.gate.min_auc_ratio}};

  const auto& p = c.privacy;
  ojson pj;
  ojson budgets = ojson::array(), sd_idr = ojson::object(), directional = ojson::object(),
        idr_attacker = ojson::object(), sd_mia = ojson::object(), ratio = ojson::object(),
        diagnostics = ojson::object();
  for (const auto& b : p.per_budget) {
    const auto k = budget_key(b.budget);
    budgets.push_back(b.budget);
    sd_idr[k] = b.sd_idr.value;
    directional[k] = {{"real_to_synth", b.sd_idr.real_to_synth}, {"synth_to_real", b.sd_idr.synth_to_real}};
    idr_attacker[k] = b.sd_mia.idr_attacker;
    sd_mia[k] = b.sd_mia.value;
    ratio[k] = b.sd_mia.ratio ? ojson(*b.sd_mia.ratio) : ojson(nullptr);
    diagnostics[k] = b.diagnostic;
  }
  pj["budgets"] = budgets;
  pj["sd_idr"] = sd_idr;
  pj["sd_idr_directional"] = directional;
  pj["idr_attacker"] = idr_attacker;
  pj["sd_mia"] = sd_mia;
  pj["mia_ratio"] = ratio;
  pj["threshold"] = p.threshold;
  pj["diagnostics"] = diagnostics;
  pj["no_leak_band"] = p.no_leak_band;
  pj["quasi_identifiers"] = {{"categorical", p.categorical_qi}, {"numeric", p.numeric_qi}};
  pj["relaxed_class_mode"] = std::string(to_string(p.relaxed_class_mode));
  pj["real_side"] = c.real_side;
  pj["attacker_provenance"] = std::string(to_string(p.attacker_provenance));
  pj["interpretation_notes"] = privacy_notes(p);

  ojson out;
  out["label"] = c.label;
  out["generator"] = c.generator;
  out["source"] = c.external ? "external" : "built-in";
  out["epsilon_dp"] = c.epsilon_dp ? ojson(*c.epsilon_dp) : ojson(nullptr);
  out["artifacts"] = c.artifacts;
  out["quality"] = q;
  out["privacy"] = pj;
  return out;
}

// ---- Gates -----------------------------------------------------------------

namespace detail {

inline const ojson& field(const ojson& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(Errc::config_error, "report is missing " + where + "." + key);
  }
  return j.at(key);
}

inline double number(const ojson& j, const char* key, const std::string& where) {
  const auto& v = field(j, key, where);
  if (!v.is_number()) throw Error(Errc::config_error, "report field " + where + "." + key + " is not a number");
  return v.get<double>();
}

}  // namespace detail

// Recomputes every verdict in `report` from its stored numbers and returns
// the exit code: 0 when every cell passes both gates, 2 otherwise.
inline int recompute_gates(ojson& report) {
  using detail::field;
  using detail::number;
  auto& cells = report["cells"];
  if (!cells.is_array()) throw Error(Errc::config_error, "report is missing cells");
  ojson rows = ojson::array();
  bool all_pass = true;
  for (auto& cell : cells) {
    const std::string label = field(cell, "label", "cell").get<std::string>();
    const std::string where = "cell '" + label + "'";
    auto& q = cell["quality"];
    auto& gate = q["gate"];
    auto& m = q["mle"];
    const double avg = number(q, "average_hellinger", where + ".quality");
    const double auc_s = number(m, "auc_synth", where + ".quality.mle");
    const double auc_b = number(m, "auc_real_baseline", where + ".quality.mle");
    const double max_hd = number(gate, "max_average_hd", where + ".quality.gate");
    const double min_ratio = number(gate, "min_auc_ratio", where + ".quality.gate");
    const bool hd_ok = avg < max_hd;
    const bool mle_ok = auc_s >= min_ratio * auc_b;
    m["auc_ratio"] = auc_b > 0 ? ojson(auc_s / auc_b) : ojson(nullptr);
    gate["hellinger_pass"] = hd_ok;
    gate["mle_pass"] = mle_ok;
    gate["pass"] = hd_ok && mle_ok;

    auto& p = cell["privacy"];
    const double threshold = number(p, "threshold", where + ".privacy");
    const auto& sd_idr = field(p, "sd_idr", where + ".privacy");
    ojson verdicts = ojson::object();
    ojson failing = ojson::array();
    for (const auto& b : field(p, "budgets", where + ".privacy")) {
      const auto k = budget_key(b.get<double>());
      const double v = number(sd_idr, k.c_str(), where + ".privacy.sd_idr");
      const bool ok = v <= threshold;
      verdicts[k] = ok ? "pass" : "fail";
      if (!ok) failing.push_back(b);
    }
    const bool privacy_ok = failing.empty();
    p["budget_verdicts"] = verdicts;
    p["failing_budgets"] = failing;
    p["verdict"] = privacy_ok ? "pass" : "fail";

    const bool pass = hd_ok && mle_ok && privacy_ok;
    cell["pass"] = pass;
    all_pass = all_pass && pass;
    rows.push_back({{"cell", label},
                    {"generator", cell.value("generator", "")},
                    {"epsilon_dp", cell.value("epsilon_dp", ojson(nullptr))},
                    {"quality_pass", hd_ok && mle_ok},
                    {"privacy_pass", privacy_ok},
                    {"pass", pass}});
  }
  report["evaluation_matrix"] = {{"rows", rows}, {"all_pass", all_pass}};
  return all_pass ? 0 : 2;
}

inline ojson assemble_report(ojson metadata, ojson data, const std::vector<ojson>& cells) {
  ojson report;
  report["metadata"] = std::move(metadata);
  report["data"] = std::move(data);
  report["cells"] = cells;
  recompute_gates(report);
  return report;
}

// Report with run-varying fields removed, for equality comparisons.
inline ojson normalize_report(ojson report) {
  if (report.contains("metadata") && report["metadata"].is_object()) report["metadata"].erase("timestamps");
  return report;
}

// ---- Rendering ---------------------------------------------------------------

enum class ReportFormat { json, markdown, csv };

inline std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  if (s == "csv") return ReportFormat::csv;
  return std::nullopt;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

inline std::string opt_number(const ojson& v, int digits) {
  return v.is_number() ? fixed(v.get<double>(), digits) : std::string("n/a");
}

inline std::string eps_text(const ojson& cell) {
  const auto& e = cell.value("epsilon_dp", ojson(nullptr));
  return e.is_number() ? format_real(e.get<double>()) : std::string("n/a");
}

inline std::string yes_no(bool b) { return b ? "pass" : "fail"; }

}  // namespace detail

inline std::string render_markdown(const ojson& report) {
  using detail::eps_text;
  using detail::fixed;
  std::string out = "# synqp evaluation report\n\n";
  if (report.contains("metadata")) {
    const auto& m = report["metadata"];
    if (m.contains("master_seed") && !m["master_seed"].is_null()) {
      out += "- master seed: " + m["master_seed"].dump() + "\n";
    }
    if (m.contains("config_hash")) out += "- config hash: " + m["config_hash"].get<std::string>() + "\n";
    out += "\n";
  }
  const auto& cells = report.at("cells");

  std::vector<std::string> columns;
  for (const auto& cell : cells) {
    for (const auto& col : cell["quality"]["per_column"]) {
      const auto name = col["column"].get<std::string>();
      if (std::find(columns.begin(), columns.end(), name) == columns.end()) columns.push_back(name);
    }
  }
  out += "## Fidelity (Hellinger distance per column)\n\n| Generator | epsilon_dp |";
  for (const auto& c : columns) out += " " + c + " |";
  out += " Average HD | Grade | AUC synth | AUC baseline | Quality gate |\n|---|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out += "---|";
  out += "---|---|---|---|---|\n";
  for (const auto& cell : cells) {
    const auto& q = cell["quality"];
    out += "| " + cell["label"].get<std::string>() + " | " + eps_text(cell) + " |";
    for (const auto& name : columns) {
      std::string v = "n/a";
      for (const auto& col : q["per_column"]) {
        if (col["column"] == name) v = fixed(col["hellinger"].get<double>(), 4);
      }
      out += " " + v + " |";
    }
    out += " " + fixed(q["average_hellinger"].get<double>(), 4) + " | " + q["grade"].get<std::string>() + " | " +
           fixed(q["mle"]["auc_synth"].get<double>(), 4) + " | " +
           fixed(q["mle"]["auc_real_baseline"].get<double>(), 4) + " | " +
           detail::yes_no(q["gate"].value("pass", false)) + " |\n";
  }

  out += "\n## Privacy (per budget)\n\n"
         "| Generator | epsilon_dp | Budget | SD-IDR | SD-MIA | MIA ratio | Diagnostic | Threshold | Verdict |\n"
         "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& cell : cells) {
    const auto& p = cell["privacy"];
    for (const auto& b : p["budgets"]) {
      const auto k = budget_key(b.get<double>());
      const auto& ratio = p["mia_ratio"].value(k, ojson(nullptr));
      out += "| " + cell["label"].get<std::string>() + " | " + eps_text(cell) + " | " + k + " | " +
             detail::sci(p["sd_idr"][k].get<double>()) + " | " + detail::sci(p["sd_mia"][k].get<double>()) +
             " | " + (ratio.is_number() ? fixed(ratio.get<double>(), 3) : std::string("n/a")) + " | " +
             p["diagnostics"][k].get<std::string>() + " | " + format_real(p["threshold"].get<double>()) +
             " | " + p["budget_verdicts"].value(k, std::string("n/a")) + " |\n";
    }
  }

  out += "\n## Evaluation matrix\n\n| Cell | Generator | epsilon_dp | Quality | Privacy | Overall |\n"
         "|---|---|---|---|---|---|\n";
  if (report.contains("evaluation_matrix")) {
    for (const auto& row : report["evaluation_matrix"]["rows"]) {
      out += "| " + row["cell"].get<std::string>() + " | " + row["generator"].get<std::string>() + " | " +
             eps_text(row) + " | " + detail::yes_no(row["quality_pass"].get<bool>()) + " | " +
             detail::yes_no(row["privacy_pass"].get<bool>()) + " | " + detail::yes_no(row["pass"].get<bool>()) +
             " |\n";
    }
  }
  return out;
}

// One row per (cell, budget) after a header line.
inline std::string render_csv(const ojson& report) {
  std::string out =
      "cell,generator,epsilon_dp,budget,sd_idr,sd_idr_real_to_synth,sd_idr_synth_to_real,idr_attacker,sd_mia,"
      "mia_ratio,diagnostic,budget_verdict,average_hellinger,auc_synth,auc_real_baseline,quality_pass,"
      "privacy_pass,cell_pass\n";
  auto num = [](const ojson& v) { return v.is_number() ? format_real(v.get<double>()) : std::string(); };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  for (const auto& cell : report.at("cells")) {
    const auto& p = cell["privacy"];
    const auto& q = cell["quality"];
    for (const auto& b : p["budgets"]) {
      const auto k = budget_key(b.get<double>());
      std::vector<std::string> f{cell["label"].get<std::string>(),
                                 cell["generator"].get<std::string>(),
                                 num(cell["epsilon_dp"]),
                                 k,
                                 num(p["sd_idr"][k]),
                                 num(p["sd_idr_directional"][k]["real_to_synth"]),
                                 num(p["sd_idr_directional"][k]["synth_to_real"]),
                                 num(p["idr_attacker"][k]),
                                 num(p["sd_mia"][k]),
                                 num(p["mia_ratio"].value(k, ojson(nullptr))),
                                 p["diagnostics"][k].get<std::string>(),
                                 p["budget_verdicts"].value(k, std::string()),
                                 num(q["average_hellinger"]),
                                 num(q["mle"]["auc_synth"]),
                                 num(q["mle"]["auc_real_baseline"]),
                                 flag(q["gate"].value("pass", false)),
                                 flag(p.value("verdict", "") == "pass"),
                                 flag(cell.value("pass", false))};
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (i) out.push_back(',');
        csv::append_field(out, f[i], false);
      }
      out.push_back('\n');
    }
  }
  return out;
}

inline std::string render_report(const ojson& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::json: return report.dump(2) + "\n";
    case ReportFormat::markdown: return render_markdown(report);
    case ReportFormat::csv: return render_csv(report);
  }
  return {};
}

// ---- Artifacts ---------------------------------------------------------------

inline void write_histograms(const FidelityReport& f, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& col : f.per_column) {
    std::string out;
    if (!col.real.categories.empty() || col.real.edges.empty()) {
      out = "category,p_real,p_synth\n";
      for (std::size_t i = 0; i < col.real.p.size(); ++i) {
        csv::append_field(out, col.real.categories[i], false);
        out += "," + format_real(col.real.p[i]) + "," + format_real(col.synth.p[i]) + "\n";
      }
    } else {
      out = "bin_lo,bin_hi,p_real,p_synth\n";
      for (std::size_t i = 0; i < col.real.p.size(); ++i) {
        out += format_real(col.real.edges[i]) + "," + format_real(col.real.edges[i + 1]) + "," +
               format_real(col.real.p[i]) + "," + format_real(col.synth.p[i]) + "\n";
      }
    }
    write_file_atomic(dir / (col.column + ".csv"), out);
  }
}

namespace detail {

// Writes into a private staging directory and publishes its entries into
// `out` only after the whole run succeeded; report.json moves last.
class Staging {
 public:
  explicit Staging(fs::path out) : out_(std::move(out)) {
    fs::create_directories(out_);
    const auto tick = std::chrono::steady_clock::now().time_since_epoch().count();
    dir_ = out_ / (".staging-" + hex64(static_cast<std::uint64_t>(tick)));
    fs::create_directories(dir_);
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  const fs::path& dir() const noexcept { return dir_; }

  void publish(const std::string& last) {
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(dir_)) {
      if (e.path().filename() != last) entries.push_back(e.path());
    }
    std::sort(entries.begin(), entries.end());
    if (fs::exists(dir_ / last)) entries.push_back(dir_ / last);
    for (const auto& src : entries) {
      const auto dst = out_ / src.filename();
      std::error_code ec;
      fs::remove_all(dst, ec);
      fs::rename(src, dst);
    }
  }

 private:
  fs::path out_;
  fs::path dir_;
};

}  // namespace detail

// ---- Runs ----------------------------------------------------------------------

struct CellPlan {
  std::string label;
  const GeneratorEntry* entry;
  std::optional<double> epsilon_dp;
};

inline std::vector<CellPlan> plan_cells(const PipelineConfig& c) {
  std::vector<CellPlan> plan;
  for (const auto& g : c.generators) {
    if (g.kind) {
      for (double e : c.epsilons) plan.push_back({g.label + "_eps" + format_real(e), &g, e});
    } else {
      plan.push_back({g.label, &g, g.epsilon_dp});
    }
  }
  return plan;
}

struct RunOptions {
  // Echoed into report metadata.
  ojson invocation = ojson::object();
  std::string seed_source = "config";
};

struct RunResult {
  ojson report;
  int exit_code = 0;
  fs::path report_path;
};

inline RunResult run_pipeline(const PipelineConfig& config, const RunOptions& options = {}) {
  const std::string started = utc_timestamp();
  const ojson resolved = resolved_config_json(config);
  const fs::path sim_path = config.base_dir / config.simulation;
  const nlohmann::json sim_doc = detail::load_json(sim_path);
  ojson resolved_with_sim = resolved;
  resolved_with_sim["simulation_config"] = ojson::parse(sim_doc.dump());

  detail::Staging staging(config.output_dir);
  const fs::path stage = staging.dir();
  const Stream root(config.seed);

  SimulationConfig sim;
  Table population;
  try {
    sim = simulation_config_from_json(sim_doc, sim_path.parent_path());
    population = build_population(sim, config.rows, root.child("population").key());
  } catch (const Error& e) {
    e.rethrow_with_context("simulate");
  }
  save_table(population, stage / "population.csv");
  save_schema(population.schema(), stage / "population.schema.json");

  Schema study;
  Table study_population;
  try {
    study = load_schema(config.base_dir / config.study_schema);
    study_population = population.select(study);
  } catch (const Error& e) {
    e.rethrow_with_context("study projection");
  }
  save_schema(study, stage / "study.schema.json");

  Table train, holdout;
  try {
    auto [tr, rest] = split(study_population, config.train_count, root.child("split").key());
    train = std::move(tr);
    std::vector<std::size_t> keep(config.holdout_count);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    holdout = rest.take_rows(keep);
  } catch (const Error& e) {
    e.rethrow_with_context("split");
  }
  save_table(train, stage / "train.csv");
  save_table(holdout, stage / "holdout.csv");

  const Table& real_privacy = config.privacy.real_side == "population" ? study_population : train;
  AttackerSample attacker{holdout, config.privacy.attacker};
  try {
    if (config.privacy.attacker == AttackerProvenance::population_resample) {
      attacker.table =
          split(study_population, config.holdout_count, root.child("attacker").key()).first;
    } else if (config.privacy.attacker == AttackerProvenance::external) {
      attacker.table = load_table(config.base_dir / config.privacy.attacker_path, study);
    }
  } catch (const Error& e) {
    e.rethrow_with_context("attacker sample");
  }
  if (config.privacy.attacker != AttackerProvenance::holdout) save_table(attacker.table, stage / "attacker.csv");

  const auto plan = plan_cells(config);
  std::vector<ojson> cells(plan.size());
  parallel_for(plan.size(), [&](std::size_t i) {
    const auto& p = plan[i];
    const auto cell_dir = fs::path("cells") / p.label;
    fs::create_directories(stage / cell_dir);
    const Stream cell_stream = root.child("cell").child(p.label);
    CellResult cell;
    cell.label = p.label;
    cell.epsilon_dp = p.epsilon_dp;
    cell.real_side = config.privacy.real_side;
    std::string step = "ingest";
    try {
      Table synth;
      if (p.entry->kind) {
        cell.generator = std::string(to_string(*p.entry->kind));
        step = "perturb";
        DpConfig dp;
        dp.epsilon_dp = *p.epsilon_dp;
        dp.columns = config.dp_columns;
        dp.laplace_param = config.laplace_param;
        dp.seed = cell_stream.child("dp").key();
        const Table perturbed = dp_perturb_table(train, dp);
        save_table(perturbed, stage / cell_dir / "perturbed.csv");
        cell.artifacts["perturbed"] = (cell_dir / "perturbed.csv").generic_string();
        step = "generate";
        const auto model = fit(perturbed, *p.entry->kind, p.entry->options);
        synth = generate(model, config.synthetic_rows.value_or(config.train_count),
                         cell_stream.child("generate").key());
      } else {
        cell.generator = "external";
        cell.external = true;
        synth = load_table(config.base_dir / p.entry->synthetic_path, study);
      }
      save_table(synth, stage / cell_dir / "synthetic.csv");
      cell.artifacts["synthetic"] = (cell_dir / "synthetic.csv").generic_string();
      step = "evaluate";
      score_cell(cell, synth, train, holdout, real_privacy, attacker, config.quality, config.privacy.config);
      write_histograms(cell.fidelity, stage / cell_dir / "histograms");
      cell.artifacts["histograms"] = (cell_dir / "histograms").generic_string();
    } catch (const Error& e) {
      e.rethrow_with_context("cell " + p.label + " (generator " +
                             (p.entry->kind ? std::string(to_string(*p.entry->kind)) : std::string("external")) +
                             ", epsilon_dp " + (p.epsilon_dp ? format_real(*p.epsilon_dp) : std::string("n/a")) +
                             ") " + step);
    }
    cells[i] = cell_to_json(cell);
  });

  ojson metadata;
  metadata["tool"] = "synqp";
  metadata["version"] = kVersion;
  metadata["config_hash"] = hex64(fnv1a64(resolved_with_sim.dump()));
  metadata["master_seed"] = config.seed;
  metadata["seed_source"] = options.seed_source;
  metadata["invocation"] = options.invocation;
  metadata["resolved_config"] = resolved_with_sim;
  ojson data{{"population_rows", population.rows()},
             {"train_rows", train.rows()},
             {"holdout_rows", holdout.rows()},
             {"real_side", config.privacy.real_side},
             {"real_side_rows", real_privacy.rows()},
             {"attacker_provenance", std::string(to_string(attacker.provenance))},
             {"attacker_rows", attacker.table.rows()}};
  metadata["timestamps"] = {{"started", started}, {"finished", ""}};
  RunResult result;
  result.report = assemble_report(std::move(metadata), std::move(data), cells);
  result.report["metadata"]["timestamps"]["finished"] = utc_timestamp();
  result.exit_code = result.report["evaluation_matrix"]["all_pass"].get<bool>() ? 0 : 2;
  write_file_atomic(stage / "report.json", result.report.dump(2) + "\n");
  staging.publish("report.json");
  result.report_path = config.output_dir / "report.json";
  return result;
}

// Single-cell evaluation of already materialized tables. `holdout` serves
// as both the MLE test set and the attacker sample.
struct EvaluateOptions {
  QualitySettings quality;
  PrivacyConfig privacy;
  std::string real_label = "real";
  std::string synth_label = "synthetic";
  std::optional<double> epsilon_dp;
  std::optional<fs::path> histogram_dir;
  ojson invocation = ojson::object();
};

inline ojson evaluate_report(const Table& real, const Table& synth, const Table& holdout,
                             const EvaluateOptions& options) {
  const std::string started = utc_timestamp();
  CellResult cell;
  cell.label = options.synth_label;
  cell.generator = "external";
  cell.external = true;
  cell.epsilon_dp = options.epsilon_dp;
  cell.real_side = options.real_label;
  const AttackerSample attacker{holdout, AttackerProvenance::holdout};
  score_cell(cell, synth, real, holdout, real, attacker, options.quality, options.privacy);
  if (options.histogram_dir) {
    write_histograms(cell.fidelity, *options.histogram_dir);
    cell.artifacts["histograms"] = options.histogram_dir->generic_string();
  }
  ojson settings;
  settings["quality"] = {{"bins", options.quality.bins},
                         {"logistic",
                          {{"learning_rate", options.quality.logistic.learning_rate},
                           {"iterations", options.quality.logistic.iterations},
                           {"l2", options.quality.logistic.l2}}},
                         {"gate",
                          {{"max_average_hd", options.quality.gate.max_average_hd},
                           {"min_auc_ratio", options.quality.gate.min_auc_ratio}}}};
  ojson divisors = ojson::object();
  for (const auto& [k, v] : options.privacy.divisors) divisors[k] = v;
  settings["privacy"] = {{"budgets", options.privacy.budgets},
                         {"qi_columns", options.privacy.qi_columns},
                         {"divisors", divisors},
                         {"threshold", options.privacy.threshold},
                         {"relaxed_class_mode", std::string(to_string(options.privacy.relaxed_class_mode))},
                         {"no_leak_band", options.privacy.no_leak_band}};
  ojson metadata;
  metadata["tool"] = "synqp";
  metadata["version"] = kVersion;
  metadata["config_hash"] = hex64(fnv1a64(settings.dump()));
  metadata["master_seed"] = nullptr;
  metadata["seed_source"] = "none";
  metadata["invocation"] = options.invocation;
  metadata["resolved_config"] = settings;
  metadata["timestamps"] = {{"started", started}, {"finished", utc_timestamp()}};
  ojson data{{"real_rows", real.rows()},
             {"synthetic_rows", synth.rows()},
             {"holdout_rows", holdout.rows()},
             {"real_side", options.real_label},
             {"attacker_provenance", "holdout"}};
  return assemble_report(std::move(metadata), std::move(data), {cell_to_json(cell)});
}

}  // namespace synqp
