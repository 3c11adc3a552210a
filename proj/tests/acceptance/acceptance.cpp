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

// Acceptance checks. One PASS/FAIL line per criterion; exits nonzero when
// any line fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "oracles/oracles.hpp"
#include "synqp/synqp.hpp"

namespace {

using namespace synqp;
namespace fs = std::filesystem;

const fs::path kSource = SYNQP_SOURCE_DIR;
const std::string kCli = SYNQP_CLI;

struct Outcome {
  bool pass = true;
  std::string failures;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      failures += (pass ? "" : "; ") + what;
      pass = false;
    }
  }
};

using Check = std::function<void(Outcome&)>;

bool report(const std::string& name, double max_seconds, const Check& check) {
  Outcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    check(out);
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail << "exception: " << e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (max_seconds > 0 && secs >= max_seconds) {
    out.require(false, "runtime " + std::to_string(secs) + " s over limit " + std::to_string(max_seconds) + " s");
  }
  char timing[48];
  std::snprintf(timing, sizeof timing, "%.2f s", secs);
  std::cout << (out.pass ? "PASS " : "FAIL ") << name << " [" << timing << "]";
  if (!out.failures.empty()) std::cout << " :: failed: " << out.failures;
  const auto d = out.detail.str();
  if (!d.empty()) std::cout << " :: " << d;
  std::cout << std::endl;
  return out.pass;
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int run_cli(const std::string& args) {
  const int status = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("synqp_acceptance_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Histogram hist(std::vector<double> p) {
  Histogram h;
  for (std::size_t i = 0; i < p.size(); ++i) h.categories.push_back(std::to_string(i));
  h.p = std::move(p);
  return h;
}

MatchRule rule_at(double budget) {
  MatchRule r;
  r.budget = budget;
  return r;
}

// Exact-match risk straight from the class definition: a row is at risk
// when its full tuple occurs in the other table, and carries 1/f.
double exact_match_idr(const Table& real, const Table& synth, const oracle::Qi& qi) {
  auto side = [&](const Table& anchor, const Table& lookup) {
    double sum = 0;
    for (std::size_t r = 0; r < anchor.rows(); ++r) {
      const auto f = oracle::class_size(anchor, r, lookup, qi);
      if (f > 0) sum += 1.0 / static_cast<double>(f);
    }
    return sum / static_cast<double>(anchor.rows());
  };
  return std::max(side(real, synth), side(synth, real));
}

// Copula-only version of the bundled pipeline, one run per master seed.
struct TrendRun {
  ojson report;
  fs::path out;
};

std::vector<TrendRun> trend_runs(const fs::path& root) {
  std::vector<TrendRun> runs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto config = load_pipeline_config(kSource / "configs/pipeline.json");
    config.seed = seed;
    config.generators.erase(std::remove_if(config.generators.begin(), config.generators.end(),
                                           [](const GeneratorEntry& g) {
                                             return g.kind != GeneratorKind::gaussian_copula;
                                           }),
                            config.generators.end());
    config.output_dir = root / ("seed" + std::to_string(seed));
    runs.push_back({run_pipeline(config).report, config.output_dir});
  }
  return runs;
}

const ojson& cell_at(const ojson& report, double eps) {
  for (const auto& c : report["cells"]) {
    if (c["epsilon_dp"].is_number() && c["epsilon_dp"].get<double>() == eps) return c;
  }
  throw Error(Errc::config_error, "no cell at epsilon_dp " + format_real(eps));
}

}  // namespace

int main() {
  ::unsetenv("SYNQP_SEED");
  bool all = true;
  TempDir work("run");

  all &= report("hellinger-exactness", 1.0, [](Outcome& o) {
    const double h = hellinger(hist({1, 0}), hist({0.5, 0.5}));
    o.require(std::abs(h - std::sqrt(1 - std::sqrt(0.5))) <= 1e-12, "H((1,0),(0.5,0.5)) = " + num(h));
    o.require(hellinger(hist({0.3, 0.7}), hist({0.3, 0.7})) == 0.0, "identical not 0");
    o.require(hellinger(hist({1, 0}), hist({0, 1})) == 1.0, "disjoint not 1");
    o.detail << "H = " << num(h);
  });

  all &= report("idr-oracle-suite", 30.0, [](Outcome& o) {
    oracle::TableGen gen(500);
    std::size_t mismatches = 0, comparisons = 0;
    for (int trial = 0; trial < 500; ++trial) {
      const auto schema = gen.schema(2, 2, trial % 2 == 0);
      const Table real = gen.table(schema, gen.uniform(1, 20), 2, 3);
      const Table synth = gen.table(schema, gen.uniform(1, 20), 2, 3);
      const auto qi = oracle::qi_of(schema);
      for (double b : {0.0, 0.5, 1.0, 2.0}) {
        ++comparisons;
        mismatches += idr(real, synth, rule_at(b)) != oracle::idr(real, synth, qi, b);
      }
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
    o.detail << comparisons << " comparisons, " << mismatches << " mismatches";
  });

  all &= report("sd-idr-properties", 0, [](Outcome& o) {
    oracle::TableGen gen(202);
    std::size_t exact_bad = 0, monotone_bad = 0;
    const std::vector<double> budgets{0, 0.5, 1, 1.5, 2, 3, 5};
    for (int trial = 0; trial < 200; ++trial) {
      const auto schema = gen.schema(2, 2, trial % 2 == 0);
      const Table real = gen.table(schema, gen.uniform(1, 20), 2, 3);
      const Table synth = gen.table(schema, gen.uniform(1, 20), 2, 3);
      exact_bad += idr(real, synth, rule_at(0)) != exact_match_idr(real, synth, oracle::qi_of(schema));
      const auto sweep = sd_idr_sweep(real, synth, rule_at(0), budgets);
      for (std::size_t i = 1; i < sweep.size(); ++i) monotone_bad += sweep[i].second < sweep[i - 1].second;
    }
    o.require(exact_bad == 0, std::to_string(exact_bad) + " budget-0 mismatches");
    o.require(monotone_bad == 0, std::to_string(monotone_bad) + " sweep decreases");
    const Schema s({{"g", ColumnRole::quasi_categorical, Dtype::string}, {"a", ColumnRole::quasi_numeric, Dtype::integer}});
    const Table unique(s, {std::vector<std::string>{"a", "a", "b", "c"}, std::vector<std::int64_t>{1, 5, 1, 9}});
    const Table other(s, {std::vector<std::string>{"x", "y"}, std::vector<std::int64_t>{1, 5}});
    for (double b : {0.0, 1.0, 3.0}) {
      o.require(idr(unique, unique, rule_at(b)) == 1.0, "self-copy at budget " + num(b));
      o.require(idr(unique, other, rule_at(b)) == 0.0, "disjoint at budget " + num(b));
    }
    o.detail << "200 instances, " << budgets.size() << "-budget sweeps";
  });

  all &= report("sd-mia-identities", 0, [](Outcome& o) {
    oracle::TableGen gen(103);
    const auto schema = gen.schema(2, 2, false);
    const Table real = gen.table(schema, 20, 2, 3);
    std::size_t bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const Table t = gen.table(schema, gen.uniform(1, 20), 2, 3);
      bad += sd_mia(real, t, {t, AttackerProvenance::external}, rule_at(static_cast<double>(trial % 3))).value != 0.0;
    }
    o.require(bad == 0, std::to_string(bad) + " nonzero self-attacker values");
    const Schema s({{"g", ColumnRole::quasi_categorical, Dtype::string}, {"a", ColumnRole::quasi_numeric, Dtype::integer}});
    const Table x(s, {std::vector<std::string>{"a", "b", "b"}, std::vector<std::int64_t>{3, 4, 8}});
    const Table disjoint(s, {std::vector<std::string>{"z", "z"}, std::vector<std::int64_t>{3, 4}});
    const double v = sd_mia(x, x, {disjoint, AttackerProvenance::holdout}, rule_at(0)).value;
    o.require(v == 1.0, "copy vs disjoint attacker = " + num(v));
  });

  all &= report("dp-mechanism", 10.0, [](Outcome& o) {
    const auto config = load_simulation_config(kSource / "configs/diabetes_sim.json");
    const Table t = build_population(config, 2000, 3).select(load_schema(kSource / "data/diabetes_study.schema.json"));
    DpConfig zero;
    zero.seed = 4;
    o.require(dp_perturb_table(t, zero) == t, "epsilon 0 not identity");
    const double x = 5, mu = 2, sigma = 3;
    for (double eps : {0.3, 0.8}) {
      const Stream s(static_cast<std::uint64_t>(eps * 10));
      constexpr int n = 1000000;
      double sum = 0, sq = 0;
      for (int i = 0; i < n; ++i) {
        const double v = dp_perturb_value(x, eps, mu, sigma, s.open_uniform(static_cast<std::uint64_t>(i)));
        sum += v;
        sq += v * v;
      }
      const double mean = sum / n;
      const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
      const double se = eps * sigma / std::sqrt(static_cast<double>(n));
      const double target = (1 - eps) * x + eps * mu;
      o.require(std::abs(mean - target) <= 4 * se, "mean at eps " + num(eps) + " = " + num(mean));
      o.require(std::abs(sd - eps * sigma) <= 0.01 * eps * sigma, "stddev at eps " + num(eps) + " = " + num(sd));
      o.detail << "eps " << eps << ": mean " << num(mean) << " (target " << num(target) << "), sd " << num(sd)
               << " (target " << num(eps * sigma) << "); ";
    }
  });

  std::vector<TrendRun> runs;
  all &= report("trend-reproduction", 300.0, [&](Outcome& o) {
    runs = trend_runs(work.path() / "trend");
    int a = 0, b = 0, c = 0;
    for (const auto& run : runs) {
      const auto& clean = cell_at(run.report, 0.0);
      const auto& noisy = cell_at(run.report, 0.8);
      a += noisy["quality"]["average_hellinger"].get<double>() > clean["quality"]["average_hellinger"].get<double>();
      bool lower = true, increasing = true;
      const auto& budgets = clean["privacy"]["budgets"];
      for (std::size_t i = 0; i < budgets.size(); ++i) {
        const auto k = budget_key(budgets[i].get<double>());
        lower = lower && noisy["privacy"]["sd_idr"][k].get<double>() <= clean["privacy"]["sd_idr"][k].get<double>();
        if (i > 0) {
          const auto prev = budget_key(budgets[i - 1].get<double>());
          for (const auto* cell : {&clean, &noisy}) {
            increasing = increasing &&
                         (*cell)["privacy"]["sd_idr"][k].get<double>() > (*cell)["privacy"]["sd_idr"][prev].get<double>();
          }
        }
      }
      b += lower;
      c += increasing;
    }
    o.require(a >= 4, "(a) HD degrades in " + std::to_string(a) + "/5");
    o.require(b >= 4, "(b) SD-IDR lower with DP in " + std::to_string(b) + "/5");
    o.require(c >= 4, "(c) SD-IDR strictly increasing in " + std::to_string(c) + "/5");
    const auto& r0 = runs.front().report;
    o.detail << "a " << a << "/5, b " << b << "/5, c " << c << "/5; seed 1 SD-IDR eps0:";
    for (const auto& [k, v] : cell_at(r0, 0.0)["privacy"]["sd_idr"].items()) o.detail << " " << num(v.get<double>());
    o.detail << " eps0.8:";
    for (const auto& [k, v] : cell_at(r0, 0.8)["privacy"]["sd_idr"].items()) o.detail << " " << num(v.get<double>());
  });

  all &= report("copula-quality", 0, [&](Outcome& o) {
    const auto study = load_schema(kSource / "data/diabetes_study.schema.json");
    const auto config = load_pipeline_config(kSource / "configs/pipeline.json");
    const Stream root(config.seed);
    const auto sim = load_simulation_config(kSource / "configs" / config.simulation);
    const Table pop = build_population(sim, config.rows, root.child("population").key()).select(study);
    const Table train = split(pop, config.train_count, root.child("split").key()).first;
    const auto model = fit(train, GeneratorKind::gaussian_copula);
    const double avg = compare_fidelity(train, generate(model, 10000, 77), config.quality.bins).average;
    o.require(avg <= 0.15, "average HD " + num(avg));
    const Table big = generate(model, 100000, 78);
    double worst = 0;
    std::string worst_col;
    for (std::size_t c = 0; c < train.cols(); ++c) {
      if (!is_numeric_role(train.schema()[c].role)) continue;
      const double ks = oracle::ks_statistic(train.numeric_column(c), big.numeric_column(c));
      if (ks > worst) {
        worst = ks;
        worst_col = train.schema()[c].name;
      }
    }
    o.require(worst <= 0.03, "KS " + num(worst) + " on " + worst_col);
    o.detail << "average HD " << num(avg) << ", max KS " << num(worst) << " (" << worst_col << ")";
  });

  all &= report("mle", 0, [&](Outcome& o) {
    std::mt19937_64 rng(707);
    std::normal_distribution<double> z;
    double worst_rel = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::Index n = 40, d = 5;
      Eigen::MatrixXd x(n, d);
      Eigen::VectorXd y(n), theta(d + 1), grad;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = z(rng);
        y(i) = z(rng) > 0;
      }
      for (Eigen::Index j = 0; j <= d; ++j) theta(j) = z(rng);
      logistic_loss(x, y, theta, 1e-4, &grad);
      for (Eigen::Index j = 0; j <= d; ++j) {
        Eigen::VectorXd hi = theta, lo = theta;
        hi(j) += 1e-5;
        lo(j) -= 1e-5;
        const double fd = (logistic_loss(x, y, hi, 1e-4) - logistic_loss(x, y, lo, 1e-4)) / 2e-5;
        worst_rel = std::max(worst_rel, std::abs(fd - grad(j)) / std::max(std::abs(grad(j)), 1e-3));
      }
    }
    o.require(worst_rel <= 1e-4, "gradient relative error " + num(worst_rel));

    std::size_t auc_bad = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 2 + rng() % 150;
      std::vector<double> s(n);
      std::vector<int> l(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = trial % 2 ? static_cast<double>(rng() % 6) : z(rng);
        l[i] = static_cast<int>(rng() % 2);
      }
      l[0] = 1;
      l[1] = 0;
      auc_bad += auc(s, l) != oracle::pair_count_auc(s, l);
    }
    o.require(auc_bad == 0, std::to_string(auc_bad) + " AUC mismatches");

    const auto config = load_pipeline_config(kSource / "configs/pipeline.json");
    const auto study = load_schema(kSource / "data/diabetes_study.schema.json");
    const fs::path base = runs.empty() ? fs::path() : runs.front().out;
    if (base.empty()) throw Error(Errc::config_error, "trend runs unavailable");
    const Table train = load_table(base / "train.csv", study);
    const Table holdout = load_table(base / "holdout.csv", study);
    const auto same = mle(train, train, holdout, study, config.quality.logistic);
    o.require(same.auc_synth == same.auc_real_baseline, "identical training gives different AUC");

    const auto target = *study.target();
    auto shuffled_auc = [&](std::mt19937_64& g) {
      std::vector<ColumnData> cols;
      for (std::size_t c = 0; c < train.cols(); ++c) cols.push_back(train.column(c));
      auto labels = std::get<std::vector<std::int64_t>>(cols[target]);
      std::shuffle(labels.begin(), labels.end(), g);
      cols[target] = labels;
      return mle(train, Table(study, std::move(cols)), holdout, study, config.quality.logistic).auc_synth;
    };
    const double shuffled = shuffled_auc(rng);
    o.require(shuffled >= 0.45 && shuffled <= 0.55, "shuffled-label AUC " + num(shuffled));
    // Context only: spread of the same statistic over further shuffles.
    double sum = 0, sq = 0;
    int inside = 0;
    constexpr int kShuffles = 20;
    for (int k = 0; k < kShuffles; ++k) {
      std::mt19937_64 g(static_cast<std::uint64_t>(k));
      const double v = shuffled_auc(g);
      sum += v;
      sq += v * v;
      inside += v >= 0.45 && v <= 0.55;
    }
    const double mean = sum / kShuffles;
    o.detail << "over " << kShuffles << " more shuffles: mean " << num(mean) << ", sd "
             << num(std::sqrt(std::max(0.0, sq / kShuffles - mean * mean))) << ", " << inside << "/" << kShuffles
             << " inside [0.45, 0.55]; ";
    o.detail << "grad rel err " << num(worst_rel) << ", baseline AUC " << num(same.auc_real_baseline)
             << ", shuffled AUC " << num(shuffled);
  });

  all &= report("regulatory-gate", 0, [&](Outcome& o) {
    if (runs.empty()) throw Error(Errc::config_error, "trend runs unavailable");
    // Quality numbers are set to pass so the exit code reflects the privacy
    // verdict alone.
    auto with_max = [&](double top) {
      ojson r = runs.front().report;
      for (auto& cell : r["cells"]) {
        cell["quality"]["average_hellinger"] = 0.05;
        cell["quality"]["mle"]["auc_synth"] = cell["quality"]["mle"]["auc_real_baseline"];
        cell["privacy"]["sd_idr"] = {{"0", 0.01}, {"1", 0.03}, {"2", 0.06}, {"3", top}};
      }
      return r;
    };
    for (const auto& [top, expected] : {std::pair{0.089, 0}, std::pair{0.091, 2}}) {
      const fs::path in = work.path() / ("gate_" + num(top) + ".json");
      const fs::path out = work.path() / ("gate_" + num(top) + ".out.json");
      write_file_atomic(in, with_max(top).dump(2));
      const int code = run_cli("report --in " + in.string() + " --format json --out " + out.string());
      o.require(code == expected, "max " + num(top) + " exit " + std::to_string(code));
      const auto back = ojson::parse(read_file(out));
      const bool pass = back["cells"][0]["privacy"]["verdict"] == "pass";
      o.require(pass == (expected == 0), "max " + num(top) + " verdict " + back["cells"][0]["privacy"]["verdict"].dump());
      o.require(back["cells"][0]["privacy"]["threshold"].get<double>() == 0.09, "threshold is not 0.09");
      o.detail << "max " << num(top) << " -> exit " << code << "; ";
    }
  });

  all &= report("determinism", 0, [&](Outcome& o) {
    const std::string config = (kSource / "configs/pipeline.json").string();
    std::vector<ojson> reports;
    for (const auto& [tag, flags] : {std::pair{"t1", "--threads 1"}, std::pair{"t4", "--threads 4"},
                                     std::pair{"again", "--threads 4"}}) {
      const fs::path out = work.path() / "det" / tag;
      const int code = run_cli(std::string(flags) + " run --config " + config + " --out " + out.string());
      o.require(code == 0 || code == 2, std::string(tag) + " exit " + std::to_string(code));
      reports.push_back(normalize_report(ojson::parse(read_file(out / "report.json"))));
    }
    o.require(reports[0].dump() == reports[1].dump(), "single vs multi-threaded reports differ");
    o.require(reports[1].dump() == reports[2].dump(), "repeated runs differ");
    o.detail << "3 CLI runs, " << reports[0]["cells"].size() << " cells, config hash "
             << reports[0]["metadata"]["config_hash"].get<std::string>();
  });

  std::cout << (all ? "ALL PASS" : "SOME CRITERIA FAILED") << std::endl;
  return all ? 0 : 1;
}
