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

#include <gtest/gtest.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <set>

#include "synqp/io.hpp"
#include "synqp/parallel.hpp"
#include "synqp/pipeline.hpp"

namespace {

using namespace synqp;
namespace fs = std::filesystem;

const fs::path kSource = SYNQP_SOURCE_DIR;
const std::string kCli = SYNQP_CLI;

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("synqp_test_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

nlohmann::json small_config(const fs::path& out) {
  auto j = nlohmann::json::parse(read_file(kSource / "configs/pipeline.json"));
  j["simulation"] = (kSource / "configs/diabetes_sim.json").string();
  j["study_schema"] = (kSource / "data/diabetes_study.schema.json").string();
  j["rows"] = 1200;
  j["split"] = {{"train_count", 800}, {"holdout_count", 300}};
  j["quality"]["logistic"]["iterations"] = 300;
  j["output_dir"] = out.string();
  return j;
}

PipelineConfig parse(const nlohmann::json& j) { return pipeline_config_from_json(j, kSource / "configs"); }

void expect_config_error(nlohmann::json j, const std::string& why) {
  try {
    parse(j);
    ADD_FAILURE() << "accepted: " << why;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config_error) << why << ": " << e.what();
  }
}

int run_cli(const std::string& args) {
  const int status = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Config, BundledConfigParses) {
  const auto c = load_pipeline_config(kSource / "configs/pipeline.json");
  EXPECT_EQ(c.rows, 10000u);
  EXPECT_EQ(c.train_count, 7000u);
  EXPECT_EQ(c.holdout_count, 3000u);
  EXPECT_EQ(c.epsilons, (std::vector<double>{0.0, 0.8}));
  ASSERT_EQ(c.generators.size(), 2u);
  EXPECT_EQ(c.privacy.config.budgets, (std::vector<double>{0, 1, 2, 3}));
  EXPECT_EQ(c.privacy.config.threshold, 0.09);
  const auto cells = plan_cells(c);
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells[0].label, "independent_eps0");
  EXPECT_EQ(cells[3].label, "gaussian_copula_eps0.8");
}

TEST(Config, Validation) {
  const auto base = small_config("/tmp/unused");
  auto j = base;
  j["split"]["train_count"] = 1000;
  expect_config_error(j, "split exceeds rows");
  j = base;
  j["dp"]["epsilons"] = {0, 1.2};
  expect_config_error(j, "epsilon above 1");
  j = base;
  j["dp"]["epsilons"] = {0.8, 0.8};
  expect_config_error(j, "duplicate epsilon");
  j = base;
  j["privacy"]["budgets"] = {0, 2, 1};
  expect_config_error(j, "unsorted budgets");
  j = base;
  j["privacy"]["threshold"] = 0;
  expect_config_error(j, "zero threshold");
  j = base;
  j["privacy"]["relaxed_class_mode"] = "loose";
  expect_config_error(j, "bad mode");
  j = base;
  j["privacy"]["real_side"] = "holdout";
  expect_config_error(j, "bad real side");
  j = base;
  j["privacy"]["attacker"] = {{"provenance", "external"}};
  expect_config_error(j, "external attacker without path");
  j = base;
  j["generators"] = {{{"kind", "ctgan"}}};
  expect_config_error(j, "unknown generator");
  j = base;
  j["generators"] = {{{"kind", "independent"}}, {{"kind", "independent"}}};
  expect_config_error(j, "duplicate label");
  j = base;
  j["generators"] = {{{"kind", "independent"}, {"label", "../x"}}};
  expect_config_error(j, "path-like label");
  j = base;
  j.erase("seed");
  expect_config_error(j, "missing seed");
  j = base;
  j["quality"]["bins"] = 0;
  expect_config_error(j, "zero bins");
}

struct SmallRun {
  TempDir dir{"run"};
  RunResult result;
  SmallRun() {
    auto j = small_config(dir.path() / "out");
    result = run_pipeline(parse(j));
  }
};

const SmallRun& small_run() {
  static const SmallRun r;
  return r;
}

TEST(Run, ReportShapeAndArtifacts) {
  const auto& r = small_run();
  const auto& report = r.result.report;
  const fs::path out = r.dir.path() / "out";
  ASSERT_TRUE(fs::exists(out / "report.json"));
  EXPECT_EQ(ojson::parse(read_file(out / "report.json")), report);
  for (const char* f : {"population.csv", "population.schema.json", "study.schema.json", "train.csv", "holdout.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  for (const auto& e : fs::directory_iterator(out)) {
    EXPECT_NE(e.path().filename().string().rfind(".staging", 0), 0u) << e.path();
  }
  const auto& cells = report["cells"];
  ASSERT_EQ(cells.size(), 4u);
  std::vector<std::string> labels;
  for (const auto& c : cells) labels.push_back(c["label"].get<std::string>());
  EXPECT_EQ(labels, (std::vector<std::string>{"independent_eps0", "independent_eps0.8", "gaussian_copula_eps0",
                                              "gaussian_copula_eps0.8"}));
  for (const auto& c : cells) {
    const fs::path cell_dir = out / "cells" / c["label"].get<std::string>();
    EXPECT_TRUE(fs::exists(cell_dir / "perturbed.csv"));
    EXPECT_TRUE(fs::exists(cell_dir / "synthetic.csv"));
    EXPECT_TRUE(fs::exists(cell_dir / "histograms" / "age.csv"));
    const auto& q = c["quality"];
    const auto& p = c["privacy"];
    EXPECT_EQ(q["per_column"].size(), 11u);
    for (const auto& col : q["per_column"]) {
      EXPECT_GE(col["hellinger"].get<double>(), 0.0);
      EXPECT_LE(col["hellinger"].get<double>(), 1.0);
    }
    for (const char* k : {"0", "1", "2", "3"}) {
      EXPECT_TRUE(p["sd_idr"].contains(k));
      EXPECT_TRUE(p["sd_mia"].contains(k));
      EXPECT_TRUE(p["budget_verdicts"].contains(k));
    }
    EXPECT_EQ(load_table(cell_dir / "synthetic.csv", load_schema(out / "study.schema.json")).rows(), 800u);
  }
  const auto& meta = report["metadata"];
  EXPECT_EQ(meta["master_seed"].get<std::uint64_t>(), 20250517u);
  EXPECT_EQ(meta["resolved_config"]["quality"]["logistic"]["iterations"].get<int>(), 300);
  EXPECT_TRUE(meta["resolved_config"].contains("simulation_config"));
  EXPECT_EQ(report["data"]["train_rows"].get<int>(), 800);
  EXPECT_EQ(report["data"]["holdout_rows"].get<int>(), 300);
  EXPECT_EQ(r.result.exit_code, report["evaluation_matrix"]["all_pass"].get<bool>() ? 0 : 2);
}

TEST(Run, DeterministicAcrossRunsAndThreads) {
  const auto& first = small_run().result.report;
  TempDir dir("det");
  set_thread_count(1);
  const auto serial = run_pipeline(parse(small_config(dir.path() / "a"))).report;
  set_thread_count(3);
  const auto threaded = run_pipeline(parse(small_config(dir.path() / "b"))).report;
  set_thread_count(0);
  EXPECT_EQ(normalize_report(serial).dump(), normalize_report(first).dump());
  EXPECT_EQ(normalize_report(threaded).dump(), normalize_report(first).dump());
  EXPECT_EQ(read_file(dir.path() / "a" / "cells" / "gaussian_copula_eps0.8" / "synthetic.csv"),
            read_file(dir.path() / "b" / "cells" / "gaussian_copula_eps0.8" / "synthetic.csv"));
}

TEST(Run, ExternalCellSkipsGeneration) {
  const auto& r = small_run();
  TempDir dir("ext");
  const fs::path synth = dir.path() / "mine.csv";
  fs::copy_file(r.dir.path() / "out" / "train.csv", synth);
  auto j = small_config(dir.path() / "out");
  j["generators"] = {{{"external", synth.string()}, {"label", "copy_of_train"}}};
  const auto result = run_pipeline(parse(j));
  const auto& cells = result.report["cells"];
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(cells[0]["label"], "copy_of_train");
  EXPECT_EQ(cells[0]["generator"], "external");
  EXPECT_TRUE(cells[0]["epsilon_dp"].is_null());
  EXPECT_FALSE(fs::exists(dir.path() / "out" / "cells" / "copy_of_train" / "perturbed.csv"));
  // On a verbatim copy each exact-match class contributes 1 in total, so
  // the risk is the number of distinct quasi-identifier tuples over N.
  const Table train = load_table(synth, load_schema(kSource / "data/diabetes_study.schema.json"));
  std::set<std::string> tuples;
  for (std::size_t row = 0; row < train.rows(); ++row) {
    tuples.insert(train.text(row, 0) + "|" + train.text(row, 1) + "|" + train.text(row, 2));
  }
  EXPECT_EQ(cells[0]["quality"]["average_hellinger"].get<double>(), 0.0);
  EXPECT_NEAR(cells[0]["privacy"]["sd_idr"]["0"].get<double>(),
              static_cast<double>(tuples.size()) / static_cast<double>(train.rows()), 1e-12);
  EXPECT_EQ(cells[0]["privacy"]["verdict"], "fail");
  EXPECT_EQ(result.exit_code, 2);
}

TEST(Run, FailedRunLeavesNoReport) {
  TempDir dir("fail");
  auto j = small_config(dir.path() / "out");
  j["generators"] = {{{"kind", "independent"}}, {{"external", (dir.path() / "missing.csv").string()}}};
  try {
    run_pipeline(parse(j));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("external_1"), std::string::npos) << e.what();
  }
  EXPECT_FALSE(fs::exists(dir.path() / "out" / "report.json"));
  if (fs::exists(dir.path() / "out")) {
    for (const auto& e : fs::directory_iterator(dir.path() / "out")) ADD_FAILURE() << "left behind " << e.path();
  }
}

TEST(Run, EmptyGeneratorList) {
  TempDir dir("empty");
  auto j = small_config(dir.path() / "out");
  j["generators"] = nlohmann::json::array();
  const auto result = run_pipeline(parse(j));
  EXPECT_EQ(result.exit_code, 0);
  EXPECT_TRUE(result.report["cells"].empty());
  const auto csv = render_csv(result.report);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
  const auto md = render_markdown(result.report);
  EXPECT_NE(md.find("| Generator | epsilon_dp | Average HD |"), std::string::npos);
  EXPECT_NE(md.find("## Privacy"), std::string::npos);
}

TEST(Render, CsvLineCountAndMarkdownVerdict) {
  auto report = small_run().result.report;
  std::size_t expected = 1;
  for (const auto& c : report["cells"]) expected += c["privacy"]["budgets"].size();
  const auto csv = render_csv(report);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), expected);

  auto& cell = report["cells"][0];
  cell["privacy"]["budgets"] = {0, 1};
  cell["privacy"]["sd_idr"] = {{"0", 0.03}, {"1", 0.08}};
  recompute_gates(report);
  EXPECT_EQ(cell["privacy"]["verdict"], "pass");
  const auto md = render_markdown(report);
  std::istringstream lines(md);
  std::string line;
  int flagged = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("| independent_eps0 | 0 | ", 0) == 0 && line.find("| 0.09 |") != std::string::npos) {
      EXPECT_NE(line.find("| pass |"), std::string::npos) << line;
      ++flagged;
    }
  }
  EXPECT_EQ(flagged, 2);
}

TEST(Gates, RecomputeFromStoredNumbers) {
  auto report = small_run().result.report;
  for (auto& c : report["cells"]) {
    c["quality"]["average_hellinger"] = 0.05;
    c["quality"]["mle"]["auc_synth"] = c["quality"]["mle"]["auc_real_baseline"].get<double>();
    for (auto& [k, v] : c["privacy"]["sd_idr"].items()) v = 0.01;
  }
  EXPECT_EQ(recompute_gates(report), 0);
  EXPECT_TRUE(report["evaluation_matrix"]["all_pass"].get<bool>());
  auto& first = report["cells"][0];
  first["privacy"]["sd_idr"]["2"] = 0.09;
  EXPECT_EQ(recompute_gates(report), 0);
  first["privacy"]["sd_idr"]["2"] = 0.0900001;
  EXPECT_EQ(recompute_gates(report), 2);
  EXPECT_EQ(first["privacy"]["failing_budgets"], ojson::array({2}));
  EXPECT_FALSE(report["evaluation_matrix"]["rows"][0]["privacy_pass"].get<bool>());
  EXPECT_TRUE(report["evaluation_matrix"]["rows"][1]["pass"].get<bool>());
  first["privacy"]["sd_idr"]["2"] = 0.01;
  first["quality"]["average_hellinger"] = 0.2;
  EXPECT_EQ(recompute_gates(report), 2);
  EXPECT_FALSE(first["quality"]["gate"]["hellinger_pass"].get<bool>());
  first["quality"]["average_hellinger"] = 0.05;
  first["quality"]["mle"]["auc_synth"] = 0.79 * first["quality"]["mle"]["auc_real_baseline"].get<double>();
  EXPECT_EQ(recompute_gates(report), 2);
  EXPECT_FALSE(first["quality"]["gate"]["mle_pass"].get<bool>());
  first["quality"].erase("mle");
  EXPECT_THROW(recompute_gates(report), Error);
}

TEST(Cli, ExitCodes) {
  const auto& r = small_run();
  const fs::path out = r.dir.path() / "out";
  TempDir dir("cli");
  const std::string schema = (out / "study.schema.json").string();
  const std::string train = (out / "train.csv").string();
  const std::string holdout = (out / "holdout.csv").string();
  const std::string report = (dir.path() / "r.json").string();

  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("bogus"), 1);
  EXPECT_EQ(run_cli("evaluate --real " + train), 1);
  EXPECT_EQ(run_cli("run --config " + (dir.path() / "nope.json").string()), 1);

  // Training data against itself: quality passes, privacy fails.
  EXPECT_EQ(run_cli("evaluate --real " + train + " --synth " + train + " --holdout " + holdout + " --schema " +
                    schema + " --out " + report),
            2);
  auto j = ojson::parse(read_file(report));
  ASSERT_EQ(j["cells"].size(), 1u);
  EXPECT_TRUE(j["cells"][0]["quality"]["gate"]["pass"].get<bool>());
  EXPECT_FALSE(j["metadata"]["invocation"].empty());

  const std::string synth = (out / "cells" / "gaussian_copula_eps0" / "synthetic.csv").string();
  EXPECT_EQ(run_cli("evaluate --real " + train + " --synth " + synth + " --holdout " + holdout + " --schema " +
                    schema + " --budgets 0,1 --threshold 1 --min-auc-ratio 0 --out " + report +
                    " --emit-histograms " + (dir.path() / "h").string()),
            0);
  EXPECT_TRUE(fs::exists(dir.path() / "h" / "bmi.csv"));
  EXPECT_EQ(run_cli("report --in " + report + " --format csv --out " + (dir.path() / "r.csv").string()), 0);
  EXPECT_EQ(run_cli("report --in " + report + " --format yaml"), 1);
  EXPECT_EQ(read_file(dir.path() / "r.csv").find("cell,generator,epsilon_dp,budget"), 0u);

  EXPECT_EQ(run_cli("evaluate --real " + train + " --synth " + synth + " --holdout " + holdout + " --schema " +
                    schema + " --budgets 1,0 --out " + report),
            1);
  EXPECT_EQ(run_cli("evaluate --real " + train + " --synth " + synth + " --holdout " + holdout + " --schema " +
                    schema + " --qi height --out " + report),
            1);
}

TEST(Cli, StagesChainLikeTheLibrary) {
  TempDir dir("stages");
  const fs::path d = dir.path();
  const std::string config = (kSource / "configs/diabetes_sim.json").string();
  ASSERT_EQ(run_cli("simulate --config " + config + " --rows 600 --seed 5 --out " + (d / "sim").string()), 0);
  const auto pop_schema = load_schema(d / "sim" / "population.schema.json");
  const Table pop = load_table(d / "sim" / "population.csv", pop_schema);
  EXPECT_EQ(pop, build_population(load_simulation_config(config), 600, 5));

  const std::string study = (kSource / "data/diabetes_study.schema.json").string();
  save_table(pop.select(load_schema(study)), d / "study.csv");
  ASSERT_EQ(run_cli("split --in " + (d / "study.csv").string() + " --schema " + study + " --train 400 --seed 2" +
                    " --out-train " + (d / "tr.csv").string() + " --out-holdout " + (d / "ho.csv").string()),
            0);
  const Table tr = load_table(d / "tr.csv", load_schema(study));
  EXPECT_EQ(tr, split(pop.select(load_schema(study)), 400, 2).first);

  ASSERT_EQ(run_cli("perturb --in " + (d / "tr.csv").string() + " --schema " + study +
                    " --epsilon 0.8 --seed 3 --out " + (d / "p.csv").string()),
            0);
  DpConfig dp;
  dp.epsilon_dp = 0.8;
  dp.seed = 3;
  EXPECT_EQ(load_table(d / "p.csv", load_schema(study)), dp_perturb_table(tr, dp));
  EXPECT_EQ(run_cli("perturb --in " + (d / "tr.csv").string() + " --schema " + study +
                    " --epsilon 0.8 --seed 3 --columns gender --out " + (d / "p.csv").string()),
            1);

  ASSERT_EQ(run_cli("generate --model gaussian_copula --train " + (d / "p.csv").string() + " --schema " + study +
                    " --rows 300 --seed 4 --out " + (d / "g.csv").string()),
            0);
  EXPECT_EQ(load_table(d / "g.csv", load_schema(study)),
            generate(fit(dp_perturb_table(tr, dp), GeneratorKind::gaussian_copula), 300, 4));
}

}  // namespace
