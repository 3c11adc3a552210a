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

// synqp command-line interface.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "synqp/synqp.hpp"

namespace {

using synqp::ojson;

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const auto item = text.substr(start, end - start);
    auto v = synqp::parse_real(item);
    if (!v) throw synqp::Error(synqp::Errc::config_error, "'" + item + "' is not a number");
    out.push_back(*v);
    start = end + 1;
  }
  return out;
}

std::vector<std::string> parse_names(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (!text.empty() && start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    synqp::write_file_atomic(path, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic data quality and privacy benchmark"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = SYNQP_THREADS or hardware)")
      ->check(CLI::NonNegativeNumber);

  // simulate
  std::string sim_config, sim_out;
  std::size_t sim_rows = 0;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Build a simulated population");
  simulate->add_option("--config", sim_config, "Simulation config JSON")->required();
  simulate->add_option("--rows", sim_rows, "Population size")->required();
  simulate->add_option("--seed", sim_seed, "Seed")->required();
  simulate->add_option("--out", sim_out, "Output directory")->required();

  // split
  std::string split_in, split_schema, split_train_out, split_holdout_out;
  std::size_t split_train = 0;
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split", "Shuffle and split a table");
  split->add_option("--in", split_in)->required();
  split->add_option("--schema", split_schema)->required();
  split->add_option("--train", split_train, "Training rows")->required();
  split->add_option("--seed", split_seed)->required();
  split->add_option("--out-train", split_train_out)->required();
  split->add_option("--out-holdout", split_holdout_out)->required();

  // perturb
  std::string perturb_in, perturb_schema, perturb_out, perturb_columns, perturb_param = "stddev";
  double perturb_eps = 0;
  std::uint64_t perturb_seed = 0;
  auto* perturb = app.add_subcommand("perturb", "Apply Laplace local differential privacy");
  perturb->add_option("--in", perturb_in)->required();
  perturb->add_option("--schema", perturb_schema)->required();
  perturb->add_option("--epsilon", perturb_eps, "epsilon_dp in [0, 1]")->required();
  perturb->add_option("--seed", perturb_seed)->required();
  perturb->add_option("--out", perturb_out)->required();
  perturb->add_option("--columns", perturb_columns, "Comma-separated columns (default: numeric non-target)");
  perturb->add_option("--laplace-param", perturb_param, "stddev or scale");

  // generate
  std::string gen_model, gen_train, gen_schema, gen_out;
  std::size_t gen_rows = 0;
  std::uint64_t gen_seed = 0;
  bool gen_interpolate = false;
  auto* generate = app.add_subcommand("generate", "Fit a built-in generator and sample");
  generate->add_option("--model", gen_model, "independent or gaussian_copula")->required();
  generate->add_option("--train", gen_train)->required();
  generate->add_option("--schema", gen_schema)->required();
  generate->add_option("--rows", gen_rows)->required();
  generate->add_option("--seed", gen_seed)->required();
  generate->add_option("--out", gen_out)->required();
  generate->add_flag("--interpolate", gen_interpolate, "Interpolate empirical quantiles");

  // evaluate
  std::string ev_real, ev_synth, ev_holdout, ev_schema, ev_out, ev_hist, ev_budgets = "0,1,2,3", ev_qi,
                                                                   ev_mode = "unit";
  double ev_threshold = 0.09, ev_band = 0.005, ev_max_hd = 0.2, ev_auc_ratio = 0.8;
  std::size_t ev_bins = 32;
  auto* evaluate = app.add_subcommand("evaluate", "Score a synthetic table against real data");
  evaluate->add_option("--real", ev_real, "Real-side table (privacy and quality reference)")->required();
  evaluate->add_option("--synth", ev_synth)->required();
  evaluate->add_option("--holdout", ev_holdout, "Test set and attacker sample")->required();
  evaluate->add_option("--schema", ev_schema)->required();
  evaluate->add_option("--budgets", ev_budgets, "Comma-separated ascending budgets");
  evaluate->add_option("--threshold", ev_threshold);
  evaluate->add_option("--bins", ev_bins);
  evaluate->add_option("--qi", ev_qi, "Comma-separated active quasi-identifiers");
  evaluate->add_option("--relaxed-class-mode", ev_mode, "unit, relaxed_count or drop");
  evaluate->add_option("--no-leak-band", ev_band);
  evaluate->add_option("--max-average-hd", ev_max_hd);
  evaluate->add_option("--min-auc-ratio", ev_auc_ratio);
  evaluate->add_option("--out", ev_out, "Report JSON path")->required();
  evaluate->add_option("--emit-histograms", ev_hist, "Directory for per-column histogram CSVs");

  // run
  std::string run_config, run_out;
  auto* run = app.add_subcommand("run", "Run the full evaluation matrix");
  run->add_option("--config", run_config, "Pipeline config JSON")->required();
  run->add_option("--out", run_out, "Output directory (overrides the config)");

  // report
  std::string rep_in, rep_format = "markdown", rep_out;
  auto* report = app.add_subcommand("report", "Re-gate and render a saved report");
  report->add_option("--in", rep_in)->required();
  report->add_option("--format", rep_format, "json, markdown or csv");
  report->add_option("--out", rep_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; usage errors map to execution error.
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (threads > 0) synqp::set_thread_count(static_cast<unsigned>(threads));

  try {
    if (*simulate) {
      const auto config = synqp::load_simulation_config(sim_config);
      const auto population = synqp::build_population(config, sim_rows, sim_seed);
      std::filesystem::create_directories(sim_out);
      synqp::save_table(population, std::filesystem::path(sim_out) / "population.csv");
      synqp::save_schema(population.schema(), std::filesystem::path(sim_out) / "population.schema.json");
      return 0;
    }
    if (*split) {
      const auto schema = synqp::load_schema(split_schema);
      const auto [train, holdout] = synqp::split(synqp::load_table(split_in, schema), split_train, split_seed);
      synqp::save_table(train, split_train_out);
      synqp::save_table(holdout, split_holdout_out);
      return 0;
    }
    if (*perturb) {
      const auto schema = synqp::load_schema(perturb_schema);
      synqp::DpConfig dp;
      dp.epsilon_dp = perturb_eps;
      dp.seed = perturb_seed;
      dp.columns = parse_names(perturb_columns);
      auto param = synqp::parse_laplace_param(perturb_param);
      if (!param) throw synqp::Error(synqp::Errc::config_error, "--laplace-param must be stddev or scale");
      dp.laplace_param = *param;
      synqp::save_table(synqp::dp_perturb_table(synqp::load_table(perturb_in, schema), dp), perturb_out);
      return 0;
    }
    if (*generate) {
      auto kind = synqp::parse_generator_kind(gen_model);
      if (!kind) throw synqp::Error(synqp::Errc::config_error, "--model must be independent or gaussian_copula");
      const auto schema = synqp::load_schema(gen_schema);
      synqp::GeneratorOptions options;
      options.interpolate = gen_interpolate;
      const auto model = synqp::fit(synqp::load_table(gen_train, schema), *kind, options);
      synqp::save_table(synqp::generate(model, gen_rows, gen_seed), gen_out);
      return 0;
    }
    if (*evaluate) {
      const auto schema = synqp::load_schema(ev_schema);
      synqp::EvaluateOptions options;
      options.quality.bins = ev_bins;
      options.quality.gate = {ev_max_hd, ev_auc_ratio};
      options.privacy.budgets = parse_list(ev_budgets);
      options.privacy.qi_columns = parse_names(ev_qi);
      options.privacy.threshold = ev_threshold;
      options.privacy.no_leak_band = ev_band;
      auto mode = synqp::parse_relaxed_class_mode(ev_mode);
      if (!mode) throw synqp::Error(synqp::Errc::config_error, "--relaxed-class-mode must be unit, relaxed_count or drop");
      options.privacy.relaxed_class_mode = *mode;
      options.real_label = ev_real;
      options.synth_label = std::filesystem::path(ev_synth).stem().string();
      if (!ev_hist.empty()) options.histogram_dir = ev_hist;
      options.invocation = {{"command", "evaluate"}, {"real", ev_real},   {"synth", ev_synth},
                            {"holdout", ev_holdout}, {"schema", ev_schema}, {"budgets", ev_budgets},
                            {"threshold", ev_threshold}, {"bins", ev_bins}, {"qi", ev_qi},
                            {"relaxed_class_mode", ev_mode}, {"no_leak_band", ev_band},
                            {"max_average_hd", ev_max_hd}, {"min_auc_ratio", ev_auc_ratio}};
      if (!(ev_threshold > 0)) throw synqp::Error(synqp::Errc::config_error, "--threshold must be positive");
      const auto rep = synqp::evaluate_report(synqp::load_table(ev_real, schema), synqp::load_table(ev_synth, schema),
                                              synqp::load_table(ev_holdout, schema), options);
      synqp::write_file_atomic(ev_out, rep.dump(2) + "\n");
      return rep["evaluation_matrix"]["all_pass"].get<bool>() ? 0 : 2;
    }
    if (*run) {
      auto config = synqp::load_pipeline_config(run_config);
      synqp::RunOptions options;
      options.invocation = {{"command", "run"}, {"config", run_config}};
      if (auto seed = synqp::seed_from_env()) {
        config.seed = *seed;
        options.seed_source = "SYNQP_SEED";
      }
      if (!run_out.empty()) config.output_dir = run_out;
      const auto result = synqp::run_pipeline(config, options);
      std::cerr << "report: " << result.report_path.string() << "\n";
      return result.exit_code;
    }
    if (*report) {
      auto format = synqp::parse_report_format(rep_format);
      if (!format) throw synqp::Error(synqp::Errc::config_error, "--format must be json, markdown or csv");
      ojson doc;
      try {
        doc = ojson::parse(synqp::read_file(rep_in));
      } catch (const ojson::exception& e) {
        throw synqp::Error(synqp::Errc::parse_error, rep_in + ": " + e.what());
      }
      const int code = synqp::recompute_gates(doc);
      write_output(rep_out, synqp::render_report(doc, *format));
      return code;
    }
  } catch (const synqp::Error& e) {
    std::cerr << "synqp: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "synqp: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
