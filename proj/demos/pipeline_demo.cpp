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

// Runs the bundled pipeline config and prints the markdown summary.
//   demo_pipeline [configs/pipeline.json] [output-dir]

#include <iostream>

#include "synqp/synqp.hpp"

int main(int argc, char** argv) {
  try {
    auto config = synqp::load_pipeline_config(argc > 1 ? argv[1] : "configs/pipeline.json");
    if (argc > 2) config.output_dir = argv[2];
    const auto result = synqp::run_pipeline(config);
    std::cout << synqp::render_report(result.report, synqp::ReportFormat::markdown);
    return result.exit_code;
  } catch (const synqp::Error& e) {
    std::cerr << synqp::to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  }
}
