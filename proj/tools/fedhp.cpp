/*
 * Copyright 2026 The fedhp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// fedhp command line: run / validate / report.

#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedhp/config.hpp"
#include "fedhp/harness.hpp"

namespace {

int guarded(const std::function<int()>& body) {
  using namespace fedhp;
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return harness::kConfigError;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return harness::kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return harness::kIoError;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return harness::kDivergence;
  } catch (const std::exception& e) {
    // Contract violations here mean a value slipped past validation.
    std::cerr << "error: " << e.what() << '\n';
    return harness::kConfigError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedhp: hyperparameter effects on federated backdoor attacks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fedhp::harness::kVersion);

  std::string path;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", path, "Config file")->required();
  std::string out_override;
  run->add_option("-o,--output", out_override, "Override [experiment] output_dir");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config file");
  validate->add_option("config", path, "Config file")->required();
  bool print = false;
  validate->add_flag("--print", print, "Print the canonical form");

  std::string dir;
  auto* report = app.add_subcommand("report", "Summarize a results directory");
  report->add_option("results-dir", dir, "Results directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    return guarded([&] {
      auto cfg = fedhp::config::load_config(path);
      if (!out_override.empty()) cfg.output_dir = out_override;
      const auto res = fedhp::harness::run_experiment(cfg);
      for (const auto& a : res.artifacts) std::cout << cfg.output_dir << '/' << a << '\n';
      if (res.exit_code != fedhp::harness::kOk) std::cerr << res.message << '\n';
      return res.exit_code;
    });
  }
  if (*validate) {
    return guarded([&] {
      const auto cfg = fedhp::config::load_config(path);
      if (print)
        std::cout << fedhp::config::serialize(cfg);
      else
        std::cout << "ok: " << fedhp::config::to_string(cfg.kind) << '\n';
      return 0;
    });
  }
  return guarded([&] { return fedhp::harness::report(dir, std::cout); });
}
