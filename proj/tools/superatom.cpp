// Copyright 2026 The superatom Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// superatom run <config> | superatom validate <config>

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "superatom/cli/runner.hpp"

namespace {

using namespace superatom;
using namespace superatom::cli;

template <class Body>
int guarded(Body&& body) {
  try {
    return body();
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const IntegrationError& e) {
    std::cerr << "error: integration failed: " << e.what() << " (t = " << e.time()
              << " us, local error = " << e.local_error() << ")\n";
    return kExitIntegration;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STIRAP simulator for a dissipative Rydberg superatom"};
  app.set_version_flag("--version", std::string(SUPERATOM_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("config", config_path, "config file")->required();
  auto* validate = app.add_subcommand("validate", "check a config and print effective parameters");
  validate->add_option("config", config_path, "config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitOther;
  }

  if (validate->parsed()) {
    return guarded([&] {
      const ExperimentConfig cfg = load_config(config_path);
      validate_report(cfg, std::cout);
      return kExitOk;
    });
  }
  return guarded([&] {
    const ExperimentConfig cfg = load_config(config_path);
    run_experiment(cfg, config_path, std::cout);
    std::cout << "wrote " << (cfg.output_dir / "manifest.json").string() << "\n";
    return kExitOk;
  });
}
