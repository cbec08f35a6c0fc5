// Copyright 2026 The cimtrain Authors. All Rights Reserved.
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

// cimtrain: run, sweep and cost experiments from JSON configs or presets.
//
//   cimtrain run      --preset default --out runs/default
//   cimtrain sweep    --preset fig9 --workers 4
//   cimtrain cost     --config my.json
//   cimtrain describe --preset table1
//   cimtrain merge    --out runs/fig3
//
// Exit status: 0 success, 1 invalid configuration, 2 divergence, 3 other errors.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cimtrain/experiment.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cimtrain;

struct Common {
  std::string config;
  std::string preset;
  std::string out;
  std::string seed_list;
  std::size_t workers = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_run_flags) {
  cmd->add_option("--config", c.config, "Experiment config (JSON) or a run manifest");
  cmd->add_option("--preset", c.preset, "Bundled preset name");
  cmd->add_option("--out", c.out, "Output directory (defaults to the config's output_dir)");
  if (with_run_flags) {
    cmd->add_option("--seed-list", c.seed_list, "Comma-separated seeds, overriding the config");
    cmd->add_option("--workers", c.workers, "Concurrent grid points (sweep)");
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used != item.size() || item.front() == '-') {
      throw ConfigError("--seed-list", "bad seed '" + item + "'");
    }
    seeds.push_back(v);
  }
  if (seeds.empty()) throw ConfigError("--seed-list", "must list at least one seed");
  return seeds;
}

ExperimentConfig resolve(const Common& c) {
  if (!c.config.empty() && !c.preset.empty()) {
    throw ConfigError("", "give either --config or --preset, not both");
  }
  ExperimentConfig cfg = !c.config.empty()   ? load_config(c.config)
                         : !c.preset.empty() ? load_preset(c.preset)
                                             : load_preset("default");
  if (!c.seed_list.empty()) cfg.seeds = parse_seeds(c.seed_list);
  if (c.workers > 0) cfg.workers = c.workers;
  return cfg;
}

fs::path out_dir(const Common& c, const ExperimentConfig& cfg) {
  return c.out.empty() ? fs::path(cfg.output_dir) : fs::path(c.out);
}

int cmd_run(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const fs::path out = out_dir(c, cfg);
  int status = 0;
  for (auto seed : cfg.seeds) {
    const fs::path dir = cfg.seeds.size() == 1 ? out : out / ("seed=" + std::to_string(seed));
    const RunResult r = run_experiment(cfg, seed, dir);
    const auto test = r.history.test_accuracy();
    std::cout << "seed " << seed << ": test accuracy " << (test.empty() ? 0.0 : test.back())
              << " after " << (test.empty() ? 0 : test.size() - 1) << " epochs -> " << dir.string()
              << "\n";
    if (r.history.diverged) {
      std::cerr << "error: training diverged in epoch " << r.history.diverged_epoch << " (seed "
                << seed << "); partial history kept in " << dir.string() << "\n";
      status = 2;
    }
  }
  return status;
}

int cmd_sweep(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  if (cfg.sweep.empty()) throw ConfigError("sweep", "a sweep needs at least one axis");
  const fs::path out = out_dir(c, cfg);
  run_sweep(cfg, out);
  std::cout << "sweep of " << sweep_grid(cfg).size() << " runs -> " << (out / "merged.csv").string()
            << "\n";
  return 0;
}

int cmd_cost(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const fs::path out = c.out.empty() ? fs::path() : fs::path(c.out);
  const CostReport r = cost_experiment(cfg, out);
  std::cout << cost_report_json(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crossbar training simulator and hardware cost model"};
  app.require_subcommand(1);
  Common common;

  auto* run = app.add_subcommand("run", "Train one configuration for each seed");
  add_common(run, common, true);
  auto* sweep = app.add_subcommand("sweep", "Run the Cartesian product of sweep axes and seeds");
  add_common(sweep, common, true);
  auto* cost = app.add_subcommand("cost", "Closed-form area, energy and latency (no training)");
  add_common(cost, common, false);
  auto* desc = app.add_subcommand("describe", "Print the resolved config and floorplan");
  add_common(desc, common, false);
  auto* merge = app.add_subcommand("merge", "Rebuild merged.csv and summary.csv of a sweep");
  std::string merge_dir;
  merge->add_option("--out", merge_dir, "Sweep output directory")->required();
  auto* presets = app.add_subcommand("presets", "List bundled presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(common);
    if (*sweep) return cmd_sweep(common);
    if (*cost) return cmd_cost(common);
    if (*desc) {
      std::cout << describe(resolve(common));
      return 0;
    }
    if (*merge) {
      merge_sweep(merge_dir);
      return 0;
    }
    if (*presets) {
      for (const auto& n : preset_names()) std::cout << n << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
