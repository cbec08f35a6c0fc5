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

#ifndef CIMTRAIN_EXPERIMENT_HPP_
#define CIMTRAIN_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimtrain/crossbar.hpp"
#include "cimtrain/dataset.hpp"
#include "cimtrain/hwcost.hpp"
#include "cimtrain/network.hpp"
#include "cimtrain/trainer.hpp"

namespace cimtrain {

/// Invalid configuration. `field` is the dotted path of the offending entry
/// (empty for document-level errors).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class BackendKind { digital, analog };

std::string to_string(BackendKind k);

struct DatasetSpec {
  enum class Kind { idx, synthetic };
  Kind kind = Kind::idx;
  /// Directory holding train-/t10k- IDX files. Empty selects
  /// $CIMTRAIN_DATA_ROOT, then the bundled data/mnist5k.
  std::string root;
  std::size_t train_limit = 0;  // 0 = all
  std::size_t test_limit = 0;
  SyntheticSpec synthetic;
  std::size_t synthetic_test_per_class = 16;
};

struct SweepAxis {
  std::string parameter;  // dotted path into the resolved config
  /// Further parameters set to the same value (e.g. subarray rows and cols).
  std::vector<std::string> linked;
  std::vector<std::string> values;  // JSON texts
};

struct ExperimentConfig {
  std::string name = "experiment";
  Topology topology;
  /// Set when the topology was given as width + depth; sweeps may then
  /// address topology.width and topology.depth.
  std::optional<std::size_t> width;
  std::optional<std::size_t> depth;
  TrainerKind trainer = TrainerKind::dfa;
  HyperParams hyper;
  BackendKind backend = BackendKind::digital;
  CrossbarConfig crossbar;
  std::string cost_profile = "default";
  std::size_t tile_dim = 1024;
  DatasetSpec dataset;
  std::vector<SweepAxis> sweep;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";
  std::size_t workers = 1;
  bool cost_only = false;
  bool record_wall_time = false;
};

/// Parse and exhaustively validate a JSON document. Unknown or mistyped
/// fields raise ConfigError naming the field.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config");
ExperimentConfig load_config(const std::filesystem::path& path);
/// Bundled preset by name (presets/<name>.json).
ExperimentConfig load_preset(const std::string& name);
std::vector<std::string> preset_names();
std::filesystem::path preset_dir();

/// The fully resolved configuration as canonical JSON text.
std::string resolved_config_json(const ExperimentConfig& cfg);
/// Copy of `cfg` with one dotted parameter replaced by a JSON value.
ExperimentConfig with_parameter(const ExperimentConfig& cfg, const std::string& parameter,
                                const std::string& value_json);

UnitCosts resolve_unit_costs(const ExperimentConfig& cfg);
/// The resolved profile in key-value form.
std::string cost_profile_text(const ExperimentConfig& cfg);
std::filesystem::path resolve_data_root(const DatasetSpec& spec);

struct LoadedData {
  Dataset train;
  Dataset test;
  std::vector<std::filesystem::path> files;  // inputs that were read
};
LoadedData load_data(const DatasetSpec& spec);

Workload workload_for(const ExperimentConfig& cfg, std::size_t train_samples);
/// Samples per epoch without loading pixels (IDX headers only).
std::size_t train_samples(const ExperimentConfig& cfg);

/// Git-style blob hash: sha1("blob <size>\0" + content), lower-case hex.
std::string git_blob_sha1(const std::string& content);
std::string git_blob_sha1_file(const std::filesystem::path& path);

struct RunResult {
  History history;
  CostReport cost;
  std::filesystem::path dir;
  std::uint64_t seed = 0;
};

/// One training run for `seed`, artifacts under `out_dir`: history.csv,
/// cost.json, cost.csv, model.bin, manifest.json.
RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                         const std::filesystem::path& out_dir);
/// Cost report only; writes cost.json, cost.csv and manifest.json when
/// `out_dir` is non-empty.
CostReport cost_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir = {});

struct SweepPoint {
  std::vector<std::string> values;  // one JSON text per axis
  std::uint64_t seed = 0;
  std::string dir;  // relative to the sweep output directory
};

/// Cartesian product of axes (first axis slowest) times seeds.
std::vector<SweepPoint> sweep_grid(const ExperimentConfig& cfg);
/// Runs every grid point on up to cfg.workers threads, then merges.
void run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
/// Rebuilds merged.csv and summary.csv from sweep.json and the per-run
/// artifacts.
void merge_sweep(const std::filesystem::path& out_dir);

/// Human-readable description: resolved config and floorplan.
std::string describe(const ExperimentConfig& cfg);

}  // namespace cimtrain

#endif  // CIMTRAIN_EXPERIMENT_HPP_
