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

#ifndef CIMTRAIN_HWCOST_HPP_
#define CIMTRAIN_HWCOST_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cimtrain/backend.hpp"
#include "cimtrain/crossbar.hpp"
#include "cimtrain/network.hpp"
#include "cimtrain/trainer.hpp"

namespace cimtrain {

/// Per-component constants. Areas in um^2, energies in pJ, latencies in ns.
struct UnitCosts {
  // Area.
  double cell_area = 0.05;        // per cell
  double adc_area = 300.0;        // per ADC at adc_reference_bits
  int adc_reference_bits = 8;     // ADC area and energy double per bit above this
  double ic_area = 1500.0;        // per subarray: decoders, drivers, switch matrix
  double accum_area = 1500.0;     // per subarray: shift-add and partial-sum logic
  double wgu_area = 0.53;         // per gradient element of WGU capacity
  double buffer_area = 100000.0;  // per tile: input and output buffers
  double global_buffer_area = 500000.0;
  double function_unit_area = 20000.0;  // per weight layer: activation and error units

  // Energy.
  double adc_energy = 2.0;            // per conversion at adc_reference_bits
  double cell_read_energy = 0.01;     // per cell per read vector
  double write_energy = 1.0;          // per programmed cell
  double wgu_energy = 0.05;           // per MAC
  double onchip_buffer_energy = 0.1;  // per bit
  double offchip_energy_factor = 100.0;

  // Latency.
  double read_latency = 10.0;   // per vector per array read
  double write_latency = 10.0;  // per programmed array row
  double wgu_latency = 1.0;     // per MAC per lane
  std::size_t wgu_lanes = 4096;
  double onchip_buffer_latency = 0.0005;  // per bit
  double offchip_buffer_latency = 0.02;   // per bit

  void validate() const;
  double adc_area_at(int bits) const;
  double adc_energy_at(int bits) const;
  double offchip_buffer_energy() const { return onchip_buffer_energy * offchip_energy_factor; }

  friend bool operator==(const UnitCosts&, const UnitCosts&) = default;
};

/// Key-value profile text: `key = value` lines, `#` comments. Unknown keys
/// and malformed lines are errors naming the line.
UnitCosts parse_unit_costs(std::istream& in, const std::string& origin = "profile");
UnitCosts load_unit_costs(const std::filesystem::path& path);
void write_unit_costs(std::ostream& out, const UnitCosts& uc);

struct LayerPlan {
  std::size_t rows = 0;  // input lines
  std::size_t cols = 0;  // output lines
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::size_t tile_rows = 0;
  std::size_t tile_cols = 0;
  std::size_t subarrays_per_tile = 0;
  bool transposable = false;
  std::size_t adc_count = 0;

  std::size_t tiles() const { return tile_rows * tile_cols; }
  std::size_t mapped_subarrays() const { return grid_rows * grid_cols; }
  std::size_t provisioned_subarrays() const { return tiles() * subarrays_per_tile; }
  std::uint64_t mapped_cells() const { return static_cast<std::uint64_t>(rows) * cols; }
};

/// The DFA feedback master, placed in its own block of subarrays.
struct FeedbackPlan {
  std::size_t rows = 0;  // classes (input lines)
  std::size_t cols = 0;  // widest hidden layer
  std::size_t subarrays = 0;
  std::size_t adc_count = 0;
  std::uint64_t logical_cells = 0;  // sum over hidden layers of d_l * C
  std::uint64_t physical_cells() const { return static_cast<std::uint64_t>(rows) * cols; }
};

struct Floorplan {
  TrainerKind kind = TrainerKind::dfa;
  Topology topology;
  CrossbarConfig crossbar;
  std::size_t tile_dim = 1024;
  std::vector<LayerPlan> layers;
  FeedbackPlan feedback;  // empty for BP
  std::size_t wgu_count = 0;
  std::uint64_t wgu_capacity = 0;  // gradient elements per WGU

  std::size_t tiles() const;
  std::size_t adc_count() const;  // weight-array ADCs only
  std::uint64_t mapped_cells() const;
  std::uint64_t provisioned_cells() const;
  /// Mapped / provisioned weight cells.
  double utilization() const;
};

Floorplan build_floorplan(const Topology& topology, TrainerKind kind, const CrossbarConfig& cfg,
                          std::size_t tile_dim = 1024);

/// What is trained: samples per epoch, batch size, epoch count and the
/// widths of buffered values.
struct Workload {
  std::size_t samples = 0;
  std::size_t batch_size = 128;
  std::size_t epochs = 1;
  int activation_bits = 8;
  int error_bits = 8;
  int gradient_bits = 8;

  std::size_t batches() const;
};

/// Per-epoch hardware event counts in the same units as EventTally, plus
/// buffer traffic.
struct EpochCounts {
  std::array<EventTally::Counts, kEventKinds> events{};
  std::uint64_t offchip_bits = 0;
  std::uint64_t onchip_bits = 0;
  std::uint64_t adc_conversions = 0;

  const EventTally::Counts& at(EventKind k) const { return events[static_cast<std::size_t>(k)]; }
};

EpochCounts closed_form_counts(const Floorplan& fp, const Workload& wl);

struct AreaBreakdown {
  double cim_cells = 0.0;
  double adc = 0.0;
  double ic = 0.0;
  double accumulation = 0.0;
  double wgu = 0.0;
  double buffer = 0.0;
  double other = 0.0;
  /// Share of cim_cells taken by the feedback master.
  double feedback_cells = 0.0;

  double total() const;
};

struct EnergyBreakdown {
  double forward_reads = 0.0;
  double backward_reads = 0.0;
  double gradient_compute = 0.0;
  double writes = 0.0;
  double onchip_buffer = 0.0;
  double offchip_buffer = 0.0;

  double total() const;
};

struct LatencyBreakdown {
  double forward = 0.0;
  double error_transport = 0.0;
  double gradient_compute = 0.0;
  double write = 0.0;
  double buffering = 0.0;
  /// The same total split by training phase.
  double forward_phase = 0.0;
  double backward_phase = 0.0;
  /// Per-layer update stages on the critical path: operand loads, gradient
  /// compute, gradient buffering and write.
  double update_stage = 0.0;

  double total() const;
};

AreaBreakdown estimate_area(const Floorplan& fp, const UnitCosts& uc);
EnergyBreakdown estimate_energy(const Floorplan& fp, const UnitCosts& uc, const Workload& wl);
LatencyBreakdown estimate_latency(const Floorplan& fp, const UnitCosts& uc, const Workload& wl);

struct CostReport {
  Floorplan floorplan;
  Workload workload;
  AreaBreakdown area;
  EnergyBreakdown energy;
  LatencyBreakdown latency;
  EpochCounts counts;
};

CostReport estimate_cost(const Floorplan& fp, const UnitCosts& uc, const Workload& wl);

std::string cost_report_json(const CostReport& r);
/// Tidy table: metric,category,value.
void write_cost_csv(std::ostream& out, const CostReport& r);

}  // namespace cimtrain

#endif  // CIMTRAIN_HWCOST_HPP_
