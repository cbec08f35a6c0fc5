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

#include "cimtrain/hwcost.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include "json.hpp"

namespace cimtrain {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

// Single table driving profile parsing, printing and validation.
struct Field {
  const char* key;
  std::function<double(const UnitCosts&)> get;
  std::function<void(UnitCosts&, double)> set;
};

template <typename T>
Field field(const char* key, T UnitCosts::* member) {
  return {key, [member](const UnitCosts& u) { return static_cast<double>(u.*member); },
          [member](UnitCosts& u, double v) { u.*member = static_cast<T>(v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field("cell_area", &UnitCosts::cell_area),
      field("adc_area", &UnitCosts::adc_area),
      field("adc_reference_bits", &UnitCosts::adc_reference_bits),
      field("ic_area", &UnitCosts::ic_area),
      field("accum_area", &UnitCosts::accum_area),
      field("wgu_area", &UnitCosts::wgu_area),
      field("buffer_area", &UnitCosts::buffer_area),
      field("global_buffer_area", &UnitCosts::global_buffer_area),
      field("function_unit_area", &UnitCosts::function_unit_area),
      field("adc_energy", &UnitCosts::adc_energy),
      field("cell_read_energy", &UnitCosts::cell_read_energy),
      field("write_energy", &UnitCosts::write_energy),
      field("wgu_energy", &UnitCosts::wgu_energy),
      field("onchip_buffer_energy", &UnitCosts::onchip_buffer_energy),
      field("offchip_energy_factor", &UnitCosts::offchip_energy_factor),
      field("read_latency", &UnitCosts::read_latency),
      field("write_latency", &UnitCosts::write_latency),
      field("wgu_latency", &UnitCosts::wgu_latency),
      field("wgu_lanes", &UnitCosts::wgu_lanes),
      field("onchip_buffer_latency", &UnitCosts::onchip_buffer_latency),
      field("offchip_buffer_latency", &UnitCosts::offchip_buffer_latency),
  };
  return table;
}

bool is_integral_key(const std::string& key) {
  return key == "adc_reference_bits" || key == "wgu_lanes";
}

}  // namespace

// ---------------------------------------------------------------------------
// Unit costs

void UnitCosts::validate() const {
  for (const Field& f : fields()) {
    const double v = f.get(*this);
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ContractViolation(std::string("UnitCosts: ") + f.key + " must be finite and >= 0");
    }
  }
  if (wgu_lanes == 0) {
    throw ContractViolation("UnitCosts: wgu_lanes must be >= 1");
  }
  if (adc_reference_bits < 1) throw ContractViolation("UnitCosts: adc_reference_bits >= 1");
  if (!(offchip_energy_factor > 1.0)) {
    throw ContractViolation("UnitCosts: off-chip buffer energy must exceed on-chip");
  }
}

double UnitCosts::adc_area_at(int bits) const {
  if (bits <= 0) bits = adc_reference_bits;
  return adc_area * std::ldexp(1.0, bits - adc_reference_bits);
}

double UnitCosts::adc_energy_at(int bits) const {
  if (bits <= 0) bits = adc_reference_bits;
  return adc_energy * std::ldexp(1.0, bits - adc_reference_bits);
}

UnitCosts parse_unit_costs(std::istream& in, const std::string& origin) {
  UnitCosts uc;
  std::map<std::string, const Field*> by_key;
  for (const Field& f : fields()) by_key[f.key] = &f;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto where = origin + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error(where + "expected 'key = value'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw std::runtime_error(where + "unknown key '" + key + "'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) {
      throw std::runtime_error(where + "bad number '" + value + "' for " + key);
    }
    if (is_integral_key(key) && (v != std::floor(v) || v < 0)) {
      throw std::runtime_error(where + key + " must be a non-negative integer");
    }
    it->second->set(uc, v);
  }
  try {
    uc.validate();
  } catch (const ContractViolation& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
  return uc;
}

UnitCosts load_unit_costs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open cost profile " + path.string());
  return parse_unit_costs(in, path.string());
}

void write_unit_costs(std::ostream& out, const UnitCosts& uc) {
  // Shortest text that parses back to the same double.
  char buf[32];
  for (const Field& f : fields()) {
    const auto r = std::to_chars(buf, buf + sizeof buf, f.get(uc));
    out << f.key << " = " << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf)) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Floorplan

std::size_t Floorplan::tiles() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.tiles();
  return n;
}

std::size_t Floorplan::adc_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.adc_count;
  return n;
}

std::uint64_t Floorplan::mapped_cells() const {
  std::uint64_t n = 0;
  for (const auto& l : layers) n += l.mapped_cells();
  return n;
}

std::uint64_t Floorplan::provisioned_cells() const {
  return static_cast<std::uint64_t>(tiles()) * tile_dim * tile_dim;
}

double Floorplan::utilization() const {
  const auto p = provisioned_cells();
  return p == 0 ? 0.0 : static_cast<double>(mapped_cells()) / static_cast<double>(p);
}

Floorplan build_floorplan(const Topology& topology, TrainerKind kind, const CrossbarConfig& cfg,
                          std::size_t tile_dim) {
  topology.validate();
  cfg.validate();
  if (tile_dim == 0) throw ContractViolation("build_floorplan: tile_dim must be >= 1");
  Floorplan fp;
  fp.kind = kind;
  fp.topology = topology;
  fp.crossbar = cfg;
  fp.tile_dim = tile_dim;
  const std::size_t adcs_per_subarray = ceil_div(cfg.subarray_cols, cfg.adc_column_mux);
  const std::size_t per_tile =
      ceil_div(tile_dim, cfg.subarray_rows) * ceil_div(tile_dim, cfg.subarray_cols);
  const std::size_t n = topology.depth();
  for (std::size_t l = 0; l < n; ++l) {
    LayerPlan p;
    p.rows = topology.dims[l];
    p.cols = topology.dims[l + 1];
    p.grid_rows = ceil_div(p.rows, cfg.subarray_rows);
    p.grid_cols = ceil_div(p.cols, cfg.subarray_cols);
    p.tile_rows = ceil_div(p.rows, tile_dim);
    p.tile_cols = ceil_div(p.cols, tile_dim);
    p.subarrays_per_tile = per_tile;
    p.transposable = kind == TrainerKind::bp;
    // Transposable arrays carry a second, rotated copy of the periphery.
    p.adc_count = p.provisioned_subarrays() * adcs_per_subarray * (p.transposable ? 2 : 1);
    fp.layers.push_back(p);
    fp.wgu_capacity = std::max<std::uint64_t>(fp.wgu_capacity, p.mapped_cells());
  }
  fp.wgu_count = kind == TrainerKind::dfa ? n : 1;
  if (kind == TrainerKind::dfa && n > 1) {
    FeedbackPlan& fb = fp.feedback;
    fb.rows = topology.classes();
    fb.cols = topology.max_hidden();
    fb.subarrays = subarrays_spanned(fb.rows, fb.cols, cfg);
    fb.adc_count = fb.subarrays * adcs_per_subarray;
    for (std::size_t l = 1; l < n; ++l) {
      fb.logical_cells += static_cast<std::uint64_t>(topology.dims[l]) * topology.classes();
    }
  }
  return fp;
}

// ---------------------------------------------------------------------------
// Event counts

std::size_t Workload::batches() const {
  return batch_size == 0 ? 0 : ceil_div(samples, batch_size);
}

EpochCounts closed_form_counts(const Floorplan& fp, const Workload& wl) {
  EpochCounts ec;
  const std::uint64_t s = wl.samples;
  const std::uint64_t nb = wl.batches();
  const std::size_t n = fp.layers.size();
  const std::uint64_t a = static_cast<std::uint64_t>(wl.activation_bits);
  const std::uint64_t e = static_cast<std::uint64_t>(wl.error_bits);
  const std::uint64_t g = static_cast<std::uint64_t>(wl.gradient_bits);
  const CrossbarConfig& cfg = fp.crossbar;
  auto& fwd = ec.events[static_cast<std::size_t>(EventKind::forward_read)];
  auto& tr = ec.events[static_cast<std::size_t>(EventKind::transposed_read)];
  auto& fb = ec.events[static_cast<std::size_t>(EventKind::feedback_read)];
  auto& grad = ec.events[static_cast<std::size_t>(EventKind::gradient_compute)];
  auto& wr = ec.events[static_cast<std::size_t>(EventKind::program_write)];
  const std::size_t classes = fp.topology.classes();

  for (std::size_t l = 0; l < n; ++l) {
    const LayerPlan& p = fp.layers[l];
    const std::uint64_t cells = p.mapped_cells();
    const std::uint64_t sub = p.mapped_subarrays();
    fwd.events += nb;
    fwd.vector_reads += s * sub;
    fwd.cell_operations += s * cells;
    ec.adc_conversions += s * p.grid_rows * p.cols;
    grad.events += nb;
    grad.vector_reads += s;
    grad.cell_operations += s * cells;
    wr.events += nb;
    wr.vector_reads += nb * sub;
    wr.cell_operations += nb * cells;
    if (l >= 1 && fp.kind == TrainerKind::bp) {
      tr.events += nb;
      tr.vector_reads += s * sub;
      tr.cell_operations += s * cells;
      ec.adc_conversions += s * p.grid_cols * p.rows;
      ec.onchip_bits += s * p.rows * e;
    }
    if (l + 1 < n && fp.kind == TrainerKind::dfa) {
      const std::size_t width = fp.topology.dims[l + 1];
      fb.events += nb;
      fb.vector_reads += s * subarrays_spanned(classes, width, cfg);
      fb.cell_operations += s * classes * width;
      ec.adc_conversions += s * ceil_div(classes, cfg.subarray_rows) * width;
    }

    // Off-chip traffic; the formulas do not depend on the learning rule.
    if (l == 0) ec.offchip_bits += s * p.rows * a;     // fetch inputs
    if (l + 1 < n) ec.offchip_bits += s * p.cols * a;  // store h_{l+1}
    ec.offchip_bits += s * p.rows * a;                 // reload h_l
    ec.offchip_bits += 2 * s * p.cols * e;             // store and reload delta_l
    ec.offchip_bits += 2 * nb * cells * g;             // store and reload gradient
    ec.onchip_bits += s * p.cols * a;                  // partial sums to tile buffer
  }
  if (fp.kind == TrainerKind::dfa && n > 1) ec.onchip_bits += s * classes * e;  // broadcast e
  return ec;
}

// ---------------------------------------------------------------------------
// Area

double AreaBreakdown::total() const {
  return cim_cells + adc + ic + accumulation + wgu + buffer + other;
}

AreaBreakdown estimate_area(const Floorplan& fp, const UnitCosts& uc) {
  uc.validate();
  const CrossbarConfig& cfg = fp.crossbar;
  const double sub_cells = static_cast<double>(cfg.subarray_rows * cfg.subarray_cols);
  AreaBreakdown a;
  for (const auto& l : fp.layers) {
    const double sub = static_cast<double>(l.provisioned_subarrays());
    const double copies = l.transposable ? 2.0 : 1.0;
    a.cim_cells += sub * sub_cells * uc.cell_area;
    a.adc += static_cast<double>(l.adc_count) * uc.adc_area_at(cfg.adc_bits);
    a.ic += copies * sub * uc.ic_area;
    a.accumulation += copies * sub * uc.accum_area;
    a.buffer += static_cast<double>(l.tiles()) * uc.buffer_area;
    a.other += uc.function_unit_area;
  }
  a.buffer += uc.global_buffer_area;
  a.wgu = static_cast<double>(fp.wgu_count) * static_cast<double>(fp.wgu_capacity) * uc.wgu_area;
  const double fb_sub = static_cast<double>(fp.feedback.subarrays);
  a.feedback_cells = fb_sub * sub_cells * uc.cell_area;
  a.cim_cells += a.feedback_cells;
  // Feedback periphery is booked under "other" so the adc line compares
  // weight arrays only.
  a.other += static_cast<double>(fp.feedback.adc_count) * uc.adc_area_at(cfg.adc_bits) +
             fb_sub * (uc.ic_area + uc.accum_area);
  return a;
}

// ---------------------------------------------------------------------------
// Energy

double EnergyBreakdown::total() const {
  return forward_reads + backward_reads + gradient_compute + writes + onchip_buffer +
         offchip_buffer;
}

EnergyBreakdown estimate_energy(const Floorplan& fp, const UnitCosts& uc, const Workload& wl) {
  uc.validate();
  const EpochCounts c = closed_form_counts(fp, wl);
  const CrossbarConfig& cfg = fp.crossbar;
  const double adc = uc.adc_energy_at(cfg.adc_bits);
  const double epochs = static_cast<double>(wl.epochs);
  const double s = static_cast<double>(wl.samples);

  double fwd_conv = 0.0;
  double bwd_conv = 0.0;
  const std::size_t n = fp.layers.size();
  for (std::size_t l = 0; l < n; ++l) {
    const LayerPlan& p = fp.layers[l];
    fwd_conv += s * static_cast<double>(p.grid_rows * p.cols);
    if (l >= 1 && fp.kind == TrainerKind::bp)
      bwd_conv += s * static_cast<double>(p.grid_cols * p.rows);
    if (l + 1 < n && fp.kind == TrainerKind::dfa) {
      bwd_conv += s * static_cast<double>(ceil_div(fp.topology.classes(), cfg.subarray_rows) *
                                          fp.topology.dims[l + 1]);
    }
  }
  auto cells = [&](EventKind k) { return static_cast<double>(c.at(k).cell_operations); };

  EnergyBreakdown e;
  e.forward_reads =
      epochs * (cells(EventKind::forward_read) * uc.cell_read_energy + fwd_conv * adc);
  e.backward_reads =
      epochs *
      ((cells(EventKind::transposed_read) + cells(EventKind::feedback_read)) * uc.cell_read_energy +
       bwd_conv * adc);
  e.gradient_compute = epochs * cells(EventKind::gradient_compute) * uc.wgu_energy;
  e.writes = epochs * cells(EventKind::program_write) * uc.write_energy;
  e.onchip_buffer = epochs * static_cast<double>(c.onchip_bits) * uc.onchip_buffer_energy;
  e.offchip_buffer = epochs * static_cast<double>(c.offchip_bits) * uc.offchip_buffer_energy();
  return e;
}

// ---------------------------------------------------------------------------
// Latency

double LatencyBreakdown::total() const {
  return forward + error_transport + gradient_compute + write + buffering;
}

namespace {

struct Stage {
  double gradient = 0.0;
  double write = 0.0;
  double buffering = 0.0;
  double total() const { return gradient + write + buffering; }
};

// One mini-batch of b vectors.
LatencyBreakdown batch_latency(const Floorplan& fp, const UnitCosts& uc, const Workload& wl,
                               double b) {
  const double a = wl.activation_bits;
  const double e = wl.error_bits;
  const double g = wl.gradient_bits;
  const double t_off = uc.offchip_buffer_latency;
  const double t_on = uc.onchip_buffer_latency;
  const std::size_t n = fp.layers.size();
  LatencyBreakdown lat;

  // Forward: strictly sequential in both rules.
  for (std::size_t l = 0; l < n; ++l) {
    const LayerPlan& p = fp.layers[l];
    lat.forward += b * uc.read_latency + b * static_cast<double>(p.cols) * a * t_on;
    if (l == 0) lat.buffering += b * static_cast<double>(p.rows) * a * t_off;
    if (l + 1 < n) lat.buffering += b * static_cast<double>(p.cols) * a * t_off;
  }
  lat.forward_phase = lat.forward + lat.buffering;

  std::vector<Stage> stages(n);
  for (std::size_t l = 0; l < n; ++l) {
    const LayerPlan& p = fp.layers[l];
    const double r = static_cast<double>(p.rows);
    const double c = static_cast<double>(p.cols);
    Stage& st = stages[l];
    st.gradient = b * r * c * uc.wgu_latency / static_cast<double>(uc.wgu_lanes);
    st.write = r * uc.write_latency;
    // Reload h_l, store and reload delta_l, store and reload the gradient.
    st.buffering = (b * r * a + 2.0 * b * c * e + 2.0 * r * c * g) * t_off;
  }

  if (fp.kind == TrainerKind::bp) {
    for (std::size_t l = 0; l < n; ++l) {
      const Stage& st = stages[l];
      lat.gradient_compute += st.gradient;
      lat.write += st.write;
      lat.buffering += st.buffering;
      lat.update_stage += st.total();
      if (l >= 1) {
        lat.error_transport +=
            b * uc.read_latency + b * static_cast<double>(fp.layers[l].rows) * e * t_on;
      }
    }
  } else {
    // Layers update in parallel, each against its own DRAM block, so only
    // the slowest stage is on the critical path. The feedback slices are
    // rows of one array, so a single read serves every hidden layer.
    std::size_t worst = 0;
    for (std::size_t l = 1; l < n; ++l) {
      if (stages[l].total() > stages[worst].total()) worst = l;
    }
    const Stage& st = stages[worst];
    lat.gradient_compute = st.gradient;
    lat.write = st.write;
    lat.buffering += st.buffering;
    lat.update_stage = st.total();
    if (n > 1) {
      lat.error_transport =
          b * uc.read_latency + b * static_cast<double>(fp.topology.classes()) * e * t_on;
    }
  }
  lat.backward_phase = lat.total() - lat.forward_phase;
  return lat;
}

}  // namespace

LatencyBreakdown estimate_latency(const Floorplan& fp, const UnitCosts& uc, const Workload& wl) {
  uc.validate();
  LatencyBreakdown total;
  const std::size_t nb = wl.batches();
  if (nb == 0 || wl.epochs == 0) return total;
  const std::size_t last = wl.samples - (nb - 1) * wl.batch_size;
  const LatencyBreakdown full = batch_latency(fp, uc, wl, static_cast<double>(wl.batch_size));
  const LatencyBreakdown tail = batch_latency(fp, uc, wl, static_cast<double>(last));
  const double k = static_cast<double>(nb - 1);
  const double ep = static_cast<double>(wl.epochs);
  auto combine = [&](double LatencyBreakdown::* m) { total.*m = ep * (k * (full.*m) + tail.*m); };
  for (auto m :
       {&LatencyBreakdown::forward, &LatencyBreakdown::error_transport,
        &LatencyBreakdown::gradient_compute, &LatencyBreakdown::write, &LatencyBreakdown::buffering,
        &LatencyBreakdown::forward_phase, &LatencyBreakdown::update_stage}) {
    combine(m);
  }
  total.backward_phase = total.total() - total.forward_phase;
  return total;
}

CostReport estimate_cost(const Floorplan& fp, const UnitCosts& uc, const Workload& wl) {
  CostReport r;
  r.floorplan = fp;
  r.workload = wl;
  r.area = estimate_area(fp, uc);
  r.energy = estimate_energy(fp, uc, wl);
  r.latency = estimate_latency(fp, uc, wl);
  r.counts = closed_form_counts(fp, wl);
  return r;
}

// ---------------------------------------------------------------------------
// Serialization

std::string cost_report_json(const CostReport& r) {
  using nlohmann::ordered_json;
  const Floorplan& fp = r.floorplan;
  ordered_json j;
  j["trainer"] = to_string(fp.kind);
  ordered_json dims = ordered_json::array();
  for (auto d : fp.topology.dims) dims.push_back(d);
  j["topology"] = dims;
  j["workload"] = {
      {"samples", r.workload.samples},       {"batch_size", r.workload.batch_size},
      {"epochs", r.workload.epochs},         {"activation_bits", r.workload.activation_bits},
      {"error_bits", r.workload.error_bits}, {"gradient_bits", r.workload.gradient_bits}};
  j["area_um2"] = {{"cim_cells", r.area.cim_cells},
                   {"adc", r.area.adc},
                   {"ic", r.area.ic},
                   {"accumulation", r.area.accumulation},
                   {"wgu", r.area.wgu},
                   {"buffer", r.area.buffer},
                   {"other", r.area.other},
                   {"total", r.area.total()},
                   {"feedback_cells", r.area.feedback_cells}};
  j["energy_pJ"] = {{"forward_reads", r.energy.forward_reads},
                    {"backward_reads", r.energy.backward_reads},
                    {"gradient_compute", r.energy.gradient_compute},
                    {"writes", r.energy.writes},
                    {"onchip_buffer", r.energy.onchip_buffer},
                    {"offchip_buffer", r.energy.offchip_buffer},
                    {"total", r.energy.total()}};
  j["latency_ns"] = {{"forward", r.latency.forward},
                     {"error_transport", r.latency.error_transport},
                     {"gradient_compute", r.latency.gradient_compute},
                     {"write", r.latency.write},
                     {"buffering", r.latency.buffering},
                     {"total", r.latency.total()},
                     {"forward_phase", r.latency.forward_phase},
                     {"backward_phase", r.latency.backward_phase},
                     {"update_stage", r.latency.update_stage}};
  j["utilization"] = fp.utilization();
  ordered_json layers = ordered_json::array();
  for (const auto& l : fp.layers) {
    layers.push_back({{"rows", l.rows},
                      {"cols", l.cols},
                      {"subarray_grid", {l.grid_rows, l.grid_cols}},
                      {"tile_grid", {l.tile_rows, l.tile_cols}},
                      {"tiles", l.tiles()},
                      {"provisioned_subarrays", l.provisioned_subarrays()},
                      {"adc_count", l.adc_count},
                      {"transposable", l.transposable}});
  }
  j["floorplan"] = {{"tile_dim", fp.tile_dim},
                    {"tiles", fp.tiles()},
                    {"adc_count", fp.adc_count()},
                    {"wgu_count", fp.wgu_count},
                    {"wgu_capacity", fp.wgu_capacity},
                    {"mapped_cells", fp.mapped_cells()},
                    {"provisioned_cells", fp.provisioned_cells()},
                    {"feedback_logical_cells", fp.feedback.logical_cells},
                    {"feedback_physical_cells", fp.feedback.physical_cells()},
                    {"feedback_subarrays", fp.feedback.subarrays},
                    {"feedback_adc_count", fp.feedback.adc_count},
                    {"layers", layers}};
  ordered_json counts;
  for (std::size_t k = 0; k < kEventKinds; ++k) {
    const auto& c = r.counts.events[k];
    counts[to_string(static_cast<EventKind>(k))] = {{"events", c.events},
                                                    {"vector_reads", c.vector_reads},
                                                    {"cell_operations", c.cell_operations}};
  }
  counts["offchip_bits"] = r.counts.offchip_bits;
  counts["onchip_bits"] = r.counts.onchip_bits;
  counts["adc_conversions"] = r.counts.adc_conversions;
  j["counts_per_epoch"] = counts;
  return j.dump(2) + "\n";
}

void write_cost_csv(std::ostream& out, const CostReport& r) {
  out << "metric,category,value\n" << std::setprecision(17);
  auto row = [&](const char* m, const char* c, double v) {
    out << m << ',' << c << ',' << v << '\n';
  };
  row("area_um2", "cim_cells", r.area.cim_cells);
  row("area_um2", "adc", r.area.adc);
  row("area_um2", "ic", r.area.ic);
  row("area_um2", "accumulation", r.area.accumulation);
  row("area_um2", "wgu", r.area.wgu);
  row("area_um2", "buffer", r.area.buffer);
  row("area_um2", "other", r.area.other);
  row("area_um2", "total", r.area.total());
  row("energy_pJ", "forward_reads", r.energy.forward_reads);
  row("energy_pJ", "backward_reads", r.energy.backward_reads);
  row("energy_pJ", "gradient_compute", r.energy.gradient_compute);
  row("energy_pJ", "writes", r.energy.writes);
  row("energy_pJ", "onchip_buffer", r.energy.onchip_buffer);
  row("energy_pJ", "offchip_buffer", r.energy.offchip_buffer);
  row("energy_pJ", "total", r.energy.total());
  row("latency_ns", "forward", r.latency.forward);
  row("latency_ns", "error_transport", r.latency.error_transport);
  row("latency_ns", "gradient_compute", r.latency.gradient_compute);
  row("latency_ns", "write", r.latency.write);
  row("latency_ns", "buffering", r.latency.buffering);
  row("latency_ns", "total", r.latency.total());
  row("floorplan", "tiles", static_cast<double>(r.floorplan.tiles()));
  row("floorplan", "adc_count", static_cast<double>(r.floorplan.adc_count()));
  row("floorplan", "wgu_count", static_cast<double>(r.floorplan.wgu_count));
  row("floorplan", "utilization", r.floorplan.utilization());
}

}  // namespace cimtrain
