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

#include "cimtrain/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#ifndef CIMTRAIN_SOURCE_DIR
#define CIMTRAIN_SOURCE_DIR "."
#endif

namespace cimtrain {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string to_string(BackendKind k) { return k == BackendKind::digital ? "digital" : "analog"; }

namespace {

// ---------------------------------------------------------------------------
// Strict JSON reading

// Reads one JSON object, remembering which keys were consumed so that
// finish() can reject the rest by name.
class Reader {
 public:
  Reader(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }
  std::string at(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const ordered_json* raw(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const char* key, std::size_t& out) {
    if (const auto* v = raw(key)) {
      if (!v->is_number_integer() ||
          (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
        throw ConfigError(at(key), "expected a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }
  void get(const char* key, int& out) {
    if (const auto* v = raw(key)) {
      if (!v->is_number_integer()) throw ConfigError(at(key), "expected an integer");
      out = v->get<int>();
    }
  }
  void get(const char* key, double& out) {
    if (const auto* v = raw(key)) {
      if (!v->is_number()) throw ConfigError(at(key), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, bool& out) {
    if (const auto* v = raw(key)) {
      if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const auto* v = raw(key)) {
      if (!v->is_string()) throw ConfigError(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(at(key.c_str()), "unknown field");
    }
  }

 private:
  const ordered_json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
auto field_guard(const std::string& field, Fn&& fn) {
  try {
    return fn();
  } catch (const ContractViolation& e) {
    throw ConfigError(field, e.what());
  }
}

std::optional<Quantizer> read_precision(Reader& parent, const char* key) {
  const ordered_json* v = parent.raw(key);
  if (v == nullptr) return std::nullopt;
  Reader r(*v, parent.at(key));
  int bits = 0;
  Quantizer q;
  std::string rounding = "nearest";
  r.get("bits", bits);
  r.get("range", q.range);
  r.get("rounding", rounding);
  r.finish();
  if (bits < 0) throw ConfigError(r.at("bits"), "must be >= 0 (0 disables)");
  q.mode = field_guard(r.at("rounding"), [&] { return rounding_mode_from_string(rounding); });
  if (bits == 0) return std::nullopt;
  q.bits = bits;
  field_guard(parent.at(key), [&] { q.validate(); });
  return q;
}

ordered_json precision_json(const std::optional<Quantizer>& q) {
  if (!q) return {{"bits", 0}, {"range", 1.0}, {"rounding", "nearest"}};
  return {{"bits", q->bits}, {"range", q->range}, {"rounding", to_string(q->mode)}};
}

ExperimentConfig from_json(const ordered_json& doc) {
  ExperimentConfig cfg;
  Reader top(doc, "");
  top.get("name", cfg.name);

  // Topology.
  {
    const ordered_json* t = top.raw("topology");
    if (t == nullptr) throw ConfigError("topology", "required");
    Reader r(*t, "topology");
    std::size_t inputs = 0, classes = 0;
    std::string act = "relu";
    r.get("inputs", inputs);
    r.get("classes", classes);
    r.get("activation", act);
    if (inputs == 0) throw ConfigError(r.at("inputs"), "required and >= 1");
    if (classes < 2) throw ConfigError(r.at("classes"), "required and >= 2");
    const Activation a =
        field_guard(r.at("activation"), [&] { return activation_from_string(act); });
    const bool uniform = r.has("width") || r.has("depth");
    if (uniform && r.has("hidden")) {
      throw ConfigError(r.at("hidden"), "give either width + depth or hidden, not both");
    }
    if (uniform) {
      std::size_t width = 0, depth = 0;
      r.get("width", width);
      r.get("depth", depth);
      if (depth == 0) throw ConfigError(r.at("depth"), "required and >= 1");
      if (width == 0) throw ConfigError(r.at("width"), "required and >= 1");
      cfg.width = width;
      cfg.depth = depth;
      cfg.topology = Topology::uniform(inputs, width, depth, classes, a);
    } else {
      const ordered_json* h = r.raw("hidden");
      std::vector<std::size_t> dims{inputs};
      if (h != nullptr) {
        if (!h->is_array()) throw ConfigError(r.at("hidden"), "expected an array of widths");
        for (std::size_t i = 0; i < h->size(); ++i) {
          const auto& w = (*h)[i];
          if (!w.is_number_unsigned() || w.get<std::size_t>() == 0) {
            throw ConfigError(r.at("hidden") + "[" + std::to_string(i) + "]",
                              "expected a positive integer");
          }
          dims.push_back(w.get<std::size_t>());
        }
      }
      dims.push_back(classes);
      cfg.topology = Topology{dims, a};
    }
    r.finish();
    field_guard("topology", [&] { cfg.topology.validate(); });
  }

  std::string trainer = "dfa";
  top.get("trainer", trainer);
  cfg.trainer = field_guard("trainer", [&] { return trainer_kind_from_string(trainer); });

  if (const ordered_json* h = top.raw("hyper")) {
    Reader r(*h, "hyper");
    r.get("learning_rate", cfg.hyper.learning_rate);
    r.get("batch_size", cfg.hyper.batch_size);
    r.get("epochs", cfg.hyper.epochs);
    r.get("requantize_bp_error", cfg.hyper.requantize_bp_error);
    if (const ordered_json* p = r.raw("precision")) {
      Reader pr(*p, r.at("precision"));
      cfg.hyper.precisions.weight = read_precision(pr, "weight");
      cfg.hyper.precisions.activation = read_precision(pr, "activation");
      cfg.hyper.precisions.error = read_precision(pr, "error");
      cfg.hyper.precisions.gradient = read_precision(pr, "gradient");
      pr.finish();
    }
    r.finish();
  }
  field_guard("hyper", [&] { cfg.hyper.validate(); });

  if (const ordered_json* b = top.raw("backend")) {
    Reader r(*b, "backend");
    std::string kind = "digital";
    r.get("kind", kind);
    if (kind == "digital") {
      cfg.backend = BackendKind::digital;
    } else if (kind == "analog") {
      cfg.backend = BackendKind::analog;
    } else {
      throw ConfigError(r.at("kind"), "expected digital or analog");
    }
    if (const ordered_json* c = r.raw("crossbar")) {
      Reader cr(*c, r.at("crossbar"));
      CrossbarConfig& x = cfg.crossbar;
      std::string range = to_string(x.adc_range);
      cr.get("subarray_rows", x.subarray_rows);
      cr.get("subarray_cols", x.subarray_cols);
      cr.get("adc_bits", x.adc_bits);
      cr.get("adc_range", range);
      cr.get("adc_column_mux", x.adc_column_mux);
      cr.get("g_min", x.g_min);
      cr.get("g_max", x.g_max);
      cr.get("weight_bits", x.weight_bits);
      cr.get("weight_headroom", x.weight_headroom);
      cr.get("d2d_sigma", x.d2d_sigma);
      cr.get("c2c_sigma", x.c2c_sigma);
      cr.get("wire_r", x.wire_r);
      cr.finish();
      x.adc_range = field_guard(cr.at("adc_range"), [&] { return adc_range_from_string(range); });
      field_guard(r.at("crossbar"), [&] { x.validate(); });
    }
    r.finish();
  }

  if (const ordered_json* c = top.raw("cost")) {
    Reader r(*c, "cost");
    r.get("profile", cfg.cost_profile);
    r.get("tile_dim", cfg.tile_dim);
    r.finish();
    if (cfg.tile_dim == 0) throw ConfigError("cost.tile_dim", "must be >= 1");
    if (cfg.cost_profile.empty()) throw ConfigError("cost.profile", "must not be empty");
  }

  if (const ordered_json* d = top.raw("dataset")) {
    Reader r(*d, "dataset");
    std::string kind = "idx";
    r.get("kind", kind);
    if (kind == "idx") {
      cfg.dataset.kind = DatasetSpec::Kind::idx;
    } else if (kind == "synthetic") {
      cfg.dataset.kind = DatasetSpec::Kind::synthetic;
    } else {
      throw ConfigError(r.at("kind"), "expected idx or synthetic");
    }
    r.get("root", cfg.dataset.root);
    r.get("train_limit", cfg.dataset.train_limit);
    r.get("test_limit", cfg.dataset.test_limit);
    if (const ordered_json* s = r.raw("synthetic")) {
      Reader sr(*s, r.at("synthetic"));
      SyntheticSpec& sp = cfg.dataset.synthetic;
      sr.get("classes", sp.classes);
      sr.get("features", sp.features);
      sr.get("samples_per_class", sp.samples_per_class);
      sr.get("test_samples_per_class", cfg.dataset.synthetic_test_per_class);
      sr.get("cluster_std", sp.cluster_std);
      std::size_t seed = sp.seed;
      sr.get("seed", seed);
      sp.seed = seed;
      sr.finish();
      field_guard(r.at("synthetic"), [&] { sp.validate(); });
    }
    r.finish();
  }

  if (const ordered_json* s = top.raw("seeds")) {
    if (!s->is_array()) throw ConfigError("seeds", "expected an array of integers");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < s->size(); ++i) {
      if (!(*s)[i].is_number_unsigned()) {
        throw ConfigError("seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
      }
      cfg.seeds.push_back((*s)[i].get<std::uint64_t>());
    }
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds", "must list at least one seed");

  if (const ordered_json* s = top.raw("sweep")) {
    if (!s->is_array()) throw ConfigError("sweep", "expected an array of axes");
    for (std::size_t i = 0; i < s->size(); ++i) {
      const std::string at = "sweep[" + std::to_string(i) + "]";
      Reader r((*s)[i], at);
      SweepAxis axis;
      r.get("parameter", axis.parameter);
      if (const ordered_json* linked = r.raw("linked")) {
        if (!linked->is_array()) throw ConfigError(r.at("linked"), "expected an array of strings");
        for (std::size_t k = 0; k < linked->size(); ++k) {
          if (!(*linked)[k].is_string()) {
            throw ConfigError(r.at("linked") + "[" + std::to_string(k) + "]", "expected a string");
          }
          axis.linked.push_back((*linked)[k].get<std::string>());
        }
      }
      const ordered_json* values = r.raw("values");
      r.finish();
      if (axis.parameter.empty()) throw ConfigError(r.at("parameter"), "required");
      if (values == nullptr || !values->is_array() || values->empty()) {
        throw ConfigError(r.at("values"), "expected a non-empty array");
      }
      for (const auto& v : *values) axis.values.push_back(v.dump());
      cfg.sweep.push_back(std::move(axis));
    }
  }

  top.get("output_dir", cfg.output_dir);
  top.get("workers", cfg.workers);
  top.get("cost_only", cfg.cost_only);
  top.get("record_wall_time", cfg.record_wall_time);
  if (cfg.workers == 0) throw ConfigError("workers", "must be >= 1");
  top.finish();
  return cfg;
}

ordered_json to_json(const ExperimentConfig& cfg, bool with_sweep = true) {
  ordered_json j;
  j["name"] = cfg.name;
  ordered_json t;
  t["inputs"] = cfg.topology.inputs();
  t["classes"] = cfg.topology.classes();
  if (cfg.width && cfg.depth) {
    t["width"] = *cfg.width;
    t["depth"] = *cfg.depth;
  } else {
    ordered_json hidden = ordered_json::array();
    for (std::size_t i = 1; i + 1 < cfg.topology.dims.size(); ++i) {
      hidden.push_back(cfg.topology.dims[i]);
    }
    t["hidden"] = hidden;
  }
  t["activation"] = to_string(cfg.topology.activation);
  j["topology"] = t;
  j["trainer"] = to_string(cfg.trainer);
  const HyperParams& h = cfg.hyper;
  j["hyper"] = {{"learning_rate", h.learning_rate},
                {"batch_size", h.batch_size},
                {"epochs", h.epochs},
                {"requantize_bp_error", h.requantize_bp_error},
                {"precision",
                 {{"weight", precision_json(h.precisions.weight)},
                  {"activation", precision_json(h.precisions.activation)},
                  {"error", precision_json(h.precisions.error)},
                  {"gradient", precision_json(h.precisions.gradient)}}}};
  const CrossbarConfig& x = cfg.crossbar;
  j["backend"] = {{"kind", to_string(cfg.backend)},
                  {"crossbar",
                   {{"subarray_rows", x.subarray_rows},
                    {"subarray_cols", x.subarray_cols},
                    {"adc_bits", x.adc_bits},
                    {"adc_range", to_string(x.adc_range)},
                    {"adc_column_mux", x.adc_column_mux},
                    {"g_min", x.g_min},
                    {"g_max", x.g_max},
                    {"weight_bits", x.weight_bits},
                    {"weight_headroom", x.weight_headroom},
                    {"d2d_sigma", x.d2d_sigma},
                    {"c2c_sigma", x.c2c_sigma},
                    {"wire_r", x.wire_r}}}};
  j["cost"] = {{"profile", cfg.cost_profile}, {"tile_dim", cfg.tile_dim}};
  const DatasetSpec& d = cfg.dataset;
  j["dataset"] = {{"kind", d.kind == DatasetSpec::Kind::idx ? "idx" : "synthetic"},
                  {"root", d.root},
                  {"train_limit", d.train_limit},
                  {"test_limit", d.test_limit},
                  {"synthetic",
                   {{"classes", d.synthetic.classes},
                    {"features", d.synthetic.features},
                    {"samples_per_class", d.synthetic.samples_per_class},
                    {"test_samples_per_class", d.synthetic_test_per_class},
                    {"cluster_std", d.synthetic.cluster_std},
                    {"seed", d.synthetic.seed}}}};
  if (with_sweep) {
    ordered_json axes = ordered_json::array();
    for (const auto& a : cfg.sweep) {
      ordered_json values = ordered_json::array();
      for (const auto& v : a.values) values.push_back(ordered_json::parse(v));
      ordered_json axis = {{"parameter", a.parameter}};
      if (!a.linked.empty()) axis["linked"] = a.linked;
      axis["values"] = values;
      axes.push_back(axis);
    }
    j["sweep"] = axes;
  } else {
    j["sweep"] = ordered_json::array();
  }
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  j["cost_only"] = cfg.cost_only;
  j["record_wall_time"] = cfg.record_wall_time;
  return j;
}

std::vector<std::string> split_path(const std::string& dotted) {
  std::vector<std::string> parts;
  std::stringstream ss(dotted);
  std::string p;
  while (std::getline(ss, p, '.')) parts.push_back(p);
  return parts;
}

ordered_json* find_path(ordered_json& j, const std::string& dotted) {
  ordered_json* cur = &j;
  for (const auto& p : split_path(dotted)) {
    if (!cur->is_object()) return nullptr;
    auto it = cur->find(p);
    if (it == cur->end()) return nullptr;
    cur = &*it;
  }
  return cur;
}

// Copy of `cfg` with every parameter of `axis` set to `value_json`.
ExperimentConfig apply_axis(const ExperimentConfig& cfg, const SweepAxis& axis,
                            const std::string& value_json) {
  ExperimentConfig c = with_parameter(cfg, axis.parameter, value_json);
  for (const auto& p : axis.linked) c = with_parameter(c, p, value_json);
  return c;
}

void check_sweep(const ExperimentConfig& cfg) {
  std::set<std::string> seen;
  const ordered_json base = to_json(cfg, false);
  for (std::size_t i = 0; i < cfg.sweep.size(); ++i) {
    const auto& axis = cfg.sweep[i];
    std::vector<std::pair<std::string, std::string>> params{
        {"sweep[" + std::to_string(i) + "].parameter", axis.parameter}};
    for (std::size_t k = 0; k < axis.linked.size(); ++k) {
      params.emplace_back("sweep[" + std::to_string(i) + "].linked[" + std::to_string(k) + "]",
                          axis.linked[k]);
    }
    for (const auto& [at, p] : params) {
      if (p == "sweep" || p.rfind("sweep.", 0) == 0 || p == "seeds" || p == "output_dir" ||
          p == "workers") {
        throw ConfigError(at, "'" + p + "' cannot be swept");
      }
      if (!seen.insert(p).second) throw ConfigError(at, "'" + p + "' is swept twice");
      ordered_json copy = base;
      const ordered_json* target = find_path(copy, p);
      if (target == nullptr || target->is_object()) {
        throw ConfigError(at, "unknown parameter '" + p + "'");
      }
    }
    for (std::size_t k = 0; k < axis.values.size(); ++k) {
      try {
        apply_axis(cfg, axis, axis.values[k]);
      } catch (const ConfigError& e) {
        throw ConfigError("sweep[" + std::to_string(i) + "].values[" + std::to_string(k) + "]",
                          e.what());
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config entry points

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Translate the byte offset into a line number.
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw ConfigError("", origin + ":" + std::to_string(line) + ": invalid JSON: " + e.what());
  }
  // A run manifest embeds the configuration it was produced from.
  if (doc.is_object() && doc.contains("manifest_version") && doc.contains("config")) {
    ordered_json inner = doc["config"];
    return parse_config(inner.dump(), origin + "#config");
  }
  ExperimentConfig cfg = from_json(doc);
  check_sweep(cfg);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

fs::path preset_dir() {
  if (const char* env = std::getenv("CIMTRAIN_PRESET_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return fs::path(CIMTRAIN_SOURCE_DIR) / "presets";
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(preset_dir(), ec)) {
    if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

ExperimentConfig load_preset(const std::string& name) {
  const fs::path p = preset_dir() / (name + ".json");
  if (!fs::exists(p)) {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("preset", "unknown preset '" + name + "' (available: " + known + ")");
  }
  return load_config(p);
}

std::string resolved_config_json(const ExperimentConfig& cfg) {
  return to_json(cfg).dump(2) + "\n";
}

ExperimentConfig with_parameter(const ExperimentConfig& cfg, const std::string& parameter,
                                const std::string& value_json) {
  ordered_json doc = to_json(cfg, false);
  ordered_json* target = find_path(doc, parameter);
  if (target == nullptr || target->is_object()) {
    throw ConfigError(parameter, "unknown parameter '" + parameter + "'");
  }
  *target = ordered_json::parse(value_json);
  ExperimentConfig out = from_json(doc);
  out.sweep = {};
  return out;
}

UnitCosts resolve_unit_costs(const ExperimentConfig& cfg) {
  if (cfg.cost_profile == "default") return UnitCosts{};
  fs::path p = cfg.cost_profile;
  if (!fs::exists(p))
    p = fs::path(CIMTRAIN_SOURCE_DIR) / "profiles" / (cfg.cost_profile + ".profile");
  if (!fs::exists(p)) {
    throw ConfigError("cost.profile", "no profile file '" + cfg.cost_profile + "'");
  }
  return load_unit_costs(p);
}

fs::path resolve_data_root(const DatasetSpec& spec) {
  if (!spec.root.empty()) return spec.root;
  if (const char* env = std::getenv("CIMTRAIN_DATA_ROOT"); env != nullptr && *env != '\0') {
    return env;
  }
  return fs::path(CIMTRAIN_SOURCE_DIR) / "data" / "mnist5k";
}

namespace {

struct IdxFiles {
  fs::path train_images, train_labels, test_images, test_labels;
};

IdxFiles idx_files(const DatasetSpec& spec) {
  const fs::path root = resolve_data_root(spec);
  return {root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte",
          root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte"};
}

}  // namespace

LoadedData load_data(const DatasetSpec& spec) {
  LoadedData out;
  if (spec.kind == DatasetSpec::Kind::synthetic) {
    SyntheticSpec all = spec.synthetic;
    all.samples_per_class += spec.synthetic_test_per_class;
    Dataset both = synthetic(all, "train");
    const std::size_t n_train = spec.synthetic.classes * spec.synthetic.samples_per_class;
    std::vector<std::size_t> tr(n_train), te(both.size() - n_train);
    for (std::size_t i = 0; i < tr.size(); ++i) tr[i] = i;
    for (std::size_t i = 0; i < te.size(); ++i) te[i] = n_train + i;
    auto take = [&](const std::vector<std::size_t>& idx, const std::string& split) {
      Dataset d;
      d.classes = both.classes;
      d.split = split;
      d.images = both.gather(idx);
      for (auto i : idx) d.labels.push_back(both.labels[i]);
      return d;
    };
    out.train = take(tr, "train");
    out.test = take(te, "test");
  } else {
    const IdxFiles f = idx_files(spec);
    out.train = load_idx(f.train_images, f.train_labels, 10, "train");
    out.test = load_idx(f.test_images, f.test_labels, 10, "test");
    out.files = {f.train_images, f.train_labels, f.test_images, f.test_labels};
  }
  out.train = out.train.head(spec.train_limit);
  out.test = out.test.head(spec.test_limit);
  return out;
}

std::size_t train_samples(const ExperimentConfig& cfg) {
  const DatasetSpec& spec = cfg.dataset;
  std::size_t n = 0;
  if (spec.kind == DatasetSpec::Kind::synthetic) {
    n = spec.synthetic.classes * spec.synthetic.samples_per_class;
  } else {
    const fs::path labels = idx_files(spec).train_labels;
    std::ifstream in(labels, std::ios::binary);
    unsigned char header[8] = {};
    if (!in.read(reinterpret_cast<char*>(header), 8)) {
      throw DataError(DataError::Code::io, "cannot read " + labels.string());
    }
    n = (std::size_t{header[4]} << 24) | (std::size_t{header[5]} << 16) |
        (std::size_t{header[6]} << 8) | header[7];
  }
  if (spec.train_limit > 0) n = std::min(n, spec.train_limit);
  return n;
}

Workload workload_for(const ExperimentConfig& cfg, std::size_t samples) {
  Workload wl;
  wl.samples = samples;
  wl.batch_size = cfg.hyper.batch_size;
  wl.epochs = cfg.hyper.epochs;
  const Precisions& p = cfg.hyper.precisions;
  if (p.activation) wl.activation_bits = p.activation->bits;
  if (p.error) wl.error_bits = p.error->bits;
  if (p.gradient) wl.gradient_bits = p.gradient->bits;
  return wl;
}

// ---------------------------------------------------------------------------
// Hashing and artifacts

std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
    throw std::runtime_error("sha1 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

std::string cost_csv(const CostReport& r) {
  std::ostringstream ss;
  write_cost_csv(ss, r);
  return ss.str();
}

std::string manifest_json(const ExperimentConfig& cfg, std::uint64_t seed,
                          const std::vector<fs::path>& inputs, const fs::path& dir,
                          const std::vector<std::string>& outputs, bool diverged) {
  ExperimentConfig single = cfg;
  single.seeds = {seed};
  single.sweep = {};
  single.workers = 1;  // scheduling does not change results
  ordered_json m;
  m["manifest_version"] = 1;
  m["tool"] = "cimtrain";
  m["seed"] = seed;
  if (cfg.trainer == TrainerKind::bp && cfg.backend == BackendKind::analog) {
    m["note"] = "bp on the analog backend is an extension";
  }
  m["diverged"] = diverged;
  const std::string config_text = to_json(single).dump(2);
  m["config_sha1"] = git_blob_sha1(config_text);
  ordered_json in = ordered_json::object();
  for (const auto& p : inputs) in[p.filename().string()] = git_blob_sha1_file(p);
  if (cfg.cost_profile != "default") {
    in["cost_profile"] = git_blob_sha1(cost_profile_text(cfg));
  }
  m["inputs"] = in;
  ordered_json out = ordered_json::object();
  for (const auto& name : outputs) out[name] = git_blob_sha1_file(dir / name);
  m["outputs"] = out;
  m["config"] = to_json(single);
  return m.dump(2) + "\n";
}

}  // namespace

std::string git_blob_sha1_file(const fs::path& path) { return git_blob_sha1(read_file(path)); }

std::string cost_profile_text(const ExperimentConfig& cfg) {
  std::ostringstream ss;
  write_unit_costs(ss, resolve_unit_costs(cfg));
  return ss.str();
}

// ---------------------------------------------------------------------------
// Runs

namespace {

CostReport cost_for(const ExperimentConfig& cfg, std::size_t samples) {
  const Floorplan fp = build_floorplan(cfg.topology, cfg.trainer, cfg.crossbar, cfg.tile_dim);
  return estimate_cost(fp, resolve_unit_costs(cfg), workload_for(cfg, samples));
}

RunResult run_with_data(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out_dir,
                        const LoadedData& data) {
  if (data.train.features() != cfg.topology.inputs()) {
    throw ConfigError("topology.inputs",
                      "network expects " + std::to_string(cfg.topology.inputs()) +
                          " inputs, dataset has " + std::to_string(data.train.features()));
  }
  if (data.train.classes != cfg.topology.classes()) {
    throw ConfigError("topology.classes", "network has " + std::to_string(cfg.topology.classes()) +
                                              " classes, dataset has " +
                                              std::to_string(data.train.classes));
  }
  fs::create_directories(out_dir);

  Rng init = stream_rng(seed, Stream::init);
  Mlp mlp = xavier_init(cfg.topology, init);
  Rng fb_rng = stream_rng(seed, Stream::feedback);
  const FeedbackBank bank = cfg.topology.depth() > 1
                                ? FeedbackBank::create(cfg.topology, fb_rng)
                                : FeedbackBank::from_master(cfg.topology, Mat{});
  std::unique_ptr<Backend> backend;
  if (cfg.backend == BackendKind::analog) {
    backend =
        std::make_unique<AnalogBackend>(cfg.crossbar, stream_rng(seed, Stream::device).next_u64());
  } else {
    backend = std::make_unique<DigitalBackend>();
  }
  HyperParams hp = cfg.hyper;
  hp.seed = seed;
  TrainOptions opts;
  opts.record_wall_time = cfg.record_wall_time;

  RunResult result;
  result.seed = seed;
  result.dir = out_dir;
  result.history = train(mlp, data.train, data.test, hp, cfg.trainer, *backend, bank, opts);
  result.cost = cost_for(cfg, data.train.size());

  std::ostringstream hist;
  write_history_csv(hist, result.history);
  write_file(out_dir / "history.csv", hist.str());
  write_file(out_dir / "cost.json", cost_report_json(result.cost));
  write_file(out_dir / "cost.csv", cost_csv(result.cost));
  save_checkpoint(out_dir / "model.bin", mlp, bank.master());
  write_file(out_dir / "manifest.json",
             manifest_json(cfg, seed, data.files, out_dir,
                           {"history.csv", "cost.json", "cost.csv", "model.bin"},
                           result.history.diverged));
  return result;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out_dir) {
  return run_with_data(cfg, seed, out_dir, load_data(cfg.dataset));
}

CostReport cost_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const CostReport report = cost_for(cfg, train_samples(cfg));
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file(out_dir / "cost.json", cost_report_json(report));
    write_file(out_dir / "cost.csv", cost_csv(report));
    write_file(out_dir / "manifest.json", manifest_json(cfg, cfg.seeds.front(), {}, out_dir,
                                                        {"cost.json", "cost.csv"}, false));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-';
    out += ok ? c : '_';
  }
  return out;
}

std::string last_component(const std::string& dotted) {
  const auto dot = dotted.rfind('.');
  return dot == std::string::npos ? dotted : dotted.substr(dot + 1);
}

ExperimentConfig point_config(const ExperimentConfig& cfg, const SweepPoint& p) {
  ExperimentConfig c = cfg;
  c.sweep = {};
  for (std::size_t a = 0; a < cfg.sweep.size(); ++a) {
    c = apply_axis(c, cfg.sweep[a], p.values[a]);
  }
  c.seeds = {p.seed};
  return c;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

// Sweep values are JSON texts; strings print without their quotes.
std::string plain_value(const std::string& json_text) {
  const ordered_json v = ordered_json::parse(json_text);
  return v.is_string() ? v.get<std::string>() : json_text;
}

std::string value_cell(const std::string& json_text) { return csv_cell(plain_value(json_text)); }

std::string num(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

}  // namespace

std::vector<SweepPoint> sweep_grid(const ExperimentConfig& cfg) {
  std::vector<std::vector<std::string>> combos{{}};
  for (const auto& axis : cfg.sweep) {
    std::vector<std::vector<std::string>> next;
    for (const auto& c : combos) {
      for (const auto& v : axis.values) {
        auto e = c;
        e.push_back(v);
        next.push_back(std::move(e));
      }
    }
    combos = std::move(next);
  }
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < combos.size(); ++i) {
    std::ostringstream label;
    label << std::setw(3) << std::setfill('0') << i;
    for (std::size_t a = 0; a < cfg.sweep.size(); ++a) {
      label << '_' << last_component(cfg.sweep[a].parameter) << '='
            << sanitize(plain_value(combos[i][a]));
    }
    for (auto seed : cfg.seeds) {
      points.push_back({combos[i], seed, label.str() + "/seed=" + std::to_string(seed)});
    }
  }
  return points;
}

void run_sweep(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const std::vector<SweepPoint> points = sweep_grid(cfg);
  fs::create_directories(out_dir);

  ordered_json index;
  index["axes"] = ordered_json::array();
  for (const auto& a : cfg.sweep) index["axes"].push_back(a.parameter);
  index["cost_only"] = cfg.cost_only;
  index["points"] = ordered_json::array();
  for (const auto& p : points) {
    ordered_json values = ordered_json::array();
    for (const auto& v : p.values) values.push_back(ordered_json::parse(v));
    index["points"].push_back({{"values", values}, {"seed", p.seed}, {"dir", p.dir}});
  }
  write_file(out_dir / "sweep.json", index.dump(2) + "\n");
  write_file(out_dir / "config.json", resolved_config_json(cfg));

  // Datasets are shared read-only between workers, keyed by their spec.
  std::mutex data_mutex;
  std::map<std::string, std::shared_ptr<const LoadedData>> data_cache;
  auto data_for = [&](const ExperimentConfig& c) {
    const std::string key = to_json(c)["dataset"].dump();
    std::lock_guard<std::mutex> lock(data_mutex);
    auto it = data_cache.find(key);
    if (it == data_cache.end()) {
      it = data_cache.emplace(key, std::make_shared<const LoadedData>(load_data(c.dataset))).first;
    }
    return it->second;
  };

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(points.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        const ExperimentConfig c = point_config(cfg, points[i]);
        const fs::path dir = out_dir / points[i].dir;
        if (cfg.cost_only) {
          cost_experiment(c, dir);
        } else {
          run_with_data(c, points[i].seed, dir, *data_for(c));
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(cfg.workers, points.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  merge_sweep(out_dir);
}

void merge_sweep(const fs::path& out_dir) {
  const ordered_json index = ordered_json::parse(read_file(out_dir / "sweep.json"));
  std::vector<std::string> axes;
  for (const auto& a : index["axes"]) axes.push_back(a.get<std::string>());
  const bool cost_only = index["cost_only"].get<bool>();

  struct Row {
    std::vector<std::string> values;
    std::uint64_t seed = 0;
    double final_test = NAN, best_test = NAN, final_loss = NAN, final_train = NAN;
    std::size_t epochs = 0;
    bool diverged = false;
    double area = 0, energy = 0, latency = 0, backward = 0, utilization = 0;
    std::size_t tiles = 0;
  };
  std::vector<Row> rows;
  for (const auto& p : index["points"]) {
    Row r;
    for (const auto& v : p["values"]) r.values.push_back(v.dump());
    r.seed = p["seed"].get<std::uint64_t>();
    const fs::path dir = out_dir / p["dir"].get<std::string>();
    const ordered_json cost = ordered_json::parse(read_file(dir / "cost.json"));
    r.area = cost["area_um2"]["total"].get<double>();
    r.energy = cost["energy_pJ"]["total"].get<double>();
    r.latency = cost["latency_ns"]["total"].get<double>();
    r.backward = cost["latency_ns"]["backward_phase"].get<double>();
    r.tiles = cost["floorplan"]["tiles"].get<std::size_t>();
    r.utilization = cost["utilization"].get<double>();
    if (!cost_only) {
      std::istringstream hs(read_file(dir / "history.csv"));
      const History h = read_history_csv(hs);
      const auto test = h.test_accuracy();
      const auto train = h.train_accuracy();
      if (!test.empty()) {
        r.final_test = test.back();
        r.best_test = *std::max_element(test.begin(), test.end());
        r.epochs = test.size() - 1;
      }
      if (!train.empty()) r.final_train = train.back();
      for (const auto& row : h.rows) {
        if (row.split == "test") r.final_loss = row.loss;
      }
      const ordered_json m = ordered_json::parse(read_file(dir / "manifest.json"));
      r.diverged = m["diverged"].get<bool>();
    }
    rows.push_back(std::move(r));
  }

  std::ostringstream merged;
  for (const auto& a : axes) merged << csv_cell(a) << ',';
  merged << "seed,final_test_accuracy,best_test_accuracy,final_test_loss,final_train_accuracy,"
            "epochs,diverged,area_um2,energy_pJ,latency_ns,backward_latency_ns,tiles,utilization\n";
  for (const auto& r : rows) {
    for (const auto& v : r.values) merged << value_cell(v) << ',';
    merged << r.seed << ',' << num(r.final_test) << ',' << num(r.best_test) << ','
           << num(r.final_loss) << ',' << num(r.final_train) << ',' << r.epochs << ','
           << (r.diverged ? 1 : 0) << ',' << num(r.area) << ',' << num(r.energy) << ','
           << num(r.latency) << ',' << num(r.backward) << ',' << r.tiles << ','
           << num(r.utilization) << '\n';
  }
  write_file(out_dir / "merged.csv", merged.str());

  // Mean and sample standard deviation across seeds, per grid point.
  std::vector<std::vector<std::string>> keys;
  std::map<std::vector<std::string>, std::vector<const Row*>> groups;
  for (const auto& r : rows) {
    if (!groups.count(r.values)) keys.push_back(r.values);
    groups[r.values].push_back(&r);
  }
  auto stats = [](const std::vector<const Row*>& g, double Row::* m) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const Row* r : g) {
      if (!std::isnan(r->*m)) {
        sum += r->*m;
        ++n;
      }
    }
    if (n == 0) return std::pair<double, double>{NAN, NAN};
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const Row* r : g) {
      if (!std::isnan(r->*m)) ss += (r->*m - mean) * (r->*m - mean);
    }
    return std::pair<double, double>{mean,
                                     n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0};
  };
  std::ostringstream summary;
  for (const auto& a : axes) summary << csv_cell(a) << ',';
  summary << "seeds,final_test_accuracy_mean,final_test_accuracy_std,best_test_accuracy_mean,"
             "best_test_accuracy_std,area_um2,energy_pJ,latency_ns,backward_latency_ns\n";
  for (const auto& k : keys) {
    const auto& g = groups[k];
    for (const auto& v : k) summary << value_cell(v) << ',';
    const auto ft = stats(g, &Row::final_test);
    const auto bt = stats(g, &Row::best_test);
    summary << g.size() << ',' << num(ft.first) << ',' << num(ft.second) << ',' << num(bt.first)
            << ',' << num(bt.second) << ',' << num(stats(g, &Row::area).first) << ','
            << num(stats(g, &Row::energy).first) << ',' << num(stats(g, &Row::latency).first) << ','
            << num(stats(g, &Row::backward).first) << '\n';
  }
  write_file(out_dir / "summary.csv", summary.str());
}

// ---------------------------------------------------------------------------

std::string describe(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << resolved_config_json(cfg);
  const Floorplan fp = build_floorplan(cfg.topology, cfg.trainer, cfg.crossbar, cfg.tile_dim);
  const AreaBreakdown area = estimate_area(fp, resolve_unit_costs(cfg));
  out << "\nfloorplan (" << to_string(cfg.trainer) << ", tile " << fp.tile_dim << "x" << fp.tile_dim
      << ")\n";
  out << "  layer  shape          subarrays  tiles  adcs   transposable\n";
  for (std::size_t l = 0; l < fp.layers.size(); ++l) {
    const auto& p = fp.layers[l];
    std::ostringstream shape, grid;
    shape << p.rows << "x" << p.cols;
    grid << p.grid_rows << "x" << p.grid_cols;
    out << "  " << std::left << std::setw(7) << l << std::setw(15) << shape.str() << std::setw(11)
        << grid.str() << std::setw(7) << p.tiles() << std::setw(7) << p.adc_count
        << (p.transposable ? "yes" : "no") << '\n';
  }
  out << std::right;
  out << "  tiles " << fp.tiles() << ", utilization " << std::fixed << std::setprecision(4)
      << fp.utilization() << ", WGUs " << fp.wgu_count << " x " << fp.wgu_capacity << " elements\n";
  if (fp.feedback.subarrays > 0) {
    out << "  feedback master " << fp.feedback.rows << "x" << fp.feedback.cols << " on "
        << fp.feedback.subarrays << " subarrays (" << fp.feedback.logical_cells
        << " logical cells)\n";
  }
  out << std::setprecision(1) << "  area " << area.total() << " um^2\n";
  if (cfg.trainer == TrainerKind::bp && cfg.backend == BackendKind::analog) {
    out << "  note: bp on the analog backend is an extension\n";
  }
  return out.str();
}

}  // namespace cimtrain
