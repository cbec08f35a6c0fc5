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

#include "cimtrain/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cimtrain {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
  }
  return "relu";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw ContractViolation("unknown activation '" + s + "'");
}

std::size_t Topology::max_hidden() const {
  std::size_t m = 0;
  for (std::size_t l = 1; l + 1 < dims.size(); ++l) m = std::max(m, dims[l]);
  return m;
}

void Topology::validate() const {
  if (dims.size() < 2) throw ContractViolation("Topology: need at least one weight layer");
  for (std::size_t d : dims) {
    if (d < 1) throw ContractViolation("Topology: layer widths must be >= 1");
  }
}

Topology Topology::uniform(std::size_t inputs, std::size_t width, std::size_t depth,
                           std::size_t classes, Activation act) {
  Topology t;
  t.activation = act;
  t.dims.push_back(inputs);
  for (std::size_t l = 1; l < depth; ++l) t.dims.push_back(width);
  t.dims.push_back(classes);
  t.validate();
  return t;
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::tanh:
      return std::tanh(x);
    case Activation::identity:
      return x;
  }
  return x;
}

double activate_derivative(Activation a, double x) {
  switch (a) {
    case Activation::relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::identity:
      return 1.0;
  }
  return 1.0;
}

Mat activate(Activation a, const Mat& x) {
  Mat out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = activate(a, x.data()[i]);
  return out;
}

Mat activate_derivative(Activation a, const Mat& x) {
  Mat out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.data()[i] = activate_derivative(a, x.data()[i]);
  }
  return out;
}

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Mlp xavier_init(const Topology& topology, Rng& rng) {
  topology.validate();
  Mlp mlp{topology, {}};
  for (std::size_t l = 0; l < topology.depth(); ++l) {
    const std::size_t fan_in = topology.dims[l];
    const std::size_t fan_out = topology.dims[l + 1];
    const double bound = xavier_bound(fan_in, fan_out);
    Mat w(fan_out, fan_in);
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    mlp.weights.push_back(std::move(w));
  }
  return mlp;
}

ForwardTrace forward(const Mlp& mlp, const Mat& input, Backend& backend,
                     const Quantizer* activation_quantizer) {
  if (input.rows() != mlp.topology.inputs()) {
    throw ContractViolation("forward: input has " + std::to_string(input.rows()) +
                            " rows, network expects " + std::to_string(mlp.topology.inputs()));
  }
  ForwardTrace trace;
  trace.post.push_back(input);
  const std::size_t n = mlp.depth();
  for (std::size_t l = 0; l < n; ++l) {
    trace.pre.push_back(backend.forward(l, mlp.weights[l], trace.post.back()));
    if (l + 1 < n) {
      Mat h = activate(mlp.topology.activation, trace.pre.back());
      if (activation_quantizer != nullptr) h = quantize(h, *activation_quantizer);
      trace.post.push_back(std::move(h));
    }
  }
  return trace;
}

std::vector<std::size_t> argmax_columns(const Mat& logits) {
  std::vector<std::size_t> out(logits.cols(), 0);
  for (std::size_t c = 0; c < logits.cols(); ++c) {
    double best = logits(0, c);
    for (std::size_t r = 1; r < logits.rows(); ++r) {
      if (logits(r, c) > best) {
        best = logits(r, c);
        out[c] = r;
      }
    }
  }
  return out;
}

std::vector<std::size_t> predict(const ForwardTrace& trace) {
  return argmax_columns(trace.logits());
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw std::runtime_error("checkpoint: truncated file");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void put_mat(std::ostream& out, const Mat& m) {
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (double v : m.values()) put_f64(out, v);
}

Mat get_mat(std::istream& in) {
  const std::uint64_t rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  if (rows > (1u << 24) || cols > (1u << 24)) throw std::runtime_error("checkpoint: bad shape");
  Mat m(rows, cols);
  for (double& v : m.values()) v = std::bit_cast<double>(get_u64(in));
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Mlp& mlp,
                     const Mat& feedback_master) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  put_u64(out, mlp.depth());
  for (std::size_t d : mlp.topology.dims) put_u64(out, d);
  const char act = static_cast<char>(mlp.topology.activation);
  out.write(&act, 1);
  for (const Mat& w : mlp.weights) put_mat(out, w);
  put_mat(out, feedback_master);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[sizeof(kCheckpointMagic) - 1];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  Checkpoint ck;
  const std::uint64_t depth = get_u64(in);
  if (depth == 0 || depth > 4096) throw std::runtime_error("checkpoint: bad depth");
  for (std::uint64_t i = 0; i <= depth; ++i) ck.mlp.topology.dims.push_back(get_u64(in));
  char act = 0;
  if (!in.read(&act, 1) || act < 0 || act > 2) {
    throw std::runtime_error("checkpoint: bad activation tag");
  }
  ck.mlp.topology.activation = static_cast<Activation>(act);
  for (std::uint64_t l = 0; l < depth; ++l) {
    Mat w = get_mat(in);
    if (w.rows() != ck.mlp.topology.dims[l + 1] || w.cols() != ck.mlp.topology.dims[l]) {
      throw std::runtime_error("checkpoint: layer " + std::to_string(l) + " shape mismatch");
    }
    ck.mlp.weights.push_back(std::move(w));
  }
  ck.feedback_master = get_mat(in);
  return ck;
}

}  // namespace cimtrain
