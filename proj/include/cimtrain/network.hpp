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

#ifndef CIMTRAIN_NETWORK_HPP_
#define CIMTRAIN_NETWORK_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cimtrain/backend.hpp"
#include "cimtrain/mat.hpp"
#include "cimtrain/quantizer.hpp"
#include "cimtrain/rng.hpp"

namespace cimtrain {

/// `identity` is not used by the presets; it makes the linear-network
/// identities of the learning rules directly testable.
enum class Activation { relu, tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Layer widths [d_0 (input), hidden..., d_N (classes)]; depth N = number of
/// weight layers.
struct Topology {
  std::vector<std::size_t> dims;
  Activation activation = Activation::relu;

  std::size_t depth() const { return dims.empty() ? 0 : dims.size() - 1; }
  std::size_t inputs() const { return dims.front(); }
  std::size_t classes() const { return dims.back(); }
  /// Widest hidden layer, 0 when depth == 1.
  std::size_t max_hidden() const;
  void validate() const;

  /// `depth` weight layers, every hidden layer `width` wide.
  static Topology uniform(std::size_t inputs, std::size_t width, std::size_t depth,
                          std::size_t classes, Activation act = Activation::relu);

  friend bool operator==(const Topology&, const Topology&) = default;
};

/// Bias-free fully connected network: weights[l] has shape dims[l+1] x dims[l].
struct Mlp {
  Topology topology;
  std::vector<Mat> weights;

  std::size_t depth() const { return weights.size(); }
};

/// Pre-activations a_1..a_N (pre[l] for weight layer l) and activations
/// h_0..h_{N-1} (post[l] is the input to weight layer l).
struct ForwardTrace {
  std::vector<Mat> pre;
  std::vector<Mat> post;

  const Mat& logits() const { return pre.back(); }
  std::size_t batch() const { return post.empty() ? 0 : post.front().cols(); }
};

double activate(Activation a, double x);
/// Derivative with respect to the pre-activation; relu'(0) == 0.
double activate_derivative(Activation a, double x);
Mat activate(Activation a, const Mat& x);
Mat activate_derivative(Activation a, const Mat& x);

/// W_l ~ Uniform(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))).
Mlp xavier_init(const Topology& topology, Rng& rng);
double xavier_bound(std::size_t fan_in, std::size_t fan_out);

/// Forward pass through `backend`. When `activation_quantizer` is set, every
/// hidden activation h_l (l >= 1) is quantized after the nonlinearity.
ForwardTrace forward(const Mlp& mlp, const Mat& input, Backend& backend,
                     const Quantizer* activation_quantizer = nullptr);

/// Arg-max of the logits per batch column; ties resolve to the lowest index.
std::vector<std::size_t> predict(const ForwardTrace& trace);
std::vector<std::size_t> argmax_columns(const Mat& logits);

// Checkpoint container: "CIMTRAIN1", then little-endian fields
//   u64 depth, u64 dims[depth + 1], u8 activation,
//   u64 rows, u64 cols, f64 data[rows * cols]  for each weight layer,
//   u64 rows, u64 cols, f64 data[rows * cols]  for the feedback master.
inline constexpr char kCheckpointMagic[] = "CIMTRAIN1";

void save_checkpoint(const std::filesystem::path& path, const Mlp& mlp, const Mat& feedback_master);
struct Checkpoint {
  Mlp mlp;
  Mat feedback_master;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cimtrain

#endif  // CIMTRAIN_NETWORK_HPP_
