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

#ifndef CIMTRAIN_TRAINER_HPP_
#define CIMTRAIN_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cimtrain/backend.hpp"
#include "cimtrain/dataset.hpp"
#include "cimtrain/mat.hpp"
#include "cimtrain/network.hpp"
#include "cimtrain/quantizer.hpp"
#include "cimtrain/rng.hpp"

namespace cimtrain {

enum class TrainerKind { bp, dfa };

std::string to_string(TrainerKind k);
TrainerKind trainer_kind_from_string(const std::string& s);

/// Seed streams. Every random draw of a run comes from Rng::derive(seed, stream).
enum class Stream : std::uint64_t { init = 1, feedback = 2, data = 3, device = 4, quantize = 5 };
Rng stream_rng(std::uint64_t seed, Stream stream);

/// One fixed random matrix (max_hidden x classes); the feedback matrix of
/// hidden layer l is its top-left dims[l+1] x classes slice.
class FeedbackBank {
 public:
  FeedbackBank() = default;
  /// Entries ~ Uniform(-1/sqrt(C), +1/sqrt(C)).
  static FeedbackBank create(const Topology& topology, Rng& rng);
  static FeedbackBank from_master(const Topology& topology, Mat master);

  const Mat& master() const { return master_; }
  /// B for hidden layer l (0-based; l < depth - 1).
  MatView slice(std::size_t hidden_layer) const;
  /// 64-bit digest of the master's bytes.
  std::uint64_t fingerprint() const;

 private:
  Topology topology_;
  Mat master_;
};

struct Precisions {
  std::optional<Quantizer> weight;
  std::optional<Quantizer> activation;
  std::optional<Quantizer> error;
  std::optional<Quantizer> gradient;
};

struct HyperParams {
  double learning_rate = 0.02;
  std::size_t batch_size = 128;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  Precisions precisions;
  /// BP only: re-quantize every hidden delta with the error quantizer.
  bool requantize_bp_error = true;

  void validate() const;
};

Mat softmax(const Mat& logits);
/// Summed (not averaged) softmax cross-entropy over batch columns.
double cross_entropy(const Mat& logits, const Mat& targets);
/// e = softmax(logits) - targets, the gradient of cross_entropy w.r.t. logits.
Mat output_error(const Mat& logits, const Mat& targets);

/// Deltas for every weight layer; deltas[N-1] is the (possibly quantized)
/// output error. The transposed products go through backend.transposed in
/// strict reverse layer order.
std::vector<Mat> bp_backward(const ForwardTrace& trace, const Mlp& mlp, const Mat& e,
                             Backend& backend, const Quantizer* error_quantizer = nullptr,
                             bool requantize = true, Rng* rng = nullptr);

/// Deltas via fixed random feedback. The error quantizer is applied once, to
/// e, before it is projected to the hidden layers.
std::vector<Mat> dfa_backward(const ForwardTrace& trace, const FeedbackBank& bank, const Mat& e,
                              Backend& backend, Activation activation,
                              const Quantizer* error_quantizer = nullptr, Rng* rng = nullptr);

/// The single hidden-layer projection (B_l e) * f'(a_l). Each layer depends
/// only on e, so these may be evaluated in any order.
Mat dfa_hidden_delta(const ForwardTrace& trace, const FeedbackBank& bank, const Mat& e,
                     std::size_t hidden_layer, Backend& backend, Activation activation);

/// Batch-mean weight change -delta h^T / batch for one layer.
Mat weight_delta(const Mat& delta, const Mat& h_prev);

/// W_l <- Q_w(W_l + lr * Q_g(-delta_l h_{l-1}^T / batch)) through backend.write.
void apply_updates(Mlp& mlp, const std::vector<Mat>& deltas, const ForwardTrace& trace,
                   const HyperParams& hp, Backend& backend, Rng* rng = nullptr);

struct EpochRecord {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  double accuracy = 0.0;
  double wall_seconds = 0.0;
};

struct History {
  std::vector<EpochRecord> rows;
  bool diverged = false;
  std::size_t diverged_epoch = 0;

  /// Test-split accuracy per epoch, index 0 = before training.
  std::vector<double> test_accuracy() const;
  std::vector<double> train_accuracy() const;
};

void write_history_csv(std::ostream& out, const History& history);
History read_history_csv(std::istream& in);

struct TrainOptions {
  EventSink* sink = nullptr;
  /// Wall-clock seconds break byte-identical histories, so the column holds
  /// 0 unless this is set.
  bool record_wall_time = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct Evaluation {
  double loss = 0.0;  // mean per sample
  double accuracy = 0.0;
};

Evaluation evaluate(const Mlp& mlp, const Dataset& data, Backend& backend,
                    std::size_t batch_size = 256, const Quantizer* activation_quantizer = nullptr);

/// Epoch loop: shuffled mini-batches, one history row per split per epoch
/// (epoch 0 is the untrained network). Both splits are evaluated with the
/// weights at the end of the epoch. Backend events during training steps
/// go to options.sink; evaluation reads are not reported. Stops early, with
/// history.diverged set, on a non-finite loss or weight.
History train(Mlp& mlp, const Dataset& train_set, const Dataset& test_set, const HyperParams& hp,
              TrainerKind kind, Backend& backend, const FeedbackBank& bank,
              const TrainOptions& options = {});

}  // namespace cimtrain

#endif  // CIMTRAIN_TRAINER_HPP_
