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

#ifndef CIMTRAIN_BACKEND_HPP_
#define CIMTRAIN_BACKEND_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cimtrain/mat.hpp"

namespace cimtrain {

enum class EventKind : std::uint8_t {
  forward_read,
  transposed_read,
  feedback_read,
  gradient_compute,
  program_write,
};
inline constexpr std::size_t kEventKinds = 5;

std::string to_string(EventKind kind);

/// One batched hardware event. A read event stands for `vectors` physical
/// reads of each of `subarrays` subarrays; a write event re-programs a
/// rows x cols array once.
struct Event {
  EventKind kind = EventKind::forward_read;
  std::size_t layer = 0;  // 0-based weight layer; feedback reads use the hidden layer index
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t subarrays = 1;
  std::size_t vectors = 1;
};

class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void on_event(const Event& event) = 0;
};

/// Per-kind tallies of events. The cost model's closed-form counts are
/// checked against these.
class EventTally : public EventSink {
 public:
  struct Counts {
    std::uint64_t events = 0;
    std::uint64_t vector_reads = 0;     // sum of vectors * subarrays
    std::uint64_t cell_operations = 0;  // sum of vectors * rows * cols
  };

  void on_event(const Event& event) override;
  const Counts& counts(EventKind kind) const { return counts_[static_cast<std::size_t>(kind)]; }
  const std::vector<Event>& log() const { return log_; }
  void keep_log(bool keep) { keep_log_ = keep; }
  void clear();

 private:
  std::array<Counts, kEventKinds> counts_{};
  std::vector<Event> log_;
  bool keep_log_ = false;
};

/// The compute substrate a network runs on. Matrices follow the network
/// convention: a weight layer W has shape out x in, a batch holds one vector
/// per column.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string name() const = 0;
  virtual bool is_analog() const = 0;

  /// Bind to the network's weights (and the feedback master for DFA, which
  /// may be empty). Analog backends program their arrays here. Returns the
  /// weights the substrate actually holds after programming.
  virtual std::vector<Mat> attach(const std::vector<Mat>& weights, const Mat& feedback_master) = 0;

  /// W x for weight layer `layer`.
  virtual Mat forward(std::size_t layer, const Mat& w, const Mat& x) = 0;
  /// W^T x, read through the transposed path.
  virtual Mat transposed(std::size_t layer, const Mat& w, const Mat& x) = 0;
  /// B x where B is the top-left rows x x.rows() slice of the feedback master.
  virtual Mat feedback(std::size_t hidden_layer, const MatView& slice, const Mat& x) = 0;
  /// Store new weights for `layer`. Cells whose entry in `changed` is zero are
  /// left untouched. Returns the weights the substrate actually holds.
  virtual Mat write(std::size_t layer, const Mat& target, const Mat& changed) = 0;
  /// Report a WGU outer-product computation (no numerics).
  void gradient_event(std::size_t layer, std::size_t rows, std::size_t cols, std::size_t vectors);

  void set_sink(EventSink* sink) { sink_ = sink; }
  EventSink* sink() const { return sink_; }

 protected:
  void emit(const Event& event) const {
    if (sink_ != nullptr) sink_->on_event(event);
  }

 private:
  EventSink* sink_ = nullptr;
};

/// Exact floating-point reference substrate.
class DigitalBackend final : public Backend {
 public:
  std::string name() const override { return "digital"; }
  bool is_analog() const override { return false; }
  std::vector<Mat> attach(const std::vector<Mat>& weights, const Mat& feedback_master) override;
  Mat forward(std::size_t layer, const Mat& w, const Mat& x) override;
  Mat transposed(std::size_t layer, const Mat& w, const Mat& x) override;
  Mat feedback(std::size_t hidden_layer, const MatView& slice, const Mat& x) override;
  Mat write(std::size_t layer, const Mat& target, const Mat& changed) override;
};

}  // namespace cimtrain

#endif  // CIMTRAIN_BACKEND_HPP_
