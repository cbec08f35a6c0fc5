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

#include "cimtrain/backend.hpp"

namespace cimtrain {

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::forward_read:
      return "forward_read";
    case EventKind::transposed_read:
      return "transposed_read";
    case EventKind::feedback_read:
      return "feedback_read";
    case EventKind::gradient_compute:
      return "gradient_compute";
    case EventKind::program_write:
      return "program_write";
  }
  return "unknown";
}

void EventTally::on_event(const Event& event) {
  auto& c = counts_[static_cast<std::size_t>(event.kind)];
  ++c.events;
  c.vector_reads += static_cast<std::uint64_t>(event.vectors) * event.subarrays;
  c.cell_operations += static_cast<std::uint64_t>(event.vectors) * event.rows * event.cols;
  if (keep_log_) log_.push_back(event);
}

void EventTally::clear() {
  counts_ = {};
  log_.clear();
}

void Backend::gradient_event(std::size_t layer, std::size_t rows, std::size_t cols,
                             std::size_t vectors) {
  emit({EventKind::gradient_compute, layer, rows, cols, 1, vectors});
}

std::vector<Mat> DigitalBackend::attach(const std::vector<Mat>& weights, const Mat&) {
  return weights;
}

Mat DigitalBackend::forward(std::size_t layer, const Mat& w, const Mat& x) {
  emit({EventKind::forward_read, layer, w.cols(), w.rows(), 1, x.cols()});
  return matmul(w, x);
}

Mat DigitalBackend::transposed(std::size_t layer, const Mat& w, const Mat& x) {
  emit({EventKind::transposed_read, layer, w.cols(), w.rows(), 1, x.cols()});
  return matmul_at(w, x);
}

Mat DigitalBackend::feedback(std::size_t hidden_layer, const MatView& slice, const Mat& x) {
  emit({EventKind::feedback_read, hidden_layer, slice.cols, slice.rows, 1, x.cols()});
  return matmul(slice, x);
}

Mat DigitalBackend::write(std::size_t layer, const Mat& target, const Mat&) {
  emit({EventKind::program_write, layer, target.cols(), target.rows(), 1, 1});
  return target;
}

}  // namespace cimtrain
