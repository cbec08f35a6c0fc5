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

#ifndef CIMTRAIN_DATASET_HPP_
#define CIMTRAIN_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimtrain/mat.hpp"
#include "cimtrain/rng.hpp"

namespace cimtrain {

/// Samples are columns of `images` (features x samples), values in [0, 1].
struct Dataset {
  Mat images;
  std::vector<std::uint8_t> labels;
  std::size_t classes = 10;
  std::string split;

  std::size_t size() const { return labels.size(); }
  std::size_t features() const { return images.rows(); }

  /// Columns `indices` as a features x indices.size() batch.
  Mat gather(const std::vector<std::size_t>& indices) const;
  /// One-hot targets (classes x indices.size()).
  Mat targets(const std::vector<std::size_t>& indices) const;
  /// First `n` samples (all when n == 0 or n >= size()).
  Dataset head(std::size_t n) const;
};

/// IDX parsing failures; `code()` tells them apart.
class DataError : public std::runtime_error {
 public:
  enum class Code { io, bad_magic, truncated, count_mismatch, bad_label };
  DataError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads a big-endian IDX image/label pair. Pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t classes = 10, const std::string& split = "train");

/// Writes `ds` as IDX files with pixels rounded to bytes (value * 255).
/// `image_rows * image_cols` must equal the feature count.
void write_idx(const Dataset& ds, const std::filesystem::path& images,
               const std::filesystem::path& labels, std::size_t image_rows, std::size_t image_cols);

struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t features = 16;
  std::size_t samples_per_class = 32;
  double cluster_std = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Gaussian blobs around one random centre per class, clipped to [0, 1].
/// Samples are interleaved by class (sample i has label i % classes).
Dataset synthetic(const SyntheticSpec& spec, const std::string& split = "train");

/// Fisher-Yates shuffle of all sample indices cut into batches of
/// `batch_size`; the last batch may be short.
std::vector<std::vector<std::size_t>> batches(const Dataset& ds, std::size_t batch_size, Rng& rng);
/// Batches in storage order (used for the unshuffled test split).
std::vector<std::vector<std::size_t>> sequential_batches(std::size_t samples,
                                                         std::size_t batch_size);

}  // namespace cimtrain

#endif  // CIMTRAIN_DATASET_HPP_
