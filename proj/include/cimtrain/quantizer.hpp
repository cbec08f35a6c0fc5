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

#ifndef CIMTRAIN_QUANTIZER_HPP_
#define CIMTRAIN_QUANTIZER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cimtrain/mat.hpp"
#include "cimtrain/rng.hpp"

namespace cimtrain {

enum class RoundingMode { nearest, stochastic };

/// Symmetric fixed-point grid on [-range, range].
///
/// bits == 1 gives the two levels {-range, +range}. For bits >= 2 the grid is
/// k * step with step = range / (2^(bits-1) - 1) and |k| <= 2^(bits-1) - 1,
/// i.e. 2^bits - 1 levels including zero (sign-magnitude style). Values are
/// clipped to the range before rounding. Nearest rounding breaks ties toward
/// the even signed level index k, which keeps the grid odd-symmetric; with one
/// bit the only tie (x == 0) resolves to -range.
struct Quantizer {
  int bits = 8;
  double range = 1.0;
  RoundingMode mode = RoundingMode::nearest;

  /// Throws ContractViolation for bits outside [1, 52] or range <= 0.
  void validate() const;
  double step() const;
  /// Largest level index magnitude K; levels are k * step for |k| <= K.
  std::int64_t max_index() const;
  std::vector<double> levels() const;
};

/// Quantize one value. rng is required iff q.mode == stochastic.
double quantize(double x, const Quantizer& q, Rng* rng = nullptr);
Mat quantize(const Mat& x, const Quantizer& q, Rng* rng = nullptr);

std::string to_string(RoundingMode mode);
RoundingMode rounding_mode_from_string(const std::string& s);

}  // namespace cimtrain

#endif  // CIMTRAIN_QUANTIZER_HPP_
