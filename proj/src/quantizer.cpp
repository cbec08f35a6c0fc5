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

#include "cimtrain/quantizer.hpp"

#include <algorithm>
#include <cmath>

namespace cimtrain {

void Quantizer::validate() const {
  if (bits < 1 || bits > 52) {
    throw ContractViolation("Quantizer: bits must be in [1, 52], got " + std::to_string(bits));
  }
  if (!(range > 0.0) || !std::isfinite(range)) {
    throw ContractViolation("Quantizer: range must be positive, got " + std::to_string(range));
  }
}

std::int64_t Quantizer::max_index() const {
  return bits == 1 ? 1 : (std::int64_t{1} << (bits - 1)) - 1;
}

double Quantizer::step() const {
  return bits == 1 ? 2.0 * range : range / static_cast<double>(max_index());
}

std::vector<double> Quantizer::levels() const {
  validate();
  if (bits == 1) return {-range, range};
  const std::int64_t k_max = max_index();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * k_max + 1));
  for (std::int64_t k = -k_max; k <= k_max; ++k) out.push_back(static_cast<double>(k) * step());
  return out;
}

namespace {

void check(const Quantizer& q, const Rng* rng) {
  q.validate();
  if (q.mode == RoundingMode::stochastic && rng == nullptr) {
    throw ContractViolation("quantize: stochastic rounding needs an Rng");
  }
}

double quantize_checked(double x, const Quantizer& q, Rng* rng) {
  const double clipped = std::clamp(x, -q.range, q.range);
  if (q.bits == 1) {
    if (q.mode == RoundingMode::stochastic) {
      const double p_high = (clipped + q.range) / (2.0 * q.range);
      return rng->uniform() < p_high ? q.range : -q.range;
    }
    return clipped > 0.0 ? q.range : -q.range;
  }
  const double step = q.step();
  const double k_max = static_cast<double>(q.max_index());
  const double t = clipped / step;
  double k;
  if (q.mode == RoundingMode::nearest) {
    k = std::nearbyint(t);  // default FE_TONEAREST: ties to even
  } else {
    const double lo = std::floor(t);
    k = lo + (rng->uniform() < t - lo ? 1.0 : 0.0);
  }
  return std::clamp(k, -k_max, k_max) * step;
}

}  // namespace

double quantize(double x, const Quantizer& q, Rng* rng) {
  check(q, rng);
  return quantize_checked(x, q, rng);
}

Mat quantize(const Mat& x, const Quantizer& q, Rng* rng) {
  check(q, rng);
  Mat out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.data()[i] = quantize_checked(x.data()[i], q, rng);
  }
  return out;
}

std::string to_string(RoundingMode mode) {
  return mode == RoundingMode::nearest ? "nearest" : "stochastic";
}

RoundingMode rounding_mode_from_string(const std::string& s) {
  if (s == "nearest") return RoundingMode::nearest;
  if (s == "stochastic") return RoundingMode::stochastic;
  throw ContractViolation("unknown rounding mode '" + s + "'");
}

}  // namespace cimtrain
