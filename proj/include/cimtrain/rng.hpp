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

#ifndef CIMTRAIN_RNG_HPP_
#define CIMTRAIN_RNG_HPP_

#include <array>
#include <cstdint>

namespace cimtrain {

/// xoshiro256** seeded through splitmix64. Every distribution below is
/// implemented here rather than taken from <random>, whose distributions are
/// implementation-defined; the same seed gives the same stream everywhere.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "xoshiro256**/splitmix64";

  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), rejection-sampled (no modulo bias).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Independent stream for a named purpose, derived from (seed, stream).
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

/// splitmix64 finaliser; exposed for seed derivation and hashing.
std::uint64_t mix64(std::uint64_t x);

}  // namespace cimtrain

#endif  // CIMTRAIN_RNG_HPP_
