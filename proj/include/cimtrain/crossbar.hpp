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

#ifndef CIMTRAIN_CROSSBAR_HPP_
#define CIMTRAIN_CROSSBAR_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cimtrain/backend.hpp"
#include "cimtrain/mat.hpp"
#include "cimtrain/rng.hpp"

namespace cimtrain {

/// How the ADC reference is chosen for each subarray read.
///   dynamic:    full scale = largest column current of that read, so the
///               levels span what the read actually produced.
///   worst_case: full scale = lines * g_max * V_max with V_max = 1.
enum class AdcRange { dynamic, worst_case };

std::string to_string(AdcRange r);
AdcRange adc_range_from_string(const std::string& s);

/// Conductances are in normalized units (g_max = 1 by default). adc_bits == 0
/// and weight_bits == 0 mean ideal (unquantized) conversion and programming.
struct CrossbarConfig {
  std::size_t subarray_rows = 128;
  std::size_t subarray_cols = 128;
  int adc_bits = 8;
  double g_min = 0.1;
  double g_max = 1.0;
  int weight_bits = 8;
  double d2d_sigma = 0.0;
  double c2c_sigma = 0.0;
  double wire_r = 0.0;
  /// Representable weight range is headroom * max|w| at first programming.
  double weight_headroom = 2.0;
  AdcRange adc_range = AdcRange::dynamic;
  /// Columns sharing one ADC. Affects cost only; every column is converted.
  std::size_t adc_column_mux = 8;

  void validate() const;
  /// Fully ideal configuration: the crossbar reproduces exact products up to
  /// floating-point rounding.
  static CrossbarConfig ideal();

  friend bool operator==(const CrossbarConfig&, const CrossbarConfig&) = default;
};

enum class Polarity { positive, negative };

/// Differential conductance pair per cell. Physical orientation: rows are
/// input (word) lines, columns are output (bit) lines, so a read computes
/// I_j = sum_i V_i g_ij, i.e. M^T x for the programmed matrix M.
class CrossbarArray {
 public:
  /// Program matrix `m` (rows x cols). `weight_range` <= 0 selects
  /// cfg.weight_headroom * max|m| (1.0 when m is all zero). Device-to-device
  /// factors are drawn here, once, from `rng`.
  static CrossbarArray program_weights(const Mat& m, const CrossbarConfig& cfg, Rng& rng,
                                       double weight_range = 0.0);

  /// Re-program cells. Only cells with changed(i, j) != 0 receive a pulse (and
  /// its cycle-to-cycle noise); pass nullptr to re-program every cell.
  void reprogram(const Mat& m, const Mat* changed, Rng& rng);

  /// Weights encoded by the programmed conductances, (g+ - g-) / k. Static
  /// device variation is a read-time effect and is not included.
  Mat readback() const;

  std::size_t rows() const { return g_pos_.rows(); }
  std::size_t cols() const { return g_pos_.cols(); }
  const CrossbarConfig& config() const { return cfg_; }
  double weight_range() const { return weight_range_; }
  /// Conductance per unit weight, k = (g_max - g_min) / weight_range.
  double scale() const { return (cfg_.g_max - cfg_.g_min) / weight_range_; }

  const Mat& conductance(Polarity p) const { return p == Polarity::positive ? g_pos_ : g_neg_; }
  const Mat& d2d_factor(Polarity p) const { return p == Polarity::positive ? s_pos_ : s_neg_; }
  /// Conductance seen by a read: programmed value times static variation
  /// times IR-drop attenuation.
  const Mat& effective(Polarity p) const { return p == Polarity::positive ? eff_pos_ : eff_neg_; }

  std::size_t grid_rows() const;
  std::size_t grid_cols() const;
  std::size_t subarrays() const { return grid_rows() * grid_cols(); }

  std::uint64_t clipped_weights() const { return clipped_; }
  std::uint64_t program_pulses() const { return pulses_; }

 private:
  CrossbarArray() = default;
  void program_cell(std::size_t i, std::size_t j, double w, Rng& rng);
  void refresh_cell(std::size_t i, std::size_t j);

  CrossbarConfig cfg_;
  double weight_range_ = 1.0;
  Mat g_pos_, g_neg_;
  Mat s_pos_, s_neg_;
  Mat eff_pos_, eff_neg_;
  std::uint64_t clipped_ = 0;
  std::uint64_t pulses_ = 0;
};

/// First-order series-resistance attenuation for the cell at local subarray
/// position (i_local, j_local): 1 / (1 + wire_r * (i_local + j_local) * g_cell / g_max).
double ir_drop_attenuation(std::size_t i_local, std::size_t j_local, double g_cell,
                           const CrossbarConfig& cfg);
/// Attenuation for one device of the array cell at global position (i, j).
double ir_drop_attenuation(std::size_t i, std::size_t j, const CrossbarConfig& cfg,
                           const CrossbarArray& arr, Polarity p = Polarity::positive);

/// Uniform ADC over [0, fullscale] with 2^bits levels k * fullscale / (2^bits - 1);
/// nearest rounding, out-of-range currents clip. bits == 0 returns the input.
double adc_read(double current, double fullscale, int bits);
/// Worst-case full scale for a read that drives `lines` input lines.
double worst_case_fullscale(std::size_t lines, const CrossbarConfig& cfg);
double adc_read(double current, const CrossbarConfig& cfg);

/// Batched read: x is rows x batch, result is cols x batch with
/// y_j = sum_i x_i M_ij realised through the crossbar. `col_limit` restricts
/// the read to the first col_limit output lines (0 = all).
Mat analog_matvec(const CrossbarArray& arr, const Mat& x, const CrossbarConfig& cfg,
                  std::size_t col_limit = 0);
/// Transposed read through the rotated peripherals: x is cols x batch,
/// result is rows x batch with y_i = sum_j M_ij x_j.
Mat analog_matvec_transposed(const CrossbarArray& arr, const Mat& x, const CrossbarConfig& cfg);

/// Number of subarrays touched by a read of the top-left rows x cols window.
std::size_t subarrays_spanned(std::size_t rows, std::size_t cols, const CrossbarConfig& cfg);

/// Crossbar substrate: one array per weight layer (holding W^T) plus one
/// shared array for the feedback master (holding master^T) when present.
class AnalogBackend final : public Backend {
 public:
  AnalogBackend(CrossbarConfig cfg, std::uint64_t device_seed);

  std::string name() const override { return "analog"; }
  bool is_analog() const override { return true; }
  std::vector<Mat> attach(const std::vector<Mat>& weights, const Mat& feedback_master) override;
  Mat forward(std::size_t layer, const Mat& w, const Mat& x) override;
  Mat transposed(std::size_t layer, const Mat& w, const Mat& x) override;
  Mat feedback(std::size_t hidden_layer, const MatView& slice, const Mat& x) override;
  Mat write(std::size_t layer, const Mat& target, const Mat& changed) override;

  const CrossbarConfig& config() const { return cfg_; }
  const CrossbarArray& array(std::size_t layer) const { return arrays_.at(layer); }
  const std::optional<CrossbarArray>& feedback_array() const { return feedback_; }
  std::uint64_t clipped_weights() const;

 private:
  CrossbarConfig cfg_;
  Rng rng_;
  std::vector<CrossbarArray> arrays_;
  std::optional<CrossbarArray> feedback_;
};

}  // namespace cimtrain

#endif  // CIMTRAIN_CROSSBAR_HPP_
