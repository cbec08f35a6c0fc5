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

#include "cimtrain/crossbar.hpp"

#include <algorithm>
#include <cmath>

namespace cimtrain {

std::string to_string(AdcRange r) { return r == AdcRange::dynamic ? "dynamic" : "worst_case"; }

AdcRange adc_range_from_string(const std::string& s) {
  if (s == "dynamic") return AdcRange::dynamic;
  if (s == "worst_case") return AdcRange::worst_case;
  throw ContractViolation("unknown ADC range mode '" + s + "'");
}

void CrossbarConfig::validate() const {
  if (subarray_rows < 1 || subarray_cols < 1) {
    throw ContractViolation("CrossbarConfig: subarray dimensions must be >= 1");
  }
  if (!(g_min > 0.0) || !(g_max > g_min)) {
    throw ContractViolation("CrossbarConfig: need 0 < g_min < g_max");
  }
  if (adc_bits < 0 || adc_bits > 30) throw ContractViolation("CrossbarConfig: adc_bits in [0, 30]");
  if (weight_bits < 0 || weight_bits > 30) {
    throw ContractViolation("CrossbarConfig: weight_bits in [0, 30]");
  }
  if (d2d_sigma < 0.0 || c2c_sigma < 0.0) throw ContractViolation("CrossbarConfig: sigmas >= 0");
  if (wire_r < 0.0) throw ContractViolation("CrossbarConfig: wire_r >= 0");
  if (!(weight_headroom > 0.0)) throw ContractViolation("CrossbarConfig: weight_headroom > 0");
  if (adc_column_mux < 1) throw ContractViolation("CrossbarConfig: adc_column_mux >= 1");
}

CrossbarConfig CrossbarConfig::ideal() {
  CrossbarConfig cfg;
  cfg.adc_bits = 0;
  cfg.weight_bits = 0;
  return cfg;
}

// ---------------------------------------------------------------------------
// Device model

CrossbarArray CrossbarArray::program_weights(const Mat& m, const CrossbarConfig& cfg, Rng& rng,
                                             double weight_range) {
  cfg.validate();
  if (!m.all_finite()) throw ContractViolation("program_weights: non-finite weight");
  CrossbarArray arr;
  arr.cfg_ = cfg;
  if (weight_range <= 0.0) {
    const double peak = max_abs(m);
    weight_range = peak > 0.0 ? cfg.weight_headroom * peak : 1.0;
  }
  arr.weight_range_ = weight_range;
  arr.g_pos_ = Mat(m.rows(), m.cols(), cfg.g_min);
  arr.g_neg_ = Mat(m.rows(), m.cols(), cfg.g_min);
  arr.s_pos_ = Mat(m.rows(), m.cols(), 1.0);
  arr.s_neg_ = Mat(m.rows(), m.cols(), 1.0);
  if (cfg.d2d_sigma > 0.0) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      arr.s_pos_.data()[i] = std::max(0.0, 1.0 + cfg.d2d_sigma * rng.normal());
      arr.s_neg_.data()[i] = std::max(0.0, 1.0 + cfg.d2d_sigma * rng.normal());
    }
  }
  arr.eff_pos_ = Mat(m.rows(), m.cols());
  arr.eff_neg_ = Mat(m.rows(), m.cols());
  arr.reprogram(m, nullptr, rng);
  return arr;
}

void CrossbarArray::program_cell(std::size_t i, std::size_t j, double w, Rng& rng) {
  if (std::abs(w) > weight_range_) {
    ++clipped_;
    w = std::clamp(w, -weight_range_, weight_range_);
  }
  const double k = scale();
  double gp = cfg_.g_min + std::max(w, 0.0) * k;
  double gn = cfg_.g_min + std::max(-w, 0.0) * k;
  if (cfg_.weight_bits > 0) {
    const double levels = std::ldexp(1.0, cfg_.weight_bits) - 1.0;
    const double step = (cfg_.g_max - cfg_.g_min) / levels;
    gp = cfg_.g_min + std::nearbyint((gp - cfg_.g_min) / step) * step;
    gn = cfg_.g_min + std::nearbyint((gn - cfg_.g_min) / step) * step;
  }
  if (cfg_.c2c_sigma > 0.0) {
    gp *= 1.0 + cfg_.c2c_sigma * rng.normal();
    gn *= 1.0 + cfg_.c2c_sigma * rng.normal();
  }
  g_pos_(i, j) = std::clamp(gp, cfg_.g_min, cfg_.g_max);
  g_neg_(i, j) = std::clamp(gn, cfg_.g_min, cfg_.g_max);
  pulses_ += 2;
  refresh_cell(i, j);
}

void CrossbarArray::refresh_cell(std::size_t i, std::size_t j) {
  const std::size_t il = i % cfg_.subarray_rows;
  const std::size_t jl = j % cfg_.subarray_cols;
  const double gp = g_pos_(i, j) * s_pos_(i, j);
  const double gn = g_neg_(i, j) * s_neg_(i, j);
  eff_pos_(i, j) = gp * ir_drop_attenuation(il, jl, gp, cfg_);
  eff_neg_(i, j) = gn * ir_drop_attenuation(il, jl, gn, cfg_);
}

void CrossbarArray::reprogram(const Mat& m, const Mat* changed, Rng& rng) {
  if (m.rows() != rows() || m.cols() != cols()) {
    throw ContractViolation("CrossbarArray::reprogram: shape " + m.shape_string() +
                            " does not match array " + g_pos_.shape_string());
  }
  if (changed != nullptr && (changed->rows() != rows() || changed->cols() != cols())) {
    throw ContractViolation("CrossbarArray::reprogram: mask shape mismatch");
  }
  for (std::size_t i = 0; i < rows(); ++i) {
    for (std::size_t j = 0; j < cols(); ++j) {
      if (changed != nullptr && (*changed)(i, j) == 0.0) continue;
      program_cell(i, j, m(i, j), rng);
    }
  }
}

Mat CrossbarArray::readback() const {
  const double inv_k = 1.0 / scale();
  Mat out(rows(), cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = (g_pos_.data()[i] - g_neg_.data()[i]) * inv_k;
  }
  return out;
}

std::size_t CrossbarArray::grid_rows() const {
  return (rows() + cfg_.subarray_rows - 1) / cfg_.subarray_rows;
}

std::size_t CrossbarArray::grid_cols() const {
  return (cols() + cfg_.subarray_cols - 1) / cfg_.subarray_cols;
}

double ir_drop_attenuation(std::size_t i_local, std::size_t j_local, double g_cell,
                           const CrossbarConfig& cfg) {
  if (cfg.wire_r == 0.0) return 1.0;
  return 1.0 / (1.0 + cfg.wire_r * static_cast<double>(i_local + j_local) * g_cell / cfg.g_max);
}

double ir_drop_attenuation(std::size_t i, std::size_t j, const CrossbarConfig& cfg,
                           const CrossbarArray& arr, Polarity p) {
  if (i >= arr.rows() || j >= arr.cols()) {
    throw ContractViolation("ir_drop_attenuation: cell outside array");
  }
  const double g = arr.conductance(p)(i, j) * arr.d2d_factor(p)(i, j);
  return ir_drop_attenuation(i % cfg.subarray_rows, j % cfg.subarray_cols, g, cfg);
}

// ---------------------------------------------------------------------------
// Peripherals

double adc_read(double current, double fullscale, int bits) {
  if (bits <= 0) return current;
  if (!(fullscale > 0.0)) return 0.0;
  const double step = fullscale / (std::ldexp(1.0, bits) - 1.0);
  const double clipped = std::clamp(current, 0.0, fullscale);
  return std::nearbyint(clipped / step) * step;
}

double worst_case_fullscale(std::size_t lines, const CrossbarConfig& cfg) {
  return static_cast<double>(lines) * cfg.g_max;
}

double adc_read(double current, const CrossbarConfig& cfg) {
  return adc_read(current, worst_case_fullscale(cfg.subarray_rows, cfg), cfg.adc_bits);
}

std::size_t subarrays_spanned(std::size_t rows, std::size_t cols, const CrossbarConfig& cfg) {
  return ((rows + cfg.subarray_rows - 1) / cfg.subarray_rows) *
         ((cols + cfg.subarray_cols - 1) / cfg.subarray_cols);
}

namespace {

// Splits a signed input vector into non-negative voltage phases in [0, 1].
// Returns the scale s with x = s * (v_pos - v_neg); s == 0 for a zero vector.
double split_phases(const Mat& x, std::size_t b, std::vector<double>& v_pos,
                    std::vector<double>& v_neg, bool& has_neg) {
  const std::size_t n = x.rows();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s = std::max(s, std::abs(x(i, b)));
  has_neg = false;
  if (s == 0.0) return 0.0;
  const double inv = 1.0 / s;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x(i, b) * inv;
    v_pos[i] = v > 0.0 ? v : 0.0;
    v_neg[i] = v < 0.0 ? -v : 0.0;
    has_neg = has_neg || v < 0.0;
  }
  return s;
}

// ADC-convert one block of differential partial sums and accumulate into acc.
void convert_block(const double* ip, const double* in, std::size_t n, double sign, double lines,
                   const CrossbarConfig& cfg, double* acc) {
  double fs = 0.0;
  if (cfg.adc_range == AdcRange::dynamic) {
    for (std::size_t c = 0; c < n; ++c) fs = std::max(fs, std::max(ip[c], in[c]));
  } else {
    fs = lines * cfg.g_max;
  }
  for (std::size_t c = 0; c < n; ++c) {
    acc[c] += sign * (adc_read(ip[c], fs, cfg.adc_bits) - adc_read(in[c], fs, cfg.adc_bits));
  }
}

void check_config(const CrossbarArray& arr, const CrossbarConfig& cfg) {
  if (cfg.subarray_rows != arr.config().subarray_rows ||
      cfg.subarray_cols != arr.config().subarray_cols) {
    throw ContractViolation("analog read: config partition differs from the programmed array");
  }
}

}  // namespace

Mat analog_matvec(const CrossbarArray& arr, const Mat& x, const CrossbarConfig& cfg,
                  std::size_t col_limit) {
  check_config(arr, cfg);
  if (x.rows() != arr.rows()) {
    throw ContractViolation("analog_matvec: input has " + std::to_string(x.rows()) +
                            " rows, array has " + std::to_string(arr.rows()));
  }
  const std::size_t cols = col_limit == 0 ? arr.cols() : std::min(col_limit, arr.cols());
  const std::size_t rows = arr.rows();
  const std::size_t stride = arr.cols();
  const double* gp = arr.effective(Polarity::positive).data();
  const double* gn = arr.effective(Polarity::negative).data();
  const double inv_k = 1.0 / arr.scale();
  const bool ideal_adc = cfg.adc_bits == 0;

  Mat y(cols, x.cols());
  std::vector<double> v_pos(rows), v_neg(rows);
  std::vector<double> ip(cols), in(cols), acc(cols);
  for (std::size_t b = 0; b < x.cols(); ++b) {
    bool has_neg = false;
    const double s = split_phases(x, b, v_pos, v_neg, has_neg);
    if (s == 0.0) continue;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int phase = 0; phase < (has_neg ? 2 : 1); ++phase) {
      const std::vector<double>& v = phase == 0 ? v_pos : v_neg;
      const double sign = phase == 0 ? 1.0 : -1.0;
      if (ideal_adc) {
        // Unpartitioned ascending-row sum: identical for every tiling.
        std::fill(ip.begin(), ip.end(), 0.0);
        std::fill(in.begin(), in.end(), 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
          const double vi = v[i];
          if (vi == 0.0) continue;
          const double* rp = gp + i * stride;
          const double* rn = gn + i * stride;
          for (std::size_t c = 0; c < cols; ++c) {
            ip[c] += vi * rp[c];
            in[c] += vi * rn[c];
          }
        }
        for (std::size_t c = 0; c < cols; ++c) acc[c] += sign * (ip[c] - in[c]);
        continue;
      }
      for (std::size_t r0 = 0; r0 < rows; r0 += cfg.subarray_rows) {
        const std::size_t r1 = std::min(rows, r0 + cfg.subarray_rows);
        std::fill(ip.begin(), ip.end(), 0.0);
        std::fill(in.begin(), in.end(), 0.0);
        for (std::size_t i = r0; i < r1; ++i) {
          const double vi = v[i];
          if (vi == 0.0) continue;
          const double* rp = gp + i * stride;
          const double* rn = gn + i * stride;
          for (std::size_t c = 0; c < cols; ++c) {
            ip[c] += vi * rp[c];
            in[c] += vi * rn[c];
          }
        }
        for (std::size_t c0 = 0; c0 < cols; c0 += cfg.subarray_cols) {
          const std::size_t n = std::min(cols, c0 + cfg.subarray_cols) - c0;
          convert_block(ip.data() + c0, in.data() + c0, n, sign,
                        static_cast<double>(cfg.subarray_rows), cfg, acc.data() + c0);
        }
      }
    }
    for (std::size_t c = 0; c < cols; ++c) y(c, b) = acc[c] * s * inv_k;
  }
  return y;
}

Mat analog_matvec_transposed(const CrossbarArray& arr, const Mat& x, const CrossbarConfig& cfg) {
  check_config(arr, cfg);
  if (x.rows() != arr.cols()) {
    throw ContractViolation("analog_matvec_transposed: input has " + std::to_string(x.rows()) +
                            " rows, array has " + std::to_string(arr.cols()) + " columns");
  }
  const std::size_t rows = arr.rows();
  const std::size_t cols = arr.cols();
  const double* gp = arr.effective(Polarity::positive).data();
  const double* gn = arr.effective(Polarity::negative).data();
  const double inv_k = 1.0 / arr.scale();
  const bool ideal_adc = cfg.adc_bits == 0;
  // Without an ADC there is nothing block-local; one block spans the row.
  const std::size_t block = ideal_adc ? cols : cfg.subarray_cols;

  Mat y(rows, x.cols());
  std::vector<double> v_pos(cols), v_neg(cols);
  std::vector<double> ip(rows), in(rows), acc(rows);
  for (std::size_t b = 0; b < x.cols(); ++b) {
    bool has_neg = false;
    const double s = split_phases(x, b, v_pos, v_neg, has_neg);
    if (s == 0.0) continue;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int phase = 0; phase < (has_neg ? 2 : 1); ++phase) {
      const std::vector<double>& v = phase == 0 ? v_pos : v_neg;
      const double sign = phase == 0 ? 1.0 : -1.0;
      for (std::size_t c0 = 0; c0 < cols; c0 += block) {
        const std::size_t c1 = std::min(cols, c0 + block);
        for (std::size_t i = 0; i < rows; ++i) {
          const double* rp = gp + i * cols;
          const double* rn = gn + i * cols;
          double sp = 0.0;
          double sn = 0.0;
          for (std::size_t j = c0; j < c1; ++j) {
            sp += v[j] * rp[j];
            sn += v[j] * rn[j];
          }
          ip[i] = sp;
          in[i] = sn;
        }
        if (ideal_adc) {
          for (std::size_t i = 0; i < rows; ++i) acc[i] += sign * (ip[i] - in[i]);
          continue;
        }
        for (std::size_t r0 = 0; r0 < rows; r0 += cfg.subarray_rows) {
          const std::size_t n = std::min(rows, r0 + cfg.subarray_rows) - r0;
          convert_block(ip.data() + r0, in.data() + r0, n, sign,
                        static_cast<double>(cfg.subarray_cols), cfg, acc.data() + r0);
        }
      }
    }
    for (std::size_t i = 0; i < rows; ++i) y(i, b) = acc[i] * s * inv_k;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Backend

AnalogBackend::AnalogBackend(CrossbarConfig cfg, std::uint64_t device_seed)
    : cfg_(cfg), rng_(device_seed) {
  cfg_.validate();
}

std::vector<Mat> AnalogBackend::attach(const std::vector<Mat>& weights,
                                       const Mat& feedback_master) {
  arrays_.clear();
  std::vector<Mat> held;
  for (const Mat& w : weights) {
    arrays_.push_back(CrossbarArray::program_weights(transpose(w), cfg_, rng_));
    held.push_back(transpose(arrays_.back().readback()));
  }
  feedback_.reset();
  if (!feedback_master.empty()) {
    feedback_ = CrossbarArray::program_weights(transpose(feedback_master), cfg_, rng_);
  }
  return held;
}

Mat AnalogBackend::forward(std::size_t layer, const Mat& w, const Mat& x) {
  const CrossbarArray& arr = arrays_.at(layer);
  if (arr.rows() != w.cols() || arr.cols() != w.rows()) {
    throw ContractViolation("AnalogBackend::forward: weights do not match programmed array");
  }
  emit({EventKind::forward_read, layer, arr.rows(), arr.cols(), arr.subarrays(), x.cols()});
  return analog_matvec(arr, x, cfg_);
}

Mat AnalogBackend::transposed(std::size_t layer, const Mat& w, const Mat& x) {
  const CrossbarArray& arr = arrays_.at(layer);
  if (arr.rows() != w.cols() || arr.cols() != w.rows()) {
    throw ContractViolation("AnalogBackend::transposed: weights do not match programmed array");
  }
  emit({EventKind::transposed_read, layer, arr.rows(), arr.cols(), arr.subarrays(), x.cols()});
  return analog_matvec_transposed(arr, x, cfg_);
}

Mat AnalogBackend::feedback(std::size_t hidden_layer, const MatView& slice, const Mat& x) {
  if (!feedback_) throw ContractViolation("AnalogBackend::feedback: no feedback array attached");
  if (slice.cols != feedback_->rows() || slice.rows > feedback_->cols()) {
    throw ContractViolation("AnalogBackend::feedback: slice exceeds the master array");
  }
  emit({EventKind::feedback_read, hidden_layer, slice.cols, slice.rows,
        subarrays_spanned(slice.cols, slice.rows, cfg_), x.cols()});
  return analog_matvec(*feedback_, x, cfg_, slice.rows);
}

Mat AnalogBackend::write(std::size_t layer, const Mat& target, const Mat& changed) {
  CrossbarArray& arr = arrays_.at(layer);
  const Mat t = transpose(target);
  const Mat mask = transpose(changed);
  arr.reprogram(t, &mask, rng_);
  emit({EventKind::program_write, layer, arr.rows(), arr.cols(), arr.subarrays(), 1});
  return transpose(arr.readback());
}

std::uint64_t AnalogBackend::clipped_weights() const {
  std::uint64_t n = 0;
  for (const auto& a : arrays_) n += a.clipped_weights();
  return n;
}

}  // namespace cimtrain
