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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cimtrain/backend.hpp"
#include "cimtrain/crossbar.hpp"
#include "cimtrain/network.hpp"
#include "test_util.hpp"

namespace cimtrain {
namespace {

using testing::naive_matmul;
using testing::random_mat;

CrossbarConfig fine(std::size_t sub = 32) {
  CrossbarConfig c;
  c.subarray_rows = sub;
  c.subarray_cols = sub;
  c.adc_bits = 16;
  c.weight_bits = 16;
  return c;
}

// Bound on |analog - exact| for one output of M^T x: weight-grid error on
// every cell plus two conversions per subarray block, per polarity phase.
double error_budget(const CrossbarArray& arr, const Mat& x, std::size_t b,
                    const CrossbarConfig& c) {
  const double k = arr.scale();
  double s = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    s = std::max(s, std::abs(x(i, b)));
    l1 += std::abs(x(i, b));
  }
  const double gstep = (c.g_max - c.g_min) / (std::ldexp(1.0, c.weight_bits) - 1.0);
  const double blocks = std::ceil(static_cast<double>(x.rows()) / c.subarray_rows);
  const double fs = worst_case_fullscale(c.subarray_rows, c);
  const double adc_half = fs / (2.0 * (std::ldexp(1.0, c.adc_bits) - 1.0));
  return l1 * gstep / k + s * 2.0 * blocks * 2.0 * adc_half / k + 1e-12;
}

TEST(CrossbarConfig, Validation) {
  CrossbarConfig c;
  EXPECT_NO_THROW(c.validate());
  c.g_min = 1.0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = CrossbarConfig{};
  c.c2c_sigma = -0.1;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = CrossbarConfig{};
  c.subarray_rows = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = CrossbarConfig{};
  c.adc_column_mux = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(Program, ZeroWeightsSitAtGmin) {
  CrossbarConfig c;
  Rng rng(1);
  const auto arr = CrossbarArray::program_weights(Mat(4, 3), c, rng);
  for (auto p : {Polarity::positive, Polarity::negative}) {
    for (double g : arr.conductance(p).values()) EXPECT_EQ(g, c.g_min);
  }
  EXPECT_EQ(arr.readback(), Mat(4, 3));
}

TEST(Program, DifferentialMappingAndRoundTrip) {
  CrossbarConfig c = fine();
  Rng rng(2);
  const Mat w = random_mat(10, 7, 3);
  const auto arr = CrossbarArray::program_weights(w, c, rng);
  const double k = arr.scale();
  EXPECT_DOUBLE_EQ(arr.weight_range(), c.weight_headroom * max_abs(w));
  const double gstep = (c.g_max - c.g_min) / (std::ldexp(1.0, 16) - 1.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      const double gp = arr.conductance(Polarity::positive)(i, j);
      const double gn = arr.conductance(Polarity::negative)(i, j);
      EXPECT_GE(gp, c.g_min);
      EXPECT_LE(gp, c.g_max);
      EXPECT_NEAR(gp, c.g_min + std::max(w(i, j), 0.0) * k, gstep / 2 + 1e-15);
      EXPECT_NEAR(gn, c.g_min + std::max(-w(i, j), 0.0) * k, gstep / 2 + 1e-15);
    }
  }
  EXPECT_LE(max_abs_diff(arr.readback(), w), gstep / k);
}

TEST(Program, OutOfRangeWeightsClipAndCount) {
  CrossbarConfig c = fine();
  Rng rng(2);
  const Mat w = Mat::from_rows({{0.5, -3.0, 2.0}});
  const auto arr = CrossbarArray::program_weights(w, c, rng, 1.0);
  EXPECT_EQ(arr.clipped_weights(), 2u);
  EXPECT_NEAR(arr.readback()(0, 1), -1.0, 1e-4);
}

TEST(Program, CycleToCycleSpread) {
  CrossbarConfig c;
  c.weight_bits = 0;
  c.c2c_sigma = 0.02;
  Rng rng(77);
  const Mat w = Mat::from_rows({{0.5}});
  auto arr = CrossbarArray::program_weights(w, c, rng, 1.0);
  const int n = 10000;
  double s = 0.0, s2 = 0.0;
  for (int t = 0; t < n; ++t) {
    arr.reprogram(w, nullptr, rng);
    const double g = arr.conductance(Polarity::positive)(0, 0);
    s += g;
    s2 += g * g;
  }
  const double mean = s / n;
  const double sd = std::sqrt((s2 - n * mean * mean) / (n - 1));
  EXPECT_GE(sd / mean, 0.018);
  EXPECT_LE(sd / mean, 0.022);
}

TEST(Program, DeviceFactorsFixedWhileWritesDrawNoise) {
  CrossbarConfig c = fine();
  c.d2d_sigma = 0.05;
  c.c2c_sigma = 0.02;
  Rng rng(5);
  const Mat w = random_mat(6, 6, 4);
  auto arr = CrossbarArray::program_weights(w, c, rng);
  const Mat s_before = arr.d2d_factor(Polarity::positive);
  const Mat g_before = arr.conductance(Polarity::positive);
  arr.reprogram(w, nullptr, rng);
  EXPECT_EQ(arr.d2d_factor(Polarity::positive), s_before);
  EXPECT_NE(arr.conductance(Polarity::positive), g_before);
}

TEST(Program, MaskedReprogramTouchesOnlyChangedCells) {
  CrossbarConfig c = fine();
  c.c2c_sigma = 0.05;
  Rng rng(6);
  const Mat w = random_mat(5, 4, 8);
  auto arr = CrossbarArray::program_weights(w, c, rng);
  const Mat before = arr.conductance(Polarity::positive);
  const auto pulses = arr.program_pulses();
  Mat mask(5, 4);
  mask(2, 1) = 1.0;
  mask(4, 3) = 1.0;
  arr.reprogram(w, &mask, rng);
  EXPECT_EQ(arr.program_pulses() - pulses, 4u);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (mask(i, j) == 0.0) {
        EXPECT_EQ(arr.conductance(Polarity::positive)(i, j), before(i, j));
      }
    }
  }
}

TEST(IrDrop, FactorShape) {
  CrossbarConfig c;
  EXPECT_EQ(ir_drop_attenuation(100, 100, 1.0, c), 1.0);
  c.wire_r = 1e-3;
  EXPECT_DOUBLE_EQ(ir_drop_attenuation(3, 4, 0.5, c), 1.0 / (1.0 + 1e-3 * 7 * 0.5));
  double prev = 1.0;
  for (std::size_t i = 0; i < 256; ++i) {
    const double f = ir_drop_attenuation(i, i / 2, 1.0, c);
    EXPECT_LE(f, prev);
    EXPECT_GT(f, 0.0);
    prev = f;
  }
}

TEST(Adc, LevelsAndError) {
  EXPECT_EQ(adc_read(0.0, 8.0, 3), 0.0);
  EXPECT_EQ(adc_read(0.3, 1.0, 1), 0.0);
  EXPECT_EQ(adc_read(0.7, 1.0, 1), 1.0);
  EXPECT_EQ(adc_read(5.0, 1.0, 4), 1.0);  // clipped
  EXPECT_EQ(adc_read(0.123, 1.0, 0), 0.123);
  for (int bits = 1; bits <= 8; ++bits) {
    const double levels = std::ldexp(1.0, bits) - 1.0;
    for (int i = 0; i <= 1000; ++i) {
      const double x = i / 1000.0;
      const double y = adc_read(x, 1.0, bits);
      ASSERT_LE(std::abs(y - x), 0.5 / levels + 1e-15);
      ASSERT_DOUBLE_EQ(std::nearbyint(y * levels), y * levels);
    }
  }
  CrossbarConfig c;
  EXPECT_EQ(worst_case_fullscale(128, c), 128.0 * c.g_max);
}

TEST(Matvec, ZeroInputGivesZero) {
  CrossbarConfig c;
  Rng rng(1);
  const auto arr = CrossbarArray::program_weights(random_mat(8, 5, 2), c, rng);
  EXPECT_EQ(analog_matvec(arr, Mat(8, 3), c), Mat(5, 3));
}

TEST(Matvec, SingleCellOhmsLaw) {
  CrossbarConfig c = CrossbarConfig::ideal();
  Rng rng(1);
  const auto arr = CrossbarArray::program_weights(Mat::from_rows({{0.8}}), c, rng, 0.8);
  EXPECT_EQ(arr.conductance(Polarity::positive)(0, 0), c.g_max);
  const Mat y = analog_matvec(arr, Mat::from_rows({{1.0}}), c);
  EXPECT_NEAR(y(0, 0), 0.8, 1e-12);
}

TEST(Matvec, FinePrecisionMatchesDigitalWithinBudget) {
  for (auto range : {AdcRange::dynamic, AdcRange::worst_case}) {
    CrossbarConfig c = fine(16);
    c.adc_range = range;
    Rng rng(9);
    const Mat m = random_mat(40, 24, 10);
    const auto arr = CrossbarArray::program_weights(m, c, rng);
    const Mat x = random_mat(40, 4, 11);
    const Mat y = analog_matvec(arr, x, c);
    const Mat ref = naive_matmul(transpose(m), x);
    for (std::size_t b = 0; b < 4; ++b) {
      const double budget = error_budget(arr, x, b, c);
      for (std::size_t j = 0; j < 24; ++j) ASSERT_LE(std::abs(y(j, b) - ref(j, b)), budget);
    }
    // Transposed path: y_i = sum_j M_ij x_j.
    const Mat xt = random_mat(24, 3, 12);
    const Mat yt = analog_matvec_transposed(arr, xt, c);
    const Mat reft = naive_matmul(m, xt);
    EXPECT_LE(max_abs_diff(yt, reft), 1e-3 * max_abs(reft) * 24);
  }
}

TEST(Matvec, OracleConvergenceOn128Square) {
  CrossbarConfig c = fine(128);
  Rng rng(3);
  const Mat m = random_mat(128, 128, 4);
  const auto arr = CrossbarArray::program_weights(m, c, rng);
  const Mat x = random_mat(128, 2, 5);
  const Mat ref = naive_matmul(transpose(m), x);
  EXPECT_LT(frobenius(sub(analog_matvec(arr, x, c), ref)) / frobenius(ref), 1e-3);
}

TEST(Matvec, SymmetricMatrixForwardEqualsTransposed) {
  CrossbarConfig c = fine(8);
  Rng rng(3);
  Mat m = random_mat(12, 12, 6);
  m = scale(add(m, transpose(m)), 0.5);
  const auto arr = CrossbarArray::program_weights(m, c, rng);
  const Mat x = random_mat(12, 2, 7);
  EXPECT_LE(max_abs_diff(analog_matvec(arr, x, c), analog_matvec_transposed(arr, x, c)), 1e-3);
}

TEST(Matvec, TilingIrrelevantWhenIdeal) {
  const Mat m = random_mat(50, 30, 13);
  const Mat x = random_mat(50, 3, 14);
  Mat first;
  for (std::size_t sub : {7u, 16u, 64u}) {
    CrossbarConfig c = CrossbarConfig::ideal();
    c.subarray_rows = sub;
    c.subarray_cols = sub;
    Rng rng(1);
    const auto arr = CrossbarArray::program_weights(m, c, rng);
    const Mat y = analog_matvec(arr, x, c);
    if (first.empty()) first = y;
    EXPECT_EQ(y, first) << sub;
  }
}

double mean_matvec_error(const CrossbarConfig& c, std::size_t n, int trials) {
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng(1000 + t);
    const Mat m = random_mat(n, n, 2000 + t);
    const auto arr = CrossbarArray::program_weights(m, c, rng);
    const Mat x = random_mat(n, 1, 3000 + t, 0.0, 1.0);
    const Mat ref = naive_matmul(transpose(m), x);
    total += frobenius(sub(analog_matvec(arr, x, c), ref)) / frobenius(ref);
  }
  return total / trials;
}

TEST(Matvec, IrDropErrorGrowsWithSubarraySize) {
  double prev = 0.0;
  for (std::size_t sub : {64u, 128u, 256u}) {
    CrossbarConfig c = CrossbarConfig::ideal();
    c.subarray_rows = sub;
    c.subarray_cols = sub;
    c.wire_r = 1e-3;
    const double e = mean_matvec_error(c, 256, 100);
    EXPECT_GT(e, prev) << sub;
    prev = e;
  }
}

TEST(Matvec, ErrorNonIncreasingInAdcBits) {
  double prev = 1e300;
  for (int bits = 1; bits <= 8; ++bits) {
    CrossbarConfig c = fine(64);
    c.adc_bits = bits;
    const double e = mean_matvec_error(c, 64, 50);
    EXPECT_LE(e, prev) << bits;
    prev = e;
  }
}

TEST(AnalogBackend, EventsAndHeldWeights) {
  CrossbarConfig c = fine(4);
  AnalogBackend be(c, 3);
  EventTally tally;
  tally.keep_log(true);
  be.set_sink(&tally);
  const std::vector<Mat> w = {random_mat(6, 10, 1), random_mat(3, 6, 2)};
  const Mat master = random_mat(6, 3, 3);
  const auto held = be.attach(w, master);
  ASSERT_EQ(held.size(), 2u);
  EXPECT_LE(max_abs_diff(held[0], w[0]), 1e-3);
  const Mat x = random_mat(10, 5, 4);
  const Mat y = be.forward(0, held[0], x);
  EXPECT_EQ(y.rows(), 6u);
  be.transposed(1, held[1], random_mat(3, 5, 5));
  be.feedback(0, top_left_view(master, 5, 3), random_mat(3, 5, 6));
  ASSERT_EQ(tally.log().size(), 3u);
  const Event& f = tally.log()[0];
  EXPECT_EQ(f.kind, EventKind::forward_read);
  EXPECT_EQ(f.rows, 10u);
  EXPECT_EQ(f.cols, 6u);
  EXPECT_EQ(f.subarrays, 3u * 2u);
  EXPECT_EQ(f.vectors, 5u);
  EXPECT_EQ(tally.log()[1].kind, EventKind::transposed_read);
  EXPECT_EQ(tally.log()[2].kind, EventKind::feedback_read);
  EXPECT_EQ(tally.log()[2].subarrays, subarrays_spanned(3, 5, c));
  EXPECT_EQ(tally.counts(EventKind::forward_read).vector_reads, 30u);
  EXPECT_EQ(tally.counts(EventKind::forward_read).cell_operations, 300u);
}

TEST(AnalogBackend, FeedbackSliceReadsMasterPrefix) {
  CrossbarConfig c = fine(4);
  AnalogBackend be(c, 3);
  const Mat master = random_mat(8, 3, 3);
  be.attach({random_mat(8, 4, 1)}, master);
  const Mat e = random_mat(3, 2, 4);
  const Mat full = be.feedback(0, view(master), e);
  const Mat part = be.feedback(1, top_left_view(master, 5, 3), e);
  ASSERT_EQ(part.rows(), 5u);
  EXPECT_LE(max_abs_diff(part, matmul(master.top_left(5, 3), e)), 1e-3);
  EXPECT_LE(max_abs_diff(full.top_left(5, 2), matmul(master.top_left(5, 3), e)), 1e-3);
}

TEST(AnalogBackend, IdealMatchesDigitalForward) {
  const Topology t = Topology::uniform(20, 12, 3, 5);
  Rng rng(2);
  Mlp m = xavier_init(t, rng);
  DigitalBackend dig;
  AnalogBackend ana(fine(8), 1);
  Mlp held = m;
  held.weights = ana.attach(m.weights, Mat());
  const Mat x = random_mat(20, 4, 3, 0.0, 1.0);
  const Mat yd = forward(m, x, dig).logits();
  const Mat ya = forward(held, x, ana).logits();
  EXPECT_LE(max_abs_diff(ya, yd), 1e-3 * std::max(1.0, max_abs(yd)));
}

TEST(AnalogBackend, WriteReturnsProgrammedWeights) {
  CrossbarConfig c = fine(4);
  c.c2c_sigma = 0.01;
  AnalogBackend be(c, 8);
  const Mat w = random_mat(5, 6, 1);
  const auto held = be.attach({w}, Mat());
  const Mat target = add(held[0], scale(random_mat(5, 6, 2), 0.01));
  const Mat out = be.write(0, target, Mat(5, 6, 1.0));
  EXPECT_EQ(out, transpose(be.array(0).readback()));
  EXPECT_NE(out, target);
  EXPECT_LE(max_abs_diff(out, target), 0.2);
}

TEST(DigitalBackend, ExactProducts) {
  DigitalBackend be;
  EventTally tally;
  be.set_sink(&tally);
  const Mat w = random_mat(4, 6, 1);
  const Mat x = random_mat(6, 3, 2);
  EXPECT_EQ(be.forward(0, w, x), naive_matmul(w, x));
  const Mat e = random_mat(4, 3, 3);
  EXPECT_EQ(be.transposed(0, w, e), naive_matmul(transpose(w), e));
  const Mat target = random_mat(4, 6, 4);
  EXPECT_EQ(be.write(0, target, Mat(4, 6, 1.0)), target);
  EXPECT_EQ(tally.counts(EventKind::forward_read).events, 1u);
  EXPECT_EQ(tally.counts(EventKind::transposed_read).events, 1u);
  EXPECT_EQ(tally.counts(EventKind::program_write).events, 1u);
}

}  // namespace
}  // namespace cimtrain
