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

#include "cimtrain/mat.hpp"

#include <algorithm>
#include <cmath>

namespace cimtrain {

namespace {

void require_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                            b.shape_string());
  }
}

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ContractViolation("Mat: data length " + std::to_string(data_.size()) +
                            " does not match " + shape_string());
  }
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ContractViolation("Mat::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Mat(r, c, std::move(data));
}

Mat Mat::column(std::span<const double> values) {
  return Mat(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::col(std::size_t c) const {
  Mat out(rows_, 1);
  for (std::size_t r = 0; r < rows_; ++r) out(r, 0) = (*this)(r, c);
  return out;
}

Mat Mat::cols_range(std::size_t first, std::size_t count) const {
  if (first + count > cols_) throw ContractViolation("Mat::cols_range: out of bounds");
  Mat out(rows_, count);
  for (std::size_t r = 0; r < rows_; ++r) {
    std::copy_n(data_.data() + r * cols_ + first, count, out.data() + r * count);
  }
  return out;
}

Mat Mat::top_left(std::size_t rows, std::size_t cols) const {
  return top_left_view(*this, rows, cols).to_mat();
}

bool Mat::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Mat::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Mat MatView::to_mat() const {
  Mat out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(data + r * stride, cols, out.data() + r * cols);
  }
  return out;
}

MatView view(const Mat& m) { return {m.data(), m.rows(), m.cols(), m.cols()}; }

MatView top_left_view(const Mat& m, std::size_t rows, std::size_t cols) {
  if (rows > m.rows() || cols > m.cols()) {
    throw ContractViolation("top_left_view: " + std::to_string(rows) + "x" + std::to_string(cols) +
                            " exceeds " + m.shape_string());
  }
  return {m.data(), rows, cols, m.cols()};
}

Mat matmul(const MatView& a, const Mat& b) {
  if (a.cols != b.rows()) {
    throw ContractViolation("matmul: inner dimensions differ (" + std::to_string(a.rows) + "x" +
                            std::to_string(a.cols) + " * " + b.shape_string() + ")");
  }
  const std::size_t n = b.cols();
  Mat c(a.rows, n);
  // i-k-j order: each c(i, j) still sums over k in ascending order.
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* ci = c.data() + i * n;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      const double* bk = b.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Mat matmul(const Mat& a, const Mat& b) { return matmul(view(a), b); }

Mat matmul_at(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) {
    throw ContractViolation("matmul_at: " + a.shape_string() + "^T * " + b.shape_string());
  }
  const std::size_t m = a.cols();
  const std::size_t n = b.cols();
  Mat c(m, n);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* ak = a.data() + k * m;
    const double* bk = b.data() + k * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double aki = ak[i];
      double* ci = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

Mat matmul_bt(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) {
    throw ContractViolation("matmul_bt: " + a.shape_string() + " * " + b.shape_string() + "^T");
  }
  return matmul(a, transpose(b));
}

Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  }
  return t;
}

Mat hadamard(const Mat& a, const Mat& b) {
  require_same_shape(a, b, "hadamard");
  Mat out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

Mat outer(const Mat& u, const Mat& v) {
  if (u.cols() != 1 || v.cols() != 1) {
    throw ContractViolation("outer: expects column vectors, got " + u.shape_string() + " and " +
                            v.shape_string());
  }
  Mat out(u.rows(), v.rows());
  for (std::size_t i = 0; i < u.rows(); ++i) {
    for (std::size_t j = 0; j < v.rows(); ++j) out(i, j) = u(i, 0) * v(j, 0);
  }
  return out;
}

Mat add(const Mat& a, const Mat& b) {
  require_same_shape(a, b, "add");
  Mat out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

Mat sub(const Mat& a, const Mat& b) {
  require_same_shape(a, b, "sub");
  Mat out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

Mat scale(const Mat& a, double s) {
  Mat out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * s;
  return out;
}

double max_abs(const Mat& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

double frobenius(const Mat& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace cimtrain
