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

#ifndef CIMTRAIN_MAT_HPP_
#define CIMTRAIN_MAT_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cimtrain {

/// Raised when a caller breaks a documented precondition (shape mismatch,
/// out-of-range parameter). Distinct from runtime failures such as IO.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dense row-major matrix of doubles. Column vectors are n x 1 matrices and
/// a batch of vectors is stored one vector per column.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Mat column(std::span<const double> values);
  static Mat identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  /// Copy of column c as an n x 1 matrix.
  Mat col(std::size_t c) const;
  /// Columns [first, first + count) as a new matrix.
  Mat cols_range(std::size_t first, std::size_t count) const;
  /// Top-left rows x cols block.
  Mat top_left(std::size_t rows, std::size_t cols) const;

  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Mat& a, const Mat& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Read-only strided window into a Mat. Used for the sliced feedback matrices
/// so that every slice aliases the master storage.
struct MatView {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t stride = 0;

  double operator()(std::size_t r, std::size_t c) const { return data[r * stride + c]; }
  Mat to_mat() const;
};

MatView view(const Mat& m);
MatView top_left_view(const Mat& m, std::size_t rows, std::size_t cols);

// All products accumulate over the inner index in ascending order and never
// reassociate, so results are bitwise reproducible.

/// a * b.
Mat matmul(const Mat& a, const Mat& b);
Mat matmul(const MatView& a, const Mat& b);
/// a^T * b without materialising the transpose.
Mat matmul_at(const Mat& a, const Mat& b);
/// a * b^T without materialising the transpose.
Mat matmul_bt(const Mat& a, const Mat& b);

Mat transpose(const Mat& a);
Mat hadamard(const Mat& a, const Mat& b);
/// u v^T for column vectors u (m x 1) and v (n x 1).
Mat outer(const Mat& u, const Mat& v);

Mat add(const Mat& a, const Mat& b);
Mat sub(const Mat& a, const Mat& b);
Mat scale(const Mat& a, double s);

double max_abs(const Mat& a);
double max_abs_diff(const Mat& a, const Mat& b);
double frobenius(const Mat& a);

}  // namespace cimtrain

#endif  // CIMTRAIN_MAT_HPP_
