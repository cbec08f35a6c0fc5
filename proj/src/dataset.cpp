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

#include "cimtrain/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

namespace cimtrain {

Mat Dataset::gather(const std::vector<std::size_t>& indices) const {
  Mat out(features(), indices.size());
  for (std::size_t r = 0; r < features(); ++r) {
    const double* src = images.data() + r * images.cols();
    double* dst = out.data() + r * indices.size();
    for (std::size_t b = 0; b < indices.size(); ++b) dst[b] = src[indices[b]];
  }
  return out;
}

Mat Dataset::targets(const std::vector<std::size_t>& indices) const {
  Mat out(classes, indices.size());
  for (std::size_t b = 0; b < indices.size(); ++b) out(labels[indices[b]], b) = 1.0;
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  if (n == 0 || n >= size()) return *this;
  Dataset out;
  out.images = images.cols_range(0, n);
  out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  out.classes = classes;
  out.split = split;
  return out;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Code::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void put_be32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(bytes, 4);
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t classes, const std::string& split) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  if (img.size() < 4) throw DataError(DataError::Code::truncated, images.string() + ": no header");
  if (be32(img, 0) != kIdxImageMagic) {
    throw DataError(DataError::Code::bad_magic, images.string() + ": bad image magic");
  }
  if (lab.size() < 4) throw DataError(DataError::Code::truncated, labels.string() + ": no header");
  if (be32(lab, 0) != kIdxLabelMagic) {
    throw DataError(DataError::Code::bad_magic, labels.string() + ": bad label magic");
  }
  if (img.size() < 16) throw DataError(DataError::Code::truncated, images.string() + ": header");
  if (lab.size() < 8) throw DataError(DataError::Code::truncated, labels.string() + ": header");
  const std::size_t count = be32(img, 4);
  const std::size_t rows = be32(img, 8);
  const std::size_t cols = be32(img, 12);
  const std::size_t label_count = be32(lab, 4);
  const std::size_t features = rows * cols;
  if (img.size() < 16 + count * features) {
    throw DataError(DataError::Code::truncated, images.string() + ": pixel data truncated");
  }
  if (lab.size() < 8 + label_count) {
    throw DataError(DataError::Code::truncated, labels.string() + ": label data truncated");
  }
  if (count != label_count) {
    throw DataError(
        DataError::Code::count_mismatch,
        "image count " + std::to_string(count) + " != label count " + std::to_string(label_count));
  }
  Dataset ds;
  ds.classes = classes;
  ds.split = split;
  ds.images = Mat(features, count);
  for (std::size_t s = 0; s < count; ++s) {
    const unsigned char* px = img.data() + 16 + s * features;
    for (std::size_t f = 0; f < features; ++f) ds.images(f, s) = px[f] / 255.0;
  }
  ds.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(count));
  for (std::uint8_t l : ds.labels) {
    if (l >= classes) {
      throw DataError(DataError::Code::bad_label, "label " + std::to_string(l) + " >= classes");
    }
  }
  return ds;
}

void write_idx(const Dataset& ds, const std::filesystem::path& images,
               const std::filesystem::path& labels, std::size_t image_rows,
               std::size_t image_cols) {
  if (image_rows * image_cols != ds.features()) {
    throw ContractViolation("write_idx: image shape does not match feature count");
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw DataError(DataError::Code::io, "write_idx: cannot create output");
  put_be32(img, kIdxImageMagic);
  put_be32(img, static_cast<std::uint32_t>(ds.size()));
  put_be32(img, static_cast<std::uint32_t>(image_rows));
  put_be32(img, static_cast<std::uint32_t>(image_cols));
  std::vector<char> px(ds.features());
  for (std::size_t s = 0; s < ds.size(); ++s) {
    for (std::size_t f = 0; f < ds.features(); ++f) {
      const double v = std::clamp(ds.images(f, s), 0.0, 1.0);
      px[f] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    img.write(px.data(), static_cast<std::streamsize>(px.size()));
  }
  put_be32(lab, kIdxLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(ds.size()));
  lab.write(reinterpret_cast<const char*>(ds.labels.data()),
            static_cast<std::streamsize>(ds.labels.size()));
}

void SyntheticSpec::validate() const {
  if (classes < 1 || classes > 255 || features < 1 || samples_per_class < 1) {
    throw ContractViolation("SyntheticSpec: classes in [1, 255], features and samples >= 1");
  }
  if (cluster_std < 0.0) throw ContractViolation("SyntheticSpec: cluster_std >= 0");
}

Dataset synthetic(const SyntheticSpec& spec, const std::string& split) {
  spec.validate();
  Rng rng(spec.seed);
  Mat centres(spec.features, spec.classes);
  for (double& v : centres.values()) v = rng.uniform();
  const std::size_t n = spec.classes * spec.samples_per_class;
  Dataset ds;
  ds.classes = spec.classes;
  ds.split = split;
  ds.images = Mat(spec.features, n);
  ds.labels.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t c = s % spec.classes;
    ds.labels[s] = static_cast<std::uint8_t>(c);
    for (std::size_t f = 0; f < spec.features; ++f) {
      const double noise = spec.cluster_std > 0.0 ? spec.cluster_std * rng.normal() : 0.0;
      ds.images(f, s) = std::clamp(centres(f, c) + noise, 0.0, 1.0);
    }
  }
  return ds;
}

std::vector<std::vector<std::size_t>> batches(const Dataset& ds, std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw ContractViolation("batches: batch_size must be >= 1");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::vector<std::vector<std::size_t>> sequential_batches(std::size_t samples,
                                                         std::size_t batch_size) {
  if (batch_size < 1) throw ContractViolation("sequential_batches: batch_size must be >= 1");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < samples; i += batch_size) {
    std::vector<std::size_t> b;
    for (std::size_t j = i; j < std::min(samples, i + batch_size); ++j) b.push_back(j);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace cimtrain
