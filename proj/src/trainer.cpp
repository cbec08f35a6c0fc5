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

#include "cimtrain/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace cimtrain {

std::string to_string(TrainerKind k) { return k == TrainerKind::bp ? "bp" : "dfa"; }

TrainerKind trainer_kind_from_string(const std::string& s) {
  if (s == "bp") return TrainerKind::bp;
  if (s == "dfa") return TrainerKind::dfa;
  throw ContractViolation("unknown trainer '" + s + "' (expected bp or dfa)");
}

Rng stream_rng(std::uint64_t seed, Stream stream) {
  return Rng::derive(seed, static_cast<std::uint64_t>(stream));
}

// ---------------------------------------------------------------------------
// Feedback

FeedbackBank FeedbackBank::create(const Topology& topology, Rng& rng) {
  topology.validate();
  const std::size_t c = topology.classes();
  const double bound = 1.0 / std::sqrt(static_cast<double>(c));
  Mat master(topology.max_hidden(), c);
  for (double& v : master.values()) v = rng.uniform(-bound, bound);
  return from_master(topology, std::move(master));
}

FeedbackBank FeedbackBank::from_master(const Topology& topology, Mat master) {
  topology.validate();
  if (master.rows() != topology.max_hidden() ||
      (master.rows() > 0 && master.cols() != topology.classes())) {
    throw ContractViolation("FeedbackBank: master " + master.shape_string() + " does not fit " +
                            std::to_string(topology.max_hidden()) + "x" +
                            std::to_string(topology.classes()));
  }
  FeedbackBank bank;
  bank.topology_ = topology;
  bank.master_ = std::move(master);
  return bank;
}

MatView FeedbackBank::slice(std::size_t hidden_layer) const {
  if (hidden_layer + 1 >= topology_.depth()) {
    throw ContractViolation("FeedbackBank::slice: layer " + std::to_string(hidden_layer) +
                            " is not a hidden layer");
  }
  return top_left_view(master_, topology_.dims[hidden_layer + 1], topology_.classes());
}

std::uint64_t FeedbackBank::fingerprint() const {
  std::uint64_t h = mix64(master_.rows() * 0x9E3779B97F4A7C15ULL + master_.cols());
  for (double v : master_.values()) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    h = mix64(h ^ bits);
  }
  return h;
}

void HyperParams::validate() const {
  // Zero is allowed and freezes the weights.
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ContractViolation("HyperParams: learning_rate must be non-negative");
  }
  if (batch_size == 0) throw ContractViolation("HyperParams: batch_size must be >= 1");
  for (const auto* q :
       {&precisions.weight, &precisions.activation, &precisions.error, &precisions.gradient}) {
    if (q->has_value()) (*q)->validate();
  }
}

// ---------------------------------------------------------------------------
// Loss

Mat softmax(const Mat& logits) {
  Mat p(logits.rows(), logits.cols());
  for (std::size_t c = 0; c < logits.cols(); ++c) {
    double peak = logits(0, c);
    for (std::size_t r = 1; r < logits.rows(); ++r) peak = std::max(peak, logits(r, c));
    double sum = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      p(r, c) = std::exp(logits(r, c) - peak);
      sum += p(r, c);
    }
    for (std::size_t r = 0; r < logits.rows(); ++r) p(r, c) /= sum;
  }
  return p;
}

double cross_entropy(const Mat& logits, const Mat& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ContractViolation("cross_entropy: shape mismatch");
  }
  double total = 0.0;
  for (std::size_t c = 0; c < logits.cols(); ++c) {
    double peak = logits(0, c);
    for (std::size_t r = 1; r < logits.rows(); ++r) peak = std::max(peak, logits(r, c));
    double sum = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) sum += std::exp(logits(r, c) - peak);
    const double lse = peak + std::log(sum);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      if (targets(r, c) != 0.0) total += targets(r, c) * (lse - logits(r, c));
    }
  }
  return total;
}

Mat output_error(const Mat& logits, const Mat& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ContractViolation("output_error: shape mismatch");
  }
  return sub(softmax(logits), targets);
}

// ---------------------------------------------------------------------------
// Backward passes

namespace {

void check_trace(const ForwardTrace& trace, std::size_t depth, const Mat& e) {
  if (trace.pre.size() != depth || trace.post.size() != depth) {
    throw ContractViolation("backward: trace does not match network depth");
  }
  if (e.rows() != trace.logits().rows() || e.cols() != trace.logits().cols()) {
    throw ContractViolation("backward: error shape " + e.shape_string() +
                            " does not match logits " + trace.logits().shape_string());
  }
}

}  // namespace

std::vector<Mat> bp_backward(const ForwardTrace& trace, const Mlp& mlp, const Mat& e,
                             Backend& backend, const Quantizer* error_quantizer, bool requantize,
                             Rng* rng) {
  const std::size_t n = mlp.depth();
  check_trace(trace, n, e);
  std::vector<Mat> deltas(n);
  deltas[n - 1] = error_quantizer != nullptr ? quantize(e, *error_quantizer, rng) : e;
  for (std::size_t l = n - 1; l-- > 0;) {
    Mat back = backend.transposed(l + 1, mlp.weights[l + 1], deltas[l + 1]);
    Mat d = hadamard(back, activate_derivative(mlp.topology.activation, trace.pre[l]));
    if (error_quantizer != nullptr && requantize) d = quantize(d, *error_quantizer, rng);
    deltas[l] = std::move(d);
  }
  return deltas;
}

Mat dfa_hidden_delta(const ForwardTrace& trace, const FeedbackBank& bank, const Mat& e,
                     std::size_t hidden_layer, Backend& backend, Activation activation) {
  Mat projected = backend.feedback(hidden_layer, bank.slice(hidden_layer), e);
  return hadamard(projected, activate_derivative(activation, trace.pre[hidden_layer]));
}

std::vector<Mat> dfa_backward(const ForwardTrace& trace, const FeedbackBank& bank, const Mat& e,
                              Backend& backend, Activation activation,
                              const Quantizer* error_quantizer, Rng* rng) {
  const std::size_t n = trace.pre.size();
  check_trace(trace, n, e);
  std::vector<Mat> deltas(n);
  deltas[n - 1] = error_quantizer != nullptr ? quantize(e, *error_quantizer, rng) : e;
  for (std::size_t l = 0; l + 1 < n; ++l) {
    deltas[l] = dfa_hidden_delta(trace, bank, deltas[n - 1], l, backend, activation);
  }
  return deltas;
}

Mat weight_delta(const Mat& delta, const Mat& h_prev) {
  if (delta.cols() != h_prev.cols() || delta.cols() == 0) {
    throw ContractViolation("weight_delta: batch mismatch");
  }
  return scale(matmul_bt(delta, h_prev), -1.0 / static_cast<double>(delta.cols()));
}

void apply_updates(Mlp& mlp, const std::vector<Mat>& deltas, const ForwardTrace& trace,
                   const HyperParams& hp, Backend& backend, Rng* rng) {
  const Precisions& p = hp.precisions;
  for (std::size_t l = 0; l < mlp.depth(); ++l) {
    Mat& w = mlp.weights[l];
    Mat grad = weight_delta(deltas[l], trace.post[l]);
    if (p.gradient) grad = quantize(grad, *p.gradient, rng);
    Mat target = add(w, scale(grad, hp.learning_rate));
    if (p.weight) target = quantize(target, *p.weight, rng);
    Mat changed(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.size(); ++i) {
      changed.data()[i] = target.data()[i] != w.data()[i] ? 1.0 : 0.0;
    }
    backend.gradient_event(l, w.cols(), w.rows(), trace.batch());
    w = backend.write(l, target, changed);
  }
}

// ---------------------------------------------------------------------------
// History

std::vector<double> History::test_accuracy() const {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.split == "test") out.push_back(r.accuracy);
  }
  return out;
}

std::vector<double> History::train_accuracy() const {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.split == "train") out.push_back(r.accuracy);
  }
  return out;
}

void write_history_csv(std::ostream& out, const History& history) {
  out << "epoch,split,loss,accuracy,wall_seconds\n";
  out << std::setprecision(17);
  for (const auto& r : history.rows) {
    out << r.epoch << ',' << r.split << ',' << r.loss << ',' << r.accuracy << ',' << r.wall_seconds
        << '\n';
  }
}

History read_history_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "epoch,split,loss,accuracy,wall_seconds") {
    throw std::runtime_error("history csv: missing or unexpected header");
  }
  History h;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) {
      throw std::runtime_error("history csv: line " + std::to_string(lineno) + " has " +
                               std::to_string(f.size()) + " fields");
    }
    try {
      h.rows.push_back({std::stoul(f[0]), f[1], std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
    } catch (const std::logic_error&) {
      throw std::runtime_error("history csv: bad number on line " + std::to_string(lineno));
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Training loop

Evaluation evaluate(const Mlp& mlp, const Dataset& data, Backend& backend, std::size_t batch_size,
                    const Quantizer* activation_quantizer) {
  if (data.size() == 0) return {};
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& idx : sequential_batches(data.size(), batch_size)) {
    const ForwardTrace trace = forward(mlp, data.gather(idx), backend, activation_quantizer);
    loss += cross_entropy(trace.logits(), data.targets(idx));
    const auto pred = predict(trace);
    for (std::size_t i = 0; i < idx.size(); ++i) correct += pred[i] == data.labels[idx[i]];
  }
  const double n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(correct) / n};
}

namespace {

const Quantizer* opt(const std::optional<Quantizer>& q) { return q ? &*q : nullptr; }

}  // namespace

History train(Mlp& mlp, const Dataset& train_set, const Dataset& test_set, const HyperParams& hp,
              TrainerKind kind, Backend& backend, const FeedbackBank& bank,
              const TrainOptions& options) {
  hp.validate();
  mlp.topology.validate();
  if (train_set.features() != mlp.topology.inputs() ||
      train_set.classes != mlp.topology.classes()) {
    throw ContractViolation("train: dataset does not match the network topology");
  }
  if (kind == TrainerKind::dfa && bank.master().rows() != mlp.topology.max_hidden()) {
    throw ContractViolation("train: DFA needs a feedback bank for this topology");
  }

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    if (!options.record_wall_time) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  Rng data_rng = stream_rng(hp.seed, Stream::data);
  Rng quant_rng = stream_rng(hp.seed, Stream::quantize);
  const Precisions& p = hp.precisions;
  if (p.weight) {
    for (Mat& w : mlp.weights) w = quantize(w, *p.weight, &quant_rng);
  }
  mlp.weights = backend.attach(mlp.weights, kind == TrainerKind::dfa ? bank.master() : Mat{});

  History history;
  auto record = [&](std::size_t epoch, const std::string& split, Evaluation ev) {
    EpochRecord r{epoch, split, ev.loss, ev.accuracy, elapsed()};
    history.rows.push_back(r);
    if (options.on_epoch) options.on_epoch(r);
  };
  auto eval = [&](const Dataset& ds) {
    EventSink* saved = backend.sink();
    backend.set_sink(nullptr);
    Evaluation ev = evaluate(mlp, ds, backend, 256, opt(p.activation));
    backend.set_sink(saved);
    return ev;
  };

  record(0, "train", eval(train_set));
  record(0, "test", eval(test_set));

  backend.set_sink(options.sink);
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    for (const auto& idx : batches(train_set, hp.batch_size, data_rng)) {
      const ForwardTrace trace = forward(mlp, train_set.gather(idx), backend, opt(p.activation));
      const Mat targets = train_set.targets(idx);
      auto diverge = [&] {
        history.diverged = true;
        history.diverged_epoch = epoch;
        backend.set_sink(nullptr);
        return history;
      };
      if (!std::isfinite(cross_entropy(trace.logits(), targets))) return diverge();
      const Mat e = output_error(trace.logits(), targets);
      std::vector<Mat> deltas = kind == TrainerKind::bp
                                    ? bp_backward(trace, mlp, e, backend, opt(p.error),
                                                  hp.requantize_bp_error, &quant_rng)
                                    : dfa_backward(trace, bank, e, backend, mlp.topology.activation,
                                                   opt(p.error), &quant_rng);
      apply_updates(mlp, deltas, trace, hp, backend, &quant_rng);
      for (const Mat& w : mlp.weights) {
        if (!w.all_finite()) return diverge();
      }
    }
    backend.set_sink(nullptr);
    record(epoch, "train", eval(train_set));
    record(epoch, "test", eval(test_set));
    backend.set_sink(options.sink);
  }
  backend.set_sink(nullptr);
  return history;
}

}  // namespace cimtrain
