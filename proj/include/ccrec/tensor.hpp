// Copyright 2026 The ccrec Authors.
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

// Minimal dense tensors with tape-based reverse-mode differentiation.
//
// Values are 64-bit. Tensors are scalars (shape {}) or row-major matrices
// (shape {rows, cols}). Operations are recorded only while a Tape is active
// on the calling thread and at least one input requires a gradient; without
// an active tape every operation is a plain forward evaluation.
//
//   Tape tape;
//   Tensor w = Tensor::uniform({4, 3}, -0.1, 0.1, rng).requires_grad(true);
//   Tensor loss = ad::mean(ad::tanh(ad::matmul(x, w)));
//   tape.backward(loss);          // w.grad() now holds d loss / d w
//
// A tape supports exactly one backward pass; reset() makes it reusable.

#ifndef CCREC_TENSOR_HPP_
#define CCREC_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ccrec::ad {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Propagates this node's grad into its inputs.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng);
  static Tensor normal(Shape shape, double stddev, std::mt19937_64& rng);
  static Tensor identity(std::size_t n);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool is_scalar() const { return numel() == 1; }

  std::span<const double> values() const;
  // Direct write access; only meaningful for leaves (parameters, inputs).
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  Tensor& requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Same values, cut from the graph.
  Tensor detach() const;
  // Deep copy of the values (fresh leaf, requires_grad preserved).
  Tensor clone() const;

  // Every value finite.
  bool all_finite() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

// Ordered record of executed operations for one backward pass.
class Tape {
 public:
  // Becomes the active tape of the calling thread until destroyed.
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Populates grad() of every requires_grad ancestor of `loss` (accumulating
  // into leaves). Throws DimensionError for non-scalar loss and StateError
  // when the tape was already consumed.
  void backward(const Tensor& loss);
  // Drops all recorded nodes and makes the tape usable again.
  void reset();

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

  static Tape* active();
  void record(std::shared_ptr<Node> n);

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
  bool consumed_ = false;
  Tape* previous_ = nullptr;
};

// Suspends recording on the current thread (inference sections).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

// ---- operations ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// a[m×k] · b[n×k]ᵀ without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// Elementwise on equal shapes; `b` may also be a 1×n row added to every row.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
// Gradient passes only where lo <= x <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// m×n -> m×1
Tensor row_sum(const Tensor& a);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);

// Rows of `table` selected by `indices`; gradients scatter-add back.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

// Row-wise softmax(x / temperature), max-subtracted.
Tensor softmax_rows(const Tensor& x, double temperature = 1.0);

// Inverted dropout. Identity when !training or rate == 0.
Tensor dropout(const Tensor& x, double rate, bool training,
               std::mt19937_64& rng);

// Pairwise cosine similarity: out[i][j] = cos(a_i, b_j), a: m×d, b: n×d.
// Norms are smoothed as sqrt(|v|² + 1e-12).
Tensor cosine_matrix(const Tensor& a, const Tensor& b);

// Mean over rows of categorical cross-entropy of softmax(logits) against
// integer labels.
Tensor softmax_cross_entropy(const Tensor& logits,
                             std::span<const std::size_t> labels);

// Row-wise layer normalization with 1×n gain and bias.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-8);

// ---- variable-length segments ----------------------------------------------
//
// A segmented matrix stacks the rows of several sequences back to back;
// `lengths` gives the row count of each sequence in order.

// Causal scaled dot-product attention inside each segment: row t of a
// segment attends to rows <= t of the same segment.
//   out_t = Σ_{u<=t} softmax_u(scale · q_t·k_u) v_u
Tensor segment_causal_attention(const Tensor& q, const Tensor& k,
                                const Tensor& v,
                                std::span<const std::size_t> lengths,
                                double scale);

// Per-segment row sums (or means) -> lengths.size() × n. Empty segments give
// zero rows.
Tensor segment_sum(const Tensor& x, std::span<const std::size_t> lengths,
                   bool mean = false);

// Row i of x times w[i] (w is m×1).
Tensor scale_rows(const Tensor& x, const Tensor& w);

}  // namespace ccrec::ad

#endif  // CCREC_TENSOR_HPP_
