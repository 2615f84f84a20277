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

#include "ccrec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ccrec/errors.hpp"
#include "ccrec/kernels.hpp"

namespace ccrec::ad {

namespace {

thread_local Tape* g_active_tape = nullptr;

using NodePtr = std::shared_ptr<Node>;

NodePtr make_leaf(Shape shape, std::vector<double> values) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return n;
}

// Wraps a freshly computed value as an op result, recording it on the active
// tape when any input is differentiable.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<NodePtr> inputs,
                   std::function<void(Node&)> backward) {
  auto n = make_leaf(std::move(shape), std::move(value));
  Tape* tape = Tape::active();
  const bool track =
      tape != nullptr &&
      std::any_of(inputs.begin(), inputs.end(),
                  [](const NodePtr& p) { return p->requires_grad; });
  if (track) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward = std::move(backward);
    tape->record(n);
  }
  return Tensor(n);
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw StateError(std::string(op) + ": undefined tensor");
}

void require_matrix(const Tensor& t, const char* op) {
  require_defined(t, op);
  if (t.rank() != 2)
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_str(t.shape()));
}

enum class Broadcast { kNone, kRow };

Broadcast check_binary(const Tensor& a, const Tensor& b, const char* op,
                       bool allow_row) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (allow_row && a.rank() == 2 && b.rank() == 2 && b.rows() == 1 &&
      b.cols() == a.cols())
    return Broadcast::kRow;
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df) {
  require_defined(a, "unary");
  const auto& x = a.node()->value;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return make_result(a.shape(), std::move(y), {a.node()}, [df](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      in.grad[i] += self.grad[i] * df(in.value[i], self.value[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double v) {
  const std::size_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, v)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size())
    throw DimensionError("Tensor::from: shape " + shape_str(shape) +
                         " holds " + std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  for (std::size_t d : shape)
    if (d == 0) throw DimensionError("Tensor::from: zero-sized dimension");
  return Tensor(make_leaf(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double v) { return Tensor(make_leaf({}, {v})); }

Tensor Tensor::uniform(Shape shape, double lo, double hi,
                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return from(std::move(shape), std::move(v));
}

Tensor Tensor::normal(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return from(std::move(shape), std::move(v));
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from({n, n}, std::move(v));
}

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  return s.empty() ? 1 : s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  return s.size() < 2 ? 1 : s[1];
}

std::span<const double> Tensor::values() const { return node_->value; }
std::span<double> Tensor::mutable_values() { return node_->value; }

double Tensor::item() const {
  if (numel() != 1)
    throw DimensionError("item: tensor of shape " + shape_str(shape()) +
                         " is not a scalar");
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (r >= rows() || c >= cols())
    throw IndexError("at: (" + std::to_string(r) + "," + std::to_string(c) +
                     ") outside " + shape_str(shape()));
  return node_->value[r * cols() + c];
}

bool Tensor::requires_grad() const {
  return node_ != nullptr && node_->requires_grad;
}

Tensor& Tensor::requires_grad(bool on) {
  require_defined(*this, "requires_grad");
  node_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const {
  return node_ != nullptr && !node_->grad.empty();
}

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const {
  require_defined(*this, "detach");
  return Tensor(make_leaf(node_->shape, node_->value));
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.node_->requires_grad = node_->requires_grad;
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(node_->value.begin(), node_->value.end(),
                     [](double v) { return std::isfinite(v); });
}

// ---- Tape -------------------------------------------------------------------

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() {
  if (g_active_tape == this) g_active_tape = previous_;
}

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::shared_ptr<Node> n) {
  if (consumed_)
    throw StateError("tape already consumed; call reset() before recording");
  nodes_.push_back(std::move(n));
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw StateError("backward: tape already consumed");
  require_defined(loss, "backward");
  if (loss.numel() != 1)
    throw DimensionError("backward: loss must be scalar, got shape " +
                         shape_str(loss.shape()));
  consumed_ = true;
  if (!loss.requires_grad()) return;
  Node& root = *loss.node();
  root.ensure_grad();
  root.grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (!n.grad.empty() && n.backward) n.backward(n);
  }
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

NoGradGuard::NoGradGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }
NoGradGuard::~NoGradGuard() { g_active_tape = saved_; }

// ---- linear algebra -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions differ, " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> c(m * n);
  kernels::matmul_nn(m, n, k, a.values().data(), b.values().data(), c.data());
  return make_result({m, n}, std::move(c), {a.node(), b.node()},
                     [m, n, k](Node& self) {
                       Node& A = *self.inputs[0];
                       Node& B = *self.inputs[1];
                       if (A.requires_grad) {
                         A.ensure_grad();
                         kernels::matmul_nt(m, k, n, self.grad.data(),
                                            B.value.data(), A.grad.data(),
                                            true);
                       }
                       if (B.requires_grad) {
                         B.ensure_grad();
                         kernels::matmul_tn(k, n, m, A.value.data(),
                                            self.grad.data(), B.grad.data(),
                                            true);
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  const auto x = a.values();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = x[i * n + j];
  return make_result({n, m}, std::move(y), {a.node()}, [m, n](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        in.grad[i * n + j] += self.grad[j * m + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) +
                         " as " + shape_str(shape));
  return make_result(std::move(shape), a.node()->value, {a.node()},
                     [](Node& self) {
                       Node& in = *self.inputs[0];
                       if (!in.requires_grad) return;
                       in.ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         in.grad[i] += self.grad[i];
                     });
}

// ---- elementwise ------------------------------------------------------------

namespace {

Tensor add_sub(const Tensor& a, const Tensor& b, double sign, const char* op) {
  const Broadcast bc = check_binary(a, b, op, true);
  const auto x = a.values();
  const auto y = b.values();
  std::vector<double> z(x.size());
  const std::size_t n = a.rank() == 2 ? a.cols() : 1;
  for (std::size_t i = 0; i < x.size(); ++i)
    z[i] = x[i] + sign * (bc == Broadcast::kRow ? y[i % n] : y[i]);
  return make_result(a.shape(), std::move(z), {a.node(), b.node()},
                     [bc, n, sign](Node& self) {
                       Node& A = *self.inputs[0];
                       Node& B = *self.inputs[1];
                       if (A.requires_grad) {
                         A.ensure_grad();
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           A.grad[i] += self.grad[i];
                       }
                       if (B.requires_grad) {
                         B.ensure_grad();
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           B.grad[bc == Broadcast::kRow ? i % n : i] +=
                               sign * self.grad[i];
                       }
                     });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_sub(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) {
  return add_sub(a, b, -1.0, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_binary(a, b, "mul", false);
  const auto x = a.values();
  const auto y = b.values();
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(z), {a.node(), b.node()},
                     [](Node& self) {
                       Node& A = *self.inputs[0];
                       Node& B = *self.inputs[1];
                       if (A.requires_grad) {
                         A.ensure_grad();
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           A.grad[i] += self.grad[i] * B.value[i];
                       }
                       if (B.requires_grad) {
                         B.ensure_grad();
                         for (std::size_t i = 0; i < self.grad.size(); ++i)
                           B.grad[i] += self.grad[i] * A.value[i];
                       }
                     });
}

Tensor scale(const Tensor& a, double s) {
  return unary(
      a, [s](double x) { return s * x; },
      [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary(a, stable_softplus,
               [](double x, double) { return stable_sigmoid(x); });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor log(const Tensor& a) {
  return unary(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw ParameterError("clamp: lo > hi");
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---- reductions ---------------------------------------------------------------

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result({}, {s}, {a.node()}, [](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    for (double& g : in.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor row_sum(const Tensor& a) {
  require_matrix(a, "row_sum");
  const std::size_t m = a.rows(), n = a.cols();
  const auto x = a.values();
  std::vector<double> y(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i] += x[i * n + j];
  return make_result({m, 1}, std::move(y), {a.node()}, [n](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    for (std::size_t i = 0; i < in.grad.size(); ++i)
      in.grad[i] += self.grad[i / n];
  });
}

// ---- structural -------------------------------------------------------------

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  std::vector<NodePtr> inputs;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != m)
      throw DimensionError("concat_cols: row counts differ, " +
                           shape_str(parts.front().shape()) + " vs " +
                           shape_str(p.shape()));
    widths.push_back(p.cols());
    total += p.cols();
    inputs.push_back(p.node());
  }
  std::vector<double> y(m * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto x = parts[k].values();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(x.data() + i * widths[k], widths[k],
                  y.data() + i * total + off);
    off += widths[k];
  }
  return make_result(
      {m, total}, std::move(y), std::move(inputs),
      [m, total, widths](Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < self.inputs.size(); ++k) {
          Node& in = *self.inputs[k];
          if (in.requires_grad) {
            in.ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < widths[k]; ++j)
                in.grad[i * widths[k] + j] += self.grad[i * total + off + j];
          }
          off += widths[k];
        }
      });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t total = 0;
  std::vector<NodePtr> inputs;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != n)
      throw DimensionError("concat_rows: column counts differ, " +
                           shape_str(parts.front().shape()) + " vs " +
                           shape_str(p.shape()));
    total += p.rows();
    inputs.push_back(p.node());
  }
  std::vector<double> y;
  y.reserve(total * n);
  for (const auto& p : parts) {
    const auto x = p.values();
    y.insert(y.end(), x.begin(), x.end());
  }
  return make_result({total, n}, std::move(y), std::move(inputs),
                     [](Node& self) {
                       std::size_t off = 0;
                       for (auto& ip : self.inputs) {
                         Node& in = *ip;
                         if (in.requires_grad) {
                           in.ensure_grad();
                           for (std::size_t i = 0; i < in.value.size(); ++i)
                             in.grad[i] += self.grad[off + i];
                         }
                         off += in.value.size();
                       }
                     });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  require_matrix(table, "gather_rows");
  const std::size_t r = table.rows(), n = table.cols();
  for (std::size_t idx : indices)
    if (idx >= r)
      throw IndexError("gather_rows: index " + std::to_string(idx) +
                       " out of range for " + std::to_string(r) + " rows");
  if (indices.empty()) throw DimensionError("gather_rows: empty index list");
  const auto x = table.values();
  std::vector<double> y(indices.size() * n);
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy_n(x.data() + indices[i] * n, n, y.data() + i * n);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result({idx.size(), n}, std::move(y), {table.node()},
                     [idx, n](Node& self) {
                       Node& in = *self.inputs[0];
                       if (!in.requires_grad) return;
                       in.ensure_grad();
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t j = 0; j < n; ++j)
                           in.grad[idx[i] * n + j] += self.grad[i * n + j];
                     });
}

// ---- normalizations and losses -----------------------------------------------

Tensor softmax_rows(const Tensor& x, double temperature) {
  if (!(temperature > 0.0))
    throw ParameterError("softmax_rows: temperature must be > 0, got " +
                         std::to_string(temperature));
  require_matrix(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  const auto v = x.values();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = v.data() + i * n;
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[i * n + j] = std::exp((row[j] - mx) / temperature);
      z += y[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= z;
  }
  return make_result({m, n}, std::move(y), {x.node()},
                     [m, n, temperature](Node& self) {
                       Node& in = *self.inputs[0];
                       if (!in.requires_grad) return;
                       in.ensure_grad();
                       for (std::size_t i = 0; i < m; ++i) {
                         const double* yr = self.value.data() + i * n;
                         const double* gr = self.grad.data() + i * n;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
                         for (std::size_t j = 0; j < n; ++j)
                           in.grad[i * n + j] +=
                               yr[j] * (gr[j] - dot) / temperature;
                       }
                     });
}

Tensor dropout(const Tensor& x, double rate, bool training,
               std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ParameterError("dropout: rate must be in [0, 1), got " +
                         std::to_string(rate));
  if (!training || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double s = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = keep(rng) ? s : 0.0;
  const auto v = x.values();
  std::vector<double> y(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) y[i] = v[i] * mask[i];
  return make_result(x.shape(), std::move(y), {x.node()},
                     [mask = std::move(mask)](Node& self) {
                       Node& in = *self.inputs[0];
                       if (!in.requires_grad) return;
                       in.ensure_grad();
                       for (std::size_t i = 0; i < mask.size(); ++i)
                         in.grad[i] += self.grad[i] * mask[i];
                     });
}

Tensor cosine_matrix(const Tensor& a, const Tensor& b) {
  require_matrix(a, "cosine_matrix");
  require_matrix(b, "cosine_matrix");
  if (a.cols() != b.cols())
    throw DimensionError("cosine_matrix: feature widths differ, " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  constexpr double kEps = 1e-12;
  const std::size_t m = a.rows(), n = b.rows(), d = a.cols();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> na(m), nb(n);
  for (std::size_t i = 0; i < m; ++i) {
    double s = kEps;
    for (std::size_t k = 0; k < d; ++k) s += av[i * d + k] * av[i * d + k];
    na[i] = std::sqrt(s);
  }
  for (std::size_t j = 0; j < n; ++j) {
    double s = kEps;
    for (std::size_t k = 0; k < d; ++k) s += bv[j * d + k] * bv[j * d + k];
    nb[j] = std::sqrt(s);
  }
  std::vector<double> y(m * n);
  kernels::serial::matmul_nt(m, n, d, av.data(), bv.data(), y.data());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= na[i] * nb[j];
  return make_result(
      {m, n}, std::move(y), {a.node(), b.node()},
      [m, n, d, na = std::move(na), nb = std::move(nb)](Node& self) {
        Node& A = *self.inputs[0];
        Node& B = *self.inputs[1];
        if (A.requires_grad) A.ensure_grad();
        if (B.requires_grad) B.ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double g = self.grad[i * n + j];
            if (g == 0.0) continue;
            const double s = self.value[i * n + j];
            const double inv = 1.0 / (na[i] * nb[j]);
            const double* ai = A.value.data() + i * d;
            const double* bj = B.value.data() + j * d;
            if (A.requires_grad)
              for (std::size_t k = 0; k < d; ++k)
                A.grad[i * d + k] +=
                    g * (bj[k] * inv - s * ai[k] / (na[i] * na[i]));
            if (B.requires_grad)
              for (std::size_t k = 0; k < d; ++k)
                B.grad[j * d + k] +=
                    g * (ai[k] * inv - s * bj[k] / (nb[j] * nb[j]));
          }
        }
      });
}

Tensor softmax_cross_entropy(const Tensor& logits,
                             std::span<const std::size_t> labels) {
  require_matrix(logits, "softmax_cross_entropy");
  const std::size_t m = logits.rows(), n = logits.cols();
  if (labels.size() != m)
    throw DimensionError("softmax_cross_entropy: " + std::to_string(m) +
                         " rows but " + std::to_string(labels.size()) +
                         " labels");
  for (std::size_t y : labels)
    if (y >= n)
      throw IndexError("softmax_cross_entropy: label " + std::to_string(y) +
                       " out of range for " + std::to_string(n) + " classes");
  const auto z = logits.values();
  std::vector<double> probs(m * n);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = z.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      probs[i * n + j] = std::exp(row[j] - mx);
      s += probs[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= s;
    loss += std::log(s) + mx - row[labels[i]];
  }
  loss /= static_cast<double>(m);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return make_result({}, {loss}, {logits.node()},
                     [m, n, lab, probs = std::move(probs)](Node& self) {
                       Node& in = *self.inputs[0];
                       if (!in.requires_grad) return;
                       in.ensure_grad();
                       const double g = self.grad[0] / static_cast<double>(m);
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j)
                           in.grad[i * n + j] +=
                               g * (probs[i * n + j] - (j == lab[i] ? 1.0 : 0.0));
                     });
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps) {
  require_matrix(x, "layer_norm_rows");
  const std::size_t m = x.rows(), n = x.cols();
  for (const Tensor* p : {&gain, &bias}) {
    require_matrix(*p, "layer_norm_rows");
    if (p->rows() != 1 || p->cols() != n)
      throw DimensionError("layer_norm_rows: affine parameter " +
                           shape_str(p->shape()) + " does not match " +
                           shape_str(x.shape()));
  }
  const auto v = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<double> xhat(m * n), inv_std(m), y(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = v.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mu) * inv_std[i];
      y[i * n + j] = gv[j] * xhat[i * n + j] + bv[j];
    }
  }
  return make_result(
      {m, n}, std::move(y), {x.node(), gain.node(), bias.node()},
      [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        Node& X = *self.inputs[0];
        Node& G = *self.inputs[1];
        Node& B = *self.inputs[2];
        if (G.requires_grad) G.ensure_grad();
        if (B.requires_grad) B.ensure_grad();
        if (X.requires_grad) X.ensure_grad();
        std::vector<double> dxhat(n);
        for (std::size_t i = 0; i < m; ++i) {
          const double* gy = self.grad.data() + i * n;
          const double* xh = xhat.data() + i * n;
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            if (G.requires_grad) G.grad[j] += gy[j] * xh[j];
            if (B.requires_grad) B.grad[j] += gy[j];
            dxhat[j] = gy[j] * G.value[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xh[j];
          }
          if (!X.requires_grad) continue;
          mean_d /= static_cast<double>(n);
          mean_dx /= static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j)
            X.grad[i * n + j] +=
                inv_std[i] * (dxhat[j] - mean_d - xh[j] * mean_dx);
        }
      });
}

// ---- variable-length segments ------------------------------------------------

namespace {

std::size_t checked_total(std::span<const std::size_t> lengths, std::size_t rows,
                          const char* op) {
  const std::size_t total =
      std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
  if (total != rows)
    throw DimensionError(std::string(op) + ": segment lengths sum to " +
                         std::to_string(total) + ", matrix has " +
                         std::to_string(rows) + " rows");
  return total;
}

}  // namespace

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols())
    throw DimensionError("matmul_nt: inner dimensions differ, " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()) +
                         "^T");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> c(m * n);
  kernels::matmul_nt(m, n, k, a.values().data(), b.values().data(), c.data());
  return make_result({m, n}, std::move(c), {a.node(), b.node()},
                     [m, n, k](Node& self) {
                       Node& A = *self.inputs[0];
                       Node& B = *self.inputs[1];
                       // dA = G·B, dB = Gᵀ·A
                       if (A.requires_grad) {
                         A.ensure_grad();
                         kernels::matmul_nn(m, k, n, self.grad.data(),
                                            B.value.data(), A.grad.data(), true);
                       }
                       if (B.requires_grad) {
                         B.ensure_grad();
                         kernels::matmul_tn(n, k, m, self.grad.data(),
                                            A.value.data(), B.grad.data(), true);
                       }
                     });
}

Tensor segment_causal_attention(const Tensor& q, const Tensor& k,
                                const Tensor& v,
                                std::span<const std::size_t> lengths,
                                double scale) {
  const char* op = "segment_causal_attention";
  require_matrix(q, op);
  require_matrix(k, op);
  require_matrix(v, op);
  if (q.shape() != k.shape() || q.rows() != v.rows())
    throw DimensionError(std::string(op) + ": shapes " + shape_str(q.shape()) +
                         ", " + shape_str(k.shape()) + ", " +
                         shape_str(v.shape()));
  checked_total(lengths, q.rows(), op);
  const std::size_t dk = q.cols(), dv = v.cols();
  const auto Q = q.values(), K = k.values(), V = v.values();
  // Attention weights, stored per segment as lower-triangular l×l blocks.
  std::vector<std::size_t> offs, poffs;
  std::size_t row = 0, pcount = 0;
  for (std::size_t l : lengths) {
    offs.push_back(row);
    poffs.push_back(pcount);
    row += l;
    pcount += l * l;
  }
  std::vector<double> probs(pcount, 0.0), out(q.rows() * dv, 0.0);
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    const std::size_t l = lengths[s], o = offs[s];
    double* p = probs.data() + poffs[s];
    for (std::size_t t = 0; t < l; ++t) {
      double mx = -1e300;
      for (std::size_t u = 0; u <= t; ++u) {
        double dot = 0.0;
        for (std::size_t j = 0; j < dk; ++j)
          dot += Q[(o + t) * dk + j] * K[(o + u) * dk + j];
        p[t * l + u] = scale * dot;
        mx = std::max(mx, p[t * l + u]);
      }
      double total = 0.0;
      for (std::size_t u = 0; u <= t; ++u) {
        p[t * l + u] = std::exp(p[t * l + u] - mx);
        total += p[t * l + u];
      }
      for (std::size_t u = 0; u <= t; ++u) {
        p[t * l + u] /= total;
        for (std::size_t j = 0; j < dv; ++j)
          out[(o + t) * dv + j] += p[t * l + u] * V[(o + u) * dv + j];
      }
    }
  }
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  return make_result(
      {q.rows(), dv}, std::move(out), {q.node(), k.node(), v.node()},
      [lens = std::move(lens), offs = std::move(offs), poffs = std::move(poffs),
       probs = std::move(probs), dk, dv, scale](Node& self) {
        Node& Qn = *self.inputs[0];
        Node& Kn = *self.inputs[1];
        Node& Vn = *self.inputs[2];
        for (Node* n : {&Qn, &Kn, &Vn})
          if (n->requires_grad) n->ensure_grad();
        std::vector<double> dp;
        for (std::size_t s = 0; s < lens.size(); ++s) {
          const std::size_t l = lens[s], o = offs[s];
          const double* p = probs.data() + poffs[s];
          for (std::size_t t = 0; t < l; ++t) {
            const double* g = self.grad.data() + (o + t) * dv;
            dp.assign(t + 1, 0.0);
            double dot_pd = 0.0;
            for (std::size_t u = 0; u <= t; ++u) {
              const double w = p[t * l + u];
              for (std::size_t j = 0; j < dv; ++j) {
                dp[u] += g[j] * Vn.value[(o + u) * dv + j];
                if (Vn.requires_grad) Vn.grad[(o + u) * dv + j] += w * g[j];
              }
              dot_pd += w * dp[u];
            }
            for (std::size_t u = 0; u <= t; ++u) {
              const double ds = p[t * l + u] * (dp[u] - dot_pd) * scale;
              for (std::size_t j = 0; j < dk; ++j) {
                if (Qn.requires_grad)
                  Qn.grad[(o + t) * dk + j] += ds * Kn.value[(o + u) * dk + j];
                if (Kn.requires_grad)
                  Kn.grad[(o + u) * dk + j] += ds * Qn.value[(o + t) * dk + j];
              }
            }
          }
        }
      });
}

Tensor segment_sum(const Tensor& x, std::span<const std::size_t> lengths,
                   bool mean) {
  require_matrix(x, "segment_sum");
  checked_total(lengths, x.rows(), "segment_sum");
  if (lengths.empty()) throw DimensionError("segment_sum: no segments");
  const std::size_t n = x.cols(), segs = lengths.size();
  const auto v = x.values();
  std::vector<double> y(segs * n, 0.0), w(segs, 0.0);
  std::size_t row = 0;
  for (std::size_t s = 0; s < segs; ++s) {
    if (lengths[s] > 0)
      w[s] = mean ? 1.0 / static_cast<double>(lengths[s]) : 1.0;
    for (std::size_t t = 0; t < lengths[s]; ++t, ++row)
      for (std::size_t j = 0; j < n; ++j) y[s * n + j] += w[s] * v[row * n + j];
  }
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  return make_result({segs, n}, std::move(y), {x.node()},
                     [lens = std::move(lens), w = std::move(w), n](Node& self) {
                       Node& in = *self.inputs[0];
                       if (!in.requires_grad) return;
                       in.ensure_grad();
                       std::size_t row = 0;
                       for (std::size_t s = 0; s < lens.size(); ++s)
                         for (std::size_t t = 0; t < lens[s]; ++t, ++row)
                           for (std::size_t j = 0; j < n; ++j)
                             in.grad[row * n + j] += w[s] * self.grad[s * n + j];
                     });
}

Tensor scale_rows(const Tensor& x, const Tensor& w) {
  require_matrix(x, "scale_rows");
  require_matrix(w, "scale_rows");
  if (w.rows() != x.rows() || w.cols() != 1)
    throw DimensionError("scale_rows: weights " + shape_str(w.shape()) +
                         " do not match " + shape_str(x.shape()));
  const std::size_t m = x.rows(), n = x.cols();
  const auto xv = x.values(), wv = w.values();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = xv[i * n + j] * wv[i];
  return make_result({m, n}, std::move(y), {x.node(), w.node()},
                     [m, n](Node& self) {
                       Node& X = *self.inputs[0];
                       Node& W = *self.inputs[1];
                       if (X.requires_grad) X.ensure_grad();
                       if (W.requires_grad) W.ensure_grad();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) {
                           const double g = self.grad[i * n + j];
                           if (X.requires_grad) X.grad[i * n + j] += g * W.value[i];
                           if (W.requires_grad) W.grad[i] += g * X.value[i * n + j];
                         }
                     });
}

}  // namespace ccrec::ad
