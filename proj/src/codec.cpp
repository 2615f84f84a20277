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

#include "ccrec/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ccrec/binary_io.hpp"
#include "ccrec/errors.hpp"
#include "ccrec/kernels.hpp"
#include "ccrec/optim.hpp"

namespace ccrec::codec {
namespace {

constexpr char kMagic[4] = {'C', 'C', 'E', 'C'};
constexpr std::uint32_t kVersion = 1;
constexpr double kLogFloor = 1e-10;

ad::Tensor param(ad::Shape s, std::mt19937_64& rng) {
  return ad::Tensor::uniform(std::move(s), -0.1, 0.1, rng).requires_grad(true);
}

ad::Tensor zero_param(ad::Shape s) {
  return ad::Tensor::zeros(std::move(s)).requires_grad(true);
}

bool power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

// Softmax over each group of k consecutive columns.
ad::Tensor group_softmax(const ad::Tensor& x, std::size_t k, double temperature) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (k == 0 || cols % k != 0)
    throw DimensionError("group softmax: width " + std::to_string(cols) +
                         " is not a multiple of K=" + std::to_string(k));
  ad::Tensor flat = ad::reshape(x, {rows * (cols / k), k});
  return ad::reshape(ad::softmax_rows(flat, temperature), {rows, cols});
}

}  // namespace

// ---- configuration ----------------------------------------------------------------

std::size_t CodecConfig::bits_per_code() const {
  return static_cast<std::size_t>(std::countr_zero(k));
}

void CodecConfig::validate() const {
  if (m == 0) throw ParameterError("codec: M must be positive");
  if (!power_of_two(k) || k < 2)
    throw ParameterError("codec: K=" + std::to_string(k) +
                         " must be a power of two >= 2");
  if (k > (std::size_t{1} << 31))
    throw ParameterError("codec: K=" + std::to_string(k) + " is too large");
  if (dim == 0) throw ParameterError("codec: N must be positive");
  if (!(epsilon > 0.0))
    throw ParameterError("codec: temperature must be positive, got " +
                         std::to_string(epsilon));
  if (!(eta > 0.0 && eta < 1.0))
    throw ParameterError("codec: mixup weight must lie in (0, 1), got " +
                         std::to_string(eta));
  if (!(input_scale > 0.0) || !std::isfinite(input_scale))
    throw ParameterError("codec: input scale must be positive and finite, got " +
                         std::to_string(input_scale));
}

nlohmann::json CodecConfig::to_json() const {
  return {{"M", m},           {"K", k},     {"N", dim},
          {"epsilon", epsilon}, {"eta", eta}, {"per_book_heads", per_book_heads},
          {"input_scale", input_scale}};
}

CodecConfig CodecConfig::from_json(const nlohmann::json& j) {
  CodecConfig c;
  c.m = j.at("M");
  c.k = j.at("K");
  c.dim = j.at("N");
  c.epsilon = j.value("epsilon", 0.3);
  c.eta = j.value("eta", 0.8);
  c.per_book_heads = j.value("per_book_heads", false);
  c.input_scale = j.value("input_scale", 1.0);
  c.validate();
  return c;
}

// ---- parameters -------------------------------------------------------------------

CodeMLP CodeMLP::create(const CodecConfig& c, std::mt19937_64& rng) {
  c.validate();
  const std::size_t hidden = std::max<std::size_t>(c.mk() / 2, 1);
  CodeMLP p;
  p.theta = param({c.dim, hidden}, rng);
  p.bias = param({1, hidden}, rng);
  if (c.per_book_heads) {
    for (std::size_t i = 0; i < c.m; ++i) {
      p.theta2.push_back(param({hidden, c.k}, rng));
      p.bias2.push_back(param({1, c.k}, rng));
    }
  } else {
    p.theta2.push_back(param({hidden, c.mk()}, rng));
    p.bias2.push_back(param({1, c.mk()}, rng));
  }
  return p;
}

CodeMLP CodeMLP::zeros(const CodecConfig& c) {
  c.validate();
  const std::size_t hidden = std::max<std::size_t>(c.mk() / 2, 1);
  CodeMLP p;
  p.theta = zero_param({c.dim, hidden});
  p.bias = zero_param({1, hidden});
  const std::size_t heads = c.per_book_heads ? c.m : 1;
  const std::size_t width = c.per_book_heads ? c.k : c.mk();
  for (std::size_t i = 0; i < heads; ++i) {
    p.theta2.push_back(zero_param({hidden, width}));
    p.bias2.push_back(zero_param({1, width}));
  }
  return p;
}

ParamList CodeMLP::named(const std::string& prefix) const {
  ParamList out{{prefix + "theta", theta}, {prefix + "bias", bias}};
  for (std::size_t i = 0; i < theta2.size(); ++i) {
    out.push_back({prefix + "theta2." + std::to_string(i), theta2[i]});
    out.push_back({prefix + "bias2." + std::to_string(i), bias2[i]});
  }
  return out;
}

std::vector<ad::Tensor> CodeMLP::tensors() const {
  std::vector<ad::Tensor> out{theta, bias};
  for (std::size_t i = 0; i < theta2.size(); ++i) {
    out.push_back(theta2[i]);
    out.push_back(bias2[i]);
  }
  return out;
}

Codebooks Codebooks::create(const CodecConfig& c, std::mt19937_64& rng) {
  c.validate();
  return {param({c.mk(), c.dim}, rng)};
}

// ---- relaxed assignment -----------------------------------------------------------

ad::Tensor code_probs(const ad::Tensor& x, const CodeMLP& mlp,
                      const CodecConfig& c) {
  if (x.rank() != 2 || x.cols() != c.dim)
    throw DimensionError("code_probs: input " + ad::shape_str(x.shape()) +
                         " does not have N=" + std::to_string(c.dim) + " columns");
  const ad::Tensor input = c.input_scale == 1.0 ? x : ad::scale(x, c.input_scale);
  ad::Tensor h = ad::tanh(ad::add(ad::matmul(input, mlp.theta), mlp.bias));
  ad::Tensor scores;
  if (mlp.theta2.size() == 1) {
    scores = ad::add(ad::matmul(h, mlp.theta2[0]), mlp.bias2[0]);
  } else {
    std::vector<ad::Tensor> parts;
    for (std::size_t i = 0; i < mlp.theta2.size(); ++i)
      parts.push_back(ad::add(ad::matmul(h, mlp.theta2[i]), mlp.bias2[i]));
    scores = ad::concat_cols(parts);
  }
  if (scores.cols() != c.mk())
    throw DimensionError("code_probs: head width " +
                         std::to_string(scores.cols()) + " differs from M*K=" +
                         std::to_string(c.mk()));
  return group_softmax(ad::softplus(scores), c.k, 1.0);
}

double gumbel_noise(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double u = u01(rng);
  while (u <= 0.0) u = u01(rng);
  return -std::log(-std::log(u));
}

ad::Tensor gumbel_softmax(const ad::Tensor& alpha, std::size_t k, double epsilon,
                          std::mt19937_64* rng) {
  if (!(epsilon > 0.0))
    throw ParameterError("gumbel_softmax: temperature must be positive, got " +
                         std::to_string(epsilon));
  ad::Tensor logits =
      ad::log(ad::clamp(alpha, kLogFloor, std::numeric_limits<double>::infinity()));
  if (rng != nullptr) {
    std::vector<double> g(alpha.numel());
    for (double& v : g) v = gumbel_noise(*rng);
    logits = ad::add(logits, ad::Tensor::from(alpha.shape(), std::move(g)));
  }
  return group_softmax(logits, k, epsilon);
}

ad::Tensor compose_soft(const ad::Tensor& soft_codes, const Codebooks& books) {
  if (soft_codes.cols() != books.books.rows())
    throw DimensionError("compose: soft codes " + ad::shape_str(soft_codes.shape()) +
                         " do not match codebooks " +
                         ad::shape_str(books.books.shape()));
  return ad::matmul(soft_codes, books.books);
}

// ---- hard codes -------------------------------------------------------------------

void CodeMatrix::validate() const {
  if (codes.size() != num_items * m)
    throw DimensionError("code matrix holds " + std::to_string(codes.size()) +
                         " codes, expected " + std::to_string(num_items * m));
  for (std::size_t v = 0; v < num_items; ++v)
    for (std::size_t i = 0; i < m; ++i)
      if (at(v, i) >= k)
        throw IndexError("code " + std::to_string(at(v, i)) + " of item " +
                         std::to_string(v) + " in book " + std::to_string(i) +
                         " is outside [0, " + std::to_string(k) + ")");
}

ad::Tensor compose_hard(const CodeMatrix& c, const Codebooks& books,
                        std::span<const std::size_t> items) {
  c.validate();
  const std::size_t n = books.books.cols();
  if (books.books.rows() != c.m * c.k)
    throw DimensionError("compose: codebooks " + ad::shape_str(books.books.shape()) +
                         " do not hold M*K=" + std::to_string(c.m * c.k) + " rows");
  for (std::size_t v : items)
    if (v >= c.num_items)
      throw IndexError("compose: item " + std::to_string(v) + " outside [0, " +
                       std::to_string(c.num_items) + ")");
  std::vector<double> out(items.size() * n);
  kernels::serial::gather_sum_rows(items, c.codes.data(), c.m, c.k, n,
                                   books.books.values().data(), out.data());
  return ad::Tensor::from({items.size(), n}, std::move(out));
}

ad::Tensor mixup(const ad::Tensor& composite, const ad::Tensor& x, double eta) {
  if (!(eta > 0.0 && eta < 1.0))
    throw ParameterError("mixup: weight must lie in (0, 1), got " +
                         std::to_string(eta));
  if (composite.shape() != x.shape())
    throw DimensionError("mixup: " + ad::shape_str(composite.shape()) + " vs " +
                         ad::shape_str(x.shape()));
  return ad::add(ad::scale(x, eta), ad::scale(composite, 1.0 - eta));
}

ad::Tensor mse_loss(const ad::Tensor& composite, const ad::Tensor& x) {
  if (composite.shape() != x.shape())
    throw DimensionError("mse: " + ad::shape_str(composite.shape()) + " vs " +
                         ad::shape_str(x.shape()));
  ad::Tensor d = ad::sub(composite, x);
  return ad::scale(ad::sum(ad::mul(d, d)), 1.0 / static_cast<double>(x.rows()));
}

std::vector<std::uint32_t> argmax_groups(std::span<const double> alpha,
                                         std::size_t k) {
  if (k == 0 || alpha.size() % k != 0)
    throw DimensionError("argmax: width " + std::to_string(alpha.size()) +
                         " is not a multiple of K=" + std::to_string(k));
  std::vector<std::uint32_t> out(alpha.size() / k);
  for (std::size_t g = 0; g < out.size(); ++g) {
    const double* a = alpha.data() + g * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (a[j] > a[best]) best = j;
    out[g] = static_cast<std::uint32_t>(best);
  }
  return out;
}

CodeMatrix harden_codes(const CodeMLP& mlp, const ad::Tensor& x,
                        const CodecConfig& c) {
  ad::NoGradGuard guard;
  const ad::Tensor alpha = code_probs(x.detach(), mlp, c);
  CodeMatrix out{x.rows(), c.m, c.k, argmax_groups(alpha.values(), c.k)};
  return out;
}

Ratio compression_ratio(std::uint64_t num_items, std::uint64_t dim,
                        std::uint64_t m, std::uint64_t k) {
  if (num_items == 0 || dim == 0 || m == 0 || k == 0)
    throw ParameterError("compression ratio needs positive |V|, N, M and K");
  Ratio r;
  r.compressed = m * k * dim + m * num_items;
  r.original = num_items * dim;
  r.value = static_cast<double>(r.original) / static_cast<double>(r.compressed);
  r.floor = r.original / r.compressed;
  return r;
}

// ---- training ---------------------------------------------------------------------

CodecModel CodecModel::create(const CodecConfig& c, std::mt19937_64& rng) {
  CodecModel model;
  model.config = c;
  model.mlp = CodeMLP::create(c, rng);
  model.books = Codebooks::create(c, rng);
  return model;
}

namespace {

double rms(std::span<const double> v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  return v.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

CodecModel CodecModel::create_for(CodecConfig c, const ad::Tensor& reference,
                                  std::mt19937_64& rng) {
  if (reference.rank() != 2 || reference.cols() != c.dim)
    throw DimensionError("codec reference " + ad::shape_str(reference.shape()) +
                         " does not have N=" + std::to_string(c.dim) + " columns");
  const double target = rms(reference.values());
  if (!(target > 0.0) || !std::isfinite(target))
    throw ParameterError("codec reference table has zero or non-finite scale");
  c.input_scale = 1.0 / target;
  CodecModel model = create(c, rng);
  // M independent codewords sum to rms(book)·sqrt(M).
  const double current = rms(model.books.books.values()) * std::sqrt(static_cast<double>(c.m));
  if (current > 0.0) {
    const double f = target / current;
    for (double& v : model.books.books.mutable_values()) v *= f;
  }
  return model;
}

ParamList CodecModel::named() const {
  ParamList out = mlp.named("codec.mlp.");
  out.push_back({"codec.books", books.books});
  return out;
}

std::vector<ad::Tensor> CodecModel::tensors() const {
  std::vector<ad::Tensor> out = mlp.tensors();
  out.push_back(books.books);
  return out;
}

CodecModel CodecModel::from_checkpoint(const Checkpoint& ck) {
  if (!ck.sections.contains("codec_config"))
    throw FormatError("checkpoint lacks a codec_config section");
  CodecModel model;
  model.config = CodecConfig::from_json(ck.sections["codec_config"]);
  model.mlp = CodeMLP::zeros(model.config);
  model.books = {zero_param({model.config.mk(), model.config.dim})};
  assign_params(model.named(), ck);
  return model;
}

ad::Tensor CodecModel::soft_embeddings(const ad::Tensor& x,
                                       std::mt19937_64* rng) const {
  const ad::Tensor alpha = code_probs(x, mlp, config);
  return compose_soft(gumbel_softmax(alpha, config.k, config.epsilon, rng), books);
}

CodecTrainReport train_codec(CodecModel& model, const ad::Tensor& table,
                             const CodecTrainOptions& options) {
  model.config.validate();
  if (table.rank() != 2 || table.cols() != model.config.dim)
    throw DimensionError("train_codec: table " + ad::shape_str(table.shape()) +
                         " does not have N=" + std::to_string(model.config.dim) +
                         " columns");
  if (options.batch_size == 0) throw ParameterError("train_codec: batch size 0");
  const ad::Tensor target = table.detach();
  const std::size_t rows = target.rows();
  std::mt19937_64 rng(options.seed);
  std::mt19937_64* noise = options.noise ? &rng : nullptr;

  CodecTrainReport report;
  auto full_mse = [&] {
    ad::NoGradGuard g;
    return mse_loss(model.soft_embeddings(target, noise), target).item();
  };
  report.initial_mse = full_mse();

  ad::AdamOptions opt;
  opt.lr = options.lr;
  opt.weight_decay = options.weight_decay;
  ad::Adam adam(model.tensors(), opt);
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < rows; start += options.batch_size) {
      const std::size_t end = std::min(rows, start + options.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const ad::Tensor x = ad::gather_rows(target, idx);
      adam.zero_grad();
      ad::Tape tape;
      ad::Tensor loss = mse_loss(model.soft_embeddings(x, noise), x);
      if (!std::isfinite(loss.item()))
        throw NumericError("train_codec: non-finite loss in epoch " +
                           std::to_string(epoch));
      tape.backward(loss);
      adam.step();
      total += loss.item();
      ++batches;
    }
    report.epoch_mse.push_back(total / static_cast<double>(batches));
  }
  adam.zero_grad();
  report.final_mse = full_mse();
  return report;
}

// ---- frozen codes -----------------------------------------------------------------

FrozenCodec FrozenCodec::freeze(const CodeMatrix& codes, const Codebooks& books) {
  codes.validate();
  if (books.books.rows() != codes.m * codes.k)
    throw DimensionError("freeze: codebooks " + ad::shape_str(books.books.shape()) +
                         " do not hold M*K=" + std::to_string(codes.m * codes.k) +
                         " rows");
  FrozenCodec f;
  f.codes = codes;
  f.dim = books.books.cols();
  const auto v = books.books.values();
  f.books.assign(v.begin(), v.end());
  return f;
}

namespace {

void check_rows(const FrozenCodec& c, std::span<const std::size_t> rows) {
  for (std::size_t v : rows)
    if (v >= c.codes.num_items)
      throw IndexError("reconstruct: item " + std::to_string(v) + " outside [0, " +
                       std::to_string(c.codes.num_items) + ")");
}

}  // namespace

void FrozenCodec::reconstruct_rows(std::span<const std::size_t> rows,
                                   float* out) const {
  check_rows(*this, rows);
  kernels::parallel::gather_sum_rows(rows, codes.codes.data(), codes.m, codes.k,
                                     dim, books.data(), out);
}

void FrozenCodec::reconstruct_rows_serial(std::span<const std::size_t> rows,
                                          float* out) const {
  check_rows(*this, rows);
  kernels::serial::gather_sum_rows(rows, codes.codes.data(), codes.m, codes.k,
                                   dim, books.data(), out);
}

void FrozenCodec::reconstruct_table(float* out) const {
  kernels::parallel::gather_sum_table(codes.num_items, codes.codes.data(), codes.m,
                                      codes.k, dim, books.data(), out);
}

void FrozenCodec::reconstruct_table_serial(float* out) const {
  kernels::serial::gather_sum_table(codes.num_items, codes.codes.data(), codes.m,
                                    codes.k, dim, books.data(), out);
}

std::vector<std::vector<std::uint64_t>> FrozenCodec::usage() const {
  std::vector<std::vector<std::uint64_t>> counts(codes.m,
                                                 std::vector<std::uint64_t>(codes.k));
  for (std::size_t v = 0; v < codes.num_items; ++v)
    for (std::size_t i = 0; i < codes.m; ++i) ++counts[i][codes.at(v, i)];
  return counts;
}

std::size_t packed_code_bytes_per_item(std::size_t m, std::size_t k) {
  const std::size_t bits = m * static_cast<std::size_t>(std::countr_zero(k));
  return (bits + 7) / 8;
}

std::size_t FrozenCodec::storage_bytes() const {
  return kPackedHeaderBytes +
         codes.num_items * packed_code_bytes_per_item(codes.m, codes.k) +
         books.size() * sizeof(float);
}

// ---- packed format ----------------------------------------------------------------

std::vector<std::uint8_t> pack(const FrozenCodec& c) {
  c.codes.validate();
  if (!power_of_two(c.codes.k) || c.codes.k < 2)
    throw ParameterError("pack: K=" + std::to_string(c.codes.k) +
                         " must be a power of two >= 2");
  if (c.books.size() != c.codes.m * c.codes.k * c.dim)
    throw DimensionError("pack: codebook size " + std::to_string(c.books.size()) +
                         " differs from M*K*N");
  io::ByteWriter w;
  w.put_raw(kMagic, 4);
  w.put_uint<std::uint32_t>(kVersion);
  w.put_uint<std::uint64_t>(c.codes.num_items);
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(c.codes.m));
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(c.codes.k));
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(c.dim));
  w.put_u8(0);

  const std::size_t bits = static_cast<std::size_t>(std::countr_zero(c.codes.k));
  const std::size_t per_item = packed_code_bytes_per_item(c.codes.m, c.codes.k);
  std::vector<std::uint8_t> item(per_item);
  for (std::size_t v = 0; v < c.codes.num_items; ++v) {
    std::fill(item.begin(), item.end(), 0);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < c.codes.m; ++i) {
      const std::uint32_t code = c.codes.at(v, i);
      for (std::size_t b = 0; b < bits; ++b, ++pos)
        if ((code >> (bits - 1 - b)) & 1u)
          item[pos / 8] |= static_cast<std::uint8_t>(0x80u >> (pos % 8));
    }
    w.put_raw(item.data(), item.size());
  }
  for (float f : c.books) w.put_f32(f);
  return std::move(w.bytes());
}

FrozenCodec unpack(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes.data(), bytes.size());
  const std::uint8_t* magic = r.take(4);
  if (!std::equal(magic, magic + 4, kMagic))
    throw FormatError("not a packed code file: bad magic");
  const auto version = r.get_uint<std::uint32_t>();
  if (version != kVersion)
    throw FormatError("unsupported packed code version " + std::to_string(version));
  FrozenCodec c;
  c.codes.num_items = r.get_uint<std::uint64_t>();
  c.codes.m = r.get_uint<std::uint32_t>();
  c.codes.k = r.get_uint<std::uint32_t>();
  c.dim = r.get_uint<std::uint32_t>();
  const std::uint8_t dtype = r.get_u8();
  if (dtype != 0) throw FormatError("unsupported dtype tag " + std::to_string(dtype));
  if (c.codes.m == 0 || c.dim == 0 || !power_of_two(c.codes.k) || c.codes.k < 2)
    throw FormatError("packed code header has invalid M, K or N");

  const std::size_t bits = static_cast<std::size_t>(std::countr_zero(c.codes.k));
  const std::size_t per_item = packed_code_bytes_per_item(c.codes.m, c.codes.k);
  const std::size_t book_floats = c.codes.m * c.codes.k * c.dim;
  if (r.remaining() != c.codes.num_items * per_item + book_floats * sizeof(float))
    throw FormatError("packed code payload has " + std::to_string(r.remaining()) +
                      " bytes, header implies " +
                      std::to_string(c.codes.num_items * per_item +
                                     book_floats * sizeof(float)));
  c.codes.codes.resize(c.codes.num_items * c.codes.m);
  for (std::size_t v = 0; v < c.codes.num_items; ++v) {
    const std::uint8_t* item = r.take(per_item);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < c.codes.m; ++i) {
      std::uint32_t code = 0;
      for (std::size_t b = 0; b < bits; ++b, ++pos)
        code = (code << 1) | ((item[pos / 8] >> (7 - pos % 8)) & 1u);
      c.codes.codes[v * c.codes.m + i] = code;
    }
  }
  c.books.resize(book_floats);
  for (float& f : c.books) f = r.get_f32();
  return c;
}

void save_packed(const std::filesystem::path& path, const FrozenCodec& c) {
  io::write_file(path, pack(c));
}

FrozenCodec load_packed(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return unpack(bytes);
}

nlohmann::json inspect(const FrozenCodec& c, std::size_t items) {
  nlohmann::json j;
  j["format"] = "CCEC";
  j["version"] = kVersion;
  j["num_items"] = c.codes.num_items;
  j["M"] = c.codes.m;
  j["K"] = c.codes.k;
  j["N"] = c.dim;
  j["dtype"] = "f32";
  j["bits_per_code"] = std::countr_zero(c.codes.k);
  j["code_bytes_per_item"] = packed_code_bytes_per_item(c.codes.m, c.codes.k);
  j["file_bytes"] = c.storage_bytes();
  const Ratio ratio = compression_ratio(std::max<std::size_t>(c.codes.num_items, 1),
                                        c.dim, c.codes.m, c.codes.k);
  j["compression_ratio"] = ratio.value;

  nlohmann::json books = nlohmann::json::array();
  const auto counts = c.usage();
  for (std::size_t i = 0; i < c.codes.m; ++i) {
    std::size_t used = 0;
    std::uint64_t top = 0;
    double entropy = 0.0;
    for (std::uint64_t n : counts[i]) {
      if (n == 0) continue;
      ++used;
      top = std::max(top, n);
      const double p = static_cast<double>(n) / static_cast<double>(c.codes.num_items);
      entropy -= p * std::log2(p);
    }
    books.push_back({{"book", i},
                     {"codewords_used", used},
                     {"max_count", top},
                     {"entropy_bits", entropy}});
  }
  j["books"] = books;

  nlohmann::json sample = nlohmann::json::array();
  for (std::size_t v = 0; v < std::min(items, c.codes.num_items); ++v) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t i = 0; i < c.codes.m; ++i) row.push_back(c.codes.at(v, i));
    sample.push_back(row);
  }
  j["codes"] = sample;
  return j;
}

std::string usage_csv(const FrozenCodec& c) {
  std::ostringstream out;
  out << "book,codeword,count\n";
  const auto counts = c.usage();
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t k = 0; k < counts[i].size(); ++k)
      out << i << ',' << k << ',' << counts[i][k] << '\n';
  return out.str();
}

}  // namespace ccrec::codec
