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

#include "ccrec/ttd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccrec/errors.hpp"
#include "ccrec/kernels.hpp"
#include "ccrec/optim.hpp"

namespace ccrec::ttd {

namespace {

std::size_t product(const std::vector<std::size_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string list_str(const std::vector<std::size_t>& v) {
  return ad::shape_str(v);
}

}  // namespace

// ---- configuration ----------------------------------------------------------

std::size_t TTConfig::padded_rows() const { return product(row_factors); }
std::size_t TTConfig::dim() const { return product(col_factors); }

void TTConfig::validate() const {
  const std::size_t d = row_factors.size();
  if (d == 0) throw ParameterError("tt config: chain length must be >= 1");
  if (col_factors.size() != d)
    throw ParameterError("tt config: row factors " + list_str(row_factors) +
                         " and column factors " + list_str(col_factors) +
                         " differ in length");
  for (std::size_t f : row_factors)
    if (f == 0) throw ParameterError("tt config: zero row factor");
  for (std::size_t f : col_factors)
    if (f == 0) throw ParameterError("tt config: zero column factor");
  if (rank == 0) throw ParameterError("tt config: rank must be >= 1");
  if (block == 0) throw ParameterError("tt config: block factor n must be >= 1");
  if (rank % block != 0)
    throw ParameterError("tt config: block factor n=" + std::to_string(block) +
                         " does not divide rank R=" + std::to_string(rank));
  for (std::size_t k = 1; k < d; ++k)
    if (col_factors[k] % block != 0)
      throw ParameterError("tt config: block factor n=" +
                           std::to_string(block) + " does not divide J_" +
                           std::to_string(k + 1) + "=" +
                           std::to_string(col_factors[k]));
}

void TTConfig::validate_for(std::size_t num_items,
                            std::size_t embedding_dim) const {
  validate();
  if (padded_rows() < num_items)
    throw ParameterError("tt config: row factors " + list_str(row_factors) +
                         " cover " + std::to_string(padded_rows()) +
                         " rows, need " + std::to_string(num_items));
  if (dim() != embedding_dim)
    throw ParameterError("tt config: column factors " + list_str(col_factors) +
                         " multiply to " + std::to_string(dim()) +
                         ", embedding dim is " + std::to_string(embedding_dim));
}

nlohmann::json TTConfig::to_json() const {
  return {{"d", chain_length()},
          {"I", row_factors},
          {"J", col_factors},
          {"R", rank},
          {"n", block}};
}

TTConfig TTConfig::from_json(const nlohmann::json& j) {
  TTConfig c;
  c.row_factors = j.at("I").get<std::vector<std::size_t>>();
  c.col_factors = j.at("J").get<std::vector<std::size_t>>();
  c.rank = j.at("R");
  c.block = j.at("n");
  c.validate();
  return c;
}

std::vector<std::size_t> balanced_row_factors(std::size_t num_items,
                                              std::size_t d) {
  if (d == 0 || num_items == 0)
    throw ParameterError("balanced_row_factors: arguments must be positive");
  auto f = static_cast<std::size_t>(
      std::ceil(std::pow(static_cast<double>(num_items), 1.0 / static_cast<double>(d)) - 1e-9));
  f = std::max<std::size_t>(f, 1);
  std::vector<std::size_t> out(d, f);
  while (product(out) < num_items) ++out.back();
  // Shrink leading factors while coverage holds.
  for (std::size_t k = 0; k < d; ++k)
    while (out[k] > 1) {
      --out[k];
      if (product(out) < num_items) {
        ++out[k];
        break;
      }
    }
  return out;
}

std::vector<std::size_t> balanced_col_factors(std::size_t dim, std::size_t d) {
  if (d == 0 || dim == 0)
    throw ParameterError("balanced_col_factors: arguments must be positive");
  std::vector<std::size_t> primes;
  std::size_t rest = dim;
  for (std::size_t p = 2; p * p <= rest; ++p)
    while (rest % p == 0) {
      primes.push_back(p);
      rest /= p;
    }
  if (rest > 1) primes.push_back(rest);
  std::vector<std::size_t> out(d, 1);
  for (auto it = primes.rbegin(); it != primes.rend(); ++it)
    *std::min_element(out.begin(), out.end()) *= *it;
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> index_factorize(std::size_t i,
                                         std::span<const std::size_t> radices) {
  std::size_t total = 1;
  for (std::size_t r : radices) total *= r;
  if (i >= total)
    throw IndexError("index_factorize: index " + std::to_string(i) +
                     " out of range for " + std::to_string(total) + " rows");
  std::vector<std::size_t> digits(radices.size());
  for (std::size_t k = radices.size(); k-- > 0;) {
    digits[k] = i % radices[k];
    i /= radices[k];
  }
  return digits;
}

std::size_t index_compose(std::span<const std::size_t> digits,
                          std::span<const std::size_t> radices) {
  if (digits.size() != radices.size())
    throw DimensionError("index_compose: digit/radix count mismatch");
  std::size_t i = 0;
  for (std::size_t k = 0; k < digits.size(); ++k) {
    if (digits[k] >= radices[k])
      throw IndexError("index_compose: digit " + std::to_string(digits[k]) +
                       " out of range for radix " + std::to_string(radices[k]));
    i = i * radices[k] + digits[k];
  }
  return i;
}

// ---- autodiff STP ----------------------------------------------------------------

ad::Tensor stp(const ad::Tensor& a, const ad::Tensor& b, std::size_t n) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("stp: expected matrices, got " +
                         ad::shape_str(a.shape()) + " and " +
                         ad::shape_str(b.shape()));
  const std::size_t h = a.rows(), p = b.rows(), q = b.cols();
  if (n == 0 || a.cols() != n * p)
    throw DimensionError("stp: left width " + std::to_string(a.cols()) +
                         " is not n*P with n=" + std::to_string(n) +
                         ", P=" + std::to_string(p));
  std::vector<double> c(h * n * q);
  kernels::serial::stp(h, p, q, n, a.values().data(), b.values().data(),
                       c.data());
  // Backward reuses the forward definition:
  //   dA[h, i·n + r] = Σ_q dC[h, q·n + r]·B[i, q]
  //   dB[i, q]       = Σ_{h,r} A[h, i·n + r]·dC[h, q·n + r]
  auto node = std::make_shared<ad::Node>();
  ad::Tensor out(node);
  node->shape = {h, n * q};
  node->value = std::move(c);
  ad::Tape* tape = ad::Tape::active();
  if (tape && (a.requires_grad() || b.requires_grad())) {
    node->requires_grad = true;
    node->inputs = {a.node(), b.node()};
    node->backward = [h, p, q, n](ad::Node& self) {
      ad::Node& A = *self.inputs[0];
      ad::Node& B = *self.inputs[1];
      if (A.requires_grad) A.ensure_grad();
      if (B.requires_grad) B.ensure_grad();
      for (std::size_t hh = 0; hh < h; ++hh)
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t qq = 0; qq < q; ++qq)
            for (std::size_t r = 0; r < n; ++r) {
              const double g = self.grad[hh * n * q + qq * n + r];
              const std::size_t ai = hh * n * p + i * n + r;
              if (A.requires_grad) A.grad[ai] += g * B.value[i * q + qq];
              if (B.requires_grad) B.grad[i * q + qq] += g * A.value[ai];
            }
    };
    tape->record(node);
  }
  return out;
}

ad::Tensor unfold_blocks(const ad::Tensor& c, std::size_t j_blocks,
                         std::size_t rank, std::size_t n) {
  if (c.rank() != 2 || c.cols() != j_blocks * rank * n)
    throw DimensionError("unfold_blocks: width " + std::to_string(c.cols()) +
                         " != J'*R*n = " + std::to_string(j_blocks * rank * n));
  const std::size_t h = c.rows();
  const std::size_t out_rows = h * j_blocks * n;
  // perm[dst] = src
  std::vector<std::size_t> perm(out_rows * rank);
  for (std::size_t hh = 0; hh < h; ++hh)
    for (std::size_t jb = 0; jb < j_blocks; ++jb)
      for (std::size_t ro = 0; ro < rank; ++ro)
        for (std::size_t r = 0; r < n; ++r) {
          const std::size_t src = hh * c.cols() + (jb * rank + ro) * n + r;
          const std::size_t dst = ((hh * j_blocks + jb) * n + r) * rank + ro;
          perm[dst] = src;
        }
  const auto v = c.values();
  std::vector<double> y(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) y[i] = v[perm[i]];
  auto node = std::make_shared<ad::Node>();
  ad::Tensor out(node);
  node->shape = {out_rows, rank};
  node->value = std::move(y);
  ad::Tape* tape = ad::Tape::active();
  if (tape && c.requires_grad()) {
    node->requires_grad = true;
    node->inputs = {c.node()};
    node->backward = [perm = std::move(perm)](ad::Node& self) {
      ad::Node& in = *self.inputs[0];
      in.ensure_grad();
      for (std::size_t i = 0; i < perm.size(); ++i)
        in.grad[perm[i]] += self.grad[i];
    };
    tape->record(node);
  }
  return out;
}

// ---- standard TT -------------------------------------------------------------

TTCores TTCores::random(const TTConfig& config, double stddev,
                        std::mt19937_64& rng) {
  TTCores t;
  t.config = config;
  t.config.block = 1;
  t.config.validate();
  const std::size_t d = config.chain_length();
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t r_in = k == 0 ? 1 : config.rank;
    const std::size_t r_out = k + 1 == d ? 1 : config.rank;
    t.cores.push_back(ad::Tensor::normal(
        {config.row_factors[k], r_in * config.col_factors[k] * r_out}, stddev,
        rng));
  }
  return t;
}

std::vector<double> tt_gather_row(std::size_t i, const TTCores& t) {
  const TTConfig& c = t.config;
  const auto digits = index_factorize(i, c.row_factors);
  const std::size_t d = c.chain_length();
  std::size_t h = c.col_factors[0];
  std::size_t r = d == 1 ? 1 : c.rank;
  const auto first = t.cores[0].values();
  std::vector<double> state(first.begin() + digits[0] * h * r,
                            first.begin() + (digits[0] + 1) * h * r);
  for (std::size_t k = 1; k < d; ++k) {
    const std::size_t jk = c.col_factors[k];
    const std::size_t r_out = k + 1 == d ? 1 : c.rank;
    const std::size_t width = jk * r_out;
    const double* slice = t.cores[k].values().data() + digits[k] * r * width;
    std::vector<double> next(h * width);
    kernels::serial::matmul_nn(h, width, r, state.data(), slice, next.data());
    state = std::move(next);
    h *= jk;
    r = r_out;
  }
  return state;
}

// ---- STTD ------------------------------------------------------------------------

std::pair<std::size_t, std::size_t> slice_shape(const TTConfig& c,
                                                std::size_t k) {
  const std::size_t d = c.chain_length();
  const std::size_t n = c.block, rank = c.rank;
  if (d == 1) return {c.col_factors[0], 1};
  if (k == 0) return {c.col_factors[0], rank};
  if (k + 1 < d) return {rank / n, (c.col_factors[k] / n) * rank};
  return {rank / n, c.col_factors[k] / n};
}

STTDCores STTDCores::zeros(const TTConfig& config) {
  config.validate();
  STTDCores s;
  s.config = config;
  for (std::size_t k = 0; k < config.chain_length(); ++k) {
    const auto [r, cols] = slice_shape(config, k);
    s.cores.push_back(ad::Tensor::zeros({config.row_factors[k], r * cols}));
  }
  return s;
}

STTDCores STTDCores::uniform(const TTConfig& config, double half_width,
                             std::mt19937_64& rng) {
  config.validate();
  STTDCores s;
  s.config = config;
  for (std::size_t k = 0; k < config.chain_length(); ++k) {
    const auto [r, cols] = slice_shape(config, k);
    s.cores.push_back(ad::Tensor::uniform({config.row_factors[k], r * cols},
                                          -half_width, half_width, rng));
  }
  return s;
}

std::size_t STTDCores::parameter_count() const {
  std::size_t n = 0;
  for (const auto& c : cores) n += c.numel();
  return n;
}

ParamList STTDCores::named() const {
  ParamList out;
  for (std::size_t k = 0; k < cores.size(); ++k)
    out.push_back({"sttd.core" + std::to_string(k), cores[k]});
  return out;
}

STTDCores STTDCores::from_checkpoint(const Checkpoint& ck) {
  if (!ck.sections.contains("tt_config"))
    throw FormatError("checkpoint lacks a tt_config section");
  STTDCores s = zeros(TTConfig::from_json(ck.sections["tt_config"]));
  assign_params(s.named(), ck);
  return s;
}

std::vector<double> sttd_gather_row(std::size_t i, const STTDCores& s) {
  const TTConfig& c = s.config;
  const auto digits = index_factorize(i, c.row_factors);
  const std::size_t d = c.chain_length();
  const std::size_t n = c.block;
  auto slice = [&](std::size_t k) {
    const auto [r, cols] = slice_shape(c, k);
    return s.cores[k].values().data() + digits[k] * r * cols;
  };
  const auto [h0, w0] = slice_shape(c, 0);
  std::vector<double> state(slice(0), slice(0) + h0 * w0);
  std::size_t h = h0;
  for (std::size_t k = 1; k < d; ++k) {
    const auto [p, q] = slice_shape(c, k);
    std::vector<double> prod(h * n * q);
    kernels::serial::stp(h, p, q, n, state.data(), slice(k), prod.data());
    if (k + 1 == d) {
      state = std::move(prod);
      break;
    }
    // Regroup (h, j', r_out, r) -> rows (h, j', r), columns r_out.
    const std::size_t jb = c.col_factors[k] / n;
    std::vector<double> next(prod.size());
    for (std::size_t hh = 0; hh < h; ++hh)
      for (std::size_t j = 0; j < jb; ++j)
        for (std::size_t ro = 0; ro < c.rank; ++ro)
          for (std::size_t r = 0; r < n; ++r)
            next[((hh * jb + j) * n + r) * c.rank + ro] =
                prod[hh * n * q + (j * c.rank + ro) * n + r];
    state = std::move(next);
    h *= c.col_factors[k];
  }
  return state;
}

ad::Tensor sttd_rows(const STTDCores& s, std::span<const std::size_t> rows) {
  const TTConfig& c = s.config;
  const std::size_t d = c.chain_length();
  const std::size_t n = c.block;
  std::vector<ad::Tensor> out;
  out.reserve(rows.size());
  for (std::size_t i : rows) {
    const auto digits = index_factorize(i, c.row_factors);
    auto slice = [&](std::size_t k) {
      const auto [r, cols] = slice_shape(c, k);
      const std::size_t idx[1] = {digits[k]};
      return ad::reshape(ad::gather_rows(s.cores[k], idx), {r, cols});
    };
    ad::Tensor state = slice(0);
    for (std::size_t k = 1; k < d; ++k) {
      ad::Tensor prod = stp(state, slice(k), n);
      state = k + 1 == d
                  ? prod
                  : unfold_blocks(prod, c.col_factors[k] / n, c.rank, n);
    }
    out.push_back(ad::reshape(state, {1, c.dim()}));
  }
  return out.size() == 1 ? out.front() : ad::concat_rows(out);
}

double sttd_rate(const TTConfig& c, bool exclude_first_from_sum) {
  c.validate();
  const std::size_t d = c.chain_length();
  const double rank = static_cast<double>(c.rank);
  const double n = static_cast<double>(c.block);
  auto ij = [&](std::size_t k) {
    return static_cast<double>(c.row_factors[k]) *
           static_cast<double>(c.col_factors[k]);
  };
  double numerator = 1.0;
  for (std::size_t k = 0; k < d; ++k) numerator *= ij(k);
  double denominator = ij(0) * rank;
  for (std::size_t k = exclude_first_from_sum ? 1 : 0; k + 1 < d; ++k)
    denominator += ij(k) * rank * rank / (n * n);
  denominator += ij(d - 1) * rank / (n * n);
  return numerator / denominator;
}

STTDCores fit_cores(std::span<const double> table, std::size_t num_items,
                    const TTConfig& config, const FitOptions& options,
                    double* final_mse) {
  const std::size_t dim = config.dim();
  config.validate_for(num_items, dim);
  if (table.size() != num_items * dim)
    throw DimensionError("fit_cores: table holds " +
                         std::to_string(table.size()) + " values, expected " +
                         std::to_string(num_items * dim));
  const std::size_t rows = config.padded_rows();

  // Scale the init so the reconstruction variance matches the table's.
  double var = 0.0;
  for (double v : table) var += v * v;
  var = table.empty() ? 1.0 : std::max(var / static_cast<double>(table.size()), 1e-12);
  const std::size_t d = config.chain_length();
  const double contractions =
      std::pow(static_cast<double>(config.rank / config.block),
               static_cast<double>(d - 1));
  const double core_var = std::pow(var / contractions, 1.0 / static_cast<double>(d));
  std::mt19937_64 rng(options.seed);
  STTDCores cores = STTDCores::uniform(config, std::sqrt(3.0 * core_var), rng);
  for (auto& t : cores.cores) t.requires_grad(true);

  auto mse_of = [&](std::span<const std::size_t> batch) {
    ad::Tensor recon = sttd_rows(cores, batch);
    std::vector<double> target(batch.size() * dim, 0.0);
    for (std::size_t b = 0; b < batch.size(); ++b)
      if (batch[b] < num_items)
        std::copy_n(table.data() + batch[b] * dim, dim,
                    target.data() + b * dim);
    ad::Tensor diff =
        ad::sub(recon, ad::Tensor::from({batch.size(), dim}, std::move(target)));
    return ad::scale(ad::sum(ad::mul(diff, diff)),
                     1.0 / static_cast<double>(batch.size()));
  };

  ad::AdamOptions opt;
  opt.lr = options.lr;
  opt.weight_decay = 0.0;
  ad::Adam adam(cores.cores, opt);
  std::vector<std::size_t> all(rows);
  std::iota(all.begin(), all.end(), 0);
  const std::size_t batch = std::min(options.batch_rows, rows);
  std::uniform_int_distribution<std::size_t> pick(0, rows - 1);
  std::vector<std::size_t> idx(batch);
  for (std::size_t step = 0; step < options.steps; ++step) {
    if (batch == rows) {
      idx = all;
    } else {
      for (auto& i : idx) i = pick(rng);
    }
    adam.zero_grad();
    ad::Tape tape;
    ad::Tensor loss = mse_of(idx);
    tape.backward(loss);
    adam.step();
  }
  adam.zero_grad();
  if (final_mse) {
    ad::NoGradGuard g;
    // Probe a prefix when the table is large.
  const std::size_t probe = std::min<std::size_t>(rows, 4096);
    *final_mse = mse_of(std::span<const std::size_t>(all).first(probe)).item();
  }
  return cores;
}

// ---- frozen single-precision path -----------------------------------------------

FrozenSTTD FrozenSTTD::freeze(const STTDCores& c) {
  FrozenSTTD f;
  f.config = c.config;
  for (const auto& t : c.cores) {
    std::vector<float> v(t.numel());
    const auto src = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(src[i]);
    f.cores.push_back(std::move(v));
  }
  return f;
}

std::size_t FrozenSTTD::parameter_count() const {
  std::size_t n = 0;
  for (const auto& c : cores) n += c.size();
  return n;
}

namespace {

// One row through the chain. Middle steps fuse the STP with the regrouping:
// for fixed (h, r) the contraction over P is a vector-matrix product whose
// output rows (h, j', r) are contiguous runs of R values.
void sttd_row_f32(const FrozenSTTD& f, std::size_t item, float* out,
                  std::vector<float>& buf_a, std::vector<float>& buf_b) {
  const TTConfig& c = f.config;
  const std::size_t d = c.chain_length();
  const std::size_t n = c.block;
  const std::size_t rank = c.rank;
  std::size_t digits[16];
  {
    std::size_t i = item;
    for (std::size_t k = d; k-- > 0;) {
      digits[k] = i % c.row_factors[k];
      i /= c.row_factors[k];
    }
  }
  const auto [h0, w0] = slice_shape(c, 0);
  const float* first = f.cores[0].data() + digits[0] * h0 * w0;
  if (d == 1) {
    std::copy_n(first, h0 * w0, out);
    return;
  }
  const float* state = first;
  std::size_t h = h0;
  const std::size_t p = rank / n;
  for (std::size_t k = 1; k + 1 < d; ++k) {
    const std::size_t jb = c.col_factors[k] / n;
    const std::size_t q = jb * rank;
    const float* b = f.cores[k].data() + digits[k] * p * q;
    const std::size_t out_rows = h * jb * n;
    buf_a.assign(out_rows * rank, 0.0f);
    for (std::size_t hh = 0; hh < h; ++hh)
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < p; ++i) {
          const float a = state[hh * rank + i * n + r];
          const float* bi = b + i * q;
          for (std::size_t j = 0; j < jb; ++j) {
            float* dst = buf_a.data() + ((hh * jb + j) * n + r) * rank;
            const float* src = bi + j * rank;
#pragma omp simd
            for (std::size_t ro = 0; ro < rank; ++ro) dst[ro] += a * src[ro];
          }
        }
    std::swap(buf_a, buf_b);
    state = buf_b.data();
    h = out_rows;
  }
  const std::size_t jb = c.col_factors[d - 1] / n;
  const float* b = f.cores[d - 1].data() + digits[d - 1] * p * jb;
  kernels::serial::stp(h, p, jb, n, state, b, out);
}

}  // namespace

void FrozenSTTD::reconstruct_rows_serial(std::span<const std::size_t> rows,
                                         float* out) const {
  const std::size_t dim = config.dim();
  std::vector<float> a, b;
  for (std::size_t r = 0; r < rows.size(); ++r)
    sttd_row_f32(*this, rows[r], out + r * dim, a, b);
}

void FrozenSTTD::reconstruct_rows(std::span<const std::size_t> rows,
                                  float* out) const {
  const std::size_t dim = config.dim();
  const std::int64_t count = static_cast<std::int64_t>(rows.size());
#pragma omp parallel if (rows.size() > 64)
  {
    std::vector<float> a, b;
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < count; ++r)
      sttd_row_f32(*this, rows[static_cast<std::size_t>(r)],
                   out + static_cast<std::size_t>(r) * dim, a, b);
  }
}

}  // namespace ccrec::ttd
