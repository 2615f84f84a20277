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

#include "ccrec/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "ccrec/errors.hpp"
#include "ccrec/kernels.hpp"

namespace ccrec::model {

namespace {

constexpr double kInit = 0.1;
constexpr double kNormEps = 1e-8;
constexpr double kProbFloor = 1e-8;

ad::Tensor param(ad::Shape s, std::mt19937_64& rng) {
  ad::Tensor t = ad::Tensor::uniform(std::move(s), -kInit, kInit, rng);
  t.requires_grad(true);
  return t;
}

ad::Tensor constant_param(ad::Shape s, double v) {
  ad::Tensor t = ad::Tensor::full(std::move(s), v);
  t.requires_grad(true);
  return t;
}

}  // namespace

// ---- config ---------------------------------------------------------------------

void EncoderConfig::validate() const {
  if (dim == 0) throw ParameterError("encoder: dim must be >= 1");
  if (heads == 0 || dim % heads != 0)
    throw ParameterError("encoder: " + std::to_string(heads) +
                         " heads do not divide dim " + std::to_string(dim));
  if (max_len == 0) throw ParameterError("encoder: max_len must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ParameterError("encoder: dropout must lie in [0, 1)");
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"N", dim},
          {"heads", heads},
          {"max_len", max_len},
          {"dropout", dropout},
          {"layer_norm", layer_norm},
          {"categorical_loss", categorical_loss}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.dim = j.at("N");
  c.heads = j.at("heads");
  c.max_len = j.at("max_len");
  c.dropout = j.at("dropout");
  c.layer_norm = j.value("layer_norm", true);
  c.categorical_loss = j.value("categorical_loss", false);
  c.validate();
  return c;
}

// ---- parameters -------------------------------------------------------------------

EncoderParams EncoderParams::create(const EncoderConfig& c, std::mt19937_64& rng) {
  c.validate();
  const std::size_t n = c.dim, dh = c.dim / c.heads;
  EncoderParams p;
  p.position = param({c.max_len, n}, rng);
  for (std::size_t h = 0; h < c.heads; ++h) {
    p.wq.push_back(param({n, dh}, rng));
    p.wk.push_back(param({n, dh}, rng));
    p.wv.push_back(param({n, dh}, rng));
  }
  p.wo = param({n, n}, rng);
  p.ln1_gain = constant_param({1, n}, 1.0);
  p.ln1_bias = constant_param({1, n}, 0.0);
  p.ffn_w1 = param({n, n}, rng);
  p.ffn_b1 = param({1, n}, rng);
  p.ffn_w2 = param({n, n}, rng);
  p.ffn_b2 = param({1, n}, rng);
  p.ln2_gain = constant_param({1, n}, 1.0);
  p.ln2_bias = constant_param({1, n}, 0.0);
  p.pool_w1 = param({n, n}, rng);
  p.pool_w2 = param({n, n}, rng);
  p.pool_c = param({1, n}, rng);
  p.pool_f = param({n, 1}, rng);
  return p;
}

ParamList EncoderParams::named(const std::string& prefix) const {
  ParamList out = {{prefix + "position", position}};
  for (std::size_t h = 0; h < wq.size(); ++h) {
    const std::string s = std::to_string(h);
    out.push_back({prefix + "attn.q." + s, wq[h]});
    out.push_back({prefix + "attn.k." + s, wk[h]});
    out.push_back({prefix + "attn.v." + s, wv[h]});
  }
  out.insert(out.end(), {{prefix + "attn.o", wo},
                         {prefix + "ln1.gain", ln1_gain},
                         {prefix + "ln1.bias", ln1_bias},
                         {prefix + "ffn.w1", ffn_w1},
                         {prefix + "ffn.b1", ffn_b1},
                         {prefix + "ffn.w2", ffn_w2},
                         {prefix + "ffn.b2", ffn_b2},
                         {prefix + "ln2.gain", ln2_gain},
                         {prefix + "ln2.bias", ln2_bias},
                         {prefix + "pool.w1", pool_w1},
                         {prefix + "pool.w2", pool_w2},
                         {prefix + "pool.c", pool_c},
                         {prefix + "pool.f", pool_f}});
  return out;
}

std::vector<ad::Tensor> EncoderParams::tensors() const {
  std::vector<ad::Tensor> out;
  for (const auto& nt : named("")) out.push_back(nt.tensor);
  return out;
}

// ---- forward ----------------------------------------------------------------------

ad::Tensor embed(const EncoderParams& p, const EncoderConfig& c,
                 const ad::Tensor& table, const SessionList& sessions,
                 std::vector<std::size_t>* lengths) {
  if (sessions.empty()) throw ContractError("encode: no sessions");
  std::vector<std::size_t> items, positions;
  for (const auto& s : sessions) {
    if (s.empty()) throw ContractError("encode: empty session");
    if (s.size() > c.max_len)
      throw DimensionError("encode: session of length " +
                           std::to_string(s.size()) + " exceeds max_len " +
                           std::to_string(c.max_len));
    for (std::size_t t = 0; t < s.size(); ++t) {
      items.push_back(s[t]);
      positions.push_back(c.max_len - s.size() + t);
    }
    if (lengths) lengths->push_back(s.size());
  }
  return ad::add(ad::gather_rows(table, items),
                 ad::gather_rows(p.position, positions));
}

ad::Tensor self_attention(const EncoderParams& p, const EncoderConfig& c,
                          const ad::Tensor& x, std::span<const std::size_t> lengths) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.dim / c.heads));
  std::vector<ad::Tensor> heads;
  for (std::size_t h = 0; h < c.heads; ++h)
    heads.push_back(ad::segment_causal_attention(
        ad::matmul(x, p.wq[h]), ad::matmul(x, p.wk[h]), ad::matmul(x, p.wv[h]),
        lengths, scale));
  ad::Tensor cat = heads.size() == 1 ? heads.front() : ad::concat_cols(heads);
  return ad::matmul(cat, p.wo);
}

Encoded encode(const EncoderParams& p, const EncoderConfig& c,
               const ad::Tensor& table, const SessionList& sessions,
               bool training, std::mt19937_64& rng) {
  Encoded out;
  ad::Tensor x = embed(p, c, table, sessions, &out.lengths);
  std::size_t off = 0;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    out.offsets.push_back(off);
    off += out.lengths[s];
    out.items.insert(out.items.end(), sessions[s].begin(), sessions[s].end());
  }
  x = ad::dropout(x, c.dropout, training, rng);
  ad::Tensor f = ad::add(
      x, ad::dropout(self_attention(p, c, x, out.lengths), c.dropout, training, rng));
  if (c.layer_norm) f = ad::layer_norm_rows(f, p.ln1_gain, p.ln1_bias, kNormEps);
  ad::Tensor hidden = ad::relu(ad::add(ad::matmul(f, p.ffn_w1), p.ffn_b1));
  ad::Tensor ffn = ad::add(ad::matmul(hidden, p.ffn_w2), p.ffn_b2);
  ad::Tensor theta = ad::add(f, ad::dropout(ffn, c.dropout, training, rng));
  if (c.layer_norm)
    theta = ad::layer_norm_rows(theta, p.ln2_gain, p.ln2_bias, kNormEps);
  out.reps = theta;
  return out;
}

Pooled pool_groups(const EncoderParams& p, const ad::Tensor& reps,
                   const std::vector<std::vector<std::size_t>>& groups,
                   bool allow_empty) {
  std::vector<std::size_t> rows, lens, owner;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty() && !allow_empty)
      throw ContractError("pool: zero-length session");
    rows.insert(rows.end(), groups[g].begin(), groups[g].end());
    lens.push_back(groups[g].size());
    owner.insert(owner.end(), groups[g].size(), g);
  }
  if (groups.empty()) throw ContractError("pool: no groups");
  Pooled out;
  if (rows.empty()) {
    out.theta = ad::Tensor::zeros({groups.size(), reps.cols()});
    return out;
  }
  ad::Tensor x = ad::gather_rows(reps, rows);
  ad::Tensor mean = ad::segment_sum(x, lens, /*mean=*/true);
  ad::Tensor pre = ad::add(
      ad::add(ad::gather_rows(ad::matmul_nt(mean, p.pool_w1), owner),
              ad::matmul_nt(x, p.pool_w2)),
      p.pool_c);
  out.alpha = ad::matmul(ad::sigmoid(pre), p.pool_f);
  out.theta = ad::segment_sum(ad::scale_rows(x, out.alpha), lens);
  return out;
}

Pooled pool_sessions(const EncoderParams& p, const Encoded& enc) {
  std::vector<std::vector<std::size_t>> groups(enc.lengths.size());
  for (std::size_t s = 0; s < groups.size(); ++s)
    for (std::size_t t = 0; t < enc.lengths[s]; ++t)
      groups[s].push_back(enc.offsets[s] + t);
  return pool_groups(p, enc.reps, groups);
}

ad::Tensor logits(const ad::Tensor& theta, const ad::Tensor& table) {
  return ad::matmul_nt(theta, table);
}

ad::Tensor score(const ad::Tensor& theta, const ad::Tensor& table) {
  return ad::softmax_rows(logits(theta, table));
}

ad::Tensor rec_loss(const ad::Tensor& probs, std::span<const std::uint32_t> labels) {
  if (probs.rank() != 2 || probs.rows() != labels.size())
    throw DimensionError("rec_loss: " + ad::shape_str(probs.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  const std::size_t b = probs.rows(), v = probs.cols();
  std::vector<double> y(b * v, 0.0), not_y(b * v, 1.0);
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] >= v)
      throw IndexError("rec_loss: label " + std::to_string(labels[i]) +
                       " out of range for " + std::to_string(v) + " items");
    y[i * v + labels[i]] = 1.0;
    not_y[i * v + labels[i]] = 0.0;
  }
  ad::Tensor cp = ad::clamp(probs, kProbFloor, 1.0 - kProbFloor);
  ad::Tensor pos = ad::mul(ad::Tensor::from({b, v}, std::move(y)), ad::log(cp));
  ad::Tensor neg = ad::mul(ad::Tensor::from({b, v}, std::move(not_y)),
                           ad::log(ad::add_scalar(ad::neg(cp), 1.0)));
  return ad::scale(ad::add(ad::sum(pos), ad::sum(neg)),
                   -1.0 / static_cast<double>(b));
}

ad::Tensor rec_loss_from_logits(const ad::Tensor& z,
                                std::span<const std::uint32_t> labels,
                                bool categorical) {
  if (categorical) {
    std::vector<std::size_t> l(labels.begin(), labels.end());
    return ad::softmax_cross_entropy(z, l);
  }
  return rec_loss(ad::softmax_rows(z), labels);
}

// ---- frozen path ----------------------------------------------------------------

namespace {

std::vector<float> to_float(const ad::Tensor& t) {
  const auto v = t.values();
  return {v.begin(), v.end()};
}

void layer_norm_f32(float* x, std::size_t rows, std::size_t n, const float* g,
                    const float* b) {
  for (std::size_t i = 0; i < rows; ++i) {
    float* r = x + i * n;
    double mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += r[j];
    mu /= static_cast<double>(n);
    double var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (r[j] - mu) * (r[j] - mu);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kNormEps);
    for (std::size_t j = 0; j < n; ++j)
      r[j] = static_cast<float>(g[j] * (r[j] - mu) * inv + b[j]);
  }
}

}  // namespace

FrozenEncoder FrozenEncoder::freeze(const EncoderParams& p, const EncoderConfig& c) {
  FrozenEncoder f;
  f.config = c;
  f.position = to_float(p.position);
  for (std::size_t h = 0; h < p.wq.size(); ++h) {
    f.wq.push_back(to_float(p.wq[h]));
    f.wk.push_back(to_float(p.wk[h]));
    f.wv.push_back(to_float(p.wv[h]));
  }
  f.wo = to_float(p.wo);
  f.ln1_gain = to_float(p.ln1_gain);
  f.ln1_bias = to_float(p.ln1_bias);
  f.ffn_w1 = to_float(p.ffn_w1);
  f.ffn_b1 = to_float(p.ffn_b1);
  f.ffn_w2 = to_float(p.ffn_w2);
  f.ffn_b2 = to_float(p.ffn_b2);
  f.ln2_gain = to_float(p.ln2_gain);
  f.ln2_bias = to_float(p.ln2_bias);
  f.pool_w1 = to_float(p.pool_w1);
  f.pool_w2 = to_float(p.pool_w2);
  f.pool_c = to_float(p.pool_c);
  f.pool_f = to_float(p.pool_f);
  return f;
}

void FrozenEncoder::session_reps(const float* item_rows,
                                 std::span<const std::size_t> lengths,
                                 float* theta) const {
  namespace kr = kernels::serial;
  const std::size_t n = config.dim, heads = config.heads, dh = n / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  std::vector<float> x, q, k, v, cat, f, hidden, ffn, mean(n), pre1(n), pre2(n),
      scores;
  std::size_t row0 = 0;
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    const std::size_t l = lengths[s];
    if (l == 0) throw ContractError("session_reps: empty session");
    if (l > config.max_len) throw DimensionError("session_reps: session exceeds max_len");
    x.assign(item_rows + row0 * n, item_rows + (row0 + l) * n);
    for (std::size_t t = 0; t < l; ++t) {
      const float* pos = position.data() + (config.max_len - l + t) * n;
      for (std::size_t j = 0; j < n; ++j) x[t * n + j] += pos[j];
    }
    cat.assign(l * n, 0.0f);
    q.resize(l * dh);
    k.resize(l * dh);
    v.resize(l * dh);
    scores.resize(l);
    for (std::size_t h = 0; h < heads; ++h) {
      kr::matmul_nn(l, dh, n, x.data(), wq[h].data(), q.data());
      kr::matmul_nn(l, dh, n, x.data(), wk[h].data(), k.data());
      kr::matmul_nn(l, dh, n, x.data(), wv[h].data(), v.data());
      for (std::size_t t = 0; t < l; ++t) {
        float mx = -1e30f;
        for (std::size_t u = 0; u <= t; ++u) {
          float dot = 0;
          for (std::size_t j = 0; j < dh; ++j) dot += q[t * dh + j] * k[u * dh + j];
          scores[u] = scale * dot;
          mx = std::max(mx, scores[u]);
        }
        float total = 0;
        for (std::size_t u = 0; u <= t; ++u) total += scores[u] = std::exp(scores[u] - mx);
        for (std::size_t u = 0; u <= t; ++u) {
          const float w = scores[u] / total;
          for (std::size_t j = 0; j < dh; ++j)
            cat[t * n + h * dh + j] += w * v[u * dh + j];
        }
      }
    }
    f.resize(l * n);
    kr::matmul_nn(l, n, n, cat.data(), wo.data(), f.data());
    for (std::size_t i = 0; i < l * n; ++i) f[i] += x[i];
    if (config.layer_norm) layer_norm_f32(f.data(), l, n, ln1_gain.data(), ln1_bias.data());
    hidden.resize(l * n);
    kr::matmul_nn(l, n, n, f.data(), ffn_w1.data(), hidden.data());
    for (std::size_t t = 0; t < l; ++t)
      for (std::size_t j = 0; j < n; ++j)
        hidden[t * n + j] = std::max(0.0f, hidden[t * n + j] + ffn_b1[j]);
    ffn.resize(l * n);
    kr::matmul_nn(l, n, n, hidden.data(), ffn_w2.data(), ffn.data());
    for (std::size_t t = 0; t < l; ++t)
      for (std::size_t j = 0; j < n; ++j) f[t * n + j] += ffn[t * n + j] + ffn_b2[j];
    if (config.layer_norm) layer_norm_f32(f.data(), l, n, ln2_gain.data(), ln2_bias.data());

    // Soft-attention pooling.
    std::fill(mean.begin(), mean.end(), 0.0f);
    for (std::size_t t = 0; t < l; ++t)
      for (std::size_t j = 0; j < n; ++j) mean[j] += f[t * n + j] / static_cast<float>(l);
    kr::matmul_nt(1, n, n, mean.data(), pool_w1.data(), pre1.data());
    float* out = theta + s * n;
    std::fill(out, out + n, 0.0f);
    for (std::size_t t = 0; t < l; ++t) {
      kr::matmul_nt(1, n, n, f.data() + t * n, pool_w2.data(), pre2.data());
      float alpha = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const float z = pre1[j] + pre2[j] + pool_c[j];
        alpha += pool_f[j] / (1.0f + std::exp(-z));
      }
      for (std::size_t j = 0; j < n; ++j) out[j] += alpha * f[t * n + j];
    }
    row0 += l;
  }
}

}  // namespace ccrec::model
