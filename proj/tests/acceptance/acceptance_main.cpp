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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. The pipeline criteria drive the ccrec command-line tool.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccrec/binary_io.hpp"
#include "ccrec/checkpoint.hpp"
#include "ccrec/codec.hpp"
#include "ccrec/distill.hpp"
#include "ccrec/eval.hpp"
#include "ccrec/ratio_check.hpp"
#include "ccrec/tensor.hpp"
#include "ccrec/ttd.hpp"
#include "distill_fixtures.hpp"
#include "gradcheck.hpp"
#include "json.hpp"
#include "op_cases.hpp"

namespace ccrec::acceptance {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Settings {
  fs::path work;
  std::string cli;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1: compression ratios ---------------------------------------------------------

Outcome ratios(const Settings&) {
  const codec::RatioCheck r = codec::check_ratios();
  std::string d = std::to_string(r.matches()) + "/" + std::to_string(r.rows.size()) +
                  " rows match";
  for (const auto& row : r.rows) {
    if (row.matches()) continue;
    d += "; M=" + std::to_string(row.reference.m) + " K=" + std::to_string(row.reference.k) +
         " size " + std::to_string(row.computed.compressed) + " (listed " +
         std::to_string(row.reference.size) + "), floor " +
         std::to_string(row.computed.floor) + " (listed " +
         std::to_string(row.reference.floor) + ")";
  }
  return {r.all_match(), d};
}

// ---- 2: gradients ------------------------------------------------------------------

ad::Tensor param(ad::Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return testing::param(std::move(s), rng, lo, hi);
}

// Codec and distillation losses on top of the primitive operations.
std::vector<testing::OpCase> model_op_cases() {
  using testing::dim;
  using testing::OpInstance;
  using testing::weighted;
  using V = std::vector<ad::Tensor>;
  std::vector<testing::OpCase> cases;
  cases.push_back({"code_probs", [](std::mt19937_64& rng) {
                     codec::CodecConfig c;
                     c.m = dim(rng, 1, 3);
                     c.k = std::size_t{1} << dim(rng, 1, 2);
                     c.dim = dim(rng, 2, 4);
                     c.per_book_heads = dim(rng, 0, 1) == 1;
                     c.input_scale = 1.5;
                     const codec::CodeMLP mlp = codec::CodeMLP::create(c, rng);
                     const std::size_t b = dim(rng, 1, 3);
                     V inputs{param({b, c.dim}, rng), mlp.theta, mlp.bias};
                     for (const auto& t : mlp.theta2) inputs.push_back(t);
                     for (const auto& t : mlp.bias2) inputs.push_back(t);
                     for (auto& t : inputs) t.requires_grad(true);
                     const std::size_t heads = mlp.theta2.size();
                     return OpInstance{
                         weighted([c, heads](const V& in) {
                           codec::CodeMLP m{in[1], in[2], {}, {}};
                           for (std::size_t h = 0; h < heads; ++h) {
                             m.theta2.push_back(in[3 + h]);
                             m.bias2.push_back(in[3 + heads + h]);
                           }
                           return codec::code_probs(in[0], m, c);
                         }, {b, c.mk()}, rng),
                         inputs};
                   }});
  cases.push_back({"gumbel_softmax", [](std::mt19937_64& rng) {
                     const std::size_t b = dim(rng, 1, 3), k = dim(rng, 2, 4),
                                       m = dim(rng, 1, 3);
                     const std::uint64_t seed = rng();
                     return OpInstance{
                         weighted([k, seed](const V& in) {
                           std::mt19937_64 noise(seed);
                           return codec::gumbel_softmax(in[0], k, 0.7, &noise);
                         }, {b, m * k}, rng),
                         {param({b, m * k}, rng, 0.05, 1.0)}};
                   }});
  cases.push_back({"compose_soft", [](std::mt19937_64& rng) {
                     const std::size_t b = dim(rng, 1, 3), mk = dim(rng, 2, 6),
                                       n = dim(rng, 1, 4);
                     return OpInstance{
                         weighted([](const V& in) {
                           return codec::compose_soft(in[0], codec::Codebooks{in[1]});
                         }, {b, n}, rng),
                         {param({b, mk}, rng), param({mk, n}, rng)}};
                   }});
  cases.push_back({"mixup", [](std::mt19937_64& rng) {
                     const std::size_t b = dim(rng, 1, 3), n = dim(rng, 1, 4);
                     return OpInstance{
                         weighted([](const V& in) { return codec::mixup(in[0], in[1], 0.8); },
                                  {b, n}, rng),
                         {param({b, n}, rng), param({b, n}, rng)}};
                   }});
  cases.push_back({"mse_loss", [](std::mt19937_64& rng) {
                     const std::size_t b = dim(rng, 1, 4), n = dim(rng, 1, 4);
                     return OpInstance{
                         [](const V& in) { return codec::mse_loss(in[0], in[1]); },
                         {param({b, n}, rng), param({b, n}, rng)}};
                   }});
  cases.push_back({"contrastive_loss", [](std::mt19937_64& rng) {
                     const std::size_t b = dim(rng, 2, 4), n = dim(rng, 1, 3);
                     return OpInstance{
                         [](const V& in) {
                           return distill::contrastive_loss(
                               in[0], in[1], distill::Projection{in[2], in[3]}, 0.5);
                         },
                         {param({b, 2 * n}, rng), param({b, 2 * n}, rng),
                          param({n, 2 * n}, rng), param({n, 2 * n}, rng)}};
                   }});
  cases.push_back({"soft_target_loss", [](std::mt19937_64& rng) {
                     const std::size_t b = dim(rng, 1, 3), v = dim(rng, 2, 5);
                     return OpInstance{
                         [](const V& in) {
                           return distill::soft_target_loss(ad::softmax_rows(in[0], 1.0),
                                                            ad::softmax_rows(in[1], 1.0));
                         },
                         {param({b, v}, rng, -2, 2), param({b, v}, rng, -2, 2)}};
                   }});
  cases.push_back({"score", [](std::mt19937_64& rng) {
                     const std::size_t b = dim(rng, 1, 3), v = dim(rng, 2, 5),
                                       n = dim(rng, 1, 4);
                     return OpInstance{
                         weighted([](const V& in) { return model::score(in[0], in[1]); },
                                  {b, v}, rng),
                         {param({b, n}, rng), param({v, n}, rng)}};
                   }});
  cases.push_back({"rec_loss", [](std::mt19937_64& rng) {
                     const std::size_t b = dim(rng, 1, 3), v = dim(rng, 2, 5);
                     std::vector<std::uint32_t> labels(b);
                     for (auto& y : labels) y = static_cast<std::uint32_t>(dim(rng, 0, v - 1));
                     return OpInstance{
                         [labels](const V& in) { return model::rec_loss(in[0], labels); },
                         {param({b, v}, rng, 0.05, 0.95)}};
                   }});
  for (bool categorical : {false, true}) {
    cases.push_back({categorical ? "rec_loss_categorical" : "rec_loss_from_logits",
                     [categorical](std::mt19937_64& rng) {
                       const std::size_t b = dim(rng, 1, 3), v = dim(rng, 2, 5);
                       std::vector<std::uint32_t> labels(b);
                       for (auto& y : labels)
                         y = static_cast<std::uint32_t>(dim(rng, 0, v - 1));
                       return OpInstance{
                           [labels, categorical](const V& in) {
                             return model::rec_loss_from_logits(in[0], labels, categorical);
                           },
                           {param({b, v}, rng, -2, 2)}};
                     }});
  }
  return cases;
}

Outcome gradients(const Settings&) {
  auto cases = testing::all_op_cases();
  for (auto& c : model_op_cases()) cases.push_back(std::move(c));
  constexpr int kInstances = 10;
  double worst = 0.0;
  std::string worst_name;
  std::size_t failures = 0, checked = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    std::mt19937_64 rng(5000 + i);
    for (int t = 0; t < kInstances; ++t) {
      auto inst = cases[i].make(rng);
      const auto r = testing::grad_check(inst.f, inst.inputs);
      checked += r.checked;
      if (r.checked == 0 || !(r.max_rel_error < 1e-4)) ++failures;
      if (r.max_rel_error > worst) worst = r.max_rel_error, worst_name = cases[i].name;
    }
  }
  bool e2e_ok = true;
  std::size_t e2e_checked = 0;
  double e2e_worst = 0.0;
  for (bool mixup : {false, true}) {
    const auto r = testing::end_to_end_grad_check(mixup);
    e2e_checked += r.checked;
    e2e_worst = std::max(e2e_worst, r.max_rel_error);
    e2e_ok = e2e_ok && r.checked > 0 && r.max_rel_error < 1e-4;
  }
  std::ostringstream d;
  d << cases.size() << " ops x " << kInstances << " instances, " << checked
    << " elements, worst rel " << fmt("%.2e", worst) << " (" << worst_name << "), "
    << failures << " failing; 3-item end-to-end " << e2e_checked << " params, worst rel "
    << fmt("%.2e", e2e_worst);
  return {failures == 0 && e2e_ok, d.str()};
}

// ---- 3: semi-tensor product --------------------------------------------------------

Outcome stp_algebra(const Settings&) {
  std::mt19937_64 rng(33);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t h = 1 + rng() % 8, p = 1 + rng() % 8, q = 1 + rng() % 8;
    const ad::Tensor a = ad::Tensor::uniform({h, p}, -1, 1, rng);
    const ad::Tensor b = ad::Tensor::uniform({p, q}, -1, 1, rng);
    const ad::Tensor c = ttd::stp(a, b, 1);
    if (c.shape() != ad::Shape{h, q}) return {false, "n=1 shape mismatch"};
    // Independent triple loop.
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < q; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < p; ++l) s += a.at(i, l) * b.at(l, j);
        worst = std::max(worst, std::abs(c.at(i, j) - s));
      }
  }
  const ad::Tensor hand = ttd::stp(ad::Tensor::from({1, 4}, {1, 2, 3, 4}),
                                   ad::Tensor::from({2, 1}, {5, 6}), 2);
  const bool hand_ok = hand.shape() == ad::Shape{1, 2} && hand.at(0, 0) == 23.0 &&
                       hand.at(0, 1) == 34.0;
  std::string d = "n=1 vs matmul on 100 draws, max |diff| " + fmt("%.1e", worst) +
                  "; [1,2,3,4] stp [5,6] = [" +
                  (hand.numel() == 2 ? fmt("%g", hand.values()[0]) + "," +
                                           fmt("%g", hand.values()[1])
                                     : std::string("?")) +
                  "]";
  return {worst <= 1e-12 && hand_ok, d};
}

// ---- 4: code learning ---------------------------------------------------------------

struct CodeFit {
  codec::CodecTrainReport report;
  codec::CodecModel model;
};

CodeFit fit_random_codes() {
  codec::CodecConfig c;
  c.m = 8;
  c.k = 64;
  c.dim = 32;
  std::mt19937_64 rng(7);
  const ad::Tensor x = ad::Tensor::normal({1000, 32}, 1.0, rng);
  codec::CodecModel model = codec::CodecModel::create(c, rng);
  codec::CodecTrainOptions o;
  o.epochs = 200;
  o.seed = 3;
  codec::CodecTrainReport r = codec::train_codec(model, x, o);
  return {std::move(r), std::move(model)};
}

std::optional<CodeFit> g_code_fit;

Outcome code_learning(const Settings&) {
  g_code_fit = fit_random_codes();
  const auto& r = g_code_fit->report;
  const double last = r.epoch_mse.back();
  const double vs_initial = r.final_mse / r.initial_mse;
  const double vs_epoch0 = last / r.epoch_mse.front();
  std::ostringstream d;
  d << "|V|=1000 N=32 M=8 K=64, 200 epochs: L_mse " << fmt("%.4f", r.initial_mse) << " -> "
    << fmt("%.4f", r.final_mse) << " (" << fmt("%.3f", vs_initial)
    << "x); epoch loss " << fmt("%.4f", r.epoch_mse.front()) << " -> " << fmt("%.4f", last)
    << " (" << fmt("%.3f", vs_epoch0) << "x)";
  return {vs_initial < 0.25 && vs_epoch0 < 0.25, d.str()};
}

// ---- 5: Gumbel-Softmax ---------------------------------------------------------------

// Random group probabilities (rows × groups·k), each group a softmax of
// uniform logits.
ad::Tensor random_alpha(std::size_t rows, std::size_t groups, std::size_t k,
                        std::mt19937_64& rng) {
  const ad::Tensor z = ad::Tensor::uniform({rows * groups, k}, -3, 3, rng);
  const ad::Tensor a = ad::softmax_rows(z, 1.0);
  return ad::reshape(a, {rows, groups * k});
}

double top_log_gap(std::span<const double> g) {
  std::vector<double> v(g.begin(), g.end());
  std::partial_sort(v.begin(), v.begin() + 2, v.end(), std::greater<>());
  return std::log(v[0] / v[1]);
}

Outcome gumbel(const Settings&) {
  std::mt19937_64 rng(55);
  ad::NoGradGuard no_grad;
  // Simplex invariant with noise at random temperatures.
  double simplex_err = 0.0;
  bool nonneg = true;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = std::size_t{2} << (rng() % 5), m = 1 + rng() % 4;
    const double eps = std::uniform_real_distribution<double>(0.05, 2.0)(rng);
    const ad::Tensor o = codec::gumbel_softmax(random_alpha(1, m, k, rng), k, eps, &rng);
    for (std::size_t g = 0; g < m; ++g) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double v = o.values()[g * k + j];
        nonneg = nonneg && v >= 0.0 && std::isfinite(v);
        s += v;
      }
      simplex_err = std::max(simplex_err, std::abs(s - 1.0));
    }
  }
  // Noise-free ε=1e-4 against one-hot argmax. Groups whose two largest
  // probabilities are within a log-ratio of 2e-3 cannot be that sharp and
  // are counted separately.
  double onehot_err = 0.0;
  std::size_t groups = 0, near_ties = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 8, m = 4;
    const ad::Tensor alpha = random_alpha(1, m, k, rng);
    const ad::Tensor o = codec::gumbel_softmax(alpha, k, 1e-4, nullptr);
    for (std::size_t g = 0; g < m; ++g) {
      const auto grp = alpha.values().subspan(g * k, k);
      if (top_log_gap(grp) < 2e-3) {
        ++near_ties;
        continue;
      }
      ++groups;
      const auto arg = static_cast<std::size_t>(
          std::max_element(grp.begin(), grp.end()) - grp.begin());
      for (std::size_t j = 0; j < k; ++j)
        onehot_err = std::max(onehot_err,
                              std::abs(o.values()[g * k + j] - (j == arg ? 1.0 : 0.0)));
    }
  }
  // Hard composition against the ε=1e-4 soft composition.
  codec::CodecConfig c;
  c.m = 4;
  c.k = 16;
  c.dim = 8;
  const codec::CodecModel model = codec::CodecModel::create(c, rng);
  const ad::Tensor x = ad::Tensor::normal({400, c.dim}, 2.0, rng);
  const codec::CodeMatrix codes = codec::harden_codes(model.mlp, x, c);
  std::vector<std::size_t> rows(400);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const ad::Tensor hard = codec::compose_hard(codes, model.books, rows);
  const ad::Tensor alpha = codec::code_probs(x, model.mlp, c);
  const ad::Tensor soft =
      codec::compose_soft(codec::gumbel_softmax(alpha, c.k, 1e-4, nullptr), model.books);
  double compose_err = 0.0;
  std::size_t compared = 0;
  for (std::size_t v = 0; v < 400; ++v) {
    bool sharp = true;
    for (std::size_t g = 0; g < c.m; ++g)
      sharp = sharp && top_log_gap(alpha.values().subspan(v * c.mk() + g * c.k, c.k)) >= 2e-3;
    if (!sharp) continue;
    ++compared;
    for (std::size_t j = 0; j < c.dim; ++j)
      compose_err = std::max(compose_err, std::abs(soft.at(v, j) - hard.at(v, j)));
  }
  std::ostringstream d;
  d << "simplex |sum-1| " << fmt("%.1e", simplex_err) << " over 1000 draws; one-hot err "
    << fmt("%.1e", onehot_err) << " over " << groups << " groups (" << near_ties
    << " near-ties excluded); hard/soft " << fmt("%.1e", compose_err) << " over " << compared
    << " items";
  const bool pass = nonneg && simplex_err < 1e-12 && onehot_err <= 1e-6 &&
                    compose_err <= 1e-4 && 2 * groups >= 4000 && 2 * compared >= 400;
  return {pass, d.str()};
}

// ---- 6: latency ----------------------------------------------------------------------

Outcome latency(const Settings&) {
  const eval::Scenario sc = eval::synthetic_scenario(eval::ScenarioOptions{});
  auto codec = eval::codec_source(sc.codec);
  auto sttd = eval::sttd_source(sc.sttd, sc.num_items, "sttd");
  eval::BenchOptions bo;
  bo.reps = 5;
  bo.warmups = 2;
  bo.threads = 1;
  const eval::LatencyReport r =
      eval::bench_reconstruction({codec.get(), sttd.get()}, sc.encoder, sc.workload, bo);
  const double c = r.get("codec").mean, s = r.get("sttd").mean;
  std::ostringstream d;
  d << "|V|=" << sc.num_items << " N=" << sc.dim << ", " << r.sessions
    << " sessions, 1 thread, " << r.reps << " reps: codec " << fmt("%.4f", c) << " s, sttd "
    << fmt("%.4f", s) << " s, ratio " << fmt("%.2f", s / c) << "x";
  return {s / c >= 4.0, d.str()};
}

// ---- 7: pipeline ---------------------------------------------------------------------

std::string quote(const std::string& s) { return "'" + s + "'"; }

int run_cli(const Settings& st, const fs::path& out, const std::string& args,
            const std::string& log_name) {
  fs::create_directories(out);
  const std::string cmd = quote(st.cli) + " --out " + quote(out.string()) + " " + args +
                          " > " + quote((out / (log_name + ".log")).string()) + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json read_json(const fs::path& p) { return json::parse(io::read_text(p)); }

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::istringstream in(io::read_text(p));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

bool losses_finite(const std::vector<json>& log) {
  if (log.empty()) return false;
  for (const json& e : log)
    for (const auto& [k, v] : e.items())
      if (k.rfind("L_", 0) == 0 && !(v.is_number() && std::isfinite(v.get<double>())))
        return false;
  return true;
}

std::string ablation_dir(std::string name) {
  std::replace(name.begin(), name.end(), '/', '-');
  return name;
}

// Runs the scaled pipeline into `dir`; the detail lists what failed.
Outcome run_pipeline(const Settings& st, const fs::path& dir) {
  fs::remove_all(dir);
  std::vector<std::string> problems;
  auto step = [&](const fs::path& out, const std::string& args, const std::string& name) {
    const int rc = run_cli(st, out, args, name);
    if (rc != 0) problems.push_back(name + " exited " + std::to_string(rc));
    return rc == 0;
  };
  const std::string seed = "--seed 7 ";
  if (!step(dir, seed + "prepare --synthetic --items 200 --sessions 2000", "prepare"))
    return {false, problems.front()};
  if (!step(dir, seed + "train-teacher --epochs 30 --dim 32", "train-teacher"))
    return {false, problems.front()};
  const json tr = read_json(dir / "teacher_report.json");
  const double teacher_p10 = tr["test"]["P@10"].get<double>();
  const double pop_p10 = tr["popularity"]["test"]["P@10"].get<double>();
  if (!(teacher_p10 > pop_p10)) problems.push_back("teacher does not beat popularity");
  if (!losses_finite(read_jsonl(dir / "teacher_log.jsonl")))
    problems.push_back("non-finite teacher loss");

  double student_p10 = 0.0;
  if (step(dir, seed + "distill --books 4 --codewords 32", "distill")) {
    const json dr = read_json(dir / "distill_report.json");
    student_p10 = dr["student_test"]["P@10"].get<double>();
    if (!dr["artifacts_verified"].get<bool>()) problems.push_back("distill artifacts");
    if (!losses_finite(read_jsonl(dir / "distill_log.jsonl")))
      problems.push_back("non-finite distillation loss");
    // A separate process reloads dataset, teachers, student and codes.
    if (step(dir, seed + "evaluate", "evaluate") && !fs::exists(dir / "evaluation.json"))
      problems.push_back("evaluate wrote no report");
    const codec::FrozenCodec packed = codec::load_packed(dir / "codes.ccec");
    if (packed.codes.m != 4 || packed.codes.k != 32 || packed.dim != 32)
      problems.push_back("packed codes have the wrong shape");
  }

  std::size_t ablations_ok = 0;
  for (const std::string& name : distill::ablation_names()) {
    const fs::path out = dir / "ablation" / ablation_dir(name);
    const std::string args = seed + "distill --books 4 --codewords 32 --dataset " +
                             quote((dir / "dataset").string()) + " --teacher " +
                             quote((dir / "teacher").string()) + " --ablation " + quote(name);
    if (!step(out, args, "distill")) continue;
    const json dr = read_json(out / "distill_report.json");
    if (dr["ablation"] != name || !dr["artifacts_verified"].get<bool>() ||
        !losses_finite(read_jsonl(out / "distill_log.jsonl"))) {
      problems.push_back(name + " produced an incomplete run");
      continue;
    }
    ++ablations_ok;
  }

  std::ostringstream d;
  d << "teacher P@10 " << fmt("%.2f", teacher_p10) << " vs popularity " << fmt("%.2f", pop_p10)
    << "; student P@10 " << fmt("%.2f", student_p10) << "; ablations " << ablations_ok << "/"
    << distill::ablation_names().size();
  for (const auto& p : problems) d << "; " << p;
  return {problems.empty(), d.str()};
}

Outcome pipeline(const Settings& st) { return run_pipeline(st, st.work / "pipeline_a"); }

// ---- 8: serialization ---------------------------------------------------------------

Outcome serialization(const Settings& st) {
  std::vector<std::string> problems;
  std::size_t files = 0;
  auto check = [&](const codec::FrozenCodec& f, const std::string& label) {
    const fs::path path = st.work / "serialization" / (label + ".ccec");
    fs::create_directories(path.parent_path());
    codec::save_packed(path, f);
    ++files;
    const auto bytes = io::read_file(path);
    if (bytes != codec::pack(f)) problems.push_back(label + ": file differs from pack()");
    const codec::FrozenCodec g = codec::load_packed(path);
    if (codec::pack(g) != bytes) problems.push_back(label + ": repack differs");
    if (g.codes.codes != f.codes.codes || g.dim != f.dim ||
        std::memcmp(g.books.data(), f.books.data(), f.books.size() * sizeof(float)) != 0)
      problems.push_back(label + ": loaded codes or books differ");

    // Rows from the file against a float loop over the in-memory codebooks,
    // summed over books in order.
    const std::size_t v = f.codes.num_items, n = f.dim, m = f.codes.m, k = f.codes.k;
    std::vector<float> from_file(v * n), oracle(v * n, 0.0f);
    g.reconstruct_table(from_file.data());
    for (std::size_t item = 0; item < v; ++item)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          oracle[item * n + j] += f.books[(i * k + f.codes.at(item, i)) * n + j];
    if (std::memcmp(from_file.data(), oracle.data(), oracle.size() * sizeof(float)) != 0)
      problems.push_back(label + ": reconstruction differs from in-memory composition");

    eval::MemoryInputs in;
    in.num_items = v;
    in.dim = n;
    in.codec = &f;
    in.codec_file = path;
    const eval::MemoryComponent c = eval::memory_footprint(in).get("codec");
    const std::uint64_t size = fs::file_size(path);
    if (!c.file_bytes || *c.file_bytes != size || size < c.formula_bytes ||
        size - c.formula_bytes > codec::kPackedHeaderBytes + v)
      problems.push_back(label + ": file size outside formula + header + padding");
  };

  // Trained codes from the code-learning run, plus odd bit widths.
  if (!g_code_fit) g_code_fit = fit_random_codes();
  {
    std::mt19937_64 rng(7);
    const ad::Tensor x = ad::Tensor::normal({1000, 32}, 1.0, rng);
    const auto& model = g_code_fit->model;
    check(codec::FrozenCodec::freeze(codec::harden_codes(model.mlp, x, model.config),
                                     model.books),
          "trained_m8_k64");
  }
  std::mt19937_64 rng(88);
  for (const auto& [m, k] : std::vector<std::pair<std::size_t, std::size_t>>{
           {1, 2}, {3, 8}, {4, 32}, {5, 512}, {7, 4096}}) {
    codec::CodecConfig c;
    c.m = m;
    c.k = k;
    c.dim = 5;
    const std::size_t items = 257;
    codec::CodeMatrix codes{items, m, k, std::vector<std::uint32_t>(items * m)};
    for (auto& x : codes.codes) x = static_cast<std::uint32_t>(rng() % k);
    check(codec::FrozenCodec::freeze(codes, codec::Codebooks::create(c, rng)),
          "random_m" + std::to_string(m) + "_k" + std::to_string(k));
  }
  // The pipeline's deployed file, when it has run.
  const fs::path deployed = st.work / "pipeline_a" / "codes.ccec";
  if (fs::exists(deployed)) check(codec::load_packed(deployed), "pipeline");

  std::string d = std::to_string(files) + " packed files round-tripped";
  for (const auto& p : problems) d += "; " + p;
  return {problems.empty(), d};
}

// ---- 9: determinism -----------------------------------------------------------------

bool same_file(const fs::path& a, const fs::path& b) {
  return fs::exists(a) && fs::exists(b) && io::read_file(a) == io::read_file(b);
}

// Logs with the wall-clock field removed.
std::vector<json> timeless(const fs::path& p) {
  std::vector<json> log = read_jsonl(p);
  for (json& e : log) e.erase("wall_time_s");
  return log;
}

Outcome determinism(const Settings& st) {
  std::vector<std::string> problems;

  // Code learning twice from the same seeds.
  const CodeFit a = g_code_fit ? std::move(*g_code_fit) : fit_random_codes();
  const CodeFit b = fit_random_codes();
  // Same base name in two directories: the manifest records its blob's name.
  const fs::path da = st.work / "determinism" / "a", db = st.work / "determinism" / "b";
  fs::create_directories(da);
  fs::create_directories(db);
  save_checkpoint(da / "codes", a.model.named(), {{"codec", a.model.config.to_json()}});
  save_checkpoint(db / "codes", b.model.named(), {{"codec", b.model.config.to_json()}});
  if (!same_file(blob_path(da / "codes"), blob_path(db / "codes")) ||
      !same_file(manifest_path(da / "codes"), manifest_path(db / "codes")))
    problems.push_back("code-learning checkpoints differ");
  if (a.report.epoch_mse != b.report.epoch_mse || a.report.final_mse != b.report.final_mse ||
      a.report.initial_mse != b.report.initial_mse)
    problems.push_back("code-learning losses differ");

  // The pipeline twice.
  const fs::path pa = st.work / "pipeline_a", pb = st.work / "pipeline_b";
  if (!fs::exists(pa / "distill_report.json")) {
    const Outcome o = run_pipeline(st, pa);
    if (!o.pass) problems.push_back("first pipeline run: " + o.detail);
  }
  const Outcome o = run_pipeline(st, pb);
  if (!o.pass) problems.push_back("second pipeline run: " + o.detail);

  std::size_t compared = 0;
  std::vector<fs::path> run_dirs{""};
  for (const std::string& name : distill::ablation_names())
    run_dirs.push_back(fs::path("ablation") / ablation_dir(name));
  for (const fs::path& rel : run_dirs) {
    for (const char* stem : {"dataset", "teacher", "teacher_joint", "student"}) {
      if (!rel.empty() && std::string(stem) == "dataset") continue;
      for (const fs::path& f : {manifest_path(rel / stem),
                                blob_path(rel / stem)}) {
        if (!fs::exists(pa / f) && !fs::exists(pb / f)) continue;
        ++compared;
        if (!same_file(pa / f, pb / f)) problems.push_back(f.string() + " differs");
      }
    }
    for (const char* name : {"codes.ccec"}) {
      ++compared;
      if (!same_file(pa / rel / name, pb / rel / name))
        problems.push_back((rel / name).string() + " differs");
    }
    for (const char* name : {"teacher_report.json", "distill_report.json", "evaluation.json"}) {
      if (!fs::exists(pa / rel / name) && !fs::exists(pb / rel / name)) continue;
      ++compared;
      if (!fs::exists(pa / rel / name) || !fs::exists(pb / rel / name) ||
          read_json(pa / rel / name) != read_json(pb / rel / name))
        problems.push_back((rel / name).string() + " metrics differ");
    }
    for (const char* name : {"teacher_log.jsonl", "distill_log.jsonl"}) {
      if (!fs::exists(pa / rel / name) && !fs::exists(pb / rel / name)) continue;
      ++compared;
      if (!fs::exists(pa / rel / name) || !fs::exists(pb / rel / name) ||
          timeless(pa / rel / name) != timeless(pb / rel / name))
        problems.push_back((rel / name).string() + " logged metrics differ");
    }
  }
  std::string d = "code learning repeated, pipeline repeated; " + std::to_string(compared) +
                  " artifacts and reports compared";
  for (const auto& p : problems) d += "; " + p;
  return {problems.empty(), d};
}

// ---- driver -------------------------------------------------------------------------

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome(const Settings&)> run;
};

int run(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Settings st;
  st.work = "acceptance_work";
#ifdef CCREC_CLI_PATH
  st.cli = CCREC_CLI_PATH;
#endif
  std::vector<int> only;
  app.add_option("--work", st.work, "scratch directory for pipeline runs")->capture_default_str();
  app.add_option("--cli", st.cli, "path to the ccrec executable")->capture_default_str();
  app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "compression-ratio oracle", 1, ratios},
      {2, "gradient suite", 60, gradients},
      {3, "STP algebra", 5, stp_algebra},
      {4, "code-learning convergence", 600, code_learning},
      {5, "Gumbel-Softmax properties", 10, gumbel},
      {6, "latency codec vs STTD", 600, latency},
      {7, "end-to-end scaled pipeline", 1800, pipeline},
      {8, "serialization", 60, serialization},
      {9, "determinism", 3600, determinism},
  };
  const std::set<int> selected(only.begin(), only.end());
  fs::create_directories(st.work);
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(st);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (s > c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%g", c.budget_s) + " s budget";
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s [%d] %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                s, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace ccrec::acceptance

int main(int argc, char** argv) { return ccrec::acceptance::run(argc, argv); }
