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

// ccrec: data preparation, training, distillation, evaluation and
// benchmarking from one entry point.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error or missing input.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "ccrec/binary_io.hpp"
#include "ccrec/checkpoint.hpp"
#include "ccrec/codec.hpp"
#include "ccrec/distill.hpp"
#include "ccrec/errors.hpp"
#include "ccrec/eval.hpp"
#include "ccrec/kernels.hpp"
#include "ccrec/ratio_check.hpp"
#include "ccrec/run_config.hpp"
#include "ccrec/session_data.hpp"
#include "ccrec/ttd.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ccrec {
namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string config;
  std::string out = "runs";
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

struct Paths {
  std::string dataset, teacher, student, codes, output, csv;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

void require(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw MissingInputError(what + " not found: " + p.string());
}

// Checkpoint and dataset bases are stored as <base>.json + <base>.bin.
void require_base(const fs::path& base, const std::string& what) {
  require(manifest_path(base), what);
  require(blob_path(base), what);
}

std::uint64_t hash_files(const std::vector<fs::path>& files) {
  std::uint64_t h = io::fnv1a(nullptr, 0);
  for (const auto& f : files) {
    const auto bytes = io::read_file(f);
    h = io::fnv1a(bytes.data(), bytes.size(), h);
  }
  return h;
}

std::uint64_t hash_base(const fs::path& base) {
  return hash_files({manifest_path(base), blob_path(base)});
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  io::write_text(path, j.dump(2) + "\n");
}

class JsonLines {
 public:
  explicit JsonLines(const fs::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw Error("cannot write " + path.string());
  }
  void write(const json& j) { out_ << j.dump() << '\n' << std::flush; }

 private:
  std::ofstream out_;
};

std::vector<float> to_floats(std::span<const double> v) {
  return {v.begin(), v.end()};
}

ad::Tensor from_floats(const std::vector<float>& v, std::size_t rows, std::size_t cols) {
  ad::Tensor t = ad::Tensor::zeros({rows, cols});
  auto dst = t.mutable_values();
  std::copy(v.begin(), v.end(), dst.begin());
  return t;
}

std::uint64_t parameter_total(const ParamList& list) {
  std::uint64_t n = 0;
  for (const auto& p : list) n += p.tensor.numel();
  return n;
}

void print_epoch(const distill::EpochLog& e) {
  if (e.phase == "teacher") {
    std::printf("teacher  epoch %3zu  rec %.4f  val P@10 %6.2f  NDCG@10 %6.2f  %.1fs\n", e.epoch,
                e.rec_teacher, e.val_p10, e.val_ndcg10, e.wall_time_s);
    std::fflush(stdout);
    return;
  }
  std::printf("%-8s epoch %3zu  rec_stu %.4f  rec_tea %.4f  mse %.5f  con %.4f  soft %.4f"
              "  val P@10 %6.2f  NDCG@10 %6.2f  %.1fs\n",
              e.phase.c_str(), e.epoch, e.rec_student, e.rec_teacher, e.mse, e.con,
              e.soft, e.val_p10, e.val_ndcg10, e.wall_time_s);
  std::fflush(stdout);
}

void print_report(const std::string& name, const eval::RankingReport& r) {
  std::printf("%-12s P@5 %6.2f  P@10 %6.2f  NDCG@5 %6.2f  NDCG@10 %6.2f  (%zu cases)\n",
              name.c_str(), r.p5, r.p10, r.ndcg5, r.ndcg10, r.cases);
}

// Student ranks on the deployed path: item table rebuilt from packed codes.
std::vector<std::size_t> deployed_ranks(const distill::Student& s,
                                        const codec::FrozenCodec& c,
                                        const std::vector<data::Sequence>& seqs) {
  std::vector<float> table(c.codes.num_items * c.dim);
  c.reconstruct_table(table.data());
  return distill::rank_labels(s.params, s.config,
                              from_floats(table, c.codes.num_items, c.dim), seqs);
}

codec::FrozenCodec freeze_student(const distill::Student& s, const ad::Tensor& teacher_table) {
  const codec::CodeMatrix codes =
      codec::harden_codes(s.codec.mlp, teacher_table, s.codec.config);
  return codec::FrozenCodec::freeze(codes, s.codec.books);
}

distill::Teacher load_teacher(const fs::path& base, std::size_t num_items) {
  require_base(base, "teacher checkpoint");
  distill::Teacher t = distill::Teacher::load(base);
  if (t.num_items() != num_items)
    throw DataError("teacher covers " + std::to_string(t.num_items()) +
                    " items but the dataset has " + std::to_string(num_items));
  return t;
}

data::SessionDataset load_data(const fs::path& base) {
  require_base(base, "dataset cache");
  return data::load_dataset(base);
}

class App {
 public:
  App(Globals g, Paths p) : g_(std::move(g)), paths_(std::move(p)), out_(g_.out) {}

  void configure(const Overrides& overrides) {
    if (!g_.config.empty()) cfg_.merge_file(g_.config);
    for (const auto& [k, v] : overrides) cfg_.set(k, v);
    for (const auto& s : g_.sets) cfg_.set_assignment(s);
    if (g_.seed_given) cfg_.set("seed", std::to_string(g_.seed));
    fs::create_directories(out_);
  }

  fs::path path_or(const std::string& given, const std::string& fallback) const {
    return given.empty() ? out_ / fallback : fs::path(given);
  }

  // Deployed teacher: the jointly updated one when a bidirectional run left it.
  fs::path deployed_teacher() const {
    if (!paths_.teacher.empty()) return paths_.teacher;
    const fs::path joint = out_ / "teacher_joint";
    return fs::exists(manifest_path(joint)) ? joint : out_ / "teacher";
  }

  void finish(const std::string& command, const json& paths) {
    json j = cfg_.to_json(command);
    j["paths"] = paths;
    write_json(out_ / (command + ".config.json"), j);
  }

  int prepare() {
    data::EventLog events;
    std::string source;
    if (cfg_.get_bool("data.synthetic")) {
      events = data::gen_synthetic(cfg_.get_size("data.items"),
                                   cfg_.get_size("data.sessions"), cfg_.get_u64("seed"));
      source = "synthetic";
    } else {
      const std::string path = cfg_.get("data.path");
      if (path.empty())
        throw ConfigError("prepare needs --data PATH or --synthetic");
      try {
        events = data::read_events(path);
      } catch (const ParseError& e) {
        throw Error(path + ": " + e.what());
      }
      source = path;
    }
    data::SessionDataset ds = data::filter_and_split(data::ingest(events), cfg_.split());
    data::augment(ds);
    const fs::path base = path_or(paths_.output, "dataset");
    data::save_dataset(base, ds);
    json stats = data::dataset_stats(ds);
    stats["source"] = source;
    stats["events"] = events.size();
    stats["cache_hash"] = hex(hash_base(base));
    write_json(out_ / "dataset_stats.json", stats);
    finish("prepare", {{"dataset", base.string()}});
    std::cout << stats.dump(2) << '\n';
    return 0;
  }

  int train_teacher() {
    const fs::path data_base = path_or(paths_.dataset, "dataset");
    const data::SessionDataset ds = load_data(data_base);
    cfg_.set("data.max_len", std::to_string(ds.max_len));
    std::mt19937_64 rng(cfg_.get_u64("seed"));
    distill::Teacher t = distill::Teacher::create(cfg_.encoder(), ds.num_items(), rng);

    JsonLines log(out_ / "teacher_log.jsonl");
    const distill::TeacherReport r =
        distill::train_teacher(t, ds, cfg_.teacher(), [&](const distill::EpochLog& e) {
          log.write(e.to_json());
          print_epoch(e);
        });
    const fs::path base = path_or(paths_.output, "teacher");
    t.save(base);

    const auto test = eval::ranking_report(distill::teacher_ranks(t, ds.test));
    const auto val = eval::ranking_report(distill::teacher_ranks(t, ds.validation));
    const auto pop_test = eval::ranking_report(eval::popularity_ranks(ds.vocab, ds.test));
    const auto pop_val =
        eval::ranking_report(eval::popularity_ranks(ds.vocab, ds.validation));
    json report = {{"best_epoch", r.best_epoch},
                   {"best_val_P@10", r.best_val_p10},
                   {"test", test.to_json()},
                   {"validation", val.to_json()},
                   {"popularity", {{"test", pop_test.to_json()},
                                   {"validation", pop_val.to_json()}}},
                   {"beats_popularity_test_P@10", test.p10 > pop_test.p10},
                   {"checkpoint_hash", hex(hash_base(base))}};
    write_json(out_ / "teacher_report.json", report);
    finish("train-teacher", {{"dataset", data_base.string()}, {"teacher", base.string()}});
    print_report("teacher", test);
    print_report("popularity", pop_test);
    std::printf("best epoch %zu, checkpoint %s\n", r.best_epoch, base.c_str());
    return 0;
  }

  int distill() {
    cfg_.resolve_ablation();
    const fs::path data_base = path_or(paths_.dataset, "dataset");
    const fs::path teacher_base = path_or(paths_.teacher, "teacher");
    const data::SessionDataset ds = load_data(data_base);
    distill::Teacher t = load_teacher(teacher_base, ds.num_items());
    cfg_.set("encoder.dim", std::to_string(t.config.dim));
    cfg_.set("encoder.heads", std::to_string(t.config.heads));
    cfg_.set("data.max_len", std::to_string(t.config.max_len));
    const std::uint64_t teacher_file_hash = hash_base(teacher_base);
    const std::uint64_t teacher_before = tensors_hash(t.tensors());

    const distill::DistillConfig dc = cfg_.distill();
    std::mt19937_64 rng(cfg_.get_u64("seed") + 1);
    distill::Student s = distill::Student::create(t.config, cfg_.codec(), rng, &t.table);
    distill::Projection proj = distill::Projection::create(t.config.dim, rng);

    JsonLines log(out_ / "distill_log.jsonl");
    const distill::DistillReport r =
        distill::distill(t, s, proj, ds, dc, [&](const distill::EpochLog& e) {
          log.write(e.to_json());
          print_epoch(e);
        });

    const fs::path student_base = path_or(paths_.student, "student");
    const fs::path codes_path = path_or(paths_.codes, "codes.ccec");
    s.save(student_base);
    const codec::FrozenCodec frozen = freeze_student(s, t.table);
    codec::save_packed(codes_path, frozen);
    json paths = {{"dataset", data_base.string()},
                  {"teacher", teacher_base.string()},
                  {"student", student_base.string()},
                  {"codes", codes_path.string()}};
    const bool teacher_changed = tensors_hash(t.tensors()) != teacher_before;
    if (dc.bidirectional) {
      const fs::path joint = out_ / "teacher_joint";
      t.save(joint);
      paths["teacher_joint"] = joint.string();
    }

    // Reload every artifact and confirm it reproduces the in-memory state.
    const distill::Student reloaded = distill::Student::load(student_base);
    const codec::FrozenCodec packed = codec::load_packed(codes_path);
    const bool codes_ok = packed.codes.codes == frozen.codes.codes && packed.books == frozen.books;
    const bool student_ok = tensors_hash(reloaded.tensors()) == tensors_hash(s.tensors());
    if (!codes_ok || !student_ok)
      throw ContractError("reloaded artifacts differ from the trained student");

    const auto student_test = eval::ranking_report(deployed_ranks(s, packed, ds.test));
    const auto teacher_test = eval::ranking_report(distill::teacher_ranks(t, ds.test));
    json report = {{"ablation", dc.ablation},
                   {"config", dc.to_json()},
                   {"best_epoch", r.best_epoch},
                   {"best_val_P@10", r.best_val_p10},
                   {"student_test", student_test.to_json()},
                   {"teacher_test", teacher_test.to_json()},
                   {"teacher_changed", teacher_changed},
                   {"teacher_file_hash", hex(teacher_file_hash)},
                   {"teacher_file_hash_after", hex(hash_base(teacher_base))},
                   {"student_hash", hex(hash_base(student_base))},
                   {"codes_hash", hex(hash_files({codes_path}))},
                   {"artifacts_verified", true}};
    write_json(out_ / "distill_report.json", report);
    finish("distill", paths);
    print_report("student", student_test);
    print_report("teacher", teacher_test);
    std::printf("ablation %s, teacher %s\n", dc.ablation.c_str(),
                teacher_changed ? "updated" : "unchanged");
    return 0;
  }

  int evaluate() {
    const fs::path data_base = path_or(paths_.dataset, "dataset");
    const fs::path teacher_base = deployed_teacher();
    const fs::path student_base = path_or(paths_.student, "student");
    const fs::path codes_path = path_or(paths_.codes, "codes.ccec");
    const data::SessionDataset ds = load_data(data_base);
    const distill::Teacher t = load_teacher(teacher_base, ds.num_items());
    require_base(student_base, "student checkpoint");
    require(codes_path, "packed code file");
    const distill::Student s = distill::Student::load(student_base);
    const codec::FrozenCodec packed = codec::load_packed(codes_path);

    const auto teacher = eval::ranking_report(distill::teacher_ranks(t, ds.test));
    const auto student = eval::ranking_report(deployed_ranks(s, packed, ds.test));
    const auto pop = eval::ranking_report(eval::popularity_ranks(ds.vocab, ds.test));

    const ttd::TTConfig tt = cfg_.sttd(ds.num_items(), t.config.dim);
    eval::MemoryInputs in;
    in.num_items = ds.num_items();
    in.dim = t.config.dim;
    in.codec = &packed;
    in.codec_file = codes_path;
    in.sttd = &tt;
    in.backbone_parameters = parameter_total(s.params.named("encoder."));
    const eval::MemoryReport mem = eval::memory_footprint(in);

    json report = {{"test", {{"teacher", teacher.to_json()},
                             {"student", student.to_json()},
                             {"popularity", pop.to_json()}}},
                   {"memory", mem.to_json()},
                   {"code_usage", eval::code_usage_histogram(packed.codes)},
                   {"books", codec::inspect(packed, 0)["books"]}};
    write_json(out_ / "evaluation.json", report);
    finish("evaluate", {{"dataset", data_base.string()},
                        {"teacher", teacher_base.string()},
                        {"student", student_base.string()},
                        {"codes", codes_path.string()}});
    print_report("teacher", teacher);
    print_report("student", student);
    print_report("popularity", pop);
    print_memory(mem);
    return 0;
  }

  int bench() {
    const fs::path teacher_base = deployed_teacher();
    const fs::path student_base = path_or(paths_.student, "student");
    const fs::path codes_path = path_or(paths_.codes, "codes.ccec");
    require_base(teacher_base, "teacher checkpoint");
    require_base(student_base, "student checkpoint");
    require(codes_path, "packed code file");
    const distill::Teacher t = distill::Teacher::load(teacher_base);
    const distill::Student s = distill::Student::load(student_base);
    const codec::FrozenCodec packed = codec::load_packed(codes_path);
    const std::size_t items = t.num_items(), n = t.config.dim;
    if (packed.codes.num_items != items || packed.dim != n)
      throw DataError("packed codes do not cover the teacher's item table");

    const auto methods = cfg_.get_list("bench.methods");
    if (methods.empty()) throw ConfigError("bench.methods is empty");
    std::vector<std::unique_ptr<eval::ItemSource>> owned;
    std::optional<ttd::FrozenSTTD> sttd;
    const ttd::TTConfig tt = cfg_.sttd(items, n);
    for (const auto& m : methods) {
      if (m == "dense") {
        owned.push_back(eval::dense_source(to_floats(t.table.values()), n));
      } else if (m == "codec") {
        owned.push_back(eval::codec_source(packed));
      } else if (m == "sttd") {
        ttd::FitOptions fit;
        fit.steps = cfg_.get_size("sttd.fit_steps");
        fit.lr = cfg_.get_double("sttd.lr");
        fit.seed = cfg_.get_u64("seed");
        double mse = 0.0;
        sttd = ttd::FrozenSTTD::freeze(ttd::fit_cores(t.table.values(), items, tt, fit, &mse));
        std::printf("sttd cores fitted in %zu steps, row mse %.6f\n", fit.steps, mse);
        owned.push_back(eval::sttd_source(*sttd, items, "sttd"));
      } else {
        throw ConfigError("unknown bench method '" + m + "' (dense, codec, sttd)");
      }
    }
    std::vector<eval::ItemSource*> sources;
    for (auto& o : owned) sources.push_back(o.get());

    const std::size_t len = std::min(cfg_.get_size("bench.session_len"), s.config.max_len);
    const eval::Workload w =
        eval::make_workload(items, cfg_.get_size("bench.sessions"), len, cfg_.get_u64("seed"));
    const eval::LatencyReport lat = eval::bench_reconstruction(
        sources, model::FrozenEncoder::freeze(s.params, s.config), w, cfg_.bench());

    eval::MemoryInputs in;
    in.num_items = items;
    in.dim = n;
    in.codec = &packed;
    in.codec_file = codes_path;
    in.sttd = &tt;
    in.backbone_parameters = parameter_total(s.params.named("encoder."));
    const eval::MemoryReport mem = eval::memory_footprint(in);

    json lj = lat.to_json();
    lj["workload_hash"] = hex(w.hash);
    lj["sttd_config"] = tt.to_json();
    write_json(out_ / "latency.json", lj);
    io::write_text(out_ / "latency.csv", lat.to_csv());
    write_json(out_ / "memory.json", mem.to_json());
    finish("bench", {{"teacher", teacher_base.string()},
                     {"student", student_base.string()},
                     {"codes", codes_path.string()}});
    std::cout << lat.to_table();
    bool has_codec = false, has_sttd = false;
    for (const auto& e : lat.entries) {
      has_codec |= e.method == "codec";
      has_sttd |= e.method == "sttd";
    }
    if (has_codec && has_sttd)
      std::printf("sttd / codec time per pass: %.2fx\n",
                  lat.get("sttd").mean / lat.get("codec").mean);
    print_memory(mem);
    return 0;
  }

  int export_codes() {
    const fs::path teacher_base = deployed_teacher();
    const fs::path student_base = path_or(paths_.student, "student");
    const fs::path out = path_or(paths_.output, "codes.ccec");
    require_base(teacher_base, "teacher checkpoint");
    require_base(student_base, "student checkpoint");
    const distill::Teacher t = distill::Teacher::load(teacher_base);
    const distill::Student s = distill::Student::load(student_base);
    const codec::FrozenCodec frozen = freeze_student(s, t.table);
    codec::save_packed(out, frozen);
    finish("export-codes", {{"teacher", teacher_base.string()},
                            {"student", student_base.string()},
                            {"codes", out.string()}});
    std::printf("wrote %s (%llu bytes, %zu items, M=%zu, K=%zu)\n", out.c_str(),
                static_cast<unsigned long long>(fs::file_size(out)),
                frozen.codes.num_items, frozen.codes.m, frozen.codes.k);
    return 0;
  }

  int inspect_codes(const std::string& file, std::size_t items) {
    require(file, "packed code file");
    const codec::FrozenCodec c = codec::load_packed(file);
    const fs::path csv = paths_.csv.empty()
                             ? out_ / (fs::path(file).stem().string() + ".usage.csv")
                             : fs::path(paths_.csv);
    io::write_text(csv, codec::usage_csv(c));
    json j = codec::inspect(c, items);
    j["file_bytes"] = fs::file_size(file);
    j["usage_csv"] = csv.string();
    finish("inspect-codes", {{"codes", file}, {"usage_csv", csv.string()}});
    std::cout << j.dump(2) << '\n';
    return 0;
  }

  int check_ratios() {
    const codec::RatioCheck c = codec::check_ratios();
    json rows = json::array();
    for (const auto& r : c.rows)
      rows.push_back({{"M", r.reference.m},
                      {"K", r.reference.k},
                      {"size", r.computed.compressed},
                      {"listed_size", r.reference.size},
                      {"ratio", r.computed.value},
                      {"floor", r.computed.floor},
                      {"listed_floor", r.reference.floor},
                      {"match", r.matches()}});
    write_json(out_ / "ratios.json", {{"num_items", codec::kReferenceItems},
                                      {"dim", codec::kReferenceDim},
                                      {"rows", rows},
                                      {"matches", c.matches()}});
    finish("check-ratios", json::object());
    std::cout << c.to_table();
    return c.all_match() ? 0 : kExitRuntime;
  }

 private:
  static std::uint64_t tensors_hash(const std::vector<ad::Tensor>& ts) {
    std::uint64_t h = io::fnv1a(nullptr, 0);
    for (const auto& t : ts) h = io::fnv1a(t.values().data(), t.numel() * sizeof(double), h);
    return h;
  }

  static void print_memory(const eval::MemoryReport& m) {
    for (const auto& c : m.components) {
      std::printf("%-10s %12llu params %12llu bytes", c.name.c_str(),
                  static_cast<unsigned long long>(c.parameters),
                  static_cast<unsigned long long>(c.formula_bytes));
      if (c.file_bytes)
        std::printf("  (file %llu)", static_cast<unsigned long long>(*c.file_bytes));
      if (c.name != "backbone") std::printf("  %.2fx vs dense", m.ratio_vs_dense(c.name));
      std::printf("\n");
    }
  }

  Globals g_;
  Paths paths_;
  fs::path out_;
  config::RunConfig cfg_;
};

void add_key(CLI::App* sub, Overrides& ov, const std::string& flag, const std::string& key,
             const std::string& help) {
  sub->add_option_function<std::string>(
      flag, [&ov, key](const std::string& v) { ov.emplace_back(key, v); }, help);
}

int run(int argc, char** argv) {
  CLI::App app{"Session recommendation with compositional item codes"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  Paths p;
  Overrides ov;
  app.add_option("--config", g.config, "key = value or flat JSON config file");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--set", g.sets, "override a configuration key (key=value)");
  app.add_option_function<std::uint64_t>(
      "--seed", [&g](std::uint64_t s) { g.seed = s, g.seed_given = true; }, "random seed");

  auto* prepare = app.add_subcommand("prepare", "build the dataset cache");
  add_key(prepare, ov, "--data", "data.path", "event log (session, item, timestamp)");
  prepare->add_flag_callback(
      "--synthetic", [&ov] { ov.emplace_back("data.synthetic", "true"); },
      "generate a synthetic corpus");
  add_key(prepare, ov, "--items", "data.items", "synthetic item count");
  add_key(prepare, ov, "--sessions", "data.sessions", "synthetic session count");
  add_key(prepare, ov, "--min-count", "data.min_item_count", "drop rarer items");
  add_key(prepare, ov, "--max-len", "data.max_len", "most recent items kept");
  prepare->add_option("--output", p.output, "cache base path (default <out>/dataset)");

  auto* teacher = app.add_subcommand("train-teacher", "train the dense teacher");
  teacher->add_option("--dataset", p.dataset, "dataset cache base");
  teacher->add_option("--output", p.output, "checkpoint base (default <out>/teacher)");
  add_key(teacher, ov, "--epochs", "teacher.epochs", "training epochs");
  add_key(teacher, ov, "--dim", "encoder.dim", "embedding size N");

  auto* dist = app.add_subcommand("distill", "train the compressed student");
  dist->add_option("--dataset", p.dataset, "dataset cache base");
  dist->add_option("--teacher", p.teacher, "teacher checkpoint base");
  dist->add_option("--student", p.student, "student checkpoint base to write");
  dist->add_option("--codes", p.codes, "packed code file to write");
  add_key(dist, ov, "--ablation", "distill.ablation",
          "stu-base, stu-w/o-c, stu-w/o-b, stu-w/o-s, stu-w/o-m");
  dist->add_flag_callback(
      "--no-bidirectional", [&ov] { ov.emplace_back("distill.bidirectional", "false"); },
      "keep the teacher frozen");
  add_key(dist, ov, "--pretrain-epochs", "distill.pretrain_epochs", "student pretraining epochs");
  add_key(dist, ov, "--joint-epochs", "distill.joint_epochs", "joint epochs");
  add_key(dist, ov, "--books", "codec.M", "codebooks M");
  add_key(dist, ov, "--codewords", "codec.K", "codewords per book K");

  auto* evaluate = app.add_subcommand("evaluate", "rank test sessions and account memory");
  evaluate->add_option("--dataset", p.dataset, "dataset cache base");
  evaluate->add_option("--teacher", p.teacher, "teacher checkpoint base (default: joint teacher if present)");
  evaluate->add_option("--student", p.student, "student checkpoint base");
  evaluate->add_option("--codes", p.codes, "packed code file");

  auto* bench = app.add_subcommand("bench", "time scoring passes per item-table method");
  bench->add_option("--teacher", p.teacher, "teacher checkpoint base (default: joint teacher if present)");
  bench->add_option("--student", p.student, "student checkpoint base");
  bench->add_option("--codes", p.codes, "packed code file");
  add_key(bench, ov, "--methods", "bench.methods", "comma-separated: dense, codec, sttd");
  add_key(bench, ov, "--reps", "bench.reps", "timed repetitions (>= 5)");
  add_key(bench, ov, "--threads", "bench.threads", "OpenMP threads");
  add_key(bench, ov, "--sessions", "bench.sessions", "sessions per pass");

  auto* exp = app.add_subcommand("export-codes", "write the packed code file");
  exp->add_option("--teacher", p.teacher, "teacher checkpoint base (default: joint teacher if present)");
  exp->add_option("--student", p.student, "student checkpoint base");
  exp->add_option("--output", p.output, "packed file (default <out>/codes.ccec)");

  std::string inspect_file;
  std::size_t inspect_items = 10;
  auto* insp = app.add_subcommand("inspect-codes", "print a packed file's header and usage");
  insp->add_option("file", inspect_file, "packed code file")->required();
  insp->add_option("--items", inspect_items, "items to list")->capture_default_str();
  insp->add_option("--csv", p.csv, "usage histogram CSV path");

  auto* ratios = app.add_subcommand("check-ratios", "compare ratios with the reference grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  App runner(g, p);
  try {
    runner.configure(ov);
    if (*prepare) return runner.prepare();
    if (*teacher) return runner.train_teacher();
    if (*dist) return runner.distill();
    if (*evaluate) return runner.evaluate();
    if (*bench) return runner.bench();
    if (*exp) return runner.export_codes();
    if (*insp) return runner.inspect_codes(inspect_file, inspect_items);
    if (*ratios) return runner.check_ratios();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace ccrec

int main(int argc, char** argv) { return ccrec::run(argc, argv); }
