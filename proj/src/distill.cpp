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

#include "ccrec/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "ccrec/errors.hpp"
#include "ccrec/optim.hpp"

namespace ccrec::distill {
namespace {

constexpr double kProbFloor = 1e-10;

ad::Tensor zero_param(ad::Shape s) {
  return ad::Tensor::zeros(std::move(s)).requires_grad(true);
}

// Parameter values kept aside for best-checkpoint selection.
class Snapshot {
 public:
  void take(const std::vector<ad::Tensor>& ts) {
    values_.clear();
    for (const auto& t : ts) values_.emplace_back(t.values().begin(), t.values().end());
  }
  void restore(const std::vector<ad::Tensor>& ts) const {
    if (values_.size() != ts.size()) return;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      ad::Tensor t = ts[i];
      std::copy(values_[i].begin(), values_[i].end(), t.mutable_values().begin());
    }
  }
  bool empty() const { return values_.empty(); }

 private:
  std::vector<std::vector<double>> values_;
};

void check_finite(const ad::Tensor& t, const char* term, const std::string& where) {
  if (t.defined() && !std::isfinite(t.item()))
    throw NumericError("non-finite " + std::string(term) + " (" +
                       std::to_string(t.item()) + ") " + where);
}

void check_terms(const LossTerms& l, const std::string& where) {
  check_finite(l.rec_student, "L_rec(student)", where);
  check_finite(l.rec_teacher, "L_rec(teacher)", where);
  check_finite(l.mse, "L_mse", where);
  check_finite(l.con, "L_con", where);
  check_finite(l.soft, "L_soft", where);
  check_finite(l.total, "total loss", where);
}

ad::Tensor add_term(const ad::Tensor& acc, const ad::Tensor& term, double weight) {
  if (!term.defined()) return acc;
  const ad::Tensor w = weight == 1.0 ? term : ad::scale(term, weight);
  return acc.defined() ? ad::add(acc, w) : w;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ad::AdamOptions adam_options(double lr, double weight_decay) {
  ad::AdamOptions o;
  o.lr = lr;
  o.weight_decay = weight_decay;
  return o;
}

std::vector<ad::Tensor> concat(std::vector<ad::Tensor> a, const std::vector<ad::Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

// ---- models -----------------------------------------------------------------------

Teacher Teacher::create(const model::EncoderConfig& c, std::size_t num_items,
                        std::mt19937_64& rng) {
  c.validate();
  if (num_items == 0) throw ParameterError("teacher needs at least one item");
  Teacher t;
  t.config = c;
  t.params = model::EncoderParams::create(c, rng);
  t.table = ad::Tensor::uniform({num_items, c.dim}, -0.1, 0.1, rng).requires_grad(true);
  return t;
}

ParamList Teacher::named() const {
  ParamList out = params.named("teacher.");
  out.push_back({"teacher.items", table});
  return out;
}

std::vector<ad::Tensor> Teacher::tensors() const {
  std::vector<ad::Tensor> out = params.tensors();
  out.push_back(table);
  return out;
}

void Teacher::set_trainable(bool on) const {
  for (ad::Tensor t : tensors()) t.requires_grad(on);
}

void Teacher::save(const std::filesystem::path& base) const {
  nlohmann::json sections;
  sections["role"] = "teacher";
  sections["encoder_config"] = config.to_json();
  sections["num_items"] = num_items();
  save_checkpoint(base, named(), sections);
}

Teacher Teacher::load(const std::filesystem::path& base) {
  const Checkpoint ck = load_checkpoint(base);
  if (ck.sections.value("role", std::string()) != "teacher")
    throw FormatError("checkpoint " + base.string() + " is not a teacher");
  Teacher t;
  t.config = model::EncoderConfig::from_json(ck.sections.at("encoder_config"));
  std::mt19937_64 rng(0);
  t.params = model::EncoderParams::create(t.config, rng);
  t.table = zero_param({ck.sections.at("num_items").get<std::size_t>(), t.config.dim});
  assign_params(t.named(), ck);
  return t;
}

Student Student::create(const model::EncoderConfig& c, const codec::CodecConfig& cc,
                        std::mt19937_64& rng, const ad::Tensor* reference) {
  c.validate();
  if (cc.dim != c.dim)
    throw ParameterError("student codec N=" + std::to_string(cc.dim) +
                         " differs from encoder N=" + std::to_string(c.dim));
  Student s;
  s.config = c;
  s.params = model::EncoderParams::create(c, rng);
  s.codec = reference != nullptr ? codec::CodecModel::create_for(cc, *reference, rng)
                                 : codec::CodecModel::create(cc, rng);
  return s;
}

ParamList Student::named() const {
  ParamList out = params.named("student.");
  for (const auto& p : codec.named()) out.push_back(p);
  return out;
}

std::vector<ad::Tensor> Student::tensors() const {
  return concat(params.tensors(), codec.tensors());
}

void Student::save(const std::filesystem::path& base) const {
  nlohmann::json sections;
  sections["role"] = "student";
  sections["encoder_config"] = config.to_json();
  sections["codec_config"] = codec.config.to_json();
  save_checkpoint(base, named(), sections);
}

Student Student::load(const std::filesystem::path& base) {
  const Checkpoint ck = load_checkpoint(base);
  if (ck.sections.value("role", std::string()) != "student")
    throw FormatError("checkpoint " + base.string() + " is not a student");
  Student s;
  s.config = model::EncoderConfig::from_json(ck.sections.at("encoder_config"));
  std::mt19937_64 rng(0);
  s.params = model::EncoderParams::create(s.config, rng);
  s.codec = codec::CodecModel::from_checkpoint(ck);
  assign_params(s.params.named("student."), ck);
  return s;
}

ad::Tensor session_theta(const model::EncoderParams& p, const model::EncoderConfig& c,
                         const ad::Tensor& table, const model::SessionList& sessions,
                         bool training, std::mt19937_64& rng) {
  const model::Encoded enc = model::encode(p, c, table, sessions, training, rng);
  return model::pool_sessions(p, enc).theta;
}

std::vector<std::size_t> rank_labels(const model::EncoderParams& p,
                                     const model::EncoderConfig& c,
                                     const ad::Tensor& table,
                                     const std::vector<data::Sequence>& seqs,
                                     std::size_t batch_size) {
  ad::NoGradGuard guard;
  std::mt19937_64 rng(0);  // unused without dropout
  std::vector<std::size_t> ranks;
  ranks.reserve(seqs.size());
  const ad::Tensor items = table.detach();
  for (std::size_t start = 0; start < seqs.size(); start += batch_size) {
    const std::size_t end = std::min(seqs.size(), start + batch_size);
    model::SessionList sessions;
    for (std::size_t i = start; i < end; ++i) sessions.emplace_back(seqs[i].prefix);
    const ad::Tensor z =
        model::logits(session_theta(p, c, items, sessions, false, rng), items);
    const std::size_t v = items.rows();
    for (std::size_t i = start; i < end; ++i)
      ranks.push_back(eval::rank_of(z.values().subspan((i - start) * v, v), seqs[i].label));
  }
  return ranks;
}

std::vector<std::size_t> teacher_ranks(const Teacher& t,
                                       const std::vector<data::Sequence>& seqs) {
  return rank_labels(t.params, t.config, t.table, seqs);
}

ad::Tensor student_table(const Student& s, const ad::Tensor& teacher_table) {
  ad::NoGradGuard guard;
  const codec::CodeMatrix codes =
      codec::harden_codes(s.codec.mlp, teacher_table, s.codec.config);
  std::vector<std::size_t> all(codes.num_items);
  std::iota(all.begin(), all.end(), 0);
  return codec::compose_hard(codes, s.codec.books, all);
}

std::vector<std::size_t> student_ranks(const Student& s, const ad::Tensor& teacher_table,
                                       const std::vector<data::Sequence>& seqs) {
  return rank_labels(s.params, s.config, student_table(s, teacher_table), seqs);
}

// ---- distillation components --------------------------------------------------------

HotCold hot_cold_representations(const model::EncoderParams& p,
                                 const model::Encoded& enc,
                                 std::span<const std::uint8_t> hot_flags) {
  const std::size_t sessions = enc.lengths.size();
  std::vector<std::vector<std::size_t>> hot(sessions), cold(sessions);
  for (std::size_t s = 0; s < sessions; ++s)
    for (std::size_t t = 0; t < enc.lengths[s]; ++t) {
      const std::size_t row = enc.offsets[s] + t;
      const std::uint32_t item = enc.items[row];
      if (item >= hot_flags.size())
        throw IndexError("hot/cold: item " + std::to_string(item) +
                         " has no popularity flag");
      (hot_flags[item] ? hot : cold)[s].push_back(row);
    }
  HotCold out;
  out.hot = model::pool_groups(p, enc.reps, hot, /*allow_empty=*/true).theta;
  out.cold = model::pool_groups(p, enc.reps, cold, /*allow_empty=*/true).theta;
  for (std::size_t s = 0; s < sessions; ++s) {
    out.has_hot.push_back(hot[s].empty() ? 0 : 1);
    out.has_cold.push_back(cold[s].empty() ? 0 : 1);
  }
  return out;
}

Recombined recombine(const HotCold& teacher, const HotCold& student) {
  if (teacher.hot.shape() != student.hot.shape())
    throw DimensionError("recombine: teacher " + ad::shape_str(teacher.hot.shape()) +
                         " vs student " + ad::shape_str(student.hot.shape()));
  return {ad::concat_cols({teacher.hot, student.cold}),
          ad::concat_cols({student.hot, teacher.cold})};
}

Projection Projection::create(std::size_t dim, std::mt19937_64& rng) {
  return {ad::Tensor::uniform({dim, 2 * dim}, -0.1, 0.1, rng).requires_grad(true),
          ad::Tensor::uniform({dim, 2 * dim}, -0.1, 0.1, rng).requires_grad(true)};
}

ParamList Projection::named() const {
  return {{"proj.teacher", w_teacher}, {"proj.student", w_student}};
}

std::vector<ad::Tensor> Projection::tensors() const { return {w_teacher, w_student}; }

ad::Tensor contrastive_loss(const ad::Tensor& z_teacher, const ad::Tensor& z_student,
                            const Projection& proj, double tau) {
  if (!(tau > 0.0))
    throw ParameterError("contrastive temperature must be positive, got " +
                         std::to_string(tau));
  if (z_teacher.shape() != z_student.shape())
    throw DimensionError("contrastive: " + ad::shape_str(z_teacher.shape()) + " vs " +
                         ad::shape_str(z_student.shape()));
  const ad::Tensor a = ad::matmul_nt(z_teacher, proj.w_teacher);
  const ad::Tensor b = ad::matmul_nt(z_student, proj.w_student);
  const ad::Tensor sim = ad::scale(ad::cosine_matrix(a, b), 1.0 / tau);
  std::vector<std::size_t> diag(z_teacher.rows());
  std::iota(diag.begin(), diag.end(), 0);
  return ad::softmax_cross_entropy(sim, diag);
}

ad::Tensor soft_target_loss(const ad::Tensor& p_teacher, const ad::Tensor& p_student) {
  if (p_teacher.shape() != p_student.shape())
    throw DimensionError("soft target: " + ad::shape_str(p_teacher.shape()) + " vs " +
                         ad::shape_str(p_student.shape()));
  const double inf = std::numeric_limits<double>::infinity();
  const ad::Tensor log_t = ad::log(ad::clamp(p_teacher, kProbFloor, inf));
  const ad::Tensor log_s = ad::log(ad::clamp(p_student, kProbFloor, inf));
  return ad::scale(ad::sum(ad::mul(p_teacher, ad::sub(log_t, log_s))),
                   1.0 / static_cast<double>(p_teacher.rows()));
}

// ---- configuration ----------------------------------------------------------------

void DistillConfig::validate() const {
  if (!(tau > 0.0)) throw ParameterError("distill: τ must be positive");
  if (!(beta >= 0.0) || !(gamma >= 0.0))
    throw ParameterError("distill: β and γ must be non-negative");
  if (batch_size == 0) throw ParameterError("distill: batch size must be positive");
  if (!(lr > 0.0)) throw ParameterError("distill: learning rate must be positive");
}

nlohmann::json DistillConfig::to_json() const {
  return {{"beta", beta},
          {"gamma", gamma},
          {"tau", tau},
          {"mixup", mixup},
          {"bidirectional", bidirectional},
          {"alternating", alternating},
          {"teacher_rec_in_joint", teacher_rec_in_joint},
          {"pretrain_epochs", pretrain_epochs},
          {"joint_epochs", joint_epochs},
          {"batch_size", batch_size},
          {"lr", lr},
          {"weight_decay", weight_decay},
          {"seed", seed},
          {"ablation", ablation}};
}

const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names{"stu-base", "stu-w/o-c", "stu-w/o-b",
                                              "stu-w/o-s", "stu-w/o-m"};
  return names;
}

void apply_ablation(DistillConfig& c, const std::string& name) {
  if (name == "none") {
  } else if (name == "stu-base") {
    c.beta = 0.0;
    c.gamma = 0.0;
    c.mixup = false;
  } else if (name == "stu-w/o-c") {
    c.beta = 0.0;
  } else if (name == "stu-w/o-b") {
    c.bidirectional = false;
  } else if (name == "stu-w/o-s") {
    c.gamma = 0.0;
  } else if (name == "stu-w/o-m") {
    c.mixup = false;
  } else {
    throw ConfigError("unknown ablation '" + name +
                      "' (expected none, stu-base, stu-w/o-c, stu-w/o-b, "
                      "stu-w/o-s or stu-w/o-m)");
  }
  c.ablation = name;
}

// ---- losses -----------------------------------------------------------------------

Batch view_batch(const data::Batch& b) {
  Batch out;
  for (std::size_t i = 0; i < b.size; ++i) out.sessions.push_back(b.prefix(i));
  out.labels = b.labels;
  return out;
}

ad::Tensor student_embeddings(const Student& s, const Teacher& t, bool mixup,
                              std::mt19937_64& rng, ad::Tensor* composite) {
  const ad::Tensor e = s.codec.soft_embeddings(t.table, &rng);
  if (composite != nullptr) *composite = e;
  return mixup ? codec::mixup(e, t.table, s.codec.config.eta) : e;
}

LossTerms pretrain_loss(const Batch& b, const Teacher& t, const Student& s,
                        const DistillConfig& c, std::mt19937_64& rng) {
  LossTerms l;
  ad::Tensor composite;
  const ad::Tensor table = student_embeddings(s, t, c.mixup, rng, &composite);
  const ad::Tensor theta = session_theta(s.params, s.config, table, b.sessions, true, rng);
  l.rec_student = model::rec_loss_from_logits(model::logits(theta, table), b.labels,
                                              s.config.categorical_loss);
  l.mse = codec::mse_loss(composite, t.table);
  l.total = add_term(add_term({}, l.rec_student, 1.0), l.mse, 1.0);
  return l;
}

LossTerms joint_loss(const Batch& b, const Teacher& t, const Student& s,
                     const Projection& proj, const DistillConfig& c,
                     std::span<const std::uint8_t> hot, std::mt19937_64& rng) {
  c.validate();
  LossTerms l;
  const bool teacher_training = c.bidirectional;

  const model::Encoded enc_t =
      model::encode(t.params, t.config, t.table, b.sessions, teacher_training, rng);
  const ad::Tensor theta_t = model::pool_sessions(t.params, enc_t).theta;
  const ad::Tensor logits_t = model::logits(theta_t, t.table);

  ad::Tensor composite;
  const ad::Tensor table_s = student_embeddings(s, t, c.mixup, rng, &composite);
  const model::Encoded enc_s =
      model::encode(s.params, s.config, table_s, b.sessions, true, rng);
  const ad::Tensor theta_s = model::pool_sessions(s.params, enc_s).theta;
  const ad::Tensor logits_s = model::logits(theta_s, table_s);

  l.rec_student =
      model::rec_loss_from_logits(logits_s, b.labels, s.config.categorical_loss);
  if (c.bidirectional && c.teacher_rec_in_joint)
    l.rec_teacher =
        model::rec_loss_from_logits(logits_t, b.labels, t.config.categorical_loss);
  l.mse = codec::mse_loss(composite, t.table);
  if (c.beta > 0.0) {
    const HotCold hc_t = hot_cold_representations(t.params, enc_t, hot);
    const HotCold hc_s = hot_cold_representations(s.params, enc_s, hot);
    const Recombined z = recombine(hc_t, hc_s);
    l.con = contrastive_loss(z.z_teacher, z.z_student, proj, c.tau);
  }
  if (c.gamma > 0.0)
    l.soft = soft_target_loss(ad::softmax_rows(logits_t), ad::softmax_rows(logits_s));

  ad::Tensor total = add_term({}, l.rec_student, 1.0);
  total = add_term(total, l.rec_teacher, 1.0);
  total = add_term(total, l.mse, 1.0);
  total = add_term(total, l.con, c.beta);
  total = add_term(total, l.soft, c.gamma);
  l.total = total;
  return l;
}

// ---- training drivers ---------------------------------------------------------------

nlohmann::json EpochLog::to_json() const {
  return {{"phase", phase},         {"epoch", epoch},
          {"L_rec_stu", rec_student}, {"L_rec_tea", rec_teacher},
          {"L_mse", mse},           {"L_con", con},
          {"L_soft", soft},         {"val_P@10", val_p10},
          {"val_NDCG@10", val_ndcg10}, {"wall_time_s", wall_time_s}};
}

TeacherReport train_teacher(Teacher& t, const data::SessionDataset& ds,
                            const TrainOptions& opt, const EpochCallback& cb) {
  if (opt.batch_size == 0) throw ParameterError("teacher: batch size must be positive");
  if (t.num_items() != ds.num_items())
    throw DimensionError("teacher has " + std::to_string(t.num_items()) +
                         " items, dataset " + std::to_string(ds.num_items()));
  t.set_trainable(true);
  std::mt19937_64 rng(opt.seed);
  ad::Adam adam(t.tensors(), adam_options(opt.lr, opt.weight_decay));
  const std::vector<ad::Tensor> params = t.tensors();

  TeacherReport report;
  Snapshot best;
  const bool has_val = !ds.validation.empty();
  if (has_val) {
    report.best_val_p10 = eval::precision_at_k(teacher_ranks(t, ds.validation), 10);
    best.take(params);
  }
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    const auto batches = data::make_batches(ds.train, ds.vocab, opt.batch_size,
                                            ds.max_len, opt.seed + epoch);
    double total = 0.0;
    for (const auto& raw : batches) {
      const Batch b = view_batch(raw);
      adam.zero_grad();
      ad::Tape tape;
      const ad::Tensor theta =
          session_theta(t.params, t.config, t.table, b.sessions, true, rng);
      const ad::Tensor loss = model::rec_loss_from_logits(
          model::logits(theta, t.table), b.labels, t.config.categorical_loss);
      check_finite(loss, "L_rec(teacher)", "in teacher epoch " + std::to_string(epoch));
      tape.backward(loss);
      adam.step();
      total += loss.item();
    }
    adam.zero_grad();
    EpochLog log;
    log.phase = "teacher";
    log.epoch = epoch;
    log.rec_teacher = batches.empty() ? 0.0 : total / static_cast<double>(batches.size());
    if (has_val) {
      const auto ranks = teacher_ranks(t, ds.validation);
      log.val_p10 = eval::precision_at_k(ranks, 10);
      log.val_ndcg10 = eval::ndcg_at_k(ranks, 10);
      if (log.val_p10 > report.best_val_p10) {
        report.best_val_p10 = log.val_p10;
        report.best_epoch = epoch;
        best.take(params);
      }
    } else {
      report.best_epoch = epoch;
    }
    log.wall_time_s = seconds_since(start);
    report.epochs.push_back(log);
    if (cb) cb(log);
  }
  if (has_val) best.restore(params);
  return report;
}

DistillReport distill(Teacher& t, Student& s, Projection& proj,
                      const data::SessionDataset& ds, const DistillConfig& c,
                      const EpochCallback& cb) {
  c.validate();
  if (t.num_items() != ds.num_items())
    throw DimensionError("teacher has " + std::to_string(t.num_items()) +
                         " items, dataset " + std::to_string(ds.num_items()));
  if (s.config.dim != t.config.dim)
    throw DimensionError("student N=" + std::to_string(s.config.dim) +
                         " differs from teacher N=" + std::to_string(t.config.dim));
  std::mt19937_64 rng(c.seed);
  const std::span<const std::uint8_t> hot(ds.vocab.hot);
  const bool has_val = !ds.validation.empty();
  const auto start = std::chrono::steady_clock::now();

  const std::vector<ad::Tensor> student_params = s.tensors();
  const std::vector<ad::Tensor> proj_params = proj.tensors();
  const std::vector<ad::Tensor> teacher_params = t.tensors();
  ad::Adam adam_s(student_params, adam_options(c.lr, c.weight_decay));
  ad::Adam adam_p(proj_params, adam_options(c.lr, c.weight_decay));
  ad::Adam adam_t(teacher_params, adam_options(c.lr, c.weight_decay));

  DistillReport report;
  auto validate = [&](EpochLog& log) {
    if (!has_val) return;
    const auto ranks = student_ranks(s, t.table, ds.validation);
    log.val_p10 = eval::precision_at_k(ranks, 10);
    log.val_ndcg10 = eval::ndcg_at_k(ranks, 10);
  };
  auto run_epoch = [&](const std::string& phase, std::size_t epoch, bool joint) {
    const auto batches = data::make_batches(ds.train, ds.vocab, c.batch_size, ds.max_len,
                                            c.seed + (joint ? 1000003 : 0) + epoch);
    EpochLog log;
    log.phase = phase;
    log.epoch = epoch;
    std::size_t step = 0;
    for (const auto& raw : batches) {
      const Batch b = view_batch(raw);
      adam_s.zero_grad();
      adam_p.zero_grad();
      adam_t.zero_grad();
      ad::Tape tape;
      const LossTerms l = joint ? joint_loss(b, t, s, proj, c, hot, rng)
                                : pretrain_loss(b, t, s, c, rng);
      check_terms(l, "in " + phase + " epoch " + std::to_string(epoch));
      tape.backward(l.total);
      const bool teacher_turn = c.alternating && (step % 2 == 1);
      if (!teacher_turn) {
        adam_s.step();
        if (joint) adam_p.step();
      }
      if (joint && c.bidirectional && (!c.alternating || teacher_turn)) adam_t.step();
      ++step;
      log.rec_student += l.value(l.rec_student);
      log.rec_teacher += l.value(l.rec_teacher);
      log.mse += l.value(l.mse);
      log.con += l.value(l.con);
      log.soft += l.value(l.soft);
    }
    const double nb = std::max<double>(1.0, static_cast<double>(batches.size()));
    log.rec_student /= nb;
    log.rec_teacher /= nb;
    log.mse /= nb;
    log.con /= nb;
    log.soft /= nb;
    adam_s.zero_grad();
    adam_p.zero_grad();
    adam_t.zero_grad();
    validate(log);
    log.wall_time_s = seconds_since(start);
    report.epochs.push_back(log);
    if (cb) cb(log);
    return log;
  };

  // Phase 2: student pretraining against a frozen teacher.
  t.set_trainable(false);
  for (std::size_t e = 1; e <= c.pretrain_epochs; ++e) run_epoch("pretrain", e, false);

  // Phase 3: joint optimization.
  t.set_trainable(c.bidirectional);
  Snapshot best_s, best_t, best_p;
  auto keep = [&](double p10, std::size_t epoch) {
    report.best_val_p10 = p10;
    report.best_epoch = epoch;
    best_s.take(student_params);
    best_p.take(proj_params);
    if (c.bidirectional) best_t.take(teacher_params);
  };
  {
    EpochLog start_log;
    validate(start_log);
    keep(start_log.val_p10, 0);
  }
  try {
    for (std::size_t e = 1; e <= c.joint_epochs; ++e) {
      const EpochLog log = run_epoch("joint", e, true);
      if (!has_val || log.val_p10 > report.best_val_p10) keep(log.val_p10, e);
    }
  } catch (...) {
    t.set_trainable(true);
    throw;
  }
  best_s.restore(student_params);
  best_p.restore(proj_params);
  if (c.bidirectional) best_t.restore(teacher_params);
  t.set_trainable(true);
  return report;
}

}  // namespace ccrec::distill
