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

// Teacher and student recommenders and the self-supervised distillation
// trainer that couples them.
//
// The teacher owns a dense item table X. The student owns its own encoder and
// a codec whose codes are computed from X; during training it embeds items
// with E' = η·X + (1-η)·e (mixup) where e is the soft composite, and at
// deployment with the hardened composite alone.
//
// Joint objective per batch:
//   L = L_rec(student) [+ L_rec(teacher)] + L_mse + β·L_con + γ·L_soft
// L_con contrasts recombined hot/cold session representations across the two
// models with in-batch negatives; L_soft is KL(teacher ‖ student) between the
// two score distributions. In bidirectional mode gradients reach both models.

#ifndef CCREC_DISTILL_HPP_
#define CCREC_DISTILL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ccrec/backbone.hpp"
#include "ccrec/checkpoint.hpp"
#include "ccrec/codec.hpp"
#include "ccrec/eval.hpp"
#include "ccrec/session_data.hpp"
#include "json.hpp"

namespace ccrec::distill {

// ---- models -----------------------------------------------------------------------

struct Teacher {
  model::EncoderConfig config;
  model::EncoderParams params;
  ad::Tensor table;  // |V| × N

  static Teacher create(const model::EncoderConfig& c, std::size_t num_items,
                        std::mt19937_64& rng);
  std::size_t num_items() const { return table.rows(); }
  ParamList named() const;
  std::vector<ad::Tensor> tensors() const;
  void set_trainable(bool on) const;

  void save(const std::filesystem::path& base) const;
  static Teacher load(const std::filesystem::path& base);
};

struct Student {
  model::EncoderConfig config;
  model::EncoderParams params;
  codec::CodecModel codec;

  // With a reference table the codec is fitted to its scale
  // (CodecModel::create_for).
  static Student create(const model::EncoderConfig& c, const codec::CodecConfig& cc,
                        std::mt19937_64& rng, const ad::Tensor* reference = nullptr);
  ParamList named() const;
  std::vector<ad::Tensor> tensors() const;

  void save(const std::filesystem::path& base) const;
  static Student load(const std::filesystem::path& base);
};

// Session representations θ (sessions × N) for the given item table.
ad::Tensor session_theta(const model::EncoderParams& p, const model::EncoderConfig& c,
                         const ad::Tensor& table, const model::SessionList& sessions,
                         bool training, std::mt19937_64& rng);

// 1-based label ranks for every sequence, scored against `table`, evaluated
// without dropout or gradient tracking.
std::vector<std::size_t> rank_labels(const model::EncoderParams& p,
                                     const model::EncoderConfig& c,
                                     const ad::Tensor& table,
                                     const std::vector<data::Sequence>& seqs,
                                     std::size_t batch_size = 256);

std::vector<std::size_t> teacher_ranks(const Teacher& t,
                                       const std::vector<data::Sequence>& seqs);

// Deployed student table: hard codes from the teacher table, then hard
// composition.
ad::Tensor student_table(const Student& s, const ad::Tensor& teacher_table);
std::vector<std::size_t> student_ranks(const Student& s, const ad::Tensor& teacher_table,
                                       const std::vector<data::Sequence>& seqs);

// ---- distillation components --------------------------------------------------------

struct HotCold {
  ad::Tensor hot;   // sessions × N
  ad::Tensor cold;  // sessions × N
  std::vector<std::uint8_t> has_hot, has_cold;
};

// Soft-attention pooling over the hot-item rows and the cold-item rows of each
// session separately; an absent part is a zero row with its flag cleared.
HotCold hot_cold_representations(const model::EncoderParams& p,
                                 const model::Encoded& enc,
                                 std::span<const std::uint8_t> hot_flags);

struct Recombined {
  ad::Tensor z_teacher;  // [θ_hot(teacher) ; θ_cold(student)]
  ad::Tensor z_student;  // [θ_hot(student) ; θ_cold(teacher)]
};

Recombined recombine(const HotCold& teacher, const HotCold& student);

struct Projection {
  ad::Tensor w_teacher;  // N × 2N
  ad::Tensor w_student;  // N × 2N

  static Projection create(std::size_t dim, std::mt19937_64& rng);
  ParamList named() const;
  std::vector<ad::Tensor> tensors() const;
};

// Mean over sessions s of -log softmax_j(cos(W_t z_t(s), W_s z_s(j)) / τ)[s].
// ParameterError for τ <= 0.
ad::Tensor contrastive_loss(const ad::Tensor& z_teacher, const ad::Tensor& z_student,
                            const Projection& proj, double tau);

// Mean over rows of Σ_v p_t(v)·(log p_t(v) - log p_s(v)), both clamped at 1e-10
// inside the logarithms.
ad::Tensor soft_target_loss(const ad::Tensor& p_teacher, const ad::Tensor& p_student);

// ---- configuration ----------------------------------------------------------------

struct TrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 100;
  double lr = 0.001;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
};

struct DistillConfig {
  double beta = 0.01;
  double gamma = 0.3;
  double tau = 0.2;
  bool mixup = true;
  bool bidirectional = true;
  bool alternating = false;         // alternate teacher/student updates
  bool teacher_rec_in_joint = true;
  std::size_t pretrain_epochs = 5;
  std::size_t joint_epochs = 30;
  std::size_t batch_size = 100;
  double lr = 0.001;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
  std::string ablation = "none";

  void validate() const;
  nlohmann::json to_json() const;
};

// Applies a named ablation: stu-base, stu-w/o-c, stu-w/o-b, stu-w/o-s,
// stu-w/o-m, or none. ConfigError for an unknown name.
void apply_ablation(DistillConfig& c, const std::string& name);
const std::vector<std::string>& ablation_names();

// ---- losses -----------------------------------------------------------------------

struct LossTerms {
  ad::Tensor total;
  ad::Tensor rec_student, rec_teacher, mse, con, soft;  // undefined when off
  double value(const ad::Tensor& t) const { return t.defined() ? t.item() : 0.0; }
};

struct Batch {
  model::SessionList sessions;
  std::vector<std::uint32_t> labels;
};

Batch view_batch(const data::Batch& b);

// Student training embeddings: E' with mixup, else the soft composite. The
// composite itself is returned through `composite` when requested.
ad::Tensor student_embeddings(const Student& s, const Teacher& t, bool mixup,
                              std::mt19937_64& rng, ad::Tensor* composite);

// Pretraining objective L_rec(student) + L_mse.
LossTerms pretrain_loss(const Batch& b, const Teacher& t, const Student& s,
                        const DistillConfig& c, std::mt19937_64& rng);

// Joint objective with every term; disabled terms (β or γ zero) are skipped.
LossTerms joint_loss(const Batch& b, const Teacher& t, const Student& s,
                     const Projection& proj, const DistillConfig& c,
                     std::span<const std::uint8_t> hot, std::mt19937_64& rng);

// ---- training drivers ---------------------------------------------------------------

struct EpochLog {
  std::string phase;
  std::size_t epoch = 0;
  double rec_student = 0.0, rec_teacher = 0.0, mse = 0.0, con = 0.0, soft = 0.0;
  double val_p10 = 0.0, val_ndcg10 = 0.0;
  double wall_time_s = 0.0;

  nlohmann::json to_json() const;
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct TeacherReport {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;  // 0 = initial weights
  double best_val_p10 = 0.0;
};

// Optimizes the teacher's L_rec on augmented training sequences, keeping the
// weights with the best validation P@10. Throws NumericError on a non-finite
// loss.
TeacherReport train_teacher(Teacher& t, const data::SessionDataset& ds,
                            const TrainOptions& opt, const EpochCallback& cb = {});

struct DistillReport {
  std::vector<EpochLog> epochs;  // pretraining then joint
  std::size_t best_epoch = 0;
  double best_val_p10 = 0.0;
};

// Student pretraining (teacher frozen), then the joint phase. Best student
// (and teacher, when bidirectional) by validation P@10 are retained.
DistillReport distill(Teacher& t, Student& s, Projection& proj,
                      const data::SessionDataset& ds, const DistillConfig& c,
                      const EpochCallback& cb = {});

}  // namespace ccrec::distill

#endif  // CCREC_DISTILL_HPP_
