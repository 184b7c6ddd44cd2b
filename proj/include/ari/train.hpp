#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ari/aggregator.hpp"
#include "ari/backbone.hpp"
#include "ari/featurize.hpp"
#include "ari/rules.hpp"
#include "ari/types.hpp"

namespace ari {

struct TrainConfig {
    int self_train_iterations = 25;
    double labeled_to_unlabeled_step_ratio = 0.7;
    int batch_size = 32;
    int max_steps = 12500;  // cap on total student gradient steps
    DistillMode distill_mode = DistillMode::Soft;
    double distill_threshold = 0.7;
    enum class Head { Teacher, Student };
    Head inference_head = Head::Student;
    int patience = 5;
    int pretrain_steps = 100;
    int unsup_steps_per_iter = 32;  // labeled steps per phase = ceil(ratio * this)
    double student_lr = 0.05;
    double teacher_lr = 0.05;
    double momentum = 0.0;
    uint64_t seed = 1;
};

TrainConfig::Head head_from_name(const std::string& name);
const char* head_name(TrainConfig::Head head);

struct IterationStats {
    double val_f1_teacher = 0.0;
    double val_f1_student = 0.0;
    double loss_tea_sup = 0.0;
    double loss_tea_unsup = 0.0;
    double loss_stu_sup = 0.0;
    double loss_stu_unsup = 0.0;
    double unlabeled_rule_coverage = 0.0;
    double mean_rule_attention = 0.0;  // E[sum_fired s_j/Q] over unlabeled
};

struct TrainHistory {
    double pretrain_loss = 0.0;
    std::vector<IterationStats> iterations;
    int best_iteration = -1;  // -1 = the pretrained model was never beaten
    double best_val_f1 = 0.0;
    int total_student_steps = 0;
    bool step_cap_hit = false;

    nlohmann::json to_json() const;
};

// Everything the loops need, assembled by the caller: the representation
// matrix (aligned with the corpus), split row indices, per-row gold labels
// (kAbstain where absent) and the filtered firing tables per split.
struct TrainData {
    const FeatureMatrix* repr = nullptr;
    std::vector<std::size_t> labeled;
    std::vector<std::size_t> unlabeled;
    std::vector<std::size_t> valid;
    std::vector<std::size_t> test;
    std::vector<Label> labels;
    const FiringTable* labeled_firings = nullptr;
    const FiringTable* unlabeled_firings = nullptr;
    const FiringTable* valid_firings = nullptr;
    const FiringTable* test_firings = nullptr;
    std::vector<std::string> rule_ids;
};

struct TrainResult {
    BackboneModel student;
    Aggregator teacher;
    BackboneModel best_student;
    Aggregator best_teacher;
    TrainHistory history;
};

// Pretrain the student on labeled data, then alternate teacher phases
// (supervised + min-entropy) and student phases (supervised + distillation),
// early-stopping on validation F1 of the inference head.
TrainResult run_ari(const TrainData& data, const BackboneConfig& backbone_cfg,
                    const AggregatorConfig& aggregator_cfg, const TrainConfig& cfg);

struct BaselineResult {
    BackboneModel student;
    BackboneModel best_student;
    TrainHistory history;
};

// Same loop without rules or teacher: each iteration takes the labeled steps,
// freezes the student, pseudo-labels the unlabeled set with it and distills.
BaselineResult run_selftrain_baseline(const TrainData& data, const BackboneConfig& backbone_cfg,
                                      const TrainConfig& cfg);

struct VariantResult {
    DistillMode mode;
    double valid_f1 = 0.0;
    double test_f1 = 0.0;
    int best_iteration = -1;
};

// One full run per distill mode with shared seeds.
std::vector<VariantResult> sweep_variants(const TrainData& data,
                                          const BackboneConfig& backbone_cfg,
                                          const AggregatorConfig& aggregator_cfg,
                                          const TrainConfig& base_cfg,
                                          const std::vector<DistillMode>& modes);

nlohmann::json sweep_to_json(const std::vector<VariantResult>& results);
std::string sweep_to_text(const std::vector<VariantResult>& results);

std::vector<Label> predict_student(const BackboneModel& model, const TrainData& data,
                                   const std::vector<std::size_t>& rows);
std::vector<Label> predict_teacher(const Aggregator& teacher, const BackboneModel& student,
                                   const TrainData& data, const std::vector<std::size_t>& rows,
                                   const FiringTable& firings);

}  // namespace ari
