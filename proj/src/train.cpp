#include "ari/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ari/log.hpp"
#include "ari/metrics.hpp"
#include "ari/rng.hpp"

namespace ari {

using nlohmann::json;

TrainConfig::Head head_from_name(const std::string& name) {
    if (name == "teacher") return TrainConfig::Head::Teacher;
    if (name == "student") return TrainConfig::Head::Student;
    throw ValidationError("unknown inference head '" + name + "'");
}

const char* head_name(TrainConfig::Head head) {
    return head == TrainConfig::Head::Teacher ? "teacher" : "student";
}

json TrainHistory::to_json() const {
    json iters = json::array();
    for (const IterationStats& it : iterations) {
        iters.push_back({{"val_f1_teacher", it.val_f1_teacher},
                         {"val_f1_student", it.val_f1_student},
                         {"loss_tea_sup", it.loss_tea_sup},
                         {"loss_tea_unsup", it.loss_tea_unsup},
                         {"loss_stu_sup", it.loss_stu_sup},
                         {"loss_stu_unsup", it.loss_stu_unsup},
                         {"unlabeled_rule_coverage", it.unlabeled_rule_coverage},
                         {"mean_rule_attention", it.mean_rule_attention}});
    }
    return {{"pretrain_loss", pretrain_loss},
            {"iterations", iters},
            {"best_iteration", best_iteration},
            {"best_val_f1", best_val_f1},
            {"total_student_steps", total_student_steps},
            {"step_cap_hit", step_cap_hit}};
}

namespace {

// Round-robin batches over a shuffled index order; reshuffles per epoch.
class BatchCycler {
public:
    BatchCycler(std::vector<std::size_t> rows, Rng rng)
        : rows_(std::move(rows)), rng_(rng), pos_(rows_.size()) {}

    std::vector<std::size_t> next(std::size_t batch_size) {
        std::vector<std::size_t> batch;
        batch.reserve(std::min(batch_size, rows_.size()));
        while (batch.size() < std::min(batch_size, rows_.size())) {
            if (pos_ == rows_.size()) {
                rng_.shuffle(rows_);
                pos_ = 0;
            }
            batch.push_back(rows_[pos_++]);
        }
        return batch;
    }

private:
    std::vector<std::size_t> rows_;
    Rng rng_;
    std::size_t pos_ = 0;
};

int labeled_steps_for(const TrainConfig& cfg) {
    return static_cast<int>(std::ceil(cfg.labeled_to_unlabeled_step_ratio *
                                      static_cast<double>(cfg.unsup_steps_per_iter)));
}

void validate_train_inputs(const TrainData& data, const TrainConfig& cfg, bool need_rules) {
    if (data.repr == nullptr) throw ValidationError("train: representation matrix missing");
    if (data.labeled.empty()) throw ValidationError("train: empty labeled split");
    if (data.valid.empty()) throw ValidationError("train: empty validation split");
    if (cfg.labeled_to_unlabeled_step_ratio <= 0.0 ||
        cfg.labeled_to_unlabeled_step_ratio > 1.0) {
        throw ValidationError("train: step ratio must be in (0,1]");
    }
    if (cfg.self_train_iterations < 0) throw ValidationError("train: negative iterations");
    if (need_rules) {
        if (data.labeled_firings == nullptr || data.valid_firings == nullptr) {
            throw ValidationError("train: firing tables for labeled/valid splits required");
        }
        if (!data.unlabeled.empty() && data.unlabeled_firings == nullptr) {
            throw ValidationError("train: firing table for unlabeled split required");
        }
        if (data.rule_ids.empty()) throw ValidationError("train: rules are empty");
        for (const FiringTable* t : {data.labeled_firings, data.unlabeled_firings,
                                     data.valid_firings}) {
            if (t != nullptr && t->rows() > 0 && t->n_rules != data.rule_ids.size()) {
                throw ValidationError("train: firing table rule count does not match rule ids");
            }
        }
    }
}

std::vector<Label> golds_for(const TrainData& data, const std::vector<std::size_t>& rows) {
    std::vector<Label> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(data.labels[r]);
    return out;
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double total = 0.0;
    for (double x : xs) total += x;
    return total / static_cast<double>(xs.size());
}

// Snapshot the student's distribution for a row set (targets, teacher input).
std::vector<std::vector<double>> student_dists(const BackboneModel& student,
                                               const TrainData& data,
                                               const std::vector<std::size_t>& rows) {
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(student.predict_proba(data.repr->row_span(r)));
    return out;
}

}  // namespace

std::vector<Label> predict_student(const BackboneModel& model, const TrainData& data,
                                   const std::vector<std::size_t>& rows) {
    std::vector<Label> preds;
    preds.reserve(rows.size());
    for (std::size_t r : rows) {
        preds.push_back(argmax_label(model.predict_proba(data.repr->row_span(r))));
    }
    return preds;
}

std::vector<Label> predict_teacher(const Aggregator& teacher, const BackboneModel& student,
                                   const TrainData& data, const std::vector<std::size_t>& rows,
                                   const FiringTable& firings) {
    if (firings.rows() != rows.size()) throw ValidationError("predict_teacher: table mismatch");
    std::vector<Label> preds;
    preds.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::vector<double> b = student.predict_proba(data.repr->row_span(rows[i]));
        AggregateOutput out = teacher.aggregate(
            data.repr->row_span(rows[i]),
            {firings.entries.data() + i * firings.n_rules, firings.n_rules}, b);
        preds.push_back(argmax_label(out.a));
    }
    return preds;
}

TrainResult run_ari(const TrainData& data, const BackboneConfig& backbone_cfg,
                    const AggregatorConfig& aggregator_cfg, const TrainConfig& cfg) {
    validate_train_inputs(data, cfg, /*need_rules=*/true);
    const bool have_unlabeled = !data.unlabeled.empty();
    if (!have_unlabeled) {
        log::info("run_ari: unlabeled split is empty; running supervised phases only");
    }
    const int num_classes = backbone_cfg.num_classes;
    const std::size_t n_rules = data.rule_ids.size();

    BackboneModel student = BackboneModel::init(backbone_cfg);
    Aggregator teacher = Aggregator::init(aggregator_cfg);

    BatchCycler pretrain_batches(data.labeled, Rng::stream(cfg.seed, 0xB1));
    BatchCycler stu_sup_batches(data.labeled, Rng::stream(cfg.seed, 0xB2));
    BatchCycler stu_unsup_batches(data.unlabeled, Rng::stream(cfg.seed, 0xB3));
    BatchCycler tea_sup_batches(data.labeled, Rng::stream(cfg.seed, 0xB4));
    BatchCycler tea_unsup_batches(data.unlabeled, Rng::stream(cfg.seed, 0xB5));

    TrainHistory history;
    int student_steps = 0;

    // Row lookup from corpus row -> position within a split (firing tables
    // are stored per split, in split order).
    auto split_pos = [](const std::vector<std::size_t>& rows) {
        std::vector<std::size_t> pos(rows.empty() ? 0 : *std::max_element(rows.begin(), rows.end()) + 1);
        for (std::size_t i = 0; i < rows.size(); ++i) pos[rows[i]] = i;
        return pos;
    };
    const std::vector<std::size_t> labeled_pos = split_pos(data.labeled);
    const std::vector<std::size_t> unlabeled_pos = split_pos(data.unlabeled);

    // Step 1: pretrain the student on the labeled split.
    {
        std::vector<double> losses;
        for (int s = 0; s < cfg.pretrain_steps && student_steps < cfg.max_steps; ++s) {
            std::vector<std::size_t> batch =
                pretrain_batches.next(static_cast<std::size_t>(cfg.batch_size));
            std::vector<const double*> h;
            std::vector<Label> y;
            for (std::size_t r : batch) {
                h.push_back(data.repr->row(r));
                y.push_back(data.labels[r]);
            }
            losses.push_back(student.step_supervised(h, y, cfg.student_lr, cfg.momentum));
            ++student_steps;
        }
        history.pretrain_loss = mean_of(losses);
    }

    const std::vector<Label> valid_golds = golds_for(data, data.valid);
    auto head_f1 = [&](const BackboneModel& stu, const Aggregator& tea) {
        const std::vector<Label> stu_preds = predict_student(stu, data, data.valid);
        const double stu_f1 = f1_score(stu_preds, valid_golds, num_classes).f1;
        const std::vector<Label> tea_preds =
            predict_teacher(tea, stu, data, data.valid, *data.valid_firings);
        const double tea_f1 = f1_score(tea_preds, valid_golds, num_classes).f1;
        return std::pair<double, double>(tea_f1, stu_f1);
    };
    // Checkpoint selection: F1 first, validation cross-entropy as the
    // tie-break (a small validation set quantizes F1 coarsely).
    auto head_val_loss = [&](const BackboneModel& stu, const Aggregator& tea) {
        std::vector<const double*> h;
        std::vector<const int16_t*> fir;
        std::vector<std::vector<double>> dists;
        std::vector<Label> y;
        for (std::size_t i = 0; i < data.valid.size(); ++i) {
            const std::size_t r = data.valid[i];
            h.push_back(data.repr->row(r));
            fir.push_back(data.valid_firings->entries.data() +
                          i * data.valid_firings->n_rules);
            y.push_back(data.labels[r]);
            if (cfg.inference_head == TrainConfig::Head::Teacher) {
                dists.push_back(stu.predict_proba(data.repr->row_span(r)));
            }
        }
        if (cfg.inference_head == TrainConfig::Head::Student) {
            return stu.loss_supervised(h, y);
        }
        std::vector<const double*> b;
        for (const auto& d : dists) b.push_back(d.data());
        return tea.loss_supervised(h, fir, b, y);
    };

    auto [init_tea_f1, init_stu_f1] = head_f1(student, teacher);
    history.best_val_f1 =
        cfg.inference_head == TrainConfig::Head::Teacher ? init_tea_f1 : init_stu_f1;
    history.best_iteration = -1;
    double best_val_loss = head_val_loss(student, teacher);
    BackboneModel best_student = student;
    Aggregator best_teacher = teacher;

    const int labeled_steps = labeled_steps_for(cfg);
    int stale = 0;

    for (int iter = 0; iter < cfg.self_train_iterations; ++iter) {
        IterationStats stats;

        // 2a: teacher supervised, backbone frozen.
        {
            std::vector<double> losses;
            for (int s = 0; s < labeled_steps; ++s) {
                std::vector<std::size_t> batch =
                    tea_sup_batches.next(static_cast<std::size_t>(cfg.batch_size));
                std::vector<const double*> h;
                std::vector<const int16_t*> fir;
                std::vector<Label> y;
                std::vector<std::vector<double>> dists;
                dists.reserve(batch.size());
                for (std::size_t r : batch) {
                    h.push_back(data.repr->row(r));
                    const std::size_t p = labeled_pos[r];
                    fir.push_back(data.labeled_firings->entries.data() +
                                  p * data.labeled_firings->n_rules);
                    y.push_back(data.labels[r]);
                    dists.push_back(student.predict_proba(data.repr->row_span(r)));
                }
                std::vector<const double*> b;
                for (const auto& d : dists) b.push_back(d.data());
                losses.push_back(teacher.step_supervised(h, fir, b, y, cfg.teacher_lr,
                                                         cfg.momentum));
            }
            stats.loss_tea_sup = mean_of(losses);
        }

        // 2b: teacher min-entropy on unlabeled.
        if (have_unlabeled) {
            std::vector<double> losses;
            for (int s = 0; s < cfg.unsup_steps_per_iter; ++s) {
                std::vector<std::size_t> batch =
                    tea_unsup_batches.next(static_cast<std::size_t>(cfg.batch_size));
                std::vector<const double*> h;
                std::vector<const int16_t*> fir;
                std::vector<std::vector<double>> dists;
                dists.reserve(batch.size());
                for (std::size_t r : batch) {
                    h.push_back(data.repr->row(r));
                    const std::size_t p = unlabeled_pos[r];
                    fir.push_back(data.unlabeled_firings->entries.data() +
                                  p * data.unlabeled_firings->n_rules);
                    dists.push_back(student.predict_proba(data.repr->row_span(r)));
                }
                std::vector<const double*> b;
                for (const auto& d : dists) b.push_back(d.data());
                losses.push_back(teacher.step_entropy(h, fir, b, cfg.teacher_lr, cfg.momentum));
            }
            stats.loss_tea_unsup = mean_of(losses);
        }

        // 2c: student supervised.
        {
            std::vector<double> losses;
            for (int s = 0; s < labeled_steps && student_steps < cfg.max_steps; ++s) {
                std::vector<std::size_t> batch =
                    stu_sup_batches.next(static_cast<std::size_t>(cfg.batch_size));
                std::vector<const double*> h;
                std::vector<Label> y;
                for (std::size_t r : batch) {
                    h.push_back(data.repr->row(r));
                    y.push_back(data.labels[r]);
                }
                losses.push_back(student.step_supervised(h, y, cfg.student_lr, cfg.momentum));
                ++student_steps;
            }
            stats.loss_stu_sup = mean_of(losses);
        }

        // 2d: student distills from the frozen teacher. Targets are fixed at
        // phase start (frozen teacher + frozen student snapshot).
        if (have_unlabeled) {
            std::vector<std::vector<double>> b_snapshot =
                student_dists(student, data, data.unlabeled);
            std::vector<std::vector<double>> targets(data.unlabeled.size());
            for (std::size_t i = 0; i < data.unlabeled.size(); ++i) {
                AggregateOutput out = teacher.aggregate(
                    data.repr->row_span(data.unlabeled[i]),
                    {data.unlabeled_firings->entries.data() + i * n_rules, n_rules},
                    b_snapshot[i]);
                targets[i] = std::move(out.a);
            }
            std::vector<double> losses;
            for (int s = 0; s < cfg.unsup_steps_per_iter && student_steps < cfg.max_steps; ++s) {
                std::vector<std::size_t> batch =
                    stu_unsup_batches.next(static_cast<std::size_t>(cfg.batch_size));
                std::vector<const double*> h;
                std::vector<const double*> t;
                for (std::size_t r : batch) {
                    h.push_back(data.repr->row(r));
                    t.push_back(targets[unlabeled_pos[r]].data());
                }
                losses.push_back(student
                                     .step_distill(h, t, cfg.distill_mode, cfg.distill_threshold,
                                                   cfg.student_lr, cfg.momentum)
                                     .loss);
                ++student_steps;
            }
            stats.loss_stu_unsup = mean_of(losses);
        }

        // Bookkeeping: validation F1 per head, rule coverage + attention mass.
        auto [tea_f1, stu_f1] = head_f1(student, teacher);
        stats.val_f1_teacher = tea_f1;
        stats.val_f1_student = stu_f1;
        if (have_unlabeled) {
            stats.unlabeled_rule_coverage = data.unlabeled_firings->coverage();
            double attention = 0.0;
            for (std::size_t i = 0; i < data.unlabeled.size(); ++i) {
                const std::vector<double> b =
                    student.predict_proba(data.repr->row_span(data.unlabeled[i]));
                AggregateOutput out = teacher.aggregate(
                    data.repr->row_span(data.unlabeled[i]),
                    {data.unlabeled_firings->entries.data() + i * n_rules, n_rules}, b);
                double mass = 0.0;
                for (std::size_t j = 0; j < n_rules; ++j) {
                    if (data.unlabeled_firings->at(i, j) != kAbstain) {
                        mass += out.rule_weight(j);
                    }
                }
                attention += mass;
            }
            stats.mean_rule_attention =
                attention / static_cast<double>(data.unlabeled.size());
        }
        history.iterations.push_back(stats);

        const double cur =
            cfg.inference_head == TrainConfig::Head::Teacher ? tea_f1 : stu_f1;
        const double cur_loss = head_val_loss(student, teacher);
        const bool improved_f1 = cur > history.best_val_f1;
        if (improved_f1 || (cur == history.best_val_f1 && cur_loss < best_val_loss)) {
            history.best_val_f1 = cur;
            history.best_iteration = iter;
            best_val_loss = cur_loss;
            best_student = student;
            best_teacher = teacher;
        }
        if (improved_f1) {
            stale = 0;
        } else {
            ++stale;
        }
        if (stale >= cfg.patience) {
            log::info("early stop after iteration ", iter, " (no improvement for ",
                      cfg.patience, " iterations)");
            break;
        }
        if (student_steps >= cfg.max_steps) {
            history.step_cap_hit = true;
            log::info("stopping: student step cap of ", cfg.max_steps, " reached");
            break;
        }
    }
    history.total_student_steps = student_steps;
    return {std::move(student), std::move(teacher), std::move(best_student),
            std::move(best_teacher), history};
}

BaselineResult run_selftrain_baseline(const TrainData& data, const BackboneConfig& backbone_cfg,
                                      const TrainConfig& cfg) {
    validate_train_inputs(data, cfg, /*need_rules=*/false);
    const bool have_unlabeled = !data.unlabeled.empty();
    const int num_classes = backbone_cfg.num_classes;

    BackboneModel student = BackboneModel::init(backbone_cfg);

    // Streams mirror run_ari so the two loops are step-for-step comparable.
    BatchCycler pretrain_batches(data.labeled, Rng::stream(cfg.seed, 0xB1));
    BatchCycler stu_sup_batches(data.labeled, Rng::stream(cfg.seed, 0xB2));
    BatchCycler stu_unsup_batches(data.unlabeled, Rng::stream(cfg.seed, 0xB3));

    auto split_pos = [](const std::vector<std::size_t>& rows) {
        std::vector<std::size_t> pos(rows.empty() ? 0 : *std::max_element(rows.begin(), rows.end()) + 1);
        for (std::size_t i = 0; i < rows.size(); ++i) pos[rows[i]] = i;
        return pos;
    };
    const std::vector<std::size_t> unlabeled_pos = split_pos(data.unlabeled);

    TrainHistory history;
    int student_steps = 0;
    {
        std::vector<double> losses;
        for (int s = 0; s < cfg.pretrain_steps && student_steps < cfg.max_steps; ++s) {
            std::vector<std::size_t> batch =
                pretrain_batches.next(static_cast<std::size_t>(cfg.batch_size));
            std::vector<const double*> h;
            std::vector<Label> y;
            for (std::size_t r : batch) {
                h.push_back(data.repr->row(r));
                y.push_back(data.labels[r]);
            }
            losses.push_back(student.step_supervised(h, y, cfg.student_lr, cfg.momentum));
            ++student_steps;
        }
        history.pretrain_loss = mean_of(losses);
    }

    const std::vector<Label> valid_golds = golds_for(data, data.valid);
    auto student_f1 = [&](const BackboneModel& stu) {
        return f1_score(predict_student(stu, data, data.valid), valid_golds, num_classes).f1;
    };
    auto student_val_loss = [&](const BackboneModel& stu) {
        std::vector<const double*> h;
        std::vector<Label> y;
        for (std::size_t r : data.valid) {
            h.push_back(data.repr->row(r));
            y.push_back(data.labels[r]);
        }
        return stu.loss_supervised(h, y);
    };
    history.best_val_f1 = student_f1(student);
    history.best_iteration = -1;
    double best_val_loss = student_val_loss(student);
    BackboneModel best_student = student;

    const int labeled_steps = labeled_steps_for(cfg);
    int stale = 0;
    for (int iter = 0; iter < cfg.self_train_iterations; ++iter) {
        IterationStats stats;
        {
            std::vector<double> losses;
            for (int s = 0; s < labeled_steps && student_steps < cfg.max_steps; ++s) {
                std::vector<std::size_t> batch =
                    stu_sup_batches.next(static_cast<std::size_t>(cfg.batch_size));
                std::vector<const double*> h;
                std::vector<Label> y;
                for (std::size_t r : batch) {
                    h.push_back(data.repr->row(r));
                    y.push_back(data.labels[r]);
                }
                losses.push_back(student.step_supervised(h, y, cfg.student_lr, cfg.momentum));
                ++student_steps;
            }
            stats.loss_stu_sup = mean_of(losses);
        }
        if (have_unlabeled) {
            // Pseudo-label with a frozen snapshot, then distill toward it.
            std::vector<std::vector<double>> targets =
                student_dists(student, data, data.unlabeled);
            std::vector<double> losses;
            for (int s = 0; s < cfg.unsup_steps_per_iter && student_steps < cfg.max_steps; ++s) {
                std::vector<std::size_t> batch =
                    stu_unsup_batches.next(static_cast<std::size_t>(cfg.batch_size));
                std::vector<const double*> h;
                std::vector<const double*> t;
                for (std::size_t r : batch) {
                    h.push_back(data.repr->row(r));
                    t.push_back(targets[unlabeled_pos[r]].data());
                }
                losses.push_back(student
                                     .step_distill(h, t, cfg.distill_mode, cfg.distill_threshold,
                                                   cfg.student_lr, cfg.momentum)
                                     .loss);
                ++student_steps;
            }
            stats.loss_stu_unsup = mean_of(losses);
        }
        const double f1 = student_f1(student);
        stats.val_f1_student = f1;
        stats.val_f1_teacher = f1;  // no teacher in this loop
        history.iterations.push_back(stats);
        const double cur_loss = student_val_loss(student);
        const bool improved_f1 = f1 > history.best_val_f1;
        if (improved_f1 || (f1 == history.best_val_f1 && cur_loss < best_val_loss)) {
            history.best_val_f1 = f1;
            history.best_iteration = iter;
            best_val_loss = cur_loss;
            best_student = student;
        }
        if (improved_f1) {
            stale = 0;
        } else {
            ++stale;
        }
        if (stale >= cfg.patience) break;
        if (student_steps >= cfg.max_steps) {
            history.step_cap_hit = true;
            break;
        }
    }
    history.total_student_steps = student_steps;
    return {std::move(student), std::move(best_student), history};
}

std::vector<VariantResult> sweep_variants(const TrainData& data,
                                          const BackboneConfig& backbone_cfg,
                                          const AggregatorConfig& aggregator_cfg,
                                          const TrainConfig& base_cfg,
                                          const std::vector<DistillMode>& modes) {
    if (modes.empty()) throw ValidationError("sweep_variants: no modes given");
    std::vector<VariantResult> results;
    const std::vector<Label> valid_golds = golds_for(data, data.valid);
    const std::vector<Label> test_golds = golds_for(data, data.test);
    for (DistillMode mode : modes) {
        TrainConfig cfg = base_cfg;
        cfg.distill_mode = mode;
        TrainResult run = run_ari(data, backbone_cfg, aggregator_cfg, cfg);
        VariantResult vr;
        vr.mode = mode;
        vr.best_iteration = run.history.best_iteration;
        auto eval_head = [&](const std::vector<std::size_t>& rows, const FiringTable* firings,
                             const std::vector<Label>& golds) {
            if (rows.empty()) return 0.0;
            std::vector<Label> preds;
            if (cfg.inference_head == TrainConfig::Head::Teacher) {
                preds = predict_teacher(run.best_teacher, run.best_student, data, rows, *firings);
            } else {
                preds = predict_student(run.best_student, data, rows);
            }
            return f1_score(preds, golds, backbone_cfg.num_classes).f1;
        };
        vr.valid_f1 = eval_head(data.valid, data.valid_firings, valid_golds);
        if (!data.test.empty() &&
            (cfg.inference_head == TrainConfig::Head::Student || data.test_firings != nullptr)) {
            vr.test_f1 = eval_head(data.test, data.test_firings, test_golds);
        }
        results.push_back(vr);
    }
    return results;
}

json sweep_to_json(const std::vector<VariantResult>& results) {
    json out = json::array();
    for (const VariantResult& r : results) {
        out.push_back({{"mode", distill_mode_name(r.mode)},
                       {"valid_f1", r.valid_f1},
                       {"test_f1", r.test_f1},
                       {"best_iteration", r.best_iteration}});
    }
    return out;
}

std::string sweep_to_text(const std::vector<VariantResult>& results) {
    std::string out = "mode          valid_f1   test_f1\n";
    char buf[96];
    for (const VariantResult& r : results) {
        std::snprintf(buf, sizeof(buf), "%-12s  %8.4f  %8.4f\n", distill_mode_name(r.mode),
                      r.valid_f1, r.test_f1);
        out += buf;
    }
    return out;
}

}  // namespace ari
