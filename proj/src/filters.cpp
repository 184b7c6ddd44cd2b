#include "ari/filters.hpp"

#include <cmath>

#include "ari/kernels.hpp"
#include "ari/log.hpp"
#include "ari/rng.hpp"

namespace ari {

using nlohmann::json;

json FilterReport::to_json() const {
    json per_rule = json::object();
    for (std::size_t j = 0; j < rule_ids.size(); ++j) {
        per_rule[rule_ids[j]] = {
            {"train_blocked", rules[j].train_blocked},
            {"semantic_blocked", rules[j].semantic_blocked},
        };
    }
    json out;
    out["rules"] = std::move(per_rule);
    out["semantic_no_labeled_class"] = semantic_no_labeled_class;
    return out;
}

FiringTable filter_training_accuracy(const FiringTable& table, const std::vector<Label>& gold,
                                     const FilterConfig& cfg, FilterReport* report) {
    if (gold.size() != table.rows()) {
        throw ValidationError("filter_training_accuracy: gold/table row mismatch");
    }
    FiringTable out = table;
    Rng rng = Rng::stream(cfg.seed, 0xF1);
    const double p = cfg.train_error_mask_prob;

    auto block = [&](std::size_t i, std::size_t j) {
        out.set(i, j, kAbstain);
        if (report != nullptr) report->rules[j].train_blocked++;
    };

    if (cfg.exact_count) {
        std::vector<std::pair<std::size_t, std::size_t>> errors;
        for (std::size_t i = 0; i < table.rows(); ++i) {
            for (std::size_t j = 0; j < table.n_rules; ++j) {
                const Label v = table.at(i, j);
                if (v != kAbstain && v != gold[i]) errors.emplace_back(i, j);
            }
        }
        rng.shuffle(errors);
        const std::size_t n_mask = static_cast<std::size_t>(
            std::llround(p * static_cast<double>(errors.size())));
        for (std::size_t e = 0; e < n_mask; ++e) block(errors[e].first, errors[e].second);
        return out;
    }

    // Row-major entry order; one uniform draw per erroneous firing.
    for (std::size_t i = 0; i < table.rows(); ++i) {
        for (std::size_t j = 0; j < table.n_rules; ++j) {
            const Label v = table.at(i, j);
            if (v == kAbstain || v == gold[i]) continue;
            if (rng.uniform01() < p) block(i, j);
        }
    }
    return out;
}

SemanticGate::SemanticGate(const EmbeddingStore& store, const std::vector<std::string>& labeled_ids,
                           const std::vector<Label>& labeled_labels, int num_classes)
    : num_classes_(num_classes), has_support_(static_cast<std::size_t>(num_classes), false) {
    if (labeled_ids.size() != labeled_labels.size()) {
        throw ValidationError("SemanticGate: ids/labels mismatch");
    }
    const std::size_t dim = store.dim;
    // Normalize labeled embeddings per class once; cosine becomes a dot.
    std::vector<std::vector<double>> class_vecs(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < labeled_ids.size(); ++i) {
        const std::vector<double>* vec = store.find(labeled_ids[i]);
        if (vec == nullptr) {
            throw ValidationError("SemanticGate: no embedding for labeled id '" +
                                  labeled_ids[i] + "'");
        }
        std::vector<double> unit(*vec);
        const double n = kernels::norm2(unit.data(), dim);
        if (n > 0.0) kernels::scale(unit.data(), dim, 1.0 / n);
        auto& flat = class_vecs[static_cast<std::size_t>(labeled_labels[i])];
        flat.insert(flat.end(), unit.begin(), unit.end());
        has_support_[static_cast<std::size_t>(labeled_labels[i])] = true;
    }
    for (const auto& [id, vec] : store.vectors) {
        std::vector<double> unit(vec);
        const double n = kernels::norm2(unit.data(), dim);
        if (n > 0.0) kernels::scale(unit.data(), dim, 1.0 / n);
        std::vector<double> best(static_cast<std::size_t>(num_classes_), -2.0);
        for (int k = 0; k < num_classes_; ++k) {
            const auto& flat = class_vecs[static_cast<std::size_t>(k)];
            const std::size_t count = flat.size() / dim;
            for (std::size_t c = 0; c < count; ++c) {
                const double sim = kernels::dot(flat.data() + c * dim, unit.data(), dim);
                if (sim > best[static_cast<std::size_t>(k)]) {
                    best[static_cast<std::size_t>(k)] = sim;
                }
            }
        }
        max_sim_[id] = std::move(best);
    }
}

bool SemanticGate::class_has_support(Label cls) const {
    return cls >= 0 && cls < num_classes_ && has_support_[static_cast<std::size_t>(cls)];
}

double SemanticGate::max_similarity(const std::string& id, Label cls) const {
    auto it = max_sim_.find(id);
    if (it == max_sim_.end()) {
        throw ValidationError("SemanticGate: no embedding for id '" + id + "'");
    }
    return it->second[static_cast<std::size_t>(cls)];
}

FiringTable filter_semantic(const FiringTable& table, const SemanticGate& gate, double threshold,
                            FilterReport* report) {
    FiringTable out = table;
    for (std::size_t i = 0; i < table.rows(); ++i) {
        for (std::size_t j = 0; j < table.n_rules; ++j) {
            const Label v = table.at(i, j);
            if (v == kAbstain) continue;
            bool blocked;
            if (!gate.class_has_support(v)) {
                blocked = true;
                if (report != nullptr) report->semantic_no_labeled_class++;
            } else {
                blocked = gate.max_similarity(table.example_ids[i], v) < threshold;
            }
            if (blocked) {
                out.set(i, j, kAbstain);
                if (report != nullptr) report->rules[j].semantic_blocked++;
            }
        }
    }
    return out;
}

FilterOutcome apply_filters(const SplitFiringTables& tables, const std::vector<Label>& labeled_gold,
                            const SemanticGate* gate, const std::vector<std::string>& rule_ids,
                            const FilterConfig& cfg) {
    if (cfg.train_error_mask_prob < 0.0 || cfg.train_error_mask_prob > 1.0) {
        throw ValidationError("apply_filters: mask probability out of [0,1]");
    }
    if (cfg.semantic_enabled && gate == nullptr) {
        throw ValidationError("apply_filters: semantic filter enabled without embeddings");
    }
    FilterOutcome outcome;
    outcome.tables = tables;
    outcome.report.rule_ids = rule_ids;
    outcome.report.rules.assign(rule_ids.size(), {});

    if (cfg.train_accuracy_enabled) {
        outcome.tables.labeled =
            filter_training_accuracy(outcome.tables.labeled, labeled_gold, cfg, &outcome.report);
    }
    if (cfg.semantic_enabled) {
        for (FiringTable* t : {&outcome.tables.labeled, &outcome.tables.unlabeled,
                               &outcome.tables.valid, &outcome.tables.test}) {
            if (t->rows() == 0) continue;
            *t = filter_semantic(*t, *gate, cfg.semantic_threshold, &outcome.report);
        }
    }
    return outcome;
}

}  // namespace ari
