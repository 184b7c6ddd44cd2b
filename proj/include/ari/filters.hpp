#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ari/corpus.hpp"
#include "ari/rules.hpp"
#include "ari/types.hpp"

namespace ari {

struct FilterConfig {
    double train_error_mask_prob = 0.5;
    double semantic_threshold = 0.8;
    bool train_accuracy_enabled = false;
    bool semantic_enabled = false;
    bool exact_count = false;  // mask exactly round(p * errors) instead of per-entry Bernoulli
    uint64_t seed = 0;
};

struct FilterReport {
    struct PerRule {
        int64_t train_blocked = 0;
        int64_t semantic_blocked = 0;
    };
    std::vector<std::string> rule_ids;
    std::vector<PerRule> rules;
    int64_t semantic_no_labeled_class = 0;

    nlohmann::json to_json() const;
};

// Fires that disagree with the gold label are flipped to Abstain, each
// independently with probability train_error_mask_prob (seeded); correct
// firings and abstains are untouched.
FiringTable filter_training_accuracy(const FiringTable& table, const std::vector<Label>& gold,
                                     const FilterConfig& cfg, FilterReport* report);

// Precomputed max cosine similarity from any example to the labeled examples
// of each class, built once before training.
class SemanticGate {
public:
    SemanticGate(const EmbeddingStore& store, const std::vector<std::string>& labeled_ids,
                 const std::vector<Label>& labeled_labels, int num_classes);

    bool class_has_support(Label cls) const;
    // Max cosine from `id` to labeled embeddings with that label; requires
    // class_has_support(cls).
    double max_similarity(const std::string& id, Label cls) const;

private:
    int num_classes_;
    std::vector<bool> has_support_;
    std::map<std::string, std::vector<double>> max_sim_;  // id -> per-class max
};

// A firing predicting l survives iff its max similarity to same-label
// training embeddings reaches the threshold; classes without any labeled
// embedding always block (counted separately in the report).
FiringTable filter_semantic(const FiringTable& table, const SemanticGate& gate, double threshold,
                            FilterReport* report);

struct SplitFiringTables {
    FiringTable labeled;
    FiringTable unlabeled;
    FiringTable valid;
    FiringTable test;
};

struct FilterOutcome {
    SplitFiringTables tables;
    FilterReport report;
};

// TrainAccuracy first (labeled table only), then Semantic on every split.
// Enabling Semantic without a gate is a configuration error.
FilterOutcome apply_filters(const SplitFiringTables& tables, const std::vector<Label>& labeled_gold,
                            const SemanticGate* gate, const std::vector<std::string>& rule_ids,
                            const FilterConfig& cfg);

}  // namespace ari
