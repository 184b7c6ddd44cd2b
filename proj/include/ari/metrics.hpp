#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ari/rules.hpp"
#include "ari/types.hpp"

namespace ari {

struct ClassStats {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int64_t support = 0;
};

struct MetricReport {
    double f1 = 0.0;  // binary F1 (positive class 1) when K=2, macro F1 otherwise
    double accuracy = 0.0;
    std::vector<ClassStats> per_class;

    nlohmann::json to_json() const;
};

// Zero-division conventions: a class with no predictions and no support
// contributes F1 = 0 to the macro mean.
MetricReport f1_score(const std::vector<Label>& preds, const std::vector<Label>& golds,
                      int num_classes);

// exp(mean(log v)); rejects non-positive inputs.
double geometric_mean(const std::vector<double>& values);

struct RuleAudit {
    double coverage = 0.0;
    // F1 of majority-of-firings predictions over the covered subset; null
    // when nothing is covered.
    std::optional<double> precision_f1;
    struct PerRule {
        std::string id;
        int64_t fired = 0;
        std::optional<double> accuracy;  // fraction of firings agreeing with gold
    };
    std::vector<PerRule> rules;

    nlohmann::json to_json() const;
};

RuleAudit rule_audit(const FiringTable& table, const std::vector<Label>& golds, int num_classes,
                     const std::vector<std::string>& rule_ids);

// Inputs for difficulty binning and attribution, one per example.
struct ExampleEval {
    std::string id;
    std::vector<double> backbone_dist;
    std::vector<double> teacher_dist;
    double rule_weight_total = 0.0;  // sum of fired s_j / Q
    double backbone_weight = 0.0;    // s_s / Q
    double smoothing_weight = 0.0;   // u_total / Q
    std::optional<Label> gold;
};

struct DifficultyBin {
    std::string name;  // easy / medium / hard (or "all" on fallback)
    int64_t count = 0;
    double backbone_accuracy = 0.0;
    double teacher_accuracy = 0.0;
    double mean_rule_weight = 0.0;
};

struct DifficultyReport {
    std::vector<DifficultyBin> bins;
    bool single_bin_fallback = false;

    nlohmann::json to_json() const;
};

// Ranks examples by backbone-distribution entropy (ties by id) and cuts at
// the nearest-rank 25th/75th percentiles: easy = lowest quartile, hard =
// highest. Fewer than 4 examples collapse into a single bin with a warning.
DifficultyReport difficulty_report(const std::vector<ExampleEval>& rows);

double shannon_entropy(const std::vector<double>& dist);
Label argmax_label(const std::vector<double>& dist);

struct AttributionRecord {
    std::string id;
    struct FiredRule {
        std::string rule_id;
        double weight;  // s_j / Q
    };
    std::vector<FiredRule> fired;
    double backbone_weight = 0.0;
    double smoothing_weight = 0.0;
    Label predicted = kAbstain;
    std::optional<Label> gold;

    nlohmann::json to_json() const;
};

AttributionRecord make_attribution(const ExampleEval& row, const FiringTable& table,
                                   std::size_t table_row, const std::vector<std::string>& rule_ids,
                                   const std::vector<double>& rule_scores, double q);

}  // namespace ari
