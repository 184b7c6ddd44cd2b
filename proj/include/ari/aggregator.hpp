#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ari/types.hpp"

namespace ari {

struct AggregatorConfig {
    int num_rules = 0;
    int embed_dim = 100;  // rule embedding size
    int hidden = 128;     // projection MLP hidden width, tanh
    int input_dim = 0;
    int num_classes = 0;
    double u_total = 0.1;  // total mass of the uniform smoothing term, not trained
    uint64_t seed = 1;
};

struct AggregateOutput {
    std::vector<double> a;            // class distribution
    std::vector<double> rule_scores;  // sigma(p(h).e_j) for every rule
    double backbone_score = 0.0;      // sigma(p(h).e_s)
    double q = 0.0;                   // sum of fired scores + backbone score + u_total

    // Attribution weights s/Q; fired rules only, plus backbone and smoothing.
    double rule_weight(std::size_t j) const { return rule_scores[j] / q; }
    double backbone_weight() const { return backbone_score / q; }
};

// The teacher a(.): sigmoid attention over rule votes plus the backbone
// distribution, normalized by Q so the output is a distribution. Trainable
// pieces are the rule embeddings, the backbone embedding and the projection
// MLP; the smoothing mass is fixed.
class Aggregator {
public:
    static Aggregator init(const AggregatorConfig& cfg);

    const AggregatorConfig& config() const { return cfg_; }

    // sigma(p(h).e_j) per rule plus the backbone score, before any firing mask.
    struct AttentionScores {
        std::vector<double> rules;
        double backbone = 0.0;
    };
    AttentionScores attention_scores(std::span<const double> h) const;

    // firings has one entry per rule (kAbstain or a label); b is the backbone
    // distribution. When nothing fires and u_total is zero the output is b
    // exactly.
    AggregateOutput aggregate(std::span<const double> h, std::span<const int16_t> firings,
                              std::span<const double> b) const;

    double step_supervised(const std::vector<const double*>& h,
                           const std::vector<const int16_t*>& firings,
                           const std::vector<const double*>& b, const std::vector<Label>& y,
                           double lr, double momentum = 0.0);
    double step_entropy(const std::vector<const double*>& h,
                        const std::vector<const int16_t*>& firings,
                        const std::vector<const double*>& b, double lr, double momentum = 0.0);

    double loss_supervised(const std::vector<const double*>& h,
                           const std::vector<const int16_t*>& firings,
                           const std::vector<const double*>& b,
                           const std::vector<Label>& y) const;
    double loss_entropy(const std::vector<const double*>& h,
                        const std::vector<const int16_t*>& firings,
                        const std::vector<const double*>& b) const;

    std::size_t num_params() const { return params_.size(); }
    const std::vector<double>& params() const { return params_; }
    void set_params(std::span<const double> p);

    // rule_ids ride along so downstream reports name rules, not indices.
    nlohmann::json checkpoint(const std::vector<std::string>& rule_ids) const;
    static Aggregator from_checkpoint(const nlohmann::json& j,
                                      std::vector<std::string>* rule_ids = nullptr);

private:
    explicit Aggregator(AggregatorConfig cfg);

    void project_and_score(std::span<const double> h, std::vector<double>& hidden,
                           std::vector<double>& z, std::vector<double>& scores,
                           double& backbone_score) const;

    struct Forward;
    Forward forward(std::span<const double> h, std::span<const int16_t> firings,
                    std::span<const double> b) const;
    void backward(const Forward& fwd, std::span<const double> h, std::span<const int16_t> firings,
                  std::span<const double> b, const std::vector<double>& dl_da,
                  std::vector<double>& grad) const;
    void apply_update(const std::vector<double>& grad, double lr, double momentum);

    AggregatorConfig cfg_;
    std::vector<double> params_;  // [E, e_s, W1, b1, W2, b2]
    std::vector<double> velocity_;
};

}  // namespace ari
