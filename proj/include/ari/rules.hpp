#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ari/featurize.hpp"
#include "ari/types.hpp"

namespace ari {

struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> leaf_dist;  // class probabilities, leaves only

    bool is_leaf() const { return left < 0; }
};

using Tree = std::vector<TreeNode>;  // preorder, node 0 is the root

struct Rule {
    enum class Kind { LinearNgram, Tree };

    std::string id;
    Kind kind = Kind::LinearNgram;

    // LinearNgram: vote target_label when the binary feature is set.
    int feature = -1;
    Label target_label = kAbstain;

    // Tree: vote argmax of the leaf distribution when its max exceeds tau.
    Tree nodes;
    double tau = 0.8;

    Label apply(std::span<const double> phi) const;
};

struct FiringTable {
    std::size_t n_rules = 0;
    std::vector<std::string> example_ids;
    std::vector<int16_t> entries;  // rows() x n_rules, kAbstain or a label

    std::size_t rows() const { return example_ids.size(); }
    Label at(std::size_t i, std::size_t j) const { return entries[i * n_rules + j]; }
    void set(std::size_t i, std::size_t j, Label v) {
        entries[i * n_rules + j] = static_cast<int16_t>(v);
    }
    bool covered(std::size_t i) const;
    double coverage() const;  // fraction of rows with at least one firing
};

struct LinearRuleModel {
    std::size_t num_classes = 0;
    std::size_t dim = 0;
    std::vector<double> weights;  // num_classes x dim, row-major
    double l2_lambda = 0.0;

    double w(std::size_t k, std::size_t i) const { return weights[k * dim + i]; }
};

struct LinearTrainConfig {
    double l2_lambda = 0.01;
    double lr = 0.5;
    int epochs = 200;
    uint64_t seed = 1;
};

// One-vs-rest sigmoid BCE with l2, full-batch gradient descent. Features must
// be binary. Throws on divergence (non-finite loss).
LinearRuleModel train_linear(const FeatureMatrix& feats, const std::vector<std::size_t>& rows,
                             const std::vector<Label>& labels, int num_classes,
                             const LinearTrainConfig& cfg);

// One rule per weight, from the R largest entries of W (value desc, ties by
// label then feature). Non-positive weights never become rules, so fewer than
// R rules may come back.
std::vector<Rule> extract_linear_rules(const LinearRuleModel& model, int rule_count);

struct ForestConfig {
    int num_trees = 16;
    int max_depth = 3;
    uint64_t seed = 1;
    bool bootstrap = true;
    bool feature_subsample = true;  // sqrt(V) candidates per node
};

// Gini-impurity CART forest, deterministic given the seed.
std::vector<Tree> train_forest(const FeatureMatrix& feats, const std::vector<std::size_t>& rows,
                               const std::vector<Label>& labels, int num_classes,
                               const ForestConfig& cfg);

std::vector<Rule> extract_tree_rules(const std::vector<Tree>& forest, double tau);

FiringTable apply_rules(const std::vector<Rule>& rules, const FeatureMatrix& feats,
                        const std::vector<std::size_t>& rows);

// rules.json: {version, feature_space, vocab_hash, rules:[...]}. Features are
// stored by ngram name so rule sets can be replayed against another corpus.
nlohmann::json rules_to_json(const std::vector<Rule>& rules, const Vocabulary& vocab,
                             FeatureSpace space);

struct RuleImport {
    std::vector<Rule> rules;
    FeatureSpace space = FeatureSpace::Ngram;
    int dropped = 0;  // rules naming ngrams absent from the target vocabulary
};

RuleImport rules_from_json(const nlohmann::json& j, const Vocabulary& vocab);

void save_rules(const std::filesystem::path& path, const std::vector<Rule>& rules,
                const Vocabulary& vocab, FeatureSpace space);
RuleImport load_rules(const std::filesystem::path& path, const Vocabulary& vocab);

// Human-readable listing: one `if "<ngram>" in x predict <CLASS> else
// ABSTAIN` line per linear rule, indented `|---` blocks per tree rule.
std::string dump_rules(const std::vector<Rule>& rules, const Vocabulary& vocab,
                       const std::vector<std::string>& label_names, FeatureSpace space);

}  // namespace ari
