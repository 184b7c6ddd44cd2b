#include "ari/rules.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "ari/kernels.hpp"
#include "ari/log.hpp"
#include "ari/rng.hpp"

namespace ari {

using nlohmann::json;

Label Rule::apply(std::span<const double> phi) const {
    if (kind == Kind::LinearNgram) {
        if (feature < 0 || static_cast<std::size_t>(feature) >= phi.size()) {
            throw ValidationError("rule " + id + ": feature index out of range");
        }
        return phi[static_cast<std::size_t>(feature)] > 0.5 ? target_label : kAbstain;
    }
    const TreeNode* node = &nodes[0];
    while (!node->is_leaf()) {
        if (node->feature < 0 || static_cast<std::size_t>(node->feature) >= phi.size()) {
            throw ValidationError("rule " + id + ": feature index out of range");
        }
        node = phi[static_cast<std::size_t>(node->feature)] <= node->threshold
                   ? &nodes[static_cast<std::size_t>(node->left)]
                   : &nodes[static_cast<std::size_t>(node->right)];
    }
    std::size_t arg = 0;
    for (std::size_t k = 1; k < node->leaf_dist.size(); ++k) {
        if (node->leaf_dist[k] > node->leaf_dist[arg]) arg = k;
    }
    return node->leaf_dist[arg] > tau ? static_cast<Label>(arg) : kAbstain;
}

bool FiringTable::covered(std::size_t i) const {
    for (std::size_t j = 0; j < n_rules; ++j) {
        if (at(i, j) != kAbstain) return true;
    }
    return false;
}

double FiringTable::coverage() const {
    if (rows() == 0) return 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < rows(); ++i) n += covered(i) ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(rows());
}

LinearRuleModel train_linear(const FeatureMatrix& feats, const std::vector<std::size_t>& rows,
                             const std::vector<Label>& labels, int num_classes,
                             const LinearTrainConfig& cfg) {
    if (rows.empty()) throw ValidationError("train_linear: empty labeled set");
    if (rows.size() != labels.size()) throw ValidationError("train_linear: rows/labels mismatch");
    const std::size_t m = rows.size();
    const std::size_t dim = feats.dim;
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = feats.row(rows[i]);
        for (std::size_t j = 0; j < dim; ++j) {
            if (row[j] != 0.0 && row[j] != 1.0) {
                throw ValidationError("train_linear: features must be binary");
            }
        }
    }

    // Compact copy of the labeled rows keeps the epoch loop cache-friendly.
    std::vector<double> x(m * dim);
    for (std::size_t i = 0; i < m; ++i) {
        std::copy_n(feats.row(rows[i]), dim, x.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }

    LinearRuleModel model;
    model.num_classes = static_cast<std::size_t>(num_classes);
    model.dim = dim;
    model.l2_lambda = cfg.l2_lambda;
    model.weights.resize(model.num_classes * dim);
    Rng rng = Rng::stream(cfg.seed, 0x11);
    for (double& w : model.weights) w = 0.01 * rng.normal();

    std::vector<double> z(m);
    std::vector<double> grad(dim);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss = 0.0;
        for (std::size_t k = 0; k < model.num_classes; ++k) {
            double* wk = model.weights.data() + k * dim;
            kernels::matvec(x.data(), m, dim, wk, z.data());
            for (std::size_t i = 0; i < m; ++i) {
                const double p = 1.0 / (1.0 + std::exp(-z[i]));
                const double t = labels[i] == static_cast<Label>(k) ? 1.0 : 0.0;
                const double pc = std::clamp(p, 1e-12, 1.0 - 1e-12);
                loss -= inv_m * (t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc));
                z[i] = p - t;  // reuse as the residual
            }
            kernels::matvec_t(x.data(), m, dim, z.data(), grad.data());
            kernels::scale(grad.data(), dim, inv_m);
            kernels::axpy(2.0 * cfg.l2_lambda, wk, grad.data(), dim);
            kernels::axpy(-cfg.lr, grad.data(), wk, dim);
            loss += cfg.l2_lambda * kernels::dot(wk, wk, dim);
        }
        if (!std::isfinite(loss)) {
            throw std::runtime_error("train_linear: loss diverged at epoch " +
                                     std::to_string(epoch) + "; try a smaller learning rate");
        }
    }
    return model;
}

std::vector<Rule> extract_linear_rules(const LinearRuleModel& model, int rule_count) {
    const std::size_t total = model.num_classes * model.dim;
    if (rule_count < 0 || static_cast<std::size_t>(rule_count) > total) {
        throw ValidationError("extract_linear_rules: rule count exceeds K*V");
    }
    struct Cand {
        double w;
        std::size_t label;
        std::size_t feature;
    };
    std::vector<Cand> cands;
    cands.reserve(total);
    for (std::size_t k = 0; k < model.num_classes; ++k) {
        for (std::size_t i = 0; i < model.dim; ++i) {
            cands.push_back({model.w(k, i), k, i});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.w != b.w) return a.w > b.w;
        if (a.label != b.label) return a.label < b.label;
        return a.feature < b.feature;
    });
    std::vector<Rule> rules;
    for (int n = 0; n < rule_count; ++n) {
        const Cand& c = cands[static_cast<std::size_t>(n)];
        if (c.w <= 0.0) break;  // presence->label rules only
        Rule r;
        r.id = "lin-" + std::to_string(rules.size());
        r.kind = Rule::Kind::LinearNgram;
        r.feature = static_cast<int>(c.feature);
        r.target_label = static_cast<Label>(c.label);
        rules.push_back(std::move(r));
    }
    if (static_cast<int>(rules.size()) < rule_count) {
        log::info("extract_linear_rules: only ", rules.size(), " positive weights for ",
                  rule_count, " requested rules");
    }
    return rules;
}

namespace {

double gini(const std::vector<std::size_t>& counts, std::size_t total) {
    if (total == 0) return 0.0;
    double g = 1.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        g -= p * p;
    }
    return g;
}

struct TreeBuilder {
    const FeatureMatrix& feats;
    const std::vector<Label>& labels;  // indexed by corpus row
    int num_classes;
    const ForestConfig& cfg;
    Rng& rng;
    Tree tree;

    std::vector<std::size_t> candidate_features() {
        const std::size_t dim = feats.dim;
        if (!cfg.feature_subsample) {
            std::vector<std::size_t> all(dim);
            for (std::size_t i = 0; i < dim; ++i) all[i] = i;
            return all;
        }
        const std::size_t m_try =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(dim))));
        std::set<std::size_t> chosen;
        while (chosen.size() < std::min(m_try, dim)) {
            chosen.insert(static_cast<std::size_t>(rng.below(dim)));
        }
        return {chosen.begin(), chosen.end()};
    }

    int build(const std::vector<std::size_t>& sample, int depth) {
        std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
        for (std::size_t s : sample) counts[static_cast<std::size_t>(labels[s])]++;
        const std::size_t total = sample.size();
        const double parent_gini = gini(counts, total);

        auto make_leaf = [&]() {
            TreeNode leaf;
            leaf.leaf_dist.resize(counts.size());
            for (std::size_t k = 0; k < counts.size(); ++k) {
                leaf.leaf_dist[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
            }
            tree.push_back(std::move(leaf));
            return static_cast<int>(tree.size() - 1);
        };

        if (depth >= cfg.max_depth || total < 2 || parent_gini == 0.0) return make_leaf();

        // Best split among candidate features; thresholds at midpoints of
        // consecutive distinct values; ties keep the first (lowest feature,
        // lowest threshold).
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 1e-12;
        std::vector<double> values(total);
        for (std::size_t f : candidate_features()) {
            for (std::size_t i = 0; i < total; ++i) {
                values[i] = feats.row(sample[i])[f];
            }
            std::vector<std::size_t> order(total);
            for (std::size_t i = 0; i < total; ++i) order[i] = i;
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
            std::vector<std::size_t> left_counts(counts.size(), 0);
            std::size_t n_left = 0;
            for (std::size_t pos = 0; pos + 1 < total; ++pos) {
                const std::size_t idx = order[pos];
                left_counts[static_cast<std::size_t>(labels[sample[idx]])]++;
                ++n_left;
                const double cur = values[idx];
                const double next = values[order[pos + 1]];
                if (cur == next) continue;
                std::vector<std::size_t> right_counts(counts.size());
                for (std::size_t k = 0; k < counts.size(); ++k) {
                    right_counts[k] = counts[k] - left_counts[k];
                }
                const std::size_t n_right = total - n_left;
                const double child =
                    (static_cast<double>(n_left) * gini(left_counts, n_left) +
                     static_cast<double>(n_right) * gini(right_counts, n_right)) /
                    static_cast<double>(total);
                const double gain = parent_gini - child;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (cur + next);
                }
            }
        }
        if (best_feature < 0) return make_leaf();

        std::vector<std::size_t> left_sample;
        std::vector<std::size_t> right_sample;
        for (std::size_t s : sample) {
            const double v = feats.row(s)[static_cast<std::size_t>(best_feature)];
            (v <= best_threshold ? left_sample : right_sample).push_back(s);
        }
        TreeNode node;
        node.feature = best_feature;
        node.threshold = best_threshold;
        tree.push_back(node);
        const int me = static_cast<int>(tree.size() - 1);
        tree[static_cast<std::size_t>(me)].left = build(left_sample, depth + 1);
        tree[static_cast<std::size_t>(me)].right = build(right_sample, depth + 1);
        return me;
    }
};

}  // namespace

std::vector<Tree> train_forest(const FeatureMatrix& feats, const std::vector<std::size_t>& rows,
                               const std::vector<Label>& labels, int num_classes,
                               const ForestConfig& cfg) {
    if (rows.empty()) throw ValidationError("train_forest: empty labeled set");
    if (rows.size() != labels.size()) throw ValidationError("train_forest: rows/labels mismatch");
    std::set<Label> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) {
        throw ValidationError("train_forest: labeled set contains a single class");
    }
    // Trees index the corpus rows directly; labels are parallel to `rows`.
    std::vector<Label> row_labels(feats.rows(), kAbstain);
    for (std::size_t i = 0; i < rows.size(); ++i) row_labels[rows[i]] = labels[i];

    std::vector<Tree> forest;
    forest.reserve(static_cast<std::size_t>(cfg.num_trees));
    for (int ti = 0; ti < cfg.num_trees; ++ti) {
        Rng rng = Rng::stream(cfg.seed, 0x7000 + static_cast<uint64_t>(ti));
        std::vector<std::size_t> sample;
        sample.reserve(rows.size());
        if (cfg.bootstrap) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                sample.push_back(rows[rng.below(rows.size())]);
            }
        } else {
            sample = rows;
        }
        TreeBuilder builder{feats, row_labels, num_classes, cfg, rng, {}};
        builder.build(sample, 0);  // root lands at node 0
        forest.push_back(std::move(builder.tree));
    }
    return forest;
}

std::vector<Rule> extract_tree_rules(const std::vector<Tree>& forest, double tau) {
    if (forest.empty()) throw ValidationError("extract_tree_rules: empty forest");
    std::vector<Rule> rules;
    rules.reserve(forest.size());
    for (std::size_t i = 0; i < forest.size(); ++i) {
        Rule r;
        r.id = "tree-" + std::to_string(i);
        r.kind = Rule::Kind::Tree;
        r.nodes = forest[i];
        r.tau = tau;
        rules.push_back(std::move(r));
    }
    return rules;
}

FiringTable apply_rules(const std::vector<Rule>& rules, const FeatureMatrix& feats,
                        const std::vector<std::size_t>& rows) {
    FiringTable table;
    table.n_rules = rules.size();
    table.example_ids.reserve(rows.size());
    table.entries.assign(rows.size() * rules.size(), static_cast<int16_t>(kAbstain));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        table.example_ids.push_back(feats.ids[rows[i]]);
        for (std::size_t j = 0; j < rules.size(); ++j) {
            table.set(i, j, rules[j].apply(feats.row_span(rows[i])));
        }
    }
    return table;
}

namespace {

std::string feature_name(const Vocabulary& vocab, int index) {
    if (index < 0 || static_cast<std::size_t>(index) >= vocab.size()) {
        throw ValidationError("rule feature index " + std::to_string(index) +
                              " outside the vocabulary");
    }
    return vocab.entries[static_cast<std::size_t>(index)];
}

}  // namespace

json rules_to_json(const std::vector<Rule>& rules, const Vocabulary& vocab, FeatureSpace space) {
    json out;
    out["version"] = 1;
    out["feature_space"] = feature_space_name(space);
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(vocab.hash()));
    out["vocab_hash"] = hex;
    json jr = json::array();
    for (const Rule& r : rules) {
        json item;
        item["id"] = r.id;
        if (r.kind == Rule::Kind::LinearNgram) {
            item["kind"] = "linear";
            item["feature"] = feature_name(vocab, r.feature);
            item["target_label"] = r.target_label;
        } else {
            item["kind"] = "tree";
            item["tau"] = r.tau;
            json nodes = json::array();
            for (const TreeNode& n : r.nodes) {
                json jn;
                if (n.is_leaf()) {
                    jn["leaf"] = n.leaf_dist;
                } else {
                    jn["feature"] = feature_name(vocab, n.feature);
                    jn["threshold"] = n.threshold;
                    jn["left"] = n.left;
                    jn["right"] = n.right;
                }
                nodes.push_back(std::move(jn));
            }
            item["nodes"] = std::move(nodes);
        }
        jr.push_back(std::move(item));
    }
    out["rules"] = std::move(jr);
    return out;
}

RuleImport rules_from_json(const json& j, const Vocabulary& vocab) {
    RuleImport result;
    result.space = feature_space_from_name(j.at("feature_space").get<std::string>());
    auto lookup = [&](const std::string& name) -> int {
        auto it = vocab.index.find(name);
        return it == vocab.index.end() ? -1 : static_cast<int>(it->second);
    };
    for (const json& item : j.at("rules")) {
        Rule r;
        r.id = item.at("id").get<std::string>();
        const std::string kind = item.at("kind").get<std::string>();
        bool ok = true;
        if (kind == "linear") {
            r.kind = Rule::Kind::LinearNgram;
            const std::string name = item.at("feature").get<std::string>();
            r.feature = lookup(name);
            r.target_label = item.at("target_label").get<Label>();
            if (r.feature < 0) {
                log::info("dropping rule ", r.id, ": unknown ngram \"", name, "\"");
                ok = false;
            }
        } else if (kind == "tree") {
            r.kind = Rule::Kind::Tree;
            r.tau = item.at("tau").get<double>();
            for (const json& jn : item.at("nodes")) {
                TreeNode n;
                if (jn.contains("leaf")) {
                    n.leaf_dist = jn.at("leaf").get<std::vector<double>>();
                } else {
                    const std::string name = jn.at("feature").get<std::string>();
                    n.feature = lookup(name);
                    n.threshold = jn.at("threshold").get<double>();
                    n.left = jn.at("left").get<int>();
                    n.right = jn.at("right").get<int>();
                    if (n.feature < 0) {
                        log::info("dropping rule ", r.id, ": unknown ngram \"", name, "\"");
                        ok = false;
                    }
                }
                r.nodes.push_back(std::move(n));
            }
        } else {
            throw ValidationError("rules: unknown kind '" + kind + "'");
        }
        if (ok) {
            result.rules.push_back(std::move(r));
        } else {
            result.dropped++;
        }
    }
    if (result.dropped > 0) {
        log::info("rule import dropped ", result.dropped, " rule(s) against this vocabulary");
    }
    return result;
}

void save_rules(const std::filesystem::path& path, const std::vector<Rule>& rules,
                const Vocabulary& vocab, FeatureSpace space) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write rules: " + path.string());
    out << rules_to_json(rules, vocab, space).dump(2) << "\n";
}

RuleImport load_rules(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open rules: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("rules " + path.string() + ": " + e.what());
    }
    return rules_from_json(j, vocab);
}

namespace {

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

void dump_tree(std::string& out, const Rule& rule, const Tree& tree, const Vocabulary& vocab,
               const std::vector<std::string>& label_names, FeatureSpace space, int node_idx,
               int depth) {
    const TreeNode& node = tree[static_cast<std::size_t>(node_idx)];
    std::string indent;
    for (int d = 0; d < depth; ++d) indent += "|   ";
    if (node.is_leaf()) {
        std::size_t arg = 0;
        for (std::size_t k = 1; k < node.leaf_dist.size(); ++k) {
            if (node.leaf_dist[k] > node.leaf_dist[arg]) arg = k;
        }
        const std::string cls = node.leaf_dist[arg] > rule.tau
                                    ? upper(label_names[arg])
                                    : std::string("ABSTAIN");
        out += indent + "|--- class: " + cls + "\n";
        return;
    }
    std::string name = feature_name(vocab, node.feature);
    if (space == FeatureSpace::PcaAdjusted) name = "'" + name + "' (+PCA)";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", node.threshold);
    out += indent + "|--- " + name + " <= " + buf + "\n";
    dump_tree(out, rule, tree, vocab, label_names, space, node.left, depth + 1);
    out += indent + "|--- " + name + " >  " + buf + "\n";
    dump_tree(out, rule, tree, vocab, label_names, space, node.right, depth + 1);
}

}  // namespace

std::string dump_rules(const std::vector<Rule>& rules, const Vocabulary& vocab,
                       const std::vector<std::string>& label_names, FeatureSpace space) {
    std::string out;
    bool first_tree = true;
    for (const Rule& r : rules) {
        if (r.kind == Rule::Kind::LinearNgram) {
            out += "if \"" + feature_name(vocab, r.feature) + "\" in x predict " +
                   upper(label_names[static_cast<std::size_t>(r.target_label)]) +
                   " else ABSTAIN\n";
        } else {
            if (!first_tree || out.size() > 0) out += "\n";
            first_tree = false;
            dump_tree(out, r, r.nodes, vocab, label_names, space, 0, 0);
        }
    }
    return out;
}

}  // namespace ari
