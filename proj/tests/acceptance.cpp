// Acceptance suite: one checked criterion per section, one PASS/FAIL line
// each, nonzero exit if anything fails. Runs standalone (ctest target
// "acceptance").

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "ari/aggregator.hpp"
#include "ari/artifacts.hpp"
#include "ari/backbone.hpp"
#include "ari/corpus.hpp"
#include "ari/featurize.hpp"
#include "ari/filters.hpp"
#include "ari/kernels.hpp"
#include "ari/metrics.hpp"
#include "ari/rng.hpp"
#include "ari/rules.hpp"
#include "ari/train.hpp"
#include "oracles.hpp"

using namespace ari;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& what) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, what.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> random_dist(Rng& rng, std::size_t k) {
    std::vector<double> d(k);
    double total = 0.0;
    for (double& x : d) {
        x = rng.uniform01() + 0.05;
        total += x;
    }
    for (double& x : d) x /= total;
    return d;
}

// -------------------------------------------------------------- criterion 1
void criterion_normalization() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(101);
    bool ok = true;
    std::string detail;
    for (int trial = 0; trial < 10000 && ok; ++trial) {
        AggregatorConfig cfg;
        cfg.num_rules = 1 + static_cast<int>(rng.below(6));
        cfg.embed_dim = 4 + static_cast<int>(rng.below(8));
        cfg.hidden = 3 + static_cast<int>(rng.below(6));
        cfg.input_dim = 2 + static_cast<int>(rng.below(6));
        cfg.num_classes = 2 + static_cast<int>(rng.below(4));
        cfg.u_total = rng.uniform01() < 0.25 ? 0.0 : rng.uniform(0.0, 1.5);
        cfg.seed = 9000 + static_cast<uint64_t>(trial);
        Aggregator agg = Aggregator::init(cfg);

        std::vector<double> h(static_cast<std::size_t>(cfg.input_dim));
        for (double& x : h) x = rng.normal();
        std::vector<int16_t> firings(static_cast<std::size_t>(cfg.num_rules), kAbstain);
        for (int16_t& f : firings) {
            if (rng.uniform01() < 0.6) {
                f = static_cast<int16_t>(rng.below(static_cast<uint64_t>(cfg.num_classes)));
            }
        }
        std::vector<double> b = random_dist(rng, static_cast<std::size_t>(cfg.num_classes));
        AggregateOutput out = agg.aggregate(h, firings, b);

        double total = 0.0;
        for (double a : out.a) total += a;
        if (std::abs(total - 1.0) >= 1e-9) {
            ok = false;
            detail = "sum(a) off by " + std::to_string(std::abs(total - 1.0));
        }
        for (double s : out.rule_scores) {
            if (!(s > 0.0 && s < 1.0)) ok = false;
        }
        if (!(out.backbone_score > 0.0 && out.backbone_score < 1.0)) ok = false;
        double attribution = out.backbone_weight() + cfg.u_total / out.q;
        bool any_fired = false;
        for (std::size_t j = 0; j < firings.size(); ++j) {
            if (firings[j] != kAbstain) {
                attribution += out.rule_weight(j);
                any_fired = true;
            }
        }
        const bool passthrough = !any_fired && cfg.u_total == 0.0;
        const double want = passthrough ? out.backbone_weight() : attribution;
        if (std::abs((passthrough ? out.backbone_weight() : attribution) - 1.0) >= 1e-9) {
            ok = false;
            detail = "attribution sum off: " + std::to_string(want);
        }
    }
    const double elapsed = seconds_since(t0);
    if (elapsed >= 5.0) {
        ok = false;
        detail = "took " + std::to_string(elapsed) + "s";
    }
    report(1, ok,
           "Eq.1 normalization, score range and attribution identity over 1e4 random draws (" +
               std::to_string(elapsed).substr(0, 4) + "s)" +
               (detail.empty() ? "" : " [" + detail + "]"));
}

// -------------------------------------------------------------- criterion 2
template <class LossFn>
double fd_worst_rel(const std::vector<double>& params, std::vector<double>& scratch,
                    const std::function<void(const std::vector<double>&)>& set,
                    LossFn loss, const std::vector<double>& grad) {
    constexpr double kEps = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        scratch = params;
        scratch[i] += kEps;
        set(scratch);
        const double up = loss();
        scratch[i] = params[i] - kEps;
        set(scratch);
        const double down = loss();
        const double fd = (up - down) / (2.0 * kEps);
        const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-4});
        worst = std::max(worst, std::abs(fd - grad[i]) / denom);
    }
    set(params);
    return worst;
}

void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(202);
    double worst = 0.0;

    BackboneConfig bcfg;
    bcfg.arch = BackboneConfig::Arch::Mlp;
    bcfg.input_dim = 4;
    bcfg.hidden = 5;
    bcfg.num_classes = 3;

    AggregatorConfig acfg;
    acfg.num_rules = 3;
    acfg.embed_dim = 6;
    acfg.hidden = 5;
    acfg.input_dim = 4;
    acfg.num_classes = 3;
    acfg.u_total = 0.1;

    const std::size_t batch = 4;
    for (int point = 0; point < 100; ++point) {
        // fresh random parameters and batch per point
        bcfg.seed = 5000 + static_cast<uint64_t>(point);
        acfg.seed = 6000 + static_cast<uint64_t>(point);
        BackboneModel student = BackboneModel::init(bcfg);
        Aggregator teacher = Aggregator::init(acfg);

        std::vector<std::vector<double>> hs;
        std::vector<std::vector<int16_t>> firs;
        std::vector<std::vector<double>> bs;
        std::vector<std::vector<double>> targets;
        std::vector<Label> ys;
        for (std::size_t i = 0; i < batch; ++i) {
            std::vector<double> h(4);
            for (double& x : h) x = rng.normal();
            hs.push_back(h);
            std::vector<int16_t> f(3, kAbstain);
            for (int16_t& x : f) {
                if (rng.uniform01() < 0.7) x = static_cast<int16_t>(rng.below(3));
            }
            firs.push_back(f);
            bs.push_back(random_dist(rng, 3));
            targets.push_back(random_dist(rng, 3));
            ys.push_back(static_cast<Label>(rng.below(3)));
        }
        std::vector<const double*> h;
        std::vector<const int16_t*> fir;
        std::vector<const double*> b;
        std::vector<const double*> tg;
        for (std::size_t i = 0; i < batch; ++i) {
            h.push_back(hs[i].data());
            fir.push_back(firs[i].data());
            b.push_back(bs[i].data());
            tg.push_back(targets[i].data());
        }

        // student supervised
        {
            const std::vector<double> before = student.params();
            student.step_supervised(h, ys, 1.0);
            std::vector<double> grad(before.size());
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = before[i] - student.params()[i];
            student.set_params(before);
            std::vector<double> scratch;
            worst = std::max(worst, fd_worst_rel(before, scratch,
                                                 [&](const std::vector<double>& p) {
                                                     student.set_params(p);
                                                 },
                                                 [&] { return student.loss_supervised(h, ys); },
                                                 grad));
        }
        // student distillation (soft covers the shared code path; modes are
        // unit-tested besides)
        {
            const std::vector<double> before = student.params();
            student.step_distill(h, tg, DistillMode::Soft, 0.0, 1.0);
            std::vector<double> grad(before.size());
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = before[i] - student.params()[i];
            student.set_params(before);
            std::vector<double> scratch;
            worst = std::max(
                worst, fd_worst_rel(before, scratch,
                                    [&](const std::vector<double>& p) { student.set_params(p); },
                                    [&] {
                                        return student
                                            .loss_distill(h, tg, DistillMode::Soft, 0.0)
                                            .loss;
                                    },
                                    grad));
        }
        // teacher supervised
        {
            const std::vector<double> before = teacher.params();
            teacher.step_supervised(h, fir, b, ys, 1.0);
            std::vector<double> grad(before.size());
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = before[i] - teacher.params()[i];
            teacher.set_params(before);
            std::vector<double> scratch;
            worst = std::max(
                worst,
                fd_worst_rel(before, scratch,
                             [&](const std::vector<double>& p) { teacher.set_params(p); },
                             [&] { return teacher.loss_supervised(h, fir, b, ys); }, grad));
        }
        // teacher min-entropy
        {
            const std::vector<double> before = teacher.params();
            teacher.step_entropy(h, fir, b, 1.0);
            std::vector<double> grad(before.size());
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = before[i] - teacher.params()[i];
            teacher.set_params(before);
            std::vector<double> scratch;
            worst = std::max(
                worst, fd_worst_rel(before, scratch,
                                    [&](const std::vector<double>& p) { teacher.set_params(p); },
                                    [&] { return teacher.loss_entropy(h, fir, b); }, grad));
        }
    }
    const double elapsed = seconds_since(t0);
    const bool ok = worst < 1e-4 && elapsed < 30.0;
    std::ostringstream os;
    os << "all four losses vs central differences at 100 random points, max rel err " << worst
       << " (" << elapsed << "s)";
    report(2, ok, os.str());
}

// -------------------------------------------------------------- criterion 3
void criterion_pca_oracle() {
    Rng rng(303);
    double worst_cos = 1.0;
    int done = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t rows = 4 + rng.below(17);
        const std::size_t cols = 2 + rng.below(19);
        FeatureMatrix m;
        m.dim = cols;
        std::vector<double> flat;
        for (std::size_t r = 0; r < rows; ++r) {
            m.ids.push_back("r" + std::to_string(r));
            for (std::size_t c = 0; c < cols; ++c) {
                const double v = rng.uniform01() < 0.4 ? 1.0 : 0.0;
                m.data.push_back(v);
                flat.push_back(v);
            }
        }
        m.data[0] = 1.0;
        flat[0] = 1.0;
        std::vector<std::size_t> all(rows);
        for (std::size_t i = 0; i < rows; ++i) all[i] = i;
        PcaConfig cfg;
        cfg.seed = 40 + static_cast<uint64_t>(trial);
        PrincipalComponent pc = compute_first_pc(m, all, cfg);
        std::vector<double> g = oracles::gram(flat, rows, cols, false);
        std::vector<double> want = oracles::dominant_eigenvector(g, cols);
        const double cos = std::abs(kernels::dot(pc.v.data(), want.data(), cols));
        worst_cos = std::min(worst_cos, cos);
        ++done;
    }
    std::ostringstream os;
    os << "power iteration vs dense Jacobi oracle on " << done
       << " random binary matrices, worst |cos| = " << std::setprecision(17) << worst_cos;
    report(3, done == 50 && worst_cos > 1.0 - 1e-8, os.str());
}

// -------------------------------------------------------------- criterion 4
void criterion_rule_oracles() {
    Rng rng(404);
    bool ok = true;

    // top-R selection vs full sort on random W up to 10 x 2000
    for (int trial = 0; trial < 8 && ok; ++trial) {
        LinearRuleModel model;
        model.num_classes = 2 + rng.below(9);
        model.dim = 100 + rng.below(1901);
        model.weights.resize(model.num_classes * model.dim);
        for (double& w : model.weights) w = rng.normal();
        const int rule_count = static_cast<int>(rng.below(64)) + 1;
        std::vector<Rule> rules = extract_linear_rules(model, rule_count);
        struct Entry {
            double w;
            std::size_t k, f;
        };
        std::vector<Entry> entries;
        for (std::size_t k = 0; k < model.num_classes; ++k) {
            for (std::size_t f = 0; f < model.dim; ++f) entries.push_back({model.w(k, f), k, f});
        }
        std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            if (a.w != b.w) return a.w > b.w;
            if (a.k != b.k) return a.k < b.k;
            return a.f < b.f;
        });
        std::size_t expect = 0;
        for (int i = 0; i < rule_count && entries[static_cast<std::size_t>(i)].w > 0.0; ++i) {
            ++expect;
        }
        if (rules.size() != expect) ok = false;
        for (std::size_t i = 0; i < rules.size() && ok; ++i) {
            if (rules[i].feature != static_cast<int>(entries[i].f) ||
                rules[i].target_label != static_cast<Label>(entries[i].k)) {
                ok = false;
            }
        }
    }

    // depth-1 split vs exhaustive oracle
    for (int trial = 0; trial < 8 && ok; ++trial) {
        const std::size_t n = 30;
        const std::size_t dim = 6;
        FeatureMatrix m;
        m.dim = dim;
        std::vector<Label> labels(n);
        std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<Label>(rng.below(2));
            for (double& v : rows[i]) v = rng.uniform01();
            rows[i][1] = labels[i] == 1 ? 0.52 + 0.45 * rng.uniform01()
                                        : 0.48 * rng.uniform01();
            m.ids.push_back("x" + std::to_string(i));
            m.data.insert(m.data.end(), rows[i].begin(), rows[i].end());
        }
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        ForestConfig cfg;
        cfg.num_trees = 1;
        cfg.max_depth = 1;
        cfg.bootstrap = false;
        cfg.feature_subsample = false;
        const Tree tree = train_forest(m, all, labels, 2, cfg)[0];

        auto gini2 = [](int c0, int c1) {
            const int t = c0 + c1;
            if (t == 0) return 0.0;
            const double p0 = double(c0) / t, p1 = double(c1) / t;
            return 1.0 - p0 * p0 - p1 * p1;
        };
        int n0 = 0, n1 = 0;
        for (Label y : labels) (y == 0 ? n0 : n1)++;
        double best_gain = -1.0, best_thr = 0.0;
        int best_feature = -1;
        for (std::size_t f = 0; f < dim; ++f) {
            std::vector<double> sorted;
            for (const auto& r : rows) sorted.push_back(r[f]);
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                if (sorted[i] == sorted[i + 1]) continue;
                const double thr = 0.5 * (sorted[i] + sorted[i + 1]);
                int l0 = 0, l1 = 0, r0 = 0, r1 = 0;
                for (std::size_t e = 0; e < n; ++e) {
                    const bool left = rows[e][f] <= thr;
                    if (labels[e] == 0) {
                        (left ? l0 : r0)++;
                    } else {
                        (left ? l1 : r1)++;
                    }
                }
                const double child =
                    ((l0 + l1) * gini2(l0, l1) + (r0 + r1) * gini2(r0, r1)) / double(n);
                const double gain = gini2(n0, n1) - child;
                if (gain > best_gain + 1e-15) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_thr = thr;
                }
            }
        }
        if (tree[0].feature != best_feature || std::abs(tree[0].threshold - best_thr) > 1e-12) {
            ok = false;
        }
    }

    // apply_rules vs per-entry re-evaluation
    {
        FeatureMatrix m;
        m.dim = 8;
        for (int i = 0; i < 40; ++i) {
            m.ids.push_back("e" + std::to_string(i));
            for (std::size_t j = 0; j < m.dim; ++j) {
                m.data.push_back(rng.uniform01() < 0.5 ? 1.0 : 0.0);
            }
        }
        std::vector<std::size_t> all(m.rows());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        std::vector<Label> labels;
        for (std::size_t i = 0; i < m.rows(); ++i) labels.push_back(m.row(i)[2] > 0.5 ? 1 : 0);
        ForestConfig cfg;
        cfg.num_trees = 5;
        std::vector<Rule> rules = extract_tree_rules(train_forest(m, all, labels, 2, cfg), 0.6);
        Rule lin;
        lin.id = "lin-0";
        lin.kind = Rule::Kind::LinearNgram;
        lin.feature = 2;
        lin.target_label = 1;
        rules.push_back(lin);
        FiringTable table = apply_rules(rules, m, all);
        for (std::size_t i = 0; i < m.rows() && ok; ++i) {
            for (std::size_t j = 0; j < rules.size(); ++j) {
                if (table.at(i, j) != rules[j].apply(m.row_span(i))) ok = false;
            }
        }
    }
    report(4, ok, "top-R sort oracle, exhaustive depth-1 split oracle, apply_rules re-evaluation");
}

// -------------------------------------------------------------- criterion 5
void criterion_filters() {
    Rng rng(505);
    bool ok = true;

    // 10 x 16-dim embedding fixture with one rule per class
    const std::size_t dim = 16;
    EmbeddingStore store;
    store.dim = dim;
    for (int i = 0; i < 10; ++i) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.normal();
        store.vectors["x" + std::to_string(i)] = v;
    }
    std::vector<std::string> labeled_ids = {"x0", "x1", "x2", "x3"};
    std::vector<Label> labeled_gold = {0, 0, 1, 1};
    SemanticGate gate(store, labeled_ids, labeled_gold, 2);

    FiringTable table;
    table.n_rules = 2;
    for (int i = 0; i < 10; ++i) table.example_ids.push_back("x" + std::to_string(i));
    table.entries.resize(20);
    for (std::size_t i = 0; i < 10; ++i) {
        table.set(i, 0, static_cast<Label>(rng.below(3)) - 1);  // abstain or 0/1
        table.set(i, 1, rng.uniform01() < 0.5 ? 1 : kAbstain);
    }

    const double threshold = 0.25;
    FiringTable filtered = filter_semantic(table, gate, threshold, nullptr);

    // brute-force cosine recomputation
    auto cosine = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double num = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            num += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        return num / (std::sqrt(na) * std::sqrt(nb));
    };
    for (std::size_t i = 0; i < 10 && ok; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            const Label v = table.at(i, j);
            if (v == kAbstain) {
                if (filtered.at(i, j) != kAbstain) ok = false;
                continue;
            }
            double best = -2.0;
            for (std::size_t l = 0; l < labeled_ids.size(); ++l) {
                if (labeled_gold[l] != v) continue;
                best = std::max(best, cosine(store.vectors.at(table.example_ids[i]),
                                             store.vectors.at(labeled_ids[l])));
            }
            const bool survive = best >= threshold;
            if ((filtered.at(i, j) != kAbstain) != survive) ok = false;
        }
    }

    // coverage monotone under each filter and the composition
    std::vector<Label> gold10(10);
    for (std::size_t i = 0; i < 10; ++i) gold10[i] = static_cast<Label>(rng.below(2));
    FilterConfig cfg;
    cfg.train_accuracy_enabled = true;
    cfg.semantic_enabled = true;
    cfg.train_error_mask_prob = 0.5;
    cfg.semantic_threshold = threshold;
    cfg.seed = 99;
    SplitFiringTables split;
    split.labeled = table;
    FilterOutcome both = apply_filters(split, gold10, &gate, {"r0", "r1"}, cfg);
    FilterConfig train_only = cfg;
    train_only.semantic_enabled = false;
    FilterOutcome tr = apply_filters(split, gold10, &gate, {"r0", "r1"}, train_only);
    FilterConfig sem_only = cfg;
    sem_only.train_accuracy_enabled = false;
    FilterOutcome sem = apply_filters(split, gold10, &gate, {"r0", "r1"}, sem_only);
    const double base_cov = table.coverage();
    if (tr.tables.labeled.coverage() > base_cov) ok = false;
    if (sem.tables.labeled.coverage() > base_cov) ok = false;
    if (both.tables.labeled.coverage() > tr.tables.labeled.coverage()) ok = false;
    if (both.tables.labeled.coverage() > sem.tables.labeled.coverage()) ok = false;

    // mask_prob extremes
    FilterConfig all_mask;
    all_mask.train_error_mask_prob = 1.0;
    FiringTable masked = filter_training_accuracy(table, gold10, all_mask, nullptr);
    for (std::size_t i = 0; i < 10 && ok; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            const Label v = masked.at(i, j);
            if (v != kAbstain && v != gold10[i]) ok = false;  // every error gone
            if (table.at(i, j) == gold10[i] && v != gold10[i]) ok = false;  // correct kept
        }
    }
    FilterConfig no_mask;
    no_mask.train_error_mask_prob = 0.0;
    if (filter_training_accuracy(table, gold10, no_mask, nullptr).entries != table.entries) {
        ok = false;
    }
    report(5, ok,
           "coverage monotone under filters; semantic survivors equal brute-force cosines; "
           "mask extremes exact");
}

// shared fixture for criteria 6-8
struct PipelineFixture {
    Corpus corpus;
    EmbeddingStore embeddings;
    Vocabulary vocab;
    FeatureMatrix ngram;
    FeatureMatrix pca;
    std::vector<std::size_t> lab_rows, unl_rows, val_rows, tst_rows;
    std::vector<Label> lab_gold;
    std::vector<Label> labels;

    static PipelineFixture make() {
        PipelineFixture fx;
        fx.corpus = gen_synthetic_corpus({.seed = 7,
                                          .num_classes = 2,
                                          .n_labeled = 100,
                                          .n_unlabeled = 2000,
                                          .n_valid = 100,
                                          .n_test = 1000,
                                          .keyword_strength = 0.8});
        fx.embeddings = synth_embeddings(fx.corpus, 16, 7);
        VocabConfig vcfg;
        fx.vocab = build_vocabulary(fx.corpus, vcfg);
        fx.ngram = featurize_corpus(fx.corpus, fx.vocab, vcfg);
        fx.lab_rows = fx.corpus.indices(Split::Labeled);
        fx.unl_rows = fx.corpus.indices(Split::Unlabeled);
        fx.val_rows = fx.corpus.indices(Split::Valid);
        fx.tst_rows = fx.corpus.indices(Split::Test);
        std::vector<std::size_t> train_rows = fx.lab_rows;
        train_rows.insert(train_rows.end(), fx.unl_rows.begin(), fx.unl_rows.end());
        PrincipalComponent pc = compute_first_pc(fx.ngram, train_rows, {});
        fx.pca = pca_adjust_matrix(fx.ngram, pc);
        fx.labels.assign(fx.corpus.examples.size(), kAbstain);
        for (std::size_t i = 0; i < fx.corpus.examples.size(); ++i) {
            if (fx.corpus.examples[i].label.has_value()) {
                fx.labels[i] = *fx.corpus.examples[i].label;
            }
        }
        for (std::size_t r : fx.lab_rows) fx.lab_gold.push_back(fx.labels[r]);
        return fx;
    }

    // induce + filter for one seed; returns the filtered tables and rule ids
    struct Prepared {
        std::vector<Rule> rules;
        std::vector<std::string> rule_ids;
        SplitFiringTables tables;
    };
    Prepared prepare(uint64_t seed) const {
        Prepared p;
        ForestConfig fcfg;
        fcfg.num_trees = 16;
        fcfg.max_depth = 3;
        fcfg.seed = seed;
        p.rules = extract_tree_rules(train_forest(pca, lab_rows, lab_gold, 2, fcfg), 0.8);
        for (const Rule& r : p.rules) p.rule_ids.push_back(r.id);
        SplitFiringTables raw;
        raw.labeled = apply_rules(p.rules, pca, lab_rows);
        raw.unlabeled = apply_rules(p.rules, pca, unl_rows);
        raw.valid = apply_rules(p.rules, pca, val_rows);
        raw.test = apply_rules(p.rules, pca, tst_rows);
        std::vector<std::string> lab_ids;
        for (std::size_t r : lab_rows) lab_ids.push_back(corpus.examples[r].id);
        SemanticGate gate(embeddings, lab_ids, lab_gold, 2);
        FilterConfig fcfg2;
        fcfg2.train_accuracy_enabled = true;
        fcfg2.semantic_enabled = true;
        fcfg2.seed = seed;
        return Prepared{p.rules, p.rule_ids,
                        apply_filters(raw, lab_gold, &gate, p.rule_ids, fcfg2).tables};
    }

    TrainData wire(const FeatureMatrix& repr, const SplitFiringTables& tables,
                   const std::vector<std::string>& rule_ids) const {
        TrainData data;
        data.repr = &repr;
        data.labeled = lab_rows;
        data.unlabeled = unl_rows;
        data.valid = val_rows;
        data.test = tst_rows;
        data.labels = labels;
        data.labeled_firings = &tables.labeled;
        data.unlabeled_firings = &tables.unlabeled;
        data.valid_firings = &tables.valid;
        data.test_firings = &tables.test;
        data.rule_ids = rule_ids;
        return data;
    }
};

TrainConfig acceptance_train_config(uint64_t seed) {
    TrainConfig cfg;
    cfg.unsup_steps_per_iter = 64;
    cfg.seed = seed;
    return cfg;
}

// -------------------------------------------------------------- criterion 6
void criterion_degenerate_equivalence(const PipelineFixture& fx) {
    // one rule that always abstains, u_total = 0
    std::vector<Rule> rules(1);
    rules[0].id = "tree-0";
    rules[0].kind = Rule::Kind::Tree;
    TreeNode leaf;
    leaf.leaf_dist = {0.5, 0.5};
    rules[0].nodes.push_back(leaf);
    rules[0].tau = 0.9;
    SplitFiringTables tables;
    tables.labeled = apply_rules(rules, fx.ngram, fx.lab_rows);
    tables.unlabeled = apply_rules(rules, fx.ngram, fx.unl_rows);
    tables.valid = apply_rules(rules, fx.ngram, fx.val_rows);
    tables.test = apply_rules(rules, fx.ngram, fx.tst_rows);
    TrainData data = fx.wire(fx.ngram, tables, {"tree-0"});

    BackboneConfig bcfg;
    bcfg.input_dim = static_cast<int>(fx.ngram.dim);
    bcfg.num_classes = 2;
    bcfg.seed = 77;
    AggregatorConfig acfg;
    acfg.num_rules = 1;
    acfg.input_dim = static_cast<int>(fx.ngram.dim);
    acfg.num_classes = 2;
    acfg.u_total = 0.0;
    acfg.seed = 78;
    TrainConfig tcfg = acceptance_train_config(3);
    tcfg.self_train_iterations = 6;  // enough to diverge if the paths differed

    TrainResult ari_run = run_ari(data, bcfg, acfg, tcfg);
    BaselineResult base_run = run_selftrain_baseline(data, bcfg, tcfg);
    double worst = 0.0;
    for (std::size_t r : fx.tst_rows) {
        const std::vector<double> pa = ari_run.student.predict_proba(fx.ngram.row_span(r));
        const std::vector<double> pb = base_run.student.predict_proba(fx.ngram.row_span(r));
        for (std::size_t k = 0; k < pa.size(); ++k) {
            worst = std::max(worst, std::abs(pa[k] - pb[k]));
        }
    }
    std::ostringstream os;
    os << "all-abstain rules + u=0 vs plain self-training, max |diff| = " << worst;
    report(6, worst < 1e-9, os.str());
}

// -------------------------------------------------------------- criterion 7
void criterion_directional(const PipelineFixture& fx) {
    const auto t0 = std::chrono::steady_clock::now();
    int strictly_above = 0;
    double worst_drop = 0.0;
    double min_precision = 1.0;
    std::ostringstream rows;
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        PipelineFixture::Prepared prep = fx.prepare(seed);
        TrainData data = fx.wire(fx.ngram, prep.tables, prep.rule_ids);

        BackboneConfig bcfg;
        bcfg.input_dim = static_cast<int>(fx.ngram.dim);
        bcfg.num_classes = 2;
        bcfg.seed = seed;
        AggregatorConfig acfg;
        acfg.num_rules = static_cast<int>(prep.rule_ids.size());
        acfg.input_dim = static_cast<int>(fx.ngram.dim);
        acfg.num_classes = 2;
        acfg.seed = seed + 1;
        TrainConfig tcfg = acceptance_train_config(seed);

        TrainResult ari_run = run_ari(data, bcfg, acfg, tcfg);
        TrainData sup_data = data;
        sup_data.unlabeled.clear();
        BaselineResult sup_run = run_selftrain_baseline(sup_data, bcfg, tcfg);

        std::vector<Label> tst_gold;
        for (std::size_t r : fx.tst_rows) tst_gold.push_back(fx.labels[r]);
        const double ari_f1 =
            f1_score(predict_student(ari_run.best_student, data, fx.tst_rows), tst_gold, 2).f1;
        const double sup_f1 =
            f1_score(predict_student(sup_run.best_student, data, fx.tst_rows), tst_gold, 2).f1;
        if (ari_f1 > sup_f1) {
            ++strictly_above;
        } else {
            worst_drop = std::max(worst_drop, sup_f1 - ari_f1);
        }
        RuleAudit audit = rule_audit(prep.tables.test, tst_gold, 2, prep.rule_ids);
        min_precision = std::min(min_precision, audit.precision_f1.value_or(0.0));
        rows << " s" << seed << ":" << std::setprecision(4) << ari_f1 << ">" << sup_f1;
    }
    const double elapsed = seconds_since(t0);
    const bool ok =
        strictly_above >= 8 && worst_drop <= 0.005 && min_precision >= 0.9 && elapsed < 120.0;
    std::ostringstream os;
    os << "ARI beats supervised in " << strictly_above << "/10 seeds (worst drop "
       << worst_drop << "), min rule precision-on-covered " << min_precision << " ("
       << std::setprecision(3) << elapsed << "s)";
    report(7, ok, os.str());
    std::printf("      %s\n", rows.str().c_str());
}

// -------------------------------------------------------------- criterion 8
void criterion_sweep(const PipelineFixture& fx) {
    PipelineFixture::Prepared prep = fx.prepare(42);
    TrainData data = fx.wire(fx.ngram, prep.tables, prep.rule_ids);
    BackboneConfig bcfg;
    bcfg.input_dim = static_cast<int>(fx.ngram.dim);
    bcfg.num_classes = 2;
    bcfg.seed = 5;
    AggregatorConfig acfg;
    acfg.num_rules = static_cast<int>(prep.rule_ids.size());
    acfg.input_dim = static_cast<int>(fx.ngram.dim);
    acfg.num_classes = 2;
    acfg.seed = 6;
    TrainConfig tcfg = acceptance_train_config(9);
    tcfg.self_train_iterations = 4;  // sweep runs 2 x 4 full trainings
    tcfg.distill_threshold = 0.0;
    const std::vector<DistillMode> modes = {DistillMode::Soft, DistillMode::SoftThresh,
                                            DistillMode::Hard, DistillMode::HardThresh};
    std::vector<VariantResult> a = sweep_variants(data, bcfg, acfg, tcfg, modes);
    std::vector<VariantResult> b = sweep_variants(data, bcfg, acfg, tcfg, modes);
    bool ok = a.size() == 4 && b.size() == 4;
    for (std::size_t i = 0; i < a.size() && ok; ++i) {
        if (a[i].valid_f1 != b[i].valid_f1 || a[i].test_f1 != b[i].test_f1) ok = false;
    }
    // t = 0 twins match bitwise
    if (ok) {
        ok = a[0].valid_f1 == a[1].valid_f1 && a[0].test_f1 == a[1].test_f1 &&
             a[2].valid_f1 == a[3].valid_f1 && a[2].test_f1 == a[3].test_f1;
    }
    report(8, ok, "sweep over four distill modes is deterministic; t=0 matches unthresholded");
}

// -------------------------------------------------------------- criterion 9
void criterion_export_roundtrip(const PipelineFixture& fx) {
    bool ok = true;
    std::string detail;
    const fs::path dir = fs::temp_directory_path() / "ari_acceptance_export";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // a mixed rule set: linear rules + the pca forest
    LinearTrainConfig lcfg;
    lcfg.epochs = 120;
    LinearRuleModel lin = train_linear(fx.ngram, fx.lab_rows, fx.lab_gold, 2, lcfg);
    std::vector<Rule> rules = extract_linear_rules(lin, 8);
    ForestConfig fcfg;
    fcfg.num_trees = 4;
    fcfg.seed = 11;
    for (Rule& r : extract_tree_rules(train_forest(fx.ngram, fx.lab_rows, fx.lab_gold, 2, fcfg),
                                      0.8)) {
        rules.push_back(std::move(r));
    }
    FiringTable in_process = apply_rules(rules, fx.ngram, fx.tst_rows);

    // export, then replay through the CLI in a fresh process
    save_rules(dir / "rules.json", rules, fx.vocab, FeatureSpace::Ngram);
    save_corpus(fx.corpus, dir / "corpus");
    save_embeddings(fx.embeddings, dir / "corpus" / "embeddings.jsonl");
    {
        // manifest written before embeddings existed; rewrite with the path
        Corpus with_emb = fx.corpus;
        with_emb.embeddings_path = dir / "corpus" / "embeddings.jsonl";
        save_corpus(with_emb, dir / "corpus");
    }
    fx.vocab.save(dir / "vocab.json");
    save_features(dir / "features_ngram.bin", fx.ngram);
    save_features(dir / "features_pca.bin", fx.pca);

    const std::string cli = ARI_CLI_PATH;
    const std::string cmd = cli + " filter --data " + (dir / "corpus" / "manifest.json").string() +
                            " --artifacts " + dir.string() + " --filters none >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
        ok = false;
        detail = "CLI filter invocation failed";
    }
    if (ok) {
        LoadedFirings fresh = load_firings(dir / "firings_test.bin");
        if (fresh.table.entries != in_process.entries ||
            fresh.table.example_ids != in_process.example_ids) {
            ok = false;
            detail = "firing tables differ across processes";
        }
    }

    // Appendix-style line grammar for the linear rules
    if (ok) {
        const std::string listing =
            dump_rules(rules, fx.vocab, fx.corpus.label_names, FeatureSpace::Ngram);
        std::istringstream ss(listing);
        std::string line;
        const std::regex grammar("^if \"[^\"]+\" in x predict [A-Z0-9_]+ else ABSTAIN$");
        int linear_lines = 0;
        while (std::getline(ss, line)) {
            if (line.rfind("if \"", 0) == 0) {
                ++linear_lines;
                if (!std::regex_match(line, grammar)) {
                    ok = false;
                    detail = "bad dump line: " + line;
                }
            }
        }
        if (linear_lines != 8) {
            ok = false;
            detail = "expected 8 linear dump lines, saw " + std::to_string(linear_lines);
        }
    }
    report(9, ok,
           "rules.json replayed in a fresh process gives identical firings; dump matches the "
           "line grammar" +
               (detail.empty() ? "" : " [" + detail + "]"));
}

// ------------------------------------------------------------- criterion 10
void criterion_metric_fixtures() {
    bool ok = true;
    std::string detail;

    // binary F1 = 0.6667 on TP=2 FP=1 FN=1
    const std::vector<Label> golds = {1, 1, 1, 0, 0, 0};
    const std::vector<Label> preds = {1, 1, 0, 1, 0, 0};
    const double f1 = f1_score(preds, golds, 2).f1;
    if (std::abs(f1 - 0.6667) >= 1e-4) {
        ok = false;
        detail = "binary F1 " + std::to_string(f1);
    }

    if (geometric_mean({1.0, 4.0}) != 2.0) {
        ok = false;
        detail = "geometric mean of {1,4} not exactly 2";
    }

    // 8-example difficulty fixture with hand-set entropies
    std::vector<ExampleEval> rows;
    const std::vector<double> ps = {0.99, 0.97, 0.9, 0.85, 0.8, 0.7, 0.6, 0.51};
    for (std::size_t i = 0; i < ps.size(); ++i) {
        ExampleEval row;
        row.id = "x" + std::to_string(i);
        row.backbone_dist = {ps[i], 1.0 - ps[i]};
        row.teacher_dist = row.backbone_dist;
        row.rule_weight_total = 0.0;
        row.gold = 0;
        rows.push_back(row);
    }
    DifficultyReport rep = difficulty_report(rows);
    // hand ranking: entropy is increasing in index, quartiles 2/4/2
    if (rep.bins.size() != 3 || rep.bins[0].count != 2 || rep.bins[1].count != 4 ||
        rep.bins[2].count != 2) {
        ok = false;
        detail = "difficulty bins off";
    }
    report(10, ok,
           "binary F1 fixture, exact geometric mean, hand-ranked difficulty bins" +
               (detail.empty() ? "" : " [" + detail + "]"));
}

}  // namespace

int main() {
    std::printf("acceptance: backend=%s\n", kernels::backend_name(kernels::active_backend()));
    criterion_normalization();
    criterion_gradients();
    criterion_pca_oracle();
    criterion_rule_oracles();
    criterion_filters();
    PipelineFixture fx = PipelineFixture::make();
    criterion_degenerate_equivalence(fx);
    criterion_directional(fx);
    criterion_sweep(fx);
    criterion_export_roundtrip(fx);
    criterion_metric_fixtures();
    if (g_failures > 0) {
        std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("acceptance: all criteria passed\n");
    return 0;
}
