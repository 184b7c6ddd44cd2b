#include <doctest.h>

#include <cmath>

#include "ari/filters.hpp"
#include "ari/kernels.hpp"
#include "ari/rng.hpp"
#include "oracles.hpp"

using namespace ari;

namespace {

FiringTable make_table(std::size_t rows, std::size_t rules,
                       const std::vector<int16_t>& entries) {
    FiringTable t;
    t.n_rules = rules;
    for (std::size_t i = 0; i < rows; ++i) t.example_ids.push_back("x" + std::to_string(i));
    t.entries = entries;
    return t;
}

EmbeddingStore store_from(const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
    EmbeddingStore store;
    store.dim = rows[0].second.size();
    for (const auto& [id, vec] : rows) store.vectors[id] = vec;
    return store;
}

}  // namespace

TEST_CASE("training-accuracy filter leaves correct firings alone") {
    FiringTable t = make_table(3, 2,
                               {
                                   0, 1,   // row 0, gold 0: rule0 right, rule1 wrong
                                   1, -1,  // row 1, gold 1: rule0 right
                                   0, 0,   // row 2, gold 0
                               });
    FilterConfig cfg;
    cfg.train_error_mask_prob = 1.0;
    FilterReport report;
    report.rule_ids = {"a", "b"};
    report.rules.assign(2, {});
    FiringTable out = filter_training_accuracy(t, {0, 1, 0}, cfg, &report);
    CHECK(out.at(0, 0) == 0);
    CHECK(out.at(0, 1) == kAbstain);  // only the error is masked
    CHECK(out.at(1, 0) == 1);
    CHECK(out.at(2, 0) == 0);
    CHECK(report.rules[1].train_blocked == 1);

    // per-rule training precision on what remains is 1.0 by construction
    for (std::size_t j = 0; j < out.n_rules; ++j) {
        for (std::size_t i = 0; i < out.rows(); ++i) {
            const Label v = out.at(i, j);
            if (v != kAbstain) CHECK(v == std::vector<Label>{0, 1, 0}[i]);
        }
    }
}

TEST_CASE("mask_prob 0 keeps the table unchanged") {
    FiringTable t = make_table(2, 2, {1, 0, 0, 1});
    FilterConfig cfg;
    cfg.train_error_mask_prob = 0.0;
    FiringTable out = filter_training_accuracy(t, {0, 1}, cfg, nullptr);
    CHECK(out.entries == t.entries);
}

TEST_CASE("a rule with no training errors is untouched at any probability") {
    FiringTable t = make_table(2, 1, {0, 1});
    FilterConfig cfg;
    cfg.train_error_mask_prob = 1.0;
    FiringTable out = filter_training_accuracy(t, {0, 1}, cfg, nullptr);
    CHECK(out.entries == t.entries);
}

TEST_CASE("seeded masking equals an independent re-implementation of the sampling") {
    // 40 erroneous firings (single rule, every row wrong), p = 0.5
    const std::size_t n = 40;
    std::vector<int16_t> entries(n, 1);
    FiringTable t = make_table(n, 1, entries);
    std::vector<Label> gold(n, 0);
    FilterConfig cfg;
    cfg.train_error_mask_prob = 0.5;
    cfg.seed = 2024;
    FiringTable out = filter_training_accuracy(t, gold, cfg, nullptr);

    // oracle: same splitmix64 stream (id 0xF1), same row-major order
    oracles::ReferenceSampler sampler = oracles::ReferenceSampler::stream(2024, 0xF1);
    std::size_t expect_masked = 0;
    std::vector<bool> expect(n);
    for (std::size_t i = 0; i < n; ++i) {
        expect[i] = sampler.uniform01() < 0.5;
        expect_masked += expect[i] ? 1 : 0;
    }
    std::size_t got_masked = 0;
    for (std::size_t i = 0; i < n; ++i) {
        CHECK((out.at(i, 0) == kAbstain) == expect[i]);
        got_masked += out.at(i, 0) == kAbstain ? 1 : 0;
    }
    CHECK(got_masked == expect_masked);
    CHECK(got_masked > 0);
    CHECK(got_masked < n);
}

TEST_CASE("exact-count mode masks round(p * errors) entries") {
    const std::size_t n = 41;
    FiringTable t = make_table(n, 1, std::vector<int16_t>(n, 1));
    std::vector<Label> gold(n, 0);
    FilterConfig cfg;
    cfg.train_error_mask_prob = 0.5;
    cfg.exact_count = true;
    cfg.seed = 3;
    FiringTable out = filter_training_accuracy(t, gold, cfg, nullptr);
    std::size_t masked = 0;
    for (std::size_t i = 0; i < n; ++i) masked += out.at(i, 0) == kAbstain ? 1 : 0;
    CHECK(masked == 21);  // llround(0.5 * 41)
}

TEST_CASE("semantic filter against a brute-force cosine oracle") {
    // 10 examples, 16-dim embeddings, 4 labeled (2 per class)
    Rng rng(11);
    const std::size_t dim = 16;
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (int i = 0; i < 10; ++i) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.normal();
        rows.push_back({"x" + std::to_string(i), v});
    }
    EmbeddingStore store = store_from(rows);
    const std::vector<std::string> labeled_ids = {"x0", "x1", "x2", "x3"};
    const std::vector<Label> labeled_labels = {0, 0, 1, 1};
    SemanticGate gate(store, labeled_ids, labeled_labels, 2);

    // one rule voting class 1 on every example
    FiringTable t = make_table(10, 1, std::vector<int16_t>(10, 1));
    const double threshold = 0.2;
    FiringTable out = filter_semantic(t, gate, threshold, nullptr);

    auto cosine = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double num = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            num += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        return num / (std::sqrt(na) * std::sqrt(nb));
    };
    for (int i = 0; i < 10; ++i) {
        const std::string id = "x" + std::to_string(i);
        const double best = std::max(cosine(store.vectors.at(id), store.vectors.at("x2")),
                                     cosine(store.vectors.at(id), store.vectors.at("x3")));
        const bool survive = best >= threshold;
        CHECK((out.at(static_cast<std::size_t>(i), 0) != kAbstain) == survive);
    }
}

TEST_CASE("threshold -1 never blocks; identical example survives any threshold <= 1") {
    std::vector<std::pair<std::string, std::vector<double>>> rows = {
        {"a", {1.0, 0.0}}, {"b", {0.0, 1.0}}, {"c", {1.0, 0.0}}};
    EmbeddingStore store = store_from(rows);
    SemanticGate gate(store, {"a", "b"}, {0, 1}, 2);
    FiringTable t = make_table(3, 1, {0, 0, 0});
    t.example_ids = {"a", "b", "c"};
    FiringTable open = filter_semantic(t, gate, -1.0, nullptr);
    CHECK(open.entries == t.entries);
    // "c" is identical to labeled "a" (class 0) so cos = 1 >= 1.0
    FiringTable strict = filter_semantic(t, gate, 1.0, nullptr);
    CHECK(strict.at(2, 0) == 0);
    CHECK(strict.at(1, 0) == kAbstain);  // "b" has cos 0 to class-0 support
}

TEST_CASE("class without labeled embeddings blocks and is counted") {
    std::vector<std::pair<std::string, std::vector<double>>> rows = {{"a", {1.0, 0.0}},
                                                                     {"b", {0.0, 1.0}}};
    EmbeddingStore store = store_from(rows);
    SemanticGate gate(store, {"a"}, {0}, 2);  // class 1 has no support
    FiringTable t = make_table(2, 1, {1, 1});
    t.example_ids = {"a", "b"};
    FilterReport report;
    report.rule_ids = {"r"};
    report.rules.assign(1, {});
    FiringTable out = filter_semantic(t, gate, -1.0, &report);
    CHECK(out.at(0, 0) == kAbstain);
    CHECK(out.at(1, 0) == kAbstain);
    CHECK(report.semantic_no_labeled_class == 2);
}

TEST_CASE("apply_filters composes, respects split scoping and reports blocks") {
    Rng rng(19);
    const std::size_t dim = 8;
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (int i = 0; i < 12; ++i) {
        std::vector<double> v(dim);
        for (double& x : v) x = rng.normal();
        rows.push_back({"e" + std::to_string(i), v});
    }
    EmbeddingStore store = store_from(rows);
    std::vector<std::string> labeled_ids = {"e0", "e1", "e2", "e3"};
    std::vector<Label> labeled_gold = {0, 0, 1, 1};
    SemanticGate gate(store, labeled_ids, labeled_gold, 2);

    SplitFiringTables tables;
    tables.labeled = make_table(4, 2, {0, 1, 1, 1, 1, 0, 0, 1});
    tables.labeled.example_ids = labeled_ids;
    tables.unlabeled = make_table(4, 2, {0, 0, 1, 1, 0, 1, 1, 0});
    tables.unlabeled.example_ids = {"e4", "e5", "e6", "e7"};
    tables.valid = make_table(4, 2, {0, 1, 1, 0, 1, 0, 0, 1});
    tables.valid.example_ids = {"e8", "e9", "e10", "e11"};

    FilterConfig cfg;
    cfg.train_accuracy_enabled = true;
    cfg.semantic_enabled = true;
    cfg.train_error_mask_prob = 1.0;
    cfg.semantic_threshold = 0.1;
    cfg.seed = 7;

    FilterOutcome outcome = apply_filters(tables, labeled_gold, &gate, {"r0", "r1"}, cfg);

    // coverage can only shrink, on every split
    CHECK(outcome.tables.labeled.coverage() <= tables.labeled.coverage());
    CHECK(outcome.tables.unlabeled.coverage() <= tables.unlabeled.coverage());
    CHECK(outcome.tables.valid.coverage() <= tables.valid.coverage());

    // entries only move toward abstain
    auto monotone = [](const FiringTable& before, const FiringTable& after) {
        for (std::size_t i = 0; i < before.rows(); ++i) {
            for (std::size_t j = 0; j < before.n_rules; ++j) {
                if (after.at(i, j) != kAbstain) CHECK(after.at(i, j) == before.at(i, j));
            }
        }
    };
    monotone(tables.labeled, outcome.tables.labeled);
    monotone(tables.unlabeled, outcome.tables.unlabeled);
    monotone(tables.valid, outcome.tables.valid);

    // blocked counts add up: every firing either survived or was counted once
    int64_t fired_before = 0;
    int64_t fired_after = 0;
    int64_t blocked = outcome.report.semantic_no_labeled_class;
    for (const auto& r : outcome.report.rules) blocked += r.train_blocked + r.semantic_blocked;
    for (const FiringTable* t : {&tables.labeled, &tables.unlabeled, &tables.valid}) {
        for (int16_t e : t->entries) fired_before += e != kAbstain ? 1 : 0;
    }
    for (const FiringTable* t :
         {&outcome.tables.labeled, &outcome.tables.unlabeled, &outcome.tables.valid}) {
        for (int16_t e : t->entries) fired_after += e != kAbstain ? 1 : 0;
    }
    CHECK(fired_before - fired_after == blocked - outcome.report.semantic_no_labeled_class);

    SUBCASE("no filters is the identity") {
        FilterConfig off;
        FilterOutcome same = apply_filters(tables, labeled_gold, &gate, {"r0", "r1"}, off);
        CHECK(same.tables.labeled.entries == tables.labeled.entries);
        CHECK(same.tables.unlabeled.entries == tables.unlabeled.entries);
        CHECK(same.tables.valid.entries == tables.valid.entries);
    }
    SUBCASE("mask 0 + threshold -1 is bit-identical to unfiltered") {
        FilterConfig loose;
        loose.train_accuracy_enabled = true;
        loose.semantic_enabled = true;
        loose.train_error_mask_prob = 0.0;
        loose.semantic_threshold = -1.0;
        FilterOutcome same = apply_filters(tables, labeled_gold, &gate, {"r0", "r1"}, loose);
        CHECK(same.tables.labeled.entries == tables.labeled.entries);
        CHECK(same.tables.unlabeled.entries == tables.unlabeled.entries);
        CHECK(same.tables.valid.entries == tables.valid.entries);
    }
    SUBCASE("semantic without embeddings is a configuration error") {
        FilterConfig bad;
        bad.semantic_enabled = true;
        CHECK_THROWS_AS(apply_filters(tables, labeled_gold, nullptr, {"r0", "r1"}, bad),
                        ValidationError);
    }
}
