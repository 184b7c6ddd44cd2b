#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <tuple>

#include "ari/corpus.hpp"

using namespace ari;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("ari_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

}  // namespace

TEST_CASE("load_corpus reads a manifest and infers K") {
    fs::path dir = temp_dir("corpus_load");
    write_file(dir / "labeled.jsonl",
               R"({"id":"a","text":"one two","label":0})"
               "\n"
               R"({"id":"b","text":"three","label":1})"
               "\n"
               R"({"id":"c","text":"four","label":1})"
               "\n");
    write_file(dir / "unlabeled.jsonl", R"({"id":"u1","text":"five","label":null})"
                                        "\n");
    write_file(dir / "manifest.json",
               R"({"splits":{"labeled":"labeled.jsonl","unlabeled":"unlabeled.jsonl"}})");
    Corpus corpus = load_corpus(dir / "manifest.json");
    CHECK(corpus.num_classes == 2);  // forced by the max-label rule
    CHECK(corpus.examples.size() == 4);
    CHECK(corpus.indices(Split::Labeled).size() == 3);
    CHECK(corpus.indices(Split::Unlabeled).size() == 1);
    CHECK_FALSE(corpus.examples[3].label.has_value());
}

TEST_CASE("load_corpus rejects duplicate ids and out-of-range labels") {
    fs::path dir = temp_dir("corpus_bad");
    write_file(dir / "labeled.jsonl",
               R"({"id":"a","text":"x","label":0})"
               "\n"
               R"({"id":"a","text":"y","label":1})"
               "\n");
    write_file(dir / "manifest.json", R"({"splits":{"labeled":"labeled.jsonl"}})");
    CHECK_THROWS_AS(load_corpus(dir / "manifest.json"), ValidationError);

    write_file(dir / "labeled.jsonl",
               R"({"id":"a","text":"x","label":0})"
               "\n"
               R"({"id":"b","text":"y","label":5})"
               "\n");
    write_file(dir / "manifest.json",
               R"({"splits":{"labeled":"labeled.jsonl"},"num_classes":2})");
    CHECK_THROWS_AS(load_corpus(dir / "manifest.json"), ValidationError);
}

TEST_CASE("unlabeled label fields are stripped with a warning") {
    fs::path dir = temp_dir("corpus_strip");
    write_file(dir / "labeled.jsonl",
               R"({"id":"a","text":"x","label":0})"
               "\n"
               R"({"id":"b","text":"y","label":1})"
               "\n");
    write_file(dir / "unlabeled.jsonl", R"({"id":"u","text":"z","label":1})"
                                        "\n");
    write_file(dir / "manifest.json",
               R"({"splits":{"labeled":"labeled.jsonl","unlabeled":"unlabeled.jsonl"}})");
    Corpus corpus = load_corpus(dir / "manifest.json");
    for (const Example& ex : corpus.examples) {
        if (ex.split == Split::Unlabeled) CHECK_FALSE(ex.label.has_value());
    }
}

TEST_CASE("save -> load round trip preserves everything") {
    Corpus corpus = gen_synthetic_corpus({.seed = 3,
                                          .num_classes = 3,
                                          .n_labeled = 9,
                                          .n_unlabeled = 5,
                                          .n_valid = 3,
                                          .n_test = 3,
                                          .keyword_strength = 0.9});
    fs::path dir = temp_dir("corpus_rt");
    save_corpus(corpus, dir);
    Corpus loaded = load_corpus(dir / "manifest.json");
    REQUIRE(loaded.examples.size() == corpus.examples.size());
    // save groups by split; compare as (id -> record) sets
    auto key = [](const Corpus& c) {
        std::map<std::string, std::tuple<std::string, int, int>> m;
        for (const Example& ex : c.examples) {
            m[ex.id] = {ex.text, ex.label.value_or(-1), static_cast<int>(ex.split)};
        }
        return m;
    };
    CHECK(key(loaded) == key(corpus));
    CHECK(loaded.num_classes == corpus.num_classes);
}

TEST_CASE("synthetic generation is a pure function of its arguments") {
    SynthConfig cfg{.seed = 7,
                    .num_classes = 2,
                    .n_labeled = 100,
                    .n_unlabeled = 200,
                    .n_valid = 20,
                    .n_test = 20,
                    .keyword_strength = 0.8};
    Corpus a = gen_synthetic_corpus(cfg);
    Corpus b = gen_synthetic_corpus(cfg);
    REQUIRE(a.examples.size() == b.examples.size());
    for (std::size_t i = 0; i < a.examples.size(); ++i) {
        CHECK(a.examples[i].id == b.examples[i].id);
        CHECK(a.examples[i].text == b.examples[i].text);
        CHECK(a.examples[i].label == b.examples[i].label);
    }
}

TEST_CASE("synthetic corpus has at least one labeled example per class") {
    Corpus corpus = gen_synthetic_corpus({.seed = 1,
                                          .num_classes = 2,
                                          .n_labeled = 100,
                                          .n_unlabeled = 10,
                                          .n_valid = 4,
                                          .n_test = 4,
                                          .keyword_strength = 0.8});
    corpus.validate();  // would throw otherwise
    CHECK(corpus.indices(Split::Labeled).size() == 100);
}

TEST_CASE("at full keyword strength any keyword rule is perfectly precise") {
    // strength 1.0 makes the leak probability 0: a keyword never appears
    // outside its class, so presence -> class is exact
    Corpus corpus = gen_synthetic_corpus({.seed = 2,
                                          .num_classes = 3,
                                          .n_labeled = 60,
                                          .n_unlabeled = 120,
                                          .n_valid = 30,
                                          .n_test = 30,
                                          .keyword_strength = 1.0});
    // brute-force count over the generated texts: every firing on a labeled
    // example must agree with its class
    for (int cls = 0; cls < 3; ++cls) {
        for (const std::string& kw : synth_class_keywords(cls)) {
            int fired = 0;
            for (const Example& ex : corpus.examples) {
                const bool present =
                    (" " + ex.text + " ").find(" " + kw + " ") != std::string::npos;
                if (!present) continue;
                ++fired;
                if (ex.label.has_value()) CHECK(*ex.label == cls);
            }
            CHECK(fired > 0);
        }
    }
}

TEST_CASE("small-dataset split sizes survive a save/load cycle") {
    // sizes typical of the smallest web-comment datasets
    Corpus corpus = gen_synthetic_corpus({.seed = 7,
                                          .num_classes = 2,
                                          .n_labeled = 79,
                                          .n_unlabeled = 1507,
                                          .n_valid = 120,
                                          .n_test = 250,
                                          .keyword_strength = 0.8});
    fs::path dir = temp_dir("youtube_sizes");
    save_corpus(corpus, dir);
    Corpus loaded = load_corpus(dir / "manifest.json");
    CHECK(loaded.indices(Split::Labeled).size() == 79);
    CHECK(loaded.indices(Split::Unlabeled).size() == 1507);
    CHECK(loaded.indices(Split::Valid).size() == 120);
    CHECK(loaded.indices(Split::Test).size() == 250);
}

TEST_CASE("empty unlabeled split still loads") {
    fs::path dir = temp_dir("corpus_empty_unl");
    write_file(dir / "labeled.jsonl",
               R"({"id":"a","text":"x","label":0})"
               "\n"
               R"({"id":"b","text":"y","label":1})"
               "\n");
    write_file(dir / "unlabeled.jsonl", "");
    write_file(dir / "manifest.json",
               R"({"splits":{"labeled":"labeled.jsonl","unlabeled":"unlabeled.jsonl"}})");
    Corpus corpus = load_corpus(dir / "manifest.json");
    CHECK(corpus.indices(Split::Unlabeled).empty());
}

TEST_CASE("load_embeddings validates coverage and shape") {
    fs::path dir = temp_dir("emb");
    write_file(dir / "labeled.jsonl",
               R"({"id":"a","text":"x","label":0})"
               "\n"
               R"({"id":"b","text":"y","label":1})"
               "\n");
    write_file(dir / "manifest.json", R"({"splits":{"labeled":"labeled.jsonl"}})");
    Corpus corpus = load_corpus(dir / "manifest.json");

    write_file(dir / "emb.jsonl",
               R"({"id":"a","vec":[1.0,0.0,0.0,0.0]})"
               "\n"
               R"({"id":"b","vec":[0.0,1.0,0.0,0.0]})"
               "\n");
    EmbeddingStore store = load_embeddings(dir / "emb.jsonl", corpus);
    CHECK(store.dim == 4);
    CHECK(store.vectors.size() == 2);

    SUBCASE("ragged length") {
        write_file(dir / "ragged.jsonl",
                   R"({"id":"a","vec":[1.0,0.0,0.0,0.0]})"
                   "\n"
                   R"({"id":"b","vec":[0.0,1.0,0.0]})"
                   "\n");
        CHECK_THROWS_AS(load_embeddings(dir / "ragged.jsonl", corpus), ValidationError);
    }
    SUBCASE("missing id names the example") {
        write_file(dir / "missing.jsonl", R"({"id":"a","vec":[1.0,0.0,0.0,0.0]})"
                                          "\n");
        CHECK_THROWS_WITH_AS(load_embeddings(dir / "missing.jsonl", corpus),
                             doctest::Contains("'b'"), ValidationError);
    }
}

TEST_CASE("synth embeddings are deterministic and unit norm") {
    Corpus corpus = gen_synthetic_corpus({.seed = 5,
                                          .num_classes = 2,
                                          .n_labeled = 4,
                                          .n_unlabeled = 2,
                                          .n_valid = 2,
                                          .n_test = 2,
                                          .keyword_strength = 1.0});
    EmbeddingStore a = synth_embeddings(corpus, 16, 9);
    EmbeddingStore b = synth_embeddings(corpus, 16, 9);
    REQUIRE(a.vectors.size() == corpus.examples.size());
    for (const auto& [id, vec] : a.vectors) {
        double norm = 0.0;
        for (double v : vec) norm += v * v;
        CHECK(std::sqrt(norm) == doctest::Approx(1.0));
        CHECK(b.vectors.at(id) == vec);
    }
}
