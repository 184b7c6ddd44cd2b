#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ari/types.hpp"

namespace ari {

struct Example {
    std::string id;
    std::string text;
    std::optional<Label> label;  // absent exactly for unlabeled examples
    Split split = Split::Labeled;
};

struct Corpus {
    std::vector<Example> examples;
    int num_classes = 0;
    std::vector<std::string> label_names;            // size num_classes
    std::optional<std::filesystem::path> embeddings_path;  // from manifest, if any

    std::vector<std::size_t> indices(Split s) const;
    const std::string& label_name(Label k) const { return label_names[static_cast<std::size_t>(k)]; }

    // Enforces: unique ids, labels present/absent per split, labels < K,
    // at least one labeled example per class, K >= 2.
    void validate() const;
};

// Manifest: JSON with splits.{labeled,unlabeled,valid,test} (JSONL paths,
// relative to the manifest), optional num_classes (declared K wins), optional
// label_names, optional embeddings path.
Corpus load_corpus(const std::filesystem::path& manifest_path);

// Writes manifest.json plus one JSONL per split into dir. load(save(c)) == c.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

struct EmbeddingStore {
    std::size_t dim = 0;
    std::map<std::string, std::vector<double>> vectors;

    bool empty() const { return vectors.empty(); }
    const std::vector<double>* find(const std::string& id) const;
};

// JSONL rows {"id": str, "vec": [float,...]}. Requires a finite vector of a
// single common length for every id in the corpus.
EmbeddingStore load_embeddings(const std::filesystem::path& path, const Corpus& corpus);
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);

struct SynthConfig {
    uint64_t seed = 7;
    int num_classes = 2;
    int n_labeled = 100;
    int n_unlabeled = 2000;
    int n_valid = 100;
    int n_test = 250;
    double keyword_strength = 0.8;  // per-keyword inclusion probability in its class
};

// Deterministic toy corpus: each class owns a few signal keywords that appear
// with probability keyword_strength in that class and leak into other classes
// with probability 0.1*(1-keyword_strength); the rest of each text is filler
// drawn from a fixed vocabulary.
Corpus gen_synthetic_corpus(const SynthConfig& cfg);

// The signal keywords gen_synthetic_corpus assigns to a class.
std::vector<std::string> synth_class_keywords(int cls);

// Stand-in for precomputed sentence embeddings: normalized sum of per-token
// pseudo-random unit vectors, deterministic in (seed, dim, text).
EmbeddingStore synth_embeddings(const Corpus& corpus, std::size_t dim, uint64_t seed);

}  // namespace ari
