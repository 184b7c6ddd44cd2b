#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ari/corpus.hpp"
#include "ari/types.hpp"

namespace ari {

// Lowercases and splits on non-alphanumeric bytes; bytes >= 0x80 are kept so
// UTF-8 sequences stay intact. No stemming.
std::vector<std::string> tokenize(const std::string& text);

bool is_stopword(const std::string& token);

struct VocabConfig {
    std::size_t max_size = 1600;
    int min_token_freq = 4;
    double max_doc_freq = 0.95;  // fraction of documents
    int ngram_max = 2;
    bool use_stopwords = true;
};

struct Vocabulary {
    std::vector<std::string> entries;  // frequency desc, ties lexicographic
    std::vector<int64_t> token_freq;
    std::vector<int64_t> doc_freq;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t size() const { return entries.size(); }
    uint64_t hash() const;

    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);
};

// Counts ngrams (up to ngram_max, space-joined) over labeled + unlabeled
// texts after stopword removal, applies the min-token-frequency and
// max-document-frequency cuts, then keeps the max_size most frequent entries.
Vocabulary build_vocabulary(const Corpus& corpus, const VocabConfig& cfg);

// The ngram sequence of a text under the vocabulary pipeline (stopwords
// removed, n = 1..ngram_max).
std::vector<std::string> text_ngrams(const std::string& text, const VocabConfig& cfg);

enum class FeatureSpace { Ngram, PcaAdjusted, Embedding };
const char* feature_space_name(FeatureSpace s);
FeatureSpace feature_space_from_name(const std::string& name);

struct FeatureMatrix {
    FeatureSpace space = FeatureSpace::Ngram;
    std::size_t dim = 0;
    std::vector<std::string> ids;
    std::vector<double> data;  // rows() x dim, row-major
    uint64_t vocab_hash = 0;

    std::size_t rows() const { return ids.size(); }
    const double* row(std::size_t i) const { return data.data() + i * dim; }
    double* row(std::size_t i) { return data.data() + i * dim; }
    std::span<const double> row_span(std::size_t i) const { return {row(i), dim}; }
};

// Binary presence vector over the vocabulary.
std::vector<double> featurize_ngram(const std::string& text, const Vocabulary& vocab,
                                    const VocabConfig& cfg = {});

// One row per corpus example, in corpus order.
FeatureMatrix featurize_corpus(const Corpus& corpus, const Vocabulary& vocab,
                               const VocabConfig& cfg = {});

// Rows of `store` arranged in corpus order.
FeatureMatrix embedding_matrix(const Corpus& corpus, const EmbeddingStore& store);

struct PrincipalComponent {
    std::vector<double> v;  // unit length
    bool mean_subtracted = false;
    int iterations = 0;
};

struct PcaConfig {
    bool mean_subtract = false;
    double tol = 1e-8;
    int max_iter = 1000;
    uint64_t seed = 1;
};

// Dominant right singular vector of the row subset, by power iteration on
// P^T P, sign-canonicalized so the largest-magnitude entry is positive.
// Throws on non-convergence (the message carries the iteration count).
PrincipalComponent compute_first_pc(const FeatureMatrix& feats,
                                    const std::vector<std::size_t>& row_indices,
                                    const PcaConfig& cfg);

// phi - v * (v.phi) / ||phi||_2, applied as written; a zero vector is
// returned unchanged. Not an orthogonal projector unless ||phi|| = 1.
std::vector<double> pca_adjust(std::span<const double> phi, const PrincipalComponent& pc);

FeatureMatrix pca_adjust_matrix(const FeatureMatrix& feats, const PrincipalComponent& pc);

}  // namespace ari
