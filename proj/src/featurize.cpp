#include "ari/featurize.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "ari/kernels.hpp"
#include "ari/rng.hpp"

namespace ari {

using nlohmann::json;

namespace {

// Standard English stopword list (NLTK-style).
const char* const kStopwords[] = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any",
    "are", "aren", "as", "at", "be", "because", "been", "before", "being", "below",
    "between", "both", "but", "by", "can", "couldn", "d", "did", "didn", "do", "does",
    "doesn", "doing", "don", "down", "during", "each", "few", "for", "from", "further",
    "had", "hadn", "has", "hasn", "have", "haven", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "isn", "it",
    "its", "itself", "just", "ll", "m", "ma", "me", "mightn", "more", "most", "mustn",
    "my", "myself", "needn", "no", "nor", "not", "now", "o", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "re", "s",
    "same", "shan", "she", "should", "shouldn", "so", "some", "such", "t", "than", "that",
    "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they",
    "this", "those", "through", "to", "too", "under", "until", "up", "ve", "very", "was",
    "wasn", "we", "were", "weren", "what", "when", "where", "which", "while", "who",
    "whom", "why", "will", "with", "won", "wouldn", "y", "you", "your", "yours",
    "yourself", "yourselves",
};

const std::unordered_set<std::string>& stopword_set() {
    static const std::unordered_set<std::string> set(std::begin(kStopwords),
                                                     std::end(kStopwords));
    return set;
}

}  // namespace

bool is_stopword(const std::string& token) { return stopword_set().count(token) > 0; }

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        const bool token_char = std::isalnum(c) != 0 || c >= 0x80;
        if (token_char) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::vector<std::string> text_ngrams(const std::string& text, const VocabConfig& cfg) {
    std::vector<std::string> tokens = tokenize(text);
    if (cfg.use_stopwords) {
        std::erase_if(tokens, [](const std::string& t) { return is_stopword(t); });
    }
    std::vector<std::string> grams;
    grams.reserve(tokens.size() * static_cast<std::size_t>(cfg.ngram_max));
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        std::string g = tokens[i];
        grams.push_back(g);
        for (int n = 2; n <= cfg.ngram_max; ++n) {
            if (i + static_cast<std::size_t>(n) > tokens.size()) break;
            g += ' ';
            g += tokens[i + static_cast<std::size_t>(n) - 1];
            grams.push_back(g);
        }
    }
    return grams;
}

Vocabulary build_vocabulary(const Corpus& corpus, const VocabConfig& cfg) {
    if (corpus.examples.empty()) throw ValidationError("build_vocabulary: empty corpus");
    std::map<std::string, int64_t> token_freq;
    std::map<std::string, int64_t> doc_freq;
    std::size_t n_docs = 0;
    for (const Example& ex : corpus.examples) {
        if (ex.split != Split::Labeled && ex.split != Split::Unlabeled) continue;
        ++n_docs;
        std::set<std::string> seen;
        for (std::string& g : text_ngrams(ex.text, cfg)) {
            token_freq[g] += 1;
            seen.insert(std::move(g));
        }
        for (const std::string& g : seen) doc_freq[g] += 1;
    }
    const double doc_cut = cfg.max_doc_freq * static_cast<double>(n_docs);
    struct Entry {
        std::string gram;
        int64_t tf;
        int64_t df;
    };
    std::vector<Entry> survivors;
    for (auto& [gram, tf] : token_freq) {
        const int64_t df = doc_freq[gram];
        if (tf < cfg.min_token_freq) continue;
        if (static_cast<double>(df) > doc_cut) continue;
        survivors.push_back({gram, tf, df});
    }
    if (survivors.empty()) {
        throw ValidationError("build_vocabulary: no ngram survived the frequency cuts");
    }
    std::sort(survivors.begin(), survivors.end(), [](const Entry& a, const Entry& b) {
        if (a.tf != b.tf) return a.tf > b.tf;
        return a.gram < b.gram;
    });
    if (survivors.size() > cfg.max_size) survivors.resize(cfg.max_size);

    Vocabulary vocab;
    vocab.entries.reserve(survivors.size());
    for (std::size_t i = 0; i < survivors.size(); ++i) {
        vocab.entries.push_back(survivors[i].gram);
        vocab.token_freq.push_back(survivors[i].tf);
        vocab.doc_freq.push_back(survivors[i].df);
        vocab.index[survivors[i].gram] = i;
    }
    return vocab;
}

uint64_t Vocabulary::hash() const {
    uint64_t h = 1469598103934665603ull;
    for (const std::string& e : entries) {
        for (unsigned char c : e) h = (h ^ c) * 1099511628211ull;
        h = (h ^ 0x1f) * 1099511628211ull;
    }
    return h;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    json j;
    j["version"] = 1;
    j["entries"] = entries;
    j["token_freq"] = token_freq;
    j["doc_freq"] = doc_freq;
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write vocabulary: " + path.string());
    out << j.dump(2) << "\n";
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open vocabulary: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("vocabulary " + path.string() + ": " + e.what());
    }
    Vocabulary vocab;
    vocab.entries = j.at("entries").get<std::vector<std::string>>();
    vocab.token_freq = j.at("token_freq").get<std::vector<int64_t>>();
    vocab.doc_freq = j.at("doc_freq").get<std::vector<int64_t>>();
    if (vocab.token_freq.size() != vocab.entries.size() ||
        vocab.doc_freq.size() != vocab.entries.size()) {
        throw ValidationError("vocabulary: entry/frequency length mismatch");
    }
    for (std::size_t i = 0; i < vocab.entries.size(); ++i) vocab.index[vocab.entries[i]] = i;
    return vocab;
}

const char* feature_space_name(FeatureSpace s) {
    switch (s) {
        case FeatureSpace::Ngram: return "ngram";
        case FeatureSpace::PcaAdjusted: return "pca";
        case FeatureSpace::Embedding: return "embedding";
    }
    return "?";
}

FeatureSpace feature_space_from_name(const std::string& name) {
    if (name == "ngram") return FeatureSpace::Ngram;
    if (name == "pca") return FeatureSpace::PcaAdjusted;
    if (name == "embedding") return FeatureSpace::Embedding;
    throw ValidationError("unknown feature space '" + name + "'");
}

std::vector<double> featurize_ngram(const std::string& text, const Vocabulary& vocab,
                                    const VocabConfig& cfg) {
    if (vocab.size() == 0) throw ValidationError("featurize_ngram: empty vocabulary");
    std::vector<double> values(vocab.size(), 0.0);
    for (const std::string& g : text_ngrams(text, cfg)) {
        auto it = vocab.index.find(g);
        if (it != vocab.index.end()) values[it->second] = 1.0;
    }
    return values;
}

FeatureMatrix featurize_corpus(const Corpus& corpus, const Vocabulary& vocab,
                               const VocabConfig& cfg) {
    FeatureMatrix feats;
    feats.space = FeatureSpace::Ngram;
    feats.dim = vocab.size();
    feats.vocab_hash = vocab.hash();
    feats.ids.reserve(corpus.examples.size());
    feats.data.reserve(corpus.examples.size() * feats.dim);
    for (const Example& ex : corpus.examples) {
        feats.ids.push_back(ex.id);
        std::vector<double> row = featurize_ngram(ex.text, vocab, cfg);
        feats.data.insert(feats.data.end(), row.begin(), row.end());
    }
    return feats;
}

FeatureMatrix embedding_matrix(const Corpus& corpus, const EmbeddingStore& store) {
    if (store.empty()) throw ValidationError("embedding_matrix: empty store");
    FeatureMatrix feats;
    feats.space = FeatureSpace::Embedding;
    feats.dim = store.dim;
    feats.ids.reserve(corpus.examples.size());
    feats.data.reserve(corpus.examples.size() * store.dim);
    for (const Example& ex : corpus.examples) {
        const std::vector<double>* vec = store.find(ex.id);
        if (vec == nullptr) {
            throw ValidationError("embedding_matrix: missing id '" + ex.id + "'");
        }
        feats.ids.push_back(ex.id);
        feats.data.insert(feats.data.end(), vec->begin(), vec->end());
    }
    return feats;
}

PrincipalComponent compute_first_pc(const FeatureMatrix& feats,
                                    const std::vector<std::size_t>& row_indices,
                                    const PcaConfig& cfg) {
    const std::size_t m = row_indices.size();
    const std::size_t dim = feats.dim;
    if (m < 2) throw ValidationError("compute_first_pc: need at least 2 rows");
    if (cfg.tol <= 0.0) throw ValidationError("compute_first_pc: tol must be > 0");

    std::vector<double> mean(dim, 0.0);
    if (cfg.mean_subtract) {
        for (std::size_t r : row_indices) kernels::axpy(1.0, feats.row(r), mean.data(), dim);
        kernels::scale(mean.data(), dim, 1.0 / static_cast<double>(m));
    }

    Rng rng = Rng::stream(cfg.seed, 0x9C);
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    double nv = kernels::norm2(v.data(), dim);
    if (nv == 0.0) { v[0] = 1.0; nv = 1.0; }
    kernels::scale(v.data(), dim, 1.0 / nv);

    std::vector<double> t(m);
    std::vector<double> w(dim);
    bool converged = false;
    int iter = 0;
    for (; iter < cfg.max_iter; ++iter) {
        // t = (P - 1 mu^T) v ; w = (P - 1 mu^T)^T t, without materializing.
        const double mu_dot_v = cfg.mean_subtract ? kernels::dot(mean.data(), v.data(), dim) : 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            t[i] = kernels::dot(feats.row(row_indices[i]), v.data(), dim) - mu_dot_v;
        }
        std::fill(w.begin(), w.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            kernels::axpy(t[i], feats.row(row_indices[i]), w.data(), dim);
        }
        if (cfg.mean_subtract) {
            kernels::axpy(-kernels::sum(t.data(), m), mean.data(), w.data(), dim);
        }
        const double lambda = kernels::dot(v.data(), w.data(), dim);  // Rayleigh quotient
        const double wn = kernels::norm2(w.data(), dim);
        if (wn == 0.0) {
            throw std::runtime_error("compute_first_pc: iterate annihilated at iteration " +
                                     std::to_string(iter + 1));
        }
        // Residual check ||A v - lambda v|| <= tol * |lambda| bounds the
        // eigenvector error, not just the eigenvalue drift.
        double res = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double r = w[j] - lambda * v[j];
            res += r * r;
        }
        for (std::size_t j = 0; j < dim; ++j) v[j] = w[j] / wn;
        if (std::sqrt(res) <= cfg.tol * std::abs(lambda)) {
            converged = true;
            ++iter;
            break;
        }
    }
    if (!converged) {
        throw std::runtime_error("compute_first_pc: no convergence after " +
                                 std::to_string(cfg.max_iter) + " iterations");
    }

    // Sign canonicalization: largest-magnitude entry positive.
    std::size_t arg = 0;
    for (std::size_t j = 1; j < dim; ++j) {
        if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
    }
    if (v[arg] < 0.0) kernels::scale(v.data(), dim, -1.0);

    PrincipalComponent pc;
    pc.v = std::move(v);
    pc.mean_subtracted = cfg.mean_subtract;
    pc.iterations = iter;
    return pc;
}

std::vector<double> pca_adjust(std::span<const double> phi, const PrincipalComponent& pc) {
    if (phi.size() != pc.v.size()) throw ValidationError("pca_adjust: length mismatch");
    std::vector<double> out(phi.begin(), phi.end());
    const double nrm = kernels::norm2(phi.data(), phi.size());
    if (nrm == 0.0) return out;
    const double coeff = kernels::dot(pc.v.data(), phi.data(), phi.size()) / nrm;
    kernels::axpy(-coeff, pc.v.data(), out.data(), out.size());
    return out;
}

FeatureMatrix pca_adjust_matrix(const FeatureMatrix& feats, const PrincipalComponent& pc) {
    FeatureMatrix out;
    out.space = FeatureSpace::PcaAdjusted;
    out.dim = feats.dim;
    out.ids = feats.ids;
    out.vocab_hash = feats.vocab_hash;
    out.data.resize(feats.data.size());
    for (std::size_t i = 0; i < feats.rows(); ++i) {
        std::vector<double> row = pca_adjust(feats.row_span(i), pc);
        std::copy(row.begin(), row.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * out.dim));
    }
    return out;
}

}  // namespace ari
