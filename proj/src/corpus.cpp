#include "ari/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ari/kernels.hpp"
#include "ari/log.hpp"
#include "ari/rng.hpp"

namespace ari {

using nlohmann::json;

std::vector<std::size_t> Corpus::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (examples[i].split == s) out.push_back(i);
    }
    return out;
}

void Corpus::validate() const {
    if (num_classes < 2) throw ValidationError("corpus: num_classes must be >= 2");
    if (label_names.size() != static_cast<std::size_t>(num_classes)) {
        throw ValidationError("corpus: label_names size does not match num_classes");
    }
    std::set<std::string> seen;
    std::vector<int> per_class(static_cast<std::size_t>(num_classes), 0);
    for (const Example& ex : examples) {
        if (!seen.insert(ex.id).second) {
            throw ValidationError("corpus: duplicate id '" + ex.id + "'");
        }
        if (ex.split == Split::Unlabeled) {
            if (ex.label.has_value()) {
                throw ValidationError("corpus: unlabeled example '" + ex.id + "' carries a label");
            }
            continue;
        }
        if (!ex.label.has_value()) {
            throw ValidationError("corpus: example '" + ex.id + "' in split " +
                                  split_name(ex.split) + " has no label");
        }
        Label y = *ex.label;
        if (y < 0 || y >= num_classes) {
            throw ValidationError("corpus: example '" + ex.id + "' has label " +
                                  std::to_string(y) + " >= K=" + std::to_string(num_classes));
        }
        if (ex.split == Split::Labeled) per_class[static_cast<std::size_t>(y)]++;
    }
    for (int k = 0; k < num_classes; ++k) {
        if (per_class[static_cast<std::size_t>(k)] == 0) {
            throw ValidationError("corpus: class " + std::to_string(k) +
                                  " has no labeled example");
        }
    }
}

namespace {

std::vector<std::string> default_label_names(int k) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) names.push_back("CLASS_" + std::to_string(i));
    return names;
}

void read_split_file(const std::filesystem::path& path, Split split, Corpus& corpus) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open split file: " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json row;
        try {
            row = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        Example ex;
        ex.split = split;
        if (!row.contains("id") || !row["id"].is_string()) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": missing id");
        }
        ex.id = row["id"].get<std::string>();
        if (!row.contains("text") || !row["text"].is_string()) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": missing text for id '" + ex.id + "'");
        }
        ex.text = row["text"].get<std::string>();
        if (row.contains("label") && !row["label"].is_null()) {
            if (split == Split::Unlabeled) {
                log::info("stripping label from unlabeled example '", ex.id, "'");
            } else {
                ex.label = row["label"].get<Label>();
            }
        }
        corpus.examples.push_back(std::move(ex));
    }
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ValidationError("cannot open manifest: " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("manifest " + manifest_path.string() + ": " + e.what());
    }
    if (!manifest.contains("splits") || !manifest["splits"].is_object()) {
        throw ValidationError("manifest: missing 'splits' object");
    }
    const auto base = manifest_path.parent_path();
    Corpus corpus;
    const std::pair<const char*, Split> split_keys[] = {
        {"labeled", Split::Labeled},
        {"unlabeled", Split::Unlabeled},
        {"valid", Split::Valid},
        {"test", Split::Test},
    };
    for (const auto& [key, split] : split_keys) {
        if (!manifest["splits"].contains(key)) continue;
        read_split_file(base / manifest["splits"][key].get<std::string>(), split, corpus);
    }

    int max_label = -1;
    for (const Example& ex : corpus.examples) {
        if (ex.label.has_value()) max_label = std::max(max_label, *ex.label);
    }
    if (manifest.contains("num_classes")) {
        corpus.num_classes = manifest["num_classes"].get<int>();
    } else {
        corpus.num_classes = max_label + 1;
    }
    if (manifest.contains("label_names")) {
        corpus.label_names = manifest["label_names"].get<std::vector<std::string>>();
    } else {
        corpus.label_names = default_label_names(corpus.num_classes);
    }
    if (manifest.contains("embeddings")) {
        corpus.embeddings_path = base / manifest["embeddings"].get<std::string>();
    }
    corpus.validate();
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::pair<const char*, Split> split_keys[] = {
        {"labeled", Split::Labeled},
        {"unlabeled", Split::Unlabeled},
        {"valid", Split::Valid},
        {"test", Split::Test},
    };
    json manifest;
    manifest["num_classes"] = corpus.num_classes;
    manifest["label_names"] = corpus.label_names;
    if (corpus.embeddings_path.has_value()) {
        manifest["embeddings"] =
            std::filesystem::relative(*corpus.embeddings_path, dir).string();
    }
    for (const auto& [key, split] : split_keys) {
        const std::string filename = std::string(key) + ".jsonl";
        std::ofstream out(dir / filename);
        if (!out) throw ValidationError("cannot write " + (dir / filename).string());
        for (const Example& ex : corpus.examples) {
            if (ex.split != split) continue;
            json row;
            row["id"] = ex.id;
            row["text"] = ex.text;
            row["label"] = ex.label.has_value() ? json(*ex.label) : json(nullptr);
            out << row.dump() << "\n";
        }
        manifest["splits"][key] = filename;
    }
    std::ofstream mf(dir / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

const std::vector<double>* EmbeddingStore::find(const std::string& id) const {
    auto it = vectors.find(id);
    return it == vectors.end() ? nullptr : &it->second;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path, const Corpus& corpus) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open embeddings: " + path.string());
    EmbeddingStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json row;
        try {
            row = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        const std::string id = row.at("id").get<std::string>();
        std::vector<double> vec = row.at("vec").get<std::vector<double>>();
        if (vec.empty()) throw ValidationError("embeddings: empty vector for id '" + id + "'");
        for (double v : vec) {
            if (!std::isfinite(v)) {
                throw ValidationError("embeddings: non-finite entry for id '" + id + "'");
            }
        }
        if (store.dim == 0) {
            store.dim = vec.size();
        } else if (vec.size() != store.dim) {
            throw ValidationError("embeddings: ragged vector length for id '" + id + "' (" +
                                  std::to_string(vec.size()) + " vs " +
                                  std::to_string(store.dim) + ")");
        }
        store.vectors[id] = std::move(vec);
    }
    for (const Example& ex : corpus.examples) {
        if (store.vectors.find(ex.id) == store.vectors.end()) {
            throw ValidationError("embeddings: missing id '" + ex.id + "'");
        }
    }
    return store;
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write embeddings: " + path.string());
    for (const auto& [id, vec] : store.vectors) {
        json row;
        row["id"] = id;
        row["vec"] = vec;
        out << row.dump() << "\n";
    }
}

namespace {

// Filler pool for synthetic texts. Disjoint from the signal pool below.
const char* const kFillerWords[] = {
    "about", "after", "again", "along", "also", "always", "another", "around", "away",
    "back", "because", "been", "before", "being", "below", "between", "both", "came",
    "come", "could", "day", "did", "different", "does", "down", "each", "end", "even",
    "every", "few", "find", "first", "found", "from", "get", "give", "going", "good",
    "got", "great", "had", "hand", "has", "have", "help", "here", "high", "home",
    "house", "how", "into", "just", "keep", "kind", "know", "large", "last", "left",
    "life", "light", "like", "line", "little", "long", "look", "made", "make", "man",
    "many", "may", "mean", "men", "might", "more", "most", "move", "much", "must",
    "name", "near", "need", "never", "new", "next", "night", "now", "number", "off",
    "often", "old", "only", "open", "other", "our", "out", "over", "own", "part",
    "people", "place", "point", "put", "read", "right", "said", "same", "saw", "say",
    "see", "seem", "set", "should", "show", "side", "small", "some", "something",
    "sound", "still", "such", "take", "tell", "than", "them", "then", "there",
    "these", "they", "thing", "think", "this", "those", "thought", "three", "through",
    "time", "together", "too", "turn", "two", "under", "until", "upon", "use", "very",
    "want", "water", "way", "well", "went", "were", "what", "when", "where", "which",
    "while", "who", "why", "will", "with", "word", "work", "world", "would", "write",
    "year", "your",
};
constexpr std::size_t kNumFiller = sizeof(kFillerWords) / sizeof(kFillerWords[0]);

const char* const kSignalWords[] = {
    "anchor", "basil", "cobalt", "dune", "ember", "falcon", "glacier", "harbor",
    "indigo", "juniper", "kestrel", "lagoon", "marble", "nectar", "onyx", "prairie",
    "quartz", "raven", "saffron", "tundra", "umber", "velvet", "walnut", "xenon",
    "yarrow", "zephyr", "alloy", "breeze", "cinder", "delta", "echo", "fjord",
    "grove", "haze", "isle", "jade", "krill", "lunar", "mesa", "nimbus",
};
constexpr std::size_t kNumSignal = sizeof(kSignalWords) / sizeof(kSignalWords[0]);
constexpr int kKeywordsPerClass = 4;

std::string signal_word(int cls, int j) {
    const std::size_t idx = static_cast<std::size_t>(cls) * kKeywordsPerClass +
                            static_cast<std::size_t>(j);
    if (idx < kNumSignal) return kSignalWords[idx];
    return "signal" + std::to_string(cls) + "x" + std::to_string(j);
}

std::string synth_text(Rng& rng, int cls, int num_classes, double strength) {
    const double leak = 0.1 * (1.0 - strength);
    std::vector<std::string> tokens;
    const std::size_t filler_len = 16 + rng.below(12);
    for (std::size_t t = 0; t < filler_len; ++t) {
        tokens.push_back(kFillerWords[rng.below(kNumFiller)]);
    }
    // Each document leans on one "subtype" keyword of its class at full
    // strength; the class's other keywords appear at a quarter of it. Other
    // classes leak in rarely.
    const int subtype = static_cast<int>(rng.below(kKeywordsPerClass));
    for (int k = 0; k < num_classes; ++k) {
        for (int j = 0; j < kKeywordsPerClass; ++j) {
            double p = leak;
            if (k == cls) p = (j == subtype) ? strength : 0.25 * strength;
            if (rng.uniform01() < p) tokens.push_back(signal_word(k, j));
        }
    }
    rng.shuffle(tokens);
    std::string text;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (t > 0) text += ' ';
        text += tokens[t];
    }
    return text;
}

std::string padded(int n) {
    std::ostringstream os;
    os.width(5);
    os.fill('0');
    os << n;
    return os.str();
}

}  // namespace

std::vector<std::string> synth_class_keywords(int cls) {
    std::vector<std::string> words;
    for (int j = 0; j < kKeywordsPerClass; ++j) words.push_back(signal_word(cls, j));
    return words;
}

Corpus gen_synthetic_corpus(const SynthConfig& cfg) {
    if (cfg.num_classes < 2) throw ValidationError("synthetic: num_classes must be >= 2");
    if (cfg.n_labeled < cfg.num_classes) {
        throw ValidationError("synthetic: need at least one labeled example per class");
    }
    if (cfg.keyword_strength <= 0.0 || cfg.keyword_strength > 1.0) {
        throw ValidationError("synthetic: keyword_strength must be in (0,1]");
    }
    Rng rng = Rng::stream(cfg.seed, 0x51);
    Corpus corpus;
    corpus.num_classes = cfg.num_classes;
    corpus.label_names = default_label_names(cfg.num_classes);

    auto emit = [&](const char* prefix, Split split, int count, bool keep_label) {
        for (int i = 0; i < count; ++i) {
            const int cls = split == Split::Unlabeled
                                ? static_cast<int>(rng.below(static_cast<uint64_t>(cfg.num_classes)))
                                : i % cfg.num_classes;
            Example ex;
            ex.id = std::string(prefix) + "-" + padded(i);
            ex.text = synth_text(rng, cls, cfg.num_classes, cfg.keyword_strength);
            if (keep_label) ex.label = cls;
            ex.split = split;
            corpus.examples.push_back(std::move(ex));
        }
    };
    emit("lab", Split::Labeled, cfg.n_labeled, true);
    emit("unl", Split::Unlabeled, cfg.n_unlabeled, false);
    emit("val", Split::Valid, cfg.n_valid, true);
    emit("tst", Split::Test, cfg.n_test, true);
    corpus.validate();
    return corpus;
}

namespace {

bool is_signal_token(const std::string& tok) {
    for (const char* w : kSignalWords) {
        if (tok == w) return true;
    }
    return tok.rfind("signal", 0) == 0 && tok.find('x') != std::string::npos;
}

}  // namespace

EmbeddingStore synth_embeddings(const Corpus& corpus, std::size_t dim, uint64_t seed) {
    EmbeddingStore store;
    store.dim = dim;
    std::map<std::string, std::vector<double>> token_vecs;
    auto token_vec = [&](const std::string& tok) -> const std::vector<double>& {
        auto it = token_vecs.find(tok);
        if (it != token_vecs.end()) return it->second;
        uint64_t h = 1469598103934665603ull;
        for (unsigned char c : tok) h = (h ^ c) * 1099511628211ull;
        Rng trng = Rng::stream(seed, h);
        std::vector<double> v(dim);
        for (double& x : v) x = trng.normal();
        return token_vecs.emplace(tok, std::move(v)).first->second;
    };
    // Topical (signal) tokens dominate the sum, the way a sentence encoder
    // would cluster same-topic texts; filler contributes mild noise.
    for (const Example& ex : corpus.examples) {
        std::vector<double> acc(dim, 0.0);
        std::istringstream ss(ex.text);
        std::string tok;
        while (ss >> tok) {
            const std::vector<double>& tv = token_vec(tok);
            kernels::axpy(is_signal_token(tok) ? 6.0 : 1.0, tv.data(), acc.data(), dim);
        }
        const double n = kernels::norm2(acc.data(), dim);
        if (n > 0.0) kernels::scale(acc.data(), dim, 1.0 / n);
        store.vectors[ex.id] = std::move(acc);
    }
    return store;
}

}  // namespace ari
