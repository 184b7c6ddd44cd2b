// ari: rule induction + rule-augmented self-training pipeline.
//
// Stages communicate through on-disk artifacts so each can run (and be
// tested) on its own, and so rule sets can be replayed against another
// corpus:
//   synth        -> corpus dir (manifest.json + *.jsonl [+ embeddings.jsonl])
//   featurize    -> vocab.json, features_ngram.bin [, features_pca.bin, pc.json]
//   induce       -> rules.json
//   filter       -> firings_<split>.bin, filter_report.json
//   train        -> run dir (checkpoints + history.json [+ sweep.json])
//   eval         -> report.json
//   explain      -> attributions.jsonl
//   export-rules -> human-readable listing
//
// Every flag has a config-file equivalent (--config <json>, sections keyed by
// subcommand); a flag given on the command line beats the file, which beats
// the default. Exit codes: 0 ok, 1 bad input, 2 runtime failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ari/aggregator.hpp"
#include "ari/artifacts.hpp"
#include "ari/backbone.hpp"
#include "ari/corpus.hpp"
#include "ari/featurize.hpp"
#include "ari/filters.hpp"
#include "ari/log.hpp"
#include "ari/metrics.hpp"
#include "ari/rules.hpp"
#include "ari/train.hpp"
#include "ari/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SynthArgs {
    std::string out;
    uint64_t seed = 7;
    int classes = 2;
    int labeled = 100;
    int unlabeled = 2000;
    int valid = 100;
    int test = 250;
    double keyword_strength = 0.8;
    int embedding_dim = 16;
};

struct FeaturizeArgs {
    std::string data;
    std::string out;
    std::size_t max_size = 1600;
    int min_freq = 4;
    double max_doc_freq = 0.95;
    int ngram_max = 2;
    bool no_stopwords = false;
    bool no_pca = false;
    bool mean_subtract = false;
    double pca_tol = 1e-8;
    int pca_max_iter = 1000;
    uint64_t seed = 1;
};

struct InduceArgs {
    std::string data;
    std::string artifacts;
    std::string method = "pca+tree";
    int num_rules = 16;
    double tau = 0.8;
    int depth = 3;
    double l2 = 0.01;
    double lr = 0.5;
    int epochs = 200;
    uint64_t seed = 1;
    std::string out;   // default <artifacts>/rules.json
    std::string dump;  // optional human-readable listing ("-" = stdout)
};

struct FilterArgs {
    std::string data;
    std::string artifacts;
    std::string rules;
    std::string filters = "none";  // none|train|semantic|both
    double mask_prob = 0.5;
    double threshold = 0.8;
    bool exact_count = false;
    uint64_t seed = 1;
};

struct TrainArgs {
    std::string data;
    std::string artifacts;
    std::string out;  // default <artifacts>/run
    std::string repr = "ngram";
    std::string backbone = "linear";
    int hidden = 128;
    int embed_dim = 100;
    double u_total = 0.1;
    std::string distill = "soft";
    double threshold = 0.7;
    int iterations = 25;
    double ratio = 0.7;
    int batch_size = 32;
    int max_steps = 12500;
    int patience = 5;
    int pretrain_steps = 100;
    int unsup_steps = 32;
    double student_lr = 0.05;
    double teacher_lr = 0.05;
    double momentum = 0.0;
    std::string inference_head = "student";
    std::string baseline = "none";  // none|selftrain|supervised
    std::string sweep;              // comma-separated distill modes
    uint64_t seed = 1;
};

struct EvalArgs {
    std::string data;
    std::string artifacts;
    std::string run;
    std::string head;  // empty = the head the run was trained for
    std::string split = "test";
    std::string out;  // default <run>/report.json
};

struct ExplainArgs {
    std::string data;
    std::string artifacts;
    std::string run;
    std::string split = "test";
    std::string out;  // default <run>/attributions.jsonl
};

struct ExportArgs {
    std::string artifacts;
    std::string rules;
    std::string out = "-";  // human dump destination, "-" = stdout
    std::string data;       // optional, for label names
};

// ---------------------------------------------------------------------------
// config file: JSON sections per subcommand, applied as if the flags had been
// given before the real command line (TakeLast makes the command line win).

std::vector<std::string> apply_config_file(CLI::App& app, const std::vector<std::string>& argv) {
    std::string config_path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < argv.size(); ++i) {
        if (argv[i] == "--config") {
            if (i + 1 >= argv.size()) throw ari::ValidationError("--config needs a path");
            config_path = argv[++i];
        } else if (argv[i].rfind("--config=", 0) == 0) {
            config_path = argv[i].substr(9);
        } else {
            rest.push_back(argv[i]);
        }
    }
    if (config_path.empty()) return rest;
    if (rest.empty()) throw ari::ValidationError("--config requires a subcommand");

    const json cfg = ari::read_json_file(config_path);
    if (!cfg.is_object()) throw ari::ValidationError("config file must be a JSON object");
    for (const auto& [section, values] : cfg.items()) {
        if (app.get_subcommand_no_throw(section) == nullptr) {
            throw ari::ValidationError("config: unknown section '" + section + "'");
        }
        if (!values.is_object()) {
            throw ari::ValidationError("config: section '" + section + "' must be an object");
        }
    }
    const std::string& sub = rest[0];
    if (!cfg.contains(sub)) return rest;

    CLI::App* sub_app = app.get_subcommand_no_throw(sub);
    std::vector<std::string> injected;
    injected.push_back(sub);
    for (const auto& [key, value] : cfg[sub].items()) {
        const std::string flag = "--" + key;
        if (sub_app->get_option_no_throw(flag) == nullptr) {
            throw ari::ValidationError("config: unknown key '" + key + "' in section '" + sub +
                                       "'");
        }
        std::string rendered;
        if (value.is_string()) {
            rendered = value.get<std::string>();
        } else if (value.is_boolean()) {
            rendered = value.get<bool>() ? "true" : "false";
        } else {
            rendered = value.dump();
        }
        injected.push_back(flag + "=" + rendered);
    }
    injected.insert(injected.end(), rest.begin() + 1, rest.end());
    return injected;
}

// ---------------------------------------------------------------------------
// shared loading helpers

ari::FeatureMatrix load_repr(const fs::path& artifacts, const std::string& repr,
                             const ari::Corpus& corpus) {
    if (repr == "ngram") return ari::load_features(artifacts / "features_ngram.bin");
    if (repr == "pca") return ari::load_features(artifacts / "features_pca.bin");
    if (repr == "embedding") {
        if (!corpus.embeddings_path.has_value()) {
            throw ari::ValidationError("repr=embedding but the manifest names no embeddings");
        }
        return ari::embedding_matrix(corpus, ari::load_embeddings(*corpus.embeddings_path, corpus));
    }
    throw ari::ValidationError("unknown representation '" + repr + "'");
}

std::vector<ari::Label> labels_by_row(const ari::Corpus& corpus) {
    std::vector<ari::Label> labels(corpus.examples.size(), ari::kAbstain);
    for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
        if (corpus.examples[i].label.has_value()) labels[i] = *corpus.examples[i].label;
    }
    return labels;
}

struct LoadedRun {
    ari::Corpus corpus;
    ari::FeatureMatrix repr;
    ari::LoadedFirings firings_labeled, firings_unlabeled, firings_valid, firings_test;
    ari::TrainData data;

    void wire() {
        data.repr = &repr;
        data.labeled = corpus.indices(ari::Split::Labeled);
        data.unlabeled = corpus.indices(ari::Split::Unlabeled);
        data.valid = corpus.indices(ari::Split::Valid);
        data.test = corpus.indices(ari::Split::Test);
        data.labels = labels_by_row(corpus);
        data.labeled_firings = &firings_labeled.table;
        data.unlabeled_firings = &firings_unlabeled.table;
        data.valid_firings = &firings_valid.table;
        data.test_firings = &firings_test.table;
        data.rule_ids = firings_labeled.rule_ids;
    }
};

void check_alignment(const ari::FiringTable& table, const ari::Corpus& corpus,
                     const std::vector<std::size_t>& rows, const char* split) {
    if (table.rows() != rows.size()) {
        throw ari::ValidationError(std::string("firing table for ") + split +
                                   " does not match the corpus split size");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (table.example_ids[i] != corpus.examples[rows[i]].id) {
            throw ari::ValidationError(std::string("firing table for ") + split +
                                       " is misaligned at row " + std::to_string(i));
        }
    }
}

LoadedRun load_pipeline_inputs(const fs::path& manifest, const fs::path& artifacts,
                               const std::string& repr) {
    LoadedRun run;
    run.corpus = ari::load_corpus(manifest);
    run.repr = load_repr(artifacts, repr, run.corpus);
    run.firings_labeled = ari::load_firings(artifacts / "firings_labeled.bin");
    run.firings_unlabeled = ari::load_firings(artifacts / "firings_unlabeled.bin");
    run.firings_valid = ari::load_firings(artifacts / "firings_valid.bin");
    run.firings_test = ari::load_firings(artifacts / "firings_test.bin");
    run.wire();
    check_alignment(run.firings_labeled.table, run.corpus, run.data.labeled, "labeled");
    check_alignment(run.firings_unlabeled.table, run.corpus, run.data.unlabeled, "unlabeled");
    check_alignment(run.firings_valid.table, run.corpus, run.data.valid, "valid");
    check_alignment(run.firings_test.table, run.corpus, run.data.test, "test");
    return run;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_synth(const SynthArgs& args) {
    ari::SynthConfig cfg;
    cfg.seed = args.seed;
    cfg.num_classes = args.classes;
    cfg.n_labeled = args.labeled;
    cfg.n_unlabeled = args.unlabeled;
    cfg.n_valid = args.valid;
    cfg.n_test = args.test;
    cfg.keyword_strength = args.keyword_strength;
    ari::Corpus corpus = ari::gen_synthetic_corpus(cfg);
    const fs::path out(args.out);
    fs::create_directories(out);
    if (args.embedding_dim > 0) {
        ari::EmbeddingStore store =
            ari::synth_embeddings(corpus, static_cast<std::size_t>(args.embedding_dim), args.seed);
        ari::save_embeddings(store, out / "embeddings.jsonl");
        corpus.embeddings_path = out / "embeddings.jsonl";
    }
    ari::save_corpus(corpus, out);
    ari::log::info("wrote corpus (", corpus.examples.size(), " examples, K=", corpus.num_classes,
                   ") to ", out.string());
    return 0;
}

int cmd_featurize(const FeaturizeArgs& args) {
    ari::Corpus corpus = ari::load_corpus(args.data);
    ari::VocabConfig vcfg;
    vcfg.max_size = args.max_size;
    vcfg.min_token_freq = args.min_freq;
    vcfg.max_doc_freq = args.max_doc_freq;
    vcfg.ngram_max = args.ngram_max;
    vcfg.use_stopwords = !args.no_stopwords;
    ari::Vocabulary vocab = ari::build_vocabulary(corpus, vcfg);
    const fs::path out(args.out);
    fs::create_directories(out);
    vocab.save(out / "vocab.json");
    ari::FeatureMatrix ngram = ari::featurize_corpus(corpus, vocab, vcfg);
    ari::save_features(out / "features_ngram.bin", ngram);
    ari::log::info("vocabulary: ", vocab.size(), " entries; features: ", ngram.rows(), " x ",
                   ngram.dim);
    if (!args.no_pca) {
        std::vector<std::size_t> train_rows = corpus.indices(ari::Split::Labeled);
        for (std::size_t r : corpus.indices(ari::Split::Unlabeled)) train_rows.push_back(r);
        ari::PcaConfig pcfg;
        pcfg.mean_subtract = args.mean_subtract;
        pcfg.tol = args.pca_tol;
        pcfg.max_iter = args.pca_max_iter;
        pcfg.seed = args.seed;
        ari::PrincipalComponent pc = ari::compute_first_pc(ngram, train_rows, pcfg);
        ari::save_features(out / "features_pca.bin", ari::pca_adjust_matrix(ngram, pc));
        json jpc;
        jpc["v"] = pc.v;
        jpc["mean_subtracted"] = pc.mean_subtracted;
        jpc["iterations"] = pc.iterations;
        ari::write_json_file(out / "pc.json", jpc);
        ari::log::info("first principal component converged in ", pc.iterations, " iterations");
    }
    // the vocabulary settings ride along so later stages tokenize identically
    json meta;
    meta["max_size"] = vcfg.max_size;
    meta["min_token_freq"] = vcfg.min_token_freq;
    meta["max_doc_freq"] = vcfg.max_doc_freq;
    meta["ngram_max"] = vcfg.ngram_max;
    meta["use_stopwords"] = vcfg.use_stopwords;
    ari::write_json_file(out / "featurize_meta.json", meta);
    return 0;
}

int cmd_induce(const InduceArgs& args) {
    ari::Corpus corpus = ari::load_corpus(args.data);
    const fs::path artifacts(args.artifacts);
    ari::Vocabulary vocab = ari::Vocabulary::load(artifacts / "vocab.json");

    std::string space_name;
    std::string model_kind;
    if (args.method == "ngram+linear") {
        space_name = "ngram";
        model_kind = "linear";
    } else if (args.method == "ngram+tree") {
        space_name = "ngram";
        model_kind = "tree";
    } else if (args.method == "pca+tree") {
        space_name = "pca";
        model_kind = "tree";
    } else {
        throw ari::ValidationError("unknown method '" + args.method +
                                   "' (ngram+linear, ngram+tree, pca+tree)");
    }
    ari::FeatureMatrix feats = load_repr(artifacts, space_name, corpus);
    const std::vector<std::size_t> lab_rows = corpus.indices(ari::Split::Labeled);
    std::vector<ari::Label> lab_y;
    for (std::size_t r : lab_rows) lab_y.push_back(*corpus.examples[r].label);

    std::vector<ari::Rule> rules;
    if (model_kind == "linear") {
        ari::LinearTrainConfig lcfg;
        lcfg.l2_lambda = args.l2;
        lcfg.lr = args.lr;
        lcfg.epochs = args.epochs;
        lcfg.seed = args.seed;
        ari::LinearRuleModel model =
            ari::train_linear(feats, lab_rows, lab_y, corpus.num_classes, lcfg);
        rules = ari::extract_linear_rules(model, args.num_rules);
    } else {
        ari::ForestConfig fcfg;
        fcfg.num_trees = args.num_rules;
        fcfg.max_depth = args.depth;
        fcfg.seed = args.seed;
        std::vector<ari::Tree> forest =
            ari::train_forest(feats, lab_rows, lab_y, corpus.num_classes, fcfg);
        rules = ari::extract_tree_rules(forest, args.tau);
    }
    const fs::path out = args.out.empty() ? artifacts / "rules.json" : fs::path(args.out);
    const ari::FeatureSpace space = ari::feature_space_from_name(space_name);
    ari::save_rules(out, rules, vocab, space);
    ari::log::info("induced ", rules.size(), " ", model_kind, " rule(s) over ", space_name,
                   " features -> ", out.string());
    if (!args.dump.empty()) {
        const std::string listing = ari::dump_rules(rules, vocab, corpus.label_names, space);
        if (args.dump == "-") {
            std::cout << listing;
        } else {
            std::ofstream dump_file(args.dump);
            if (!dump_file) throw ari::ValidationError("cannot write dump: " + args.dump);
            dump_file << listing;
        }
    }
    return 0;
}

int cmd_filter(const FilterArgs& args) {
    ari::Corpus corpus = ari::load_corpus(args.data);
    const fs::path artifacts(args.artifacts);
    ari::Vocabulary vocab = ari::Vocabulary::load(artifacts / "vocab.json");
    const fs::path rules_path =
        args.rules.empty() ? artifacts / "rules.json" : fs::path(args.rules);
    ari::RuleImport imported = ari::load_rules(rules_path, vocab);
    if (imported.rules.empty()) {
        throw ari::ValidationError("no usable rules after import from " + rules_path.string());
    }
    ari::FeatureMatrix feats =
        load_repr(artifacts, ari::feature_space_name(imported.space), corpus);

    ari::FilterConfig fcfg;
    fcfg.train_error_mask_prob = args.mask_prob;
    fcfg.semantic_threshold = args.threshold;
    fcfg.exact_count = args.exact_count;
    fcfg.seed = args.seed;
    if (args.filters == "none") {
    } else if (args.filters == "train") {
        fcfg.train_accuracy_enabled = true;
    } else if (args.filters == "semantic") {
        fcfg.semantic_enabled = true;
    } else if (args.filters == "both") {
        fcfg.train_accuracy_enabled = true;
        fcfg.semantic_enabled = true;
    } else {
        throw ari::ValidationError("unknown --filters value '" + args.filters +
                                   "' (none, train, semantic, both)");
    }

    ari::SplitFiringTables tables;
    tables.labeled = ari::apply_rules(imported.rules, feats, corpus.indices(ari::Split::Labeled));
    tables.unlabeled =
        ari::apply_rules(imported.rules, feats, corpus.indices(ari::Split::Unlabeled));
    tables.valid = ari::apply_rules(imported.rules, feats, corpus.indices(ari::Split::Valid));
    tables.test = ari::apply_rules(imported.rules, feats, corpus.indices(ari::Split::Test));

    std::vector<ari::Label> labeled_gold;
    for (std::size_t r : corpus.indices(ari::Split::Labeled)) {
        labeled_gold.push_back(*corpus.examples[r].label);
    }

    std::optional<ari::SemanticGate> gate;
    if (fcfg.semantic_enabled) {
        if (!corpus.embeddings_path.has_value()) {
            throw ari::ValidationError(
                "semantic filter enabled but the manifest names no embeddings");
        }
        ari::EmbeddingStore store = ari::load_embeddings(*corpus.embeddings_path, corpus);
        std::vector<std::string> labeled_ids;
        for (std::size_t r : corpus.indices(ari::Split::Labeled)) {
            labeled_ids.push_back(corpus.examples[r].id);
        }
        gate.emplace(store, labeled_ids, labeled_gold, corpus.num_classes);
    }

    std::vector<std::string> rule_ids;
    for (const ari::Rule& r : imported.rules) rule_ids.push_back(r.id);
    ari::FilterOutcome outcome = ari::apply_filters(
        tables, labeled_gold, gate.has_value() ? &*gate : nullptr, rule_ids, fcfg);

    ari::save_firings(artifacts / "firings_labeled.bin", outcome.tables.labeled, rule_ids);
    ari::save_firings(artifacts / "firings_unlabeled.bin", outcome.tables.unlabeled, rule_ids);
    ari::save_firings(artifacts / "firings_valid.bin", outcome.tables.valid, rule_ids);
    ari::save_firings(artifacts / "firings_test.bin", outcome.tables.test, rule_ids);
    ari::write_json_file(artifacts / "filter_report.json", outcome.report.to_json());
    ari::log::info("firing tables written; unlabeled coverage ",
                   outcome.tables.unlabeled.coverage());
    return 0;
}

ari::BackboneConfig backbone_config_from(const TrainArgs& args, int input_dim, int num_classes) {
    ari::BackboneConfig cfg;
    if (args.backbone == "linear") {
        cfg.arch = ari::BackboneConfig::Arch::Linear;
    } else if (args.backbone == "mlp") {
        cfg.arch = ari::BackboneConfig::Arch::Mlp;
    } else {
        throw ari::ValidationError("unknown backbone '" + args.backbone + "' (linear, mlp)");
    }
    cfg.hidden = args.hidden;
    cfg.input_dim = input_dim;
    cfg.num_classes = num_classes;
    cfg.seed = args.seed;
    return cfg;
}

ari::TrainConfig train_config_from(const TrainArgs& args) {
    ari::TrainConfig cfg;
    cfg.self_train_iterations = args.iterations;
    cfg.labeled_to_unlabeled_step_ratio = args.ratio;
    cfg.batch_size = args.batch_size;
    cfg.max_steps = args.max_steps;
    cfg.distill_mode = ari::distill_mode_from_name(args.distill);
    cfg.distill_threshold = args.threshold;
    cfg.inference_head = ari::head_from_name(args.inference_head);
    cfg.patience = args.patience;
    cfg.pretrain_steps = args.pretrain_steps;
    cfg.unsup_steps_per_iter = args.unsup_steps;
    cfg.student_lr = args.student_lr;
    cfg.teacher_lr = args.teacher_lr;
    cfg.momentum = args.momentum;
    cfg.seed = args.seed;
    return cfg;
}

ari::AggregatorConfig aggregator_config_from(const TrainArgs& args, int num_rules, int input_dim,
                                             int num_classes) {
    ari::AggregatorConfig cfg;
    cfg.num_rules = num_rules;
    cfg.embed_dim = args.embed_dim;
    cfg.input_dim = input_dim;
    cfg.num_classes = num_classes;
    cfg.u_total = args.u_total;
    cfg.seed = args.seed + 1;  // distinct stream family from the backbone
    return cfg;
}

int cmd_train(const TrainArgs& args) {
    const fs::path artifacts(args.artifacts);
    LoadedRun run = load_pipeline_inputs(args.data, artifacts, args.repr);

    const fs::path out = args.out.empty() ? artifacts / "run" : fs::path(args.out);
    fs::create_directories(out);
    ari::TrainConfig tcfg = train_config_from(args);
    ari::BackboneConfig bcfg =
        backbone_config_from(args, static_cast<int>(run.repr.dim), run.corpus.num_classes);

    json meta;
    meta["repr"] = args.repr;
    meta["backbone"] = args.backbone;
    meta["inference_head"] = args.inference_head;
    meta["baseline"] = args.baseline;
    meta["distill"] = args.distill;
    meta["seed"] = args.seed;

    if (!args.sweep.empty()) {
        std::vector<ari::DistillMode> modes;
        std::string token;
        std::istringstream ss(args.sweep);
        while (std::getline(ss, token, ',')) {
            if (!token.empty()) modes.push_back(ari::distill_mode_from_name(token));
        }
        ari::AggregatorConfig acfg =
            aggregator_config_from(args, static_cast<int>(run.data.rule_ids.size()),
                                   static_cast<int>(run.repr.dim), run.corpus.num_classes);
        std::vector<ari::VariantResult> results =
            ari::sweep_variants(run.data, bcfg, acfg, tcfg, modes);
        ari::write_json_file(out / "sweep.json", ari::sweep_to_json(results));
        const std::string text = ari::sweep_to_text(results);
        std::ofstream(out / "sweep.txt") << text;
        std::cout << text;
        ari::write_json_file(out / "run_meta.json", meta);
        return 0;
    }

    if (args.baseline == "selftrain" || args.baseline == "supervised") {
        ari::TrainData data = run.data;
        if (args.baseline == "supervised") data.unlabeled.clear();
        ari::BaselineResult result = ari::run_selftrain_baseline(data, bcfg, tcfg);
        ari::write_json_file(out / "student.json", result.student.checkpoint());
        ari::write_json_file(out / "best_student.json", result.best_student.checkpoint());
        ari::write_json_file(out / "history.json", result.history.to_json());
        ari::write_json_file(out / "run_meta.json", meta);
        ari::log::info("baseline '", args.baseline, "' best val F1 ", result.history.best_val_f1);
        return 0;
    }
    if (args.baseline != "none") {
        throw ari::ValidationError("unknown baseline '" + args.baseline +
                                   "' (none, selftrain, supervised)");
    }

    ari::AggregatorConfig acfg =
        aggregator_config_from(args, static_cast<int>(run.data.rule_ids.size()),
                               static_cast<int>(run.repr.dim), run.corpus.num_classes);
    ari::TrainResult result = ari::run_ari(run.data, bcfg, acfg, tcfg);
    ari::write_json_file(out / "student.json", result.student.checkpoint());
    ari::write_json_file(out / "teacher.json", result.teacher.checkpoint(run.data.rule_ids));
    ari::write_json_file(out / "best_student.json", result.best_student.checkpoint());
    ari::write_json_file(out / "best_teacher.json",
                         result.best_teacher.checkpoint(run.data.rule_ids));
    ari::write_json_file(out / "history.json", result.history.to_json());
    ari::write_json_file(out / "run_meta.json", meta);
    ari::log::info("best val F1 ", result.history.best_val_f1, " at iteration ",
                   result.history.best_iteration);
    return 0;
}

std::vector<std::size_t> split_rows(const ari::Corpus& corpus, const std::string& name) {
    if (name == "test") return corpus.indices(ari::Split::Test);
    if (name == "valid") return corpus.indices(ari::Split::Valid);
    throw ari::ValidationError("unknown split '" + name + "' (test, valid)");
}

int cmd_eval(const EvalArgs& args) {
    const fs::path artifacts(args.artifacts);
    const fs::path run_dir = args.run.empty() ? artifacts / "run" : fs::path(args.run);
    const json meta = ari::read_json_file(run_dir / "run_meta.json");
    LoadedRun run = load_pipeline_inputs(args.data, artifacts, meta.at("repr").get<std::string>());

    const std::string head =
        args.head.empty() ? meta.at("inference_head").get<std::string>() : args.head;
    const std::vector<std::size_t> rows = split_rows(run.corpus, args.split);
    const ari::LoadedFirings& firings =
        args.split == "test" ? run.firings_test : run.firings_valid;

    ari::BackboneModel student =
        ari::BackboneModel::from_checkpoint(ari::read_json_file(run_dir / "best_student.json"));
    std::vector<ari::Label> preds;
    std::optional<ari::Aggregator> teacher;
    if (head == "teacher") {
        teacher.emplace(ari::Aggregator::from_checkpoint(
            ari::read_json_file(run_dir / "best_teacher.json")));
        preds = ari::predict_teacher(*teacher, student, run.data, rows, firings.table);
    } else if (head == "student") {
        preds = ari::predict_student(student, run.data, rows);
    } else {
        throw ari::ValidationError("unknown head '" + head + "' (teacher, student)");
    }
    std::vector<ari::Label> golds;
    for (std::size_t r : rows) golds.push_back(run.data.labels[r]);

    ari::MetricReport metrics = ari::f1_score(preds, golds, run.corpus.num_classes);
    ari::RuleAudit audit =
        ari::rule_audit(firings.table, golds, run.corpus.num_classes, firings.rule_ids);

    // difficulty bins want teacher attributions; use the stored teacher even
    // when scoring the student head (baseline runs have none)
    if (!teacher.has_value() && fs::exists(run_dir / "best_teacher.json")) {
        teacher.emplace(ari::Aggregator::from_checkpoint(
            ari::read_json_file(run_dir / "best_teacher.json")));
    }
    json report;
    report["split"] = args.split;
    report["head"] = head;
    report["metrics"] = metrics.to_json();
    report["rule_audit"] = audit.to_json();
    if (teacher.has_value()) {
        std::vector<ari::ExampleEval> evals;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::size_t r = rows[i];
            ari::ExampleEval ev;
            ev.id = run.corpus.examples[r].id;
            ev.backbone_dist = student.predict_proba(run.repr.row_span(r));
            ari::AggregateOutput agg = teacher->aggregate(
                run.repr.row_span(r),
                {firings.table.entries.data() + i * firings.table.n_rules,
                 firings.table.n_rules},
                ev.backbone_dist);
            ev.teacher_dist = agg.a;
            double mass = 0.0;
            for (std::size_t j = 0; j < firings.table.n_rules; ++j) {
                if (firings.table.at(i, j) != ari::kAbstain) mass += agg.rule_weight(j);
            }
            ev.rule_weight_total = mass;
            ev.backbone_weight = agg.backbone_weight();
            ev.smoothing_weight = teacher->config().u_total / agg.q;
            ev.gold = golds[i];
            evals.push_back(std::move(ev));
        }
        report["difficulty"] = ari::difficulty_report(evals).to_json();
    }
    const fs::path out_path = args.out.empty() ? run_dir / "report.json" : fs::path(args.out);
    ari::write_json_file(out_path, report);
    std::cout << "split=" << args.split << " head=" << head << " f1=" << metrics.f1
              << " accuracy=" << metrics.accuracy << "\n";
    return 0;
}

int cmd_explain(const ExplainArgs& args) {
    const fs::path artifacts(args.artifacts);
    const fs::path run_dir = args.run.empty() ? artifacts / "run" : fs::path(args.run);
    const json meta = ari::read_json_file(run_dir / "run_meta.json");
    LoadedRun run = load_pipeline_inputs(args.data, artifacts, meta.at("repr").get<std::string>());

    const std::vector<std::size_t> rows = split_rows(run.corpus, args.split);
    const ari::LoadedFirings& firings =
        args.split == "test" ? run.firings_test : run.firings_valid;

    ari::BackboneModel student =
        ari::BackboneModel::from_checkpoint(ari::read_json_file(run_dir / "best_student.json"));
    std::vector<std::string> rule_ids;
    ari::Aggregator teacher = ari::Aggregator::from_checkpoint(
        ari::read_json_file(run_dir / "best_teacher.json"), &rule_ids);

    const fs::path out_path =
        args.out.empty() ? run_dir / "attributions.jsonl" : fs::path(args.out);
    std::ofstream out(out_path);
    if (!out) throw ari::ValidationError("cannot write: " + out_path.string());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        ari::ExampleEval ev;
        ev.id = run.corpus.examples[r].id;
        ev.backbone_dist = student.predict_proba(run.repr.row_span(r));
        ari::AggregateOutput agg = teacher.aggregate(
            run.repr.row_span(r),
            {firings.table.entries.data() + i * firings.table.n_rules, firings.table.n_rules},
            ev.backbone_dist);
        ev.teacher_dist = agg.a;
        ev.backbone_weight = agg.backbone_weight();
        ev.smoothing_weight = teacher.config().u_total / agg.q;
        if (run.data.labels[r] != ari::kAbstain) ev.gold = run.data.labels[r];
        ari::AttributionRecord record =
            ari::make_attribution(ev, firings.table, i, rule_ids, agg.rule_scores, agg.q);
        out << record.to_json().dump() << "\n";
    }
    ari::log::info("wrote attributions for ", rows.size(), " examples to ", out_path.string());
    return 0;
}

int cmd_export_rules(const ExportArgs& args) {
    const fs::path artifacts(args.artifacts);
    ari::Vocabulary vocab = ari::Vocabulary::load(artifacts / "vocab.json");
    const fs::path rules_path =
        args.rules.empty() ? artifacts / "rules.json" : fs::path(args.rules);
    ari::RuleImport imported = ari::load_rules(rules_path, vocab);
    std::vector<std::string> label_names;
    if (!args.data.empty()) {
        label_names = ari::load_corpus(args.data).label_names;
    } else {
        int max_label = 1;
        for (const ari::Rule& r : imported.rules) {
            if (r.kind == ari::Rule::Kind::LinearNgram) {
                max_label = std::max(max_label, r.target_label);
            } else {
                for (const ari::TreeNode& n : r.nodes) {
                    if (n.is_leaf()) {
                        max_label = std::max(max_label, static_cast<int>(n.leaf_dist.size()) - 1);
                    }
                }
            }
        }
        for (int k = 0; k <= max_label; ++k) label_names.push_back("CLASS_" + std::to_string(k));
    }
    const std::string listing =
        ari::dump_rules(imported.rules, vocab, label_names, imported.space);
    if (args.out == "-") {
        std::cout << listing;
    } else {
        std::ofstream f(args.out);
        if (!f) throw ari::ValidationError("cannot write: " + args.out);
        f << listing;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Automatic rule induction and rule-augmented self-training"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    // config-file values are injected before the real argv, so TakeLast makes
    // command-line flags win
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    SynthArgs synth;
    CLI::App* s = app.add_subcommand("synth", "Generate a deterministic synthetic corpus");
    s->add_option("--out", synth.out, "Output corpus directory")->required();
    s->add_option("--seed", synth.seed, "Generator seed");
    s->add_option("--classes", synth.classes, "Number of classes");
    s->add_option("--labeled", synth.labeled, "Labeled example count");
    s->add_option("--unlabeled", synth.unlabeled, "Unlabeled example count");
    s->add_option("--valid", synth.valid, "Validation example count");
    s->add_option("--test", synth.test, "Test example count");
    s->add_option("--keyword-strength", synth.keyword_strength,
                  "Per-keyword inclusion probability in its own class");
    s->add_option("--embedding-dim", synth.embedding_dim,
                  "Synthetic embedding dimension (0 disables)");

    FeaturizeArgs feat;
    CLI::App* f = app.add_subcommand("featurize", "Build the vocabulary and feature matrices");
    f->add_option("--data", feat.data, "Corpus manifest path")->required();
    f->add_option("--out", feat.out, "Artifacts directory")->required();
    f->add_option("--max-size", feat.max_size, "Vocabulary size cap");
    f->add_option("--min-freq", feat.min_freq, "Minimum token frequency");
    f->add_option("--max-doc-freq", feat.max_doc_freq, "Maximum document frequency fraction");
    f->add_option("--ngram-max", feat.ngram_max, "Longest ngram");
    f->add_flag("--no-stopwords", feat.no_stopwords, "Keep stopwords");
    f->add_flag("--no-pca", feat.no_pca, "Skip the PCA-adjusted feature matrix");
    f->add_flag("--mean-subtract", feat.mean_subtract, "Center columns before the PCA");
    f->add_option("--pca-tol", feat.pca_tol, "Power iteration relative tolerance");
    f->add_option("--pca-max-iter", feat.pca_max_iter, "Power iteration cap");
    f->add_option("--seed", feat.seed, "Power iteration start seed");

    InduceArgs induce;
    CLI::App* i = app.add_subcommand("induce", "Train a low-capacity model and extract rules");
    i->add_option("--data", induce.data, "Corpus manifest path")->required();
    i->add_option("--artifacts", induce.artifacts, "Artifacts directory from featurize")
        ->required();
    i->add_option("--method", induce.method, "ngram+linear, ngram+tree or pca+tree");
    i->add_option("--num-rules", induce.num_rules, "Rule count (16, 32 and 64 are typical)");
    i->add_option("--tau", induce.tau, "Tree rule confidence threshold");
    i->add_option("--depth", induce.depth, "Tree depth");
    i->add_option("--l2", induce.l2, "Linear model l2 penalty");
    i->add_option("--lr", induce.lr, "Linear model learning rate");
    i->add_option("--epochs", induce.epochs, "Linear model epochs");
    i->add_option("--seed", induce.seed, "Training seed");
    i->add_option("--out", induce.out, "rules.json destination (default <artifacts>/rules.json)");
    i->add_option("--dump", induce.dump, "Write the human-readable listing here ('-' = stdout)");

    FilterArgs filter;
    CLI::App* fl = app.add_subcommand("filter", "Apply rules and the firing filters");
    fl->add_option("--data", filter.data, "Corpus manifest path")->required();
    fl->add_option("--artifacts", filter.artifacts, "Artifacts directory")->required();
    fl->add_option("--rules", filter.rules, "rules.json (default <artifacts>/rules.json)");
    fl->add_option("--filters", filter.filters, "none, train, semantic or both");
    fl->add_option("--mask-prob", filter.mask_prob, "Train-error masking probability");
    fl->add_option("--threshold", filter.threshold, "Semantic similarity threshold");
    fl->add_flag("--exact-count", filter.exact_count,
                 "Mask exactly round(p*errors) instead of Bernoulli draws");
    fl->add_option("--seed", filter.seed, "Masking seed");

    TrainArgs train;
    CLI::App* t = app.add_subcommand("train", "Co-train the backbone and the rule aggregator");
    t->add_option("--data", train.data, "Corpus manifest path")->required();
    t->add_option("--artifacts", train.artifacts, "Artifacts directory")->required();
    t->add_option("--out", train.out, "Run directory (default <artifacts>/run)");
    t->add_option("--repr", train.repr, "Backbone representation: ngram, pca or embedding");
    t->add_option("--backbone", train.backbone, "linear or mlp");
    t->add_option("--hidden", train.hidden, "MLP hidden width");
    t->add_option("--embed-dim", train.embed_dim, "Rule embedding size");
    t->add_option("--u-total", train.u_total, "Uniform smoothing mass");
    t->add_option("--distill", train.distill, "soft, hard, soft-thresh or hard-thresh");
    t->add_option("--threshold", train.threshold, "Distillation confidence threshold");
    t->add_option("--iterations", train.iterations, "Self-training iterations");
    t->add_option("--ratio", train.ratio, "Labeled-to-unlabeled step ratio");
    t->add_option("--batch-size", train.batch_size, "Batch size");
    t->add_option("--max-steps", train.max_steps, "Total student step cap");
    t->add_option("--patience", train.patience, "Early stopping patience (iterations)");
    t->add_option("--pretrain-steps", train.pretrain_steps, "Supervised pretraining steps");
    t->add_option("--unsup-steps", train.unsup_steps, "Unlabeled steps per phase");
    t->add_option("--student-lr", train.student_lr, "Backbone learning rate");
    t->add_option("--teacher-lr", train.teacher_lr, "Aggregator learning rate");
    t->add_option("--momentum", train.momentum, "SGD momentum (0 disables)");
    t->add_option("--inference-head", train.inference_head, "teacher or student");
    t->add_option("--baseline", train.baseline,
                  "Run a baseline instead: selftrain (no rules) or supervised (labeled only)");
    t->add_option("--sweep", train.sweep,
                  "Comma-separated distill modes; runs one full training per mode");
    t->add_option("--seed", train.seed, "Training seed");

    EvalArgs eval;
    CLI::App* e = app.add_subcommand("eval", "Score a trained run and write report.json");
    e->add_option("--data", eval.data, "Corpus manifest path")->required();
    e->add_option("--artifacts", eval.artifacts, "Artifacts directory")->required();
    e->add_option("--run", eval.run, "Run directory (default <artifacts>/run)");
    e->add_option("--head", eval.head, "teacher or student (default: the trained head)");
    e->add_option("--split", eval.split, "test or valid");
    e->add_option("--out", eval.out, "report.json destination");

    ExplainArgs explain;
    CLI::App* x = app.add_subcommand("explain", "Write per-example rule attributions");
    x->add_option("--data", explain.data, "Corpus manifest path")->required();
    x->add_option("--artifacts", explain.artifacts, "Artifacts directory")->required();
    x->add_option("--run", explain.run, "Run directory (default <artifacts>/run)");
    x->add_option("--split", explain.split, "test or valid");
    x->add_option("--out", explain.out, "attributions.jsonl destination");

    ExportArgs exp;
    CLI::App* ex = app.add_subcommand("export-rules", "Print rules in the human-readable format");
    ex->add_option("--artifacts", exp.artifacts, "Artifacts directory (for vocab.json)")
        ->required();
    ex->add_option("--rules", exp.rules, "rules.json (default <artifacts>/rules.json)");
    ex->add_option("--out", exp.out, "Destination ('-' = stdout)");
    ex->add_option("--data", exp.data, "Corpus manifest (for label names)");

    app.set_help_all_flag("--help-all", "Help for every subcommand");

    std::vector<std::string> raw_args(argv + 1, argv + argc);
    try {
        std::vector<std::string> args = apply_config_file(app, raw_args);
        std::reverse(args.begin(), args.end());  // CLI::App::parse takes reversed args
        app.parse(args);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    } catch (const ari::ValidationError& err) {
        ari::log::error(err.what());
        return 1;
    }

    try {
        if (s->parsed()) return cmd_synth(synth);
        if (f->parsed()) return cmd_featurize(feat);
        if (i->parsed()) return cmd_induce(induce);
        if (fl->parsed()) return cmd_filter(filter);
        if (t->parsed()) return cmd_train(train);
        if (e->parsed()) return cmd_eval(eval);
        if (x->parsed()) return cmd_explain(explain);
        if (ex->parsed()) return cmd_export_rules(exp);
        ari::log::error("no subcommand given");
        return 1;
    } catch (const ari::ValidationError& err) {
        ari::log::error(err.what());
        return 1;
    } catch (const std::exception& err) {
        ari::log::error("runtime failure: ", err.what());
        return 2;
    }
}
