#include "ari/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ari/log.hpp"

namespace ari {

using nlohmann::json;

json MetricReport::to_json() const {
    json per = json::array();
    for (const ClassStats& c : per_class) {
        per.push_back({{"precision", c.precision},
                       {"recall", c.recall},
                       {"f1", c.f1},
                       {"support", c.support}});
    }
    return {{"f1", f1}, {"accuracy", accuracy}, {"per_class", per}};
}

MetricReport f1_score(const std::vector<Label>& preds, const std::vector<Label>& golds,
                      int num_classes) {
    if (preds.empty()) throw ValidationError("f1_score: empty inputs");
    if (preds.size() != golds.size()) throw ValidationError("f1_score: length mismatch");
    const std::size_t k = static_cast<std::size_t>(num_classes);
    std::vector<int64_t> tp(k, 0), fp(k, 0), fn(k, 0), support(k, 0);
    int64_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto p = static_cast<std::size_t>(preds[i]);
        const auto g = static_cast<std::size_t>(golds[i]);
        if (p >= k || g >= k) throw ValidationError("f1_score: label out of range");
        support[g]++;
        if (p == g) {
            tp[p]++;
            correct++;
        } else {
            fp[p]++;
            fn[g]++;
        }
    }
    MetricReport report;
    report.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
    report.per_class.resize(k);
    double macro = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        ClassStats& s = report.per_class[c];
        s.support = support[c];
        const int64_t denom_p = tp[c] + fp[c];
        const int64_t denom_r = tp[c] + fn[c];
        s.precision = denom_p > 0 ? static_cast<double>(tp[c]) / static_cast<double>(denom_p) : 0.0;
        s.recall = denom_r > 0 ? static_cast<double>(tp[c]) / static_cast<double>(denom_r) : 0.0;
        s.f1 = (s.precision + s.recall) > 0.0
                   ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                   : 0.0;
        macro += s.f1;
    }
    report.f1 = num_classes == 2 ? report.per_class[1].f1
                                 : macro / static_cast<double>(num_classes);
    return report;
}

double geometric_mean(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("geometric_mean: empty input");
    double log_sum = 0.0;
    for (double v : values) {
        if (v <= 0.0) throw ValidationError("geometric_mean: non-positive value");
        log_sum += std::log(v);
    }
    return std::exp(log_sum / static_cast<double>(values.size()));
}

json RuleAudit::to_json() const {
    json per = json::array();
    for (const PerRule& r : rules) {
        per.push_back({{"id", r.id},
                       {"fired", r.fired},
                       {"accuracy", r.accuracy.has_value() ? json(*r.accuracy) : json(nullptr)}});
    }
    return {{"coverage", coverage},
            {"precision_f1", precision_f1.has_value() ? json(*precision_f1) : json(nullptr)},
            {"rules", per}};
}

RuleAudit rule_audit(const FiringTable& table, const std::vector<Label>& golds, int num_classes,
                     const std::vector<std::string>& rule_ids) {
    if (golds.size() != table.rows()) throw ValidationError("rule_audit: gold/table mismatch");
    if (rule_ids.size() != table.n_rules) throw ValidationError("rule_audit: rule id mismatch");
    RuleAudit audit;
    audit.coverage = table.coverage();
    audit.rules.resize(table.n_rules);
    std::vector<int64_t> fired_correct(table.n_rules, 0);

    std::vector<Label> covered_preds;
    std::vector<Label> covered_golds;
    std::vector<int64_t> votes(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < table.rows(); ++i) {
        std::fill(votes.begin(), votes.end(), 0);
        bool any = false;
        for (std::size_t j = 0; j < table.n_rules; ++j) {
            const Label v = table.at(i, j);
            if (v == kAbstain) continue;
            any = true;
            votes[static_cast<std::size_t>(v)]++;
            audit.rules[j].fired++;
            if (v == golds[i]) fired_correct[j]++;
        }
        if (!any) continue;
        // majority of firings, ties to the lowest label
        std::size_t arg = 0;
        for (std::size_t c = 1; c < votes.size(); ++c) {
            if (votes[c] > votes[arg]) arg = c;
        }
        covered_preds.push_back(static_cast<Label>(arg));
        covered_golds.push_back(golds[i]);
    }
    if (!covered_preds.empty()) {
        audit.precision_f1 = f1_score(covered_preds, covered_golds, num_classes).f1;
    }
    for (std::size_t j = 0; j < table.n_rules; ++j) {
        audit.rules[j].id = rule_ids[j];
        if (audit.rules[j].fired > 0) {
            audit.rules[j].accuracy = static_cast<double>(fired_correct[j]) /
                                      static_cast<double>(audit.rules[j].fired);
        }
    }
    return audit;
}

double shannon_entropy(const std::vector<double>& dist) {
    double h = 0.0;
    for (double p : dist) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

Label argmax_label(const std::vector<double>& dist) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < dist.size(); ++i) {
        if (dist[i] > dist[arg]) arg = i;
    }
    return static_cast<Label>(arg);
}

json DifficultyReport::to_json() const {
    json jb = json::array();
    for (const DifficultyBin& b : bins) {
        jb.push_back({{"name", b.name},
                      {"count", b.count},
                      {"backbone_accuracy", b.backbone_accuracy},
                      {"teacher_accuracy", b.teacher_accuracy},
                      {"mean_rule_weight", b.mean_rule_weight}});
    }
    return {{"bins", jb}, {"single_bin_fallback", single_bin_fallback}};
}

DifficultyReport difficulty_report(const std::vector<ExampleEval>& rows) {
    DifficultyReport report;
    auto fill_bin = [&](const std::string& name, const std::vector<std::size_t>& members) {
        DifficultyBin bin;
        bin.name = name;
        bin.count = static_cast<int64_t>(members.size());
        int64_t b_correct = 0;
        int64_t t_correct = 0;
        double weight = 0.0;
        for (std::size_t i : members) {
            const ExampleEval& row = rows[i];
            if (row.gold.has_value()) {
                if (argmax_label(row.backbone_dist) == *row.gold) b_correct++;
                if (argmax_label(row.teacher_dist) == *row.gold) t_correct++;
            }
            weight += row.rule_weight_total;
        }
        if (!members.empty()) {
            bin.backbone_accuracy = static_cast<double>(b_correct) / static_cast<double>(members.size());
            bin.teacher_accuracy = static_cast<double>(t_correct) / static_cast<double>(members.size());
            bin.mean_rule_weight = weight / static_cast<double>(members.size());
        }
        report.bins.push_back(std::move(bin));
    };

    const std::size_t n = rows.size();
    if (n < 4) {
        log::info("difficulty_report: fewer than 4 examples; single bin");
        report.single_bin_fallback = true;
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        fill_bin("all", all);
        return report;
    }

    std::vector<std::pair<double, std::size_t>> ranked(n);
    for (std::size_t i = 0; i < n; ++i) ranked[i] = {shannon_entropy(rows[i].backbone_dist), i};
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return rows[a.second].id < rows[b.second].id;
    });
    // nearest-rank quartiles over the entropy ranking
    const std::size_t r25 = static_cast<std::size_t>(
        std::ceil(0.25 * static_cast<double>(n)));
    const std::size_t r75 = static_cast<std::size_t>(
        std::ceil(0.75 * static_cast<double>(n)));
    std::vector<std::size_t> easy, medium, hard;
    for (std::size_t rank = 1; rank <= n; ++rank) {
        const std::size_t idx = ranked[rank - 1].second;
        if (rank <= r25) {
            easy.push_back(idx);
        } else if (rank <= r75) {
            medium.push_back(idx);
        } else {
            hard.push_back(idx);
        }
    }
    fill_bin("easy", easy);
    fill_bin("medium", medium);
    fill_bin("hard", hard);
    return report;
}

json AttributionRecord::to_json() const {
    json jf = json::array();
    for (const FiredRule& f : fired) {
        jf.push_back({{"rule", f.rule_id}, {"weight", f.weight}});
    }
    json out;
    out["id"] = id;
    out["fired"] = std::move(jf);
    out["backbone_weight"] = backbone_weight;
    out["smoothing_weight"] = smoothing_weight;
    out["predicted"] = predicted;
    out["gold"] = gold.has_value() ? json(*gold) : json(nullptr);
    return out;
}

AttributionRecord make_attribution(const ExampleEval& row, const FiringTable& table,
                                   std::size_t table_row, const std::vector<std::string>& rule_ids,
                                   const std::vector<double>& rule_scores, double q) {
    AttributionRecord record;
    record.id = row.id;
    for (std::size_t j = 0; j < table.n_rules; ++j) {
        if (table.at(table_row, j) == kAbstain) continue;
        record.fired.push_back({rule_ids[j], rule_scores[j] / q});
    }
    record.backbone_weight = row.backbone_weight;
    record.smoothing_weight = row.smoothing_weight;
    record.predicted = argmax_label(row.teacher_dist);
    record.gold = row.gold;
    return record;
}

}  // namespace ari
