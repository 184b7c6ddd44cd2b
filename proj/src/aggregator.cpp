#include "ari/aggregator.hpp"

#include <algorithm>
#include <cmath>

#include "ari/kernels.hpp"
#include "ari/log.hpp"
#include "ari/rng.hpp"

namespace ari {

using nlohmann::json;

namespace {
constexpr double kProbFloor = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

Aggregator::Aggregator(AggregatorConfig cfg) : cfg_(std::move(cfg)) {}

Aggregator Aggregator::init(const AggregatorConfig& cfg) {
    if (cfg.num_rules < 0 || cfg.input_dim <= 0 || cfg.num_classes < 2 || cfg.embed_dim <= 0) {
        throw ValidationError("aggregator: bad configuration");
    }
    if (cfg.u_total < 0.0) throw ValidationError("aggregator: u_total must be >= 0");
    Aggregator agg(cfg);
    const std::size_t r = static_cast<std::size_t>(cfg.num_rules);
    const std::size_t de = static_cast<std::size_t>(cfg.embed_dim);
    const std::size_t in = static_cast<std::size_t>(cfg.input_dim);
    const std::size_t hid = static_cast<std::size_t>(cfg.hidden);
    agg.params_.assign(r * de + de + hid * in + hid + de * hid + de, 0.0);
    agg.velocity_.assign(agg.params_.size(), 0.0);
    Rng rng = Rng::stream(cfg.seed, 0xA6);
    double* p = agg.params_.data();
    const double se = 1.0 / std::sqrt(static_cast<double>(de));
    for (std::size_t i = 0; i < r * de + de; ++i) p[i] = se * rng.normal();
    double* w1 = p + r * de + de;
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t i = 0; i < hid * in; ++i) w1[i] = s1 * rng.normal();
    double* w2 = w1 + hid * in + hid;
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hid));
    for (std::size_t i = 0; i < de * hid; ++i) w2[i] = s2 * rng.normal();
    return agg;
}

struct Aggregator::Forward {
    std::vector<double> hidden;  // tanh activations
    std::vector<double> z;       // projection output, length embed_dim
    std::vector<double> scores;  // sigma(z . E_j) for all rules
    double s_s = 0.0;
    double q = 0.0;
    std::vector<double> a;
    bool passthrough = false;  // nothing fired, u_total == 0: a == b exactly
    bool degenerate = false;   // Q underflowed to zero: a is uniform
};

void Aggregator::project_and_score(std::span<const double> h, std::vector<double>& hidden,
                                   std::vector<double>& z, std::vector<double>& scores,
                                   double& backbone_score) const {
    const std::size_t r = static_cast<std::size_t>(cfg_.num_rules);
    const std::size_t de = static_cast<std::size_t>(cfg_.embed_dim);
    const std::size_t in = static_cast<std::size_t>(cfg_.input_dim);
    const std::size_t hid = static_cast<std::size_t>(cfg_.hidden);
    if (h.size() != in) throw ValidationError("aggregator: representation dim mismatch");

    const double* e_rules = params_.data();
    const double* e_s = e_rules + r * de;
    const double* w1 = e_s + de;
    const double* b1 = w1 + hid * in;
    const double* w2 = b1 + hid;
    const double* b2 = w2 + de * hid;

    hidden.resize(hid);
    for (std::size_t j = 0; j < hid; ++j) {
        hidden[j] = std::tanh(kernels::dot(w1 + j * in, h.data(), in) + b1[j]);
    }
    z.resize(de);
    for (std::size_t j = 0; j < de; ++j) {
        z[j] = kernels::dot(w2 + j * hid, hidden.data(), hid) + b2[j];
    }
    scores.resize(r);
    for (std::size_t j = 0; j < r; ++j) {
        scores[j] = sigmoid(kernels::dot(e_rules + j * de, z.data(), de));
    }
    backbone_score = sigmoid(kernels::dot(e_s, z.data(), de));
}

Aggregator::AttentionScores Aggregator::attention_scores(std::span<const double> h) const {
    AttentionScores out;
    std::vector<double> hidden;
    std::vector<double> z;
    project_and_score(h, hidden, z, out.rules, out.backbone);
    return out;
}

Aggregator::Forward Aggregator::forward(std::span<const double> h,
                                        std::span<const int16_t> firings,
                                        std::span<const double> b) const {
    const std::size_t r = static_cast<std::size_t>(cfg_.num_rules);
    const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
    if (firings.size() != r) throw ValidationError("aggregator: firing row size mismatch");
    if (b.size() != k) throw ValidationError("aggregator: backbone distribution size mismatch");

    Forward fwd;
    project_and_score(h, fwd.hidden, fwd.z, fwd.scores, fwd.s_s);

    double fired_mass = 0.0;
    bool any_fired = false;
    for (std::size_t j = 0; j < r; ++j) {
        if (firings[j] != kAbstain) {
            fired_mass += fwd.scores[j];
            any_fired = true;
        }
    }
    if (!any_fired && cfg_.u_total == 0.0 && fwd.s_s > 0.0) {
        // Single vote normalized by its own weight: a == b with no rounding.
        fwd.passthrough = true;
        fwd.q = fwd.s_s;
        fwd.a.assign(b.begin(), b.end());
        return fwd;
    }
    fwd.q = fired_mass + fwd.s_s + cfg_.u_total;
    if (fwd.q == 0.0) {
        log::error("aggregator: normalizer underflowed to zero; emitting uniform distribution");
        fwd.degenerate = true;
        fwd.a.assign(k, 1.0 / static_cast<double>(k));
        return fwd;
    }
    fwd.a.assign(k, cfg_.u_total / static_cast<double>(k));
    for (std::size_t j = 0; j < r; ++j) {
        if (firings[j] != kAbstain) fwd.a[static_cast<std::size_t>(firings[j])] += fwd.scores[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
        fwd.a[c] = (fwd.a[c] + fwd.s_s * b[c]) / fwd.q;
    }
    return fwd;
}

AggregateOutput Aggregator::aggregate(std::span<const double> h, std::span<const int16_t> firings,
                                      std::span<const double> b) const {
    Forward fwd = forward(h, firings, b);
    AggregateOutput out;
    out.a = std::move(fwd.a);
    out.rule_scores = std::move(fwd.scores);
    out.backbone_score = fwd.s_s;
    out.q = fwd.q;
    return out;
}

void Aggregator::backward(const Forward& fwd, std::span<const double> h,
                          std::span<const int16_t> firings, std::span<const double> b,
                          const std::vector<double>& dl_da, std::vector<double>& grad) const {
    if (fwd.passthrough || fwd.degenerate) return;  // a does not depend on the parameters
    const std::size_t r = static_cast<std::size_t>(cfg_.num_rules);
    const std::size_t de = static_cast<std::size_t>(cfg_.embed_dim);
    const std::size_t in = static_cast<std::size_t>(cfg_.input_dim);
    const std::size_t hid = static_cast<std::size_t>(cfg_.hidden);
    const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);

    const double* e_rules = params_.data();
    const double* e_s = e_rules + r * de;
    const double* w2 = params_.data() + r * de + de + hid * in + hid;
    double* g_rules = grad.data();
    double* g_es = g_rules + r * de;
    double* g_w1 = g_es + de;
    double* g_b1 = g_w1 + hid * in;
    double* g_w2 = g_b1 + hid;
    double* g_b2 = g_w2 + de * hid;

    // da_c/ds_j = (1[r_j votes c] - a_c)/Q; da_c/ds_s = (b_c - a_c)/Q.
    double inner = 0.0;
    for (std::size_t c = 0; c < k; ++c) inner += dl_da[c] * fwd.a[c];

    std::vector<double> dz(de, 0.0);
    for (std::size_t j = 0; j < r; ++j) {
        if (firings[j] == kAbstain) continue;
        const double dl_ds = (dl_da[static_cast<std::size_t>(firings[j])] - inner) / fwd.q;
        const double dl_dt = dl_ds * fwd.scores[j] * (1.0 - fwd.scores[j]);
        kernels::axpy(dl_dt, fwd.z.data(), g_rules + j * de, de);
        kernels::axpy(dl_dt, e_rules + j * de, dz.data(), de);
    }
    {
        double bt = 0.0;
        for (std::size_t c = 0; c < k; ++c) bt += dl_da[c] * b[c];
        const double dl_ds = (bt - inner) / fwd.q;
        const double dl_dt = dl_ds * fwd.s_s * (1.0 - fwd.s_s);
        kernels::axpy(dl_dt, fwd.z.data(), g_es, de);
        kernels::axpy(dl_dt, e_s, dz.data(), de);
    }

    std::vector<double> dhidden(hid, 0.0);
    for (std::size_t j = 0; j < de; ++j) {
        kernels::axpy(dz[j], fwd.hidden.data(), g_w2 + j * hid, hid);
        g_b2[j] += dz[j];
        kernels::axpy(dz[j], w2 + j * hid, dhidden.data(), hid);
    }
    for (std::size_t j = 0; j < hid; ++j) {
        const double dpre = dhidden[j] * (1.0 - fwd.hidden[j] * fwd.hidden[j]);
        kernels::axpy(dpre, h.data(), g_w1 + j * in, in);
        g_b1[j] += dpre;
    }
}

void Aggregator::apply_update(const std::vector<double>& grad, double lr, double momentum) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        velocity_[i] = momentum * velocity_[i] - lr * grad[i];
        params_[i] += velocity_[i];
    }
}

double Aggregator::step_supervised(const std::vector<const double*>& h,
                                   const std::vector<const int16_t*>& firings,
                                   const std::vector<const double*>& b,
                                   const std::vector<Label>& y, double lr, double momentum) {
    if (h.empty() || h.size() != firings.size() || h.size() != b.size() || h.size() != y.size()) {
        throw ValidationError("step_supervised: bad batch");
    }
    const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
    const std::size_t in = static_cast<std::size_t>(cfg_.input_dim);
    const std::size_t r = static_cast<std::size_t>(cfg_.num_rules);
    const double inv_b = 1.0 / static_cast<double>(h.size());
    std::vector<double> grad(params_.size(), 0.0);
    std::vector<double> dl_da(k);
    double loss = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        Forward fwd = forward({h[i], in}, {firings[i], r}, {b[i], k});
        const double ay = fwd.a[static_cast<std::size_t>(y[i])];
        loss -= std::log(std::max(ay, kProbFloor)) * inv_b;
        std::fill(dl_da.begin(), dl_da.end(), 0.0);
        if (ay > kProbFloor) dl_da[static_cast<std::size_t>(y[i])] = -inv_b / ay;
        backward(fwd, {h[i], in}, {firings[i], r}, {b[i], k}, dl_da, grad);
    }
    if (!std::isfinite(loss)) throw std::runtime_error("teacher supervised loss diverged");
    apply_update(grad, lr, momentum);
    return loss;
}

double Aggregator::step_entropy(const std::vector<const double*>& h,
                                const std::vector<const int16_t*>& firings,
                                const std::vector<const double*>& b, double lr, double momentum) {
    if (h.empty() || h.size() != firings.size() || h.size() != b.size()) {
        throw ValidationError("step_entropy: bad batch");
    }
    const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
    const std::size_t in = static_cast<std::size_t>(cfg_.input_dim);
    const std::size_t r = static_cast<std::size_t>(cfg_.num_rules);
    const double inv_b = 1.0 / static_cast<double>(h.size());
    std::vector<double> grad(params_.size(), 0.0);
    std::vector<double> dl_da(k);
    double loss = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        Forward fwd = forward({h[i], in}, {firings[i], r}, {b[i], k});
        for (std::size_t c = 0; c < k; ++c) {
            const double a = fwd.a[c];
            const double la = std::log(std::max(a, kProbFloor));
            loss -= a * la * inv_b;
            // d(-a log a)/da, with the same clamp the loss uses
            dl_da[c] = a > kProbFloor ? -(la + 1.0) * inv_b : -la * inv_b;
        }
        backward(fwd, {h[i], in}, {firings[i], r}, {b[i], k}, dl_da, grad);
    }
    if (!std::isfinite(loss)) throw std::runtime_error("teacher entropy loss diverged");
    apply_update(grad, lr, momentum);
    return loss;
}

double Aggregator::loss_supervised(const std::vector<const double*>& h,
                                   const std::vector<const int16_t*>& firings,
                                   const std::vector<const double*>& b,
                                   const std::vector<Label>& y) const {
    const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
    const std::size_t in = static_cast<std::size_t>(cfg_.input_dim);
    const std::size_t r = static_cast<std::size_t>(cfg_.num_rules);
    double loss = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        Forward fwd = forward({h[i], in}, {firings[i], r}, {b[i], k});
        loss -= std::log(std::max(fwd.a[static_cast<std::size_t>(y[i])], kProbFloor));
    }
    return loss / static_cast<double>(h.size());
}

double Aggregator::loss_entropy(const std::vector<const double*>& h,
                                const std::vector<const int16_t*>& firings,
                                const std::vector<const double*>& b) const {
    const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
    const std::size_t in = static_cast<std::size_t>(cfg_.input_dim);
    const std::size_t r = static_cast<std::size_t>(cfg_.num_rules);
    double loss = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        Forward fwd = forward({h[i], in}, {firings[i], r}, {b[i], k});
        for (std::size_t c = 0; c < k; ++c) {
            loss -= fwd.a[c] * std::log(std::max(fwd.a[c], kProbFloor));
        }
    }
    return loss / static_cast<double>(h.size());
}

void Aggregator::set_params(std::span<const double> p) {
    if (p.size() != params_.size()) throw ValidationError("aggregator: parameter size mismatch");
    std::copy(p.begin(), p.end(), params_.begin());
}

json Aggregator::checkpoint(const std::vector<std::string>& rule_ids) const {
    if (rule_ids.size() != static_cast<std::size_t>(cfg_.num_rules)) {
        throw ValidationError("aggregator checkpoint: rule id count mismatch");
    }
    json j;
    j["version"] = 1;
    j["num_rules"] = cfg_.num_rules;
    j["embed_dim"] = cfg_.embed_dim;
    j["hidden"] = cfg_.hidden;
    j["input_dim"] = cfg_.input_dim;
    j["num_classes"] = cfg_.num_classes;
    j["u_total"] = cfg_.u_total;
    j["seed"] = cfg_.seed;
    j["rule_ids"] = rule_ids;
    j["params"] = params_;
    return j;
}

Aggregator Aggregator::from_checkpoint(const json& j, std::vector<std::string>* rule_ids) {
    AggregatorConfig cfg;
    cfg.num_rules = j.at("num_rules").get<int>();
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.hidden = j.at("hidden").get<int>();
    cfg.input_dim = j.at("input_dim").get<int>();
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.u_total = j.at("u_total").get<double>();
    cfg.seed = j.at("seed").get<uint64_t>();
    Aggregator agg = init(cfg);
    std::vector<double> params = j.at("params").get<std::vector<double>>();
    agg.set_params(params);
    std::fill(agg.velocity_.begin(), agg.velocity_.end(), 0.0);
    if (rule_ids != nullptr) *rule_ids = j.at("rule_ids").get<std::vector<std::string>>();
    return agg;
}

}  // namespace ari
