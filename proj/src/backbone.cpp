#include "ari/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "ari/kernels.hpp"
#include "ari/log.hpp"
#include "ari/rng.hpp"

namespace ari {

using nlohmann::json;

const char* distill_mode_name(DistillMode m) {
    switch (m) {
        case DistillMode::Soft: return "soft";
        case DistillMode::Hard: return "hard";
        case DistillMode::SoftThresh: return "soft-thresh";
        case DistillMode::HardThresh: return "hard-thresh";
    }
    return "?";
}

DistillMode distill_mode_from_name(const std::string& name) {
    if (name == "soft") return DistillMode::Soft;
    if (name == "hard") return DistillMode::Hard;
    if (name == "soft-thresh") return DistillMode::SoftThresh;
    if (name == "hard-thresh") return DistillMode::HardThresh;
    throw ValidationError("unknown distill mode '" + name + "'");
}

std::vector<double> softmax(std::span<const double> z) {
    std::vector<double> p(z.size());
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    double total = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        p[k] = std::exp(z[k] - zmax);
        total += p[k];
    }
    for (double& v : p) v /= total;
    return p;
}

BackboneModel::BackboneModel(BackboneConfig cfg) : cfg_(std::move(cfg)) {}

BackboneModel BackboneModel::init(const BackboneConfig& cfg) {
    if (cfg.input_dim <= 0 || cfg.num_classes < 2) {
        throw ValidationError("backbone: input_dim and num_classes required");
    }
    BackboneModel model(cfg);
    const std::size_t in = static_cast<std::size_t>(cfg.input_dim);
    const std::size_t k = static_cast<std::size_t>(cfg.num_classes);
    const std::size_t hid = static_cast<std::size_t>(cfg.hidden);
    std::size_t count = 0;
    if (cfg.arch == BackboneConfig::Arch::Linear) {
        count = k * in + k;
    } else {
        count = hid * in + hid + k * hid + k;
    }
    model.params_.assign(count, 0.0);
    model.velocity_.assign(count, 0.0);
    Rng rng = Rng::stream(cfg.seed, 0xB0);
    if (cfg.arch == BackboneConfig::Arch::Linear) {
        const double s = 1.0 / std::sqrt(static_cast<double>(in));
        for (std::size_t i = 0; i < k * in; ++i) model.params_[i] = s * rng.normal();
    } else {
        const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
        for (std::size_t i = 0; i < hid * in; ++i) model.params_[i] = s1 * rng.normal();
        const double s2 = 1.0 / std::sqrt(static_cast<double>(hid));
        for (std::size_t i = 0; i < k * hid; ++i) {
            model.params_[hid * in + hid + i] = s2 * rng.normal();
        }
    }
    return model;
}

void BackboneModel::logits(std::span<const double> h, double* z, double* hidden_act) const {
    const std::size_t in = static_cast<std::size_t>(cfg_.input_dim);
    const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
    if (h.size() != in) throw ValidationError("backbone: representation dim mismatch");
    for (double v : h) {
        if (!std::isfinite(v)) throw ValidationError("backbone: non-finite input");
    }
    if (cfg_.arch == BackboneConfig::Arch::Linear) {
        const double* w = params_.data();
        const double* b = params_.data() + k * in;
        for (std::size_t c = 0; c < k; ++c) z[c] = kernels::dot(w + c * in, h.data(), in) + b[c];
        return;
    }
    const std::size_t hid = static_cast<std::size_t>(cfg_.hidden);
    const double* w1 = params_.data();
    const double* b1 = w1 + hid * in;
    const double* w2 = b1 + hid;
    const double* b2 = w2 + k * hid;
    for (std::size_t j = 0; j < hid; ++j) {
        hidden_act[j] = std::tanh(kernels::dot(w1 + j * in, h.data(), in) + b1[j]);
    }
    for (std::size_t c = 0; c < k; ++c) {
        z[c] = kernels::dot(w2 + c * hid, hidden_act, hid) + b2[c];
    }
}

std::vector<double> BackboneModel::predict_proba(std::span<const double> h) const {
    const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
    std::vector<double> z(k);
    std::vector<double> hidden(cfg_.arch == BackboneConfig::Arch::Mlp
                                   ? static_cast<std::size_t>(cfg_.hidden)
                                   : 0);
    logits(h, z.data(), hidden.data());
    return softmax(z);
}

void BackboneModel::accumulate_grad(std::span<const double> h, const double* dz,
                                    const double* hidden_act, std::vector<double>& grad) const {
    const std::size_t in = static_cast<std::size_t>(cfg_.input_dim);
    const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
    if (cfg_.arch == BackboneConfig::Arch::Linear) {
        double* gw = grad.data();
        double* gb = grad.data() + k * in;
        for (std::size_t c = 0; c < k; ++c) {
            kernels::axpy(dz[c], h.data(), gw + c * in, in);
            gb[c] += dz[c];
        }
        return;
    }
    const std::size_t hid = static_cast<std::size_t>(cfg_.hidden);
    const double* w2 = params_.data() + hid * in + hid;
    double* gw1 = grad.data();
    double* gb1 = gw1 + hid * in;
    double* gw2 = gb1 + hid;
    double* gb2 = gw2 + k * hid;
    std::vector<double> dhidden(hid, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        kernels::axpy(dz[c], hidden_act, gw2 + c * hid, hid);
        gb2[c] += dz[c];
        kernels::axpy(dz[c], w2 + c * hid, dhidden.data(), hid);
    }
    for (std::size_t j = 0; j < hid; ++j) {
        const double dpre = dhidden[j] * (1.0 - hidden_act[j] * hidden_act[j]);
        kernels::axpy(dpre, h.data(), gw1 + j * in, in);
        gb1[j] += dpre;
    }
}

void BackboneModel::apply_update(const std::vector<double>& grad, double lr, double momentum) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        velocity_[i] = momentum * velocity_[i] - lr * grad[i];
        params_[i] += velocity_[i];
    }
}

namespace {
constexpr double kProbFloor = 1e-12;
}

double BackboneModel::step_supervised(const std::vector<const double*>& h,
                                      const std::vector<Label>& y, double lr, double momentum) {
    if (h.empty() || h.size() != y.size()) throw ValidationError("step_supervised: bad batch");
    const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
    const std::size_t in = static_cast<std::size_t>(cfg_.input_dim);
    const double inv_b = 1.0 / static_cast<double>(h.size());
    std::vector<double> grad(params_.size(), 0.0);
    std::vector<double> z(k);
    std::vector<double> hidden(cfg_.arch == BackboneConfig::Arch::Mlp
                                   ? static_cast<std::size_t>(cfg_.hidden)
                                   : 0);
    double loss = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        std::span<const double> hi(h[i], in);
        logits(hi, z.data(), hidden.data());
        std::vector<double> p = softmax(z);
        loss -= std::log(std::max(p[static_cast<std::size_t>(y[i])], kProbFloor)) * inv_b;
        for (std::size_t c = 0; c < k; ++c) {
            z[c] = (p[c] - (static_cast<Label>(c) == y[i] ? 1.0 : 0.0)) * inv_b;
        }
        accumulate_grad(hi, z.data(), hidden.data(), grad);
    }
    if (!std::isfinite(loss)) throw std::runtime_error("step_supervised: loss diverged");
    apply_update(grad, lr, momentum);
    return loss;
}

double BackboneModel::loss_supervised(const std::vector<const double*>& h,
                                      const std::vector<Label>& y) const {
    const std::size_t in = static_cast<std::size_t>(cfg_.input_dim);
    const double inv_b = 1.0 / static_cast<double>(h.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        std::vector<double> p = predict_proba({h[i], in});
        loss -= std::log(std::max(p[static_cast<std::size_t>(y[i])], kProbFloor)) * inv_b;
    }
    return loss;
}

namespace {

// Hard modes replace the target with a one-hot at its argmax (lowest index on
// ties); thresholded modes drop examples whose max is <= threshold.
struct DistillTarget {
    std::vector<double> q;
    bool keep = true;
};

DistillTarget resolve_target(const double* target, std::size_t k, DistillMode mode,
                             double threshold) {
    DistillTarget out;
    std::size_t arg = 0;
    double maxv = target[0];
    for (std::size_t c = 1; c < k; ++c) {
        if (target[c] > maxv) {
            maxv = target[c];
            arg = c;
        }
    }
    if ((mode == DistillMode::SoftThresh || mode == DistillMode::HardThresh) &&
        maxv <= threshold) {
        out.keep = false;
        return out;
    }
    if (mode == DistillMode::Hard || mode == DistillMode::HardThresh) {
        out.q.assign(k, 0.0);
        out.q[arg] = 1.0;
    } else {
        out.q.assign(target, target + k);
    }
    return out;
}

}  // namespace

BackboneModel::DistillResult BackboneModel::step_distill(
    const std::vector<const double*>& h, const std::vector<const double*>& targets,
    DistillMode mode, double threshold, double lr, double momentum) {
    if (h.empty() || h.size() != targets.size()) throw ValidationError("step_distill: bad batch");
    const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
    const std::size_t in = static_cast<std::size_t>(cfg_.input_dim);

    std::vector<DistillTarget> resolved(h.size());
    std::size_t used = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        resolved[i] = resolve_target(targets[i], k, mode, threshold);
        used += resolved[i].keep ? 1 : 0;
    }
    if (used == 0) {
        log::debug("step_distill: every example fell below the confidence threshold; no-op");
        return {0.0, 0};
    }
    const double inv_b = 1.0 / static_cast<double>(used);
    std::vector<double> grad(params_.size(), 0.0);
    std::vector<double> z(k);
    std::vector<double> hidden(cfg_.arch == BackboneConfig::Arch::Mlp
                                   ? static_cast<std::size_t>(cfg_.hidden)
                                   : 0);
    double loss = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!resolved[i].keep) continue;
        std::span<const double> hi(h[i], in);
        logits(hi, z.data(), hidden.data());
        std::vector<double> p = softmax(z);
        const std::vector<double>& q = resolved[i].q;
        for (std::size_t c = 0; c < k; ++c) {
            if (q[c] > 0.0) loss -= q[c] * std::log(std::max(p[c], kProbFloor)) * inv_b;
            z[c] = (p[c] - q[c]) * inv_b;
        }
        accumulate_grad(hi, z.data(), hidden.data(), grad);
    }
    if (!std::isfinite(loss)) throw std::runtime_error("step_distill: loss diverged");
    apply_update(grad, lr, momentum);
    return {loss, used};
}

BackboneModel::DistillResult BackboneModel::loss_distill(const std::vector<const double*>& h,
                                                         const std::vector<const double*>& targets,
                                                         DistillMode mode,
                                                         double threshold) const {
    const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
    const std::size_t in = static_cast<std::size_t>(cfg_.input_dim);
    double loss = 0.0;
    std::size_t used = 0;
    std::vector<double> per_example;
    for (std::size_t i = 0; i < h.size(); ++i) {
        DistillTarget t = resolve_target(targets[i], k, mode, threshold);
        if (!t.keep) continue;
        ++used;
        std::vector<double> p = predict_proba({h[i], in});
        double li = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (t.q[c] > 0.0) li -= t.q[c] * std::log(std::max(p[c], kProbFloor));
        }
        loss += li;
    }
    if (used == 0) return {0.0, 0};
    return {loss / static_cast<double>(used), used};
}

void BackboneModel::set_params(std::span<const double> p) {
    if (p.size() != params_.size()) throw ValidationError("backbone: parameter size mismatch");
    std::copy(p.begin(), p.end(), params_.begin());
}

json BackboneModel::checkpoint() const {
    json j;
    j["version"] = 1;
    j["arch"] = cfg_.arch == BackboneConfig::Arch::Linear ? "linear" : "mlp";
    j["hidden"] = cfg_.hidden;
    j["input_dim"] = cfg_.input_dim;
    j["num_classes"] = cfg_.num_classes;
    j["seed"] = cfg_.seed;
    j["params"] = params_;
    return j;
}

BackboneModel BackboneModel::from_checkpoint(const json& j) {
    BackboneConfig cfg;
    const std::string arch = j.at("arch").get<std::string>();
    if (arch == "linear") {
        cfg.arch = BackboneConfig::Arch::Linear;
    } else if (arch == "mlp") {
        cfg.arch = BackboneConfig::Arch::Mlp;
    } else {
        throw ValidationError("backbone checkpoint: unknown arch '" + arch + "'");
    }
    cfg.hidden = j.at("hidden").get<int>();
    cfg.input_dim = j.at("input_dim").get<int>();
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.seed = j.at("seed").get<uint64_t>();
    BackboneModel model = init(cfg);
    std::vector<double> params = j.at("params").get<std::vector<double>>();
    model.set_params(params);
    std::fill(model.velocity_.begin(), model.velocity_.end(), 0.0);
    return model;
}

}  // namespace ari
