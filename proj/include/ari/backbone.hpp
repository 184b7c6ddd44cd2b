#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ari/types.hpp"

namespace ari {

enum class DistillMode { Soft, Hard, SoftThresh, HardThresh };
const char* distill_mode_name(DistillMode m);
DistillMode distill_mode_from_name(const std::string& name);

struct BackboneConfig {
    enum class Arch { Linear, Mlp };
    Arch arch = Arch::Linear;
    int hidden = 128;  // MLP only, tanh activation
    int input_dim = 0;
    int num_classes = 0;
    uint64_t seed = 1;
};

// The student b(.): softmax classifier over a fixed representation, trained
// by SGD (optional momentum) on cross-entropy against gold labels or against
// teacher distributions.
class BackboneModel {
public:
    static BackboneModel init(const BackboneConfig& cfg);

    const BackboneConfig& config() const { return cfg_; }

    std::vector<double> predict_proba(std::span<const double> h) const;

    // One gradient step on mean cross-entropy; returns the pre-step loss.
    double step_supervised(const std::vector<const double*>& h, const std::vector<Label>& y,
                           double lr, double momentum = 0.0);

    struct DistillResult {
        double loss = 0.0;
        std::size_t used = 0;  // examples surviving the confidence threshold
    };
    // Thresholded modes drop examples whose target max is <= threshold; an
    // all-dropped batch is a zero-loss no-op (logged).
    DistillResult step_distill(const std::vector<const double*>& h,
                               const std::vector<const double*>& targets, DistillMode mode,
                               double threshold, double lr, double momentum = 0.0);

    double loss_supervised(const std::vector<const double*>& h,
                           const std::vector<Label>& y) const;
    DistillResult loss_distill(const std::vector<const double*>& h,
                               const std::vector<const double*>& targets, DistillMode mode,
                               double threshold) const;

    std::size_t num_params() const { return params_.size(); }
    const std::vector<double>& params() const { return params_; }
    void set_params(std::span<const double> p);

    nlohmann::json checkpoint() const;
    static BackboneModel from_checkpoint(const nlohmann::json& j);

private:
    explicit BackboneModel(BackboneConfig cfg);

    void logits(std::span<const double> h, double* z, double* hidden_act) const;
    void accumulate_grad(std::span<const double> h, const double* dz, const double* hidden_act,
                         std::vector<double>& grad) const;
    void apply_update(const std::vector<double>& grad, double lr, double momentum);

    BackboneConfig cfg_;
    std::vector<double> params_;
    std::vector<double> velocity_;
};

// exp-normalized softmax, invariant to adding a constant to all logits
std::vector<double> softmax(std::span<const double> z);

}  // namespace ari
