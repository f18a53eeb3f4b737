#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypee/ad.hpp"
#include "hypee/dataset.hpp"
#include "hypee/model.hpp"

namespace hypee::trainer {

struct LossConfig {
    std::vector<double> exit_weights;  // w_i, one per exit
    double lambda = 0.2;
    bool stop_parent_gradient = false;
    // Alternative "mixed" strategy: each batch trains the classification head
    // of one sampled exit instead of the joint weighted sum.
    bool per_batch_exit_sampling = false;

    void validate(int num_exits) const;
};

struct CostModel {
    std::vector<double> cumulative_macs;  // strictly increasing, one per exit

    void validate() const;
    int num_exits() const { return static_cast<int>(cumulative_macs.size()); }
};

double macs_at_exit(const CostModel& cost, int exit_index);
// saved = 1 - macs(exit) / macs(final)
double macs_saved_fraction(const CostModel& cost, int exit_index);

// Cumulative multiply-accumulate counts derived from the layer shapes.
CostModel cost_model_from_config(const model::BackboneConfig& cfg);

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    // Decoupled weight decay; keeps embedding norms bounded (the asinh logits
    // otherwise reward unbounded radial growth).
    double weight_decay = 0.0;
    int epochs = 40;
    int batch_size = 32;
    double lr_decay = 0.5;
    int lr_decay_every = 20;  // epochs; <= 0 disables decay
};

struct EpochMetrics {
    int epoch = 0;
    double mean_loss = 0.0;
    std::vector<double> exit_accuracy;
    std::vector<double> mean_spatial_norm;  // hyperbolic mode; empty otherwise
    double mean_entailment_violation = 0.0;
};

struct TrainResult {
    std::vector<EpochMetrics> history;
};

// ---- loss --------------------------------------------------------------------

// Numerically stable softmax cross-entropy: logsumexp(l) - l[label].
template <class S>
S cross_entropy_core(std::span<const S> logits, int label) {
    using std::exp;
    using std::log;
    using hypee::ad::exp;
    using hypee::ad::log;
    using hypee::ad::value_of;

    double max_val = value_of(logits[0]);
    for (size_t i = 1; i < logits.size(); ++i) max_val = std::max(max_val, value_of(logits[i]));
    S sum = exp(logits[0] - max_val);
    for (size_t i = 1; i < logits.size(); ++i) sum += exp(logits[i] - max_val);
    return log(sum) + max_val - logits[static_cast<size_t>(label)];
}

// L_total = sum_i w_i * CE(l_i, y) + lambda * sum_i L_entail(h_{i+1}, h_i).
// The entailment sum runs over consecutive exits only and applies to the
// hyperbolic mode; the euclidean baseline ignores lambda.
template <class S>
S total_loss_core(const model::BackboneConfig& cfg,
                  const std::vector<model::ExitActivation<S>>& exits, int label,
                  const LossConfig& loss, double cone_k, double c) {
    using hypee::ad::detach;

    if (label < 0 || label >= cfg.num_classes) {
        throw std::invalid_argument("total_loss: label " + std::to_string(label) +
                                    " out of range [0, " + std::to_string(cfg.num_classes) + ")");
    }
    S total = cross_entropy_core(std::span<const S>(exits[0].logits), label) *
              loss.exit_weights[0];
    for (size_t i = 1; i < exits.size(); ++i) {
        if (loss.exit_weights[i] == 0.0) continue;
        total += cross_entropy_core(std::span<const S>(exits[i].logits), label) *
                 loss.exit_weights[i];
    }
    if (cfg.mode == model::LatentMode::hyperbolic && loss.lambda > 0.0) {
        for (size_t i = 0; i + 1 < exits.size(); ++i) {
            std::span<const S> parent(exits[i].embedding);
            std::span<const S> child(exits[i + 1].embedding);
            if (loss.stop_parent_gradient) {
                std::vector<S> frozen;
                frozen.reserve(parent.size());
                for (const S& p : parent) frozen.push_back(detach(p));
                total += entailment::entailment_loss_pair_core(std::span<const S>(frozen), child,
                                                               cone_k, c) *
                         loss.lambda;
            } else {
                total += entailment::entailment_loss_pair_core(parent, child, cone_k, c) *
                         loss.lambda;
            }
        }
    }
    return total;
}

double total_loss(const model::MultiExitModel& m, std::span<const double> input, int label,
                  const LossConfig& loss, const entailment::ConeConfig& cone);

// ---- training ----------------------------------------------------------------

TrainResult train(model::MultiExitModel& m, const Dataset& data, const LossConfig& loss,
                  const entailment::ConeConfig& cone, const OptimizerConfig& opt, uint64_t seed);

EpochMetrics evaluate_model(const model::MultiExitModel& m, const Dataset& data,
                            const LossConfig& loss, const entailment::ConeConfig& cone);

// ---- gradient verification ----------------------------------------------------

struct GradCheckGroup {
    std::string name;
    double max_rel_error = 0.0;
    int checked = 0;
    int skipped_nondifferentiable = 0;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double max_rel_error = 0.0;
    int total_skipped = 0;
    std::vector<std::string> notes;

    bool within(double tolerance) const { return max_rel_error <= tolerance; }
};

// Central finite differences (default step 1e-5) against the reverse-mode
// gradient of the full objective on one labeled sample. Coordinates whose
// +h/-h evaluations take different clamp/hinge branches are reported as
// "nondifferentiable point skipped".
GradCheckReport grad_check(const model::MultiExitModel& m, std::span<const double> input,
                           int label, const LossConfig& loss,
                           const entailment::ConeConfig& cone, double step = 1e-5);

// Loss with gradient for external callers; returns the tape's branch-margin
// infimum so callers can reject samples too close to a nondifferentiable
// boundary.
struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;
    double min_branch_margin = 0.0;
};

LossGrad loss_with_gradient(const model::MultiExitModel& m, std::span<const double> input,
                            int label, const LossConfig& loss,
                            const entailment::ConeConfig& cone);

} // namespace hypee::trainer
