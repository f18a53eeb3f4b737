#include "hypee/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hypee::trainer {

using ad::Tape;
using ad::Var;

void LossConfig::validate(int num_exits) const {
    if (static_cast<int>(exit_weights.size()) != num_exits) {
        throw std::invalid_argument("loss: need one exit weight per exit (" +
                                    std::to_string(num_exits) + ")");
    }
    bool any = false;
    for (double w : exit_weights) {
        if (w < 0.0) throw std::invalid_argument("loss: exit weights must be nonnegative");
        any = any || w > 0.0;
    }
    if (!any) throw std::invalid_argument("loss: at least one exit weight must be positive");
    if (lambda < 0.0) throw std::invalid_argument("loss: lambda must be nonnegative");
}

void CostModel::validate() const {
    if (cumulative_macs.empty()) throw std::invalid_argument("cost model: empty");
    for (size_t i = 0; i < cumulative_macs.size(); ++i) {
        if (!(cumulative_macs[i] > 0.0)) {
            throw std::invalid_argument("cost model: costs must be positive");
        }
        if (i > 0 && !(cumulative_macs[i] > cumulative_macs[i - 1])) {
            throw std::invalid_argument("cost model: cumulative costs must be strictly increasing");
        }
    }
}

double macs_at_exit(const CostModel& cost, int exit_index) {
    if (exit_index < 0 || exit_index >= cost.num_exits()) {
        throw std::invalid_argument("cost model: exit index out of range");
    }
    return cost.cumulative_macs[static_cast<size_t>(exit_index)];
}

double macs_saved_fraction(const CostModel& cost, int exit_index) {
    return 1.0 - macs_at_exit(cost, exit_index) / cost.cumulative_macs.back();
}

CostModel cost_model_from_config(const model::BackboneConfig& cfg) {
    CostModel cost;
    double running = 0.0;
    size_t next_exit = 0;
    int in = cfg.input_dim;
    for (int b = 0; b < cfg.num_blocks(); ++b) {
        const int out = cfg.hidden_dims[static_cast<size_t>(b)];
        running += static_cast<double>(in) * out;
        in = out;
        while (next_exit < cfg.exit_after.size() && cfg.exit_after[next_exit] == b) {
            // projection + classification head attributed to the exit that runs them
            double head = static_cast<double>(out) * cfg.latent_dim;
            head += static_cast<double>(cfg.latent_dim + 1) * cfg.num_classes;
            cost.cumulative_macs.push_back(running + head);
            ++next_exit;
        }
    }
    cost.validate();
    return cost;
}

double total_loss(const model::MultiExitModel& m, std::span<const double> input, int label,
                  const LossConfig& loss, const entailment::ConeConfig& cone) {
    loss.validate(m.config.num_exits());
    const auto exits = model::forward_with_exits(m, input);
    return total_loss_core(m.config, exits, label, loss, cone.K, m.curvature.c);
}

namespace {

struct TapeForward {
    double loss = 0.0;
    int32_t loss_id = -1;
    std::vector<uint8_t> branch_log;
    double min_branch_margin = 0.0;
};

// Builds the full objective for one sample on `tape`; param leaves must
// already occupy node ids [0, params.size()).
TapeForward tape_loss(Tape& tape, std::vector<Var>& param_vars,
                      const model::MultiExitModel& m, std::span<const double> input, int label,
                      const LossConfig& loss, const entailment::ConeConfig& cone) {
    const auto exits = model::forward_exits_core<Var>(
        m.config, m.layout, std::span<const Var>(param_vars), input, m.curvature.c);
    Var total = total_loss_core(m.config, exits, label, loss, cone.K, m.curvature.c);
    TapeForward out;
    out.loss = total.v;
    out.loss_id = total.id;
    out.branch_log = tape.branch_log();
    out.min_branch_margin = tape.min_branch_margin();
    return out;
}

std::vector<Var> make_param_leaves(Tape& tape, std::span<const double> params) {
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (double p : params) vars.push_back(ad::leaf(tape, p));
    return vars;
}

void project_heads(model::MultiExitModel& m) {
    if (m.config.mode != model::LatentMode::hyperbolic) return;
    for (int e = 0; e < m.config.num_exits(); ++e) {
        auto mlr = m.group("exit" + std::to_string(e) + ".mlr");
        m.spacelike_projections += classifier::project_spacelike_flat(
            mlr, static_cast<size_t>(m.config.num_classes));
    }
}

} // namespace

LossGrad loss_with_gradient(const model::MultiExitModel& m, std::span<const double> input,
                            int label, const LossConfig& loss,
                            const entailment::ConeConfig& cone) {
    Tape tape;
    auto params = make_param_leaves(tape, m.params);
    const auto fwd = tape_loss(tape, params, m, input, label, loss, cone);
    std::vector<double> adjoint;
    tape.gradient(fwd.loss_id, adjoint);
    LossGrad out;
    out.loss = fwd.loss;
    out.grad.assign(adjoint.begin(), adjoint.begin() + static_cast<long>(m.params.size()));
    out.min_branch_margin = fwd.min_branch_margin;
    return out;
}

EpochMetrics evaluate_model(const model::MultiExitModel& m, const Dataset& data,
                            const LossConfig& loss, const entailment::ConeConfig& cone) {
    const int n_exits = m.config.num_exits();
    EpochMetrics metrics;
    metrics.exit_accuracy.assign(static_cast<size_t>(n_exits), 0.0);
    const bool hyp = m.config.mode == model::LatentMode::hyperbolic;
    if (hyp) metrics.mean_spatial_norm.assign(static_cast<size_t>(n_exits), 0.0);

    double loss_sum = 0.0;
    double violation_sum = 0.0;
    size_t violation_count = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        const auto exits = model::forward_with_exits(m, data.features[i]);
        loss_sum += total_loss_core(m.config, exits, data.labels[i], loss, cone.K, m.curvature.c);
        for (int e = 0; e < n_exits; ++e) {
            const auto& out = exits[static_cast<size_t>(e)];
            if (classifier::argmax_lowest(out.logits) == static_cast<size_t>(data.labels[i])) {
                metrics.exit_accuracy[static_cast<size_t>(e)] += 1.0;
            }
            if (hyp) {
                metrics.mean_spatial_norm[static_cast<size_t>(e)] += std::sqrt(
                    geometry::spatial_norm_sq_core(std::span<const double>(out.embedding)));
            }
        }
        if (hyp) {
            for (int e = 0; e + 1 < n_exits; ++e) {
                violation_sum += entailment::entailment_loss_pair_core(
                    std::span<const double>(exits[static_cast<size_t>(e)].embedding),
                    std::span<const double>(exits[static_cast<size_t>(e) + 1].embedding), cone.K,
                    m.curvature.c);
                ++violation_count;
            }
        }
    }
    const double inv = data.size() ? 1.0 / static_cast<double>(data.size()) : 0.0;
    metrics.mean_loss = loss_sum * inv;
    for (double& a : metrics.exit_accuracy) a *= inv;
    for (double& s : metrics.mean_spatial_norm) s *= inv;
    metrics.mean_entailment_violation =
        violation_count ? violation_sum / static_cast<double>(violation_count) : 0.0;
    return metrics;
}

TrainResult train(model::MultiExitModel& m, const Dataset& data, const LossConfig& loss,
                  const entailment::ConeConfig& cone, const OptimizerConfig& opt, uint64_t seed) {
    data.validate();
    loss.validate(m.config.num_exits());
    if (opt.epochs < 0 || opt.batch_size < 1) {
        throw std::invalid_argument("optimizer: epochs must be >= 0 and batch_size >= 1");
    }
    TrainResult result;
    if (opt.epochs == 0) return result;
    if (data.empty()) throw std::invalid_argument("train: dataset is empty");

    rng::Engine shuffler(seed);
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});

    const size_t P = m.params.size();
    std::vector<double> velocity(P, 0.0);
    std::vector<double> adam_m(P, 0.0);
    std::vector<double> adam_v(P, 0.0);
    std::vector<double> grad(P, 0.0);
    std::vector<double> adjoint;
    long adam_t = 0;

    Tape tape;
    double lr = opt.learning_rate;

    std::vector<size_t> sampleable_exits;
    for (size_t e = 0; e < loss.exit_weights.size(); ++e) {
        if (loss.exit_weights[e] > 0.0) sampleable_exits.push_back(e);
    }

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        shuffler.shuffle(order);
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(opt.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(opt.batch_size));
            tape.clear();
            auto params = make_param_leaves(tape, m.params);

            LossConfig batch_cfg = loss;
            if (loss.per_batch_exit_sampling) {
                const size_t pick =
                    sampleable_exits[shuffler.below(sampleable_exits.size())];
                for (size_t e = 0; e < batch_cfg.exit_weights.size(); ++e) {
                    if (e != pick) batch_cfg.exit_weights[e] = 0.0;
                }
            }

            Var batch_loss = ad::constant(tape, 0.0);
            for (size_t j = start; j < end; ++j) {
                const size_t idx = order[j];
                const auto fwd_exits = model::forward_exits_core<Var>(
                    m.config, m.layout, std::span<const Var>(params), data.features[idx],
                    m.curvature.c);
                batch_loss += total_loss_core(m.config, fwd_exits, data.labels[idx], batch_cfg,
                                              cone.K, m.curvature.c);
            }
            batch_loss = batch_loss * (1.0 / static_cast<double>(end - start));
            if (!std::isfinite(batch_loss.v)) {
                throw NumericError("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch starting at sample " +
                                   std::to_string(start));
            }

            tape.gradient(batch_loss.id, adjoint);
            for (size_t p = 0; p < P; ++p) grad[p] = adjoint[p];

            if (opt.kind == OptimizerKind::sgd) {
                for (size_t p = 0; p < P; ++p) {
                    velocity[p] = opt.momentum * velocity[p] - lr * grad[p];
                    m.params[p] += velocity[p];
                }
            } else {
                ++adam_t;
                const double bc1 = 1.0 - std::pow(opt.adam_beta1, static_cast<double>(adam_t));
                const double bc2 = 1.0 - std::pow(opt.adam_beta2, static_cast<double>(adam_t));
                for (size_t p = 0; p < P; ++p) {
                    adam_m[p] = opt.adam_beta1 * adam_m[p] + (1.0 - opt.adam_beta1) * grad[p];
                    adam_v[p] = opt.adam_beta2 * adam_v[p] +
                                (1.0 - opt.adam_beta2) * grad[p] * grad[p];
                    m.params[p] -= lr * (adam_m[p] / bc1) /
                                   (std::sqrt(adam_v[p] / bc2) + opt.adam_eps);
                }
            }
            if (opt.weight_decay > 0.0) {
                const double shrink = 1.0 - lr * opt.weight_decay;
                for (size_t p = 0; p < P; ++p) m.params[p] *= shrink;
            }
            project_heads(m);
        }
        if (opt.lr_decay_every > 0 && epoch % opt.lr_decay_every == 0) lr *= opt.lr_decay;

        EpochMetrics metrics = evaluate_model(m, data, loss, cone);
        metrics.epoch = epoch;
        if (!std::isfinite(metrics.mean_loss)) {
            throw NumericError("training diverged: non-finite epoch loss at epoch " +
                               std::to_string(epoch));
        }
        result.history.push_back(std::move(metrics));
    }
    return result;
}

GradCheckReport grad_check(const model::MultiExitModel& m, std::span<const double> input,
                           int label, const LossConfig& loss,
                           const entailment::ConeConfig& cone, double step) {
    loss.validate(m.config.num_exits());
    const LossGrad analytic = loss_with_gradient(m, input, label, loss, cone);

    Tape tape;
    auto eval = [&](const std::vector<double>& theta, std::vector<uint8_t>& log_out) {
        tape.clear();
        std::vector<Var> params;
        params.reserve(theta.size());
        for (double p : theta) params.push_back(ad::leaf(tape, p));
        const auto fwd = tape_loss(tape, params, m, input, label, loss, cone);
        log_out = fwd.branch_log;
        return fwd.loss;
    };

    GradCheckReport report;
    std::vector<double> theta = m.params;
    std::vector<uint8_t> log_plus, log_minus;

    for (const auto& g : m.layout.groups) {
        GradCheckGroup group;
        group.name = g.name;
        for (size_t i = g.offset; i < g.offset + g.size; ++i) {
            const double saved = theta[i];
            theta[i] = saved + step;
            const double f_plus = eval(theta, log_plus);
            theta[i] = saved - step;
            const double f_minus = eval(theta, log_minus);
            theta[i] = saved;

            if (log_plus != log_minus) {
                ++group.skipped_nondifferentiable;
                continue;
            }
            const double fd = (f_plus - f_minus) / (2.0 * step);
            const double an = analytic.grad[i];
            const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
            group.max_rel_error = std::max(group.max_rel_error, std::abs(fd - an) / scale);
            ++group.checked;
        }
        if (group.skipped_nondifferentiable > 0) {
            report.notes.push_back(group.name + ": nondifferentiable point skipped (" +
                                   std::to_string(group.skipped_nondifferentiable) +
                                   " coordinates)");
        }
        report.max_rel_error = std::max(report.max_rel_error, group.max_rel_error);
        report.total_skipped += group.skipped_nondifferentiable;
        report.groups.push_back(std::move(group));
    }
    return report;
}

} // namespace hypee::trainer
