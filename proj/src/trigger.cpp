#include "hypee/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "hypee/data_io.hpp"

namespace hypee::trigger {

double gaussian_pdf(double x, double mean, double stddev) {
    if (!(stddev > 0.0)) {
        throw std::invalid_argument("gaussian_pdf: stddev must be positive, got " +
                                    std::to_string(stddev));
    }
    static constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
    const double z = (x - mean) / stddev;
    return kInvSqrt2Pi / stddev * std::exp(-0.5 * z * z);
}

double softmax_entropy(std::span<const double> logits) {
    double max_val = logits[0];
    for (double l : logits) max_val = std::max(max_val, l);
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - max_val);
    double entropy = 0.0;
    for (double l : logits) {
        const double p = std::exp(l - max_val) / sum;
        if (p > 0.0) entropy -= p * std::log(p);
    }
    return entropy;
}

std::string to_string(TriggerReason r) {
    switch (r) {
        case TriggerReason::global_pass_class_pass: return "global_pass+class_pass";
        case TriggerReason::global_pass_no_class_stats: return "global_pass+no_class_stats";
        case TriggerReason::fallthrough_final: return "fallthrough_final";
    }
    return "?";
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::class_specific: return "class_specific_norm";
        case Strategy::global_only: return "global_norm";
        case Strategy::entropy: return "entropy";
    }
    return "?";
}

namespace {

struct Accumulator {
    double sum = 0.0;
    double sum_sq = 0.0;
    long n = 0;

    void add(double x) {
        sum += x;
        sum_sq += x * x;
        ++n;
    }

    GaussianStats finish(double sigma_floor) const {
        GaussianStats g;
        g.count = n;
        if (n == 0) return g;
        g.mean = sum / static_cast<double>(n);
        const double var = std::max(0.0, sum_sq / static_cast<double>(n) - g.mean * g.mean);
        g.stddev = std::max(std::sqrt(var), sigma_floor);
        return g;
    }
};

double max_softmax_prob(std::span<const double> logits) {
    double max_val = logits[0];
    for (double l : logits) max_val = std::max(max_val, l);
    double sum = 0.0;
    double top = 0.0;
    for (double l : logits) {
        const double e = std::exp(l - max_val);
        sum += e;
        top = std::max(top, e);
    }
    return top / sum;
}

} // namespace

NormStats calibrate(const model::MultiExitModel& m, const Dataset& reference,
                    const TriggerOptions& options) {
    if (m.config.mode != model::LatentMode::hyperbolic) {
        throw std::invalid_argument("calibrate: norm statistics require a hyperbolic model");
    }
    reference.validate();
    if (reference.empty()) throw std::invalid_argument("calibrate: empty reference set");

    const int n_exits = m.config.num_exits();
    const int C = m.config.num_classes;

    std::vector<Accumulator> g_correct(static_cast<size_t>(n_exits));
    std::vector<Accumulator> g_incorrect(static_cast<size_t>(n_exits));
    std::vector<Accumulator> conf_correct(static_cast<size_t>(n_exits));
    std::vector<Accumulator> conf_incorrect(static_cast<size_t>(n_exits));
    std::vector<std::vector<Accumulator>> cls_correct(
        static_cast<size_t>(n_exits), std::vector<Accumulator>(static_cast<size_t>(C)));
    std::vector<std::vector<Accumulator>> cls_incorrect(
        static_cast<size_t>(n_exits), std::vector<Accumulator>(static_cast<size_t>(C)));

    for (size_t i = 0; i < reference.size(); ++i) {
        const auto exits = model::forward_with_exits(m, reference.features[i]);
        for (int e = 0; e < n_exits; ++e) {
            const auto& out = exits[static_cast<size_t>(e)];
            const double norm = std::sqrt(
                geometry::spatial_norm_sq_core(std::span<const double>(out.embedding)));
            const size_t pred = classifier::argmax_lowest(out.logits);
            const double conf = max_softmax_prob(out.logits);
            const bool correct = pred == static_cast<size_t>(reference.labels[i]);
            auto& global = correct ? g_correct[static_cast<size_t>(e)]
                                   : g_incorrect[static_cast<size_t>(e)];
            auto& confidence = correct ? conf_correct[static_cast<size_t>(e)]
                                       : conf_incorrect[static_cast<size_t>(e)];
            auto& per_class = correct ? cls_correct[static_cast<size_t>(e)][pred]
                                      : cls_incorrect[static_cast<size_t>(e)][pred];
            global.add(norm);
            confidence.add(conf);
            per_class.add(norm);
        }
    }

    NormStats stats;
    stats.options = options;
    stats.num_classes = C;
    stats.exits.resize(static_cast<size_t>(n_exits));
    for (int e = 0; e < n_exits; ++e) {
        auto& ex = stats.exits[static_cast<size_t>(e)];
        ex.global_correct = g_correct[static_cast<size_t>(e)].finish(options.sigma_floor);
        ex.global_incorrect = g_incorrect[static_cast<size_t>(e)].finish(options.sigma_floor);
        ex.confidence_correct = conf_correct[static_cast<size_t>(e)].finish(options.sigma_floor);
        ex.confidence_incorrect =
            conf_incorrect[static_cast<size_t>(e)].finish(options.sigma_floor);

        for (int side = 0; side < 2; ++side) {
            GaussianStats& missing = side == 0 ? ex.global_correct : ex.global_incorrect;
            const GaussianStats& present = side == 0 ? ex.global_incorrect : ex.global_correct;
            if (missing.count > 0) continue;
            if (!options.sigma_floor_fallback) {
                throw std::invalid_argument(
                    "calibrate: exit " + std::to_string(e) + " has zero " +
                    (side == 0 ? "correct" : "incorrect") +
                    " predictions on the reference set; supply a larger reference set or enable "
                    "sigma_floor_fallback");
            }
            // Wide substitute: same center, 10x spread. The gate then passes
            // near the present side's mean and defers in the tails. The
            // confidence record of the same partition is empty too and gets
            // the same treatment.
            missing.mean = present.mean;
            missing.stddev = 10.0 * std::max(present.stddev, options.sigma_floor);
            missing.count = 0;
            GaussianStats& conf_missing =
                side == 0 ? ex.confidence_correct : ex.confidence_incorrect;
            const GaussianStats& conf_present =
                side == 0 ? ex.confidence_incorrect : ex.confidence_correct;
            conf_missing.mean = conf_present.mean;
            conf_missing.stddev = 10.0 * std::max(conf_present.stddev, options.sigma_floor);
            conf_missing.count = 0;
        }

        for (int cls = 0; cls < C; ++cls) {
            const auto correct =
                cls_correct[static_cast<size_t>(e)][static_cast<size_t>(cls)].finish(
                    options.sigma_floor);
            const auto incorrect =
                cls_incorrect[static_cast<size_t>(e)][static_cast<size_t>(cls)].finish(
                    options.sigma_floor);
            if (correct.count >= options.min_class_support &&
                incorrect.count >= options.min_class_support) {
                ex.per_class[cls] = ClassNormStats{correct, incorrect};
            }
        }
    }
    return stats;
}

namespace {

TriggerDecision run_gates(const model::MultiExitModel& m, const NormStats& stats,
                          std::span<const double> input, bool class_stage) {
    if (stats.exits.size() != static_cast<size_t>(m.config.num_exits())) {
        throw std::invalid_argument("decide: stats were calibrated for a different exit layout");
    }
    model::ForwardCursor cursor(m, input);
    const int n_exits = m.config.num_exits();

    for (int e = 0; e < n_exits - 1; ++e) {
        const auto& out = cursor.exit_output(e);
        const auto& ex = stats.exits[static_cast<size_t>(e)];
        const double norm =
            std::sqrt(geometry::spatial_norm_sq_core(std::span<const double>(out.embedding)));

        const double p_correct = gaussian_pdf(norm, ex.global_correct.mean,
                                              ex.global_correct.stddev);
        const double p_incorrect = gaussian_pdf(norm, ex.global_incorrect.mean,
                                                ex.global_incorrect.stddev);
        if (!(p_correct > p_incorrect)) continue;  // strict: ties defer

        if (stats.options.use_confidence_gate) {
            const double conf = max_softmax_prob(out.logits);
            const double pc = gaussian_pdf(conf, ex.confidence_correct.mean,
                                           ex.confidence_correct.stddev);
            const double pi = gaussian_pdf(conf, ex.confidence_incorrect.mean,
                                           ex.confidence_incorrect.stddev);
            if (!(pc > pi)) continue;
        }

        const int pred = static_cast<int>(classifier::argmax_lowest(out.logits));
        if (!class_stage) {
            return {e, pred, TriggerReason::global_pass_no_class_stats, norm,
                    cursor.blocks_evaluated()};
        }
        const auto it = ex.per_class.find(pred);
        if (it == ex.per_class.end()) {
            // Algorithm's Else branch: no class statistics, exit on the global pass.
            return {e, pred, TriggerReason::global_pass_no_class_stats, norm,
                    cursor.blocks_evaluated()};
        }
        const double pc = gaussian_pdf(norm, it->second.correct.mean, it->second.correct.stddev);
        const double pi = gaussian_pdf(norm, it->second.incorrect.mean,
                                       it->second.incorrect.stddev);
        if (pc > pi) {
            return {e, pred, TriggerReason::global_pass_class_pass, norm,
                    cursor.blocks_evaluated()};
        }
    }

    const auto& final_out = cursor.exit_output(n_exits - 1);
    const double norm = std::sqrt(
        geometry::spatial_norm_sq_core(std::span<const double>(final_out.embedding)));
    return {n_exits - 1, static_cast<int>(classifier::argmax_lowest(final_out.logits)),
            TriggerReason::fallthrough_final, norm, cursor.blocks_evaluated()};
}

} // namespace

TriggerDecision decide(const model::MultiExitModel& m, const NormStats& stats,
                       std::span<const double> input) {
    return run_gates(m, stats, input, /*class_stage=*/true);
}

TriggerDecision decide_global_only(const model::MultiExitModel& m, const NormStats& stats,
                                   std::span<const double> input) {
    return run_gates(m, stats, input, /*class_stage=*/false);
}

TriggerDecision entropy_decide(const model::MultiExitModel& m,
                               std::span<const double> thresholds,
                               std::span<const double> input) {
    const int n_exits = m.config.num_exits();
    if (thresholds.size() != static_cast<size_t>(n_exits - 1)) {
        throw std::invalid_argument("entropy_decide: need one threshold per gate (" +
                                    std::to_string(n_exits - 1) + ")");
    }
    const double max_entropy = std::log(static_cast<double>(m.config.num_classes));
    for (double t : thresholds) {
        if (!(t > 0.0) || !(t < max_entropy)) {
            throw std::invalid_argument("entropy_decide: thresholds must lie in (0, ln C)");
        }
    }
    model::ForwardCursor cursor(m, input);
    for (int e = 0; e < n_exits - 1; ++e) {
        const auto& out = cursor.exit_output(e);
        if (softmax_entropy(out.logits) < thresholds[static_cast<size_t>(e)]) {
            const double norm = std::sqrt(
                geometry::spatial_norm_sq_core(std::span<const double>(out.embedding)));
            return {e, static_cast<int>(classifier::argmax_lowest(out.logits)),
                    TriggerReason::global_pass_no_class_stats, norm, cursor.blocks_evaluated()};
        }
    }
    const auto& final_out = cursor.exit_output(n_exits - 1);
    const double norm = std::sqrt(
        geometry::spatial_norm_sq_core(std::span<const double>(final_out.embedding)));
    return {n_exits - 1, static_cast<int>(classifier::argmax_lowest(final_out.logits)),
            TriggerReason::fallthrough_final, norm, cursor.blocks_evaluated()};
}

double mixture_macs_saved(std::span<const double> fractions, const trainer::CostModel& cost) {
    if (fractions.size() != static_cast<size_t>(cost.num_exits())) {
        throw std::invalid_argument("mixture_macs_saved: fraction/cost length mismatch");
    }
    double saved = 0.0;
    for (size_t i = 0; i < fractions.size(); ++i) {
        saved += fractions[i] * trainer::macs_saved_fraction(cost, static_cast<int>(i));
    }
    return saved;
}

namespace {

TriggerReport report_from_decisions(const std::vector<TriggerDecision>& decisions,
                                    const Dataset& eval_set, const trainer::CostModel& cost,
                                    int n_exits) {
    TriggerReport report;
    report.total = static_cast<long>(decisions.size());
    report.triggered_count.assign(static_cast<size_t>(n_exits), 0);
    std::vector<long> correct(static_cast<size_t>(n_exits), 0);

    long total_correct = 0;
    for (size_t i = 0; i < decisions.size(); ++i) {
        const auto& d = decisions[i];
        ++report.triggered_count[static_cast<size_t>(d.exit_taken)];
        if (d.predicted_class == eval_set.labels[i]) {
            ++correct[static_cast<size_t>(d.exit_taken)];
            ++total_correct;
        }
    }

    report.triggered_fraction.assign(static_cast<size_t>(n_exits), 0.0);
    report.correct_fraction.assign(static_cast<size_t>(n_exits), 0.0);
    report.incorrect_fraction.assign(static_cast<size_t>(n_exits), 0.0);
    for (int e = 0; e < n_exits; ++e) {
        const long n = report.triggered_count[static_cast<size_t>(e)];
        report.triggered_fraction[static_cast<size_t>(e)] =
            static_cast<double>(n) / static_cast<double>(report.total);
        if (n > 0) {
            report.correct_fraction[static_cast<size_t>(e)] =
                static_cast<double>(correct[static_cast<size_t>(e)]) / static_cast<double>(n);
            report.incorrect_fraction[static_cast<size_t>(e)] =
                1.0 - report.correct_fraction[static_cast<size_t>(e)];
        }
    }
    report.accuracy = static_cast<double>(total_correct) / static_cast<double>(report.total);
    report.macs_saved = mixture_macs_saved(report.triggered_fraction, cost);
    return report;
}

} // namespace

TriggerReport evaluate_trigger(const model::MultiExitModel& m, const NormStats& stats,
                               const Dataset& eval_set, const trainer::CostModel& cost,
                               Strategy strategy) {
    eval_set.validate();
    if (eval_set.empty()) throw std::invalid_argument("evaluate_trigger: empty eval set");
    if (cost.num_exits() != m.config.num_exits()) {
        throw std::invalid_argument("evaluate_trigger: cost model exit count mismatch");
    }
    if (strategy == Strategy::entropy) {
        throw std::invalid_argument("evaluate_trigger: use evaluate_entropy_trigger");
    }
    std::vector<TriggerDecision> decisions;
    decisions.reserve(eval_set.size());
    for (const auto& x : eval_set.features) {
        decisions.push_back(strategy == Strategy::class_specific
                                ? decide(m, stats, x)
                                : decide_global_only(m, stats, x));
    }
    return report_from_decisions(decisions, eval_set, cost, m.config.num_exits());
}

TriggerReport evaluate_entropy_trigger(const model::MultiExitModel& m,
                                       std::span<const double> thresholds,
                                       const Dataset& eval_set, const trainer::CostModel& cost) {
    eval_set.validate();
    if (eval_set.empty()) throw std::invalid_argument("evaluate_trigger: empty eval set");
    std::vector<TriggerDecision> decisions;
    decisions.reserve(eval_set.size());
    for (const auto& x : eval_set.features) {
        decisions.push_back(entropy_decide(m, thresholds, x));
    }
    return report_from_decisions(decisions, eval_set, cost, m.config.num_exits());
}

namespace {

nlohmann::json gaussian_to_json(const GaussianStats& g) {
    return {{"mean", g.mean}, {"std", g.stddev}, {"count", g.count}};
}

GaussianStats gaussian_from_json(const nlohmann::json& j) {
    return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("count").get<long>()};
}

} // namespace

void save_norm_stats(const NormStats& stats, const std::filesystem::path& path,
                     const std::string& config_hash) {
    nlohmann::json j;
    j["format"] = "hypee-norm-stats";
    j["version"] = 1;
    j["config_hash"] = config_hash;
    j["num_classes"] = stats.num_classes;
    j["options"] = {
        {"sigma_floor", stats.options.sigma_floor},
        {"min_class_support", stats.options.min_class_support},
        {"sigma_floor_fallback", stats.options.sigma_floor_fallback},
        {"use_confidence_gate", stats.options.use_confidence_gate},
    };
    nlohmann::json exits = nlohmann::json::array();
    for (size_t e = 0; e < stats.exits.size(); ++e) {
        const auto& ex = stats.exits[e];
        nlohmann::json entry;
        entry["exit"] = e;
        entry["global"] = {{"correct", gaussian_to_json(ex.global_correct)},
                           {"incorrect", gaussian_to_json(ex.global_incorrect)}};
        entry["confidence"] = {{"correct", gaussian_to_json(ex.confidence_correct)},
                               {"incorrect", gaussian_to_json(ex.confidence_incorrect)}};
        nlohmann::json classes = nlohmann::json::array();
        for (const auto& [cls, record] : ex.per_class) {
            classes.push_back({{"class", cls},
                               {"correct", gaussian_to_json(record.correct)},
                               {"incorrect", gaussian_to_json(record.incorrect)}});
        }
        entry["classes"] = classes;
        exits.push_back(std::move(entry));
    }
    j["exits"] = exits;
    data_io::atomic_write(path, j.dump(2) + "\n");
}

NormStats load_norm_stats(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Code::not_found, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(IoError::Code::bad_payload, path.string() + ": invalid JSON: " + e.what());
    }
    if (!j.contains("format") || j["format"] != "hypee-norm-stats") {
        throw IoError(IoError::Code::bad_magic, path.string() + ": not a norm-stats file");
    }
    try {
        NormStats stats;
        stats.num_classes = j.at("num_classes").get<int>();
        const auto& opt = j.at("options");
        stats.options.sigma_floor = opt.at("sigma_floor").get<double>();
        stats.options.min_class_support = opt.at("min_class_support").get<int>();
        stats.options.sigma_floor_fallback = opt.at("sigma_floor_fallback").get<bool>();
        stats.options.use_confidence_gate = opt.at("use_confidence_gate").get<bool>();
        for (const auto& entry : j.at("exits")) {
            ExitNormStats ex;
            ex.global_correct = gaussian_from_json(entry.at("global").at("correct"));
            ex.global_incorrect = gaussian_from_json(entry.at("global").at("incorrect"));
            ex.confidence_correct = gaussian_from_json(entry.at("confidence").at("correct"));
            ex.confidence_incorrect = gaussian_from_json(entry.at("confidence").at("incorrect"));
            for (const auto& cls : entry.at("classes")) {
                ex.per_class[cls.at("class").get<int>()] =
                    ClassNormStats{gaussian_from_json(cls.at("correct")),
                                   gaussian_from_json(cls.at("incorrect"))};
            }
            stats.exits.push_back(std::move(ex));
        }
        return stats;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoError::Code::bad_payload,
                      path.string() + ": malformed norm-stats: " + e.what());
    }
}

} // namespace hypee::trigger
