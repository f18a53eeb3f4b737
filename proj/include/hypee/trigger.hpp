#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypee/dataset.hpp"
#include "hypee/model.hpp"
#include "hypee/trainer.hpp"

namespace hypee::trigger {

struct TriggerOptions {
    double sigma_floor = 1e-3;
    int min_class_support = 5;  // correct AND incorrect samples per (exit, class)
    // When an exit has no correct (or no incorrect) predictions on the
    // reference set, substitute a wide distribution for the missing side
    // instead of failing calibration.
    bool sigma_floor_fallback = false;
    // Optional combined gate: require the softmax-confidence comparison to
    // pass as well. Off by default; Algorithm 1's body compares norms only.
    bool use_confidence_gate = false;
};

struct GaussianStats {
    double mean = 0.0;
    double stddev = 0.0;  // population convention, floored
    long count = 0;
};

struct ClassNormStats {
    GaussianStats correct;
    GaussianStats incorrect;
};

struct ExitNormStats {
    GaussianStats global_correct;
    GaussianStats global_incorrect;
    // Confidence (max softmax probability) statistics; calibrated and stored,
    // unused by the norm-gate path.
    GaussianStats confidence_correct;
    GaussianStats confidence_incorrect;
    std::map<int, ClassNormStats> per_class;  // only classes meeting min_support
};

struct NormStats {
    std::vector<ExitNormStats> exits;  // gates 0..N-2 plus final-exit stats
    TriggerOptions options;
    int num_classes = 0;
};

double gaussian_pdf(double x, double mean, double stddev);

// Per-exit norm statistics partitioned by prediction correctness, computed on
// a labeled reference set.
NormStats calibrate(const model::MultiExitModel& m, const Dataset& reference,
                    const TriggerOptions& options = {});

enum class TriggerReason {
    global_pass_class_pass,
    global_pass_no_class_stats,
    fallthrough_final,
};

std::string to_string(TriggerReason r);

struct TriggerDecision {
    int exit_taken = 0;
    int predicted_class = 0;
    TriggerReason reason = TriggerReason::fallthrough_final;
    double norm = 0.0;
    int blocks_evaluated = 0;
};

// Sequential two-stage gate over exits 0..N-2 (global norm condition, then
// class-specific norm condition); exhausting all gates returns the final
// exit's prediction.
TriggerDecision decide(const model::MultiExitModel& m, const NormStats& stats,
                       std::span<const double> input);

// Global-condition-only variant (Table 2 "Global norm Exit" row).
TriggerDecision decide_global_only(const model::MultiExitModel& m, const NormStats& stats,
                                   std::span<const double> input);

// Entropy baseline: exit at the first gate whose softmax entropy falls below
// its threshold. Thresholds must lie in (0, ln C), one per gate.
TriggerDecision entropy_decide(const model::MultiExitModel& m,
                               std::span<const double> thresholds, std::span<const double> input);

double softmax_entropy(std::span<const double> logits);

struct TriggerReport {
    std::vector<double> triggered_fraction;  // per exit, sums to 1
    std::vector<double> correct_fraction;    // per exit, among triggered
    std::vector<double> incorrect_fraction;  // per exit, among triggered
    std::vector<long> triggered_count;
    double accuracy = 0.0;
    double macs_saved = 0.0;
    long total = 0;
};

enum class Strategy { class_specific, global_only, entropy };

std::string to_string(Strategy s);

TriggerReport evaluate_trigger(const model::MultiExitModel& m, const NormStats& stats,
                               const Dataset& eval_set, const trainer::CostModel& cost,
                               Strategy strategy);

TriggerReport evaluate_entropy_trigger(const model::MultiExitModel& m,
                                       std::span<const double> thresholds,
                                       const Dataset& eval_set, const trainer::CostModel& cost);

// Mixture bookkeeping used by both report paths: sum_i fraction_i * saved_i.
double mixture_macs_saved(std::span<const double> fractions, const trainer::CostModel& cost);

// Structured-text (JSON) serialization of the calibration document.
void save_norm_stats(const NormStats& stats, const std::filesystem::path& path,
                     const std::string& config_hash);
NormStats load_norm_stats(const std::filesystem::path& path);

} // namespace hypee::trigger
