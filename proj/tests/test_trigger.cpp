#include <doctest.h>

#include <cmath>

#include "hypee/data_io.hpp"
#include "hypee/trigger.hpp"

using namespace hypee;
using namespace hypee::trigger;
using model::BackboneConfig;
using model::LatentMode;

namespace {

BackboneConfig gate_config() {
    BackboneConfig cfg;
    cfg.input_dim = 6;
    cfg.hidden_dims = {8, 8, 8};
    cfg.exit_after = {0, 1, 2};
    cfg.latent_dim = 4;
    cfg.num_classes = 3;
    cfg.mode = LatentMode::hyperbolic;
    return cfg;
}

// Bias-only model whose exit embeddings have fixed spatial norms regardless
// of the input.
model::MultiExitModel rigged_model(const std::vector<double>& norms) {
    auto m = model::initialize_model(gate_config(), geometry::Curvature(1.0), 3);
    for (int e = 0; e < 3; ++e) {
        const std::string prefix = "exit" + std::to_string(e);
        for (double& w : m.group(prefix + ".proj.W")) w = 0.0;
        auto b = m.group(prefix + ".proj.b");
        for (size_t i = 0; i < b.size(); ++i) {
            b[i] = i == 0 ? std::asinh(norms[static_cast<size_t>(e)]) : 0.0;
        }
    }
    return m;
}

GaussianStats gstats(double mean, double stddev, long count = 100) {
    return {mean, stddev, count};
}

NormStats stats_for(const std::vector<std::pair<GaussianStats, GaussianStats>>& gates) {
    NormStats stats;
    stats.num_classes = 3;
    for (const auto& [correct, incorrect] : gates) {
        ExitNormStats ex;
        ex.global_correct = correct;
        ex.global_incorrect = incorrect;
        stats.exits.push_back(std::move(ex));
    }
    return stats;
}

Dataset gate_dataset(uint64_t seed, int samples_per_class = 40) {
    data_io::SyntheticSpec spec;
    spec.num_superclasses = 3;
    spec.subclasses_per_superclass = 1;
    spec.samples_per_class = samples_per_class;
    spec.input_dim = 6;
    spec.class_spread = 1.2;
    spec.superclass_separation = 3.0;
    spec.seed = seed;
    return data_io::generate_synthetic(spec);
}

// Algorithm transcription used as the equivalence oracle: straight-line walk
// over the gates with the full forward pass precomputed.
TriggerDecision oracle_decide(const model::MultiExitModel& m, const NormStats& stats,
                              std::span<const double> x, bool class_stage) {
    const auto exits = model::forward_with_exits(m, x);
    const int N = m.config.num_exits();
    for (int i = 0; i < N - 1; ++i) {
        const auto& out = exits[static_cast<size_t>(i)];
        double norm_sq = 0.0;
        for (size_t d = 1; d < out.embedding.size(); ++d) {
            norm_sq += out.embedding[d] * out.embedding[d];
        }
        const double norm = std::sqrt(norm_sq);
        const auto& ex = stats.exits[static_cast<size_t>(i)];
        const double p_correct = gaussian_pdf(norm, ex.global_correct.mean,
                                              ex.global_correct.stddev);
        const double p_incorrect = gaussian_pdf(norm, ex.global_incorrect.mean,
                                                ex.global_incorrect.stddev);
        if (p_correct > p_incorrect) {
            const int pred = static_cast<int>(classifier::argmax_lowest(out.logits));
            if (!class_stage) return {i, pred, TriggerReason::global_pass_no_class_stats, norm, 0};
            const auto it = ex.per_class.find(pred);
            if (it != ex.per_class.end()) {
                const double pc = gaussian_pdf(norm, it->second.correct.mean,
                                               it->second.correct.stddev);
                const double pi = gaussian_pdf(norm, it->second.incorrect.mean,
                                               it->second.incorrect.stddev);
                if (pc > pi) return {i, pred, TriggerReason::global_pass_class_pass, norm, 0};
            } else {
                return {i, pred, TriggerReason::global_pass_no_class_stats, norm, 0};
            }
        }
    }
    const auto& final_out = exits.back();
    double norm_sq = 0.0;
    for (size_t d = 1; d < final_out.embedding.size(); ++d) {
        norm_sq += final_out.embedding[d] * final_out.embedding[d];
    }
    return {N - 1, static_cast<int>(classifier::argmax_lowest(final_out.logits)),
            TriggerReason::fallthrough_final, std::sqrt(norm_sq), 0};
}

} // namespace

TEST_CASE("gaussian pdf") {
    CHECK(gaussian_pdf(0.0, 0.0, 1.0) == doctest::Approx(0.3989423).epsilon(1e-6));
    CHECK(gaussian_pdf(1.5, 1.5, 2.0) == doctest::Approx(1.0 / (2.0 * std::sqrt(2.0 * 3.14159265358979))));
    CHECK(gaussian_pdf(2.0, 1.0, 0.5) == gaussian_pdf(0.0, 1.0, 0.5));  // symmetry
    CHECK_THROWS_AS((void)gaussian_pdf(0.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("calibration statistics") {
    SUBCASE("hand arithmetic: norms {2,4} give mean 3, population sigma 1") {
        // two samples at fixed norms, both predicted correctly at every exit
        // is awkward to rig through a model; the accumulator arithmetic is
        // what the example pins down, so exercise calibrate end-to-end below
        // and the population convention here.
        const double mean = (2.0 + 4.0) / 2.0;
        const double var = ((2.0 - mean) * (2.0 - mean) + (4.0 - mean) * (4.0 - mean)) / 2.0;
        CHECK(mean == 3.0);
        CHECK(std::sqrt(var) == 1.0);
    }

    const auto data = gate_dataset(11);
    auto m = model::initialize_model(gate_config(), geometry::Curvature(1.0), 8);

    SUBCASE("counts equal partition sizes") {
        const auto stats = calibrate(m, data, {});
        for (int e = 0; e < 3; ++e) {
            const auto& ex = stats.exits[static_cast<size_t>(e)];
            CHECK(ex.global_correct.count + ex.global_incorrect.count ==
                  static_cast<long>(data.size()));
            CHECK(ex.global_correct.stddev >= 1e-3);
            CHECK(ex.global_incorrect.stddev >= 1e-3);
        }
    }

    SUBCASE("degenerate side errors without the fallback flag") {
        // a bias-only model predicts one fixed class; labeling every sample
        // with it makes every prediction correct at every exit
        Dataset one_class = data;
        auto rig = rigged_model({3.0, 3.0, 3.0});
        const auto out = model::forward_with_exits(rig, one_class.features[0]);
        const int fixed_pred = static_cast<int>(classifier::argmax_lowest(out[0].logits));
        for (auto& l : one_class.labels) l = fixed_pred;

        CHECK_THROWS_AS((void)calibrate(rig, one_class, {}), std::invalid_argument);

        TriggerOptions fallback;
        fallback.sigma_floor_fallback = true;
        const auto stats = calibrate(rig, one_class, fallback);
        // all-equal norms: sigma hits the floor; missing side is widened
        CHECK(stats.exits[0].global_correct.mean == doctest::Approx(3.0));
        CHECK(stats.exits[0].global_correct.stddev == doctest::Approx(1e-3));
        CHECK(stats.exits[0].global_incorrect.count == 0);
        CHECK(stats.exits[0].global_incorrect.stddev == doctest::Approx(1e-2));
        // the empty side's confidence record is widened too, so the combined
        // gate stays total
        CHECK(stats.exits[0].confidence_incorrect.stddev > 0.0);
        TriggerOptions combined = fallback;
        combined.use_confidence_gate = true;
        auto combined_stats = calibrate(rig, one_class, combined);
        CHECK_NOTHROW((void)decide(rig, combined_stats, one_class.features[0]));
    }

    SUBCASE("euclidean model is rejected") {
        auto cfg = gate_config();
        cfg.mode = LatentMode::euclidean;
        auto em = model::initialize_model(cfg, geometry::Curvature(1.0), 8);
        CHECK_THROWS_AS((void)calibrate(em, data, {}), std::invalid_argument);
    }
}

TEST_CASE("decide: pdf comparisons at the gates") {
    const std::vector<double> x(6, 0.25);

    SUBCASE("norm 5 under correct N(6,1) vs incorrect N(2,1): exit at gate 0") {
        auto m = rigged_model({5.0, 5.0, 5.0});
        auto stats = stats_for({{gstats(6, 1), gstats(2, 1)},
                                {gstats(6, 1), gstats(2, 1)}});
        stats.exits.push_back({});  // final exit record, unused by the gates
        const auto d = decide(m, stats, x);
        CHECK(d.exit_taken == 0);
        CHECK(d.reason == TriggerReason::global_pass_no_class_stats);
        CHECK(d.norm == doctest::Approx(5.0));
    }

    SUBCASE("norm 2 under the same stats defers past gate 0") {
        auto m = rigged_model({2.0, 2.0, 2.0});
        auto stats = stats_for({{gstats(6, 1), gstats(2, 1)},
                                {gstats(6, 1), gstats(2, 1)}});
        stats.exits.push_back({});
        const auto d = decide(m, stats, x);
        CHECK(d.exit_taken == 2);
        CHECK(d.reason == TriggerReason::fallthrough_final);
    }

    SUBCASE("identical distributions: strict inequality fails, all fall through") {
        auto m = rigged_model({3.0, 3.0, 3.0});
        auto stats = stats_for({{gstats(3, 1), gstats(3, 1)},
                                {gstats(3, 1), gstats(3, 1)}});
        stats.exits.push_back({});
        const auto d = decide(m, stats, x);
        CHECK(d.exit_taken == 2);
        CHECK(d.reason == TriggerReason::fallthrough_final);

        // everything at the final exit: 0% saved, accuracy = final-exit accuracy
        const auto eval_set = gate_dataset(47, 20);
        const trainer::CostModel cost{{10.0, 20.0, 40.0}};
        const auto report =
            evaluate_trigger(m, stats, eval_set, cost, Strategy::class_specific);
        CHECK(report.triggered_fraction[2] == 1.0);
        CHECK(report.macs_saved == 0.0);
        long final_correct = 0;
        for (size_t i = 0; i < eval_set.size(); ++i) {
            const auto exits = model::forward_with_exits(m, eval_set.features[i]);
            if (classifier::argmax_lowest(exits[2].logits) ==
                static_cast<size_t>(eval_set.labels[i])) {
                ++final_correct;
            }
        }
        CHECK(report.accuracy ==
              doctest::Approx(static_cast<double>(final_correct) /
                              static_cast<double>(eval_set.size())));
    }

    SUBCASE("class-specific stage can veto the global pass") {
        auto m = rigged_model({5.0, 2.0, 2.0});
        auto stats = stats_for({{gstats(6, 1), gstats(2, 1)},
                                {gstats(6, 1), gstats(2, 1)}});
        stats.exits.push_back({});
        // find the predicted class at gate 0 and give it hostile class stats
        const auto probe = model::forward_with_exits(m, x);
        const int pred = static_cast<int>(classifier::argmax_lowest(probe[0].logits));
        stats.exits[0].per_class[pred] = {gstats(9, 1), gstats(5, 1)};
        const auto d = decide(m, stats, x);
        CHECK(d.exit_taken != 0);

        // with supportive class stats the gate passes with the full reason
        stats.exits[0].per_class[pred] = {gstats(5, 1), gstats(1, 1)};
        const auto d2 = decide(m, stats, x);
        CHECK(d2.exit_taken == 0);
        CHECK(d2.reason == TriggerReason::global_pass_class_pass);
    }
}

TEST_CASE("optional confidence gate makes the global stage stricter") {
    const std::vector<double> x(6, 0.25);
    auto m = rigged_model({5.0, 5.0, 5.0});

    // the bias-only model emits one fixed confidence value per exit
    const auto probe = model::forward_with_exits(m, x);
    double mx = *std::max_element(probe[0].logits.begin(), probe[0].logits.end());
    double sum = 0.0, top = 0.0;
    for (double l : probe[0].logits) {
        sum += std::exp(l - mx);
        top = std::max(top, std::exp(l - mx));
    }
    const double conf = top / sum;

    auto stats = stats_for({{gstats(6, 1), gstats(2, 1)}, {gstats(6, 1), gstats(2, 1)}});
    stats.exits.push_back({});
    stats.options.use_confidence_gate = true;
    // hostile confidence statistics: observed confidence is far likelier
    // under the incorrect distribution
    for (int e = 0; e < 2; ++e) {
        stats.exits[static_cast<size_t>(e)].confidence_correct = gstats(conf + 0.5, 0.05);
        stats.exits[static_cast<size_t>(e)].confidence_incorrect = gstats(conf, 0.05);
    }
    CHECK(decide(m, stats, x).exit_taken == 2);

    // supportive confidence statistics restore the norm-gate behaviour
    for (int e = 0; e < 2; ++e) {
        stats.exits[static_cast<size_t>(e)].confidence_correct = gstats(conf, 0.05);
        stats.exits[static_cast<size_t>(e)].confidence_incorrect = gstats(conf + 0.5, 0.05);
    }
    CHECK(decide(m, stats, x).exit_taken == 0);

    // off by default: the same hostile stats are ignored
    stats.options.use_confidence_gate = false;
    for (int e = 0; e < 2; ++e) {
        stats.exits[static_cast<size_t>(e)].confidence_correct = gstats(conf + 0.5, 0.05);
        stats.exits[static_cast<size_t>(e)].confidence_incorrect = gstats(conf, 0.05);
    }
    CHECK(decide(m, stats, x).exit_taken == 0);
}

TEST_CASE("norm stats serialization round trip") {
    auto m = model::initialize_model(gate_config(), geometry::Curvature(1.0), 15);
    const auto reference = gate_dataset(41, 40);
    TriggerOptions options;
    options.sigma_floor_fallback = true;
    options.min_class_support = 2;
    const auto stats = calibrate(m, reference, options);

    const auto path = std::filesystem::temp_directory_path() / "hypee_stats_test.json";
    save_norm_stats(stats, path, "deadbeef");
    const auto back = load_norm_stats(path);
    REQUIRE(back.exits.size() == stats.exits.size());
    for (size_t e = 0; e < stats.exits.size(); ++e) {
        CHECK(back.exits[e].global_correct.mean == stats.exits[e].global_correct.mean);
        CHECK(back.exits[e].global_correct.stddev == stats.exits[e].global_correct.stddev);
        CHECK(back.exits[e].per_class.size() == stats.exits[e].per_class.size());
    }
    CHECK(back.options.sigma_floor_fallback == options.sigma_floor_fallback);

    // decisions are identical through the round trip
    const auto queries = gate_dataset(43, 10);
    for (const auto& x : queries.features) {
        const auto a = decide(m, stats, x);
        const auto b = decide(m, back, x);
        CHECK(a.exit_taken == b.exit_taken);
        CHECK(a.predicted_class == b.predicted_class);
    }
    std::filesystem::remove(path);
}

TEST_CASE("decide evaluates exactly the blocks it needs") {
    const std::vector<double> x(6, 0.25);
    auto m = rigged_model({5.0, 5.0, 5.0});
    auto stats = stats_for({{gstats(6, 1), gstats(2, 1)}, {gstats(6, 1), gstats(2, 1)}});
    stats.exits.push_back({});
    const auto d = decide(m, stats, x);
    CHECK(d.exit_taken == 0);
    CHECK(d.blocks_evaluated == 1);  // exit 0 sits after block 0

    auto defer_stats = stats_for({{gstats(3, 1), gstats(3, 1)}, {gstats(3, 1), gstats(3, 1)}});
    defer_stats.exits.push_back({});
    const auto d2 = decide(m, defer_stats, x);
    CHECK(d2.exit_taken == 2);
    CHECK(d2.blocks_evaluated == 3);
}

TEST_CASE("entropy trigger") {
    SUBCASE("near one-hot softmax exits at gate 0") {
        auto cfg = gate_config();
        cfg.mode = LatentMode::euclidean;
        auto m = model::initialize_model(cfg, geometry::Curvature(1.0), 4);
        for (int e = 0; e < 3; ++e) {
            auto b = m.group("exit" + std::to_string(e) + ".head.b");
            b[0] = 25.0;  // dominates every other logit
        }
        const std::vector<double> thresholds{0.5, 0.5};
        const auto d = entropy_decide(m, thresholds, std::vector<double>(6, 0.1));
        CHECK(d.exit_taken == 0);
    }

    SUBCASE("uniform softmax always falls through") {
        auto cfg = gate_config();
        cfg.mode = LatentMode::euclidean;
        auto m = model::initialize_model(cfg, geometry::Curvature(1.0), 4);
        for (int e = 0; e < 3; ++e) {
            for (double& w : m.group("exit" + std::to_string(e) + ".head.W")) w = 0.0;
            for (double& b : m.group("exit" + std::to_string(e) + ".head.b")) b = 0.0;
        }
        // thresholds just under ln C: entropy == ln C is not < threshold
        const double lnC = std::log(3.0);
        const std::vector<double> thresholds{lnC - 1e-9, lnC - 1e-9};
        const auto d = entropy_decide(m, thresholds, std::vector<double>(6, 0.1));
        CHECK(d.exit_taken == 2);
        CHECK(d.reason == TriggerReason::fallthrough_final);
    }

    SUBCASE("invalid thresholds are rejected") {
        auto m = model::initialize_model(gate_config(), geometry::Curvature(1.0), 4);
        CHECK_THROWS_AS((void)entropy_decide(m, std::vector<double>{0.0, 0.5},
                                             std::vector<double>(6, 0.1)),
                        std::invalid_argument);
        CHECK_THROWS_AS((void)entropy_decide(m, std::vector<double>{0.5, std::log(3.0)},
                                             std::vector<double>(6, 0.1)),
                        std::invalid_argument);
    }

    SUBCASE("threshold sweep: fall-through fraction is monotone non-increasing") {
        auto m = model::initialize_model(gate_config(), geometry::Curvature(1.0), 4);
        const auto data = gate_dataset(13, 30);
        double prev_fallthrough = 1.1;
        for (double t : {0.2, 0.5, 0.8, 1.05}) {
            const std::vector<double> thresholds{t, t};
            long fell = 0;
            for (const auto& x : data.features) {
                if (entropy_decide(m, thresholds, x).exit_taken == 2) ++fell;
            }
            const double frac = static_cast<double>(fell) / static_cast<double>(data.size());
            CHECK(frac <= prev_fallthrough + 1e-12);
            prev_fallthrough = frac;
        }
    }
}

TEST_CASE("decide agrees with the straight-line transcription on 200 samples") {
    auto m = model::initialize_model(gate_config(), geometry::Curvature(1.0), 15);
    const auto reference = gate_dataset(17, 40);
    TriggerOptions options;
    options.sigma_floor_fallback = true;
    options.min_class_support = 2;
    const auto stats = calibrate(m, reference, options);

    const auto queries = gate_dataset(19, 67);  // 201 samples
    REQUIRE(queries.size() >= 200);
    for (size_t i = 0; i < 200; ++i) {
        const auto& x = queries.features[i];
        const auto got = decide(m, stats, x);
        const auto want = oracle_decide(m, stats, x, true);
        CHECK(got.exit_taken == want.exit_taken);
        CHECK(got.predicted_class == want.predicted_class);
        CHECK(got.reason == want.reason);

        const auto got_g = decide_global_only(m, stats, x);
        const auto want_g = oracle_decide(m, stats, x, false);
        CHECK(got_g.exit_taken == want_g.exit_taken);
        CHECK(got_g.predicted_class == want_g.predicted_class);
    }
}

TEST_CASE("class-specific strategy is at least as selective as global-only") {
    auto m = model::initialize_model(gate_config(), geometry::Curvature(1.0), 15);
    const auto reference = gate_dataset(23, 40);
    TriggerOptions options;
    options.sigma_floor_fallback = true;
    options.min_class_support = 2;
    const auto stats = calibrate(m, reference, options);
    const auto queries = gate_dataset(29, 40);
    for (const auto& x : queries.features) {
        const auto cls = decide(m, stats, x);
        const auto glb = decide_global_only(m, stats, x);
        // early exit under class-specific implies early exit under global-only
        if (cls.exit_taken < 2) CHECK(glb.exit_taken < 2);
        // at gate 0 the class-specific exits are a subset of the global ones
        if (cls.exit_taken == 0) CHECK(glb.exit_taken == 0);
    }
}

TEST_CASE("trigger report") {
    auto m = model::initialize_model(gate_config(), geometry::Curvature(1.0), 15);
    const auto reference = gate_dataset(31, 40);
    TriggerOptions options;
    options.sigma_floor_fallback = true;
    const auto stats = calibrate(m, reference, options);
    const auto eval_set = gate_dataset(37, 40);
    const trainer::CostModel cost{{10.0, 20.0, 40.0}};

    const auto report = evaluate_trigger(m, stats, eval_set, cost, Strategy::class_specific);

    SUBCASE("fractions sum to one; per-exit correctness is conserved") {
        double sum = 0.0;
        for (double f : report.triggered_fraction) sum += f;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        for (int e = 0; e < 3; ++e) {
            if (report.triggered_count[static_cast<size_t>(e)] == 0) continue;
            CHECK(report.correct_fraction[static_cast<size_t>(e)] +
                      report.incorrect_fraction[static_cast<size_t>(e)] ==
                  doctest::Approx(1.0));
        }
    }

    SUBCASE("macs saved equals the triggered mixture") {
        double expected = 0.0;
        for (int e = 0; e < 3; ++e) {
            expected += report.triggered_fraction[static_cast<size_t>(e)] *
                        trainer::macs_saved_fraction(cost, e);
        }
        CHECK(report.macs_saved == doctest::Approx(expected));
    }

    SUBCASE("empty eval set is rejected") {
        Dataset empty;
        empty.num_classes = 3;
        CHECK_THROWS_AS(
            (void)evaluate_trigger(m, stats, empty, cost, Strategy::class_specific),
            std::invalid_argument);
    }
}

TEST_CASE("mixture savings arithmetic on reference fractions") {
    const trainer::CostModel mobilenet{{13.08, 19.41, 34.9}};
    const std::vector<double> class_specific{0.301, 0.391, 0.309};
    const std::vector<double> global_only{0.356, 0.367, 0.276};
    CHECK(std::abs(100.0 * mixture_macs_saved(class_specific, mobilenet) - 36.1) < 0.1);
    CHECK(std::abs(100.0 * mixture_macs_saved(global_only, mobilenet) - 38.5) < 0.1);
}
