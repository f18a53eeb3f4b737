#include <doctest.h>

#include "hypee/config.hpp"

using namespace hypee;
using namespace hypee::config;
using nlohmann::json;

namespace {

json base_config() {
    return json::parse(R"({
      "seed": 3,
      "curvature": 1.0,
      "mode": "hyperbolic",
      "backbone": {
        "input_dim": 8,
        "hidden_dims": [10, 10, 10],
        "exit_after": [0, 1, 2],
        "latent_dim": 4,
        "num_classes": 6
      },
      "data": {
        "synthetic": {
          "num_superclasses": 3,
          "subclasses_per_superclass": 2,
          "samples_per_class": 20,
          "input_dim": 8,
          "class_spread": 0.5,
          "superclass_separation": 6.0,
          "seed": 3
        },
        "splits": {"train": 0.6, "calibration": 0.2, "eval": 0.2}
      }
    })");
}

} // namespace

TEST_CASE("config parsing fills defaults") {
    const auto cfg = parse_run_config(base_config());
    CHECK(cfg.seed == 3);
    CHECK(cfg.cone.K == 0.1);
    CHECK(cfg.loss.lambda == 0.2);
    CHECK(cfg.loss.exit_weights == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(cfg.optimizer.kind == trainer::OptimizerKind::sgd);
    CHECK(cfg.trigger_options.sigma_floor == 1e-3);
    CHECK(cfg.data.synthetic.has_value());
}

TEST_CASE("unknown keys are rejected at every level") {
    auto bad_root = base_config();
    bad_root["surprise"] = 1;
    CHECK_THROWS_AS((void)parse_run_config(bad_root), ConfigError);

    auto bad_nested = base_config();
    bad_nested["backbone"]["depth"] = 12;
    CHECK_THROWS_AS((void)parse_run_config(bad_nested), ConfigError);

    auto bad_data = base_config();
    bad_data["data"]["synthetic"]["sigma"] = 0.5;
    CHECK_THROWS_AS((void)parse_run_config(bad_data), ConfigError);
}

TEST_CASE("config validation errors") {
    auto no_backbone = base_config();
    no_backbone.erase("backbone");
    CHECK_THROWS_AS((void)parse_run_config(no_backbone), ConfigError);

    auto bad_mode = base_config();
    bad_mode["mode"] = "spherical";
    CHECK_THROWS_AS((void)parse_run_config(bad_mode), ConfigError);

    auto class_mismatch = base_config();
    class_mismatch["backbone"]["num_classes"] = 5;  // synthetic yields 6
    CHECK_THROWS_AS((void)parse_run_config(class_mismatch), ConfigError);

    auto both_sources = base_config();
    both_sources["data"]["csv"] = {{"path", "x.csv"}};
    CHECK_THROWS_AS((void)parse_run_config(both_sources), ConfigError);

    auto bad_splits = base_config();
    bad_splits["data"]["splits"]["train"] = 0.9;
    CHECK_THROWS_AS((void)parse_run_config(bad_splits), ConfigError);

    auto bad_curvature = base_config();
    bad_curvature["curvature"] = -1.0;
    CHECK_THROWS_AS((void)parse_run_config(bad_curvature), ConfigError);
}

TEST_CASE("resolved config and hash are stable") {
    const auto cfg = parse_run_config(base_config());
    const auto resolved = resolved_json(cfg);
    const auto again = resolved_json(parse_run_config(resolved));
    CHECK(resolved == again);  // resolution is idempotent
    CHECK(config_hash(resolved) == config_hash(again));
    CHECK_FALSE(config_hash(resolved).empty());

    auto other = base_config();
    other["seed"] = 4;
    CHECK(config_hash(resolved_json(parse_run_config(other))) != config_hash(resolved));
}

TEST_CASE("dataset loading and splits") {
    const auto cfg = parse_run_config(base_config());
    const auto splits = load_splits(cfg);
    const size_t total = splits.train.size() + splits.calibration.size() + splits.eval.size();
    CHECK(total == 120);  // 6 classes x 20 samples
    CHECK(splits.train.size() == 72);
    CHECK(splits.calibration.size() == 24);
    CHECK(splits.train.num_classes == 6);

    // deterministic
    const auto splits2 = load_splits(cfg);
    CHECK(splits.train.features == splits2.train.features);
    CHECK(splits.eval.labels == splits2.eval.labels);
}
