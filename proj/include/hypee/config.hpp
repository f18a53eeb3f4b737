#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypee/data_io.hpp"
#include "hypee/entailment.hpp"
#include "hypee/model.hpp"
#include "hypee/trainer.hpp"
#include "hypee/trigger.hpp"

namespace hypee::config {

struct DataConfig {
    std::optional<data_io::SyntheticSpec> synthetic;
    std::optional<std::filesystem::path> csv_path;
    std::optional<std::string> csv_label_column;
    double train_fraction = 0.6;
    double calibration_fraction = 0.2;
    // eval fraction is the remainder
};

struct RunConfig {
    uint64_t seed = 1;
    geometry::Curvature curvature;
    entailment::ConeConfig cone;
    model::BackboneConfig backbone;
    trainer::LossConfig loss;
    trainer::OptimizerConfig optimizer;
    trigger::TriggerOptions trigger_options;
    std::vector<double> entropy_thresholds;  // optional, for the entropy strategy
    DataConfig data;
};

// Parses and validates a run configuration. Unknown keys anywhere in the
// document are rejected.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Fully resolved document (defaults filled in); this is what gets hashed and
// written next to every output.
nlohmann::json resolved_json(const RunConfig& cfg);

// FNV-1a 64-bit over the compact dump, hex-encoded.
std::string config_hash(const nlohmann::json& resolved);

Dataset load_dataset(const RunConfig& cfg);
DatasetSplits load_splits(const RunConfig& cfg);

} // namespace hypee::config
