#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hypee/analysis.hpp"
#include "hypee/dataset.hpp"
#include "hypee/model.hpp"

#include <json.hpp>

namespace hypee::data_io {

struct SyntheticSpec {
    int num_superclasses = 4;
    int subclasses_per_superclass = 3;
    int samples_per_class = 100;
    int input_dim = 16;
    double class_spread = 0.5;           // sample sigma around the subclass center
    double superclass_separation = 6.0;  // minimum distance between superclass centers
    uint64_t seed = 1;

    int num_classes() const { return num_superclasses * subclasses_per_superclass; }
    void validate() const;
};

// Gaussian-mixture hierarchy: superclass centers pairwise separated by at
// least `superclass_separation`, subclass centers perturbed around them,
// samples drawn with sigma = class_spread. Labels are dense 0-based fine
// classes; superclass = label / subclasses_per_superclass.
Dataset generate_synthetic(const SyntheticSpec& spec);

// ---- embedding file (binary, little-endian) -----------------------------------
//
//   magic   "HYEE"      4 bytes
//   version u32         currently 1
//   count   u64
//   dim     u32         spatial components per point
//   c       f64         curvature
//   mode    u8          1 hyperbolic, 0 euclidean
//   flags   u8          bit0 labels present, bit1 exit_ids present
//   payload count*dim f32 row-major space components
//   labels  count u32   when flagged
//   exits   count u32   when flagged

inline constexpr uint32_t kEmbeddingFormatVersion = 1;

void write_embeddings(const analysis::EmbeddingSet& set, const std::filesystem::path& path);
analysis::EmbeddingSet read_embeddings(const std::filesystem::path& path);

// ---- CSV ingestion -------------------------------------------------------------

struct CsvSchema {
    std::optional<std::string> label_column;  // name in the header row
    char delimiter = ',';
};

// First row is the header. All non-label columns must be numeric; violations
// report the 1-based row and column. A header-only file yields an empty
// dataset.
Dataset load_csv_features(const std::filesystem::path& path, const CsvSchema& schema);

// ---- checkpoints ----------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const model::MultiExitModel& m, const nlohmann::json& resolved_config,
                     const std::filesystem::path& path);

model::MultiExitModel load_checkpoint(const std::filesystem::path& path,
                                      nlohmann::json* resolved_config_out = nullptr);

// Write-temp-then-rename; all writers in this module go through it.
void atomic_write(const std::filesystem::path& path, const std::string& contents);

} // namespace hypee::data_io
