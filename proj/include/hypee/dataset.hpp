#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypee/rng.hpp"

namespace hypee {

struct Dataset {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    int num_classes = 0;

    size_t size() const { return features.size(); }
    bool empty() const { return features.empty(); }
    size_t feature_dim() const { return features.empty() ? 0 : features.front().size(); }

    void validate() const {
        if (features.size() != labels.size()) {
            throw std::invalid_argument("dataset: features/labels length mismatch");
        }
        for (size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0 || (num_classes > 0 && labels[i] >= num_classes)) {
                throw std::invalid_argument("dataset: label " + std::to_string(labels[i]) +
                                            " out of range at row " + std::to_string(i));
            }
        }
    }
};

struct DatasetSplits {
    Dataset train;
    Dataset calibration;
    Dataset eval;
};

// Deterministic shuffled split by fractions (train, calibration, eval).
inline DatasetSplits split_dataset(const Dataset& ds, double train_frac, double calib_frac,
                                   uint64_t seed) {
    if (train_frac < 0.0 || calib_frac < 0.0 || train_frac + calib_frac > 1.0) {
        throw std::invalid_argument("split_dataset: fractions must be nonnegative and sum <= 1");
    }
    std::vector<size_t> idx(ds.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng::Engine eng(seed);
    eng.shuffle(idx);

    const size_t n_train = static_cast<size_t>(train_frac * static_cast<double>(ds.size()));
    const size_t n_calib = static_cast<size_t>(calib_frac * static_cast<double>(ds.size()));

    DatasetSplits out;
    out.train.num_classes = out.calibration.num_classes = out.eval.num_classes = ds.num_classes;
    for (size_t i = 0; i < idx.size(); ++i) {
        Dataset& dst = i < n_train ? out.train
                       : i < n_train + n_calib ? out.calibration
                                               : out.eval;
        dst.features.push_back(ds.features[idx[i]]);
        dst.labels.push_back(ds.labels[idx[i]]);
    }
    return out;
}

} // namespace hypee
