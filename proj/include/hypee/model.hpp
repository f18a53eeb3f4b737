#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hypee/classifier.hpp"
#include "hypee/entailment.hpp"
#include "hypee/geometry.hpp"
#include "hypee/rng.hpp"

namespace hypee::model {

enum class LatentMode { hyperbolic, euclidean };

std::string to_string(LatentMode mode);
LatentMode latent_mode_from_string(const std::string& s);

struct BackboneConfig {
    int input_dim = 0;
    std::vector<int> hidden_dims;  // one feed-forward block per entry
    std::vector<int> exit_after;   // block indices hosting exits; last block always included
    int latent_dim = 0;            // n
    int num_classes = 0;           // C
    LatentMode mode = LatentMode::hyperbolic;

    int num_exits() const { return static_cast<int>(exit_after.size()); }
    int num_blocks() const { return static_cast<int>(hidden_dims.size()); }
    void validate() const;
};

// Offsets of named parameter groups inside the flat parameter vector.
struct ParamLayout {
    struct Group {
        std::string name;
        size_t offset = 0;
        size_t size = 0;
    };
    std::vector<Group> groups;
    size_t total = 0;

    const Group& find(const std::string& name) const;
};

ParamLayout make_layout(const BackboneConfig& cfg);

struct MultiExitModel {
    BackboneConfig config;
    geometry::Curvature curvature;
    std::vector<double> params;
    ParamLayout layout;
    uint64_t init_seed = 0;
    int spacelike_projections = 0;  // diagnostics counter

    std::span<double> group(const std::string& name);
    std::span<const double> group(const std::string& name) const;
};

// Direction entries ~ N(0, 1/sqrt(fan_in)); biases and offsets start at zero;
// per-exit scales start at alpha = 1 (log alpha = 0).
MultiExitModel initialize_model(const BackboneConfig& cfg, geometry::Curvature c, uint64_t seed);

// ---- forward pass -----------------------------------------------------------

template <class S>
struct ExitActivation {
    std::vector<S> latent;     // z_i: projection output, pre-lift
    std::vector<S> embedding;  // hyperbolic: ambient h_i; euclidean: unit e_i
    std::vector<S> logits;     // l_i
};

namespace detail {

// out = W x + b, with W row-major (rows x cols).
template <class S, class X>
std::vector<S> affine(std::span<const S> W, std::span<const S> b, const std::vector<X>& x,
                      size_t rows, size_t cols) {
    std::vector<S> out;
    out.reserve(rows);
    for (size_t r = 0; r < rows; ++r) {
        S acc = b[r];
        const size_t base = r * cols;
        for (size_t c = 0; c < cols; ++c) acc += W[base + c] * x[c];
        out.push_back(acc);
    }
    return out;
}

template <class S>
std::vector<S> tanh_all(std::vector<S> v) {
    using std::tanh;
    using hypee::ad::tanh;
    for (auto& x : v) x = tanh(x);
    return v;
}

inline constexpr double kUnitNormFloor = 1e-12;

template <class S>
std::vector<S> unit_normalize(const std::vector<S>& v) {
    using std::sqrt;
    using hypee::ad::sqrt;
    using hypee::ad::clamp_min;
    S norm_sq = v[0] * v[0];
    for (size_t i = 1; i < v.size(); ++i) norm_sq += v[i] * v[i];
    S inv = 1.0 / sqrt(clamp_min(norm_sq, kUnitNormFloor));
    std::vector<S> out;
    out.reserve(v.size());
    for (const auto& x : v) out.push_back(x * inv);
    return out;
}

} // namespace detail

// Evaluates one exit head on a block output. Shared by the full forward pass,
// the training graph (S = ad::Var) and the lazy per-gate cursor.
template <class S>
ExitActivation<S> exit_head(const BackboneConfig& cfg, const ParamLayout& layout,
                            std::span<const S> params, const std::vector<S>& block_out,
                            int exit_index, double c) {
    using hypee::ad::exp;
    using std::exp;

    const std::string prefix = "exit" + std::to_string(exit_index);
    const auto& projW = layout.find(prefix + ".proj.W");
    const auto& projb = layout.find(prefix + ".proj.b");
    const size_t n = static_cast<size_t>(cfg.latent_dim);

    ExitActivation<S> out;
    out.latent = detail::affine(params.subspan(projW.offset, projW.size),
                                params.subspan(projb.offset, projb.size), block_out, n,
                                block_out.size());

    if (cfg.mode == LatentMode::hyperbolic) {
        const auto& la = layout.find(prefix + ".log_alpha");
        S alpha = exp(params[la.offset]);
        std::vector<S> scaled;
        scaled.reserve(n);
        for (const auto& z : out.latent) scaled.push_back(alpha * z);
        out.embedding = geometry::exp_map_origin_core(std::span<const S>(scaled), c);
        const auto& mlr = layout.find(prefix + ".mlr");
        out.logits = classifier::mlr_logits_core(std::span<const S>(out.embedding),
                                                 params.subspan(mlr.offset, mlr.size),
                                                 static_cast<size_t>(cfg.num_classes), c);
    } else {
        out.embedding = detail::unit_normalize(out.latent);
        const auto& headW = layout.find(prefix + ".head.W");
        const auto& headb = layout.find(prefix + ".head.b");
        out.logits = detail::affine(params.subspan(headW.offset, headW.size),
                                    params.subspan(headb.offset, headb.size), out.embedding,
                                    static_cast<size_t>(cfg.num_classes), n);
    }
    return out;
}

template <class S>
std::vector<ExitActivation<S>> forward_exits_core(const BackboneConfig& cfg,
                                                  const ParamLayout& layout,
                                                  std::span<const S> params,
                                                  std::span<const double> input, double c) {
    if (input.size() != static_cast<size_t>(cfg.input_dim)) {
        throw std::invalid_argument("forward: input dimension " + std::to_string(input.size()) +
                                    " != configured " + std::to_string(cfg.input_dim));
    }
    std::vector<ExitActivation<S>> exits;
    exits.reserve(cfg.exit_after.size());

    std::vector<double> x(input.begin(), input.end());
    std::vector<S> act;
    size_t next_exit = 0;
    for (int b = 0; b < cfg.num_blocks(); ++b) {
        const auto& W = layout.find("block" + std::to_string(b) + ".W");
        const auto& bias = layout.find("block" + std::to_string(b) + ".b");
        const size_t rows = static_cast<size_t>(cfg.hidden_dims[static_cast<size_t>(b)]);
        if (b == 0) {
            act = detail::tanh_all(detail::affine(params.subspan(W.offset, W.size),
                                                  params.subspan(bias.offset, bias.size), x, rows,
                                                  x.size()));
        } else {
            act = detail::tanh_all(detail::affine(params.subspan(W.offset, W.size),
                                                  params.subspan(bias.offset, bias.size), act,
                                                  rows, act.size()));
        }
        while (next_exit < cfg.exit_after.size() &&
               cfg.exit_after[next_exit] == b) {
            exits.push_back(exit_head(cfg, layout, params, act, static_cast<int>(next_exit), c));
            ++next_exit;
        }
    }
    return exits;
}

// ---- double-path API --------------------------------------------------------

using ExitOutputs = ExitActivation<double>;

std::vector<ExitOutputs> forward_with_exits(const MultiExitModel& model,
                                            std::span<const double> input);

geometry::LorentzPoint embedding_point(const ExitOutputs& out);

// Lazy forward pass that evaluates backbone blocks only as gates request them;
// the trigger uses this so that compute matches the exit actually taken.
class ForwardCursor {
public:
    ForwardCursor(const MultiExitModel& model, std::span<const double> input);

    const ExitOutputs& exit_output(int exit_index);
    int blocks_evaluated() const { return blocks_done_; }

private:
    const MultiExitModel& model_;
    std::vector<double> input_;
    std::vector<double> act_;
    std::vector<ExitOutputs> cache_;
    std::vector<bool> cached_;
    int blocks_done_ = 0;
};

} // namespace hypee::model
