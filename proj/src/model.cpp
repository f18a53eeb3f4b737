#include "hypee/model.hpp"

#include <algorithm>
#include <cmath>

namespace hypee::model {

std::string to_string(LatentMode mode) {
    return mode == LatentMode::hyperbolic ? "hyperbolic" : "euclidean";
}

LatentMode latent_mode_from_string(const std::string& s) {
    if (s == "hyperbolic") return LatentMode::hyperbolic;
    if (s == "euclidean") return LatentMode::euclidean;
    throw std::invalid_argument("unknown latent mode '" + s + "' (hyperbolic|euclidean)");
}

void BackboneConfig::validate() const {
    if (input_dim < 1) throw std::invalid_argument("backbone: input_dim must be >= 1");
    if (hidden_dims.empty()) throw std::invalid_argument("backbone: need at least one block");
    for (int h : hidden_dims) {
        if (h < 1) throw std::invalid_argument("backbone: hidden dims must be >= 1");
    }
    if (latent_dim < 2) throw std::invalid_argument("backbone: latent_dim must be >= 2");
    if (num_classes < 2) throw std::invalid_argument("backbone: num_classes must be >= 2");
    if (exit_after.size() < 2) throw std::invalid_argument("backbone: need at least 2 exits");
    for (size_t i = 0; i + 1 < exit_after.size(); ++i) {
        if (exit_after[i] >= exit_after[i + 1]) {
            throw std::invalid_argument("backbone: exit_after must be strictly increasing");
        }
    }
    if (exit_after.front() < 0 || exit_after.back() != num_blocks() - 1) {
        throw std::invalid_argument(
            "backbone: exits must lie in [0, blocks) and the last block must host the final exit");
    }
}

const ParamLayout::Group& ParamLayout::find(const std::string& name) const {
    for (const auto& g : groups) {
        if (g.name == name) return g;
    }
    throw std::invalid_argument("unknown parameter group '" + name + "'");
}

ParamLayout make_layout(const BackboneConfig& cfg) {
    cfg.validate();
    ParamLayout layout;
    auto add = [&layout](const std::string& name, size_t size) {
        layout.groups.push_back({name, layout.total, size});
        layout.total += size;
    };

    int in = cfg.input_dim;
    for (int b = 0; b < cfg.num_blocks(); ++b) {
        const int out = cfg.hidden_dims[static_cast<size_t>(b)];
        add("block" + std::to_string(b) + ".W", static_cast<size_t>(out) * static_cast<size_t>(in));
        add("block" + std::to_string(b) + ".b", static_cast<size_t>(out));
        in = out;
    }
    for (int e = 0; e < cfg.num_exits(); ++e) {
        const int width = cfg.hidden_dims[static_cast<size_t>(cfg.exit_after[static_cast<size_t>(e)])];
        const std::string prefix = "exit" + std::to_string(e);
        add(prefix + ".proj.W", static_cast<size_t>(cfg.latent_dim) * static_cast<size_t>(width));
        add(prefix + ".proj.b", static_cast<size_t>(cfg.latent_dim));
        if (cfg.mode == LatentMode::hyperbolic) {
            add(prefix + ".log_alpha", 1);
            add(prefix + ".mlr",
                static_cast<size_t>(cfg.num_classes) * (static_cast<size_t>(cfg.latent_dim) + 1));
        } else {
            add(prefix + ".head.W",
                static_cast<size_t>(cfg.num_classes) * static_cast<size_t>(cfg.latent_dim));
            add(prefix + ".head.b", static_cast<size_t>(cfg.num_classes));
        }
    }
    return layout;
}

std::span<double> MultiExitModel::group(const std::string& name) {
    const auto& g = layout.find(name);
    return {params.data() + g.offset, g.size};
}

std::span<const double> MultiExitModel::group(const std::string& name) const {
    const auto& g = layout.find(name);
    return {params.data() + g.offset, g.size};
}

MultiExitModel initialize_model(const BackboneConfig& cfg, geometry::Curvature c, uint64_t seed) {
    MultiExitModel m;
    m.config = cfg;
    m.curvature = c;
    m.layout = make_layout(cfg);
    m.params.assign(m.layout.total, 0.0);
    m.init_seed = seed;

    rng::Engine eng(seed);
    auto fill_matrix = [&](const std::string& name, size_t fan_in) {
        auto g = m.group(name);
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& w : g) w = eng.normal(0.0, scale);
    };

    int in = cfg.input_dim;
    for (int b = 0; b < cfg.num_blocks(); ++b) {
        fill_matrix("block" + std::to_string(b) + ".W", static_cast<size_t>(in));
        in = cfg.hidden_dims[static_cast<size_t>(b)];
    }
    for (int e = 0; e < cfg.num_exits(); ++e) {
        const std::string prefix = "exit" + std::to_string(e);
        const int width = cfg.hidden_dims[static_cast<size_t>(cfg.exit_after[static_cast<size_t>(e)])];
        fill_matrix(prefix + ".proj.W", static_cast<size_t>(width));
        if (cfg.mode == LatentMode::hyperbolic) {
            // directions ~ N(0, 1/sqrt(n)); offsets stay 0 so every normal is spacelike
            auto mlr = m.group(prefix + ".mlr");
            const size_t stride = static_cast<size_t>(cfg.latent_dim) + 1;
            const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
            for (size_t k = 0; k < static_cast<size_t>(cfg.num_classes); ++k) {
                for (size_t i = 1; i < stride; ++i) mlr[k * stride + i] = eng.normal(0.0, scale);
            }
        } else {
            fill_matrix(prefix + ".head.W", static_cast<size_t>(cfg.latent_dim));
        }
    }
    return m;
}

std::vector<ExitOutputs> forward_with_exits(const MultiExitModel& model,
                                            std::span<const double> input) {
    return forward_exits_core<double>(model.config, model.layout,
                                      std::span<const double>(model.params), input,
                                      model.curvature.c);
}

geometry::LorentzPoint embedding_point(const ExitOutputs& out) {
    return geometry::LorentzPoint::from_ambient_unchecked(out.embedding);
}

ForwardCursor::ForwardCursor(const MultiExitModel& model, std::span<const double> input)
    : model_(model), input_(input.begin(), input.end()) {
    if (input_.size() != static_cast<size_t>(model.config.input_dim)) {
        throw std::invalid_argument("forward: input dimension mismatch");
    }
    cache_.resize(static_cast<size_t>(model.config.num_exits()));
    cached_.assign(cache_.size(), false);
}

const ExitOutputs& ForwardCursor::exit_output(int exit_index) {
    const auto& cfg = model_.config;
    if (exit_index < 0 || exit_index >= cfg.num_exits()) {
        throw std::invalid_argument("exit index out of range");
    }
    if (cached_[static_cast<size_t>(exit_index)]) return cache_[static_cast<size_t>(exit_index)];

    const std::span<const double> params(model_.params);
    const int target_block = cfg.exit_after[static_cast<size_t>(exit_index)];
    if (target_block < blocks_done_ - 1) {
        throw std::logic_error("ForwardCursor: exits must be requested in ascending order");
    }
    while (blocks_done_ <= target_block) {
        const int b = blocks_done_;
        const auto& W = model_.layout.find("block" + std::to_string(b) + ".W");
        const auto& bias = model_.layout.find("block" + std::to_string(b) + ".b");
        const size_t rows = static_cast<size_t>(cfg.hidden_dims[static_cast<size_t>(b)]);
        const std::vector<double>& src = b == 0 ? input_ : act_;
        act_ = detail::tanh_all(detail::affine(params.subspan(W.offset, W.size),
                                               params.subspan(bias.offset, bias.size), src, rows,
                                               src.size()));
        ++blocks_done_;
    }
    cache_[static_cast<size_t>(exit_index)] =
        exit_head(cfg, model_.layout, params, act_, exit_index, model_.curvature.c);
    cached_[static_cast<size_t>(exit_index)] = true;
    return cache_[static_cast<size_t>(exit_index)];
}

} // namespace hypee::model
