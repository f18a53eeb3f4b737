#pragma once

#include <span>
#include <vector>

#include "hypee/geometry.hpp"

namespace hypee::classifier {

// Ambient class normal assembled as w = (offset; direction). The normal must
// be spacelike: <w,w>_L = |direction|^2 - offset^2 > 0.
struct LorentzHyperplane {
    geometry::SpatialVector direction;
    double offset = 0.0;
};

struct MlrHead {
    std::vector<LorentzHyperplane> hyperplanes;
    geometry::Curvature c;

    size_t num_classes() const { return hyperplanes.size(); }
};

// Enforced margin for <w,w>_L after the spacelike projection.
inline constexpr double kSpacelikeMargin = 1e-6;

// ---- template core ----------------------------------------------------------

// logit_k = asinh( sqrt(c) * <w_k, h>_L / |w_k|_L ) / sqrt(c),
// with w_k = (offset_k; direction_k) laid out flat as [offset, dir_0..dir_{n-1}].
template <class S>
S mlr_logit_core(std::span<const S> ambient_h, std::span<const S> plane, double c) {
    using std::sqrt;
    using std::asinh;
    using hypee::ad::sqrt;
    using hypee::ad::asinh;
    using hypee::ad::clamp_min;

    const double sc = std::sqrt(c);
    // <w,h>_L with w time component = plane[0]
    S ip = -(plane[0] * ambient_h[0]);
    for (size_t i = 1; i < plane.size(); ++i) ip += plane[i] * ambient_h[i];
    // <w,w>_L
    S w_sq = -(plane[0] * plane[0]);
    for (size_t i = 1; i < plane.size(); ++i) w_sq += plane[i] * plane[i];
    S w_norm = sqrt(clamp_min(w_sq, kSpacelikeMargin * 0.5));
    return asinh(sc * ip / w_norm) * (1.0 / sc);
}

template <class S>
std::vector<S> mlr_logits_core(std::span<const S> ambient_h, std::span<const S> planes_flat,
                               size_t num_classes, double c) {
    const size_t stride = planes_flat.size() / num_classes;
    std::vector<S> logits;
    logits.reserve(num_classes);
    for (size_t k = 0; k < num_classes; ++k) {
        logits.push_back(mlr_logit_core(ambient_h, planes_flat.subspan(k * stride, stride), c));
    }
    return logits;
}

// ---- typed double API -------------------------------------------------------

std::vector<double> mlr_logits(const geometry::LorentzPoint& h, const MlrHead& head);

// argmax over mlr_logits; ties broken by lowest class index.
size_t predict(const geometry::LorentzPoint& h, const MlrHead& head);
size_t argmax_lowest(std::span<const double> logits);

// Restores the spacelike margin by shrinking |offset| where needed; returns
// the number of hyperplanes that had to be projected.
int project_spacelike(MlrHead& head);
int project_spacelike_flat(std::span<double> planes_flat, size_t num_classes);

} // namespace hypee::classifier
