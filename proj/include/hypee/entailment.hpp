#pragma once

#include <span>

#include "hypee/geometry.hpp"

namespace hypee::entailment {

struct ConeConfig {
    // Minimum-radius cone constant. Apertures are undefined (clamped to pi/2)
    // for points with spatial norm <= 2K/sqrt(c).
    double K = 0.1;
    geometry::Curvature c;

    ConeConfig() = default;
    ConeConfig(double cone_k, geometry::Curvature curvature) : K(cone_k), c(curvature) {
        if (!(K > 0.0)) {
            throw std::invalid_argument("cone constant K must be positive, got " +
                                        std::to_string(cone_k));
        }
    }
};

// Floor for (c*<x,y>_L)^2 - 1 before the square root; keeps the training path
// finite when two exit embeddings coincide.
inline constexpr double kConeDenomFloor = 1e-15;
// Floor for the apex spatial norm in the guarded core.
inline constexpr double kApexNormFloor = 1e-12;

// ---- template cores ---------------------------------------------------------

// aper(x) = asin(clamp(2K / (sqrt(c) * |x_space|), 0, 1))
template <class S>
S half_aperture_core(std::span<const S> ambient_x, double K, double c) {
    using std::sqrt;
    using std::asin;
    using hypee::ad::sqrt;
    using hypee::ad::asin;
    using hypee::ad::clamp_min;
    using hypee::ad::clamp_unit_interval;

    S norm = sqrt(clamp_min(geometry::spatial_norm_sq_core(ambient_x), kApexNormFloor));
    S ratio = clamp_unit_interval((2.0 * K) / (sqrt(c) * norm));
    return asin(ratio);
}

// ext(x,y) = acos( (y_t + x_t * c*<x,y>_L) / (|x_space| * sqrt((c*<x,y>_L)^2 - 1)) ),
// the exterior angle at x between the geodesic rays toward the origin and toward y.
template <class S>
S exterior_angle_core(std::span<const S> ambient_x, std::span<const S> ambient_y, double c) {
    using std::sqrt;
    using std::acos;
    using hypee::ad::sqrt;
    using hypee::ad::acos;
    using hypee::ad::clamp_min;
    using hypee::ad::clamp_unit;

    S ip = geometry::lorentz_inner_core(ambient_x, ambient_y);
    S cip = c * ip;
    S denom_sq = clamp_min(cip * cip - 1.0, kConeDenomFloor);
    S x_norm = sqrt(clamp_min(geometry::spatial_norm_sq_core(ambient_x), kApexNormFloor));
    S num = ambient_y[0] + ambient_x[0] * cip;
    S ratio = clamp_unit(num / (x_norm * sqrt(denom_sq)));
    return acos(ratio);
}

// L_entail(child, parent) = max(0, ext(parent, child) - aper(parent))
template <class S>
S entailment_loss_pair_core(std::span<const S> ambient_parent, std::span<const S> ambient_child,
                            double K, double c) {
    using hypee::ad::hinge;
    S ext = exterior_angle_core(ambient_parent, ambient_child, c);
    S aper = half_aperture_core(ambient_parent, K, c);
    return hinge(ext - aper);
}

// ---- typed double API -------------------------------------------------------

double half_aperture(const geometry::LorentzPoint& x, const ConeConfig& cfg);

double exterior_angle(const geometry::LorentzPoint& x, const geometry::LorentzPoint& y,
                      geometry::Curvature c);

double entailment_loss_pair(const geometry::LorentzPoint& parent,
                            const geometry::LorentzPoint& child, const ConeConfig& cfg);

// Relaxed membership test: ext(parent, candidate) <= T * aper(parent).
bool cone_membership(const geometry::LorentzPoint& parent,
                     const geometry::LorentzPoint& candidate, double T, const ConeConfig& cfg);

} // namespace hypee::entailment
