#include "hypee/entailment.hpp"

#include <cmath>

namespace hypee::entailment {

namespace {

void require_not_origin(const geometry::LorentzPoint& x, const char* who) {
    if (geometry::spatial_norm(x) < geometry::kDegenerateTangentNorm) {
        throw std::invalid_argument(std::string(who) + ": undefined at the origin");
    }
}

} // namespace

double half_aperture(const geometry::LorentzPoint& x, const ConeConfig& cfg) {
    geometry::require_on_manifold(x, cfg.c, "half_aperture");
    require_not_origin(x, "half_aperture");
    return half_aperture_core(x.ambient(), cfg.K, cfg.c.c);
}

double exterior_angle(const geometry::LorentzPoint& x, const geometry::LorentzPoint& y,
                      geometry::Curvature c) {
    geometry::require_on_manifold(x, c, "exterior_angle");
    geometry::require_on_manifold(y, c, "exterior_angle");
    require_not_origin(x, "exterior_angle");
    if (geometry::geodesic_distance(x, y, c) < 1e-9) {
        throw std::invalid_argument("exterior_angle: degenerate configuration (y == x)");
    }
    return exterior_angle_core(x.ambient(), y.ambient(), c.c);
}

double entailment_loss_pair(const geometry::LorentzPoint& parent,
                            const geometry::LorentzPoint& child, const ConeConfig& cfg) {
    geometry::require_on_manifold(parent, cfg.c, "entailment_loss_pair");
    geometry::require_on_manifold(child, cfg.c, "entailment_loss_pair");
    require_not_origin(parent, "entailment_loss_pair");
    return entailment_loss_pair_core(parent.ambient(), child.ambient(), cfg.K, cfg.c.c);
}

bool cone_membership(const geometry::LorentzPoint& parent,
                     const geometry::LorentzPoint& candidate, double T, const ConeConfig& cfg) {
    if (!(T > 0.0)) {
        throw std::invalid_argument("cone_membership: threshold T must be positive, got " +
                                    std::to_string(T));
    }
    geometry::require_on_manifold(parent, cfg.c, "cone_membership");
    geometry::require_on_manifold(candidate, cfg.c, "cone_membership");
    require_not_origin(parent, "cone_membership");
    const double ext = exterior_angle_core(parent.ambient(), candidate.ambient(), cfg.c.c);
    const double aper = half_aperture_core(parent.ambient(), cfg.K, cfg.c.c);
    return ext <= T * aper;
}

} // namespace hypee::entailment
