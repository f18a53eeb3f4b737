#include "hypee/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace hypee::geometry {

namespace {

void require_finite(std::span<const double> v, const char* who) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument(std::string(who) + ": non-finite component");
        }
    }
}

} // namespace

double lorentz_inner(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("lorentz_inner: dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                    ")");
    }
    require_finite(a, "lorentz_inner");
    require_finite(b, "lorentz_inner");
    return lorentz_inner_core(a, b);
}

double lorentz_inner(const LorentzPoint& x, const LorentzPoint& y) {
    return lorentz_inner(x.ambient(), y.ambient());
}

LorentzPoint lift(const SpatialVector& space, Curvature c) {
    if (space.empty()) throw std::invalid_argument("lift: space must have at least 1 dimension");
    require_finite(space, "lift");
    return LorentzPoint::from_ambient_unchecked(
        lift_core(std::span<const double>(space), c.c));
}

LorentzPoint origin(size_t n, Curvature c) {
    return lift(SpatialVector(n, 0.0), c);
}

double manifold_residual(const LorentzPoint& x, Curvature c) {
    return std::abs(lorentz_inner_core(x.ambient(), x.ambient()) + 1.0 / c.c);
}

void require_on_manifold(const LorentzPoint& x, Curvature c, const char* who) {
    const double r = manifold_residual(x, c);
    if (!(r <= kManifoldTol)) {
        throw std::invalid_argument(std::string(who) + ": point is off-manifold (residual " +
                                    std::to_string(r) + ")");
    }
}

double geodesic_distance(const LorentzPoint& x, const LorentzPoint& y, Curvature c) {
    require_on_manifold(x, c, "geodesic_distance");
    require_on_manifold(y, c, "geodesic_distance");
    if (x == y) return 0.0;
    const double arg = -c.c * lorentz_inner_core(x.ambient(), y.ambient());
    return std::acosh(ad::clamp_min(arg, 1.0)) / std::sqrt(c.c);
}

LorentzPoint exp_map_origin(const TangentVector& v, Curvature c) {
    if (v.space.empty()) throw std::invalid_argument("exp_map_origin: empty tangent");
    require_finite(v.space, "exp_map_origin");
    return LorentzPoint::from_ambient_unchecked(
        exp_map_origin_core(std::span<const double>(v.space), c.c));
}

TangentVector log_map_origin(const LorentzPoint& x, Curvature c) {
    require_on_manifold(x, c, "log_map_origin");
    const double sc = std::sqrt(c.c);
    const auto space = x.space();
    double norm_sq = 0.0;
    for (double s : space) norm_sq += s * s;
    const double norm = std::sqrt(norm_sq);

    TangentVector v;
    v.space.assign(space.begin(), space.end());
    if (norm < kDegenerateTangentNorm) {
        std::fill(v.space.begin(), v.space.end(), 0.0);
        return v;
    }
    // |v| = d(o, x) and v points along x_space.
    const double dist = std::acosh(ad::clamp_min(sc * x.time(), 1.0)) / sc;
    const double coeff = dist / norm;
    for (double& s : v.space) s *= coeff;
    return v;
}

double spatial_norm(const LorentzPoint& x) {
    double acc = 0.0;
    for (double s : x.space()) acc += s * s;
    return std::sqrt(acc);
}

LorentzPoint scale_then_lift(const SpatialVector& z, double alpha, Curvature c) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("scale_then_lift: scale must be positive, got " +
                                    std::to_string(alpha));
    }
    SpatialVector scaled(z.size());
    for (size_t i = 0; i < z.size(); ++i) scaled[i] = alpha * z[i];
    TangentVector v{std::move(scaled)};
    return exp_map_origin(v, c);
}

} // namespace hypee::geometry
