#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hypee/ad.hpp"
#include "hypee/errors.hpp"

namespace hypee::geometry {

// Tolerance for the hyperboloid constraint |<x,x>_L + 1/c|.
inline constexpr double kManifoldTol = 1e-6;
// Below this tangent norm the exponential map takes its degenerate branch.
inline constexpr double kDegenerateTangentNorm = 1e-12;
// cosh overflow guard: tangent norms above this are rejected, not saturated.
inline constexpr double kMaxTangentNorm = 32.0;

struct Curvature {
    double c = 1.0;

    Curvature() = default;
    explicit Curvature(double value) : c(value) {
        if (!(c > 0.0) || !std::isfinite(c)) {
            throw std::invalid_argument("curvature must be a positive finite real, got " +
                                        std::to_string(value));
        }
    }
};

using SpatialVector = std::vector<double>;

// ---- template cores ---------------------------------------------------------
// Ambient vectors are laid out time-first: (time; space_1 .. space_n). The
// cores are shared between the plain double path and the autodiff path, so the
// training objective and the inference-time geometry cannot drift apart.

template <class S>
S dot(std::span<const S> a, std::span<const S> b) {
    S acc = a[0] * b[0];
    for (size_t i = 1; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// <x,y>_L = -x_t*y_t + sum_k x_k*y_k
template <class S>
S lorentz_inner_core(std::span<const S> a, std::span<const S> b) {
    S acc = -(a[0] * b[0]);
    for (size_t i = 1; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

template <class S>
S spatial_norm_sq_core(std::span<const S> ambient) {
    using hypee::ad::value_of;
    if (ambient.size() < 2) return ambient[0] * 0.0;
    S acc = ambient[1] * ambient[1];
    for (size_t i = 2; i < ambient.size(); ++i) acc += ambient[i] * ambient[i];
    return acc;
}

// time = sqrt(1/c + |space|^2); the time coordinate is always derived.
template <class S>
std::vector<S> lift_core(std::span<const S> space, double c) {
    using std::sqrt;
    using hypee::ad::sqrt;
    S norm_sq = space[0] * space[0];
    for (size_t i = 1; i < space.size(); ++i) norm_sq += space[i] * space[i];
    std::vector<S> ambient;
    ambient.reserve(space.size() + 1);
    ambient.push_back(sqrt(norm_sq + 1.0 / c));
    for (const S& s : space) ambient.push_back(s);
    return ambient;
}

// exp_o(v) for v = (0; z): time = cosh(r)/sqrt(c), space = sinh(r) * z / (sqrt(c)*|z|),
// with r = sqrt(c)*|z|. Unit-speed: d(o, exp_o(v)) = |z|.
template <class S>
std::vector<S> exp_map_origin_core(std::span<const S> v_space, double c) {
    using std::sqrt;
    using std::cosh;
    using std::sinh;
    using hypee::ad::sqrt;
    using hypee::ad::cosh;
    using hypee::ad::sinh;
    using hypee::ad::value_of;

    const double sc = std::sqrt(c);
    S norm_sq = v_space[0] * v_space[0];
    for (size_t i = 1; i < v_space.size(); ++i) norm_sq += v_space[i] * v_space[i];

    std::vector<S> ambient;
    ambient.reserve(v_space.size() + 1);
    const double norm_val = std::sqrt(value_of(norm_sq));
    if (norm_val > kMaxTangentNorm) {
        throw NumericError("tangent norm " + std::to_string(norm_val) +
                           " exceeds the supported maximum " + std::to_string(kMaxTangentNorm));
    }
    if (norm_val < kDegenerateTangentNorm) {
        // degenerate branch: exp(0) = origin
        ambient.push_back(norm_sq * 0.0 + 1.0 / sc);
        for (size_t i = 0; i < v_space.size(); ++i) ambient.push_back(v_space[i] * 0.0);
        return ambient;
    }

    S norm = sqrt(norm_sq);
    S r = sc * norm;
    ambient.push_back(cosh(r) * (1.0 / sc));
    S coeff = sinh(r) / (sc * norm);
    for (const S& z : v_space) ambient.push_back(coeff * z);
    return ambient;
}

// ---- typed double API -------------------------------------------------------

class LorentzPoint {
public:
    double time() const { return ambient_[0]; }
    std::span<const double> space() const { return {ambient_.data() + 1, ambient_.size() - 1}; }
    std::span<const double> ambient() const { return ambient_; }
    size_t dim() const { return ambient_.size() - 1; }

    bool operator==(const LorentzPoint& other) const { return ambient_ == other.ambient_; }

    friend LorentzPoint lift(const SpatialVector& space, Curvature c);
    friend LorentzPoint origin(size_t n, Curvature c);

    // Used by readers and the forward pass; ambient must already satisfy the
    // manifold constraint (validated in debug paths by callers).
    static LorentzPoint from_ambient_unchecked(std::vector<double> ambient) {
        LorentzPoint p;
        p.ambient_ = std::move(ambient);
        return p;
    }

private:
    LorentzPoint() = default;
    std::vector<double> ambient_;
};

struct TangentVector {
    // Tangent at the origin: the time component is identically zero.
    SpatialVector space;
};

double lorentz_inner(std::span<const double> a, std::span<const double> b);
double lorentz_inner(const LorentzPoint& x, const LorentzPoint& y);

LorentzPoint lift(const SpatialVector& space, Curvature c);
LorentzPoint origin(size_t n, Curvature c);

double manifold_residual(const LorentzPoint& x, Curvature c);
void require_on_manifold(const LorentzPoint& x, Curvature c, const char* who);

// d_L(x,y) = acosh(-c <x,y>_L) / sqrt(c); the acosh argument is clamped to >= 1.
double geodesic_distance(const LorentzPoint& x, const LorentzPoint& y, Curvature c);

LorentzPoint exp_map_origin(const TangentVector& v, Curvature c);
TangentVector log_map_origin(const LorentzPoint& x, Curvature c);

double spatial_norm(const LorentzPoint& x);

// h = exp_o([alpha * z, 0])
LorentzPoint scale_then_lift(const SpatialVector& z, double alpha, Curvature c);

} // namespace hypee::geometry
