#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace hypee::ad {

// Reverse-mode tape. Each node stores at most two parents together with the
// local partial derivatives, computed eagerly on the forward pass; a gradient
// is one reverse sweep over the node array. Nodes are appended in evaluation
// order, so the array is already a topological sort.
class Tape {
public:
    struct Node {
        int32_t p1;
        int32_t p2;
        double w1;
        double w2;
    };

    int32_t leaf() {
        nodes_.push_back({-1, -1, 0.0, 0.0});
        return last();
    }

    int32_t unary(int32_t p, double w) {
        nodes_.push_back({p, -1, w, 0.0});
        return last();
    }

    int32_t binary(int32_t a, double wa, int32_t b, double wb) {
        nodes_.push_back({a, b, wa, wb});
        return last();
    }

    size_t size() const { return nodes_.size(); }

    void clear() {
        nodes_.clear();
        branch_log_.clear();
        branch_margins_.clear();
    }

    void reserve(size_t n) { nodes_.reserve(n); }

    // Adjoint sweep seeded at `seed`; `adjoint` is resized to the tape length.
    void gradient(int32_t seed, std::vector<double>& adjoint) const {
        adjoint.assign(nodes_.size(), 0.0);
        adjoint[static_cast<size_t>(seed)] = 1.0;
        for (int32_t i = seed; i >= 0; --i) {
            const double a = adjoint[static_cast<size_t>(i)];
            if (a == 0.0) continue;
            const Node& n = nodes_[static_cast<size_t>(i)];
            if (n.p1 >= 0) adjoint[static_cast<size_t>(n.p1)] += n.w1 * a;
            if (n.p2 >= 0) adjoint[static_cast<size_t>(n.p2)] += n.w2 * a;
        }
    }

    // Branch decisions taken by clamp/hinge ops, in execution order. Two
    // forward passes with identical logs took the same differentiable path,
    // which is what finite-difference checks need to know.
    void log_branch(uint8_t taken, double margin) {
        branch_log_.push_back(taken);
        branch_margins_.push_back(margin);
    }

    const std::vector<uint8_t>& branch_log() const { return branch_log_; }
    const std::vector<double>& branch_margins() const { return branch_margins_; }

    // Smallest distance to a clamp/hinge boundary seen on this tape.
    double min_branch_margin() const {
        double m = std::numeric_limits<double>::infinity();
        for (double x : branch_margins_) m = x < m ? x : m;
        return m;
    }

private:
    int32_t last() const { return static_cast<int32_t>(nodes_.size()) - 1; }

    std::vector<Node> nodes_;
    std::vector<uint8_t> branch_log_;
    std::vector<double> branch_margins_;
};

struct Var {
    Tape* tape = nullptr;
    int32_t id = -1;
    double v = 0.0;
};

inline Var leaf(Tape& t, double v) { return {&t, t.leaf(), v}; }

// A constant participates in the graph but absorbs no gradient.
inline Var constant(Tape& t, double v) { return {&t, t.leaf(), v}; }

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.v; }

// ---- arithmetic -----------------------------------------------------------

inline Var operator+(const Var& a, const Var& b) {
    return {a.tape, a.tape->binary(a.id, 1.0, b.id, 1.0), a.v + b.v};
}
inline Var operator+(const Var& a, double b) {
    return {a.tape, a.tape->unary(a.id, 1.0), a.v + b};
}
inline Var operator+(double a, const Var& b) { return b + a; }

inline Var operator-(const Var& a, const Var& b) {
    return {a.tape, a.tape->binary(a.id, 1.0, b.id, -1.0), a.v - b.v};
}
inline Var operator-(const Var& a, double b) {
    return {a.tape, a.tape->unary(a.id, 1.0), a.v - b};
}
inline Var operator-(double a, const Var& b) {
    return {b.tape, b.tape->unary(b.id, -1.0), a - b.v};
}
inline Var operator-(const Var& a) {
    return {a.tape, a.tape->unary(a.id, -1.0), -a.v};
}

inline Var operator*(const Var& a, const Var& b) {
    return {a.tape, a.tape->binary(a.id, b.v, b.id, a.v), a.v * b.v};
}
inline Var operator*(const Var& a, double b) {
    return {a.tape, a.tape->unary(a.id, b), a.v * b};
}
inline Var operator*(double a, const Var& b) { return b * a; }

inline Var operator/(const Var& a, const Var& b) {
    const double inv = 1.0 / b.v;
    return {a.tape, a.tape->binary(a.id, inv, b.id, -a.v * inv * inv), a.v * inv};
}
inline Var operator/(const Var& a, double b) { return a * (1.0 / b); }
inline Var operator/(double a, const Var& b) {
    const double inv = 1.0 / b.v;
    return {b.tape, b.tape->unary(b.id, -a * inv * inv), a * inv};
}

inline Var& operator+=(Var& a, const Var& b) { a = a + b; return a; }
inline Var& operator+=(Var& a, double b) { a = a + b; return a; }
inline Var& operator-=(Var& a, const Var& b) { a = a - b; return a; }
inline Var& operator*=(Var& a, const Var& b) { a = a * b; return a; }

// ---- elementary functions ---------------------------------------------------

inline Var sqrt(const Var& a) {
    const double s = std::sqrt(a.v);
    return {a.tape, a.tape->unary(a.id, 0.5 / s), s};
}
inline Var exp(const Var& a) {
    const double e = std::exp(a.v);
    return {a.tape, a.tape->unary(a.id, e), e};
}
inline Var log(const Var& a) {
    return {a.tape, a.tape->unary(a.id, 1.0 / a.v), std::log(a.v)};
}
inline Var tanh(const Var& a) {
    const double t = std::tanh(a.v);
    return {a.tape, a.tape->unary(a.id, 1.0 - t * t), t};
}
inline Var sinh(const Var& a) {
    return {a.tape, a.tape->unary(a.id, std::cosh(a.v)), std::sinh(a.v)};
}
inline Var cosh(const Var& a) {
    return {a.tape, a.tape->unary(a.id, std::sinh(a.v)), std::cosh(a.v)};
}
inline Var asinh(const Var& a) {
    return {a.tape, a.tape->unary(a.id, 1.0 / std::sqrt(a.v * a.v + 1.0)), std::asinh(a.v)};
}
inline Var acos(const Var& a) {
    return {a.tape, a.tape->unary(a.id, -1.0 / std::sqrt(1.0 - a.v * a.v)), std::acos(a.v)};
}
inline Var asin(const Var& a) {
    return {a.tape, a.tape->unary(a.id, 1.0 / std::sqrt(1.0 - a.v * a.v)), std::asin(a.v)};
}

// Stops gradient flow; the value passes through as a constant.
inline Var detach(const Var& a) { return constant(*a.tape, a.v); }
inline double detach(double a) { return a; }

// ---- guarded branches -------------------------------------------------------
// Every branching primitive logs which side it took plus the distance to the
// boundary. Gradients at a clamped branch are defined as zero (subgradient
// convention used throughout).

inline double hinge(double x) { return x > 0.0 ? x : 0.0; }
inline Var hinge(const Var& a) {
    if (a.v > 0.0) {
        a.tape->log_branch(1, a.v);
        return {a.tape, a.tape->unary(a.id, 1.0), a.v};
    }
    a.tape->log_branch(0, -a.v);
    return constant(*a.tape, 0.0);
}

inline double clamp_min(double x, double lo) { return x < lo ? lo : x; }
inline Var clamp_min(const Var& a, double lo) {
    if (a.v >= lo) {
        a.tape->log_branch(1, a.v - lo);
        return a;
    }
    a.tape->log_branch(0, lo - a.v);
    return constant(*a.tape, lo);
}

inline double clamp_unit(double x) { return x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x); }
inline Var clamp_unit(const Var& a) {
    if (a.v > 1.0) {
        a.tape->log_branch(2, a.v - 1.0);
        return constant(*a.tape, 1.0);
    }
    if (a.v < -1.0) {
        a.tape->log_branch(0, -1.0 - a.v);
        return constant(*a.tape, -1.0);
    }
    const double margin = std::min(1.0 - a.v, a.v + 1.0);
    a.tape->log_branch(1, margin);
    return a;
}

// clamp to [0, 1], used by the aperture formula.
inline double clamp_unit_interval(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }
inline Var clamp_unit_interval(const Var& a) {
    if (a.v > 1.0) {
        a.tape->log_branch(2, a.v - 1.0);
        return constant(*a.tape, 1.0);
    }
    if (a.v < 0.0) {
        a.tape->log_branch(0, -a.v);
        return constant(*a.tape, 0.0);
    }
    const double margin = std::min(1.0 - a.v, a.v);
    a.tape->log_branch(1, margin);
    return a;
}

} // namespace hypee::ad
