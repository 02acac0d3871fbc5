#pragma once

// Skew products on the quadrant (0,inf)^2.
//
//   P(x, y) = (f0(x), g0(y))   for x < 1
//   P(x, y) = (x - 1, y + 1)   for x > 1
//
// and the induced versions Phat = P^theta on (g0(1),1) x (0,inf), Ptilde = Phat^2.
// Fiber maps are composed in closed form: along a branch (s,q) the fiber map is
// Ghat(y) = g0^{q-1}(g0(y) + s - 1).

#include "hypmix/errors.hpp"
#include "hypmix/family.hpp"
#include "hypmix/inducing.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

namespace hypmix {

enum class Region { left, right };

struct PlanePoint {
    double x = 0.5;
    double y = 1.0;
    Region region() const { return x < 1.0 ? Region::left : Region::right; }
    bool valid() const { return x > 0.0 && y > 0.0 && x != 1.0 && std::isfinite(x) && std::isfinite(y); }
};

// Point of a suspension space: base point plus height 0 <= s < roof(base).
enum class Space { sigma_rho, sigma_r };

struct FlowPoint {
    PlanePoint base;
    double s = 0.0;
    Space space = Space::sigma_rho;
};

struct FiberImage {
    double lo;
    double hi;
    double width() const { return hi - lo; }
};

inline bool is_singular(const PlanePoint& p) { return p.x == 1.0; }

inline PlanePoint P_step(const MapFamily& fam, const PlanePoint& p) {
    if (!(p.x > 0.0 && p.y > 0.0)) throw DomainError("base map requires x, y > 0");
    if (p.x == 1.0) throw SingularityError("base map is undefined on the line x = 1");
    if (p.x < 1.0) return PlanePoint{fam.f0(p.x), fam.g0(p.y)};
    return PlanePoint{p.x - 1.0, p.y + 1.0};
}

// Inverse of the base map; exists everywhere except on y = 1.
inline PlanePoint P_inverse(const MapFamily& fam, const PlanePoint& p) {
    if (!(p.x > 0.0 && p.y > 0.0)) throw DomainError("inverse base map requires x, y > 0");
    if (p.y == 1.0) throw SingularityError("inverse base map is undefined on the line y = 1");
    if (p.y < 1.0) return PlanePoint{fam.g0(p.x), fam.f0(p.y)};
    return PlanePoint{p.x + 1.0, p.y - 1.0};
}

// Fiber map of a branch as a matrix: g0^{q-1} o g1^{s-1} o g0.
inline Mobius<double> ghat_matrix(const MapFamily& fam, BranchIndex b) {
    return fam.g0_power(static_cast<std::uint64_t>(b.q - 1)) * translation(static_cast<double>(b.s - 1)) *
           fam.g0_matrix();
}

inline Mobius<BigInt> ghat_matrix_exact(const MapFamily& fam, BranchIndex b) {
    return fam.g0_exact().pow(static_cast<std::uint64_t>(b.q - 1)) * translation_exact(b.s - 1) * fam.g0_exact();
}

struct FiberValue {
    double value;
    double d1;
};

inline FiberValue ghat_eval(const MapFamily& fam, BranchIndex b, double y) {
    if (!(y > 0.0)) throw DomainError("fiber map requires y > 0");
    const auto m = ghat_matrix(fam, b);
    return FiberValue{m(y), m.derivative(y)};
}

// Derivative as the product of g0' along the fiber orbit
// y, g0(y) + s - 1, g0 of that, ... (q factors).
inline FiberValue ghat_series(const MapFamily& fam, BranchIndex b, double y) {
    double d1 = fam.g0_eval(y).d1;
    double z = fam.g0(y) + static_cast<double>(b.s - 1);
    for (long long i = 1; i < b.q; ++i) {
        const Jet j = fam.g0_eval(z);
        d1 *= j.d1;
        z = j.value;
    }
    return FiberValue{z, d1};
}

inline FiberImage ghat_image(const MapFamily& fam, BranchIndex b) {
    check_branch(b);
    const auto m = fam.g0_power(static_cast<std::uint64_t>(b.q - 1));
    return FiberImage{m(static_cast<double>(b.s - 1)), m(static_cast<double>(b.s))};
}

struct InducedStep {
    PlanePoint point;
    BranchIndex index;
};

inline InducedStep Phat_step(const MapFamily& fam, const PlanePoint& p) {
    const auto loc = locate(fam, p.x);
    const auto fx = fhat_branch(fam, loc.index, p.x);
    return InducedStep{{fx.value, ghat_eval(fam, loc.index, p.y).value}, loc.index};
}

struct InducedStep2 {
    PlanePoint point;
    QuadIndex index;
};

inline InducedStep2 Ptilde_step(const MapFamily& fam, const PlanePoint& p) {
    const auto a = Phat_step(fam, p);
    InducedStep b;
    try {
        b = Phat_step(fam, a.point);
    } catch (const BoundaryError& e) {
        throw BoundaryError(std::string("second induced step undefined: ") + e.what(), e.point);
    }
    return InducedStep2{b.point, {a.index, b.index}};
}

inline FiberValue gtilde_eval(const MapFamily& fam, const QuadIndex& quad, double y) {
    const auto a = ghat_eval(fam, quad.first, y);
    const auto b = ghat_eval(fam, quad.second, a.value);
    return FiberValue{b.value, a.d1 * b.d1};
}

inline double gtilde_deriv(const MapFamily& fam, const QuadIndex& quad, double y) {
    return gtilde_eval(fam, quad, y).d1;
}

// Number of steps of the induced map along the raw base map.
inline long long theta(BranchIndex b) { return b.s + b.q - 1; }
inline long long theta(const QuadIndex& q) { return theta(q.first) + theta(q.second); }

// ---------------------------------------------------------------- runs

// Maximal number of consecutive base steps that stay on one side of x = 1.
// Right runs translate by (-1, +1); left runs apply f0 and g0. The last step
// of a run is the one that crosses x = 1. Returns 0 on the singular line.
inline std::uint64_t run_length(const MapFamily& fam, double x) {
    if (x == 1.0) return 0;
    if (x > 1.0) {
        const double n = std::ceil(x - 1.0);
        if (!(n < 1.8e19)) throw OverflowError("right run too long");
        return static_cast<std::uint64_t>(n);
    }
    // Left run: count k >= 0 with f0^k(x) < 1.
    if (fam.is_modular()) {
        // f0^k(x) = x / (1 - k x) < 1  <=>  (k + 1) x < 1.
        auto stays = [&](double k) { return std::fma(k + 1.0, x, -1.0) < 0.0; };
        double n = std::floor(1.0 / x - 1.0);
        if (!(n < 1.8e19)) throw OverflowError("left run too long");
        while (n > 0 && !stays(n - 1.0)) n -= 1.0;
        while (stays(n)) n += 1.0;
        return static_cast<std::uint64_t>(n);
    }
    std::uint64_t n = 0;
    double z = x;
    while (z < 1.0) {
        z = fam.f0(z);
        ++n;
    }
    return n;
}

// n steps of the base map inside one run (n at most the run length).
inline PlanePoint run_advance(const MapFamily& fam, const PlanePoint& p, std::uint64_t n) {
    if (n == 0) return p;
    if (p.x > 1.0) {
        const double k = static_cast<double>(n);
        return PlanePoint{p.x - k, p.y + k};
    }
    const auto f = fam.f0_power(n);
    const auto g = fam.g0_power(n);
    const double den = std::fma(f.c, p.x, f.d);
    if (!(den > 0.0)) throw SingularityError("left run reached the line x = 1");
    return PlanePoint{(f.a * p.x + f.b) / den, g(p.y)};
}

}  // namespace hypmix
