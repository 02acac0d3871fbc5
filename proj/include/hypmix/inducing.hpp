#pragma once

// Countable Markov partitions of (g0(1), 1) and the induced expanding maps.
//
// I_s      = (g0(s-1), g0(s))                      first-return branch of f
// J_s^q    = phi_s^q((g0(1), 1)),  phi_s^q = g0 o g1^{s-1} o g0^{q-1}
// F        = f0 - (s-1) on I_s
// Fhat     = f0^{q-1} o f1^{s-1} o f0 on J_s^q     (full branch onto (g0(1),1))
// Ftilde   = Fhat o Fhat
//
// Every branch is a linear fractional map, so values and derivatives come from
// one matrix per branch. Points are kept as w = 1 - x where it matters: for
// x in [1/2, 1) the subtraction is exact and avoids cancellation later on.

#include "hypmix/errors.hpp"
#include "hypmix/family.hpp"
#include "hypmix/mobius.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace hypmix {

template <class T>
struct Interval {
    T lo;
    T hi;
    bool contains(const T& v) const { return lo < v && v < hi; }
};

struct BranchIndex {
    long long s = 2;
    long long q = 1;
    friend bool operator==(const BranchIndex&, const BranchIndex&) = default;
};

struct QuadIndex {
    BranchIndex first;
    BranchIndex second;
    friend bool operator==(const QuadIndex&, const QuadIndex&) = default;
};

struct ReturnTimes {
    long long tau = 0;
    long long kappa = 0;
    long long theta = 0;
};

namespace detail {

inline constexpr double exact_int_limit = 9007199254740992.0;  // 2^53

// Sign of x - v, where v_approx is a correctly rounded (or nearly so) value of
// an exact rational v. Falls back to rational arithmetic when the two are too
// close to decide in floating point. Throws BoundaryError on exact equality.
template <class ExactFn>
int compare_point(double x, double v_approx, ExactFn&& exact, bool trust_float = true) {
    const double margin = 8.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(v_approx), 1e-300);
    if (trust_float) {
        if (x > v_approx + margin) return 1;
        if (x < v_approx - margin) return -1;
    }
    const Rational v = exact();
    const Rational rx(x);
    if (rx == v) throw BoundaryError("point lies on a partition endpoint", x);
    return rx > v ? 1 : -1;
}

// Evaluate (a x + b) / (c x + d) at x = 1 - w using fused multiply-adds, so that
// integer coefficients below 2^53 give a numerator and a denominator that are
// each rounded once.
struct Fraction {
    double num;
    double den;
};
inline Fraction eval_one_minus(const Mobius<double>& m, double w) {
    return Fraction{std::fma(-m.a, w, m.a + m.b), std::fma(-m.c, w, m.c + m.d)};
}

inline long double product_log(std::span<const double> factors) {
    long double acc = 0.0L;
    for (double f : factors) acc += std::log(static_cast<long double>(f));
    return acc;
}

}  // namespace detail

// ---------------------------------------------------------------- intervals

inline Interval<double> interval_I(const MapFamily& fam, long long s) {
    if (s < 1) throw DomainError("interval_I requires s >= 1");
    return {fam.g0(static_cast<double>(s - 1)), fam.g0(static_cast<double>(s))};
}

inline Interval<Rational> interval_I_exact(const MapFamily& fam, long long s) {
    if (s < 1) throw DomainError("interval_I requires s >= 1");
    return {apply_exact(fam.g0_exact(), Rational(s - 1)), apply_exact(fam.g0_exact(), Rational(s))};
}

// Inverse branch phi_s^q = g0 o g1^{s-1} o g0^{q-1}.
inline Mobius<BigInt> branch_inverse_exact(const MapFamily& fam, BranchIndex b) {
    return fam.g0_exact() * translation_exact(b.s - 1) * fam.g0_exact().pow(static_cast<std::uint64_t>(b.q - 1));
}

inline Mobius<double> branch_inverse(const MapFamily& fam, BranchIndex b) {
    return fam.g0_matrix() * translation(static_cast<double>(b.s - 1)) *
           fam.g0_power(static_cast<std::uint64_t>(b.q - 1));
}

// The forward branch Fhat restricted to J_s^q: f0^{q-1} o f1^{s-1} o f0.
inline Mobius<double> branch_forward(const MapFamily& fam, BranchIndex b) {
    return fam.f0_power(static_cast<std::uint64_t>(b.q - 1)) * translation(-static_cast<double>(b.s - 1)) *
           fam.f0_matrix();
}

inline Mobius<BigInt> branch_forward_exact(const MapFamily& fam, BranchIndex b) {
    return fam.f0_exact().pow(static_cast<std::uint64_t>(b.q - 1)) * translation_exact(-(b.s - 1)) * fam.f0_exact();
}

inline void check_branch(BranchIndex b) {
    if (b.s < 2 || b.q < 1) throw DomainError("branch index requires s >= 2 and q >= 1");
}

// Left end of the induced domain, g0(1).
inline double base_left(const MapFamily& fam) { return fam.g0(1.0); }
inline Rational base_left_exact(const MapFamily& fam) { return apply_exact(fam.g0_exact(), Rational(1)); }

inline Interval<Rational> interval_J_exact(const MapFamily& fam, BranchIndex b) {
    check_branch(b);
    const auto phi = branch_inverse_exact(fam, b);
    return {apply_exact(phi, base_left_exact(fam)), apply_exact(phi, Rational(1))};
}

inline Interval<double> interval_J(const MapFamily& fam, BranchIndex b) {
    check_branch(b);
    const auto phi = branch_inverse(fam, b);
    return {phi(base_left(fam)), phi(1.0)};
}

// |J_s^q| without subtracting the two endpoints.
inline double interval_J_length(const MapFamily& fam, BranchIndex b) {
    check_branch(b);
    return branch_inverse(fam, b).image_length(base_left(fam), 1.0);
}

// ---------------------------------------------------------------- locate

namespace detail {

// Smallest n >= lo such that pred(n) holds, for a monotone predicate that
// eventually holds. Exponential galloping followed by bisection.
template <class Pred>
long long first_true(long long lo, Pred&& pred) {
    if (pred(lo)) return lo;
    long long bad = lo;
    long long step = 1;
    long long good = lo + 1;
    while (!pred(good)) {
        bad = good;
        if (step > (std::numeric_limits<long long>::max() >> 2)) throw OverflowError("branch index search overflow");
        step *= 2;
        good = lo + step;
    }
    while (good - bad > 1) {
        const long long mid = bad + (good - bad) / 2;
        if (pred(mid)) good = mid;
        else bad = mid;
    }
    return good;
}

}  // namespace detail

// s with x in I_s, for x in (0, 1).
inline long long locate_s(const MapFamily& fam, double x) {
    if (!(x > 0.0 && x < 1.0)) throw DomainError("locate requires x in (0,1)");
    const auto& g0e = fam.g0_exact();
    auto below = [&](long long n) {
        // x < g0(n) ?
        return detail::compare_point(x, fam.g0(static_cast<double>(n)),
                                     [&] { return apply_exact(g0e, Rational(n)); }, fam.is_modular()) < 0;
    };
    // Seed the search with the floating estimate f0(x) to keep it short.
    long long start = 1;
    const double t = fam.scale() * x / (1.0 - x);
    if (std::isfinite(t) && t < detail::exact_int_limit / 4) start = std::max<long long>(1, static_cast<long long>(t) - 1);
    while (start > 1 && below(start - 1)) start = std::max<long long>(1, start / 2);
    const long long s = detail::first_true(start, below);
    if (s > 1)
        detail::compare_point(x, fam.g0(static_cast<double>(s - 1)), [&] { return apply_exact(g0e, Rational(s - 1)); },
                              fam.is_modular());
    return s;
}

// q with x in J_s^q, given x already known to lie in I_s (s >= 2).
inline long long locate_q(const MapFamily& fam, double x, long long s) {
    // c_s^n = phi_s^{n+1}(1) decreases to g0(s-1); find the smallest n >= 1 with x > c_s^n.
    auto above_c = [&](long long n) {
        const BranchIndex next{s, n + 1};
        // Matrix entries grow like s * n; past 2^50 the floating endpoint is no longer trusted.
        const bool trust = fam.is_modular() && static_cast<double>(s) * static_cast<double>(n + 2) < 1e15;
        return detail::compare_point(
                   x, branch_inverse(fam, next)(1.0),
                   [&] { return apply_exact(branch_inverse_exact(fam, next), Rational(1)); }, trust) > 0;
    };
    long long start = 1;
    if (fam.is_modular()) {
        // F(x) = (1 - s w) / w and q = floor(1 / F) away from endpoints.
        const double w = 1.0 - x;
        const double F = std::fma(-static_cast<double>(s), w, 1.0) / w;
        const double inv = 1.0 / F;
        if (F > 0.0 && std::isfinite(inv) && inv < detail::exact_int_limit / 4)
            start = std::max<long long>(1, static_cast<long long>(inv) - 1);
    }
    while (start > 1 && above_c(start - 1)) start = std::max<long long>(1, start / 2);
    return detail::first_true(start, above_c);
}

struct Located {
    BranchIndex index;
    ReturnTimes times;
};

inline Located locate(const MapFamily& fam, double x) {
    const double left = base_left(fam);
    if (!(x < 1.0)) throw DomainError("locate requires x < 1");
    if (detail::compare_point(x, left, [&] { return base_left_exact(fam); }) < 0)
        throw DomainError("locate requires x > g0(1)");
    const long long s = locate_s(fam, x);
    const long long q = locate_q(fam, x, s);
    return Located{{s, q}, {s, q, s + q - 1}};
}

inline Located locate_exact(const MapFamily& fam, const Rational& x) {
    const Rational left = base_left_exact(fam);
    if (!(x > left && x < 1)) throw DomainError("locate requires x in (g0(1), 1)");
    const auto& g0e = fam.g0_exact();
    long long s = 2;
    while (!(x < apply_exact(g0e, Rational(s)))) ++s;
    if (x == apply_exact(g0e, Rational(s - 1))) throw BoundaryError("point lies on a partition endpoint", to_double(x));
    long long q = 1;
    for (;; ++q) {
        const Rational c = apply_exact(branch_inverse_exact(fam, {s, q + 1}), Rational(1));
        if (x == c) throw BoundaryError("point lies on a partition endpoint", to_double(x));
        if (x > c) break;
    }
    return Located{{s, q}, {s, q, s + q - 1}};
}

// ---------------------------------------------------------------- induced maps

// First-return map F = f0 - (s-1) on I_s, for x in (0,1).
struct FValue {
    double value;
    double d1;
    long long s;
};

inline FValue F_eval(const MapFamily& fam, double x) {
    const long long s = locate_s(fam, x);
    const auto m = translation(-static_cast<double>(s - 1)) * fam.f0_matrix();
    const auto fr = detail::eval_one_minus(m, 1.0 - x);
    return FValue{fr.num / fr.den, fam.f0_eval(x).d1, s};
}

inline Rational F_exact(const MapFamily& fam, const Rational& x) {
    const Rational fx = apply_exact(fam.f0_exact(), x);
    long long s = 1;
    while (fx > s) ++s;
    if (fx == s - 1 || fx == s) throw BoundaryError("point lies on a partition endpoint", to_double(x));
    return fx - (s - 1);
}

struct FhatValue {
    double value;
    double d1;
    double d2;
    BranchIndex index;
};

// Closed-form evaluation on a known branch.
inline FhatValue fhat_branch(const MapFamily& fam, BranchIndex b, double x) {
    const auto m = branch_forward(fam, b);
    const auto fr = detail::eval_one_minus(m, 1.0 - x);
    const double den = fr.den;
    const double det = std::exp(fam.log_det_power(static_cast<std::uint64_t>(b.q)));
    return FhatValue{fr.num / den, det / (den * den), -2.0 * m.c * det / (den * den * den), b};
}

inline FhatValue Fhat_eval(const MapFamily& fam, double x) {
    const auto loc = locate(fam, x);
    return fhat_branch(fam, loc.index, x);
}

inline Rational Fhat_exact(const MapFamily& fam, const Rational& x) {
    const auto loc = locate_exact(fam, x);
    return apply_exact(branch_forward_exact(fam, loc.index), x);
}

// Orbit x, F(x), F^2(x), ..., F^{q-1}(x) on a branch of Fhat. Each point is
// computed from its own partial composition matrix rather than by iterating.
inline std::vector<double> fhat_orbit(const MapFamily& fam, BranchIndex b, double x) {
    std::vector<double> orbit;
    orbit.reserve(static_cast<std::size_t>(b.q));
    orbit.push_back(x);
    auto m = translation(-static_cast<double>(b.s - 1)) * fam.f0_matrix();
    const double w = 1.0 - x;
    for (long long l = 1; l < b.q; ++l) {
        const auto fr = detail::eval_one_minus(m, w);
        orbit.push_back(fr.num / fr.den);
        m = fam.f0_matrix() * m;
    }
    return orbit;
}

// Fhat derivatives from the product and sum-of-products formulas along the
// orbit. Used to cross-check the closed forms; cost is linear in q.
inline FhatValue fhat_series(const MapFamily& fam, BranchIndex b, double x) {
    const auto orbit = fhat_orbit(fam, b, x);
    const std::size_t n = orbit.size();
    std::vector<double> d1(n), d2(n);
    for (std::size_t l = 0; l < n; ++l) {
        const Jet j = fam.f0_eval(orbit[l]);
        d1[l] = j.d1;
        d2[l] = j.d2;
    }
    const bool extended = n > 1000;
    const Jet last = fam.f0_eval(orbit.back());
    const double value = last.value - (n == 1 ? static_cast<double>(b.s - 1) : 0.0);

    // prefix[j] = prod_{l<j} d1[l]^2, suffix[j] = prod_{l>j} d1[l], summed in log space.
    std::vector<long double> log_prefix(n + 1, 0.0L), log_suffix(n + 1, 0.0L);
    for (std::size_t l = 0; l < n; ++l) log_prefix[l + 1] = log_prefix[l] + 2.0L * std::log(static_cast<long double>(d1[l]));
    for (std::size_t l = n; l-- > 0;) log_suffix[l] = log_suffix[l + 1] + std::log(static_cast<long double>(d1[l]));

    long double first = 0.0L;
    if (extended) first = std::exp(log_suffix[0]);
    else {
        double p = 1.0;
        for (double f : d1) p *= f;
        first = p;
    }
    long double second = 0.0L;
    for (std::size_t j = 0; j < n; ++j)
        second += std::exp(log_prefix[j] + log_suffix[j + 1]) * static_cast<long double>(d2[j]);
    return FhatValue{value, static_cast<double>(first), static_cast<double>(second), b};
}

inline Rational fhat_deriv_exact(const MapFamily& fam, BranchIndex b, const Rational& x) {
    const auto m = branch_forward_exact(fam, b);
    const Rational den = Rational(m.c) * x + Rational(m.d);
    return Rational(m.det()) / (den * den);
}

struct FtildeValue {
    double value;
    double d1;
    QuadIndex index;
};

inline QuadIndex locate_quad(const MapFamily& fam, double x) {
    const auto first = locate(fam, x).index;
    const double y = fhat_branch(fam, first, x).value;
    BranchIndex second;
    try {
        second = locate(fam, y).index;
    } catch (const BoundaryError& e) {
        throw BoundaryError(std::string("second induced step undefined: ") + e.what(), e.point);
    }
    return {first, second};
}

inline FtildeValue Ftilde_eval(const MapFamily& fam, double x) {
    const auto first = Fhat_eval(fam, x);
    FhatValue second{};
    try {
        second = Fhat_eval(fam, first.value);
    } catch (const BoundaryError& e) {
        throw BoundaryError(std::string("second induced step undefined: ") + e.what(), e.point);
    }
    return FtildeValue{second.value, first.d1 * second.d1, {first.index, second.index}};
}

// Inverse-branch composition along a path of branch indices; the last entry
// is applied first, so the result lies in J_{path[0]} and is mapped by Fhat
// onto the cylinder of the remaining path.
struct BranchValue {
    double value;
    double d1;
};

inline Mobius<double> path_matrix(const MapFamily& fam, std::span<const BranchIndex> path) {
    if (path.empty()) throw DomainError("inverse_branch requires a non-empty path");
    auto m = Mobius<double>::identity();
    for (const auto& b : path) {
        check_branch(b);
        m = m * branch_inverse(fam, b);
    }
    return m;
}

inline BranchValue inverse_branch(const MapFamily& fam, std::span<const BranchIndex> path, double x) {
    double value = x;
    double d1 = 1.0;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        check_branch(*it);
        const auto phi = branch_inverse(fam, *it);
        d1 *= phi.derivative(value);
        value = phi(value);
    }
    if (path.empty()) throw DomainError("inverse_branch requires a non-empty path");
    return BranchValue{value, d1};
}

inline Rational inverse_branch_exact(const MapFamily& fam, std::span<const BranchIndex> path, const Rational& x) {
    Rational v = x;
    for (auto it = path.rbegin(); it != path.rend(); ++it) v = apply_exact(branch_inverse_exact(fam, *it), v);
    return v;
}

// ---------------------------------------------------------------- distortion constants

// Distortion constant at the Fhat level, C_A * C_I2 * sum_j omega2_j.
inline double distortion_constant_hat(const MapFamily& fam) {
    const auto& c = fam.constants();
    const auto& om = c.omega2;
    const double sum = om.is_inverse_square() ? *om.power_total(1.0, om.first_index())
                                              : om.power_partial_sum(1.0, om.first_index(), *om.last_index());
    return fam.adler_constant() * c.ci2 * sum;
}

// Upper bound at the Ftilde level: a second branch adds at most a factor of
// 1 / f0'(g0(1)) on image gaps.
inline double distortion_constant_tilde(const MapFamily& fam) {
    const double expansion = fam.f0_eval(base_left(fam)).d1;
    return distortion_constant_hat(fam) * (1.0 + 1.0 / expansion);
}

// Lower expansion bound f0'(g0(1)).
inline double expansion_bound(const MapFamily& fam) { return fam.f0_eval(base_left(fam)).d1; }

}  // namespace hypmix
