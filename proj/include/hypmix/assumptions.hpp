#pragma once

// Numeric checks of the structural hypotheses on f0 and g0:
//   A1  f0 -> 0 at 0+ and f0 -> inf at 1-          (trend only)
//   A2  f0' > 1
//   A3  f0' -> 1 at 0+                              (trend only)
//   A4  f0'' > 0
//   A5  f0'' / f0'^2 decreasing
//   A6  sup f0'' / f0'^2 finite
//   B   summability of the tail sequences and the two derivative bounds on g0
// Limits cannot be certified from finitely many samples, so A1 and A3 report
// an ungraded trend verdict unless the trend is visibly violated.

#include "hypmix/family.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

namespace hypmix {

struct GridSpec {
    std::size_t size = 10000;
    double eps = 1e-8;
};

// Grid on (eps, 1 - eps): half the points geometric towards 0, half with
// 1 - x geometric towards 0, meeting at 1/2. Sorted increasingly.
inline std::vector<double> make_grid(const GridSpec& g) {
    if (g.size < 4) throw ConfigError("grid needs at least 4 points");
    if (!(g.eps > 0.0 && g.eps < 0.25)) throw ConfigError("grid eps must lie in (0, 1/4)");
    const std::size_t half = g.size / 2;
    std::vector<double> pts;
    pts.reserve(g.size);
    const double ratio = std::log(0.5 / g.eps);
    for (std::size_t i = 0; i < half; ++i)
        pts.push_back(g.eps * std::exp(ratio * static_cast<double>(i) / static_cast<double>(half)));
    const std::size_t rest = g.size - half;
    for (std::size_t i = 0; i < rest; ++i) {
        const double w = 0.5 * std::exp(-ratio * static_cast<double>(i) / static_cast<double>(rest - 1));
        pts.push_back(1.0 - w);
    }
    return pts;
}

enum class Verdict { pass, fail, ungraded_trend };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::ungraded_trend: return "ungraded-trend";
    }
    return "?";
}

struct AssumptionResult {
    std::string name;
    Verdict verdict = Verdict::pass;
    std::optional<double> witness;
    std::optional<double> estimate;
    std::string detail;
};

struct AssumptionReport {
    std::vector<AssumptionResult> results;
    double c_a_estimate = 0.0;
    double omega1_partial = 0.0, omega1_tail = 0.0;
    double omega2_partial = 0.0, omega2_tail = 0.0;

    bool all_pass() const {
        for (const auto& r : results)
            if (r.verdict == Verdict::fail) return false;
        return true;
    }
    const AssumptionResult& get(const std::string& name) const {
        for (const auto& r : results)
            if (r.name == name) return r;
        throw DomainError("no assumption named " + name);
    }
};

namespace detail {

inline std::string num(double v) {
    std::ostringstream s;
    s << std::setprecision(7) << v;
    return s.str();
}

inline AssumptionResult pointwise(const std::string& name, const std::vector<double>& grid, auto&& ok) {
    AssumptionResult r{name};
    for (double x : grid) {
        if (!ok(x)) {
            r.verdict = Verdict::fail;
            r.witness = x;
            r.detail = "violated at the witness point";
            return r;
        }
    }
    r.detail = "holds at all " + std::to_string(grid.size()) + " grid points";
    return r;
}

inline AssumptionResult check_omega_sequence(const std::string& name, const OmegaSequence& om, double sigma, long n_max,
                                             double& partial, double& tail) {
    AssumptionResult r{name};
    const long first = om.first_index();
    const long last = om.last_index() ? std::min<long>(*om.last_index(), n_max) : n_max;
    for (long n = first; n <= last; ++n) {
        const double w = om(n);
        // The first entry may equal 1 (the modular sequence 1/(n-1)^2 starts at 1); later ones must be below 1.
        const bool range_ok = w > 0.0 && (n == first ? w <= 1.0 : w < 1.0);
        const bool decreasing = n == first || w < om(n - 1);
        if (!range_ok || !decreasing) {
            r.verdict = Verdict::fail;
            r.witness = static_cast<double>(n);
            r.detail = range_ok ? "sequence is not strictly decreasing" : "sequence leaves (0,1]";
            return r;
        }
    }
    const double p = 1.0 - sigma;
    partial = om.power_partial_sum(p, first, last);
    const double half = om.power_partial_sum(p, first, first + (last - first) / 2);
    const auto t = om.power_tail_bound(p, last);
    const auto t_half = om.power_tail_bound(p, first + (last - first) / 2);
    if (!t) {
        tail = std::numeric_limits<double>::quiet_NaN();
        r.verdict = Verdict::ungraded_trend;
        r.detail = "explicit table: partial sum only, no certified tail";
        r.estimate = partial;
        return r;
    }
    tail = *t;
    r.estimate = partial;
    // Cauchy check: the increment between n_max/2 and n_max must not exceed the tail bound at n_max/2.
    if (!std::isfinite(tail) || partial - half > *t_half * (1.0 + 1e-12)) {
        r.verdict = Verdict::fail;
        r.witness = static_cast<double>(last);
        r.detail = "power series does not converge";
        return r;
    }
    r.detail = "partial sum " + num(partial) + ", tail bound " + num(tail);
    return r;
}

}  // namespace detail

template <BranchFamily Family>
AssumptionReport check_assumptions(const Family& fam, const GridSpec& grid_spec = {}, long n_max = 1000) {
    if (n_max < 2) throw ConfigError("n_max must be at least 2");
    const auto grid = make_grid(grid_spec);
    const auto& c = fam.constants();
    AssumptionReport rep;

    rep.results.push_back(detail::pointwise("A2", grid, [&](double x) { return fam.f0_eval(x).d1 > 1.0; }));
    rep.results.push_back(detail::pointwise("A4", grid, [&](double x) { return fam.f0_eval(x).d2 > 0.0; }));

    // A5 and A6 on the Adler ratio.
    {
        AssumptionResult a5{"A5"}, a6{"A6"};
        double prev = std::numeric_limits<double>::infinity();
        double sup = -std::numeric_limits<double>::infinity();
        for (double x : grid) {
            const Jet j = fam.f0_eval(x);
            const double ratio = j.d2 / (j.d1 * j.d1);
            if (a5.verdict == Verdict::pass && ratio > prev * (1.0 + 1e-12) + 1e-300) {
                a5.verdict = Verdict::fail;
                a5.witness = x;
                a5.detail = "ratio increases at the witness point";
            }
            prev = ratio;
            if (ratio > sup) {
                sup = ratio;
                a6.witness = x;
            }
        }
        if (a5.verdict == Verdict::pass) a5.detail = "ratio decreasing on the grid";
        a6.estimate = sup;
        rep.c_a_estimate = sup;
        if (!std::isfinite(sup)) {
            a6.verdict = Verdict::fail;
            a6.detail = "ratio unbounded on the grid";
        } else {
            a6.witness.reset();
            a6.detail = "grid supremum " + detail::num(sup);
        }
        rep.results.push_back(a5);
        rep.results.push_back(a6);
    }

    // A1 and A3 as one-sided trends along the geometric ends of the grid.
    {
        AssumptionResult a1{"A1", Verdict::ungraded_trend}, a3{"A3", Verdict::ungraded_trend};
        const std::size_t half = grid.size() / 2;
        for (std::size_t i = 1; i < half; ++i) {
            // Moving towards 0 means walking the grid backwards.
            const double x_near = grid[half - 1 - i], x_far = grid[half - i];
            if (!(fam.f0_eval(x_near).value < fam.f0_eval(x_far).value)) {
                a1.verdict = Verdict::fail;
                a1.witness = x_near;
                a1.detail = "f0 does not decrease towards 0";
                break;
            }
            if (std::abs(fam.f0_eval(x_near).d1 - 1.0) > std::abs(fam.f0_eval(x_far).d1 - 1.0) * (1.0 + 1e-9)) {
                a3.verdict = Verdict::fail;
                a3.witness = x_near;
                a3.detail = "|f0' - 1| does not shrink towards 0";
            }
        }
        for (std::size_t i = half + 1; a1.verdict != Verdict::fail && i < grid.size(); ++i) {
            if (!(fam.f0_eval(grid[i]).value > fam.f0_eval(grid[i - 1]).value)) {
                a1.verdict = Verdict::fail;
                a1.witness = grid[i];
                a1.detail = "f0 does not increase towards 1";
            }
        }
        const double x0 = grid.front(), x1 = grid.back();
        const double f_at_0 = fam.f0_eval(x0).value, f_at_1 = fam.f0_eval(x1).value;
        if (a1.verdict != Verdict::fail) {
            if (f_at_0 > 10.0 * x0 || f_at_1 < 0.1 / (1.0 - x1)) {
                a1.verdict = Verdict::fail;
                a1.witness = f_at_0 > 10.0 * x0 ? x0 : x1;
                a1.detail = "endpoint values inconsistent with the limits";
            } else {
                a1.detail = "monotone trend; f0(eps) = " + detail::num(f_at_0) + ", f0(1-eps) = " + detail::num(f_at_1);
            }
        }
        const double slope_gap = std::abs(fam.f0_eval(x0).d1 - 1.0);
        a3.estimate = slope_gap;
        if (a3.verdict != Verdict::fail) {
            // On a grid reaching eps, a derivative converging to 1 must be within a few eps of it.
            if (slope_gap > 1e3 * grid_spec.eps) {
                a3.verdict = Verdict::fail;
                a3.witness = x0;
                a3.detail = "f0'(eps) is not close to 1";
            } else {
                a3.detail = "|f0'(eps) - 1| = " + detail::num(slope_gap);
            }
        }
        rep.results.push_back(a1);
        rep.results.push_back(a3);
    }

    rep.results.push_back(
        detail::check_omega_sequence("B(i) omega1", c.omega1, c.sigma1, n_max, rep.omega1_partial, rep.omega1_tail));
    rep.results.push_back(
        detail::check_omega_sequence("B(i) omega2", c.omega2, c.sigma2, n_max, rep.omega2_partial, rep.omega2_tail));

    {
        AssumptionResult b2{"B(ii)"};
        for (long n = std::max(2L, c.omega1.first_index()); n <= n_max; ++n) {
            if (c.omega1.last_index() && n > *c.omega1.last_index()) break;
            const double lhs = fam.g0_eval(static_cast<double>(n - 1)).d1;
            const double rhs = c.ci1 * c.omega1(n);
            if (lhs > rhs * (1.0 + 1e-12)) {
                b2.verdict = Verdict::fail;
                b2.witness = static_cast<double>(n);
                b2.detail = "g0'(n-1) exceeds C_I1 omega1_n";
                break;
            }
        }
        if (b2.verdict == Verdict::pass) b2.detail = "holds for 2 <= n <= " + std::to_string(n_max);
        rep.results.push_back(b2);
    }
    {
        AssumptionResult b3{"B(iii)"};
        long double product = 1.0L;
        double z = fam.g0_eval(1.0).value;
        for (long n = 1; n <= n_max; ++n) {
            if (n >= 2) {
                const Jet j = fam.g0_eval(z);
                product *= j.d1;
                z = j.value;
            }
            if (n < c.omega2.first_index()) continue;
            if (c.omega2.last_index() && n > *c.omega2.last_index()) break;
            const double rhs = c.ci2 * c.omega2(n);
            if (static_cast<double>(product) > rhs * (1.0 + 1e-12)) {
                b3.verdict = Verdict::fail;
                b3.witness = static_cast<double>(n);
                b3.detail = "derivative product exceeds C_I2 omega2_n";
                break;
            }
        }
        if (b3.verdict == Verdict::pass) b3.detail = "holds for 1 <= n <= " + std::to_string(n_max);
        rep.results.push_back(b3);
    }
    return rep;
}

}  // namespace hypmix
