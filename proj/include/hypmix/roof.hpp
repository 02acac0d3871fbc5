#pragma once

// Roof functions over the base map and its inductions.
//
//   rho(x,y)           base roof, rho0 * ln[(x/y) (g_x(y)/f(x)) (f'(x)/g_x'(y))]
//   R, Rhat, Rtilde    Birkhoff sums of rho over tau, theta and theta~ base steps
//   rhat, rtilde       cohomologous versions rho0 * ln(Fhat'/Ghat'), rho0 * ln(Ftilde'/Gtilde')
//   u                  transfer function sum_i [rtilde(Ptilde^i(x,y)) - rtilde(Ptilde^i(x,y'))]
//
// Logarithms of products are always assembled as sums of logarithms of factors.

#include "hypmix/errors.hpp"
#include "hypmix/family.hpp"
#include "hypmix/inducing.hpp"
#include "hypmix/skew.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace hypmix {

struct RoofConfig {
    double y_prime = 1.0;
    int truncation_N = 20;

    void validate() const {
        if (!(y_prime > 0.0) || !std::isfinite(y_prime)) throw ConfigError("y_prime must be positive");
        if (truncation_N < 1) throw ConfigError("truncation_N must be at least 1");
    }
};

struct CohomologyValue {
    double value = 0.0;
    double tail_bound = 0.0;
};

// Potential v(x, y) = rho0 * ln(x / y); every closed form below is rho0 times
// a log-derivative ratio plus a difference of v.
inline double potential(const MapFamily& fam, const PlanePoint& p) {
    return fam.constants().rho0 * (std::log(p.x) - std::log(p.y));
}

inline double rho_eval(const MapFamily& fam, const PlanePoint& p) {
    if (!(p.x > 0.0 && p.y > 0.0)) throw DomainError("roof requires x, y > 0");
    if (p.x == 1.0) throw SingularityError("roof is infinite on the line x = 1");
    const double rho0 = fam.constants().rho0;
    double acc = 0.0;
    if (p.x < 1.0) {
        const Jet f = fam.f0_eval(p.x);
        const Jet g = fam.g0_eval(p.y);
        acc = std::log(p.x) - std::log(p.y) + std::log(g.value) - std::log(f.value) + std::log(f.d1) - std::log(g.d1);
    } else {
        // f(x) = x - 1 and g(y) = y + 1 have unit derivative.
        acc = std::log(p.x) - std::log(p.y) + std::log(p.y + 1.0) - std::log(p.x - 1.0);
    }
    if (!std::isfinite(acc)) throw OverflowError("roof evaluation is not finite");
    return rho0 * acc;
}

// Modular reduction: 0.5 ln((1+y)/(1-x)) for x < 1, 0.5 ln((1+1/y)/(1-1/x)) for x > 1.
inline double rho_modular(const PlanePoint& p) {
    if (p.x < 1.0) return 0.5 * (std::log1p(p.y) - std::log1p(-p.x));
    return 0.5 * (std::log1p(1.0 / p.y) - std::log1p(-1.0 / p.x));
}

// Sum of rho over the first n base steps of the run starting at p. The sum
// telescopes: right runs give v(p) - v(p_n); left runs add the log-derivative
// of f0^n and g0^n.
inline double rho_run_sum(const MapFamily& fam, const PlanePoint& p, std::uint64_t n) {
    if (n == 0) return 0.0;
    const double rho0 = fam.constants().rho0;
    const double k = static_cast<double>(n);
    if (p.x > 1.0) return rho0 * (std::log1p(k / p.y) - std::log1p(-k / p.x));
    if (fam.is_modular()) {
        const double den = std::fma(-k, p.x, 1.0);
        if (!(den > 0.0)) throw SingularityError("left run reached the line x = 1");
        return rho0 * (std::log1p(k * p.y) - std::log(den));
    }
    const auto f = fam.f0_power(n);
    const auto g = fam.g0_power(n);
    const double fden = f.c * p.x + f.d;
    const double gden = g.c * p.y + g.d;
    if (!(fden > 0.0)) throw SingularityError("left run reached the line x = 1");
    // v(p) - v(p_n) + ln (f^n)'(x) - ln (g^n)'(y)
    const double fx = (f.a * p.x + f.b) / fden;
    const double gy = (g.a * p.y + g.b) / gden;
    const double acc = std::log(p.x) - std::log(p.y) - std::log(fx) + std::log(gy) + fam.log_det_power(n) -
                       2.0 * std::log(fden) - fam.log_det_power(n) + 2.0 * std::log(gden);
    return rho0 * acc;
}

// Birkhoff sum of rho over n base steps. Small runs are summed step by step;
// runs longer than step_cap use the telescoped run sum.
inline double birkhoff_rho(const MapFamily& fam, PlanePoint p, std::uint64_t n, std::uint64_t step_cap = 100000) {
    double sum = 0.0;
    while (n > 0) {
        if (is_singular(p)) throw SingularityError("orbit reached the line x = 1");
        const std::uint64_t run = std::min<std::uint64_t>(n, run_length(fam, p.x));
        if (run > step_cap) {
            sum += rho_run_sum(fam, p, run);
            p = run_advance(fam, p, run);
        } else {
            for (std::uint64_t j = 0; j < run; ++j) {
                sum += rho_eval(fam, p);
                p = P_step(fam, p);
            }
        }
        n -= run;
    }
    return sum;
}

namespace detail {
inline void assert_agree(double a, double b, const char* what) {
    if (!(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)))) throw MismatchError(what);
}
}  // namespace detail

// First induced roof on I_s: closed form rho0 ln[(x/y)(G/F)(F'/G')], checked
// against the Birkhoff sum over s base steps.
inline double R_eval(const MapFamily& fam, const PlanePoint& p) {
    const auto F = F_eval(fam, p.x);
    const double G = fam.g0(p.y) + static_cast<double>(F.s - 1);
    const double Gd = fam.g0_eval(p.y).d1;
    const double closed = fam.constants().rho0 * (std::log(p.x) - std::log(p.y) + std::log(G) - std::log(F.value) +
                                                  std::log(F.d1) - std::log(Gd));
    detail::assert_agree(closed, birkhoff_rho(fam, p, static_cast<std::uint64_t>(F.s)), "R closed form disagrees with Birkhoff sum");
    return closed;
}

// Log-derivatives of a branch of Fhat and of the fiber map, from the branch matrices.
inline double log_fhat_deriv(const MapFamily& fam, BranchIndex b, double x) {
    const auto m = branch_forward(fam, b);
    const auto fr = detail::eval_one_minus(m, 1.0 - x);
    return fam.log_det_power(static_cast<std::uint64_t>(b.q)) - 2.0 * std::log(std::abs(fr.den));
}

inline double log_ghat_deriv(const MapFamily& fam, BranchIndex b, double y) {
    const auto m = ghat_matrix(fam, b);
    return fam.log_det_power(static_cast<std::uint64_t>(b.q)) - 2.0 * std::log(m.c * y + m.d);
}

inline double rhat_value(const MapFamily& fam, BranchIndex b, const PlanePoint& p) {
    return fam.constants().rho0 * (log_fhat_deriv(fam, b, p.x) - log_ghat_deriv(fam, b, p.y));
}

inline double Rhat_closed(const MapFamily& fam, BranchIndex b, const PlanePoint& p) {
    const auto fx = fhat_branch(fam, b, p.x);
    const double gy = ghat_eval(fam, b, p.y).value;
    return rhat_value(fam, b, p) + potential(fam, p) - potential(fam, {fx.value, gy});
}

inline double Rhat_eval(const MapFamily& fam, const PlanePoint& p) {
    const auto loc = locate(fam, p.x);
    const double closed = Rhat_closed(fam, loc.index, p);
    detail::assert_agree(closed, birkhoff_rho(fam, p, static_cast<std::uint64_t>(loc.times.theta)),
                         "Rhat closed form disagrees with Birkhoff sum");
    return closed;
}

// rhat checked against Rhat - v + v o Phat, with Rhat taken as the Birkhoff sum.
inline double rhat_eval(const MapFamily& fam, const PlanePoint& p) {
    const auto step = Phat_step(fam, p);
    const double value = rhat_value(fam, step.index, p);
    const double birkhoff = birkhoff_rho(fam, p, static_cast<std::uint64_t>(theta(step.index)));
    detail::assert_agree(value, birkhoff - potential(fam, p) + potential(fam, step.point),
                         "rhat disagrees with the cohomology identity");
    return value;
}

// rtilde = rhat + rhat o Phat = rho0 ln(Ftilde' / Gtilde').
inline double rtilde_quad(const MapFamily& fam, const QuadIndex& quad, const PlanePoint& p) {
    const double x1 = fhat_branch(fam, quad.first, p.x).value;
    const double y1 = ghat_eval(fam, quad.first, p.y).value;
    return rhat_value(fam, quad.first, p) + rhat_value(fam, quad.second, {x1, y1});
}

inline double rtilde_eval(const MapFamily& fam, const PlanePoint& p) {
    return rtilde_quad(fam, locate_quad(fam, p.x), p);
}

// Birkhoff roof of Ptilde: rho summed over theta~ base steps, in closed form.
inline double Rtilde_value(const MapFamily& fam, const QuadIndex& quad, const PlanePoint& p, const PlanePoint& image) {
    return rtilde_quad(fam, quad, p) + potential(fam, p) - potential(fam, image);
}

inline double Rtilde_eval(const MapFamily& fam, const PlanePoint& p) {
    const auto st = Ptilde_step(fam, p);
    return Rtilde_value(fam, st.index, p, st.point);
}

// Reduced roof r(x) = rtilde(x, y').
inline double r_eval(const MapFamily& fam, const RoofConfig& cfg, double x) {
    return rtilde_eval(fam, {x, cfg.y_prime});
}

// ---------------------------------------------------------------- Bowen cohomology

// Upper bound on sup d/dy rhat: rho0 * C_A * (1 + sum omega2).
inline double ct_bound(const MapFamily& fam) {
    const auto& c = fam.constants();
    const auto& om = c.omega2;
    const double sum = om.is_inverse_square() ? *om.power_total(1.0, om.first_index())
                                              : om.power_partial_sum(1.0, om.first_index(), *om.last_index());
    return c.rho0 * fam.adler_constant() * (1.0 + sum);
}

// d/dy rhat on a branch: -rho0 d/dy ln Ghat'(y) = 2 rho0 c / (c y + d).
inline double rhat_fiber_derivative(const MapFamily& fam, BranchIndex b, double y) {
    const auto m = ghat_matrix(fam, b);
    return 2.0 * fam.constants().rho0 * m.c / (m.c * y + m.d);
}

inline double fiber_contraction(const MapFamily& fam) { return fam.g0_eval(1.0).d1; }

// Sum over i >= N of the per-term bound 2 C_T g^{i-1}, g = g0'(1).
inline double bowen_tail_bound(const MapFamily& fam, int N) {
    const double g = fiber_contraction(fam);
    return 2.0 * ct_bound(fam) * std::pow(g, N - 1) / (1.0 - g);
}

// Orbit of (x, y) and (x, y') under Ptilde, reduced to what the transfer
// function needs: the quadrant index at each step and both fiber coordinates.
struct BowenOrbit {
    std::vector<QuadIndex> quads;
    std::vector<double> eta;
    std::vector<double> eta_ref;
    double x_end = 0.0;
};

inline BowenOrbit bowen_orbit(const MapFamily& fam, const PlanePoint& p, double y_ref, int N) {
    BowenOrbit o;
    o.quads.reserve(static_cast<std::size_t>(N));
    double x = p.x, eta = p.y, eta_ref = y_ref;
    try {
        for (int i = 0; i < N; ++i) {
            const auto quad = locate_quad(fam, x);
            o.quads.push_back(quad);
            o.eta.push_back(eta);
            o.eta_ref.push_back(eta_ref);
            const double x1 = fhat_branch(fam, quad.first, x).value;
            x = fhat_branch(fam, quad.second, x1).value;
            eta = gtilde_eval(fam, quad, eta).value;
            eta_ref = gtilde_eval(fam, quad, eta_ref).value;
        }
    } catch (const BoundaryError& e) {
        throw UnsuitablePointError(std::string("orbit hits a partition endpoint before the truncation order: ") +
                                   e.what());
    } catch (const DomainError& e) {
        throw UnsuitablePointError(std::string("orbit leaves the induced domain: ") + e.what());
    }
    o.x_end = x;
    return o;
}

// ln Gtilde'(eta_ref) - ln Gtilde'(eta) for one quadrant; the Ftilde' parts of
// the two rtilde values cancel exactly.
inline double bowen_term(const MapFamily& fam, const QuadIndex& quad, double eta, double eta_ref) {
    const auto m1 = ghat_matrix(fam, quad.first);
    const auto m2 = ghat_matrix(fam, quad.second);
    const double a = m1.c * eta + m1.d, a_ref = m1.c * eta_ref + m1.d;
    const double b = m2.c * m1(eta) + m2.d, b_ref = m2.c * m1(eta_ref) + m2.d;
    // ln Ghat' = ln det - 2 ln(c y + d)
    return 2.0 * fam.constants().rho0 * (std::log(a / a_ref) + std::log(b / b_ref));
}

inline CohomologyValue bowen_u(const MapFamily& fam, const RoofConfig& cfg, const PlanePoint& p) {
    cfg.validate();
    const double tail = bowen_tail_bound(fam, cfg.truncation_N);
    if (p.y == cfg.y_prime) return CohomologyValue{0.0, tail};
    const auto orbit = bowen_orbit(fam, p, cfg.y_prime, cfg.truncation_N);
    double value = 0.0;
    for (std::size_t i = orbit.quads.size(); i-- > 0;)
        value += bowen_term(fam, orbit.quads[i], orbit.eta[i], orbit.eta_ref[i]);
    return CohomologyValue{value, tail};
}

// Individual terms of the transfer-function series, for decay diagnostics.
inline std::vector<double> bowen_terms(const MapFamily& fam, const RoofConfig& cfg, const PlanePoint& p) {
    const auto orbit = bowen_orbit(fam, p, cfg.y_prime, cfg.truncation_N);
    std::vector<double> terms;
    for (std::size_t i = 0; i < orbit.quads.size(); ++i)
        terms.push_back(bowen_term(fam, orbit.quads[i], orbit.eta[i], orbit.eta_ref[i]));
    return terms;
}

// Roof depending on x only: rtilde(x, y') + u(Ptilde(x, y')). With this choice
// rtilde(x,y) = bowen_roof(x) + u(x,y) - u(Ptilde(x,y)) up to the truncation error.
inline double bowen_roof(const MapFamily& fam, const RoofConfig& cfg, double x) {
    const PlanePoint ref{x, cfg.y_prime};
    const auto st = Ptilde_step(fam, ref);
    return rtilde_quad(fam, st.index, ref) + bowen_u(fam, cfg, st.point).value;
}

struct CohomologyResidual {
    double residual;        // rtilde(p) - bowen_roof(x) - u(p) + u(Ptilde p)
    double literal;         // same with rtilde(x, y') in place of bowen_roof(x)
    double tail_bound;
};

inline CohomologyResidual cohomology_residual(const MapFamily& fam, const RoofConfig& cfg, const PlanePoint& p) {
    const auto st = Ptilde_step(fam, p);
    const double rt = rtilde_quad(fam, st.index, p);
    const double rref = rtilde_eval(fam, {p.x, cfg.y_prime});
    const auto u0 = bowen_u(fam, cfg, p);
    const auto u1 = bowen_u(fam, cfg, st.point);
    const double roof = bowen_roof(fam, cfg, p.x);
    return CohomologyResidual{rt - roof - u0.value + u1.value, rt - rref - u0.value + u1.value, u0.tail_bound};
}

}  // namespace hypmix
