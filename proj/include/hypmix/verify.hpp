#pragma once

// Numerical checks of the properties the mixing argument needs from the roof:
// the non-integrability bound (UNI), exponential tails of the induced roof,
// the two comparability estimates behind the tail bound, and bounded distortion
// of the induced maps.

#include "hypmix/assumptions.hpp"
#include "hypmix/inducing.hpp"
#include "hypmix/parallel.hpp"
#include "hypmix/rng.hpp"
#include "hypmix/roof.hpp"
#include "hypmix/skew.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace hypmix {

// ================================================================= UNI
//
// Compare the two inverse branches phi = [phi_2^1]^{2n} and phibar = [phi_3^1]^{2n}
// of the induced map, where phi_s^1(z) = g0(s - 1 + z). The derivative of the
// difference of n-step Birkhoff sums of the roof along them expands into 2n
// terms; term k (1 <= k <= 2n) is
//   rho0 * [A(phi_2^k x) prod_{j<k} 1/f0'(phi_2^j x) - (same with phi_3)]
// with A = f0'' / f0'^2.

namespace detail {

template <BranchFamily Family>
double adler_at(const Family& fam, double x) {
    const Jet j = fam.f0_eval(x);
    return j.d2 / (j.d1 * j.d1);
}

template <BranchFamily Family>
double first_inverse_branch(const Family& fam, long long s, double z) {
    return fam.g0_eval(static_cast<double>(s - 1) + z).value;
}

}  // namespace detail

// Summands of D psi at x, indexed by k - 1 (so entry 0 is the k = 1 term).
template <BranchFamily Family>
std::vector<double> uni_summands(const Family& fam, int n, double x) {
    if (n < 1) throw DomainError("UNI order n must be at least 1");
    const double rho0 = fam.constants().rho0;
    const int len = 2 * n;
    std::vector<double> out(static_cast<std::size_t>(len));
    double z2 = x, z3 = x;
    double inv2 = 1.0, inv3 = 1.0;  // prod_{j<k} 1/f0'(phi^j x)
    for (int k = 1; k <= len; ++k) {
        z2 = detail::first_inverse_branch(fam, 2, z2);
        z3 = detail::first_inverse_branch(fam, 3, z3);
        const Jet j2 = fam.f0_eval(z2), j3 = fam.f0_eval(z3);
        out[static_cast<std::size_t>(k - 1)] =
            rho0 * (j2.d2 / (j2.d1 * j2.d1) * inv2 - j3.d2 / (j3.d1 * j3.d1) * inv3);
        inv2 /= j2.d1;
        inv3 /= j3.d1;
    }
    return out;
}

template <BranchFamily Family>
double uni_dpsi(const Family& fam, int n, double x) {
    const auto terms = uni_summands(fam, n, x);
    double sum = 0.0;
    for (auto it = terms.rbegin(); it != terms.rend(); ++it) sum += *it;
    return sum;
}

// Lower bound rho0 [A(d_2^1) - A(c_3^1)] with d_2^1 = phi_2^1(1), c_3^1 = phi_3^2(1).
template <BranchFamily Family>
double uni_constant(const Family& fam) {
    const double d21 = detail::first_inverse_branch(fam, 2, 1.0);
    const double c31 = detail::first_inverse_branch(fam, 3, detail::first_inverse_branch(fam, 1, 1.0));
    return fam.constants().rho0 * (detail::adler_at(fam, d21) - detail::adler_at(fam, c31));
}

// psi(x) = sum_{i<n} [r(phi_2^{2(n-i)} x) - r(phi_3^{2(n-i)} x)] with the reduced roof r.
inline double uni_psi(const MapFamily& fam, const RoofConfig& cfg, int n, double x) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        double a = x, b = x;
        for (int j = 0; j < 2 * (n - i); ++j) {
            a = fam.g0(1.0 + a);
            b = fam.g0(2.0 + b);
        }
        sum += r_eval(fam, cfg, a) - r_eval(fam, cfg, b);
    }
    return sum;
}

inline double uni_psi_fd(const MapFamily& fam, const RoofConfig& cfg, int n, double x, double h = 1e-4) {
    return (uni_psi(fam, cfg, n, x + h) - uni_psi(fam, cfg, n, x - h)) / (2.0 * h);
}

struct UniReport {
    int n = 0;
    std::size_t grid_size = 0;
    double inf_dpsi = 0.0;
    double argmin = 0.0;
    double c_u_reference = 0.0;
    bool pass = false;
    // First grid point where a summand other than the last (k >= 2) is not positive.
    std::optional<double> sign_witness;
    // Grid point where the infimum falls below the reference, if it does.
    std::optional<double> witness;
};

template <BranchFamily Family>
std::vector<UniReport> uni_check(const Family& fam, const std::vector<int>& n_list, std::size_t grid_size,
                                 double tolerance = 1e-9, double eps = 1e-6) {
    if (grid_size < 2) throw ConfigError("UNI grid needs at least 2 points");
    const double lo = fam.g0_eval(1.0).value + eps, hi = 1.0 - eps;
    const double cu = uni_constant(fam);
    std::vector<UniReport> out;
    for (int n : n_list) {
        UniReport rep{n, grid_size, std::numeric_limits<double>::infinity(), lo, cu};
        for (std::size_t i = 0; i < grid_size; ++i) {
            const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_size - 1);
            const auto terms = uni_summands(fam, n, x);
            double d = 0.0;
            for (auto it = terms.rbegin(); it != terms.rend(); ++it) d += *it;
            if (d < rep.inf_dpsi) {
                rep.inf_dpsi = d;
                rep.argmin = x;
            }
            if (!rep.sign_witness)
                for (std::size_t k = 1; k < terms.size(); ++k)
                    if (!(terms[k] > 0.0)) {
                        rep.sign_witness = x;
                        break;
                    }
        }
        rep.pass = rep.inf_dpsi >= cu - tolerance;
        if (!rep.pass) rep.witness = rep.argmin;
        out.push_back(rep);
    }
    return out;
}

// ================================================================= distortion constants

// Distortion constant of the second induced map on cylinders (see inducing.hpp).
inline double distortion_tilde(const MapFamily& fam) { return distortion_constant_tilde(fam); }

// exp(C~_A |Delta|) with |Delta| the length of the induced domain.
inline double distortion_factor_tilde(const MapFamily& fam) {
    return std::exp(distortion_tilde(fam) * (1.0 - base_left(fam)));
}

// Upper comparability constant between 1/Gtilde'(y') and Ftilde'(d).
inline double comparability_constant(const MapFamily& fam, double y_prime) {
    return distortion_factor_tilde(fam) * std::exp(fam.adler_constant() * (y_prime + 3.0));
}

// ================================================================= tails
//
// Quadruple index (s0, q0, s1, q1): the quad cylinder is phi0(J1), with right
// end d = phi0(phi1(1)) and Ftilde'(d) = 1 / [phi0'(phi1(1)) phi1'(1)].

struct TailsReport {
    double sigma = 0.0;
    long long s_max = 0, q_max = 0;
    double partial_sum = 0.0;      // up to (s_max, q_max)
    double half_sum = 0.0;         // up to (s_max / 2, q_max / 2)
    double majorant_sum = 0.0;     // sum of [1/Ftilde'(d)]^{1 - 2 sigma rho0}
    double omega_majorant = 0.0;   // full omega product series, scaled
    double tail_estimate = 0.0;
    double cauchy_increment = 0.0; // (partial - half) / partial
    long long comparability_violations = 0;
    double max_term_ratio = 0.0;   // max term / majorant term
    bool cauchy_pass = false;
};

namespace detail {

struct BranchTable {
    long long s_max, q_max;
    std::vector<Mobius<double>> phi;    // inverse branch
    std::vector<double> d;              // phi(1)
    std::vector<double> c;              // phi(g0(1))
    std::vector<double> log_dphi_at_1;  // ln phi'(1)
    std::vector<Mobius<double>> ghat;
    std::vector<double> ghat_at_y;      // Ghat(y')
    std::vector<double> log_dghat_at_y; // ln Ghat'(y')

    std::size_t idx(long long s, long long q) const {
        return static_cast<std::size_t>((s - 2) * q_max + (q - 1));
    }

    BranchTable(const MapFamily& fam, long long sm, long long qm, double y_prime) : s_max(sm), q_max(qm) {
        const std::size_t n = static_cast<std::size_t>((sm - 1) * qm);
        phi.resize(n);
        d.resize(n);
        c.resize(n);
        log_dphi_at_1.resize(n);
        ghat.resize(n);
        ghat_at_y.resize(n);
        log_dghat_at_y.resize(n);
        const double left = base_left(fam);
        for (long long s = 2; s <= sm; ++s)
            for (long long q = 1; q <= qm; ++q) {
                const auto i = idx(s, q);
                phi[i] = branch_inverse(fam, {s, q});
                d[i] = phi[i](1.0);
                c[i] = phi[i](left);
                log_dphi_at_1[i] = std::log(phi[i].derivative(1.0));
                ghat[i] = ghat_matrix(fam, {s, q});
                ghat_at_y[i] = ghat[i](y_prime);
                log_dghat_at_y[i] = std::log(ghat[i].derivative(y_prime));
            }
    }
};

inline double log_mobius_derivative(const Mobius<double>& m, double x) {
    return std::log(std::abs(m.det())) - 2.0 * std::log(std::abs(m.c * x + m.d));
}

}  // namespace detail

inline TailsReport tails_partial(const MapFamily& fam, double sigma, long long s_max, long long q_max, double y_prime,
                                 unsigned threads = default_threads()) {
    const auto& consts = fam.constants();
    if (!(sigma > 0.0 && sigma < consts.sigma_limit()))
        throw ConfigError("sigma must lie in (0, " + std::to_string(consts.sigma_limit()) + ")");
    if (s_max < 2 || q_max < 1) throw ConfigError("tails truncation requires s_max >= 2 and q_max >= 1");
    if (!(y_prime > 0.0)) throw ConfigError("y_prime must be positive");

    const double sr = sigma * consts.rho0;
    const double p = 1.0 - 2.0 * sr;
    const long long s_half = std::max(2LL, s_max / 2), q_half = std::max(1LL, q_max / 2);
    const detail::BranchTable tab(fam, s_max, q_max, y_prime);
    const double K = distortion_factor_tilde(fam) * (1.0 - base_left(fam)) *
                     std::pow(comparability_constant(fam, y_prime), sr);

    struct Partial {
        long double sum = 0, half = 0, majorant = 0;
        long long violations = 0;
        double max_ratio = 0.0;
        double max_omega_ratio = 0.0;  // majorant term over omega-product term
    };
    const auto& om1 = consts.omega1;
    const auto& om2 = consts.omega2;
    const double scale = consts.ci1 * consts.ci2;
    std::vector<double> om_pow((static_cast<std::size_t>(s_max - 1) * static_cast<std::size_t>(q_max)));
    for (long long s = 2; s <= s_max; ++s)
        for (long long q = 1; q <= q_max; ++q) om_pow[tab.idx(s, q)] = std::pow(scale * om1(s) * om2(q), p);

    const auto parts = map_streams<Partial>(static_cast<std::size_t>(s_max - 1), threads, [&](std::size_t i0) {
        Partial part;
        const long long s0 = static_cast<long long>(i0) + 2;
        for (long long q0 = 1; q0 <= q_max; ++q0) {
            const auto a = tab.idx(s0, q0);
            const auto& phi0 = tab.phi[a];
            const double om_first = std::pow(scale * om1(s0) * om2(q0), p);
            for (long long s1 = 2; s1 <= s_max; ++s1)
                for (long long q1 = 1; q1 <= q_max; ++q1) {
                    const auto b = tab.idx(s1, q1);
                    const double len = phi0.image_length(tab.c[b], tab.d[b]);
                    const double log_ft = -detail::log_mobius_derivative(phi0, tab.d[b]) - tab.log_dphi_at_1[b];
                    const double log_gt =
                        tab.log_dghat_at_y[a] + detail::log_mobius_derivative(tab.ghat[b], tab.ghat_at_y[a]);
                    const double term = len * std::exp(sr * (log_ft - log_gt));
                    const double maj = std::exp(-p * log_ft);
                    part.sum += term;
                    if (s0 <= s_half && s1 <= s_half && q0 <= q_half && q1 <= q_half) part.half += term;
                    part.majorant += maj;
                    const double ratio = term / maj;
                    part.max_ratio = std::max(part.max_ratio, ratio);
                    if (ratio > K) ++part.violations;
                    const double om_term = om_first * om_pow[b];
                    part.max_omega_ratio = std::max(part.max_omega_ratio, maj / om_term);
                }
        }
        return part;
    });

    Partial total;
    for (const auto& part : parts) {
        total.sum += part.sum;
        total.half += part.half;
        total.majorant += part.majorant;
        total.violations += part.violations;
        total.max_ratio = std::max(total.max_ratio, part.max_ratio);
        total.max_omega_ratio = std::max(total.max_omega_ratio, part.max_omega_ratio);
    }

    TailsReport rep;
    rep.sigma = sigma;
    rep.s_max = s_max;
    rep.q_max = q_max;
    rep.partial_sum = static_cast<double>(total.sum);
    rep.half_sum = static_cast<double>(total.half);
    rep.majorant_sum = static_cast<double>(total.majorant);
    rep.comparability_violations = total.violations;
    rep.max_term_ratio = total.max_ratio;
    rep.cauchy_increment = (rep.partial_sum - rep.half_sum) / rep.partial_sum;
    rep.cauchy_pass = rep.cauchy_increment < 1e-2;

    // Omega product series: full value and the part already summed, each the
    // square of (sum over s of omega1^p) * (sum over q of omega2^p).
    const auto full1 = om1.power_total(p, om1.first_index());
    const auto full2 = om2.power_total(p, om2.first_index());
    const double part1 = om1.power_partial_sum(p, 2, s_max), part2 = om2.power_partial_sum(p, 1, q_max);
    const double sp = std::pow(scale, p);
    if (full1 && full2 && om1.first_index() <= 2) {
        const double full = sp * sp * std::pow(*full1 * *full2, 2.0);
        const double done = sp * sp * std::pow(part1 * part2, 2.0);
        rep.omega_majorant = full;
        rep.tail_estimate = K * total.max_omega_ratio * (full - done);
    } else {
        rep.omega_majorant = std::numeric_limits<double>::quiet_NaN();
        rep.tail_estimate = std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
}

// ================================================================= ordineminore
//
// Exact check of 1/Fhat'(d_s^q) < C_I1 C_I2 omega1_s omega2_q, where
// d_s^q = phi_s^q(1) is the right end of J_s^q.

struct OrdineminoreReport {
    long long s_max = 0, q_max = 0;
    long long checked = 0;
    long long violations = 0;
    std::optional<BranchIndex> witness;
    double max_ratio = 0.0;  // max of (1/Fhat'(d)) / bound
};

inline OrdineminoreReport ordineminore_check(const MapFamily& fam, long long s_max, long long q_max) {
    const auto& c = fam.constants();
    OrdineminoreReport rep{s_max, q_max};
    const Rational scale = Rational(c.ci1) * Rational(c.ci2);
    for (long long s = 2; s <= s_max; ++s)
        for (long long q = 1; q <= q_max; ++q) {
            const BranchIndex b{s, q};
            const Rational d = apply_exact(branch_inverse_exact(fam, b), Rational(1));
            const Rational inv = 1 / fhat_deriv_exact(fam, b, d);
            const Rational bound = scale * c.omega1.exact(s) * c.omega2.exact(q);
            ++rep.checked;
            rep.max_ratio = std::max(rep.max_ratio, to_double(Rational(inv / bound)));
            if (!(inv < bound)) {
                ++rep.violations;
                if (!rep.witness) rep.witness = b;
            }
        }
    return rep;
}

// ================================================================= comparabilities

struct OrdiniReport {
    long long samples = 0;
    // Part 1: Ftilde'(d) |J| / |Delta|, expected in [1, C~_D].
    double pt1_min = std::numeric_limits<double>::infinity(), pt1_max = 0.0;
    double pt1_upper_reference = 0.0;
    long long pt1_violations = 0;
    // Part 2: [1/Gtilde'(y')] / Ftilde'(d), expected at most C~'.
    double pt2_min = std::numeric_limits<double>::infinity(), pt2_max = 0.0;
    double pt2_upper_reference = 0.0;
    long long pt2_violations = 0;
    bool bounded = false;
};

struct QuadSample {
    BranchIndex first, second;
};

// Quads with s uniform in [2, s_max] and q uniform in [1, q_max].
inline std::vector<QuadSample> sample_quads(std::size_t n, std::uint64_t seed, long long s_max = 50, long long q_max = 50) {
    RngStream rng(seed, 0);
    auto pick = [&](long long lo, long long hi) {
        return lo + static_cast<long long>(rng.next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    };
    std::vector<QuadSample> out(n);
    for (auto& q : out) {
        q.first = {pick(2, s_max), pick(1, q_max)};
        q.second = {pick(2, s_max), pick(1, q_max)};
    }
    return out;
}

inline OrdiniReport ordini_check(const MapFamily& fam, const std::vector<QuadSample>& quads, double y_prime) {
    OrdiniReport rep;
    rep.pt1_upper_reference = distortion_factor_tilde(fam);
    rep.pt2_upper_reference = comparability_constant(fam, y_prime);
    const double delta = 1.0 - base_left(fam);
    for (const auto& qs : quads) {
        const auto phi0 = branch_inverse(fam, qs.first);
        const auto phi1 = branch_inverse(fam, qs.second);
        const auto j1 = interval_J(fam, qs.second);
        const double len = phi0.image_length(j1.lo, j1.hi);
        const double ft = 1.0 / (phi0.derivative(j1.hi) * phi1.derivative(1.0));
        const double gt = gtilde_deriv(fam, {qs.first, qs.second}, y_prime);
        const double r1 = ft * len / delta;
        const double r2 = (1.0 / gt) / ft;
        rep.pt1_min = std::min(rep.pt1_min, r1);
        rep.pt1_max = std::max(rep.pt1_max, r1);
        rep.pt2_min = std::min(rep.pt2_min, r2);
        rep.pt2_max = std::max(rep.pt2_max, r2);
        if (r1 < 1.0 - 1e-12 || r1 > rep.pt1_upper_reference) ++rep.pt1_violations;
        if (r2 > rep.pt2_upper_reference) ++rep.pt2_violations;
        ++rep.samples;
    }
    rep.bounded = std::isfinite(rep.pt1_max) && std::isfinite(rep.pt2_max) && rep.pt1_min > 0.0 && rep.pt2_min > 0.0;
    return rep;
}

// ================================================================= bounded distortion

struct DistortionLevel {
    long long pairs = 0;
    long long violations = 0;       // |ln ratio| > C |gap|
    long long exp_violations = 0;   // F'(x) > e^{C |gap|} F'(x') with x > x'
    double reference = 0.0;         // C
    double max_constant = 0.0;      // max |ln ratio| / |gap|
    double max_slack = 0.0;         // max of |ln ratio| - C |gap| (negative when all hold)
};

struct DistortionReport {
    DistortionLevel hat, tilde;
};

namespace detail {

// Pairs x, x' in one cylinder are drawn through the inverse branch from two
// uniform image points u, u', so Fhat(x) = u exactly and
// ln F'(x)/F'(x') = ln psi'(u') - ln psi'(u) for the inverse branch psi.
inline void distortion_pair(DistortionLevel& lvl, const Mobius<double>& psi, double u, double v) {
    const double log_ratio = log_mobius_derivative(psi, v) - log_mobius_derivative(psi, u);  // ln F'(x)/F'(x')
    const double gap = std::abs(u - v);
    ++lvl.pairs;
    const double slack = std::abs(log_ratio) - lvl.reference * gap;
    if (lvl.pairs == 1) lvl.max_slack = slack;
    lvl.max_slack = std::max(lvl.max_slack, slack);
    if (slack > 1e-12 * std::max(1.0, std::abs(log_ratio))) ++lvl.violations;
    if (gap > 0.0) lvl.max_constant = std::max(lvl.max_constant, std::abs(log_ratio) / gap);
    // psi increasing, so u > v means x > x'; the exp form bounds F'(x) / F'(x').
    const double signed_log = u > v ? log_ratio : -log_ratio;
    if (signed_log > lvl.reference * gap + 1e-12) ++lvl.exp_violations;
}

}  // namespace detail

inline DistortionReport distortion_check(const MapFamily& fam, long long n_pairs, std::uint64_t seed,
                                         long long s_max = 1000, long long q_max = 1000) {
    DistortionReport rep;
    rep.hat.reference = distortion_constant_hat(fam);
    rep.tilde.reference = distortion_constant_tilde(fam);
    const double left = base_left(fam);
    RngStream rng(seed, 1);
    auto pick_branch = [&] {
        // Log-uniform indices reach deep cylinders without dropping the shallow ones.
        const auto s = static_cast<long long>(std::floor(2.0 * std::pow(static_cast<double>(s_max) / 2.0, rng.uniform())));
        const auto q = static_cast<long long>(std::floor(std::pow(static_cast<double>(q_max), rng.uniform())));
        return BranchIndex{std::clamp(s, 2LL, s_max), std::clamp(q, 1LL, q_max)};
    };
    for (long long i = 0; i < n_pairs; ++i) {
        const BranchIndex b = pick_branch();
        const auto psi = branch_inverse(fam, b);
        detail::distortion_pair(rep.hat, psi, rng.uniform(left, 1.0), rng.uniform(left, 1.0));
        const BranchIndex b2 = pick_branch();
        const auto psi2 = psi * branch_inverse(fam, b2);
        detail::distortion_pair(rep.tilde, psi2, rng.uniform(left, 1.0), rng.uniform(left, 1.0));
    }
    return rep;
}

}  // namespace hypmix
