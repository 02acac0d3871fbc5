// Acceptance run: one [PASS]/[FAIL] line per criterion, followed by the
// measured quantities. Exit status is non-zero when any criterion fails.
//
// Usage: acceptance [correlation_budget]   (default 1e7 samples per seed)

#include "hypmix/assumptions.hpp"
#include "hypmix/flow.hpp"
#include "hypmix/inducing.hpp"
#include "hypmix/measure.hpp"
#include "hypmix/roof.hpp"
#include "hypmix/skew.hpp"
#include "hypmix/verify.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace hypmix;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "  missed: " << what << "\n";
        }
    }
};

struct Criterion {
    int id;
    const char* title;
    double seconds;  // time budget, 0 for none
    std::function<void(Outcome&)> body;
};

// Sum of the modular roof along the base orbit, one step at a time.
double orbit_rho_sum(const MapFamily& fam, PlanePoint p, long long n) {
    double sum = 0.0;
    for (long long k = 0; k < n; ++k) {
        sum += rho_modular(p);
        p = P_step(fam, p);
    }
    return sum;
}

void exact_identities(Outcome& o) {
    const auto fam = MapFamily::modular();
    Rational y(1);
    bool orbit = true;
    for (long j = 1; j <= 1000; ++j) {
        y = apply_exact(fam.g0_exact(), y);
        orbit = orbit && y == Rational(1, j + 1);
    }
    o.require(orbit, "g0^j(1) = 1/(j+1) for j <= 1000");

    Rational prod(1), z(1);
    bool product = true;
    for (long n = 2; n <= 100; ++n) {
        z = apply_exact(fam.g0_exact(), z);
        prod *= Rational(1) / ((1 + z) * (1 + z));
        product = product && prod == Rational(4, (n + 1) * (n + 1));
    }
    o.require(product, "prod g0'(g0^j(1)) = 4/(n+1)^2 for n <= 100");

    long long mismatches = 0;
    for (long long s = 2; s <= 50; ++s)
        for (long long q = 1; q <= 50; ++q) {
            const Rational closed(q * s - q + 1, q * s + 1);
            Rational w(1);
            for (long long i = 1; i < q; ++i) w = w / (1 + w);
            w += s - 1;
            w = w / (1 + w);
            if (!(interval_J_exact(fam, {s, q}).hi == closed && w == closed)) ++mismatches;
        }
    o.require(mismatches == 0, "d_s^q closed form for s, q <= 50");
    o.detail << "  endpoint mismatches: " << mismatches << " of 2450\n";
}

void assumption_suite(Outcome& o) {
    const auto fam = MapFamily::modular();
    const auto rep = check_assumptions(fam, GridSpec{10000, 1e-8}, 1000);
    for (const char* name : {"A2", "A4", "A5", "A6", "B(ii)", "B(iii)"}) {
        const auto& r = rep.get(name);
        o.require(r.verdict == Verdict::pass, std::string(name) + " passes");
        o.detail << "  " << name << ": " << to_string(r.verdict) << "\n";
    }
    o.require(std::abs(rep.c_a_estimate - 2.0) < 1e-6, "Adler sup within 1e-6 of 2");
    o.require(fam.constants().ci1 == 1.0 && fam.constants().ci2 == 4.0, "C_I constants 1 and 4");
    o.detail << "  Adler sup estimate: " << std::setprecision(12) << rep.c_a_estimate << "\n";
}

void hyperbolicity(Outcome& o) {
    const auto fam = MapFamily::modular();
    RngStream rng(2024, 0);
    double min_hat = 1e300, min_tilde = 1e300;
    int n = 0;
    while (n < 100000) {
        const double x = 0.5 + 0.5 * rng.uniform();
        try {
            const double a = Fhat_eval(fam, x).d1;
            const double b = Ftilde_eval(fam, x).d1;
            min_hat = std::min(min_hat, a);
            min_tilde = std::min(min_tilde, b);
            ++n;
        } catch (const BoundaryError&) {
        }
    }
    const DensitySpec spec(fam);
    double max_g = 0.0;
    int m = 0;
    while (m < 10000) {
        const auto p = sample_nu(spec, rng);
        try {
            max_g = std::max(max_g, gtilde_deriv(fam, locate_quad(fam, p.x), p.y));
            ++m;
        } catch (const BoundaryError&) {
        }
    }
    o.require(min_hat > 4.0, "min Fhat' > 4");
    o.require(min_tilde > 16.0, "min Ftilde' > 16");
    o.require(max_g <= 0.25 + 1e-12, "max Gtilde' <= 1/4 + 1e-12");
    o.detail << std::setprecision(10) << "  min Fhat' = " << min_hat << ", min Ftilde' = " << min_tilde
             << ", max Gtilde' = " << max_g << "\n";
}

void roof_consistency(Outcome& o) {
    const auto fam = MapFamily::modular();
    RngStream rng(2025, 0);
    double worst_rho = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double x = i % 2 ? 0.999 * rng.uniform() + 5e-4 : 1.001 + 4.0 * rng.uniform();
        const double y = 5.0 * rng.uniform() + 1e-3;
        const double want = x < 1.0 ? 0.5 * std::log((1.0 + y) / (1.0 - x)) : 0.5 * std::log((1.0 + 1.0 / y) / (1.0 - 1.0 / x));
        worst_rho = std::max(worst_rho, std::abs(rho_eval(fam, {x, y}) - want));
    }
    const DensitySpec spec(fam);
    double worst_r = 0.0, worst_rhat = 0.0;
    int n = 0, skipped = 0;
    while (n < 10000) {
        const auto p = sample_nu(spec, rng);
        try {
            const auto loc = locate(fam, p.x);
            if (loc.times.theta > 3000) {
                ++skipped;
                continue;
            }
            const double first = orbit_rho_sum(fam, p, loc.index.s);
            const double full = orbit_rho_sum(fam, p, loc.times.theta);
            worst_r = std::max(worst_r, std::abs(R_eval(fam, p) - first) / std::max(1.0, std::abs(first)));
            worst_rhat = std::max(worst_rhat, std::abs(Rhat_eval(fam, p) - full) / std::max(1.0, std::abs(full)));
            ++n;
        } catch (const BoundaryError&) {
        }
    }
    double inf_r = 1e300;
    const RoofConfig cfg;
    for (int i = 0; i < 100000; ++i) {
        try {
            inf_r = std::min(inf_r, r_eval(fam, cfg, 0.5 + 0.5 * rng.uniform()));
        } catch (const BoundaryError&) {
        }
    }
    o.require(worst_rho < 1e-12, "rho closed form to 1e-12");
    o.require(worst_r <= 1e-9 && worst_rhat <= 1e-9, "R and Rhat against Birkhoff sums to 1e-9");
    o.require(inf_r > std::log(4.0), "inf r > ln 4");
    o.detail << std::setprecision(4) << "  max |rho - closed| = " << worst_rho << ", max rel err R = " << worst_r
             << ", Rhat = " << worst_rhat << " (" << skipped << " orbits longer than 3000 steps skipped)\n"
             << std::setprecision(8) << "  inf sampled r = " << inf_r << " vs ln 4 = " << std::log(4.0) << "\n";
}

void uni(Outcome& o) {
    const auto fam = MapFamily::modular();
    const auto reps = uni_check(fam, {1, 2, 3, 4}, 1000);
    for (const auto& r : reps) {
        o.require(r.inf_dpsi >= 1.0 / 21.0 - 1e-9, "inf D psi >= 1/21 - 1e-9 for n = " + std::to_string(r.n));
        o.detail << std::setprecision(10) << "  n = " << r.n << ": inf D psi = " << r.inf_dpsi << " at x = " << r.argmin
                 << "\n";
    }
    const RoofConfig cfg;
    double worst = 0.0;
    for (int n = 1; n <= 4; ++n)
        for (int i = 0; i < 20; ++i) {
            const double x = 0.51 + 0.48 * i / 19.0;
            const double fd = uni_psi_fd(fam, cfg, n, x, 1e-5);
            worst = std::max(worst, std::abs(uni_dpsi(fam, n, x) - fd) / std::abs(fd));
        }
    o.require(worst < 1e-5, "finite-difference agreement to relative 1e-5");
    o.detail << std::setprecision(3) << "  C_U reference = " << uni_constant(fam) << " (1/21 = " << 1.0 / 21.0
             << "), worst FD relative error = " << worst << "\n";
}

void tails(Outcome& o) {
    const auto fam = MapFamily::modular();
    const auto rep = tails_partial(fam, 0.4, 100, 100, 1.0);
    o.require(rep.cauchy_increment < 1e-2, "partial sum (100,100) within 1e-2 relative of (50,50)");
    const auto om = ordineminore_check(fam, 50, 50);
    o.require(om.violations == 0, "1/Fhat'(d) < 4/((s-1)^2 (q+1)^2) for s, q <= 50");
    const auto od = ordini_check(fam, sample_quads(1000, 2026), 1.0);
    o.require(od.bounded && od.pt1_violations == 0 && od.pt2_violations == 0, "both comparabilities on 1e3 quads");
    o.detail << std::setprecision(6) << "  partial(100,100) = " << rep.partial_sum << ", partial(50,50) = " << rep.half_sum
             << ", relative increment = " << rep.cauchy_increment << "\n"
             << "  exact bound check: " << om.violations << " violations in " << om.checked
             << ", max ratio = " << om.max_ratio << "\n"
             << "  comparability pt1 in [" << od.pt1_min << ", " << od.pt1_max << "] (upper " << od.pt1_upper_reference
             << "), pt2 in [" << od.pt2_min << ", " << od.pt2_max << "] (upper " << od.pt2_upper_reference << ")\n";
}

void cohomology(Outcome& o) {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    RngStream rng(2027, 0);
    double worst = 0.0;
    int n = 0;
    std::vector<double> log_ratios;
    while (n < 100) {
        const auto p = sample_nu(spec, rng);
        try {
            worst = std::max(worst, std::abs(cohomology_residual(fam, {1.0, 20}, p).residual));
            // Per-step shrink of the truncation error u_N - u_40 while it is above rounding.
            const double ref = bowen_u(fam, {1.0, 40}, p).value;
            double prev = std::abs(bowen_u(fam, {1.0, 1}, p).value - ref);
            for (int k = 2; k <= 12 && prev > 1e-12; ++k) {
                const double err = std::abs(bowen_u(fam, {1.0, k}, p).value - ref);
                if (err > 1e-13) log_ratios.push_back(std::log(prev / err));
                prev = err;
            }
            ++n;
        } catch (const BoundaryError&) {
        } catch (const UnsuitablePointError&) {
        }
    }
    double min_ratio = 1e300, mean_log = 0.0;
    for (double l : log_ratios) {
        min_ratio = std::min(min_ratio, std::exp(l));
        mean_log += l;
    }
    mean_log /= static_cast<double>(std::max<std::size_t>(1, log_ratios.size()));
    const double bound_ratio = bowen_tail_bound(fam, 10) / bowen_tail_bound(fam, 11);
    o.require(worst < 1e-8, "residual < 1e-8 at N = 20");
    o.require(std::abs(bound_ratio - 4.0) < 1e-9, "certified tail bound shrinks by 4 per unit N");
    o.require(!log_ratios.empty() && min_ratio >= 4.0, "observed truncation error shrinks by at least 4 per unit N");
    o.detail << std::setprecision(4) << "  max |residual| (N = 20) = " << worst << "\n"
             << "  tail bound ratio per N = " << bound_ratio << ", observed per-N shrink: min " << min_ratio
             << ", geometric mean " << std::exp(mean_log) << " over " << log_ratios.size() << " steps\n";
}

void invariant_density(Outcome& o) {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    double worst = 0.0, worst_x = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double x = 0.5 + 0.5 * (i + 0.5) / 20.0;
        const double r = transfer_residual(fam, spec, x, 200, 200).residual;
        if (r > worst) {
            worst = r;
            worst_x = x;
        }
    }
    o.require(worst < 1e-3, "transfer residual < 1e-3 at 20 points, truncation 200");
    o.detail << std::setprecision(4) << "  max transfer residual = " << worst << " at x = " << worst_x << "\n";
    const std::array<Rect, 3> rects{Rect{0.2, 0.4, 0.5, 1.5}, Rect{0.6, 0.9, 0.2, 0.8}, Rect{1.5, 2.5, 1.0, 2.0}};
    std::uint64_t seed = 2028;
    for (const auto& a : rects) {
        const auto est = invariance_mc(spec, a, 0.05, 5.0, 1000000, seed++);
        o.require(est.within(3.0), "MC invariance within 3 sigma");
        o.detail << std::setprecision(6) << "  m(A) = " << est.mass << ", m(P^-1 A) = " << est.preimage_mass
                 << ", diff/se = " << (est.mass - est.preimage_mass) / est.difference_stderr << "\n";
    }
    const double base = strip_mass_quadrature(spec, 0.5, 1.0);
    o.require(std::abs(base - std::log(2.0)) < 1e-8, "m((1/2,1) x R+) = ln 2 within 1e-8");
    o.detail << std::setprecision(15) << "  quadrature base mass = " << base << "\n";
}

long long g_budget = 10000000;

void mixing(Outcome& o) {
    const auto fam = MapFamily::modular();
    const Bump u{0.75, 1.0, 1.6, 0.2, 0.8, 1.5, 1.0, Space::sigma_r};
    std::vector<double> grid;
    for (int k = 0; k <= 20; ++k) grid.push_back(0.5 * k);
    std::vector<DecayFit> fits;
    for (std::uint64_t seed : {42ULL, 43ULL, 44ULL}) {
        auto est = correlate(fam, u, u, grid, g_budget, seed);
        try {
            const auto f = fit_decay(est);
            const bool env = envelope_decreasing(est, f.points);
            o.require(f.delta_hat > 0.0, "delta_hat > 0");
            o.require(f.r_squared >= 0.9, "R^2 >= 0.9");
            o.require(env, "decreasing envelope on the signal window");
            o.detail << std::setprecision(5) << "  seed " << seed << ": delta_hat = " << f.delta_hat << " +- "
                     << f.delta_error << ", R^2 = " << f.r_squared << ", window = " << f.points
                     << " points, envelope " << (env ? "ok" : "broken") << ", rejected = " << est.rejected << "\n";
            fits.push_back(f);
        } catch (const InsufficientSignalError& e) {
            o.require(false, std::string("signal window for seed ") + std::to_string(seed) + ": " + e.what());
        }
    }
    for (std::size_t i = 0; i < fits.size(); ++i)
        for (std::size_t j = i + 1; j < fits.size(); ++j) {
            const double gap = std::abs(fits[i].delta_hat - fits[j].delta_hat);
            const double se = std::hypot(fits[i].delta_error, fits[j].delta_error);
            o.require(gap <= 2.0 * se, "delta_hat stable within 2 combined sigma");
        }

    // Transport: the same pair of Sigma_rho observables measured on both suspensions.
    const Bump a{0.75, 0.8, 0.3, 0.1, 0.4, 0.2, 1.0, Space::sigma_rho};
    const Bump b{3.0, 0.45, 0.3, 0.5, 0.2, 0.2, 1.0, Space::sigma_rho};
    const std::vector<double> t{0.8, 1.0, 1.2};  // where the pair has signal
    const long long n = std::max(100000LL, g_budget / 10);
    const auto induced = correlate(fam, a, b, t, n, 45);
    const auto direct = correlate_sigma_rho(fam, a, b, t, n, 46);
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double se = std::hypot(induced.uv_error[k], direct.uv_error[k]);
        o.require(std::abs(induced.uv[k] - direct.uv[k]) <= 3.0 * se, "transport equality within 3 sigma");
        o.detail << std::setprecision(5) << "  transport t = " << t[k] << ": Sigma_r " << induced.uv[k]
                 << ", Sigma_rho " << direct.uv[k] << ", diff/se = " << (induced.uv[k] - direct.uv[k]) / se << "\n";
    }
}

void return_counts(Outcome& o) {
    const auto fam = MapFamily::modular();
    std::vector<double> t;
    for (int k = 0; k <= 14; ++k) t.push_back(1.0 + 0.5 * k);
    const auto d = returns_decay(fam, RoofConfig{}, t, 1000000, 2029);
    o.require(d.fit.slope < 0.0, "negative log-linear slope");
    o.require(d.fit.r_squared >= 0.9, "R^2 >= 0.9 on [1, 8]");
    o.detail << std::setprecision(5) << "  slope = " << d.fit.slope << ", R^2 = " << d.fit.r_squared
             << ", mean at t=1: " << d.mean.front() << ", at t=8: " << d.mean.back() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_budget = static_cast<long long>(std::stod(argv[1]));
    const std::vector<Criterion> criteria{
        {1, "modular exact identities", 1.0, exact_identities},
        {2, "assumption suite", 10.0, assumption_suite},
        {3, "hyperbolicity constants", 10.0, hyperbolicity},
        {4, "roof consistency", 10.0, roof_consistency},
        {5, "UNI bound", 30.0, uni},
        {6, "exponential tails", 60.0, tails},
        {7, "cohomology", 30.0, cohomology},
        {8, "invariant density", 60.0, invariant_density},
        {9, "mixing experiment", 0.0, mixing},
        {10, "return-count decay", 60.0, return_counts},
    };
    int failed = 0;
    std::cout << "correlation budget per seed: " << g_budget << ", threads: " << default_threads() << "\n";
    for (const auto& c : criteria) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.body(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.seconds > 0.0) o.require(secs < c.seconds, "time budget");
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.id << " " << c.title << " (" << std::fixed
                  << std::setprecision(2) << secs << " s";
        if (c.seconds > 0.0) std::cout << ", budget " << c.seconds << " s";
        std::cout << ")\n" << std::defaultfloat << o.detail.str() << std::flush;
    }
    std::cout << (10 - failed) << " of 10 criteria passed\n";
    return failed == 0 ? 0 : 1;
}
