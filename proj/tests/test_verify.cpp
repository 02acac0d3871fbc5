#include "hypmix/verify.hpp"

#include <catch_amalgamated.hpp>

#include <array>
#include <cmath>

using namespace hypmix;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Modular family whose Adler ratio grows to the right, breaking A5.
struct AdlerBroken {
    MapFamily base = MapFamily::modular();
    Jet f0_eval(double x) const {
        Jet j = base.f0_eval(x);
        if (x > 0.6) j.d2 *= 1.0 + 40.0 * (x - 0.6);
        return j;
    }
    Jet g0_eval(double y) const { return base.g0_eval(y); }
    const FamilyConstants& constants() const { return base.constants(); }
};

// Tails partial sum by direct exact-rational geometry, for a small truncation.
double tails_oracle(const MapFamily& fam, double sigma, long long s_max, long long q_max, double y_prime) {
    const double sr = sigma * fam.constants().rho0;
    double sum = 0.0;
    for (long long s0 = 2; s0 <= s_max; ++s0)
        for (long long q0 = 1; q0 <= q_max; ++q0)
            for (long long s1 = 2; s1 <= s_max; ++s1)
                for (long long q1 = 1; q1 <= q_max; ++q1) {
                    const std::array<BranchIndex, 2> two{BranchIndex{s0, q0}, BranchIndex{s1, q1}};
                    const Rational d = inverse_branch_exact(fam, two, Rational(1));
                    const Rational c = inverse_branch_exact(fam, two, Rational(1, 2));
                    const Rational mid = interval_J_exact(fam, two[1]).hi;
                    const Rational ft = fhat_deriv_exact(fam, two[0], d) * fhat_deriv_exact(fam, two[1], mid);
                    const double gt = gtilde_deriv(fam, {two[0], two[1]}, y_prime);
                    sum += to_double(Rational(d - c)) * std::pow(to_double(ft) / gt, sr);
                }
    return sum;
}

}  // namespace

TEST_CASE("UNI reference constant is 1/21 on the modular family") {
    const auto fam = MapFamily::modular();
    CHECK_THAT(uni_constant(fam), WithinRel(1.0 / 21.0, 1e-12));
}

TEST_CASE("UNI derivative bound holds uniformly in n") {
    const auto fam = MapFamily::modular();
    const auto reps = uni_check(fam, {1, 2, 3, 4}, 1000);
    REQUIRE(reps.size() == 4);
    for (const auto& r : reps) {
        CHECK(r.pass);
        CHECK(r.inf_dpsi >= 1.0 / 21.0 - 1e-9);
        CHECK(r.c_u_reference == reps[0].c_u_reference);
        CHECK_FALSE(r.sign_witness.has_value());
        CHECK_FALSE(r.witness.has_value());
    }
    CHECK_THROWS_AS(uni_dpsi(fam, 0, 0.7), DomainError);
}

TEST_CASE("UNI summands are positive except possibly the last") {
    const auto fam = MapFamily::modular();
    for (int n = 1; n <= 4; ++n)
        for (double x : {0.501, 0.6, 0.75001, 0.9, 0.999}) {
            const auto t = uni_summands(fam, n, x);
            REQUIRE(t.size() == static_cast<std::size_t>(2 * n));
            for (std::size_t k = 1; k < t.size(); ++k) CHECK(t[k] > 0.0);
        }
}

TEST_CASE("UNI derivative matches a finite difference of roof sums") {
    const auto fam = MapFamily::modular();
    const RoofConfig cfg;
    for (int n = 1; n <= 3; ++n)
        for (double x : {0.55, 0.62, 0.7, 0.83, 0.95}) {
            const double fd = uni_psi_fd(fam, cfg, n, x, 1e-5);
            CHECK_THAT(uni_dpsi(fam, n, x), WithinRel(fd, 1e-5));
        }
}

TEST_CASE("UNI check reports a witness when A5 is broken") {
    const AdlerBroken fam;
    const auto reps = uni_check(fam, {1, 2}, 500);
    bool any_fail = false;
    for (const auto& r : reps) {
        if (!r.pass) {
            any_fail = true;
            REQUIRE(r.witness.has_value());
            CHECK(*r.witness > 0.5);
            CHECK(*r.witness < 1.0);
            CHECK(uni_dpsi(fam, r.n, *r.witness) < r.c_u_reference);
        }
    }
    CHECK(any_fail);
}

TEST_CASE("tails: sigma range is enforced") {
    const auto fam = MapFamily::modular();
    CHECK_THROWS_AS(tails_partial(fam, 0.6, 10, 10, 1.0), ConfigError);
    CHECK_THROWS_AS(tails_partial(fam, 0.45, 10, 10, 1.0), ConfigError);
    CHECK_THROWS_AS(tails_partial(fam, 0.0, 10, 10, 1.0), ConfigError);
    CHECK_THROWS_AS(tails_partial(fam, 0.3, 1, 10, 1.0), ConfigError);
    CHECK_NOTHROW(tails_partial(fam, 0.4, 4, 4, 1.0));
}

TEST_CASE("tails partial sum agrees with exact geometry") {
    const auto fam = MapFamily::modular();
    for (double sigma : {0.1, 0.4}) {
        const auto rep = tails_partial(fam, sigma, 6, 5, 1.0, 2);
        CHECK_THAT(rep.partial_sum, WithinRel(tails_oracle(fam, sigma, 6, 5, 1.0), 1e-10));
    }
}

TEST_CASE("tails: monotone, majorised and comparable") {
    const auto fam = MapFamily::modular();
    double prev = 0.0;
    for (long long m : {10LL, 20LL, 40LL}) {
        const auto rep = tails_partial(fam, 0.4, m, m, 1.0);
        CHECK(rep.partial_sum > prev);
        prev = rep.partial_sum;
        CHECK(rep.half_sum < rep.partial_sum);
        CHECK(rep.comparability_violations == 0);
        // Each majorant term lies under its omega-product term.
        CHECK(rep.majorant_sum <= rep.omega_majorant);
        CHECK(std::isfinite(rep.tail_estimate));
        CHECK(rep.tail_estimate > 0.0);
    }
}

TEST_CASE("ordineminore bound against an integer oracle") {
    const auto fam = MapFamily::modular();
    const auto rep = ordineminore_check(fam, 50, 50);
    CHECK(rep.checked == 49 * 50);
    CHECK(rep.violations == 0);
    CHECK_FALSE(rep.witness.has_value());
    CHECK(rep.max_ratio < 1.0);
    // Fhat'(d) = (qs+1)^2, so the bound reads (s-1)^2 (q+1)^2 < 4 (qs+1)^2 in integers.
    for (long long s = 2; s <= 50; ++s)
        for (long long q = 1; q <= 50; ++q) REQUIRE((s - 1) * (s - 1) * (q + 1) * (q + 1) < 4 * (q * s + 1) * (q * s + 1));
}

TEST_CASE("two-sided comparabilities on sampled quads") {
    const auto fam = MapFamily::modular();
    const auto rep = ordini_check(fam, sample_quads(1000, 9), 1.0);
    CHECK(rep.samples == 1000);
    CHECK(rep.bounded);
    CHECK(rep.pt1_violations == 0);
    CHECK(rep.pt2_violations == 0);
    CHECK(rep.pt1_min >= 1.0 - 1e-12);
    CHECK(rep.pt1_max <= rep.pt1_upper_reference);
    CHECK(rep.pt2_max <= rep.pt2_upper_reference);
    // |J| on the float path equals hi - lo of the exact interval.
    for (long long s = 2; s < 20; ++s) {
        const auto j = interval_J_exact(fam, {s, 3});
        CHECK_THAT(interval_J_length(fam, {s, 3}), WithinRel(to_double(Rational(j.hi - j.lo)), 1e-12));
    }
}

TEST_CASE("bounded distortion at both inducing levels") {
    const auto fam = MapFamily::modular();
    const auto a = distortion_check(fam, 10000, 3);
    for (const auto* lvl : {&a.hat, &a.tilde}) {
        CHECK(lvl->pairs == 10000);
        CHECK(lvl->violations == 0);
        CHECK(lvl->exp_violations == 0);
        CHECK(lvl->max_slack <= 0.0);
        CHECK(std::isfinite(lvl->max_constant));
    }
    // Doubling the sample leaves the empirical constants essentially unchanged.
    const auto b = distortion_check(fam, 20000, 3);
    CHECK(b.hat.max_constant / a.hat.max_constant < 1.1);
    CHECK(b.tilde.max_constant / a.tilde.max_constant < 1.1);
}

TEST_CASE("distortion of a degenerate pair is zero") {
    const auto fam = MapFamily::modular();
    DistortionLevel lvl;
    lvl.reference = distortion_constant_hat(fam);
    const auto psi = branch_inverse(fam, {4, 3});
    detail::distortion_pair(lvl, psi, 0.8, 0.8);
    CHECK(lvl.pairs == 1);
    CHECK(lvl.violations == 0);
    CHECK(lvl.max_slack == 0.0);
    CHECK(lvl.max_constant == 0.0);
}
