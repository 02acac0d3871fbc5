#include "hypmix/measure.hpp"
#include "hypmix/skew.hpp"

#include <catch_amalgamated.hpp>

using namespace hypmix;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("base map on both sides of x = 1") {
    const auto fam = MapFamily::modular();
    const auto a = P_step(fam, {0.5, 1.0});
    CHECK(a.x == 1.0);
    CHECK(a.y == 0.5);
    const auto b = P_step(fam, {2.5, 0.25});
    CHECK(b.x == 1.5);
    CHECK(b.y == 1.25);
    CHECK_THROWS_AS(P_step(fam, {1.0, 2.0}), SingularityError);
    CHECK_THROWS_AS(P_step(fam, {-1.0, 2.0}), DomainError);
    CHECK_THROWS_AS(P_inverse(fam, {0.3, 1.0}), SingularityError);
}

TEST_CASE("inverse base map undoes the base map") {
    const auto fam = MapFamily::modular();
    RngStream rng(1, 0);
    for (int i = 0; i < 10000; ++i) {
        const PlanePoint p{4.0 * rng.uniform() + 1e-3, 4.0 * rng.uniform() + 1e-3};
        if (p.x == 1.0) continue;
        const auto back = P_inverse(fam, P_step(fam, p));
        CHECK_THAT(back.x, WithinRel(p.x, 1e-12));
        CHECK_THAT(back.y, WithinRel(p.y, 1e-12));
    }
}

TEST_CASE("induced map equals theta steps of the base map") {
    const auto fam = MapFamily::modular();
    RngStream rng(2, 0);
    int checked = 0;
    while (checked < 500) {
        const PlanePoint p{0.5 + 0.5 * rng.uniform(), 3.0 * rng.uniform() + 0.01};
        InducedStep st;
        try {
            st = Phat_step(fam, p);
        } catch (const BoundaryError&) {
            continue;
        }
        if (theta(st.index) > 40) continue;
        PlanePoint z = p;
        for (long long k = 0; k < theta(st.index); ++k) z = P_step(fam, z);
        const double dx = fhat_branch(fam, st.index, p.x).d1;
        CHECK_THAT(st.point.x, WithinAbs(z.x, 1e-13 * dx));
        CHECK_THAT(st.point.y, WithinRel(z.y, 1e-12));
        // First return: no intermediate point lies over (1/2, 1).
        PlanePoint w = p;
        for (long long k = 1; k < theta(st.index); ++k) {
            w = P_step(fam, w);
            CHECK_FALSE((w.x > 0.5 && w.x < 1.0));
        }
        ++checked;
    }
}

TEST_CASE("second induced map composes two steps") {
    const auto fam = MapFamily::modular();
    RngStream rng(3, 0);
    for (int i = 0; i < 1000; ++i) {
        const PlanePoint p{0.5 + 0.5 * rng.uniform(), 2.0 * rng.uniform() + 0.01};
        try {
            const auto two = Ptilde_step(fam, p);
            const auto a = Phat_step(fam, p);
            const auto b = Phat_step(fam, a.point);
            CHECK(two.point.x == b.point.x);
            CHECK(two.point.y == b.point.y);
            CHECK(two.index == QuadIndex{a.index, b.index});
        } catch (const BoundaryError&) {
        }
    }
}

TEST_CASE("fiber maps: closed form against orbit product") {
    const auto fam = MapFamily::modular();
    RngStream rng(4, 0);
    for (int i = 0; i < 1000; ++i) {
        const BranchIndex b{2 + static_cast<long long>(rng.next_u64() % 200), 1 + static_cast<long long>(rng.next_u64() % 200)};
        const double y = 10.0 * rng.uniform() + 1e-6;
        const auto c = ghat_eval(fam, b, y);
        const auto s = ghat_series(fam, b, y);
        CHECK_THAT(c.value, WithinRel(s.value, 1e-12));
        CHECK_THAT(c.d1, WithinRel(s.d1, 1e-10));
        const auto img = ghat_image(fam, b);
        CHECK(c.value > img.lo);
        CHECK(c.value < img.hi);
    }
}

TEST_CASE("fiber contraction of the second induced map") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    RngStream rng(5, 0);
    double worst = 0.0;
    int n = 0;
    while (n < 10000) {
        const PlanePoint p = sample_nu(spec, rng);
        try {
            const auto quad = locate_quad(fam, p.x);
            worst = std::max(worst, gtilde_deriv(fam, quad, p.y));
            ++n;
        } catch (const BoundaryError&) {
        }
    }
    CHECK(worst <= 0.25 + 1e-12);
}

TEST_CASE("run lengths and run advances") {
    const auto fam = MapFamily::modular();
    RngStream rng(6, 0);
    for (int i = 0; i < 2000; ++i) {
        const double x = i % 2 ? 0.999 * rng.uniform() + 1e-4 : 1.0 + 30.0 * rng.uniform();
        const auto n = run_length(fam, x);
        // Brute force: steps until the point crosses to the other side of 1.
        std::uint64_t brute = 0;
        PlanePoint z{x, 0.7};
        const bool left = x < 1.0;
        while ((z.x < 1.0) == left) {
            z = P_step(fam, z);
            ++brute;
        }
        CHECK(n == brute);
        const auto adv = run_advance(fam, {x, 0.7}, n);
        CHECK_THAT(adv.x, WithinAbs(z.x, 1e-9 * std::max(1.0, z.x) * (left ? fam.f0_power(n).derivative(x) : 1.0)));
        CHECK_THAT(adv.y, WithinRel(z.y, 1e-12));
    }
    CHECK(run_length(fam, 1.0) == 0);
}
