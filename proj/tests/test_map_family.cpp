#include "hypmix/assumptions.hpp"
#include "hypmix/family.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace hypmix;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// The modular family with an override hook, for forced-failure cases.
struct Patched {
    MapFamily base = MapFamily::modular();
    double bad_x = -1.0;
    enum class Defect { none, concave_at_point, adler_increasing, steep_fiber } defect = Defect::none;

    Jet f0_eval(double x) const {
        Jet j = base.f0_eval(x);
        if (defect == Defect::concave_at_point && x == bad_x) j.d2 = -1.0;
        if (defect == Defect::adler_increasing && x > 0.7) j.d2 *= 1.0 + 50.0 * (x - 0.7);
        return j;
    }
    Jet g0_eval(double y) const {
        Jet j = base.g0_eval(y);
        if (defect == Defect::steep_fiber) j.d1 *= 1.5;
        return j;
    }
    const FamilyConstants& constants() const { return base.constants(); }
};

}  // namespace

TEST_CASE("f0 and g0 closed forms at hand-computed points") {
    const auto fam = MapFamily::modular();
    const Jet a = fam.f0_eval(0.5);
    CHECK(a.value == 1.0);
    CHECK(a.d1 == 4.0);
    CHECK(a.d2 == 16.0);
    const Jet b = fam.f0_eval(2.0 / 3.0);
    CHECK_THAT(b.value, WithinRel(2.0, 1e-15));
    CHECK_THAT(b.d1, WithinRel(9.0, 1e-14));
    CHECK_THAT(b.d2, WithinRel(54.0, 1e-14));
    const Jet g = fam.g0_eval(1.0);
    CHECK(g.value == 0.5);
    CHECK(g.d1 == 0.25);
    CHECK(g.d2 == -0.25);
}

TEST_CASE("domain errors") {
    const auto fam = MapFamily::modular();
    CHECK_THROWS_AS(fam.f0_eval(0.0), DomainError);
    CHECK_THROWS_AS(fam.f0_eval(1.0), DomainError);
    CHECK_THROWS_AS(fam.f0_eval(-0.5), DomainError);
    CHECK_THROWS_AS(fam.g0_eval(0.0), DomainError);
    CHECK_THROWS_AS(fam.g0_eval(-1.0), DomainError);
}

TEST_CASE("f0 derivative tends to 1 at 0") {
    const auto fam = MapFamily::modular();
    double prev = std::numeric_limits<double>::infinity();
    for (double x = 0.1; x > 1e-9; x /= 10.0) {
        const double gap = fam.f0_eval(x).d1 - 1.0;
        CHECK(gap < prev);
        prev = gap;
    }
    CHECK(prev < 1e-8);
}

TEST_CASE("round trip g0(f0(x)) = x") {
    const auto fam = MapFamily::modular();
    for (double x : make_grid({})) CHECK_THAT(fam.g0(fam.f0(x)), WithinRel(x, 1e-12));
    // Exact path.
    for (int p = 1; p < 40; ++p) {
        const Rational r(p, 41);
        CHECK(apply_exact(fam.g0_exact(), apply_exact(fam.f0_exact(), r)) == r);
    }
}

TEST_CASE("Adler ratio of the modular family is 2(1 - x)") {
    const auto fam = MapFamily::modular();
    for (double x : make_grid({})) {
        const Jet j = fam.f0_eval(x);
        CHECK_THAT(j.d2 / (j.d1 * j.d1), WithinAbs(2.0 * (1.0 - x), 1e-12));
    }
}

TEST_CASE("modular family passes the assumption suite") {
    const auto fam = MapFamily::modular();
    const auto rep = check_assumptions(fam, GridSpec{}, 1000);
    CHECK(rep.all_pass());
    for (const char* name : {"A2", "A4", "A5", "A6", "B(i) omega1", "B(i) omega2", "B(ii)", "B(iii)"})
        CHECK(rep.get(name).verdict == Verdict::pass);
    CHECK(rep.get("A1").verdict == Verdict::ungraded_trend);
    CHECK(rep.get("A3").verdict == Verdict::ungraded_trend);
    CHECK_THAT(rep.c_a_estimate, WithinAbs(2.0, 1e-6));
    // Partial sums of omega^(1 - sigma) with sigma = 0.45.
    double oracle = 0.0;
    for (long n = 1000; n >= 2; --n) oracle += std::pow(1.0 / ((n - 1.0) * (n - 1.0)), 0.55);
    CHECK_THAT(rep.omega1_partial, WithinRel(oracle, 1e-12));
}

TEST_CASE("A5 holds on arbitrary grids") {
    const auto fam = MapFamily::modular();
    for (std::size_t n : {8, 101, 5000})
        for (double eps : {1e-3, 1e-6, 1e-10}) CHECK(check_assumptions(fam, GridSpec{n, eps}, 10).get("A5").verdict == Verdict::pass);
}

TEST_CASE("B(ii) and B(iii) identities of the modular family") {
    const auto fam = MapFamily::modular();
    for (long n = 2; n <= 1000; ++n) CHECK_THAT(fam.g0_eval(n - 1.0).d1, WithinRel(1.0 / (double(n) * n), 1e-14));
    // Product of g0' along g0^j(1) = 1/(j+1) is 4/(n+1)^2.
    long double prod = 1.0L;
    for (long n = 2; n <= 1000; ++n) {
        prod *= fam.g0_eval(1.0 / n).d1;
        CHECK_THAT(static_cast<double>(prod), WithinRel(4.0 / ((n + 1.0) * (n + 1.0)), 1e-11));
    }
}

TEST_CASE("forced failures carry witnesses") {
    const auto grid = make_grid({});
    Patched concave;
    concave.defect = Patched::Defect::concave_at_point;
    concave.bad_x = grid[1234];
    const auto r1 = check_assumptions(concave, GridSpec{}, 10);
    CHECK(r1.get("A4").verdict == Verdict::fail);
    REQUIRE(r1.get("A4").witness);
    CHECK(*r1.get("A4").witness == grid[1234]);
    CHECK_FALSE(r1.all_pass());

    Patched adler;
    adler.defect = Patched::Defect::adler_increasing;
    const auto r2 = check_assumptions(adler, GridSpec{}, 10);
    CHECK(r2.get("A5").verdict == Verdict::fail);
    REQUIRE(r2.get("A5").witness);
    CHECK(*r2.get("A5").witness > 0.7);

    Patched steep;
    steep.defect = Patched::Defect::steep_fiber;
    const auto r3 = check_assumptions(steep, GridSpec{}, 100);
    CHECK(r3.get("B(ii)").verdict == Verdict::fail);
    CHECK(r3.get("B(ii)").witness.has_value());
}

TEST_CASE("every fail verdict has a witness") {
    Patched adler;
    adler.defect = Patched::Defect::adler_increasing;
    for (const auto& r : check_assumptions(adler, GridSpec{}, 10).results)
        if (r.verdict == Verdict::fail) CHECK(r.witness.has_value());
}

TEST_CASE("omega sequences") {
    const auto w = OmegaSequence::inverse_square(-1, 2);
    CHECK(w(2) == 1.0);
    CHECK(w(3) == 0.25);
    CHECK(w.exact(5) == Rational(1, 16));
    CHECK_THROWS_AS(w(1), DomainError);
    CHECK_THROWS_AS(OmegaSequence::inverse_square(-3, 2), ConfigError);
    // Tail bound dominates the true tail.
    const double p = 0.6;
    double tail = 0.0;
    for (long n = 200000; n > 100; --n) tail += std::pow(w(n), p);
    CHECK(tail <= *w.power_tail_bound(p, 100));
    // Tables have no certified tail.
    const auto t = OmegaSequence::table(1, {0.5, 0.25, 0.125});
    CHECK_FALSE(t.power_tail_bound(0.5, 2).has_value());
    CHECK_THROWS_AS(OmegaSequence::table(1, {0.5, -1.0}), ConfigError);
}

TEST_CASE("scaled Mobius family k x / (1 - x)") {
    MapFamily fam({2, 0, -1, 1}, FamilyConstants{}, "k2");
    CHECK(fam.f0(0.5) == 2.0);
    CHECK_THAT(fam.g0(fam.f0(0.3)), WithinRel(0.3, 1e-14));
    CHECK_THROWS_AS(MapFamily({1, 1, -1, 1}, FamilyConstants{}), ConfigError);
    CHECK_THROWS_AS(MapFamily({-1, 0, -1, 1}, FamilyConstants{}), ConfigError);
}
