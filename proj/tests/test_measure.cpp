#include "hypmix/measure.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace hypmix;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Asymptotic Kolmogorov p-value with the usual small-sample correction.
double ks_p_value(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const double n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - u[i], u[i] - static_cast<double>(i) / n});
    const double lam = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) p += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("joint density, marginal and strip masses") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    CHECK(density_m(spec, {1.0, 1.0}) == 0.25);
    CHECK_THROWS_AS(density_m(spec, {0.0, 1.0}), DomainError);
    for (double x : {0.05, 0.3, 0.7, 1.0, 2.5, 7.0}) CHECK_THAT(marginal_by_quadrature(spec, x), WithinRel(1.0 / x, 1e-10));
    CHECK_THAT(strip_mass_quadrature(spec, 0.5, 1.0), WithinAbs(std::log(2.0), 1e-8));
    CHECK_THAT(spec.induced_base_mass(), WithinRel(std::log(2.0), 1e-15));
    CHECK_THAT(strip_mass_quadrature(spec, 0.2, 3.0), WithinAbs(std::log(15.0), 1e-8));
}

TEST_CASE("rectangle masses in closed form against quadrature") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    using boost::math::quadrature::gauss_kronrod;
    for (const Rect r : {Rect{0.2, 0.4, 0.5, 2.0}, Rect{0.6, 0.9, 0.2, 0.8}, Rect{1.5, 2.5, 1.0, 2.0}}) {
        const double q = gauss_kronrod<double, 31>::integrate(
            [&](double x) {
                return gauss_kronrod<double, 31>::integrate([&](double y) { return spec.joint({x, y}); }, r.y0, r.y1, 8,
                                                            1e-13);
            },
            r.x0, r.x1, 8, 1e-13);
        CHECK_THAT(spec.rect_mass(r), WithinRel(q, 1e-10));
    }
    // Unbounded in y: ln((x1 + y0) / (x0 + y0)).
    CHECK_THAT(spec.rect_mass({0.5, 1.0, 0.0, kInf}), WithinRel(std::log(2.0), 1e-15));
}

TEST_CASE("conditional y draw inverts the conditional CDF") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    CHECK(spec.conditional_y(1.0, 0.5) == 1.0);
    for (double x : {0.3, 1.7})
        for (double u : {0.1, 0.5, 0.93}) CHECK_THAT(spec.conditional_cdf(x, spec.conditional_y(x, u)), WithinRel(u, 1e-14));
}

TEST_CASE("roof mass of the full suspension is pi^2 / 3") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    // Integrating the roof against (x+y)^-2 over y reduces each side to
    // (1/2) int_0^1 [-ln u / (1-u) - ln(1-u) / u] du = pi^2 / 6.
    const auto n = compute_normalizers(spec);
    const double z = std::numbers::pi * std::numbers::pi / 6.0;
    CHECK_THAT(n.left_roof_mass, WithinRel(z, 1e-8));
    CHECK_THAT(n.right_roof_mass, WithinRel(z, 1e-8));
    CHECK_THAT(n.total_roof_mass, WithinRel(2.0 * z, 1e-8));
    CHECK(n.induced_base_mass > 0.0);
}

TEST_CASE("window roof mass grows towards the total") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    double prev = 0.0;
    for (double y1 : {1.0, 10.0, 100.0}) {
        const double m = window_mass(spec, {0.05, 0.95, 0.0, y1});
        CHECK(std::isfinite(m));
        CHECK(m > prev);
        CHECK(m < std::numbers::pi * std::numbers::pi / 6.0);
        prev = m;
    }
}

TEST_CASE("transfer operator fixes the marginal density") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    double prev = kInf;
    for (long long n : {25LL, 50LL, 100LL, 200LL, 400LL}) {
        const auto r = transfer_residual(fam, spec, 0.7, n, n);
        CHECK(r.residual < prev);
        CHECK(r.residual <= r.tail_bound);
        prev = r.residual;
    }
    // The omitted branches near x = 1 carry mass of order 1/N, so doubling halves the residual.
    const double r200 = transfer_residual(fam, spec, 0.7, 200, 200).residual;
    const double r400 = transfer_residual(fam, spec, 0.7, 400, 400).residual;
    CHECK_THAT(r200 / r400, WithinAbs(2.0, 0.1));
    // Stated target at truncation 200.
    CHECK(transfer_residual(fam, spec, 0.7, 200, 200).residual < 1e-3);
    CHECK_THROWS_AS(transfer_residual(fam, spec, 0.3, 10, 10), DomainError);
}

TEST_CASE("base map preimages of rectangles") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    for (const Rect a : {Rect{0.2, 0.4, 0.5, 2.0}, Rect{0.6, 0.9, 0.2, 0.8}, Rect{1.5, 2.5, 1.0, 2.0}}) {
        const auto pre = base_preimage(fam, a);
        double mass = 0.0;
        for (const auto& r : pre) mass += spec.rect_mass(r);
        CHECK_THAT(mass, WithinRel(spec.rect_mass(a), 1e-12));
        // Points of the preimage land in a.
        RngStream rng(61, 0);
        for (const auto& r : pre)
            for (int i = 0; i < 200; ++i) {
                const double y1 = std::isinf(r.y1) ? r.y0 + 50.0 : r.y1;
                const PlanePoint p{r.x0 + (r.x1 - r.x0) * rng.uniform(), r.y0 + (y1 - r.y0) * rng.uniform()};
                if (!r.contains(p)) continue;
                CHECK(a.contains(P_step(fam, p)));
            }
    }
}

TEST_CASE("Monte Carlo invariance of m under the base map") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    const auto est = invariance_mc(spec, {0.2, 0.4, 0.5, 2.0}, 0.05, 5.0, 1000000, 71);
    CHECK(est.n_samples == 1000000);
    CHECK(est.within(3.0));
    CHECK_THAT(est.mass, WithinAbs(est.exact_mass, 4.0 * est.difference_stderr + 1e-3));
    CHECK_THROWS_AS(invariance_mc(spec, {0.2, 0.4, 0.5, 2.0}, 0.25, 5.0, 10, 1), ConfigError);
}

TEST_CASE("second induced map preserves nu") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    const auto r = nu_invariance_chi2(spec, 1000000, 73);
    CHECK(r.before.p_value > 0.01);
    CHECK(r.after.p_value > 0.01);
    CHECK(static_cast<double>(r.rejected) < 1e-4 * r.n);
}

TEST_CASE("x-marginal of nu samples is (1/x) / ln 2") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    CHECK(mu_hat_marginal_chi2(spec, 200000, 79).p_value > 0.01);
}

TEST_CASE("strip sampler frequency of the induced base") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    RngStream rng(83, 0);
    const int n = 200000;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        const auto p = sample_m_strip(spec, rng, 0.05, 5.0);
        if (p.x > 0.5 && p.x < 1.0) ++hits;
    }
    const double want = std::log(2.0) / std::log(100.0);
    const double se = std::sqrt(want * (1.0 - want) / n);
    CHECK(std::abs(hits / double(n) - want) < 3.0 * se);
}

TEST_CASE("roof-weighted sampler matches window masses") {
    const auto fam = MapFamily::modular();
    const DensitySpec spec(fam);
    const Rect box{0.2, 0.9, 0.1, 3.0};
    const Rect sub{0.5, 0.8, 0.5, 2.0};
    const auto win = RoofWindow::make(fam, box);
    RngStream rng(89, 0);
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        const auto s = sample_m_rho(spec, win, rng);
        CHECK(s.point.s >= 0.0);
        CHECK(s.point.s < rho_eval(fam, s.point.base));
        if (sub.contains(s.point.base)) ++hits;
    }
    const double want = window_mass(spec, sub) / window_mass(spec, box);
    const double se = std::sqrt(want * (1.0 - want) / n);
    CHECK(std::abs(hits / double(n) - want) < 3.0 * se);

    CHECK_THROWS_AS(RoofWindow::make(fam, {0.5, 1.5, 0.1, 1.0}), ConfigError);
    CHECK_THROWS_AS(sample_m_rho(spec, win, rng, 0), BudgetError);
}

TEST_CASE("height given the base point is uniform under the roof") {
    const auto fam = MapFamily::modular();
    RngStream rng(97, 0);
    const PlanePoint p{0.7, 1.3};
    const double roof = rho_eval(fam, p);
    std::vector<double> u;
    for (int i = 0; i < 10000; ++i) u.push_back(sample_height(fam, p, rng) / roof);
    CHECK(ks_p_value(u) > 0.01);
}
