#pragma once

// Invariant measures of the modular instance and everything built on them:
// the density 1/(x+y)^2 of m, its x-marginal 1/x, rectangle masses, the
// induced probability nu on (1/2,1) x (0,inf), samplers, normalizers of the
// suspension measures, and Monte Carlo invariance checks.

#include "hypmix/errors.hpp"
#include "hypmix/family.hpp"
#include "hypmix/inducing.hpp"
#include "hypmix/parallel.hpp"
#include "hypmix/rng.hpp"
#include "hypmix/roof.hpp"
#include "hypmix/skew.hpp"
#include "hypmix/stats.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace hypmix {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Rect {
    double x0, x1, y0, y1;
    bool contains(const PlanePoint& p) const { return p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1; }
};

// Closed-form densities; only the modular family has them.
class DensitySpec {
public:
    explicit DensitySpec(const MapFamily& fam) : fam_(&fam) {
        if (!fam.is_modular()) throw ConfigError("closed-form invariant densities are only available for the modular family");
    }

    const MapFamily& family() const { return *fam_; }

    double joint(const PlanePoint& p) const {
        if (!(p.x > 0.0 && p.y > 0.0)) throw DomainError("density requires x, y > 0");
        const double s = p.x + p.y;
        return 1.0 / (s * s);
    }
    double marginal(double x) const {
        if (!(x > 0.0)) throw DomainError("marginal requires x > 0");
        return 1.0 / x;
    }
    // Inverse CDF of y given x: the conditional CDF is y / (x + y).
    double conditional_y(double x, double u) const { return x * u / (1.0 - u); }
    double conditional_cdf(double x, double y) const { return std::isinf(y) ? 1.0 : y / (x + y); }

    // m(rect) in closed form; y1 may be infinite.
    double rect_mass(const Rect& r) const {
        const double upper = std::isinf(r.y1) ? 0.0 : std::log((r.x1 + r.y1) / (r.x0 + r.y1));
        return std::log((r.x1 + r.y0) / (r.x0 + r.y0)) - upper;
    }

    // Mass of the induced base (1/2, 1) x (0, inf), which is ln 2.
    double induced_base_mass() const { return std::log(1.0 / base_left(*fam_)); }

private:
    const MapFamily* fam_;
};

inline double density_m(const DensitySpec& spec, const PlanePoint& p) { return spec.joint(p); }

// ---------------------------------------------------------------- quadrature

// x-marginal recomputed by integrating the joint density over y.
inline double marginal_by_quadrature(const DensitySpec& spec, double x) {
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate([&](double y) { return spec.joint({x, y}); }, 0.0, kInf);
}

// m((a,b) x (0,inf)) by nested quadrature.
inline double strip_mass_quadrature(const DensitySpec& spec, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double x) { return marginal_by_quadrature(spec, x); }, a, b, 10, 1e-13);
}

// Modular roof in coordinates that keep the distance to x = 1 exact:
// left branch with w = 1 - x, right branch with v = x - 1.
inline double rho_left_w(double w, double y) { return 0.5 * (std::log1p(y) - std::log(w)); }
inline double rho_right_v(double v, double y) { return 0.5 * (std::log1p(1.0 / y) - std::log(v) + std::log1p(v)); }

namespace detail {
// Integral over y in (0, inf) of g(y), split at 1.
template <class G>
double integrate_half_line(G&& g) {
    boost::math::quadrature::tanh_sinh<double> ts;
    boost::math::quadrature::exp_sinh<double> es;
    return ts.integrate(g, 0.0, 1.0) + es.integrate(g, 1.0, kInf);
}
}  // namespace detail

// Mass of m (x) Leb under the roof over x < 1 and over x > 1, by nested quadrature.
inline double roof_mass_left(const DensitySpec&) {
    boost::math::quadrature::tanh_sinh<double> ts;
    auto fiber = [](double x, double w) {
        // y = x z keeps the integrand bounded as x -> 0.
        return detail::integrate_half_line([&](double z) { return rho_left_w(w, x * z) / ((1 + z) * (1 + z)); }) / x;
    };
    // x in (0, 1/2) directly, x in (1/2, 1) through w = 1 - x.
    return ts.integrate([&](double x) { return fiber(x, 1.0 - x); }, 0.0, 0.5) +
           ts.integrate([&](double w) { return fiber(1.0 - w, w); }, 0.0, 0.5);
}

inline double roof_mass_right(const DensitySpec&) {
    boost::math::quadrature::tanh_sinh<double> ts;
    boost::math::quadrature::exp_sinh<double> es;
    auto fiber = [](double v) {
        const double x = 1.0 + v;
        return detail::integrate_half_line([&](double z) { return rho_right_v(v, x * z) / ((1 + z) * (1 + z)); }) / x;
    };
    return ts.integrate(fiber, 0.0, 1.0) + es.integrate(fiber, 1.0, kInf);
}

struct Normalizers {
    double total_roof_mass;        // m (x) Leb (Sigma_rho)
    double left_roof_mass;         // part over x < 1
    double right_roof_mass;        // part over x > 1
    double induced_base_mass;      // m((1/2,1) x (0,inf))
};

inline Normalizers compute_normalizers(const DensitySpec& spec) {
    Normalizers n{};
    n.left_roof_mass = roof_mass_left(spec);
    n.right_roof_mass = roof_mass_right(spec);
    n.total_roof_mass = n.left_roof_mass + n.right_roof_mass;
    n.induced_base_mass = spec.induced_base_mass();
    return n;
}

// ---------------------------------------------------------------- transfer operator

struct TransferResidual {
    double residual;      // |sum h(phi(x)) phi'(x) - h(x)| over the truncated branch set
    double tail_bound;    // bound on the omitted terms
};

inline TransferResidual transfer_residual(const MapFamily& fam, const DensitySpec& spec, double x, long long s_max,
                                          long long q_max) {
    const double left = base_left(fam);
    if (!(x > left && x < 1.0)) throw DomainError("transfer residual requires x in (g0(1), 1)");
    if (s_max < 2 || q_max < 1) throw DomainError("transfer residual requires s_max >= 2, q_max >= 1");
    long double sum = 0.0L, covered = 0.0L;
    for (long long s = s_max; s >= 2; --s) {
        for (long long q = q_max; q >= 1; --q) {
            const auto phi = branch_inverse(fam, {s, q});
            const double v = phi(x);
            sum += static_cast<long double>(spec.marginal(v) * phi.derivative(x));
            covered += static_cast<long double>(phi.image_length(left, 1.0));
        }
    }
    // Omitted branches cover the rest of (g0(1),1); on each, phi' <= |J| e^{C_A |Delta|} / |Delta|.
    const double width = 1.0 - left;
    const double omitted = std::max(0.0L, static_cast<long double>(width) - covered);
    const double sup_h = spec.marginal(left);
    const double bound = sup_h * omitted * std::exp(distortion_constant_hat(fam) * width) / width;
    return TransferResidual{static_cast<double>(std::abs(sum - static_cast<long double>(spec.marginal(x)))), bound};
}

// ---------------------------------------------------------------- samplers

// x with density proportional to 1/x on (a, b).
inline double sample_log_uniform(RngStream& rng, double a, double b) { return a * std::pow(b / a, rng.uniform()); }

// Point of m restricted to (a, b) x (0, inf).
inline PlanePoint sample_m_strip(const DensitySpec& spec, RngStream& rng, double a, double b) {
    const double x = sample_log_uniform(rng, a, b);
    return PlanePoint{x, spec.conditional_y(x, rng.uniform())};
}

// Point of nu, the normalized restriction of m to (g0(1), 1) x (0, inf).
inline PlanePoint sample_nu(const DensitySpec& spec, RngStream& rng) {
    return sample_m_strip(spec, rng, base_left(spec.family()), 1.0);
}

inline double sample_height(const MapFamily& fam, const PlanePoint& p, RngStream& rng) {
    return rho_eval(fam, p) * rng.uniform();
}

// Sampling window for m_rho: a box that stays on one side of x = 1, so the
// roof is bounded on it. The roof is monotone in each coordinate, so its
// maximum sits at a corner.
struct RoofWindow {
    Rect box;
    double roof_max = 0.0;
    double marginal_bound = 1.0;

    static RoofWindow make(const MapFamily& fam, const Rect& box) {
        if (!(box.x0 > 0.0 && box.x0 < box.x1 && box.y0 >= 0.0 && box.y0 < box.y1 && std::isfinite(box.y1)))
            throw ConfigError("roof window must be a non-empty finite box in the quadrant");
        if (box.x0 < 1.0 && box.x1 >= 1.0) throw ConfigError("roof window must not contain the line x = 1");
        if (box.x0 >= 1.0 && box.y0 <= 0.0) throw ConfigError("roof window right of x = 1 needs y0 > 0");
        RoofWindow w;
        w.box = box;
        const double ylo = std::max(box.y0, std::numeric_limits<double>::min());
        for (double x : {box.x0, box.x1})
            for (double y : {ylo, box.y1}) w.roof_max = std::max(w.roof_max, rho_eval(fam, {x, y}));
        // x (1/(x+y0) - 1/(x+y1)) is unimodal in x with its peak at sqrt(y0 y1).
        const double xm = std::clamp(std::sqrt(box.y0 * box.y1), box.x0, box.x1);
        w.marginal_bound = xm * (1.0 / (xm + box.y0) - 1.0 / (xm + box.y1));
        return w;
    }
};

struct RhoSample {
    FlowPoint point;
    long attempts;
};

// Point of m (x) Leb under the roof, restricted to the window box. Proposal:
// x log-uniform, y from the conditional law truncated to (y0, y1), s uniform
// below the maximal roof; accepted against the true x-marginal and the roof.
inline RhoSample sample_m_rho(const DensitySpec& spec, const RoofWindow& win, RngStream& rng, long rejection_cap = 10000) {
    const auto& fam = spec.family();
    const Rect& b = win.box;
    for (long attempt = 1; attempt <= rejection_cap; ++attempt) {
        const double x = sample_log_uniform(rng, b.x0, b.x1);
        const double f0 = spec.conditional_cdf(x, b.y0), f1 = spec.conditional_cdf(x, b.y1);
        const double y = spec.conditional_y(x, f0 + (f1 - f0) * rng.uniform());
        const double accept_x = x * (1.0 / (x + b.y0) - 1.0 / (x + b.y1)) / win.marginal_bound;
        if (rng.uniform() >= accept_x) continue;
        const double s = win.roof_max * rng.uniform();
        if (!(y > b.y0 && y < b.y1)) continue;
        if (s < rho_eval(fam, {x, y})) return RhoSample{{{x, y}, s, Space::sigma_rho}, attempt};
    }
    throw BudgetError("roof-weight rejection exceeded the configured cap");
}

// m (x) Leb mass of the window box under the roof.
inline double window_mass(const DensitySpec& spec, const Rect& box) {
    const auto& fam = spec.family();
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double x) {
            return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                [&](double y) { return rho_eval(fam, {x, y}) * spec.joint({x, y}); }, box.y0, box.y1, 8, 1e-12);
        },
        box.x0, box.x1, 8, 1e-12);
}

// ---------------------------------------------------------------- invariance checks

// Preimage of a rectangle under the base map, as at most two rectangles.
inline std::vector<Rect> base_preimage(const MapFamily& fam, const Rect& a) {
    std::vector<Rect> out;
    if (a.y0 < 1.0) {
        const double top = a.y1 >= 1.0 ? kInf : fam.f0(a.y1);
        out.push_back(Rect{fam.g0(a.x0), fam.g0(a.x1), a.y0 > 0 ? fam.f0(a.y0) : 0.0, top});
    }
    if (a.y1 > 1.0) out.push_back(Rect{a.x0 + 1.0, a.x1 + 1.0, std::max(a.y0, 1.0) - 1.0, a.y1 - 1.0});
    return out;
}

struct InvarianceEstimate {
    Rect rect;
    double mass;              // MC estimate of m(A)
    double preimage_mass;     // MC estimate of m(P^{-1} A)
    double difference_stderr; // standard error of the paired difference
    double exact_mass;        // closed form m(A)
    double exact_preimage_mass;
    double n_samples;
    bool within(double k_sigma) const { return std::abs(mass - preimage_mass) <= k_sigma * difference_stderr; }
};

// Paired MC estimate of m(A) and m(P^{-1}A) from one sample of m on an x-strip
// that must contain A and its preimage.
inline InvarianceEstimate invariance_mc(const DensitySpec& spec, const Rect& a, double strip_lo, double strip_hi,
                                        long long n_samples, std::uint64_t seed, std::size_t n_streams = 64,
                                        unsigned threads = default_threads()) {
    const auto& fam = spec.family();
    const auto pre = base_preimage(fam, a);
    auto inside = [&](const Rect& r) { return r.x0 >= strip_lo && r.x1 <= strip_hi; };
    if (!inside(a)) throw ConfigError("rectangle is outside the sampling strip");
    for (const auto& r : pre)
        if (!inside(r)) throw ConfigError("rectangle preimage is outside the sampling strip");
    const double strip = std::log(strip_hi / strip_lo);
    struct Partial {
        Moments a, pre, diff;
    };
    auto parts = map_streams<Partial>(n_streams, threads, [&](std::size_t i) {
        RngStream rng(seed, i);
        Partial p;
        const long long n = n_samples / static_cast<long long>(n_streams) +
                            (static_cast<long long>(i) < n_samples % static_cast<long long>(n_streams) ? 1 : 0);
        for (long long k = 0; k < n; ++k) {
            const auto pt = sample_m_strip(spec, rng, strip_lo, strip_hi);
            const double ia = a.contains(pt) ? 1.0 : 0.0;
            double ip = 0.0;
            for (const auto& r : pre) ip += r.contains(pt) ? 1.0 : 0.0;
            p.a.add(ia);
            p.pre.add(ip);
            p.diff.add(ia - ip);
        }
        return p;
    });
    Partial total;
    for (const auto& p : parts) {
        total.a.merge(p.a);
        total.pre.merge(p.pre);
        total.diff.merge(p.diff);
    }
    double exact_pre = 0.0;
    for (const auto& r : pre) exact_pre += spec.rect_mass(r);
    return InvarianceEstimate{a,
                              strip * total.a.mean(),
                              strip * total.pre.mean(),
                              strip * total.diff.stderr_of_mean(),
                              spec.rect_mass(a),
                              exact_pre,
                              total.a.n};
}

// Coarse grid on the induced base for histogram tests.
struct InducedGrid {
    std::vector<double> x_edges;
    std::vector<double> y_edges;

    static InducedGrid standard(const MapFamily& fam, int x_bins = 5) {
        InducedGrid g;
        const double left = base_left(fam);
        for (int i = 0; i <= x_bins; ++i) g.x_edges.push_back(left * std::pow(1.0 / left, double(i) / x_bins));
        g.x_edges.back() = 1.0;
        g.y_edges = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, kInf};
        return g;
    }
    std::size_t cells() const { return (x_edges.size() - 1) * (y_edges.size() - 1); }
    std::ptrdiff_t cell(const PlanePoint& p) const {
        const auto xi = std::upper_bound(x_edges.begin(), x_edges.end(), p.x) - x_edges.begin() - 1;
        const auto yi = std::upper_bound(y_edges.begin(), y_edges.end(), p.y) - y_edges.begin() - 1;
        if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(x_edges.size() - 1)) return -1;
        if (yi < 0 || yi >= static_cast<std::ptrdiff_t>(y_edges.size() - 1)) return -1;
        return xi * static_cast<std::ptrdiff_t>(y_edges.size() - 1) + yi;
    }
    Rect rect(std::size_t c) const {
        const std::size_t ny = y_edges.size() - 1;
        const std::size_t xi = c / ny, yi = c % ny;
        return Rect{x_edges[xi], x_edges[xi + 1], y_edges[yi], y_edges[yi + 1]};
    }
};

struct NuInvarianceResult {
    ChiSquareResult before;   // nu samples against the exact cell masses
    ChiSquareResult after;    // their Ptilde images against the same masses
    long long rejected = 0;   // samples whose orbit hit a partition endpoint
    double n = 0;
};

inline NuInvarianceResult nu_invariance_chi2(const DensitySpec& spec, long long n_samples, std::uint64_t seed,
                                             std::size_t n_streams = 64, unsigned threads = default_threads()) {
    const auto& fam = spec.family();
    const auto grid = InducedGrid::standard(fam);
    struct Partial {
        std::vector<double> before, after;
        long long rejected = 0;
    };
    auto parts = map_streams<Partial>(n_streams, threads, [&](std::size_t i) {
        RngStream rng(seed, i);
        Partial p;
        p.before.assign(grid.cells(), 0.0);
        p.after.assign(grid.cells(), 0.0);
        const long long n = n_samples / static_cast<long long>(n_streams) +
                            (static_cast<long long>(i) < n_samples % static_cast<long long>(n_streams) ? 1 : 0);
        for (long long k = 0; k < n; ++k) {
            const auto pt = sample_nu(spec, rng);
            PlanePoint img;
            try {
                img = Ptilde_step(fam, pt).point;
            } catch (const BoundaryError&) {
                ++p.rejected;
                continue;
            }
            if (auto c = grid.cell(pt); c >= 0) p.before[static_cast<std::size_t>(c)] += 1.0;
            if (auto c = grid.cell(img); c >= 0) p.after[static_cast<std::size_t>(c)] += 1.0;
        }
        return p;
    });
    NuInvarianceResult r;
    std::vector<double> before(grid.cells(), 0.0), after(grid.cells(), 0.0), expected(grid.cells());
    for (const auto& p : parts) {
        for (std::size_t c = 0; c < grid.cells(); ++c) {
            before[c] += p.before[c];
            after[c] += p.after[c];
        }
        r.rejected += p.rejected;
    }
    for (double v : before) r.n += v;
    const double base = spec.induced_base_mass();
    for (std::size_t c = 0; c < grid.cells(); ++c) expected[c] = r.n * spec.rect_mass(grid.rect(c)) / base;
    r.before = chi_square_gof(before, expected);
    r.after = chi_square_gof(after, expected);
    return r;
}

// Histogram of the x-components of nu samples against (1/x) / ln 2.
inline ChiSquareResult mu_hat_marginal_chi2(const DensitySpec& spec, long long n_samples, std::uint64_t seed,
                                            int bins = 20) {
    const auto& fam = spec.family();
    const double left = base_left(fam);
    RngStream rng(seed, 0);
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0), expected(static_cast<std::size_t>(bins));
    const double width = (1.0 - left) / bins;
    for (long long k = 0; k < n_samples; ++k) {
        const auto pt = sample_nu(spec, rng);
        const auto b = std::min<long long>(bins - 1, static_cast<long long>((pt.x - left) / width));
        counts[static_cast<std::size_t>(b)] += 1.0;
    }
    const double base = spec.induced_base_mass();
    for (int b = 0; b < bins; ++b) {
        const double lo = left + b * width, hi = left + (b + 1) * width;
        expected[static_cast<std::size_t>(b)] = static_cast<double>(n_samples) * std::log(hi / lo) / base;
    }
    return chi_square_gof(counts, expected);
}

}  // namespace hypmix
