#pragma once

// Suspension flows over the base map (phase space Sigma_rho, roof rho) and over
// the second induced map (Sigma_r), the projection between them, return counts,
// and Monte Carlo correlation estimates.
//
// Sigma_r uses by default the Birkhoff roof Rtilde (rho summed over one
// excursion), which is the roof for which the projection Pi semiconjugates the
// two flows. The reduced roof r(x) = rtilde(x, y') depends on x only and is
// what the return count Psi_t is defined with.

#include "hypmix/errors.hpp"
#include "hypmix/measure.hpp"
#include "hypmix/parallel.hpp"
#include "hypmix/rng.hpp"
#include "hypmix/roof.hpp"
#include "hypmix/skew.hpp"
#include "hypmix/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace hypmix {

struct Advance {
    FlowPoint point;
    std::uint64_t returns = 0;
};

// ---------------------------------------------------------------- Sigma_rho

// Flow on Sigma_rho. Whole runs are skipped with the telescoped run sums; the
// crossing inside the last run is found by bisection on the number of steps.
inline Advance flow_advance_rho(const MapFamily& fam, const FlowPoint& pt, double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("flow time must be finite and non-negative");
    if (pt.space != Space::sigma_rho) throw DomainError("point is not in Sigma_rho");
    if (!pt.base.valid() || !(pt.s >= 0.0)) throw DomainError("invalid flow point");
    PlanePoint p = pt.base;
    double h = pt.s + t;
    std::uint64_t n = 0;
    for (int guard = 0;; ++guard) {
        if (guard > 1000000) throw BudgetError("flow did not settle");
        if (is_singular(p)) throw SingularityError("flow reached the line x = 1");
        if (h < rho_eval(fam, p)) break;
        const std::uint64_t len = run_length(fam, p.x);
        const double whole = rho_run_sum(fam, p, len);
        if (h >= whole) {
            h -= whole;
            p = run_advance(fam, p, len);
            n += len;
            continue;
        }
        // sum over 1 step <= h < sum over len steps
        std::uint64_t lo = 1, hi = len;
        while (hi - lo > 1) {
            const std::uint64_t mid = lo + (hi - lo) / 2;
            if (rho_run_sum(fam, p, mid) <= h) lo = mid;
            else hi = mid;
        }
        h -= rho_run_sum(fam, p, lo);
        p = run_advance(fam, p, lo);
        n += lo;
    }
    return Advance{FlowPoint{p, std::max(h, 0.0), Space::sigma_rho}, n};
}

// ---------------------------------------------------------------- Sigma_r

enum class InducedRoof { birkhoff, reduced };

struct SigmaRConfig {
    InducedRoof roof = InducedRoof::birkhoff;
    RoofConfig reduced{};
};

struct InducedRoofStep {
    PlanePoint image;
    double roof;
};

inline InducedRoofStep induced_roof_step(const MapFamily& fam, const SigmaRConfig& cfg, const PlanePoint& p) {
    const auto st = Ptilde_step(fam, p);
    const double roof = cfg.roof == InducedRoof::birkhoff ? Rtilde_value(fam, st.index, p, st.point)
                                                          : r_eval(fam, cfg.reduced, p.x);
    // Orbits through extremely deep cylinders lose all precision; treat them as unusable samples.
    if (!std::isfinite(roof) || !(roof > 0.0)) throw OverflowError("induced roof is not a positive finite number");
    return InducedRoofStep{st.point, roof};
}

inline double induced_roof(const MapFamily& fam, const SigmaRConfig& cfg, const PlanePoint& p) {
    return induced_roof_step(fam, cfg, p).roof;
}

inline Advance flow_advance_r(const MapFamily& fam, const SigmaRConfig& cfg, const FlowPoint& pt, double t,
                              std::uint64_t step_cap = 10000000) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("flow time must be finite and non-negative");
    if (pt.space != Space::sigma_r) throw DomainError("point is not in Sigma_r");
    PlanePoint p = pt.base;
    double h = pt.s + t;
    std::uint64_t n = 0;
    for (;;) {
        const auto st = induced_roof_step(fam, cfg, p);
        if (h < st.roof) break;
        h -= st.roof;
        p = st.image;
        if (++n > step_cap) throw BudgetError("induced flow exceeded the step cap");
    }
    return Advance{FlowPoint{p, h, Space::sigma_r}, n};
}

inline Advance flow_advance(const MapFamily& fam, const FlowPoint& pt, double t, const SigmaRConfig& cfg = {}) {
    return pt.space == Space::sigma_rho ? flow_advance_rho(fam, pt, t) : flow_advance_r(fam, cfg, pt, t);
}

// Pi: walk the base map from the base point of a Sigma_r point until the
// remaining height fits under rho.
inline FlowPoint project_pi(const MapFamily& fam, const FlowPoint& pt) {
    if (pt.space != Space::sigma_r) throw DomainError("projection expects a point of Sigma_r");
    return flow_advance_rho(fam, FlowPoint{pt.base, 0.0, Space::sigma_rho}, pt.s).point;
}

// Psi_t(x, a) = sup{n >= 1 : a + t > r^{(n)}(x)}, with sup of the empty set 0.
inline std::uint64_t returns_count(const MapFamily& fam, const RoofConfig& cfg, double x, double a, double t,
                                   std::uint64_t cap = 10000000) {
    const double level = a + t;
    double cum = 0.0;
    std::uint64_t n = 0;
    for (;;) {
        cum += r_eval(fam, cfg, x);
        if (!(level > cum)) return n;
        if (++n > cap) throw BudgetError("return count exceeded the cap");
        x = Ftilde_eval(fam, x).value;
    }
}

// ---------------------------------------------------------------- observables

// Tensor-product bump prod (1 - z_i^2)^2 on Sigma_rho coordinates (x, y, s),
// z_i the offset from the center in units of the radius. C^1 with
// |d/dz (1 - z^2)^2| <= 8 / (3 sqrt 3).
struct Bump {
    double xc = 0.0, yc = 0.0, sc = 0.0;
    double rx = 1.0, ry = 1.0, rs = 1.0;
    double amplitude = 1.0;
    // Coordinates the bump is written in. Sigma_r bumps are evaluated on the
    // induced suspension directly; Sigma_rho bumps are pulled back through Pi.
    Space space = Space::sigma_rho;

    static constexpr double profile_slope = 1.5396007178390020;  // 8 / (3 sqrt 3)

    Rect support() const { return Rect{xc - rx, xc + rx, yc - ry, yc + ry}; }

    double operator()(const FlowPoint& p) const {
        const double zx = (p.base.x - xc) / rx, zy = (p.base.y - yc) / ry, zs = (p.s - sc) / rs;
        if (std::abs(zx) >= 1.0 || std::abs(zy) >= 1.0 || std::abs(zs) >= 1.0) return 0.0;
        const double a = 1.0 - zx * zx, b = 1.0 - zy * zy, c = 1.0 - zs * zs;
        return amplitude * a * a * b * b * c * c;
    }

    double sup_norm() const { return std::abs(amplitude); }
    // Bounds on the partial derivatives in x, y and s.
    double derivative_bound_x() const { return std::abs(amplitude) * profile_slope / rx; }
    double derivative_bound_y() const { return std::abs(amplitude) * profile_slope / ry; }
    double derivative_bound_s() const { return std::abs(amplitude) * profile_slope / rs; }

    // The support must stay on one side of x = 1 and strictly between the
    // floor and the roof of the suspension. For Sigma_rho the roof is
    // monotone on boxes so the corners suffice; for Sigma_r the minimum is
    // taken over a grid and shrunk by a 10% margin, which is a heuristic
    // rather than a certified bound.
    void validate(const MapFamily& fam, const SigmaRConfig& cfg = {}) const {
        if (space == Space::sigma_r) {
            validate_induced(fam, cfg);
            return;
        }
        if (!(rx > 0.0 && ry > 0.0 && rs > 0.0)) throw ConfigError("bump radii must be positive");
        const Rect r = support();
        if (!(r.x0 > 0.0 && r.y0 > 0.0)) throw ConfigError("bump support must lie in the open quadrant");
        if (r.x0 < 1.0 && r.x1 > 1.0) throw ConfigError("bump support must not meet the line x = 1");
        if (r.x0 == 1.0 || r.x1 == 1.0) throw ConfigError("bump support must not touch the line x = 1");
        double floor_roof = std::numeric_limits<double>::infinity();
        for (double x : {r.x0, r.x1})
            for (double y : {r.y0, r.y1}) floor_roof = std::min(floor_roof, rho_eval(fam, {x, y}));
        if (!(sc - rs > 0.0 && sc + rs < floor_roof))
            throw ConfigError("bump height range must lie strictly inside (0, min roof over the support)");
    }

private:
    void validate_induced(const MapFamily& fam, const SigmaRConfig& cfg) const {
        if (!(rx > 0.0 && ry > 0.0 && rs > 0.0)) throw ConfigError("bump radii must be positive");
        const Rect r = support();
        const double left = fam.g0(1.0);
        if (!(r.x0 > left && r.x1 < 1.0 && r.y0 > 0.0))
            throw ConfigError("Sigma_r bump support must lie in (g0(1), 1) x (0, inf)");
        constexpr int n = 41;
        double lowest = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const PlanePoint p{r.x0 + (r.x1 - r.x0) * i / (n - 1), r.y0 + (r.y1 - r.y0) * j / (n - 1)};
                try {
                    lowest = std::min(lowest, induced_roof(fam, cfg, p));
                } catch (const BoundaryError&) {
                } catch (const OverflowError&) {
                }
            }
        if (!std::isfinite(lowest)) throw ConfigError("induced roof could not be evaluated on the bump support");
        if (!(sc - rs > 0.0 && sc + rs < 0.9 * lowest))
            throw ConfigError("bump height range must lie inside (0, 0.9 * min induced roof over the support)");
    }
};

// Value of a bump at a point of Sigma_r.
inline double evaluate_on_sigma_r(const MapFamily& fam, const Bump& b, const FlowPoint& z) {
    return b.space == Space::sigma_r ? b(z) : b(project_pi(fam, z));
}

// ---------------------------------------------------------------- correlations

enum class CorrelationMode { ensemble, birkhoff };

struct CorrelateOptions {
    CorrelationMode mode = CorrelationMode::ensemble;
    std::size_t streams = 64;
    unsigned threads = default_threads();
    SigmaRConfig roof{};
};

struct CorrelationEstimate {
    std::vector<double> t_grid;
    std::vector<double> c_hat;
    std::vector<double> std_error;
    std::vector<double> n_effective;
    std::vector<double> mean_v, mean_v_error;  // E[V o Ptilde_t], for the stationarity check
    std::vector<double> uv, uv_error;          // uncentered E[U . V o Ptilde_t]
    double mean_u = 0.0;
    long long n_samples = 0;
    long long rejected = 0;
    std::uint64_t seed = 0;
    // Filled by fit_decay.
    double delta_hat = std::numeric_limits<double>::quiet_NaN();
    double delta_error = std::numeric_limits<double>::quiet_NaN();
    double prefactor = std::numeric_limits<double>::quiet_NaN();
    double r_squared = std::numeric_limits<double>::quiet_NaN();
    std::size_t fit_points = 0;
};

namespace detail {

struct StreamSums {
    double w = 0, w2 = 0, wu = 0;
    std::vector<double> wv, wuv;
    long long n = 0, rejected = 0;
};

inline bool is_sample_failure(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const SingularityError&) {
        return true;
    } catch (const BoundaryError&) {
        return true;
    } catch (const DomainError&) {
        return true;
    } catch (const OverflowError&) {
        return true;
    } catch (const UnsuitablePointError&) {
        return true;
    } catch (...) {
        return false;
    }
}

inline std::vector<double> grid_steps(const std::vector<double>& t_grid) {
    std::vector<double> dt(t_grid.size());
    double prev = 0.0;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if (!(t_grid[k] >= prev)) throw ConfigError("t grid must be non-negative and non-decreasing");
        dt[k] = t_grid[k] - prev;
        prev = t_grid[k];
    }
    return dt;
}

// One ensemble sample: Z ~ nu_r through (p ~ nu, s ~ U[0, R(p))) with weight R(p).
inline void ensemble_sample(const MapFamily& fam, const DensitySpec& spec, const Bump& u, const Bump& v,
                            const std::vector<double>& dt, const SigmaRConfig& cfg, RngStream& rng, StreamSums& acc,
                            std::vector<double>& vals) {
    const PlanePoint p = sample_nu(spec, rng);
    const double roof = induced_roof(fam, cfg, p);
    FlowPoint z{p, roof * rng.uniform(), Space::sigma_r};
    const double uu = evaluate_on_sigma_r(fam, u, z);
    for (std::size_t k = 0; k < dt.size(); ++k) {
        if (dt[k] > 0.0) z = flow_advance_r(fam, cfg, z, dt[k]).point;
        vals[k] = evaluate_on_sigma_r(fam, v, z);
    }
    acc.w += roof;
    acc.w2 += roof * roof;
    acc.wu += roof * uu;
    for (std::size_t k = 0; k < dt.size(); ++k) {
        acc.wv[k] += roof * vals[k];
        acc.wuv[k] += roof * uu * vals[k];
    }
    ++acc.n;
}

// One long orbit sampled at multiples of a fixed step; lag products through a ring buffer.
inline void birkhoff_stream(const MapFamily& fam, const DensitySpec& spec, const Bump& u, const Bump& v,
                            const std::vector<std::size_t>& lags, double step, long long length,
                            const SigmaRConfig& cfg, RngStream& rng, StreamSums& acc) {
    const std::size_t max_lag = lags.empty() ? 0 : *std::max_element(lags.begin(), lags.end());
    std::vector<double> ring(max_lag + 1, 0.0);
    auto start = [&] {
        const PlanePoint p = sample_nu(spec, rng);
        return FlowPoint{p, induced_roof(fam, cfg, p) * rng.uniform(), Space::sigma_r};
    };
    FlowPoint z = start();
    long long j = 0;
    std::vector<double> sum_v(lags.size(), 0.0);
    while (j < length + static_cast<long long>(max_lag)) {
        double uu = 0.0, vv = 0.0;
        try {
            uu = evaluate_on_sigma_r(fam, u, z);
            vv = evaluate_on_sigma_r(fam, v, z);
            z = flow_advance_r(fam, cfg, z, step).point;
        } catch (...) {
            if (!is_sample_failure(std::current_exception())) throw;
            ++acc.rejected;
            if (acc.rejected > length / 2 + 100) throw BudgetError("orbit restarts exceeded half the budget");
            z = start();
            continue;
        }
        ring[static_cast<std::size_t>(j) % ring.size()] = uu;
        // u at time j - lag pairs with v at time j.
        for (std::size_t k = 0; k < lags.size(); ++k) {
            const long long i = j - static_cast<long long>(lags[k]);
            if (i < 0 || i >= length) continue;
            const double ui = ring[static_cast<std::size_t>(i) % ring.size()];
            acc.wv[k] += vv;
            acc.wuv[k] += ui * vv;
        }
        if (j < length) {
            acc.w += 1.0;
            acc.w2 += 1.0;
            acc.wu += uu;
            ++acc.n;
        }
        ++j;
    }
}

}  // namespace detail

inline CorrelationEstimate correlate(const MapFamily& fam, const Bump& u, const Bump& v, const std::vector<double>& t_grid,
                                     long long budget, std::uint64_t seed, const CorrelateOptions& opt = {}) {
    u.validate(fam, opt.roof);
    v.validate(fam, opt.roof);
    if (t_grid.empty()) throw ConfigError("t grid must not be empty");
    if (budget < static_cast<long long>(opt.streams) * 2) throw ConfigError("budget too small for the stream count");
    if (opt.streams < 2) throw ConfigError("at least two streams are needed for error bars");
    const DensitySpec spec(fam);
    const auto dt = detail::grid_steps(t_grid);
    const std::size_t K = t_grid.size();
    const std::size_t S = opt.streams;

    std::vector<std::size_t> lags;
    double step = 0.0;
    if (opt.mode == CorrelationMode::birkhoff) {
        step = std::numeric_limits<double>::infinity();
        for (double d : dt)
            if (d > 0.0) step = std::min(step, d);
        if (!std::isfinite(step)) step = 1.0;
        for (double t : t_grid) {
            const double k = std::round(t / step);
            if (std::abs(k * step - t) > 1e-9 * std::max(1.0, t))
                throw ConfigError("Birkhoff mode needs a t grid of multiples of its smallest step");
            lags.push_back(static_cast<std::size_t>(k));
        }
    }

    const auto parts = map_streams<detail::StreamSums>(S, opt.threads, [&](std::size_t i) {
        RngStream rng(seed, i);
        detail::StreamSums acc;
        acc.wv.assign(K, 0.0);
        acc.wuv.assign(K, 0.0);
        const long long quota = budget / static_cast<long long>(S) + (static_cast<long long>(i) < budget % static_cast<long long>(S) ? 1 : 0);
        if (opt.mode == CorrelationMode::birkhoff) {
            detail::birkhoff_stream(fam, spec, u, v, lags, step, quota, opt.roof, rng, acc);
            return acc;
        }
        std::vector<double> vals(K);
        while (acc.n < quota) {
            try {
                detail::ensemble_sample(fam, spec, u, v, dt, opt.roof, rng, acc, vals);
            } catch (...) {
                if (!detail::is_sample_failure(std::current_exception())) throw;
                ++acc.rejected;
                if (acc.rejected > quota) throw BudgetError("sample rejection rate exceeded 50%");
            }
        }
        return acc;
    });

    CorrelationEstimate est;
    est.t_grid = t_grid;
    est.seed = seed;
    detail::StreamSums tot;
    tot.wv.assign(K, 0.0);
    tot.wuv.assign(K, 0.0);
    for (const auto& p : parts) {
        tot.w += p.w;
        tot.w2 += p.w2;
        tot.wu += p.wu;
        tot.n += p.n;
        tot.rejected += p.rejected;
        for (std::size_t k = 0; k < K; ++k) {
            tot.wv[k] += p.wv[k];
            tot.wuv[k] += p.wuv[k];
        }
    }
    est.n_samples = tot.n;
    est.rejected = tot.rejected;
    est.mean_u = tot.wu / tot.w;
    const double n_eff = tot.w * tot.w / tot.w2;
    // In Birkhoff mode each lag has its own pair count, equal to the orbit length.
    for (std::size_t k = 0; k < K; ++k) {
        const double norm = tot.w;
        const double mv = tot.wv[k] / norm;
        const double muv = tot.wuv[k] / norm;
        Moments mc, mm, muvm;
        for (const auto& p : parts) {
            const double pu = p.wu / p.w, pv = p.wv[k] / p.w, puv = p.wuv[k] / p.w;
            mc.add(puv - pu * pv);
            mm.add(pv);
            muvm.add(puv);
        }
        est.c_hat.push_back(muv - est.mean_u * mv);
        est.std_error.push_back(mc.stderr_of_mean());
        est.n_effective.push_back(n_eff);
        est.mean_v.push_back(mv);
        est.mean_v_error.push_back(mm.stderr_of_mean());
        est.uv.push_back(muv);
        est.uv_error.push_back(muvm.stderr_of_mean());
    }
    return est;
}

// ---------------------------------------------------------------- decay fit

struct DecayFit {
    double delta_hat = 0.0;
    double delta_error = 0.0;
    double prefactor = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

// Weighted least squares of ln|C| against t over the longest prefix of the
// grid where |C| exceeds three standard errors. Weights (|C| / se)^2 are the
// inverse variances of ln|C|; with missing errors the fit is unweighted.
inline DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& c, const std::vector<double>& se) {
    if (t.size() != c.size() || t.size() != se.size()) throw DomainError("fit inputs must have equal lengths");
    std::size_t window = 0;
    while (window < t.size() && std::abs(c[window]) > 3.0 * se[window] && c[window] != 0.0) ++window;
    if (window < 4) throw InsufficientSignalError("fewer than 4 grid points above three standard errors");
    std::vector<double> x(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(window)), y(window), w(window);
    bool weighted = true;
    for (std::size_t i = 0; i < window; ++i) {
        y[i] = std::log(std::abs(c[i]));
        if (!(se[i] > 0.0)) weighted = false;
        else w[i] = (c[i] / se[i]) * (c[i] / se[i]);
    }
    if (!weighted) std::fill(w.begin(), w.end(), 1.0);
    const auto f = weighted_linear_fit(x, y, w);
    DecayFit out;
    out.delta_hat = -f.slope;
    out.delta_error = weighted ? std::max(f.slope_stderr, f.slope_stderr_weights) : f.slope_stderr;
    out.prefactor = std::exp(f.intercept);
    out.r_squared = f.r_squared;
    out.points = window;
    return out;
}

inline DecayFit fit_decay(CorrelationEstimate& est) {
    const auto f = fit_decay(est.t_grid, est.c_hat, est.std_error);
    est.delta_hat = f.delta_hat;
    est.delta_error = f.delta_error;
    est.prefactor = f.prefactor;
    est.r_squared = f.r_squared;
    est.fit_points = f.points;
    return f;
}

// Envelope check along the fit window: no |C| rises above the running peak
// of the earlier values by more than two of its own standard errors.
inline bool envelope_decreasing(const CorrelationEstimate& est, std::size_t window) {
    const std::size_t end = std::min(window, est.c_hat.size());
    if (end == 0) return true;
    double peak = std::abs(est.c_hat[0]);
    for (std::size_t k = 1; k < end; ++k) {
        const double c = std::abs(est.c_hat[k]);
        if (c > peak + 2.0 * est.std_error[k]) return false;
        peak = std::max(peak, c);
    }
    return true;
}

// ---------------------------------------------------------------- Sigma_rho side of the transport identity

struct SigmaRhoCorrelation {
    std::vector<double> uv, uv_error;  // normalized as expectations under m_rho / |m_rho|
    double window_mass = 0.0;
    double total_mass = 0.0;
    long long n_samples = 0;
    long long attempts = 0;
};

// E over m_rho of u . v o phi^t, sampling m_rho restricted to the support
// column of u and rescaling by its mass fraction.
inline SigmaRhoCorrelation correlate_sigma_rho(const MapFamily& fam, const Bump& u, const Bump& v,
                                               const std::vector<double>& t_grid, long long n_samples,
                                               std::uint64_t seed, std::size_t streams = 64,
                                               unsigned threads = default_threads()) {
    if (u.space != Space::sigma_rho || v.space != Space::sigma_rho)
        throw ConfigError("the Sigma_rho correlation needs bumps written in Sigma_rho coordinates");
    u.validate(fam);
    v.validate(fam);
    const DensitySpec spec(fam);
    const auto win = RoofWindow::make(fam, u.support());
    const auto dt = detail::grid_steps(t_grid);
    const std::size_t K = t_grid.size();
    struct Part {
        std::vector<Moments> m;
        long long attempts = 0;
    };
    const auto parts = map_streams<Part>(streams, threads, [&](std::size_t i) {
        RngStream rng(seed, i);
        Part part;
        part.m.resize(K);
        const long long quota = n_samples / static_cast<long long>(streams) +
                                (static_cast<long long>(i) < n_samples % static_cast<long long>(streams) ? 1 : 0);
        std::vector<double> vals(K);
        for (long long n = 0; n < quota;) {
            const auto smp = sample_m_rho(spec, win, rng);
            part.attempts += smp.attempts;
            const double uu = u(smp.point);
            FlowPoint z = smp.point;
            try {
                for (std::size_t k = 0; k < K; ++k) {
                    if (uu != 0.0 && dt[k] > 0.0) z = flow_advance_rho(fam, z, dt[k]).point;
                    vals[k] = uu == 0.0 ? 0.0 : uu * v(z);
                }
            } catch (...) {
                if (!detail::is_sample_failure(std::current_exception())) throw;
                continue;
            }
            for (std::size_t k = 0; k < K; ++k) part.m[k].add(vals[k]);
            ++n;
        }
        return part;
    });
    SigmaRhoCorrelation out;
    out.window_mass = window_mass(spec, u.support());
    out.total_mass = compute_normalizers(spec).total_roof_mass;
    const double scale = out.window_mass / out.total_mass;
    for (std::size_t k = 0; k < K; ++k) {
        Moments all;
        for (const auto& p : parts) all.merge(p.m[k]);
        out.uv.push_back(scale * all.mean());
        out.uv_error.push_back(scale * all.stderr_of_mean());
    }
    for (const auto& p : parts) {
        out.attempts += p.attempts;
        out.n_samples += static_cast<long long>(p.m.empty() ? 0 : p.m[0].n);
    }
    return out;
}

// ---------------------------------------------------------------- returns and roof tails

struct ReturnsDecay {
    std::vector<double> t, mean, std_error;
    LinearFit fit;
    long long n_samples = 0;
};

// Weighted Monte Carlo estimate of the integral of k^{-Psi_t} against mu_r:
// x from the invariant density 1/(x ln 2) on (g0(1), 1), weight r(x), a uniform on [0, r(x)).
inline ReturnsDecay returns_decay(const MapFamily& fam, const RoofConfig& cfg, const std::vector<double>& t_grid,
                                  long long n_samples, std::uint64_t seed, double k = 2.0, std::size_t streams = 64,
                                  unsigned threads = default_threads()) {
    if (!(k > 1.0)) throw ConfigError("return-count base must exceed 1");
    if (t_grid.size() < 2) throw ConfigError("return-count grid needs at least 2 points");
    const DensitySpec spec(fam);
    const double t_max = *std::max_element(t_grid.begin(), t_grid.end());
    const std::size_t K = t_grid.size();
    struct Part {
        double w = 0.0;
        std::vector<double> wf;
        long long n = 0;
    };
    const auto parts = map_streams<Part>(streams, threads, [&](std::size_t i) {
        RngStream rng(seed, i);
        Part part;
        part.wf.assign(K, 0.0);
        const long long quota = n_samples / static_cast<long long>(streams) +
                                (static_cast<long long>(i) < n_samples % static_cast<long long>(streams) ? 1 : 0);
        std::vector<double> cum;
        while (part.n < quota) {
            const double x0 = sample_log_uniform(rng, base_left(fam), 1.0);
            double r0 = 0.0;
            cum.clear();
            try {
                r0 = r_eval(fam, cfg, x0);
                const double a = r0 * rng.uniform();
                // cum[n-1] = r^{(n)}(x0) - a, kept until it passes t_max.
                double x = x0, c = r0 - a;
                cum.push_back(c);
                while (c < t_max) {
                    x = Ftilde_eval(fam, x).value;
                    c += r_eval(fam, cfg, x);
                    cum.push_back(c);
                }
            } catch (...) {
                if (!detail::is_sample_failure(std::current_exception())) throw;
                continue;
            }
            part.w += r0;
            for (std::size_t j = 0; j < K; ++j) {
                // Psi_t = #{n >= 1 : r^{(n)} - a < t}
                const auto psi = static_cast<double>(std::lower_bound(cum.begin(), cum.end(), t_grid[j]) - cum.begin());
                part.wf[j] += r0 * std::pow(k, -psi);
            }
            ++part.n;
        }
        return part;
    });
    ReturnsDecay out;
    out.t = t_grid;
    double w = 0.0;
    std::vector<double> wf(K, 0.0);
    for (const auto& p : parts) {
        w += p.w;
        out.n_samples += p.n;
        for (std::size_t j = 0; j < K; ++j) wf[j] += p.wf[j];
    }
    std::vector<double> logs;
    for (std::size_t j = 0; j < K; ++j) {
        Moments m;
        for (const auto& p : parts) m.add(p.wf[j] / p.w);
        out.mean.push_back(wf[j] / w);
        out.std_error.push_back(m.stderr_of_mean());
        logs.push_back(std::log(out.mean.back()));
    }
    out.fit = linear_fit(out.t, logs);
    return out;
}

struct RoofTail {
    std::vector<double> t, frequency;
    LinearFit fit;  // on the thresholds where the frequency is positive
};

// Empirical mu-hat{r >= t} on a threshold grid.
inline RoofTail roof_tail(const MapFamily& fam, const RoofConfig& cfg, const std::vector<double>& t_grid,
                          long long n_samples, std::uint64_t seed) {
    RngStream rng(seed, 0);
    std::vector<double> counts(t_grid.size(), 0.0);
    long long n = 0;
    while (n < n_samples) {
        double r = 0.0;
        try {
            r = r_eval(fam, cfg, sample_log_uniform(rng, base_left(fam), 1.0));
        } catch (...) {
            if (!detail::is_sample_failure(std::current_exception())) throw;
            continue;
        }
        for (std::size_t j = 0; j < t_grid.size(); ++j)
            if (r >= t_grid[j]) counts[j] += 1.0;
        ++n;
    }
    RoofTail out;
    out.t = t_grid;
    std::vector<double> xs, ys;
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
        out.frequency.push_back(counts[j] / static_cast<double>(n));
        if (counts[j] > 0) {
            xs.push_back(t_grid[j]);
            ys.push_back(std::log(out.frequency.back()));
        }
    }
    if (xs.size() >= 2) out.fit = linear_fit(xs, ys);
    return out;
}

}  // namespace hypmix
