#pragma once

// Small statistical toolkit: accumulators, weighted least squares, and
// p-values for chi-square and Kolmogorov-Smirnov tests.

#include "hypmix/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace hypmix {

struct Moments {
    double n = 0.0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double v) {
        n += 1.0;
        sum += v;
        sum_sq += v * v;
    }
    void merge(const Moments& o) {
        n += o.n;
        sum += o.sum;
        sum_sq += o.sum_sq;
    }
    double mean() const { return n > 0 ? sum / n : 0.0; }
    double variance() const {
        if (n < 2) return 0.0;
        const double m = mean();
        return std::max(0.0, (sum_sq - n * m * m) / (n - 1.0));
    }
    double stderr_of_mean() const { return n > 1 ? std::sqrt(variance() / n) : 0.0; }
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_stderr = 0.0;        // from the residual scatter
    double slope_stderr_weights = 0.0; // assuming the weights are inverse variances
};

// Weighted least squares y ~ intercept + slope * x. R^2 is the weighted
// coefficient of determination.
inline LinearFit weighted_linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n || w.size() != n) throw InsufficientSignalError("linear fit needs at least two points");
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
        syy += w[i] * (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0)) throw InsufficientSignalError("linear fit needs distinct abscissae");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ss_res += w[i] * r * r;
    }
    f.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
    f.slope_stderr_weights = 1.0 / std::sqrt(sxx);
    if (n > 2) f.slope_stderr = std::sqrt(ss_res / (static_cast<double>(n) - 2.0) / sxx);
    return f;
}

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    std::vector<double> w(x.size(), 1.0);
    return weighted_linear_fit(x, y, w);
}

inline double chi_square_pvalue(double statistic, double dof) {
    if (!(dof > 0)) throw DomainError("chi-square test needs positive degrees of freedom");
    boost::math::chi_squared dist(dof);
    return boost::math::cdf(boost::math::complement(dist, std::max(0.0, statistic)));
}

struct ChiSquareResult {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
};

// Goodness of fit of observed counts against expected counts.
inline ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> expected,
                                      int fitted_parameters = 0) {
    ChiSquareResult r;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (!(expected[i] > 0)) continue;
        const double d = observed[i] - expected[i];
        r.statistic += d * d / expected[i];
        r.dof += 1.0;
    }
    r.dof -= 1.0 + fitted_parameters;
    r.p_value = chi_square_pvalue(r.statistic, r.dof);
    return r;
}

// Homogeneity of two histograms with possibly different totals.
inline ChiSquareResult chi_square_two_sample(std::span<const double> a, std::span<const double> b) {
    double na = 0, nb = 0;
    for (double v : a) na += v;
    for (double v : b) nb += v;
    const double ka = std::sqrt(nb / na), kb = std::sqrt(na / nb);
    ChiSquareResult r;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] + b[i] <= 0) continue;
        const double d = ka * a[i] - kb * b[i];
        r.statistic += d * d / (a[i] + b[i]);
        r.dof += 1.0;
    }
    r.dof -= 1.0;
    r.p_value = chi_square_pvalue(r.statistic, r.dof);
    return r;
}

// Asymptotic Kolmogorov distribution, P(sqrt(n) D > lambda).
inline double kolmogorov_survival(double lambda) {
    if (lambda <= 0) return 1.0;
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// One-sample KS test against a continuous CDF. Sorts a copy of the sample.
template <class Cdf>
KsResult ks_test(std::vector<double> sample, Cdf&& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    // Stephens' small-sample correction of the asymptotic statistic.
    const double sq = std::sqrt(n);
    return KsResult{d, kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d)};
}

}  // namespace hypmix
