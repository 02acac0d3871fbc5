#pragma once

// Map families: an expanding branch f0 on (0,1) with its contracting inverse
// g0, the translations f1(x) = x - 1 and g1(y) = y + 1, and the constants that
// drive every downstream estimate. Families are linear fractional with integer
// coefficients; the built-in modular family is f0(x) = x / (1 - x).

#include "hypmix/errors.hpp"
#include "hypmix/mobius.hpp"

#include <boost/math/special_functions/zeta.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hypmix {

// Value with first and second derivative.
struct Jet {
    double value;
    double d1;
    double d2;
};

// A positive decreasing sequence n -> omega_n used by the summability assumptions.
class OmegaSequence {
public:
    // n -> 1 / (n + offset)^2, defined for n >= first_index.
    static OmegaSequence inverse_square(int offset, long first_index) {
        if (first_index + offset < 1) throw ConfigError("inverse_square sequence would divide by zero");
        OmegaSequence s;
        s.kind_ = Kind::inverse_square;
        s.offset_ = offset;
        s.first_ = first_index;
        return s;
    }

    static OmegaSequence table(long first_index, std::vector<double> values) {
        if (values.empty()) throw ConfigError("omega table must not be empty");
        for (double v : values)
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("omega table entries must be positive and finite");
        OmegaSequence s;
        s.kind_ = Kind::table;
        s.first_ = first_index;
        s.values_ = std::move(values);
        return s;
    }

    double operator()(long n) const {
        if (n < first_) throw DomainError("omega index below the first index");
        if (kind_ == Kind::inverse_square) {
            const double m = static_cast<double>(n + offset_);
            return 1.0 / (m * m);
        }
        const auto i = static_cast<std::size_t>(n - first_);
        if (i >= values_.size()) throw DomainError("omega index beyond the supplied table");
        return values_[i];
    }

    // Exact value; table entries are converted from their binary representation.
    Rational exact(long n) const {
        if (kind_ == Kind::inverse_square) {
            const BigInt m = n + offset_;
            return Rational(BigInt(1), m * m);
        }
        return Rational((*this)(n));
    }

    long first_index() const { return first_; }
    std::optional<long> last_index() const {
        if (kind_ == Kind::table) return first_ + static_cast<long>(values_.size()) - 1;
        return std::nullopt;
    }
    bool is_inverse_square() const { return kind_ == Kind::inverse_square; }
    int offset() const { return offset_; }

    // Upper bound on sum_{n > to} omega_n^p by comparison with an integral.
    // Only available for the named sequence; an explicit table has no known tail.
    std::optional<double> power_tail_bound(double p, long to) const {
        if (kind_ != Kind::inverse_square) return std::nullopt;
        const double e = 2.0 * p;
        if (e <= 1.0) return std::numeric_limits<double>::infinity();
        const double m = static_cast<double>(to + offset_);
        return std::pow(m, 1.0 - e) / (e - 1.0);
    }

    // Full sum over n >= from of omega_n^p, via the Riemann zeta function for
    // the named sequence. Tables have no closed form.
    std::optional<double> power_total(double p, long from) const {
        if (kind_ != Kind::inverse_square) return std::nullopt;
        const double e = 2.0 * p;
        if (e <= 1.0) return std::numeric_limits<double>::infinity();
        double head = 0.0;
        for (long m = from + offset_ - 1; m >= 1; --m) head += std::pow(static_cast<double>(m), -e);
        return boost::math::zeta(e) - head;
    }

    double power_partial_sum(double p, long from, long to) const {
        double sum = 0.0;
        for (long n = to; n >= from; --n) sum += std::pow((*this)(n), p);  // small terms first
        return sum;
    }

    std::string describe() const {
        if (kind_ == Kind::inverse_square)
            return "inverse_square(offset " + std::to_string(offset_) + ", from n=" + std::to_string(first_) + ")";
        return "table(" + std::to_string(values_.size()) + " values from n=" + std::to_string(first_) + ")";
    }

private:
    enum class Kind { inverse_square, table };
    Kind kind_ = Kind::inverse_square;
    int offset_ = 0;
    long first_ = 1;
    std::vector<double> values_;
};

struct FamilyConstants {
    double rho0 = 0.5;
    OmegaSequence omega1 = OmegaSequence::inverse_square(-1, 2);
    OmegaSequence omega2 = OmegaSequence::inverse_square(+1, 1);
    double ci1 = 1.0;
    double ci2 = 4.0;
    double sigma1 = 0.45;
    double sigma2 = 0.45;

    // Upper end of the admissible exponential-tail exponent range.
    double sigma_limit() const { return std::min(sigma1, sigma2) / (2.0 * rho0); }
    double default_sigma() const { return 0.8 * sigma_limit(); }
};

// Minimal interface the assumption checker and a few verifiers need; the test
// suite plugs deliberately broken families into it.
template <class F>
concept BranchFamily = requires(const F& f, double x) {
    { f.f0_eval(x) } -> std::same_as<Jet>;
    { f.g0_eval(x) } -> std::same_as<Jet>;
    { f.constants() } -> std::convertible_to<const FamilyConstants&>;
};

class MapFamily {
public:
    // f0(x) = (a x + b) / (c x + d). Only coefficient sets that map (0,1)
    // increasingly onto (0, +inf) are accepted: b = 0, c = -d, a / d > 0.
    MapFamily(std::array<long long, 4> coeffs, FamilyConstants constants, std::string name = "mobius")
        : coeffs_(coeffs), constants_(std::move(constants)), name_(std::move(name)) {
        const auto [a, b, c, d] = coeffs_;
        if (b != 0 || c == 0 || c != -d || a == 0 || (a > 0) != (d > 0))
            throw ConfigError("f0_coeffs must describe x -> k x / (1 - x) with k > 0 (b = 0, c = -d, a/d > 0)");
        if (!(constants_.rho0 > 0.0) || !std::isfinite(constants_.rho0)) throw ConfigError("rho0 must be positive");
        if (!(constants_.ci1 > 0.0) || !(constants_.ci2 > 0.0)) throw ConfigError("ci1 and ci2 must be positive");
        for (double s : {constants_.sigma1, constants_.sigma2})
            if (!(s > 0.0 && s < 1.0)) throw ConfigError("sigma1 and sigma2 must lie in (0,1)");
        f0_exact_ = Mobius<BigInt>{BigInt(a), BigInt(b), BigInt(c), BigInt(d)};
        g0_exact_ = f0_exact_.inverse();
        f0_ = f0_exact_.cast<double>();
        g0_ = g0_exact_.cast<double>();
        k_ = static_cast<double>(a) / static_cast<double>(d);
    }

    static MapFamily modular() { return MapFamily({1, 0, -1, 1}, FamilyConstants{}, "modular"); }

    const std::string& name() const { return name_; }
    const FamilyConstants& constants() const { return constants_; }
    std::array<long long, 4> coefficients() const { return coeffs_; }
    double scale() const { return k_; }
    bool exact_rational() const { return true; }
    bool is_modular() const { return k_ == 1.0; }

    Jet f0_eval(double x) const {
        if (!(x > 0.0 && x < 1.0)) throw DomainError("f0 is defined on (0,1)");
        const double w = 1.0 - x;
        const double value = k_ * x / w;
        if (!std::isfinite(value) || !std::isfinite(k_ / (w * w * w)))
            throw OverflowError("f0 overflow: x too close to 1");
        return Jet{value, k_ / (w * w), 2.0 * k_ / (w * w * w)};
    }

    Jet g0_eval(double y) const {
        if (!(y > 0.0)) throw DomainError("g0 is defined on (0,+inf)");
        const double w = k_ + y;
        return Jet{y / w, k_ / (w * w), -2.0 * k_ / (w * w * w)};
    }

    double f0(double x) const { return f0_eval(x).value; }
    double g0(double y) const {
        if (!(y >= 0.0)) throw DomainError("g0 is defined on [0,+inf)");
        return y / (k_ + y);
    }

    // Ratio f0'' / f0'^2; for this family it is 2 (1 - x) / k.
    double adler_ratio(double x) const { return 2.0 * (1.0 - x) / k_; }
    // sup over (0,1) of the ratio above.
    double adler_constant() const { return 2.0 / k_; }

    // Iterates through matrix powers, so the cost is logarithmic in n.
    Mobius<double> f0_power(std::uint64_t n) const { return pow_cached(f0_, n); }
    Mobius<double> g0_power(std::uint64_t n) const { return pow_cached(g0_, n); }
    Mobius<double> f0_matrix() const { return f0_; }
    Mobius<double> g0_matrix() const { return g0_; }
    const Mobius<BigInt>& f0_exact() const { return f0_exact_; }
    const Mobius<BigInt>& g0_exact() const { return g0_exact_; }

    double g0_iterate(std::uint64_t n, double y) const { return g0_power(n)(y); }

    // ln of the determinant of the n-th power of the f0 (or g0) matrix. Taken
    // from the coefficients rather than from the power itself, whose entries
    // grow and make a * d - b * c cancel catastrophically.
    double log_det_power(std::uint64_t n) const {
        const auto [a, b, c, d] = coeffs_;
        const long double det = static_cast<long double>(a) * d - static_cast<long double>(b) * c;
        return static_cast<double>(n) * std::log(std::abs(static_cast<double>(det)));
    }

private:
    Mobius<double> pow_cached(const Mobius<double>& m, std::uint64_t n) const {
        if (k_ == 1.0) {
            // Powers of [[1,0],[-1,1]] and [[1,0],[1,1]] stay exact in doubles.
            const double nn = static_cast<double>(n);
            return Mobius<double>{1.0, 0.0, m.c * nn, 1.0};
        }
        return m.pow(n);
    }

    std::array<long long, 4> coeffs_;
    FamilyConstants constants_;
    std::string name_;
    Mobius<BigInt> f0_exact_, g0_exact_;
    Mobius<double> f0_, g0_;
    double k_ = 1.0;
};

// Exact partition building blocks.
inline Mobius<BigInt> translation_exact(long long shift) {
    return Mobius<BigInt>{BigInt(1), BigInt(shift), BigInt(0), BigInt(1)};
}

inline Mobius<double> translation(double shift) { return Mobius<double>{1.0, shift, 0.0, 1.0}; }

}  // namespace hypmix
