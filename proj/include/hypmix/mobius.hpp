#pragma once

// 2x2 linear fractional maps x -> (a x + b) / (c x + d) over an arbitrary ring.
// The double instantiation drives the fast evaluation paths; the big-integer
// instantiation gives drift-free partition endpoints.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>

namespace hypmix {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

template <class T>
struct Mobius {
    T a{1}, b{0}, c{0}, d{1};

    static Mobius identity() { return Mobius{T(1), T(0), T(0), T(1)}; }

    // Composition: (*this)(other(x)).
    Mobius operator*(const Mobius& o) const {
        return Mobius{a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }

    T det() const { return a * d - b * c; }

    Mobius inverse() const { return Mobius{d, -b, -c, a}; }

    Mobius pow(std::uint64_t n) const {
        Mobius result = identity();
        Mobius base = *this;
        while (n != 0) {
            if (n & 1U) result = result * base;
            base = base * base;
            n >>= 1U;
        }
        return result;
    }

    template <class U>
    U operator()(const U& x) const {
        return (U(a) * x + U(b)) / (U(c) * x + U(d));
    }

    // First and second derivatives at x.
    template <class U>
    U derivative(const U& x) const {
        const U den = U(c) * x + U(d);
        return U(det()) / (den * den);
    }
    template <class U>
    U second_derivative(const U& x) const {
        const U den = U(c) * x + U(d);
        return U(-2) * U(c) * U(det()) / (den * den * den);
    }

    // |M(hi) - M(lo)| computed without subtracting two nearly equal images.
    template <class U>
    U image_length(const U& lo, const U& hi) const {
        using std::abs;
        const U den_lo = U(c) * lo + U(d);
        const U den_hi = U(c) * hi + U(d);
        return abs(U(det()) * (hi - lo) / (den_lo * den_hi));
    }

    template <class U>
    Mobius<U> cast() const {
        return Mobius<U>{static_cast<U>(a), static_cast<U>(b), static_cast<U>(c), static_cast<U>(d)};
    }
};

inline Rational apply_exact(const Mobius<BigInt>& m, const Rational& x) {
    const BigInt p = boost::multiprecision::numerator(x);
    const BigInt q = boost::multiprecision::denominator(x);
    return Rational(m.a * p + m.b * q, m.c * p + m.d * q);
}

inline std::string to_string(const Rational& r) {
    return boost::multiprecision::numerator(r).str() + "/" + boost::multiprecision::denominator(r).str();
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

}  // namespace hypmix
