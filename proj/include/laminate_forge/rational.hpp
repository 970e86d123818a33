#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <compare>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>

#include "laminate_forge/errors.hpp"

namespace lamf {

using BigInt = boost::multiprecision::cpp_int;

/// Exact rational number in canonical reduced form: gcd(|num|, den) = 1 and
/// den > 0. Carries every scalar of the construction (weights, eigenvalues).
class Rational {
public:
    Rational() : num_(0), den_(1) {}

    Rational(long long n) : num_(n), den_(1) {}  // NOLINT: implicit by design

    Rational(BigInt numerator, BigInt denominator)
        : num_(std::move(numerator)), den_(std::move(denominator)) {
        normalize();
    }

    Rational(long long numerator, long long denominator)
        : num_(numerator), den_(denominator) {
        normalize();
    }

    /// Parses "p/q" or "p" with optional leading minus on p.
    static Rational parse(std::string_view text) {
        auto slash = text.find('/');
        if (slash == std::string_view::npos) {
            return Rational(parse_integer(text), BigInt(1));
        }
        auto den_text = text.substr(slash + 1);
        if (!den_text.empty() && den_text[0] == '-') {
            throw ParseError("denominator must be unsigned in '" +
                             std::string(text) + "'");
        }
        BigInt num = parse_integer(text.substr(0, slash));
        BigInt den = parse_integer(den_text);
        return Rational(std::move(num), std::move(den));
    }

    /// Exact value of an IEEE double (every finite double is dyadic).
    static Rational from_double_exact(double value) {
        if (!std::isfinite(value)) {
            throw ParseError("from_double_exact: value is not finite");
        }
        if (value == 0.0) {
            return Rational();
        }
        int exp = 0;
        double frac = std::frexp(value, &exp);
        auto mantissa = static_cast<long long>(std::ldexp(frac, 53));
        exp -= 53;
        BigInt num(mantissa);
        BigInt den(1);
        if (exp >= 0) {
            num <<= exp;
        } else {
            den <<= -exp;
        }
        return Rational(std::move(num), std::move(den));
    }

    const BigInt& num() const { return num_; }
    const BigInt& den() const { return den_; }

    bool is_zero() const { return num_.is_zero(); }
    bool is_one() const { return num_ == 1 && den_ == 1; }
    int sign() const { return num_.sign(); }

    /// Serialized form "p/q", or "p" when the denominator is 1.
    std::string str() const {
        if (den_ == 1) {
            return num_.str();
        }
        return num_.str() + "/" + den_.str();
    }

    double to_double() const {
        boost::multiprecision::cpp_rational value(num_, den_);
        return value.convert_to<double>();
    }

    Rational& operator+=(const Rational& o) {
        num_ = num_ * o.den_ + o.num_ * den_;
        den_ *= o.den_;
        normalize();
        return *this;
    }
    Rational& operator-=(const Rational& o) {
        num_ = num_ * o.den_ - o.num_ * den_;
        den_ *= o.den_;
        normalize();
        return *this;
    }
    Rational& operator*=(const Rational& o) {
        num_ *= o.num_;
        den_ *= o.den_;
        normalize();
        return *this;
    }
    Rational& operator/=(const Rational& o) {
        if (o.num_.is_zero()) {
            throw ZeroDenominator("division by zero rational");
        }
        num_ *= o.den_;
        den_ *= o.num_;
        normalize();
        return *this;
    }

    friend Rational operator+(Rational a, const Rational& b) { return a += b; }
    friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
    friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
    friend Rational operator/(Rational a, const Rational& b) { return a /= b; }

    Rational operator-() const {
        Rational r(*this);
        r.num_ = -r.num_;
        return r;
    }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Rational& a, const Rational& b) {
        return !(a == b);
    }
    friend bool operator<(const Rational& a, const Rational& b) {
        return a.num_ * b.den_ < b.num_ * a.den_;
    }
    friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
    friend bool operator<=(const Rational& a, const Rational& b) {
        return !(b < a);
    }
    friend bool operator>=(const Rational& a, const Rational& b) {
        return !(a < b);
    }

    friend std::ostream& operator<<(std::ostream& os, const Rational& r) {
        return os << r.str();
    }

private:
    static BigInt parse_integer(std::string_view text) {
        if (text.empty()) {
            throw ParseError("empty rational component");
        }
        std::size_t start = (text[0] == '-') ? 1 : 0;
        if (start == text.size()) {
            throw ParseError("sign without digits in rational");
        }
        for (std::size_t i = start; i < text.size(); ++i) {
            if (text[i] < '0' || text[i] > '9') {
                throw ParseError("malformed rational: '" + std::string(text) +
                                 "'");
            }
        }
        return BigInt(std::string(text));
    }

    void normalize() {
        if (den_.is_zero()) {
            throw ZeroDenominator("rational with zero denominator");
        }
        if (den_.sign() < 0) {
            num_ = -num_;
            den_ = -den_;
        }
        if (num_.is_zero()) {
            den_ = 1;
            return;
        }
        BigInt g = boost::multiprecision::gcd(num_, den_);
        if (g > 1) {
            num_ /= g;
            den_ /= g;
        }
    }

    BigInt num_;
    BigInt den_;
};

inline Rational abs(const Rational& r) { return r.sign() < 0 ? -r : r; }

/// r^e for integer exponents; negative exponents invert (r must be nonzero).
inline Rational pow(const Rational& r, long long e) {
    if (e == 0) {
        return Rational(1);
    }
    bool invert = e < 0;
    auto u = static_cast<unsigned long long>(invert ? -e : e);
    BigInt num = boost::multiprecision::pow(r.num(), static_cast<unsigned>(u));
    BigInt den = boost::multiprecision::pow(r.den(), static_cast<unsigned>(u));
    if (invert) {
        if (num.is_zero()) {
            throw ZeroDenominator("negative power of zero");
        }
        return Rational(std::move(den), std::move(num));
    }
    return Rational(std::move(num), std::move(den));
}

}  // namespace lamf
