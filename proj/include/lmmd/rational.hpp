#pragma once

// Exact rational arithmetic and the dense polynomial helpers built on it.
// Rational is Boost.Multiprecision's cpp_rational: always normalized, with a
// positive denominator, and no rounding anywhere.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "lmmd/errors.hpp"

namespace lmmd {

using Rational = boost::multiprecision::cpp_rational;
using Integer = boost::multiprecision::cpp_int;

/// Lowest-terms "p/q" form; integers are written with an explicit "/1".
inline std::string to_string(const Rational& r) {
  return numerator(r).str() + "/" + denominator(r).str();
}

/// Accepts "p/q" or a bare integer "p".
inline Rational parse_rational(std::string_view text) {
  try {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) {
      return Rational(Integer(std::string(text)));
    }
    Integer num(std::string(text.substr(0, slash)));
    Integer den(std::string(text.substr(slash + 1)));
    if (den == 0) throw domain_error("zero denominator in rational '" + std::string(text) + "'");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    return Rational(num, den);
  } catch (const std::runtime_error&) {
    throw domain_error("malformed rational '" + std::string(text) + "'");
  }
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }
inline long double to_long_double(const Rational& r) { return r.convert_to<long double>(); }

inline Rational factorial(unsigned n) {
  Integer f = 1;
  for (unsigned i = 2; i <= n; ++i) f *= i;
  return Rational(f);
}

inline Rational pow(const Rational& base, unsigned exponent) {
  Rational result = 1;
  for (unsigned i = 0; i < exponent; ++i) result *= base;
  return result;
}

namespace poly {

// Coefficient vectors here are lowest-degree first: c[0] + c[1] u + ...

using Coeffs = std::vector<Rational>;

/// Multiply by the linear factor (u - root).
inline Coeffs times_linear(const Coeffs& p, const Rational& root) {
  Coeffs out(p.size() + 1, Rational(0));
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i + 1] += p[i];
    out[i] -= root * p[i];
  }
  return out;
}

/// Integral over [0, 1], term by term via u^n -> 1/(n+1).
inline Rational integrate_unit(const Coeffs& p) {
  Rational sum = 0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += p[i] / Rational(i + 1);
  return sum;
}

inline Coeffs derivative(const Coeffs& p) {
  if (p.size() <= 1) return {Rational(0)};
  Coeffs out(p.size() - 1);
  for (std::size_t i = 1; i < p.size(); ++i) out[i - 1] = p[i] * Rational(i);
  return out;
}

inline Rational evaluate(const Coeffs& p, const Rational& u) {
  Rational acc = 0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * u + *it;
  return acc;
}

}  // namespace poly
}  // namespace lmmd
