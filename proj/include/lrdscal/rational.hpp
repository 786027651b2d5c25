#pragma once

#include <boost/rational.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>

#include "lrdscal/error.hpp"

namespace lrdscal {

/// Exact rational number used wherever boundary detection must not depend on
/// floating-point rounding (growth exponents, critical indices).
using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

inline std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

/// Parses "0.42", "-3", "21/50" or "1e-1" exactly.
inline Rational parse_rational(const std::string& text) {
  if (text.empty()) fail(ErrorKind::invalid_input, "empty number");
  if (auto slash = text.find('/'); slash != std::string::npos) {
    const Rational a = parse_rational(text.substr(0, slash));
    const Rational b = parse_rational(text.substr(slash + 1));
    if (b == Rational(0)) fail(ErrorKind::invalid_input, "zero denominator in '" + text + "'");
    return a / b;
  }
  std::size_t pos = 0;
  bool neg = false;
  if (text[pos] == '+' || text[pos] == '-') neg = text[pos++] == '-';
  std::int64_t num = 0, den = 1;
  bool any = false, dot = false;
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c == '.' && !dot) {
      dot = true;
      continue;
    }
    if (c == 'e' || c == 'E') break;
    if (c < '0' || c > '9') fail(ErrorKind::invalid_input, "not a number: '" + text + "'");
    if (num > (INT64_MAX - 9) / 10 || (dot && den > INT64_MAX / 10))
      fail(ErrorKind::invalid_input, "too many digits: '" + text + "'");
    num = num * 10 + (c - '0');
    if (dot) den *= 10;
    any = true;
  }
  if (!any) fail(ErrorKind::invalid_input, "not a number: '" + text + "'");
  Rational r(neg ? -num : num, den);
  if (pos < text.size()) {
    char* end = nullptr;
    const long e = std::strtol(text.c_str() + pos + 1, &end, 10);
    if (*end != '\0') fail(ErrorKind::invalid_input, "bad exponent in '" + text + "'");
    for (long i = 0; i < std::labs(e); ++i) r = e > 0 ? r * Rational(10) : r / Rational(10);
  }
  return r;
}

/// Best rational approximation with bounded denominator (continued fractions).
/// Exact for doubles that were produced from short decimals such as 0.42.
inline Rational rational_from_double(double x, std::int64_t max_den = 1000000) {
  if (!std::isfinite(x)) fail(ErrorKind::invalid_input, "non-finite value");
  std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double v = x;
  for (int it = 0; it < 64; ++it) {
    const double a = std::floor(v);
    const auto ai = static_cast<std::int64_t>(a);
    const std::int64_t q2 = q0 + ai * q1;
    if (q2 > max_den) break;
    const std::int64_t p2 = p0 + ai * p1;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    if (std::abs(static_cast<double>(p1) / static_cast<double>(q1) - x) <= 1e-15 * std::max(1.0, std::abs(x))) break;
    const double frac = v - a;
    if (frac < 1e-300) break;
    v = 1.0 / frac;
  }
  return Rational(p1, q1);
}

}  // namespace lrdscal
