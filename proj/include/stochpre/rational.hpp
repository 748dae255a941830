#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <cmath>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace stochpre {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Accepts `p`, `p/q`, `d.ddd` and an optional exponent (`1.5e-3`). A leading
// '-' is accepted; callers that need nonnegative values check the sign.
inline Rational parse_rational(std::string_view s) {
  std::size_t i = 0;
  auto fail = [&](const char* msg) -> Rational {
    throw SyntaxError(std::string(msg) + " in number '" + std::string(s) + "'",
                      i);
  };
  bool neg = false;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) {
    neg = s[i] == '-';
    ++i;
  }
  BigInt num = 0;
  BigInt den = 1;
  bool any = false;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
    num = num * 10 + (s[i] - '0');
    ++i;
    any = true;
  }
  if (i < s.size() && s[i] == '/') {
    if (!any) return fail("missing numerator");
    ++i;
    BigInt d = 0;
    bool anyd = false;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      d = d * 10 + (s[i] - '0');
      ++i;
      anyd = true;
    }
    if (!anyd) return fail("missing denominator");
    if (d == 0) return fail("zero denominator");
    if (i != s.size()) return fail("trailing characters");
    Rational r(num, d);
    return neg ? Rational(-r) : r;
  }
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      num = num * 10 + (s[i] - '0');
      den *= 10;
      ++i;
      any = true;
    }
  }
  if (!any) return fail("expected digits");
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    bool eneg = false;
    if (i < s.size() && (s[i] == '-' || s[i] == '+')) {
      eneg = s[i] == '-';
      ++i;
    }
    int e = 0;
    bool anye = false;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      e = e * 10 + (s[i] - '0');
      if (e > 400) return fail("exponent too large");
      ++i;
      anye = true;
    }
    if (!anye) return fail("bad exponent");
    BigInt p = boost::multiprecision::pow(BigInt(10), e);
    if (eneg)
      den *= p;
    else
      num *= p;
  }
  if (i != s.size()) return fail("trailing characters");
  Rational r(num, den);
  return neg ? Rational(-r) : r;
}

inline std::string to_string(const Rational& r) {
  if (denominator(r) == 1) return numerator(r).str();
  return numerator(r).str() + "/" + denominator(r).str();
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

// Exact rational value of a finite double.
inline Rational from_double(double x) {
  if (!std::isfinite(x)) throw std::domain_error("from_double: not finite");
  int exp = 0;
  double m = std::frexp(x, &exp);
  // 53 significant bits
  auto mi = static_cast<long long>(std::ldexp(m, 53));
  exp -= 53;
  Rational r = Rational(BigInt(mi));
  if (exp > 0)
    r *= Rational(boost::multiprecision::pow(BigInt(2), exp));
  else if (exp < 0)
    r /= Rational(boost::multiprecision::pow(BigInt(2), -exp));
  return r;
}

}  // namespace stochpre
