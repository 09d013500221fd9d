#include "orbit_tiler/value.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>

namespace orbit_tiler {

namespace {

Rational power_of_ten(long exponent) {
  mpz_class p;
  mpz_ui_pow_ui(p.get_mpz_t(), 10, static_cast<unsigned long>(exponent < 0 ? -exponent : exponent));
  if (exponent >= 0) {
    return Rational(p);
  }
  Rational r(mpz_class(1), p);
  r.canonicalize();
  return r;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) {
    throw std::invalid_argument("empty number");
  }
  const std::string s(text);
  auto bad = [&s]() { return std::invalid_argument("not a number: '" + s + "'"); };

  if (auto slash = s.find('/'); slash != std::string::npos) {
    Rational q;
    mpz_class num, den;
    if (num.set_str(s.substr(0, slash), 10) != 0 || den.set_str(s.substr(slash + 1), 10) != 0) {
      throw bad();
    }
    if (den == 0) {
      throw std::invalid_argument("zero denominator: '" + s + "'");
    }
    q = Rational(num, den);
    q.canonicalize();
    return q;
  }

  std::size_t pos = 0;
  bool negative = false;
  if (s[pos] == '+' || s[pos] == '-') {
    negative = s[pos] == '-';
    ++pos;
  }
  std::string digits;
  long scale = 0;
  bool seen_point = false;
  bool seen_digit = false;
  for (; pos < s.size(); ++pos) {
    const char c = s[pos];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      seen_digit = true;
      if (seen_point) ++scale;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!seen_digit) throw bad();
  long exponent = 0;
  if (pos < s.size()) {
    if (s[pos] != 'e' && s[pos] != 'E') throw bad();
    ++pos;
    const char* first = s.data() + pos;
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, exponent);
    if (ec != std::errc() || ptr != last) throw bad();
  }
  Rational q(mpz_class(digits, 10));
  q *= power_of_ten(exponent - scale);
  q.canonicalize();
  if (negative) q = -q;
  return q;
}

double to_double(const Rational& v) {
  // mpq_get_d truncates; pick the nearer of the two neighbours
  const double d = v.get_d();
  if (v == 0 || !std::isfinite(d)) return d;
  const double away = std::nextafter(d, v > 0 ? HUGE_VAL : -HUGE_VAL);
  if (!std::isfinite(away)) return d;
  const Rational err_d = abs(Rational(d) - v);
  const Rational err_away = abs(Rational(away) - v);
  if (err_away < err_d) return away;
  if (err_d < err_away) return d;
  std::int64_t bits = 0;
  std::memcpy(&bits, &d, sizeof bits);
  return (bits & 1) == 0 ? d : away;
}

std::string format_value(const Rational& v) {
  Rational c = v;
  c.canonicalize();
  return c.get_str(10);
}

std::string format_value(double v) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
  if (ec != std::errc()) {
    throw std::runtime_error("failed to format double");
  }
  return std::string(buffer, ptr);
}

}  // namespace orbit_tiler
