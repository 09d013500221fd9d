#pragma once

#include <gmpxx.h>

#include <concepts>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace orbit_tiler {

using Rational = mpq_class;

/// The two arithmetic regimes: exact rationals for finite systems, binary64
/// for sampled ones.
template <typename V>
concept Value = std::same_as<V, Rational> || std::same_as<V, double>;

template <Value V>
struct ValueTraits;

template <>
struct ValueTraits<Rational> {
  using Accumulator = Rational;
  static constexpr bool exact = true;
  static constexpr const char* name = "exact";
};

template <>
struct ValueTraits<double> {
  // 64-bit mantissa keeps prefix sums over 10^7 terms well below 1e-9.
  using Accumulator = long double;
  static constexpr bool exact = false;
  static constexpr const char* name = "binary64";
};

template <Value V>
using Accumulator = typename ValueTraits<V>::Accumulator;

/// Parses "p/q", an integer, or a finite decimal such as "-0.125" or "2.5e-3"
/// into an exact canonical rational. Throws std::invalid_argument.
Rational parse_rational(std::string_view text);

double to_double(const Rational& v);
inline double to_double(double v) { return v; }
inline double to_double(long double v) { return static_cast<double>(v); }

/// Canonical "p/q" (or "p" for integers).
std::string format_value(const Rational& v);
/// Shortest round-trip decimal.
std::string format_value(double v);

template <Value V>
V value_from(const Rational& q) {
  if constexpr (std::same_as<V, Rational>) {
    return q;
  } else {
    return to_double(q);
  }
}

template <Value V>
V value_from_accumulator(const Accumulator<V>& a) {
  if constexpr (std::same_as<V, Rational>) {
    return a;
  } else {
    return static_cast<double>(a);
  }
}

template <Value V>
V divide(const Accumulator<V>& sum, std::size_t n) {
  if (n == 0) throw std::invalid_argument("mean over an empty range");
  if constexpr (std::same_as<V, Rational>) {
    Rational out = sum / Rational(static_cast<unsigned long>(n));
    return out;
  } else {
    return static_cast<double>(sum / static_cast<long double>(n));
  }
}

template <Value V>
V abs_value(const V& v) {
  if constexpr (std::same_as<V, Rational>) {
    return abs(v);
  } else {
    return v < 0 ? -v : v;
  }
}

}  // namespace orbit_tiler
