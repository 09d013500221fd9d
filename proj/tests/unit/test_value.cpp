#include "orbit_tiler/random.hpp"
#include "orbit_tiler/value.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace orbit_tiler;

TEST_CASE("parse_rational reads fractions, integers and decimals") {
  CHECK(parse_rational("3/4") == Rational(3, 4));
  CHECK(parse_rational("-6/8") == Rational(-3, 4));
  CHECK(parse_rational("7") == Rational(7));
  CHECK(parse_rational("0.45") == Rational(9, 20));
  CHECK(parse_rational("-1.5e-2") == Rational(-3, 200));
  CHECK(parse_rational("2E3") == Rational(2000));
  CHECK(parse_rational("  .5 ") == Rational(1, 2));
  CHECK_THROWS_AS(parse_rational("1/0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("abc"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("1.2.3"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational(""), std::invalid_argument);
}

TEST_CASE("long decimal expansions are kept exactly") {
  const Rational q = parse_rational("0.618033988749894848204586834365638117720");
  const Rational scaled = q * Rational(mpz_class("1000000000000000000000000000000000000000"));
  CHECK(scaled.get_den() == 1);
  CHECK(scaled.get_num() == mpz_class("618033988749894848204586834365638117720"));
}

TEST_CASE("to_double rounds to nearest") {
  CHECK(to_double(Rational(9, 20)) == 0.45);
  CHECK(to_double(Rational(1, 3)) == 1.0 / 3.0);
  CHECK(to_double(Rational(-1, 10)) == -0.1);
  CHECK(to_double(Rational(0)) == 0.0);

  std::mt19937_64 rng(3);
  for (int t = 0; t < 2000; ++t) {
    const long p = static_cast<long>(rng() % 2000001) - 1000000;
    const unsigned long q = 1 + rng() % 999983;
    Rational r(p, q);
    r.canonicalize();
    const double d = to_double(r);
    // the neighbours of d are no closer
    const Rational err = abs(Rational(d) - r);
    CHECK(abs(Rational(std::nextafter(d, HUGE_VAL)) - r) >= err);
    CHECK(abs(Rational(std::nextafter(d, -HUGE_VAL)) - r) >= err);
  }
}

TEST_CASE("format_value is canonical and round-trips") {
  CHECK(format_value(Rational(4, 8)) == "1/2");
  CHECK(format_value(Rational(-3)) == "-3");
  CHECK(format_value(0.45) == "0.45");
  CHECK(format_value(0.1 + 0.2) == "0.30000000000000004");
  for (double v : {0.1, 1e-300, 123456.789, -2.5}) {
    CHECK(std::stod(format_value(v)) == v);
  }
}

TEST_CASE("divide works in both regimes") {
  CHECK(divide<Rational>(Rational(3), 4) == Rational(3, 4));
  CHECK(divide<double>(3.0L, 4) == 0.75);
  CHECK_THROWS(divide<Rational>(Rational(3), 0));
}

TEST_CASE("counter streams are deterministic and spread") {
  CHECK(counter_bits(1, 2, 3) == counter_bits(1, 2, 3));
  CHECK(counter_bits(1, 2, 3) != counter_bits(1, 2, 4));
  CHECK(counter_bits(1, 2, 3) != counter_bits(1, 3, 3));
  CHECK(derive_seed(5, 0) != derive_seed(5, 1));
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = counter_uniform(9, 0, static_cast<std::uint64_t>(i));
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}
