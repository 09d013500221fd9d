#include "orbit_tiler/generators.hpp"
#include "orbit_tiler/harness.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace orbit_tiler;
using oracle::rationals;

TEST_CASE("two-sided budget") {
  CHECK(two_sided_budget_holds(0.45, 0.55, 0.01, 1.0));
  CHECK_FALSE(two_sided_budget_holds(0.5, 0.55, 0.01, 1.0));
  // equality is not enough: 2/49 = 2 (1/100) (2/49 + 2)
  CHECK_FALSE(two_sided_budget_holds(Rational(0), Rational(2, 49), Rational(1, 100), Rational(1)));
  CHECK(two_sided_budget_holds(Rational(0), Rational(3, 49), Rational(1, 100), Rational(1)));
  CHECK(ergodic_epsilon(Rational(1, 2)) == Rational(1, 16));
  CHECK(ergodic_epsilon(Rational(3)) == Rational(1, 8));
}

TEST_CASE("section density") {
  CHECK(section_density(16, 0.01, 1.0) == doctest::Approx(0.01 / 64));
  CHECK(section_density(1, 10.0, 0.0) == 0.5);
}

TEST_CASE("choose_L on constant observables") {
  const auto above = orbit_window<Rational>(oracle::constant_model(Rational(1, 2)), PointId{0}, 400, 64);
  const auto ok = choose_L(above, Rational(1, 2), Rational(1, 100));
  CHECK(ok.L == 1);
  CHECK_FALSE(ok.reached_cap);
  CHECK(ok.z_mass == 0);

  const auto below = orbit_window<Rational>(oracle::constant_model(Rational(1, 4)), PointId{0}, 400, 64);
  const auto capped = choose_L(below, Rational(1, 2), Rational(1, 100), 32);
  CHECK(capped.reached_cap);
  CHECK(capped.cap == 32);
  CHECK(capped.L == 32);
  CHECK(capped.z_mass == 1);
}

TEST_CASE("golden rotation: L trace doubles, Z mass shrinks, accepted L meets epsilon") {
  const auto w = orbit_window<double>(oracle::golden_half_model(), Angle{}, 200000, 4096);
  const auto choice = choose_L(w, 0.45, 0.01);
  REQUIRE_FALSE(choice.reached_cap);
  CHECK(choice.L == 16);
  REQUIRE(choice.trace.size() >= 2);
  for (std::size_t k = 1; k < choice.trace.size(); ++k) {
    CHECK(choice.trace[k].L == 2 * choice.trace[k - 1].L);
    CHECK(choice.trace[k].z_mass <= choice.trace[k - 1].z_mass);
  }
  const auto& last = choice.trace.back();
  CHECK(last.L == choice.L);
  CHECK(last.z_mass + last.z_f_mass < 0.01);
  const auto& prev = choice.trace[choice.trace.size() - 2];
  CHECK(prev.z_mass + prev.z_f_mass >= 0.01);
}

TEST_CASE("Z mass is non-increasing in L on random finite systems") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto model = std::make_shared<const SystemModel>(FiniteSystem(random_finite_spec(seed)));
    const auto w = orbit_window<Rational>(model, PointId{0}, 500, 64);
    const ThresholdProfile<Rational> profile(w, Rational(0));
    Rational previous(2);
    for (std::size_t L = 1; L <= 64; L *= 2) {
      const auto step = fail_set_masses(w, profile, L);
      CHECK(step.z_mass <= previous);
      previous = step.z_mass;
    }
  }
}

TEST_CASE("chain on a constant observable") {
  const Rational c(3, 4);
  const auto w = orbit_window<Rational>(oracle::constant_model(c), PointId{0}, 100000, 100);
  BudgetParams<Rational> params{Rational(1, 2), std::nullopt, Rational(1, 100)};
  const auto section = sparsify(generate_candidate_section(w, 0.002, 5), 4, w.width());
  params.L = 4;
  const auto report = verify_chain(w, section, params);
  CHECK(report.all_links_pass);
  CHECK(report.quantities.integral_x == c);
  CHECK(report.quantities.z_mass == 0);
  CHECK(report.quantities.integral_y == report.quantities.integral_class_average_y);
  CHECK(report.lower_bound == Rational(1, 2) - Rational(2, 100) * Rational(3, 2));
  CHECK(report.classes_with_witness_in_z == 0);
}

TEST_CASE("chain needs L") {
  const auto w = orbit_window<Rational>(oracle::constant_model(Rational(1)), PointId{0}, 200, 10);
  const BudgetParams<Rational> params{Rational(1, 2), std::nullopt, Rational(1, 100)};
  CHECK_THROWS(verify_chain(w, SectionSet({5}, 4, 200), params));
}

TEST_CASE("golden chain holds and its quantities round-trip through CSV") {
  const auto w = orbit_window<double>(oracle::golden_half_model(), Angle{}, 200000, 4096);
  const auto choice = choose_L(w, 0.45, 0.01);
  BudgetParams<double> params{0.45, std::nullopt, 0.01};
  params.L = choice.L;
  const auto report = verify_chain(w, budget_section(w, choice.L, 0.01, 7), params);
  CHECK(report.preconditions_hold);
  CHECK(report.all_links_pass);
  CHECK(report.lower_bound == doctest::Approx(0.421));
  CHECK(report.lower_bound <= report.quantities.integral_x);
  CHECK(report.quantities.integral_x == doctest::Approx(0.5).epsilon(2e-3));

  std::stringstream csv;
  write_chain_quantities_csv(csv, report.quantities);
  const auto back = read_chain_quantities_csv<double>(csv);
  const auto links = evaluate_chain_links(back);
  REQUIRE(links.size() == report.links.size());
  for (std::size_t k = 0; k < links.size(); ++k) {
    CHECK(links[k].name == report.links[k].name);
    CHECK(links[k].lhs == report.links[k].lhs);
    CHECK(links[k].rhs == report.links[k].rhs);
    CHECK(links[k].pass == report.links[k].pass);
  }
  std::ostringstream link_csv;
  write_chain_links_csv(link_csv, report.links);
  CHECK(link_csv.str().rfind("link,relation,lhs,rhs,pass\n", 0) == 0);
}

TEST_CASE("ergodic-style chain uses delta links") {
  const auto w = orbit_window<Rational>(oracle::constant_model(Rational(1, 2)), PointId{0}, 2000, 100);
  const Rational delta(1, 2);
  BudgetParams<Rational> params{delta, std::nullopt, ergodic_epsilon(delta), delta};
  params.L = 2;
  const auto report = verify_chain(w, budget_section(w, 2, 1.0 / 16, 3), params);
  CHECK(report.all_links_pass);
  CHECK(report.links.size() == 7);
  BudgetParams<Rational> wrong{delta, std::nullopt, Rational(1, 100), delta};
  wrong.L = 2;
  CHECK_THROWS(verify_chain(w, SectionSet({5}, 2, 2000), wrong));
}

TEST_CASE("exact chain on random multi-cycle systems") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto model = std::make_shared<const SystemModel>(FiniteSystem(random_finite_spec(seed, {12, 40, false, 2})));
    const auto w = orbit_window<Rational>(model, PointId{0}, 4000, 256);
    const Rational b(-1);
    const auto choice = choose_L(w, b, Rational(1, 10), 256);
    if (choice.reached_cap) continue;
    BudgetParams<Rational> params{b, std::nullopt, Rational(1, 10)};
    params.L = choice.L;
    const auto report = verify_chain(w, sparsify(generate_candidate_section(w, 0.01, seed), choice.L, 4000), params);
    // the regrouping identity is exact whatever the budget
    CHECK(report.quantities.integral_y == report.quantities.integral_class_average_y);
    for (const auto& link : report.links) {
      if (link.relation == "==") CHECK(link.pass);
    }
  }
}

TEST_CASE("contradiction probe on constant observables") {
  const auto w = orbit_window<Rational>(oracle::constant_model(Rational(1, 2)), PointId{0}, 100000, 64);
  SUBCASE("threshold below the value: only the b side completes") {
    const auto p = two_sided_contradiction_probe(w, Rational(3, 10), Rational(45, 100), Rational(1, 100), 64, 1);
    CHECK(p.budget_holds);
    CHECK_FALSE(p.upper.reached_cap);
    CHECK(p.lower.reached_cap);
    CHECK_FALSE(p.dual_success);
    REQUIRE(p.upper_chain);
    CHECK(p.upper_chain->all_links_pass);
    CHECK_FALSE(p.lower_chain);
  }
  SUBCASE("straddling the value: neither side completes") {
    const auto p = two_sided_contradiction_probe(w, Rational(45, 100), Rational(55, 100), Rational(1, 100), 64, 1);
    CHECK(p.upper.reached_cap);
    CHECK(p.lower.reached_cap);
    CHECK_FALSE(p.dual_success);
  }
  CHECK_THROWS(two_sided_contradiction_probe(w, Rational(1), Rational(1), Rational(1, 100), 64, 1));
}

TEST_CASE("convergence experiment") {
  SUBCASE("4-cycle at multiples of the period") {
    auto model = oracle::finite_model({{0, 1, 2, 3}}, rationals({"1", "0", "0", "0"}));
    const std::vector<StartPoint> starts{PointId{0}, PointId{1}, PointId{2}, PointId{3}};
    const auto record = convergence_experiment<Rational>(model, starts, {4, 8, 400});
    CHECK(record.max_deviation() == 0);
    CHECK(record.reference == std::vector<Rational>(4, Rational(1, 4)));
    std::ostringstream csv;
    write_convergence_csv(csv, record);
    CHECK(csv.str().rfind("start,n,average,deviation\n0,4,1/4,0\n", 0) == 0);
  }
  SUBCASE("golden rotation") {
    std::vector<StartPoint> starts;
    for (std::uint64_t s = 0; s < 20; ++s) starts.push_back(random_angle(s));
    const auto record = convergence_experiment<double>(oracle::golden_half_model(), starts, {10000});
    CHECK(record.max_deviation() <= 1e-3);
  }
  CHECK(format_start(PointId{3}) == "3");
  CHECK(format_start(BernoulliPoint{5, -2}) == "5:-2");
  CHECK(format_start(Angle{}) == "0");
}

TEST_CASE("limits equal the conditional expectation") {
  auto model = oracle::finite_model({{0, 1, 2}, {3, 4, 5, 6, 7}}, rationals({"1", "1", "1", "0", "0", "0", "0", "0"}));
  const auto two = limit_vs_conditional_expectation(model);
  CHECK(two.all_pass());
  CHECK(two.exhaustive);
  // every union of the two cycles, the empty one included
  CHECK(two.invariant_sets == 4);
  CHECK(two.expectation == rationals({"1", "1", "1", "0", "0", "0", "0", "0"}));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto m = std::make_shared<const SystemModel>(FiniteSystem(random_finite_spec(seed, {4, 64, true, 2})));
    const auto r = limit_vs_conditional_expectation(m);
    CHECK(r.limits_match);
    CHECK(r.integrals_match);
  }
}
