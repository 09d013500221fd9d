#include "orbit_tiler/harness.hpp"

#include "orbit_tiler/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

namespace orbit_tiler {

namespace {

template <Value V>
V from_count(std::size_t n) {
  if constexpr (std::same_as<V, Rational>) {
    return Rational(static_cast<unsigned long>(n));
  } else {
    return static_cast<double>(n);
  }
}

template <Value V>
Accumulator<V> accumulate_abs(const V& v) {
  return Accumulator<V>(abs_value<V>(v));
}

template <Value V>
V parse_value(const std::string& text) {
  if constexpr (std::same_as<V, Rational>) {
    return parse_rational(text);
  } else {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw std::invalid_argument("not a number: '" + text + "'");
    }
    return out;
  }
}

template <Value V>
bool regrouping_equal(const V& lhs, const V& rhs) {
  if constexpr (std::same_as<V, Rational>) {
    return lhs == rhs;
  } else {
    const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    return std::abs(lhs - rhs) <= kRegroupingTolerance * scale;
  }
}

}  // namespace

template <Value V>
bool two_sided_budget_holds(const V& a, const V& b, const V& epsilon, const V& total_mass) {
  const V lhs = V((b - a) * total_mass);
  const V rhs = V(2 * epsilon * V(abs_value<V>(a) + abs_value<V>(b) + 2));
  return lhs > rhs;
}

template <Value V>
V ergodic_epsilon(const V& delta) {
  const V one(1);
  const V m = delta < one ? delta : one;
  return V(m / 8);
}

template bool two_sided_budget_holds(const Rational&, const Rational&, const Rational&, const Rational&);
template bool two_sided_budget_holds(const double&, const double&, const double&, const double&);
template Rational ergodic_epsilon(const Rational&);
template double ergodic_epsilon(const double&);

// ---------------------------------------------------------------------------

template <Value V>
LStep<V> fail_set_masses(const OrbitWindow<V>& window, const ThresholdProfile<V>& profile, std::size_t L) {
  const IntervalRef x = window.interior();
  if (x.empty()) {
    throw std::invalid_argument("window has an empty interior");
  }
  std::size_t count = 0;
  Accumulator<V> f_mass(0);
  for (std::size_t i = x.lo; i < x.hi; ++i) {
    if (profile.reaching_length(i, L) == 0) {
      ++count;
      f_mass += accumulate_abs(window.fval(i));
    }
  }
  return LStep<V>{L, divide<V>(Accumulator<V>(from_count<V>(count)), x.size()), divide<V>(f_mass, x.size())};
}

template <Value V>
LChoice<V> choose_L(const OrbitWindow<V>& window, const V& b, const V& epsilon, std::size_t cap) {
  if (!(epsilon > 0)) {
    throw std::invalid_argument("epsilon must be positive");
  }
  if (window.margin() == 0) {
    throw std::invalid_argument("choose_L needs a window margin of at least 1");
  }
  LChoice<V> choice;
  choice.cap = std::min(cap, window.margin());
  if (choice.cap == 0) {
    throw std::invalid_argument("L cap must be at least 1");
  }
  const ThresholdProfile<V> profile(window, b);
  std::size_t L = 1;
  while (true) {
    LStep<V> step = fail_set_masses(window, profile, L);
    choice.trace.push_back(step);
    choice.L = L;
    choice.z_mass = step.z_mass;
    choice.z_f_mass = step.z_f_mass;
    if (V(step.z_mass + step.z_f_mass) < epsilon) {
      choice.reached_cap = false;
      return choice;
    }
    if (L >= choice.cap) {
      choice.reached_cap = true;
      return choice;
    }
    L = std::min(2 * L, choice.cap);
  }
}

template LStep<Rational> fail_set_masses(const OrbitWindow<Rational>&, const ThresholdProfile<Rational>&,
                                         std::size_t);
template LStep<double> fail_set_masses(const OrbitWindow<double>&, const ThresholdProfile<double>&, std::size_t);
template LChoice<Rational> choose_L(const OrbitWindow<Rational>&, const Rational&, const Rational&, std::size_t);
template LChoice<double> choose_L(const OrbitWindow<double>&, const double&, const double&, std::size_t);

// ---------------------------------------------------------------------------

double section_density(std::size_t L, double epsilon, double f_bound) {
  if (L == 0 || !(epsilon > 0.0)) {
    throw std::invalid_argument("section density needs L >= 1 and epsilon > 0");
  }
  const double d = epsilon / (2.0 * static_cast<double>(L) * (1.0 + std::abs(f_bound)));
  return std::min(d, 0.5);
}

template <Value V>
double max_abs_fval(const OrbitWindow<V>& window) {
  double m = 0.0;
  for (const V& v : window.fvals()) m = std::max(m, std::abs(to_double(v)));
  return m;
}

template <Value V>
SectionSet budget_section(const OrbitWindow<V>& window, std::size_t L, double epsilon, std::uint64_t seed) {
  const double density = section_density(L, epsilon, max_abs_fval(window));
  const auto candidates = generate_candidate_section(window, density, seed);
  return sparsify(candidates, L, window.width());
}

template double max_abs_fval(const OrbitWindow<Rational>&);
template double max_abs_fval(const OrbitWindow<double>&);
template SectionSet budget_section(const OrbitWindow<Rational>&, std::size_t, double, std::uint64_t);
template SectionSet budget_section(const OrbitWindow<double>&, std::size_t, double, std::uint64_t);

// ---------------------------------------------------------------------------

template <Value V>
std::vector<ChainLink<V>> evaluate_chain_links(const ChainQuantities<V>& q) {
  const V two_eps = V(2 * q.epsilon);
  const V abs_b = abs_value<V>(q.b);
  std::vector<ChainLink<V>> links;
  auto at_least = [&links](std::string name, V lhs, V rhs) {
    const bool pass = lhs >= rhs;
    links.push_back({std::move(name), std::move(lhs), std::move(rhs), ">=", pass});
  };

  at_least("int_X f >= int_Y f - 2eps", q.integral_x, V(q.integral_y - two_eps));
  {
    const bool pass = regrouping_equal<V>(q.integral_y, q.integral_class_average_y);
    links.push_back({"int_Y f = int_Y A_f[F]", q.integral_y, q.integral_class_average_y, "==", pass});
  }
  at_least("int_Y A_f[F] >= b mu(Y)", q.integral_class_average_y, V(q.b * q.mass_y));
  at_least("b mu(Y) - 2eps >= b mu(X) - 2eps(|b| + 1)", V(q.b * q.mass_y - two_eps),
           V(q.b * q.mass_x - two_eps * V(abs_b + 1)));
  at_least("int_X f >= b mu(X) - 2eps(|b| + 1)", q.integral_x, V(q.b * q.mass_x - two_eps * V(abs_b + 1)));
  if (q.delta) {
    const V& delta = *q.delta;
    at_least("delta mu(Y) - 2eps >= delta(1 - 2eps) - 2eps", V(delta * q.mass_y - two_eps),
             V(delta * V(1 - two_eps) - two_eps));
    at_least("delta(1 - 2eps) - 2eps >= delta/2", V(delta * V(1 - two_eps) - two_eps), V(delta / 2));
  }
  return links;
}

template <Value V>
ChainReport<V> verify_chain(const OrbitWindow<V>& window, const SectionSet& section, const BudgetParams<V>& params) {
  if (!params.L) {
    throw std::invalid_argument("verify_chain needs L (run choose_L first)");
  }
  if (!(params.epsilon > 0)) {
    throw std::invalid_argument("epsilon must be positive");
  }
  if (params.delta && !(params.b == *params.delta && params.epsilon == ergodic_epsilon<V>(*params.delta))) {
    throw std::invalid_argument("ergodic-style run needs b = delta and epsilon = min(delta, 1)/8");
  }
  const std::size_t L = *params.L;
  const auto plan = build_tiling_plan(window, L, params.b);
  const auto relation = build_partial_equivalence(window, plan, section);
  const IntervalRef x = window.interior();
  const IntervalRef working = relation.working;

  ChainReport<V> report;
  report.classes = relation.classes.size();

  Accumulator<V> integral_x(0), integral_y(0), class_average_y(0), z_f(0), section_f(0), complement_f(0);
  std::size_t y_count = 0, z_count = 0, section_count = 0, complement_count = 0;

  std::vector<IntervalRef> y_classes;
  for (std::size_t k = 0; k < relation.classes.size(); ++k) {
    if (plan.in_fail_set(relation.witnesses[k])) {
      ++report.classes_with_witness_in_z;
      continue;
    }
    const IntervalRef c = relation.classes[k];
    y_classes.push_back(c);
    const V mean = birkhoff_average(window, c.lo, c.size());
    class_average_y += Accumulator<V>(mean) * Accumulator<V>(from_count<V>(c.size()));
  }

  auto y_it = y_classes.begin();
  for (std::size_t i = x.lo; i < x.hi; ++i) {
    const V& f = window.fval(i);
    integral_x += f;
    if (plan.in_fail_set(i)) {
      ++z_count;
      z_f += accumulate_abs(f);
    }
    if (!working.contains(i) || section.in_shifted_union(i)) {
      ++section_count;
      section_f += accumulate_abs(f);
    }
    while (y_it != y_classes.end() && y_it->hi <= i) ++y_it;
    if (y_it != y_classes.end() && y_it->contains(i)) {
      ++y_count;
      integral_y += f;
    } else {
      ++complement_count;
      complement_f += accumulate_abs(f);
    }
  }

  const std::size_t n = x.size();
  auto normalize = [n](const Accumulator<V>& a) { return divide<V>(a, n); };
  auto count_mass = [n](std::size_t c) { return divide<V>(Accumulator<V>(from_count<V>(c)), n); };

  ChainQuantities<V>& q = report.quantities;
  q.L = L;
  q.b = params.b;
  q.epsilon = params.epsilon;
  q.delta = params.delta;
  q.mass_x = V(1);
  q.integral_x = normalize(integral_x);
  q.mass_y = count_mass(y_count);
  q.integral_y = normalize(integral_y);
  q.integral_class_average_y = normalize(class_average_y);
  q.z_mass = count_mass(z_count);
  q.z_f_mass = normalize(z_f);
  q.section_mass = count_mass(section_count);
  q.section_f_mass = normalize(section_f);
  q.complement_mass = count_mass(complement_count);
  q.complement_f_mass = normalize(complement_f);

  report.links = evaluate_chain_links(q);
  report.preconditions_hold =
      V(q.z_mass + q.z_f_mass) < q.epsilon && V(q.section_mass + q.section_f_mass) < q.epsilon;
  report.all_links_pass = std::all_of(report.links.begin(), report.links.end(), [](const auto& l) { return l.pass; });
  report.lower_bound = V(q.b * q.mass_x - 2 * q.epsilon * V(abs_value<V>(q.b) + 1));
  return report;
}

template std::vector<ChainLink<Rational>> evaluate_chain_links(const ChainQuantities<Rational>&);
template std::vector<ChainLink<double>> evaluate_chain_links(const ChainQuantities<double>&);
template ChainReport<Rational> verify_chain(const OrbitWindow<Rational>&, const SectionSet&,
                                            const BudgetParams<Rational>&);
template ChainReport<double> verify_chain(const OrbitWindow<double>&, const SectionSet&, const BudgetParams<double>&);

template <Value V>
void write_chain_quantities_csv(std::ostream& out, const ChainQuantities<V>& q) {
  out << "quantity,value\n";
  out << "L," << q.L << '\n';
  out << "b," << format_value(q.b) << '\n';
  out << "epsilon," << format_value(q.epsilon) << '\n';
  if (q.delta) out << "delta," << format_value(*q.delta) << '\n';
  out << "mass_x," << format_value(q.mass_x) << '\n';
  out << "integral_x," << format_value(q.integral_x) << '\n';
  out << "mass_y," << format_value(q.mass_y) << '\n';
  out << "integral_y," << format_value(q.integral_y) << '\n';
  out << "integral_class_average_y," << format_value(q.integral_class_average_y) << '\n';
  out << "z_mass," << format_value(q.z_mass) << '\n';
  out << "z_f_mass," << format_value(q.z_f_mass) << '\n';
  out << "section_mass," << format_value(q.section_mass) << '\n';
  out << "section_f_mass," << format_value(q.section_f_mass) << '\n';
  out << "complement_mass," << format_value(q.complement_mass) << '\n';
  out << "complement_f_mass," << format_value(q.complement_f_mass) << '\n';
}

template <Value V>
ChainQuantities<V> read_chain_quantities_csv(std::istream& in) {
  std::map<std::string, std::string> fields;
  std::string line;
  std::getline(in, line);
  if (line != "quantity,value") {
    throw std::invalid_argument("not a chain quantities file");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("malformed row: " + line);
    fields[line.substr(0, comma)] = line.substr(comma + 1);
  }
  auto get = [&fields](const std::string& key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw std::invalid_argument("missing quantity " + key);
    return it->second;
  };
  ChainQuantities<V> q;
  q.L = std::stoul(get("L"));
  q.b = parse_value<V>(get("b"));
  q.epsilon = parse_value<V>(get("epsilon"));
  if (fields.count("delta")) q.delta = parse_value<V>(get("delta"));
  q.mass_x = parse_value<V>(get("mass_x"));
  q.integral_x = parse_value<V>(get("integral_x"));
  q.mass_y = parse_value<V>(get("mass_y"));
  q.integral_y = parse_value<V>(get("integral_y"));
  q.integral_class_average_y = parse_value<V>(get("integral_class_average_y"));
  q.z_mass = parse_value<V>(get("z_mass"));
  q.z_f_mass = parse_value<V>(get("z_f_mass"));
  q.section_mass = parse_value<V>(get("section_mass"));
  q.section_f_mass = parse_value<V>(get("section_f_mass"));
  q.complement_mass = parse_value<V>(get("complement_mass"));
  q.complement_f_mass = parse_value<V>(get("complement_f_mass"));
  return q;
}

template <Value V>
void write_chain_links_csv(std::ostream& out, const std::vector<ChainLink<V>>& links) {
  out << "link,relation,lhs,rhs,pass\n";
  for (const auto& l : links) {
    out << l.name << ',' << l.relation << ',' << format_value(l.lhs) << ',' << format_value(l.rhs) << ','
        << (l.pass ? "true" : "false") << '\n';
  }
}

template void write_chain_quantities_csv(std::ostream&, const ChainQuantities<Rational>&);
template void write_chain_quantities_csv(std::ostream&, const ChainQuantities<double>&);
template ChainQuantities<Rational> read_chain_quantities_csv(std::istream&);
template ChainQuantities<double> read_chain_quantities_csv(std::istream&);
template void write_chain_links_csv(std::ostream&, const std::vector<ChainLink<Rational>>&);
template void write_chain_links_csv(std::ostream&, const std::vector<ChainLink<double>>&);

// ---------------------------------------------------------------------------

template <Value V>
ProbeReport<V> two_sided_contradiction_probe(const OrbitWindow<V>& window, const V& a, const V& b,
                                             const V& epsilon, std::size_t cap, std::uint64_t section_seed) {
  if (!(a < b)) {
    throw std::invalid_argument("two-sided probe needs a < b");
  }
  ProbeReport<V> report;
  report.a = a;
  report.b = b;
  report.epsilon = epsilon;
  report.budget_holds = two_sided_budget_holds<V>(a, b, epsilon, V(1));

  report.upper = choose_L(window, b, epsilon, cap);
  const auto flipped = window.negated_copy();
  const V minus_a = V(-a);
  report.lower = choose_L(flipped, minus_a, epsilon, cap);

  const double eps = to_double(epsilon);
  if (!report.upper.reached_cap) {
    const std::size_t L = report.upper.L;
    BudgetParams<V> params{b, a, epsilon, std::nullopt, L, cap};
    report.upper_chain = verify_chain(window, budget_section(window, L, eps, section_seed), params);
  }
  if (!report.lower.reached_cap) {
    const std::size_t L = report.lower.L;
    BudgetParams<V> params{minus_a, V(-b), epsilon, std::nullopt, L, cap};
    report.lower_chain = verify_chain(flipped, budget_section(flipped, L, eps, derive_seed(section_seed, 1)), params);
  }
  report.dual_success = !report.upper.reached_cap && !report.lower.reached_cap;
  return report;
}

template ProbeReport<Rational> two_sided_contradiction_probe(const OrbitWindow<Rational>&, const Rational&,
                                                             const Rational&, const Rational&, std::size_t,
                                                             std::uint64_t);
template ProbeReport<double> two_sided_contradiction_probe(const OrbitWindow<double>&, const double&, const double&,
                                                           const double&, std::size_t, std::uint64_t);

// ---------------------------------------------------------------------------

template <Value V>
V ConvergenceRecord<V>::max_deviation() const {
  V worst(0);
  for (std::size_t s = 0; s < averages.size(); ++s) {
    for (std::size_t k = 0; k < averages[s].size(); ++k) {
      const V d = deviation(s, k);
      if (d > worst) worst = d;
    }
  }
  return worst;
}

template struct ConvergenceRecord<Rational>;
template struct ConvergenceRecord<double>;

template <Value V>
ConvergenceRecord<V> convergence_experiment(std::shared_ptr<const SystemModel> model,
                                            const std::vector<StartPoint>& starts,
                                            const std::vector<std::size_t>& n_grid) {
  if (n_grid.empty() || !std::is_sorted(n_grid.begin(), n_grid.end()) || n_grid.front() == 0) {
    throw std::invalid_argument("n grid must be nonempty, ascending and positive");
  }
  ConvergenceRecord<V> record;
  record.kind = model->kind();
  record.starts = starts;
  record.n_grid = n_grid;

  std::vector<Rational> expectation;
  if (model->kind() == SystemKind::finite_exact) expectation = conditional_expectation(model->finite());

  for (const auto& start : starts) {
    const auto window = orbit_window<V>(model, start, n_grid.back(), 0);
    std::vector<V> row;
    row.reserve(n_grid.size());
    for (std::size_t n : n_grid) row.push_back(birkhoff_average(window, 0, n));
    record.averages.push_back(std::move(row));
    if (model->kind() == SystemKind::finite_exact) {
      record.reference.push_back(value_from<V>(expectation[std::get<PointId>(start)]));
    } else if constexpr (std::same_as<V, double>) {
      record.reference.push_back(model->space_average());
    }
  }
  return record;
}

template ConvergenceRecord<Rational> convergence_experiment(std::shared_ptr<const SystemModel>,
                                                            const std::vector<StartPoint>&,
                                                            const std::vector<std::size_t>&);
template ConvergenceRecord<double> convergence_experiment(std::shared_ptr<const SystemModel>,
                                                          const std::vector<StartPoint>&,
                                                          const std::vector<std::size_t>&);

std::string format_start(const StartPoint& x) {
  if (const auto* id = std::get_if<PointId>(&x)) return std::to_string(*id);
  if (const auto* angle = std::get_if<Angle>(&x)) return format_value(angle->to_double());
  const auto& p = std::get<BernoulliPoint>(x);
  return std::to_string(p.seed) + ':' + std::to_string(p.offset);
}

template <Value V>
void write_convergence_csv(std::ostream& out, const ConvergenceRecord<V>& record) {
  out << "start,n,average,deviation\n";
  for (std::size_t s = 0; s < record.starts.size(); ++s) {
    const std::string label = format_start(record.starts[s]);
    for (std::size_t k = 0; k < record.n_grid.size(); ++k) {
      out << label << ',' << record.n_grid[k] << ',' << format_value(record.averages[s][k]) << ','
          << format_value(record.deviation(s, k)) << '\n';
    }
  }
}

template void write_convergence_csv(std::ostream&, const ConvergenceRecord<Rational>&);
template void write_convergence_csv(std::ostream&, const ConvergenceRecord<double>&);

// ---------------------------------------------------------------------------

ConditionalExpectationReport limit_vs_conditional_expectation(std::shared_ptr<const SystemModel> model) {
  const FiniteSystem& system = model->finite();
  ConditionalExpectationReport report;
  report.expectation = conditional_expectation(system);

  report.limits_match = true;
  for (PointId x = 0; x < system.size(); ++x) {
    const std::size_t period = system.period(x);
    const auto window = orbit_window<Rational>(model, x, 3 * period, 0);
    for (std::size_t k = 1; k <= 3; ++k) {
      LimitCheck check{x, k, birkhoff_average(window, 0, k * period), report.expectation[x], false};
      check.equal = check.average == check.expectation;
      report.limits_match = report.limits_match && check.equal;
      report.limits.push_back(std::move(check));
    }
  }

  const auto& cycles = system.cycles();
  auto integrals_agree = [&](const std::vector<std::size_t>& chosen) {
    Rational lhs(0), rhs(0);
    for (std::size_t c : chosen) {
      for (PointId x : cycles[c]) {
        lhs += system.weight(x) * system.value(x);
        rhs += system.weight(x) * report.expectation[x];
      }
    }
    return lhs == rhs;
  };

  report.integrals_match = true;
  if (cycles.size() <= kMaxExhaustiveCycles) {
    report.exhaustive = true;
    for (std::size_t mask = 0; mask < (std::size_t{1} << cycles.size()); ++mask) {
      std::vector<std::size_t> chosen;
      for (std::size_t c = 0; c < cycles.size(); ++c) {
        if (mask & (std::size_t{1} << c)) chosen.push_back(c);
      }
      report.integrals_match = report.integrals_match && integrals_agree(chosen);
      ++report.invariant_sets;
    }
  } else {
    std::vector<std::size_t> all;
    for (std::size_t c = 0; c < cycles.size(); ++c) {
      report.integrals_match = report.integrals_match && integrals_agree({c});
      all.push_back(c);
      ++report.invariant_sets;
    }
    report.integrals_match = report.integrals_match && integrals_agree(all);
    ++report.invariant_sets;
  }
  return report;
}

}  // namespace orbit_tiler
