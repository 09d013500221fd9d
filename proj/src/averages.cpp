#include "orbit_tiler/averages.hpp"

#include <algorithm>
#include <stdexcept>

namespace orbit_tiler {

FiniteEquivalence::FiniteEquivalence(std::vector<std::vector<PointId>> classes) : classes_(std::move(classes)) {
  for (auto& c : classes_) {
    if (c.empty()) {
      throw std::invalid_argument("equivalence classes must be nonempty");
    }
    std::sort(c.begin(), c.end());
    domain_.insert(domain_.end(), c.begin(), c.end());
  }
  std::sort(domain_.begin(), domain_.end());
  if (std::adjacent_find(domain_.begin(), domain_.end()) != domain_.end()) {
    throw std::invalid_argument("equivalence classes overlap or repeat a point");
  }
}

FiniteEquivalence FiniteEquivalence::identity(std::span<const PointId> domain) {
  std::vector<std::vector<PointId>> classes;
  classes.reserve(domain.size());
  for (PointId x : domain) classes.push_back({x});
  return FiniteEquivalence(std::move(classes));
}

template <Value V>
V mean_over_set(const ValueMap<V>& fvals, std::span<const PointId> members) {
  if (members.empty()) {
    throw std::invalid_argument("mean over an empty set");
  }
  Accumulator<V> total(0);
  for (PointId x : members) {
    auto it = fvals.find(x);
    if (it == fvals.end()) {
      throw std::out_of_range("no value for point " + std::to_string(x));
    }
    total += it->second;
  }
  return divide<V>(total, members.size());
}

template <Value V>
V birkhoff_average(const OrbitWindow<V>& window, std::size_t i, std::size_t n) {
  if (n == 0) {
    throw std::invalid_argument("birkhoff average needs n >= 1");
  }
  if (i > window.width() || n > window.width() - i) {
    throw WindowError("interval [" + std::to_string(i) + ", " + std::to_string(i + n) + ") exceeds window of width " +
                      std::to_string(window.width()));
  }
  return divide<V>(window.sum({i, i + n}), n);
}

template <Value V>
ValueMap<V> class_average_map(const ValueMap<V>& fvals, const FiniteEquivalence& relation) {
  ValueMap<V> out;
  for (const auto& c : relation.classes()) {
    const V mean = mean_over_set(fvals, c);
    for (PointId x : c) out.emplace(x, mean);
  }
  return out;
}

template Rational mean_over_set(const ValueMap<Rational>&, std::span<const PointId>);
template double mean_over_set(const ValueMap<double>&, std::span<const PointId>);
template Rational birkhoff_average(const OrbitWindow<Rational>&, std::size_t, std::size_t);
template double birkhoff_average(const OrbitWindow<double>&, std::size_t, std::size_t);
template ValueMap<Rational> class_average_map(const ValueMap<Rational>&, const FiniteEquivalence&);
template ValueMap<double> class_average_map(const ValueMap<double>&, const FiniteEquivalence&);

ValueMap<Rational> value_map(const FiniteSystem& system) {
  ValueMap<Rational> out;
  for (PointId x = 0; x < system.size(); ++x) out.emplace(x, system.value(x));
  return out;
}

InducedStructure induced_structure(const FiniteEquivalence& relation) {
  InducedStructure s;
  for (const auto& c : relation.classes()) {
    // classes are stored sorted
    s.transversal.push_back(c.front());
    for (std::size_t j = 0; j < c.size(); ++j) s.automorphism.emplace(c[j], c[(j + 1) % c.size()]);
  }
  return s;
}

namespace {

// The transversal meets every class once and the automorphism walks each
// class as a single cycle starting from its transversal point.
bool witnesses_hold(const FiniteEquivalence& relation, const InducedStructure& s) {
  if (s.transversal.size() != relation.classes().size()) return false;
  for (std::size_t k = 0; k < relation.classes().size(); ++k) {
    const auto& c = relation.classes()[k];
    const auto hits = std::count_if(s.transversal.begin(), s.transversal.end(),
                                    [&c](PointId b) { return std::binary_search(c.begin(), c.end(), b); });
    if (hits != 1) return false;
    std::vector<PointId> visited;
    PointId x = s.transversal[k];
    for (std::size_t i = 0; i < c.size(); ++i) {
      visited.push_back(x);
      x = s.automorphism.at(x);
    }
    if (x != s.transversal[k]) return false;
    std::sort(visited.begin(), visited.end());
    if (visited != c) return false;
  }
  return true;
}

}  // namespace

AverageReport verify_finite_averages(const FiniteSystem& system, const FiniteEquivalence& relation) {
  for (PointId x : relation.domain()) {
    if (x >= system.size()) {
      throw std::out_of_range("relation domain contains point " + std::to_string(x) + " outside the system");
    }
  }
  const auto fvals = value_map(system);
  const auto averaged = class_average_map(fvals, relation);
  const auto witnesses = induced_structure(relation);

  AverageReport report;
  report.lhs = 0;
  report.rhs = 0;
  report.transversal_sum = 0;
  report.witnesses_valid = witnesses_hold(relation, witnesses);
  report.measure_preserving = true;

  std::map<std::size_t, SizePartReport> parts;
  for (std::size_t k = 0; k < relation.classes().size(); ++k) {
    const auto& c = relation.classes()[k];
    auto& part = parts[c.size()];
    if (part.class_count == 0) {
      part.class_size = c.size();
      part.lhs = 0;
      part.rhs = 0;
      part.transversal_sum = 0;
    }
    ++part.class_count;
    for (PointId x : c) {
      if (system.weight(x) != system.weight(c.front())) report.measure_preserving = false;
      part.lhs += system.weight(x) * system.value(x);
      part.rhs += system.weight(x) * averaged.at(x);
    }
    const PointId b = witnesses.transversal[k];
    Rational orbit_sum(0);
    PointId x = b;
    for (std::size_t i = 0; i < c.size(); ++i) {
      orbit_sum += system.value(x);
      x = witnesses.automorphism.at(x);
    }
    part.transversal_sum += system.weight(b) * orbit_sum;
  }
  for (auto& [size, part] : parts) {
    part.equal = part.lhs == part.rhs;
    report.lhs += part.lhs;
    report.rhs += part.rhs;
    report.transversal_sum += part.transversal_sum;
    report.parts.push_back(part);
  }
  report.equal = report.lhs == report.rhs;
  return report;
}

std::string to_csv_record(const AverageReport& report, const std::string& system_id, const std::string& relation_id) {
  return system_id + ',' + relation_id + ',' + format_value(report.lhs) + ',' + format_value(report.rhs) + ',' +
         (report.equal ? "true" : "false");
}

std::vector<Rational> conditional_expectation(const FiniteSystem& system) {
  std::vector<Rational> out(system.size());
  for (const auto& cycle : system.cycles()) {
    Rational mass(0);
    Rational integral(0);
    for (PointId x : cycle) {
      mass += system.weight(x);
      integral += system.weight(x) * system.value(x);
    }
    Rational mean = integral / mass;
    mean.canonicalize();
    for (PointId x : cycle) out[x] = mean;
  }
  return out;
}

}  // namespace orbit_tiler
