#pragma once

#include "orbit_tiler/systems.hpp"
#include "orbit_tiler/value.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace orbit_tiler {

template <Value V>
using ValueMap = std::map<PointId, V>;

/// A finite equivalence relation given by its classes. Points outside the
/// union of the classes are outside the domain.
class FiniteEquivalence {
 public:
  FiniteEquivalence() = default;
  /// Throws std::invalid_argument on empty or overlapping classes.
  explicit FiniteEquivalence(std::vector<std::vector<PointId>> classes);

  static FiniteEquivalence identity(std::span<const PointId> domain);

  const std::vector<std::vector<PointId>>& classes() const { return classes_; }
  /// Sorted union of the classes.
  const std::vector<PointId>& domain() const { return domain_; }

 private:
  std::vector<std::vector<PointId>> classes_;
  std::vector<PointId> domain_;
};

/// A_f[U], the unweighted mean of f over a finite nonempty set.
template <Value V>
V mean_over_set(const ValueMap<V>& fvals, std::span<const PointId> members);

/// A_f[T, n] at T^i x0: the mean of fvals[i .. i+n).
template <Value V>
V birkhoff_average(const OrbitWindow<V>& window, std::size_t i, std::size_t n);

/// A_f[F]: each point of dom(F) mapped to the mean of f over its class.
template <Value V>
ValueMap<V> class_average_map(const ValueMap<V>& fvals, const FiniteEquivalence& relation);

ValueMap<Rational> value_map(const FiniteSystem& system);

/// The executable witnesses of the finite-averages identity: a transversal
/// (minimum id per class) and the automorphism cycling each class in id order.
struct InducedStructure {
  std::vector<PointId> transversal;
  std::map<PointId, PointId> automorphism;
};

InducedStructure induced_structure(const FiniteEquivalence& relation);

/// The identity restricted to the classes of one size n.
struct SizePartReport {
  std::size_t class_size = 0;
  std::size_t class_count = 0;
  Rational lhs;
  Rational transversal_sum;
  Rational rhs;
  bool equal = false;
};

struct AverageReport {
  /// Integral of f over dom(F).
  Rational lhs;
  /// Integral of A_f[F] over dom(F).
  Rational rhs;
  bool equal = false;
  /// Weights are constant on every class, i.e. F is measure preserving.
  bool measure_preserving = false;
  /// Sum over the transversal B of mu(x) * sum_{i<n} f(T^i x).
  Rational transversal_sum;
  bool witnesses_valid = false;
  std::vector<SizePartReport> parts;
};

AverageReport verify_finite_averages(const FiniteSystem& system, const FiniteEquivalence& relation);

inline constexpr const char* kAverageReportCsvHeader = "system_id,relation_id,lhs,rhs,equal";
std::string to_csv_record(const AverageReport& report, const std::string& system_id,
                          const std::string& relation_id);

/// E(f | invariant sets): the mu-weighted mean of f over each point's cycle.
std::vector<Rational> conditional_expectation(const FiniteSystem& system);

}  // namespace orbit_tiler
