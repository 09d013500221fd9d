#pragma once

#include "orbit_tiler/averages.hpp"
#include "orbit_tiler/sections.hpp"
#include "orbit_tiler/systems.hpp"
#include "orbit_tiler/tiling.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace orbit_tiler {

inline constexpr std::size_t kDefaultLCap = std::size_t{1} << 16;

/// Relative tolerance for the regrouping identity in binary64 mode.
inline constexpr double kRegroupingTolerance = 1e-9;

template <Value V>
struct BudgetParams {
  V b;
  std::optional<V> a;
  V epsilon;
  /// Ergodic-style runs: b = delta and epsilon = min(delta, 1) / 8.
  std::optional<V> delta;
  /// Fixed tile bound; chosen by choose_L when empty.
  std::optional<std::size_t> L;
  std::size_t cap = kDefaultLCap;
};

/// (b - a) * total_mass > 2 epsilon (|a| + |b| + 2)
template <Value V>
bool two_sided_budget_holds(const V& a, const V& b, const V& epsilon, const V& total_mass);

/// min(delta, 1) / 8
template <Value V>
V ergodic_epsilon(const V& delta);

// ---------------------------------------------------------------------------

template <Value V>
struct LStep {
  std::size_t L = 0;
  V z_mass;
  V z_f_mass;
};

template <Value V>
struct LChoice {
  /// The accepted L, or the last one tried when the cap was reached.
  std::size_t L = 0;
  std::size_t cap = 0;
  bool reached_cap = false;
  V z_mass;
  V z_f_mass;
  std::vector<LStep<V>> trace;
};

/// Mass and f-mass of Z over the interior at one L.
template <Value V>
LStep<V> fail_set_masses(const OrbitWindow<V>& window, const ThresholdProfile<V>& profile, std::size_t L);

/// Doubles L from 1 until ||1_Z|| + ||f 1_Z|| < epsilon over the interior, up
/// to min(cap, margin). reached_cap is the CapReached outcome.
template <Value V>
LChoice<V> choose_L(const OrbitWindow<V>& window, const V& b, const V& epsilon, std::size_t cap = kDefaultLCap);

// ---------------------------------------------------------------------------

/// Candidate density epsilon / (2 L (1 + f_bound)): the expected mass plus
/// f-mass of S~ stays below epsilon / 2.
double section_density(std::size_t L, double epsilon, double f_bound);

template <Value V>
double max_abs_fval(const OrbitWindow<V>& window);

/// sparsify(generate_candidate_section(...)) with the density above.
template <Value V>
SectionSet budget_section(const OrbitWindow<V>& window, std::size_t L, double epsilon, std::uint64_t seed);

// ---------------------------------------------------------------------------

/// Raw quantities of one chain evaluation. Integrals and masses are over the
/// interior X, normalised by |X| (so mass(X) = 1).
template <Value V>
struct ChainQuantities {
  std::size_t L = 0;
  V b;
  V epsilon;
  std::optional<V> delta;
  V mass_x;
  V integral_x;
  V mass_y;
  V integral_y;
  V integral_class_average_y;
  V z_mass;
  V z_f_mass;
  /// S~ together with the part of X lacking a left marker or tile context.
  V section_mass;
  V section_f_mass;
  V complement_mass;
  V complement_f_mass;
};

template <Value V>
struct ChainLink {
  std::string name;
  V lhs;
  V rhs;
  /// ">=" or "=="
  std::string relation;
  bool pass = false;
};

template <Value V>
struct ChainReport {
  ChainQuantities<V> quantities;
  std::vector<ChainLink<V>> links;
  std::size_t classes = 0;
  std::size_t classes_with_witness_in_z = 0;
  /// ||1_Z|| + ||f 1_Z|| < eps and the same for the section part.
  bool preconditions_hold = false;
  bool all_links_pass = false;
  /// b mass(X) - 2 eps (|b| + 1)
  V lower_bound;
};

/// Every link evaluated from the raw quantities alone.
template <Value V>
std::vector<ChainLink<V>> evaluate_chain_links(const ChainQuantities<V>& q);

/// Builds the plan and F for (b, L) and evaluates every link of
///   int_X f >= int_Y f - 2eps = int_Y A_f[F] - 2eps >= b mu(Y) - 2eps >= b mu(X) - 2eps(|b| + 1)
/// where Y is the union of the classes whose witness lies outside Z.
template <Value V>
ChainReport<V> verify_chain(const OrbitWindow<V>& window, const SectionSet& section, const BudgetParams<V>& params);

/// CSV "quantity,value".
template <Value V>
void write_chain_quantities_csv(std::ostream& out, const ChainQuantities<V>& q);
template <Value V>
ChainQuantities<V> read_chain_quantities_csv(std::istream& in);
/// CSV "link,relation,lhs,rhs,pass".
template <Value V>
void write_chain_links_csv(std::ostream& out, const std::vector<ChainLink<V>>& links);

// ---------------------------------------------------------------------------

template <Value V>
struct ProbeReport {
  V a;
  V b;
  V epsilon;
  bool budget_holds = false;
  /// Tiles with averages >= b.
  LChoice<V> upper;
  /// Tiles with averages <= a, run as -f >= -a.
  LChoice<V> lower;
  std::optional<ChainReport<V>> upper_chain;
  std::optional<ChainReport<V>> lower_chain;
  /// Both sides found an L below the cap; the combined bounds would then
  /// contradict the budget.
  bool dual_success = false;
};

template <Value V>
ProbeReport<V> two_sided_contradiction_probe(const OrbitWindow<V>& window, const V& a, const V& b,
                                             const V& epsilon, std::size_t cap, std::uint64_t section_seed);

// ---------------------------------------------------------------------------

template <Value V>
struct ConvergenceRecord {
  SystemKind kind = SystemKind::finite_exact;
  std::vector<StartPoint> starts;
  std::vector<std::size_t> n_grid;
  /// averages[s][k] = A_f[T, n_grid[k]] at starts[s]
  std::vector<std::vector<V>> averages;
  /// Per start: the conditional expectation for finite systems, the space
  /// average otherwise.
  std::vector<V> reference;

  V deviation(std::size_t s, std::size_t k) const { return abs_value<V>(V(averages[s][k] - reference[s])); }
  V max_deviation() const;
};

template <Value V>
ConvergenceRecord<V> convergence_experiment(std::shared_ptr<const SystemModel> model,
                                            const std::vector<StartPoint>& starts,
                                            const std::vector<std::size_t>& n_grid);

/// CSV "start,n,average,deviation".
template <Value V>
void write_convergence_csv(std::ostream& out, const ConvergenceRecord<V>& record);

std::string format_start(const StartPoint& x);

// ---------------------------------------------------------------------------

struct LimitCheck {
  PointId point = 0;
  std::size_t k = 0;
  Rational average;
  Rational expectation;
  bool equal = false;
};

struct ConditionalExpectationReport {
  std::vector<Rational> expectation;
  std::vector<LimitCheck> limits;
  bool limits_match = false;
  /// Number of invariant sets (unions of cycles) checked.
  std::size_t invariant_sets = 0;
  bool exhaustive = false;
  bool integrals_match = false;

  bool all_pass() const { return limits_match && integrals_match; }
};

inline constexpr std::size_t kMaxExhaustiveCycles = 16;

/// A_f[T, k * period] = E(f | invariant) at every point for k = 1..3, and
/// int_A f = int_A E(f | invariant) for every union of cycles A (every cycle
/// and the whole space when there are more than kMaxExhaustiveCycles cycles).
ConditionalExpectationReport limit_vs_conditional_expectation(std::shared_ptr<const SystemModel> model);

}  // namespace orbit_tiler
