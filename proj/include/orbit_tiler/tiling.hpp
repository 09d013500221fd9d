#pragma once

#include "orbit_tiler/averages.hpp"
#include "orbit_tiler/sections.hpp"
#include "orbit_tiler/systems.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace orbit_tiler {

/// Max over a fixed array with "rightmost index in [lo, hi] whose value is at
/// least t" queries.
template <typename T>
class RangeMaxTree {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  explicit RangeMaxTree(const std::vector<T>& values);

  std::size_t size() const { return size_; }
  std::size_t rightmost_at_least(std::size_t lo, std::size_t hi, const T& threshold) const;

 private:
  std::size_t find(std::size_t node, std::size_t node_lo, std::size_t node_hi, std::size_t lo, std::size_t hi,
                   const T& threshold) const;

  std::size_t size_ = 0;
  std::size_t leaves_ = 1;
  std::vector<T> tree_;
};

/// G(k) = sum_{j<k} f_j - b k over one window, so that A_f[T,n](x_i) >= b
/// exactly when G(i + n) >= G(i).
template <Value V>
class ThresholdProfile {
 public:
  ThresholdProfile(const OrbitWindow<V>& window, const V& threshold);

  const V& threshold() const { return threshold_; }
  std::size_t width() const { return width_; }
  /// Largest n in [1, L] with A_f[T,n] >= b at index i, or 0 if none.
  /// Requires i + L <= width.
  std::size_t reaching_length(std::size_t i, std::size_t L) const;

 private:
  V threshold_;
  std::size_t width_;
  std::vector<Accumulator<V>> shifted_;
  RangeMaxTree<Accumulator<V>> tree_;
};

/// The tile-length function ell and the threshold-fail set Z over one window.
/// ell is defined on every index with L points of right context.
template <Value V>
class TilingPlan {
 public:
  /// Validates 1 <= ell <= L and ell = 1 on Z.
  TilingPlan(std::size_t max_length, V threshold, std::size_t width, IntervalRef interior,
             std::vector<std::size_t> lengths, std::vector<bool> fail);

  std::size_t max_length() const { return max_length_; }
  const V& threshold() const { return threshold_; }
  std::size_t width() const { return width_; }
  IntervalRef interior() const { return interior_; }
  /// Indices where ell is defined: [0, width - L].
  IntervalRef domain() const { return {0, lengths_.size()}; }

  std::size_t length_at(std::size_t i) const;
  bool in_fail_set(std::size_t i) const;
  /// Sorted Z over the whole domain.
  std::vector<std::size_t> fail_set() const;
  /// I_i = [i, i + ell(i)).
  IntervalRef tile_at(std::size_t i) const { return {i, i + length_at(i)}; }

 private:
  std::size_t max_length_;
  V threshold_;
  std::size_t width_;
  IntervalRef interior_;
  std::vector<std::size_t> lengths_;
  std::vector<bool> fail_;
};

/// Throws std::invalid_argument when L is 0 or exceeds the window margin.
template <Value V>
TilingPlan<V> build_tiling_plan(const OrbitWindow<V>& window, std::size_t L, const V& threshold);

template <Value V>
TilingPlan<V> build_tiling_plan(const OrbitWindow<V>& window, const ThresholdProfile<V>& profile, std::size_t L);

struct Tiling {
  IntervalRef interval;
  std::vector<IntervalRef> tiles;

  friend bool operator==(const Tiling&, const Tiling&) = default;
};

/// Walks [i, i + ell(i)) from interval.lo; nullopt (not tiled) when the walk
/// overshoots interval.hi.
template <Value V>
std::optional<Tiling> greedy_tile(const TilingPlan<V>& plan, IntervalRef interval);

inline constexpr std::size_t kOracleMaxLength = 20;

/// Every partition of `interval` into tiles I_i with i inside the interval,
/// by exhaustive backtracking. Throws std::length_error past kOracleMaxLength.
template <Value V>
std::vector<Tiling> tiling_uniqueness_oracle(const TilingPlan<V>& plan, IntervalRef interval);

/// The partial finite equivalence relation F: classes I_z for witnesses z in
/// the working region with z outside S~ and [s(z), z) tiled.
struct PartialEquivalence {
  /// Sorted by lo.
  std::vector<IntervalRef> classes;
  /// witnesses[k] generates classes[k] (smallest such witness).
  std::vector<std::size_t> witnesses;
  /// Indices with a marker to their left and a full tile of context inside the
  /// interior.
  IntervalRef working;

  /// Membership in dom(F).
  bool contains(std::size_t i) const;
  std::size_t domain_size() const;
  FiniteEquivalence as_relation() const;
};

template <Value V>
PartialEquivalence build_partial_equivalence(const OrbitWindow<V>& window, const TilingPlan<V>& plan,
                                             const SectionSet& section);

/// Re-derives every structural invariant of F independently of the builder.
/// Returns human-readable violations; empty when F is well formed.
template <Value V>
std::vector<std::string> check_partial_equivalence(const PartialEquivalence& relation, const TilingPlan<V>& plan,
                                                   const SectionSet& section);

struct CoverageReport {
  std::size_t interior_size = 0;
  std::size_t working_size = 0;
  /// |working \ (S~ u Z u dom F)|; the inclusion holds iff this is 0.
  std::size_t missing = 0;
  bool inclusion_holds = false;
  /// |working \ dom F| and its masses relative to the working region.
  std::size_t uncovered = 0;
  double uncovered_mass = 0.0;
  double uncovered_f_mass = 0.0;
  double shifted_union_mass = 0.0;
  double fail_set_mass = 0.0;
  /// |interior \ working| / |interior|.
  double boundary_mass = 0.0;
  /// Markers on both sides of the working region.
  bool bi_infinite = false;

  double excluded_total() const { return uncovered_mass + uncovered_f_mass; }
};

template <Value V>
CoverageReport coverage_check(const PartialEquivalence& relation, const TilingPlan<V>& plan,
                              const SectionSet& section, const OrbitWindow<V>& window);

template <Value V>
struct ClassBoundReport {
  /// Minimum class average over witnesses outside Z; empty when there are none.
  std::optional<V> min_average;
  std::size_t classes_checked = 0;
  std::size_t classes_skipped = 0;
  bool holds = true;

  bool applicable() const { return min_average.has_value(); }
};

template <Value V>
ClassBoundReport<V> class_average_bound(const PartialEquivalence& relation, const OrbitWindow<V>& window,
                                        const TilingPlan<V>& plan);

/// CSV "lo,hi,witness", one row per class.
void write_classes_csv(std::ostream& out, const PartialEquivalence& relation);

/// CSV "interval_lo,interval_hi,status,lo,hi,witness". Tiled intervals get one
/// row per tile (one row with empty tile fields when the interval is empty);
/// a not-tiled interval gets a single "not_tiled" row with empty tile fields.
void write_tiling_csv(std::ostream& out, IntervalRef interval, const std::optional<Tiling>& tiling,
                      bool header = true);

}  // namespace orbit_tiler
