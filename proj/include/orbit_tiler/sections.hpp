#pragma once

#include "orbit_tiler/systems.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace orbit_tiler {

class NoMarkerToTheLeft : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A marker set S in one window together with the L points preceding each
/// marker, S~ = (S - 1) u ... u (S - L), truncated to the window.
class SectionSet {
 public:
  SectionSet(std::vector<std::size_t> markers, std::size_t gap, std::size_t width);

  const std::vector<std::size_t>& markers() const { return markers_; }
  const std::vector<std::size_t>& shifted_union() const { return shifted_union_; }
  std::size_t gap() const { return gap_; }
  std::size_t width() const { return width_; }
  double density() const { return static_cast<double>(markers_.size()) / static_cast<double>(width_); }
  bool empty() const { return markers_.empty(); }

  bool contains(std::size_t i) const;
  bool in_shifted_union(std::size_t i) const;

 private:
  std::vector<std::size_t> markers_;
  std::vector<std::size_t> shifted_union_;
  std::size_t gap_;
  std::size_t width_;
};

struct GapStats {
  /// Sorted distances between consecutive markers.
  std::vector<std::size_t> gaps;
  std::map<std::size_t, std::size_t> histogram;
  std::size_t min_gap = 0;
  std::size_t max_gap = 0;
  double mean_gap = 0.0;
  /// Some consecutive pair x < y has y - x >= L.
  bool has_gap_bigger_than_L = false;
};

enum class DensityPolicy {
  strict,      // density in (0, 1)
  degenerate,  // density in [0, 1], for limit checks
};

/// S0: every index of [0, width) included independently with probability
/// `density`, drawn from the counter stream of `seed`. Candidates cover the
/// margins as well as the interior so that interior points find a marker to
/// their left.
std::vector<std::size_t> generate_candidate_section(std::size_t width, double density, std::uint64_t seed,
                                                    DensityPolicy policy = DensityPolicy::strict);

template <Value V>
std::vector<std::size_t> generate_candidate_section(const OrbitWindow<V>& window, double density, std::uint64_t seed,
                                                    DensityPolicy policy = DensityPolicy::strict) {
  return generate_candidate_section(window.width(), density, seed, policy);
}

/// S = S0 \ (T^{-1}S0 u ... u T^{-L}S0): the candidates with no other
/// candidate among their next L successors. Candidates closer than L+1 to the
/// right edge have no context and are dropped.
SectionSet sparsify(std::span<const std::size_t> candidates, std::size_t L, std::size_t width);

/// Throws std::invalid_argument with fewer than two markers.
GapStats gap_statistics(const SectionSet& section);

/// s(x): the closest marker at or before x.
std::size_t left_marker(const SectionSet& section, std::size_t x);

/// Fraction of sections with at least one marker; the empirical stand-in for
/// the measure of the saturation [S]_T.
double saturation_mass(std::span<const SectionSet> sections);

void write_section_csv(std::ostream& out, const SectionSet& section);
void write_gap_histogram_csv(std::ostream& out, const GapStats& stats);

}  // namespace orbit_tiler
