#pragma once

#include "orbit_tiler/averages.hpp"
#include "orbit_tiler/systems.hpp"
#include "orbit_tiler/tiling.hpp"

#include <cstddef>
#include <cstdint>

namespace orbit_tiler {

struct FiniteGenOptions {
  std::size_t min_size = 2;
  std::size_t max_size = 64;
  /// Uniform weights when false; otherwise random weights constant on cycles.
  bool cycle_weights = false;
  /// Forces at least this many cycles (capped by the size).
  std::size_t min_cycles = 1;
};

/// Random permutation of a random number of points with random rational
/// values p/q, |p| <= 20, 1 <= q <= 12. Deterministic in `seed`.
FiniteExactSpec random_finite_spec(std::uint64_t seed, const FiniteGenOptions& options = {});

/// Random partition of {0, ..., size - 1}.
FiniteEquivalence random_equivalence(std::uint64_t seed, std::size_t size);

/// Random tile lengths in [1, L] over `width` indices with a random fail set.
TilingPlan<double> random_plan(std::uint64_t seed, std::size_t width, std::size_t L);

/// Uniform angle from the seed.
Angle random_angle(std::uint64_t seed);

}  // namespace orbit_tiler
