#include "orbit_tiler/generators.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace orbit_tiler {

FiniteExactSpec random_finite_spec(std::uint64_t seed, const FiniteGenOptions& options) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  const std::size_t n = uniform(options.min_size, options.max_size);
  std::vector<PointId> order(n);
  std::iota(order.begin(), order.end(), PointId{0});
  std::shuffle(order.begin(), order.end(), rng);

  // cut points split the shuffled order into cycles
  const std::size_t want = std::min(n, std::max<std::size_t>(options.min_cycles, uniform(1, std::max<std::size_t>(1, n / 2))));
  std::vector<std::size_t> cuts(n - 1);
  std::iota(cuts.begin(), cuts.end(), std::size_t{1});
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(want - 1);
  cuts.push_back(0);
  cuts.push_back(n);
  std::sort(cuts.begin(), cuts.end());

  FiniteExactSpec spec;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    spec.cycles.emplace_back(order.begin() + cuts[k], order.begin() + cuts[k + 1]);
  }

  std::uniform_int_distribution<long> numerator(-20, 20);
  std::uniform_int_distribution<unsigned long> denominator(1, 12);
  spec.values.resize(n);
  for (auto& v : spec.values) {
    v = Rational(numerator(rng), denominator(rng));
    v.canonicalize();
  }

  if (options.cycle_weights) {
    std::vector<Rational> per_cycle;
    Rational total(0);
    for (const auto& c : spec.cycles) {
      per_cycle.emplace_back(static_cast<unsigned long>(denominator(rng)));
      total += per_cycle.back() * static_cast<unsigned long>(c.size());
    }
    spec.weights.resize(n);
    for (std::size_t k = 0; k < spec.cycles.size(); ++k) {
      const Rational w = per_cycle[k] / total;
      for (PointId x : spec.cycles[k]) spec.weights[x] = w;
    }
  }
  return spec;
}

FiniteEquivalence random_equivalence(std::uint64_t seed, std::size_t size) {
  std::mt19937_64 rng(seed);
  std::vector<PointId> order(size);
  std::iota(order.begin(), order.end(), PointId{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<PointId>> classes;
  std::size_t pos = 0;
  while (pos < size) {
    const std::size_t len = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(size - pos, 8))(rng);
    classes.emplace_back(order.begin() + pos, order.begin() + pos + len);
    pos += len;
  }
  return FiniteEquivalence(std::move(classes));
}

TilingPlan<double> random_plan(std::uint64_t seed, std::size_t width, std::size_t L) {
  std::mt19937_64 rng(seed);
  const std::size_t domain = width - L + 1;
  std::vector<std::size_t> lengths(domain);
  std::vector<bool> fail(domain, false);
  std::uniform_int_distribution<std::size_t> length(1, L);
  std::bernoulli_distribution in_z(0.2);
  for (std::size_t i = 0; i < domain; ++i) {
    if (in_z(rng)) {
      fail[i] = true;
      lengths[i] = 1;
    } else {
      lengths[i] = length(rng);
    }
  }
  return TilingPlan<double>(L, 0.0, width, IntervalRef{0, width}, std::move(lengths), std::move(fail));
}

Angle random_angle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const unsigned __int128 hi = rng();
  const unsigned __int128 lo = rng();
  return Angle{(hi << 64) | lo};
}

}  // namespace orbit_tiler
