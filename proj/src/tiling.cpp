#include "orbit_tiler/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace orbit_tiler {

template <typename T>
RangeMaxTree<T>::RangeMaxTree(const std::vector<T>& values) : size_(values.size()) {
  if (values.empty()) {
    throw std::invalid_argument("range tree over no values");
  }
  while (leaves_ < size_) leaves_ <<= 1;
  tree_.assign(2 * leaves_, values.front());
  for (std::size_t i = 0; i < size_; ++i) tree_[leaves_ + i] = values[i];
  for (std::size_t node = leaves_ - 1; node >= 1; --node) {
    tree_[node] = tree_[2 * node] < tree_[2 * node + 1] ? tree_[2 * node + 1] : tree_[2 * node];
  }
}

template <typename T>
std::size_t RangeMaxTree<T>::rightmost_at_least(std::size_t lo, std::size_t hi, const T& threshold) const {
  if (lo > hi || hi >= size_) return npos;
  return find(1, 0, leaves_ - 1, lo, hi, threshold);
}

template <typename T>
std::size_t RangeMaxTree<T>::find(std::size_t node, std::size_t node_lo, std::size_t node_hi, std::size_t lo,
                                  std::size_t hi, const T& threshold) const {
  if (node_hi < lo || node_lo > hi || tree_[node] < threshold) return npos;
  if (node_lo == node_hi) return node_lo;
  const std::size_t mid = node_lo + (node_hi - node_lo) / 2;
  const std::size_t right = find(2 * node + 1, mid + 1, node_hi, lo, hi, threshold);
  if (right != npos) return right;
  return find(2 * node, node_lo, mid, lo, hi, threshold);
}

template class RangeMaxTree<Rational>;
template class RangeMaxTree<long double>;

// ---------------------------------------------------------------------------

namespace {

template <Value V>
std::vector<Accumulator<V>> shifted_prefix(const OrbitWindow<V>& window, const V& threshold) {
  const auto& prefix = window.prefix_sums();
  std::vector<Accumulator<V>> out;
  out.reserve(prefix.size());
  const Accumulator<V> b(threshold);
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    if constexpr (std::same_as<V, Rational>) {
      out.push_back(prefix[k] - b * Rational(static_cast<unsigned long>(k)));
    } else {
      out.push_back(prefix[k] - b * static_cast<long double>(k));
    }
  }
  return out;
}

}  // namespace

template <Value V>
ThresholdProfile<V>::ThresholdProfile(const OrbitWindow<V>& window, const V& threshold)
    : threshold_(threshold), width_(window.width()), shifted_(shifted_prefix(window, threshold)), tree_(shifted_) {}

template <Value V>
std::size_t ThresholdProfile<V>::reaching_length(std::size_t i, std::size_t L) const {
  if (L == 0 || i + L > width_) {
    throw std::out_of_range("index " + std::to_string(i) + " lacks " + std::to_string(L) + " points of context");
  }
  const std::size_t k = tree_.rightmost_at_least(i + 1, i + L, shifted_[i]);
  return k == RangeMaxTree<Accumulator<V>>::npos ? 0 : k - i;
}

template class ThresholdProfile<Rational>;
template class ThresholdProfile<double>;

// ---------------------------------------------------------------------------

template <Value V>
TilingPlan<V>::TilingPlan(std::size_t max_length, V threshold, std::size_t width, IntervalRef interior,
                          std::vector<std::size_t> lengths, std::vector<bool> fail)
    : max_length_(max_length),
      threshold_(std::move(threshold)),
      width_(width),
      interior_(interior),
      lengths_(std::move(lengths)),
      fail_(std::move(fail)) {
  if (max_length_ == 0) {
    throw std::invalid_argument("tile bound L must be at least 1");
  }
  if (fail_.size() != lengths_.size() || lengths_.size() + max_length_ != width_ + 1) {
    throw std::invalid_argument("tile lengths must cover [0, width - L]");
  }
  for (std::size_t i = 0; i < lengths_.size(); ++i) {
    if (lengths_[i] < 1 || lengths_[i] > max_length_) {
      throw std::invalid_argument("tile length at " + std::to_string(i) + " outside [1, L]");
    }
    if (fail_[i] && lengths_[i] != 1) {
      throw std::invalid_argument("tile length on the fail set must be 1");
    }
  }
}

template <Value V>
std::size_t TilingPlan<V>::length_at(std::size_t i) const {
  if (i >= lengths_.size()) {
    throw std::out_of_range("no tile length at index " + std::to_string(i));
  }
  return lengths_[i];
}

template <Value V>
bool TilingPlan<V>::in_fail_set(std::size_t i) const {
  if (i >= fail_.size()) {
    throw std::out_of_range("no tile length at index " + std::to_string(i));
  }
  return fail_[i];
}

template <Value V>
std::vector<std::size_t> TilingPlan<V>::fail_set() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fail_.size(); ++i) {
    if (fail_[i]) out.push_back(i);
  }
  return out;
}

template class TilingPlan<Rational>;
template class TilingPlan<double>;

template <Value V>
TilingPlan<V> build_tiling_plan(const OrbitWindow<V>& window, const ThresholdProfile<V>& profile, std::size_t L) {
  if (L == 0) {
    throw std::invalid_argument("tile bound L must be at least 1");
  }
  if (L > window.margin()) {
    throw std::invalid_argument("tile bound L = " + std::to_string(L) + " is larger than the window margin " +
                                std::to_string(window.margin()));
  }
  if (profile.width() != window.width()) {
    throw std::invalid_argument("threshold profile belongs to another window");
  }
  const std::size_t n = window.width() - L + 1;
  std::vector<std::size_t> lengths(n, 1);
  std::vector<bool> fail(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t reach = profile.reaching_length(i, L);
    if (reach == 0) {
      fail[i] = true;
    } else {
      lengths[i] = reach;
    }
  }
  return TilingPlan<V>(L, profile.threshold(), window.width(), window.interior(), std::move(lengths),
                       std::move(fail));
}

template <Value V>
TilingPlan<V> build_tiling_plan(const OrbitWindow<V>& window, std::size_t L, const V& threshold) {
  if (L == 0) {
    throw std::invalid_argument("tile bound L must be at least 1");
  }
  if (L > window.margin()) {
    throw std::invalid_argument("tile bound L = " + std::to_string(L) + " is larger than the window margin " +
                                std::to_string(window.margin()));
  }
  return build_tiling_plan(window, ThresholdProfile<V>(window, threshold), L);
}

template TilingPlan<Rational> build_tiling_plan(const OrbitWindow<Rational>&, std::size_t, const Rational&);
template TilingPlan<double> build_tiling_plan(const OrbitWindow<double>&, std::size_t, const double&);
template TilingPlan<Rational> build_tiling_plan(const OrbitWindow<Rational>&, const ThresholdProfile<Rational>&,
                                                std::size_t);
template TilingPlan<double> build_tiling_plan(const OrbitWindow<double>&, const ThresholdProfile<double>&,
                                              std::size_t);

// ---------------------------------------------------------------------------

namespace {

template <Value V>
void check_within_domain(const TilingPlan<V>& plan, IntervalRef interval) {
  if (interval.lo > interval.hi || interval.hi > plan.domain().hi) {
    throw std::out_of_range("interval [" + std::to_string(interval.lo) + ", " + std::to_string(interval.hi) +
                            ") leaves the tiling domain");
  }
}

}  // namespace

template <Value V>
std::optional<Tiling> greedy_tile(const TilingPlan<V>& plan, IntervalRef interval) {
  check_within_domain(plan, interval);
  Tiling tiling{interval, {}};
  std::size_t p = interval.lo;
  while (p < interval.hi) {
    const IntervalRef tile = plan.tile_at(p);
    if (tile.hi > interval.hi) return std::nullopt;
    tiling.tiles.push_back(tile);
    p = tile.hi;
  }
  return tiling;
}

template <Value V>
std::vector<Tiling> tiling_uniqueness_oracle(const TilingPlan<V>& plan, IntervalRef interval) {
  check_within_domain(plan, interval);
  if (interval.size() > kOracleMaxLength) {
    throw std::length_error("exhaustive tiling search is limited to length " + std::to_string(kOracleMaxLength));
  }
  std::vector<Tiling> found;
  std::vector<bool> covered(interval.size(), false);
  std::vector<IntervalRef> chosen;

  // Any tile I_i with lo <= i and I_i inside the interval may cover the first
  // uncovered point; nothing assumes it starts there.
  std::function<void()> search = [&]() {
    const auto first = std::find(covered.begin(), covered.end(), false);
    if (first == covered.end()) {
      Tiling t{interval, chosen};
      std::sort(t.tiles.begin(), t.tiles.end());
      found.push_back(std::move(t));
      return;
    }
    const std::size_t p = interval.lo + static_cast<std::size_t>(first - covered.begin());
    for (std::size_t i = interval.lo; i <= p; ++i) {
      const IntervalRef tile = plan.tile_at(i);
      if (tile.hi <= p || tile.hi > interval.hi) continue;
      bool free = true;
      for (std::size_t j = tile.lo; j < tile.hi; ++j) free = free && !covered[j - interval.lo];
      if (!free) continue;
      for (std::size_t j = tile.lo; j < tile.hi; ++j) covered[j - interval.lo] = true;
      chosen.push_back(tile);
      search();
      chosen.pop_back();
      for (std::size_t j = tile.lo; j < tile.hi; ++j) covered[j - interval.lo] = false;
    }
  };
  search();
  return found;
}

template std::optional<Tiling> greedy_tile(const TilingPlan<Rational>&, IntervalRef);
template std::optional<Tiling> greedy_tile(const TilingPlan<double>&, IntervalRef);
template std::vector<Tiling> tiling_uniqueness_oracle(const TilingPlan<Rational>&, IntervalRef);
template std::vector<Tiling> tiling_uniqueness_oracle(const TilingPlan<double>&, IntervalRef);

// ---------------------------------------------------------------------------

bool PartialEquivalence::contains(std::size_t i) const {
  auto it = std::upper_bound(classes.begin(), classes.end(), i,
                             [](std::size_t x, const IntervalRef& c) { return x < c.lo; });
  return it != classes.begin() && std::prev(it)->contains(i);
}

std::size_t PartialEquivalence::domain_size() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += c.size();
  return n;
}

FiniteEquivalence PartialEquivalence::as_relation() const {
  std::vector<std::vector<PointId>> out;
  out.reserve(classes.size());
  for (const auto& c : classes) {
    std::vector<PointId> members;
    for (std::size_t i = c.lo; i < c.hi; ++i) members.push_back(i);
    out.push_back(std::move(members));
  }
  return FiniteEquivalence(std::move(out));
}

namespace {

template <Value V>
IntervalRef working_region(const TilingPlan<V>& plan, const SectionSet& section) {
  const IntervalRef interior = plan.interior();
  if (section.empty() || interior.hi < plan.max_length() + interior.lo) return {interior.lo, interior.lo};
  const std::size_t hi = interior.hi - plan.max_length() + 1;
  std::size_t lo = std::max(interior.lo, section.markers().front());
  // Start on a landing point of the walk from the last marker at or before lo,
  // so no tile straddles the left edge.
  const auto& markers = section.markers();
  const auto after = std::upper_bound(markers.begin(), markers.end(), lo);
  const std::size_t next = after == markers.end() ? plan.domain().hi : *after;
  std::size_t p = *std::prev(after);
  while (p < lo && p < plan.domain().hi) p += plan.length_at(p);
  lo = std::min(p, next);
  return lo < hi ? IntervalRef{lo, hi} : IntervalRef{interior.lo, interior.lo};
}

}  // namespace

template <Value V>
PartialEquivalence build_partial_equivalence(const OrbitWindow<V>& window, const TilingPlan<V>& plan,
                                             const SectionSet& section) {
  if (plan.width() != window.width() || section.width() != window.width()) {
    throw std::invalid_argument("plan, section and window disagree on the width");
  }
  PartialEquivalence relation;
  relation.working = working_region(plan, section);
  const IntervalRef working = relation.working;
  if (working.empty()) return relation;

  std::vector<std::pair<IntervalRef, std::size_t>> emitted;
  const auto& markers = section.markers();
  for (std::size_t k = 0; k < markers.size() && markers[k] < working.hi; ++k) {
    const std::size_t next = k + 1 < markers.size() ? markers[k + 1] : window.width();
    // Landing points of the greedy walk from s are exactly the z with s(z) = s
    // and [s, z) tiled.
    for (std::size_t p = markers[k]; p < next && p < working.hi; p += plan.length_at(p)) {
      if (p >= working.lo && !section.in_shifted_union(p)) emitted.emplace_back(plan.tile_at(p), p);
    }
  }
  std::sort(emitted.begin(), emitted.end());
  for (const auto& [tile, witness] : emitted) {
    if (!relation.classes.empty() && relation.classes.back() == tile) continue;
    relation.classes.push_back(tile);
    relation.witnesses.push_back(witness);
  }
  return relation;
}

template <Value V>
std::vector<std::string> check_partial_equivalence(const PartialEquivalence& relation, const TilingPlan<V>& plan,
                                                   const SectionSet& section) {
  std::vector<std::string> violations;
  if (relation.classes.size() != relation.witnesses.size()) {
    violations.push_back("class and witness counts differ");
    return violations;
  }
  for (std::size_t k = 0; k < relation.classes.size(); ++k) {
    const IntervalRef c = relation.classes[k];
    const std::size_t z = relation.witnesses[k];
    const std::string where = "class [" + std::to_string(c.lo) + ", " + std::to_string(c.hi) + ")";
    if (k > 0 && relation.classes[k - 1].hi > c.lo) {
      violations.push_back(where + " overlaps its predecessor");
    }
    if (!relation.working.contains(z)) {
      violations.push_back(where + " has a witness outside the working region");
      continue;
    }
    if (c != plan.tile_at(z)) violations.push_back(where + " is not the tile of its witness");
    if (section.in_shifted_union(z)) violations.push_back(where + " has its witness in S~");
    std::size_t s = 0;
    try {
      s = left_marker(section, z);
    } catch (const NoMarkerToTheLeft&) {
      violations.push_back(where + " has no marker to the left of its witness");
      continue;
    }
    if (!greedy_tile(plan, {s, z})) violations.push_back(where + ": [s(z), z) is not tiled");
  }
  return violations;
}

template PartialEquivalence build_partial_equivalence(const OrbitWindow<Rational>&, const TilingPlan<Rational>&,
                                                      const SectionSet&);
template PartialEquivalence build_partial_equivalence(const OrbitWindow<double>&, const TilingPlan<double>&,
                                                      const SectionSet&);
template std::vector<std::string> check_partial_equivalence(const PartialEquivalence&, const TilingPlan<Rational>&,
                                                            const SectionSet&);
template std::vector<std::string> check_partial_equivalence(const PartialEquivalence&, const TilingPlan<double>&,
                                                            const SectionSet&);

// ---------------------------------------------------------------------------

template <Value V>
CoverageReport coverage_check(const PartialEquivalence& relation, const TilingPlan<V>& plan,
                              const SectionSet& section, const OrbitWindow<V>& window) {
  CoverageReport report;
  const IntervalRef interior = window.interior();
  const IntervalRef working = relation.working;
  report.interior_size = interior.size();
  report.working_size = working.size();

  std::size_t in_shifted = 0;
  std::size_t in_fail = 0;
  double uncovered_f = 0.0;
  auto class_it = relation.classes.begin();
  for (std::size_t i = working.lo; i < working.hi; ++i) {
    while (class_it != relation.classes.end() && class_it->hi <= i) ++class_it;
    const bool covered = class_it != relation.classes.end() && class_it->contains(i);
    const bool shifted = section.in_shifted_union(i);
    const bool failed = plan.in_fail_set(i);
    in_shifted += shifted ? 1 : 0;
    in_fail += failed ? 1 : 0;
    if (!covered) {
      ++report.uncovered;
      uncovered_f += std::abs(to_double(window.fval(i)));
      if (!shifted && !failed) ++report.missing;
    }
  }
  report.inclusion_holds = report.missing == 0;
  if (report.working_size > 0) {
    const auto n = static_cast<double>(report.working_size);
    report.uncovered_mass = static_cast<double>(report.uncovered) / n;
    report.uncovered_f_mass = uncovered_f / n;
    report.shifted_union_mass = static_cast<double>(in_shifted) / n;
    report.fail_set_mass = static_cast<double>(in_fail) / n;
  }
  if (report.interior_size > 0) {
    report.boundary_mass = static_cast<double>(report.interior_size - report.working_size) /
                           static_cast<double>(report.interior_size);
  }
  report.bi_infinite = !section.empty() && !working.empty() && section.markers().front() <= working.lo &&
                       section.markers().back() >= working.hi;
  return report;
}

template CoverageReport coverage_check(const PartialEquivalence&, const TilingPlan<Rational>&, const SectionSet&,
                                       const OrbitWindow<Rational>&);
template CoverageReport coverage_check(const PartialEquivalence&, const TilingPlan<double>&, const SectionSet&,
                                       const OrbitWindow<double>&);

template <Value V>
ClassBoundReport<V> class_average_bound(const PartialEquivalence& relation, const OrbitWindow<V>& window,
                                        const TilingPlan<V>& plan) {
  ClassBoundReport<V> report;
  for (std::size_t k = 0; k < relation.classes.size(); ++k) {
    if (plan.in_fail_set(relation.witnesses[k])) {
      ++report.classes_skipped;
      continue;
    }
    const IntervalRef c = relation.classes[k];
    const V average = birkhoff_average(window, c.lo, c.size());
    ++report.classes_checked;
    if (!report.min_average || average < *report.min_average) report.min_average = average;
  }
  report.holds = !report.min_average || *report.min_average >= plan.threshold();
  return report;
}

template ClassBoundReport<Rational> class_average_bound(const PartialEquivalence&, const OrbitWindow<Rational>&,
                                                        const TilingPlan<Rational>&);
template ClassBoundReport<double> class_average_bound(const PartialEquivalence&, const OrbitWindow<double>&,
                                                      const TilingPlan<double>&);

// ---------------------------------------------------------------------------

void write_classes_csv(std::ostream& out, const PartialEquivalence& relation) {
  out << "lo,hi,witness\n";
  for (std::size_t k = 0; k < relation.classes.size(); ++k) {
    out << relation.classes[k].lo << ',' << relation.classes[k].hi << ',' << relation.witnesses[k] << '\n';
  }
}

void write_tiling_csv(std::ostream& out, IntervalRef interval, const std::optional<Tiling>& tiling, bool header) {
  if (header) out << "interval_lo,interval_hi,status,lo,hi,witness\n";
  const auto prefix = std::to_string(interval.lo) + ',' + std::to_string(interval.hi) + ',';
  if (!tiling) {
    out << prefix << "not_tiled,,,\n";
    return;
  }
  if (tiling->tiles.empty()) {
    out << prefix << "tiled,,,\n";
    return;
  }
  for (const auto& t : tiling->tiles) out << prefix << "tiled," << t.lo << ',' << t.hi << ',' << t.lo << '\n';
}

}  // namespace orbit_tiler
