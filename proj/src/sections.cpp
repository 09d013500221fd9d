#include "orbit_tiler/sections.hpp"

#include "orbit_tiler/random.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace orbit_tiler {

namespace {

constexpr std::uint64_t kCandidateStream = 0xca4d1da7e5ULL;

}  // namespace

SectionSet::SectionSet(std::vector<std::size_t> markers, std::size_t gap, std::size_t width)
    : markers_(std::move(markers)), gap_(gap), width_(width) {
  if (width_ == 0) {
    throw std::invalid_argument("section over an empty window");
  }
  if (!std::is_sorted(markers_.begin(), markers_.end()) ||
      std::adjacent_find(markers_.begin(), markers_.end()) != markers_.end()) {
    throw std::invalid_argument("section markers must be strictly increasing");
  }
  if (!markers_.empty() && markers_.back() >= width_) {
    throw std::invalid_argument("section marker outside the window");
  }
  for (std::size_t m : markers_) {
    const std::size_t lo = m >= gap_ ? m - gap_ : 0;
    for (std::size_t y = lo; y < m; ++y) shifted_union_.push_back(y);
  }
  std::sort(shifted_union_.begin(), shifted_union_.end());
  shifted_union_.erase(std::unique(shifted_union_.begin(), shifted_union_.end()), shifted_union_.end());
}

bool SectionSet::contains(std::size_t i) const {
  return std::binary_search(markers_.begin(), markers_.end(), i);
}

bool SectionSet::in_shifted_union(std::size_t i) const {
  return std::binary_search(shifted_union_.begin(), shifted_union_.end(), i);
}

std::vector<std::size_t> generate_candidate_section(std::size_t width, double density, std::uint64_t seed,
                                                    DensityPolicy policy) {
  const bool ok = policy == DensityPolicy::strict ? (density > 0.0 && density < 1.0)
                                                  : (density >= 0.0 && density <= 1.0);
  if (!ok) {
    throw std::invalid_argument("section density " + std::to_string(density) + " out of range");
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < width; ++i) {
    if (counter_uniform(seed, kCandidateStream, i) < density) out.push_back(i);
  }
  return out;
}

SectionSet sparsify(std::span<const std::size_t> candidates, std::size_t L, std::size_t width) {
  if (L == 0) {
    throw std::invalid_argument("sparsify needs L >= 1");
  }
  std::vector<std::size_t> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const std::size_t x = sorted[k];
    if (x >= width || x + L >= width) break;
    const bool crowded = k + 1 < sorted.size() && sorted[k + 1] <= x + L;
    if (!crowded) kept.push_back(x);
  }
  return SectionSet(std::move(kept), L, width);
}

GapStats gap_statistics(const SectionSet& section) {
  const auto& s = section.markers();
  if (s.size() < 2) {
    throw std::invalid_argument("gap statistics need at least two markers");
  }
  GapStats stats;
  for (std::size_t k = 1; k < s.size(); ++k) stats.gaps.push_back(s[k] - s[k - 1]);
  std::sort(stats.gaps.begin(), stats.gaps.end());
  for (std::size_t g : stats.gaps) ++stats.histogram[g];
  stats.min_gap = stats.gaps.front();
  stats.max_gap = stats.gaps.back();
  stats.mean_gap = static_cast<double>(s.back() - s.front()) / static_cast<double>(stats.gaps.size());
  stats.has_gap_bigger_than_L = stats.max_gap >= section.gap();
  return stats;
}

std::size_t left_marker(const SectionSet& section, std::size_t x) {
  const auto& s = section.markers();
  auto it = std::upper_bound(s.begin(), s.end(), x);
  if (it == s.begin()) {
    throw NoMarkerToTheLeft("no marker at or before index " + std::to_string(x));
  }
  return *std::prev(it);
}

double saturation_mass(std::span<const SectionSet> sections) {
  if (sections.empty()) {
    throw std::invalid_argument("saturation mass of an empty collection");
  }
  const auto hit = std::count_if(sections.begin(), sections.end(), [](const SectionSet& s) { return !s.empty(); });
  return static_cast<double>(hit) / static_cast<double>(sections.size());
}

void write_section_csv(std::ostream& out, const SectionSet& section) {
  out << "index\n";
  for (std::size_t m : section.markers()) out << m << '\n';
}

void write_gap_histogram_csv(std::ostream& out, const GapStats& stats) {
  out << "gap,count\n";
  for (const auto& [gap, count] : stats.histogram) out << gap << ',' << count << '\n';
}

}  // namespace orbit_tiler
