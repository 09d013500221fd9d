#pragma once

#include "orbit_tiler/value.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace orbit_tiler {

using PointId = std::size_t;

class InvalidSystem : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class WindowError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A point of the circle R/Z as a 128-bit binary fraction. Addition wraps
/// modulo 2^128, which is exactly reduction modulo 1.
struct Angle {
  unsigned __int128 raw = 0;

  /// floor(frac(q) * 2^128).
  static Angle from_rational(const Rational& q);
  double to_double() const;
  Rational to_rational() const;

  friend Angle operator+(Angle a, Angle b) { return Angle{a.raw + b.raw}; }
  friend bool operator==(const Angle&, const Angle&) = default;
  friend auto operator<=>(const Angle&, const Angle&) = default;
};

/// A point of the two-sided Bernoulli shift: the sequence drawn from `seed`,
/// read starting at coordinate `offset`.
struct BernoulliPoint {
  std::uint64_t seed = 0;
  std::int64_t offset = 0;

  friend bool operator==(const BernoulliPoint&, const BernoulliPoint&) = default;
};

using StartPoint = std::variant<PointId, Angle, BernoulliPoint>;

// ---------------------------------------------------------------------------
// System descriptions

struct FiniteExactSpec {
  std::vector<std::vector<PointId>> cycles;
  /// Indexed by point id. Empty means uniform.
  std::vector<Rational> weights;
  /// Indexed by point id.
  std::vector<Rational> values;
};

/// coefficient * 1_[lo, hi)
struct StepTerm {
  Rational lo;
  Rational hi;
  double coefficient = 1.0;
};

/// cos_coefficient * cos(2 pi k x) + sin_coefficient * sin(2 pi k x)
struct TrigTerm {
  unsigned frequency = 1;
  double cos_coefficient = 0.0;
  double sin_coefficient = 0.0;
};

struct RotationSpec {
  /// Decimal expansion of alpha with at least 30 significant digits.
  std::string alpha_digits;
  /// Partial quotients a1, a2, ... of alpha = 1/(a1 + 1/(a2 + ...)).
  /// Used when alpha_digits is empty.
  std::vector<std::uint64_t> alpha_continued_fraction;
  std::vector<StepTerm> steps;
  std::vector<TrigTerm> trig;
};

struct BernoulliSpec {
  double p = 0.5;
  std::uint64_t seed = 0;
};

using SystemSpec = std::variant<FiniteExactSpec, RotationSpec, BernoulliSpec>;

inline constexpr std::size_t kMinAlphaDigits = 30;

// ---------------------------------------------------------------------------
// Concrete systems

/// A permutation of finitely many points with an invariant rational measure.
class FiniteSystem {
 public:
  explicit FiniteSystem(FiniteExactSpec spec);

  std::size_t size() const { return next_.size(); }
  const std::vector<std::vector<PointId>>& cycles() const { return cycles_; }
  std::size_t cycle_of(PointId x) const { return cycle_index_.at(x); }
  std::size_t period(PointId x) const { return cycles_[cycle_of(x)].size(); }

  PointId apply(PointId x) const { return next_.at(x); }
  PointId apply_inverse(PointId x) const { return prev_.at(x); }
  PointId iterate(PointId x, std::uint64_t steps) const;

  const Rational& weight(PointId x) const { return weights_.at(x); }
  const Rational& value(PointId x) const { return values_.at(x); }
  const std::vector<Rational>& weights() const { return weights_; }
  const std::vector<Rational>& values() const { return values_; }

  Rational measure(std::span<const PointId> points) const;
  /// T^{-1}A, sorted.
  std::vector<PointId> preimage(std::span<const PointId> points) const;
  Rational integral() const;

 private:
  std::vector<std::vector<PointId>> cycles_;
  std::vector<std::size_t> cycle_index_;
  std::vector<std::size_t> cycle_position_;
  std::vector<PointId> next_;
  std::vector<PointId> prev_;
  std::vector<Rational> weights_;
  std::vector<Rational> values_;
};

/// x -> x + alpha on R/Z with Lebesgue measure and a step/trigonometric
/// observable.
class RotationSystem {
 public:
  explicit RotationSystem(RotationSpec spec);

  Angle alpha() const { return alpha_; }
  /// frac(x + n alpha), computed with one multiplication per index.
  Angle iterate(Angle x, std::uint64_t n) const { return Angle{x.raw + alpha_.raw * n}; }
  double observable(Angle x) const;
  /// Exact space average of the observable.
  double integral() const;
  double max_abs_observable() const;
  const RotationSpec& spec() const { return spec_; }

 private:
  struct Step {
    Angle lo;
    Angle hi;
    bool hi_is_one = false;
    double coefficient = 0.0;
  };

  RotationSpec spec_;
  Angle alpha_;
  std::vector<Step> steps_;
};

/// The left shift on {0,1}^Z with product measure B(p); the observable is the
/// coordinate at 0.
class BernoulliSystem {
 public:
  explicit BernoulliSystem(BernoulliSpec spec);

  double p() const { return spec_.p; }
  std::uint64_t seed() const { return spec_.seed; }
  int coordinate(std::uint64_t seed, std::int64_t index) const;
  double observable(const BernoulliPoint& x) const { return coordinate(x.seed, x.offset); }

 private:
  BernoulliSpec spec_;
};

enum class SystemKind { finite_exact, rotation, bernoulli };

std::string to_string(SystemKind kind);

/// A measure-preserving Z-action together with an observable. Immutable.
class SystemModel {
 public:
  explicit SystemModel(FiniteSystem s) : impl_(std::move(s)) {}
  explicit SystemModel(RotationSystem s) : impl_(std::move(s)) {}
  explicit SystemModel(BernoulliSystem s) : impl_(std::move(s)) {}

  SystemKind kind() const { return static_cast<SystemKind>(impl_.index()); }
  /// Finite systems are periodic; the sampled families are treated as aperiodic.
  bool aperiodic() const { return kind() != SystemKind::finite_exact; }

  const FiniteSystem& finite() const { return std::get<FiniteSystem>(impl_); }
  const RotationSystem& rotation() const { return std::get<RotationSystem>(impl_); }
  const BernoulliSystem& bernoulli() const { return std::get<BernoulliSystem>(impl_); }

  StartPoint advance(const StartPoint& x, std::uint64_t steps) const;
  double observable(const StartPoint& x) const;
  /// Space average of the observable (only meaningful for ergodic models).
  double space_average() const;
  /// Default starting point: id 0, angle 0, or (model seed, offset 0).
  StartPoint default_start() const;

 private:
  std::variant<FiniteSystem, RotationSystem, BernoulliSystem> impl_;
};

SystemModel build_system(const SystemSpec& spec);

/// Validates that `start` is a point of `model`. Throws WindowError.
void check_start(const SystemModel& model, const StartPoint& start);

// ---------------------------------------------------------------------------
// Orbit windows

/// [lo, hi) in window indices, i.e. [T^lo x0, T^hi x0)_T.
struct IntervalRef {
  std::size_t lo = 0;
  std::size_t hi = 0;

  std::size_t size() const { return hi - lo; }
  bool empty() const { return lo == hi; }
  bool contains(std::size_t i) const { return lo <= i && i < hi; }

  friend bool operator==(const IntervalRef&, const IntervalRef&) = default;
  friend auto operator<=>(const IntervalRef&, const IntervalRef&) = default;
};

struct WindowLimits {
  std::size_t max_width = std::size_t{1} << 26;
};

/// W consecutive orbit points T^0 x0 .. T^{W-1} x0 and their observable
/// values. Indices in [margin, W - margin) are interior.
template <Value V>
class OrbitWindow {
 public:
  OrbitWindow(std::shared_ptr<const SystemModel> model, StartPoint start, std::size_t width,
              std::size_t margin, std::vector<V> fvals, bool negated = false);

  const SystemModel& model() const { return *model_; }
  const std::shared_ptr<const SystemModel>& model_ptr() const { return model_; }
  const StartPoint& start() const { return start_; }
  std::size_t width() const { return fvals_.size(); }
  std::size_t margin() const { return margin_; }
  IntervalRef interior() const { return {margin_, width() - margin_}; }
  bool negated() const { return negated_; }

  std::span<const V> fvals() const { return fvals_; }
  const V& fval(std::size_t i) const { return fvals_.at(i); }
  /// T^i x0
  StartPoint point(std::size_t i) const { return model_->advance(start_, i); }

  /// Sum of fvals over an interval, from cached prefix sums.
  Accumulator<V> sum(IntervalRef interval) const;
  const std::vector<Accumulator<V>>& prefix_sums() const { return prefix_; }

  /// The same orbit segment observed through -f.
  OrbitWindow negated_copy() const;

 private:
  std::shared_ptr<const SystemModel> model_;
  StartPoint start_;
  std::size_t margin_;
  bool negated_;
  std::vector<V> fvals_;
  std::vector<Accumulator<V>> prefix_;
};

/// Materializes the window by iterating T from `start`. Exact windows
/// (V = Rational) are available for finite systems only.
template <Value V>
OrbitWindow<V> orbit_window(std::shared_ptr<const SystemModel> model, const StartPoint& start,
                            std::size_t width, std::size_t margin, WindowLimits limits = {});

/// CSV with header "index,fval".
template <Value V>
void write_window_csv(std::ostream& out, const OrbitWindow<V>& window);

extern template class OrbitWindow<Rational>;
extern template class OrbitWindow<double>;

}  // namespace orbit_tiler
