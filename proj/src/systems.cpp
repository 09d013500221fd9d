#include "orbit_tiler/systems.hpp"

#include "orbit_tiler/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

namespace orbit_tiler {

namespace {

const mpz_class& two_pow_128() {
  static const mpz_class value = [] {
    mpz_class v;
    mpz_ui_pow_ui(v.get_mpz_t(), 2, 128);
    return v;
  }();
  return value;
}

unsigned __int128 low_128_bits(const mpz_class& z) {
  const mpz_class mask64 = (mpz_class(1) << 64) - 1;
  const mpz_class lo = z & mask64;
  const mpz_class hi = (z >> 64) & mask64;
  auto to_u64 = [](const mpz_class& v) {
    std::uint64_t out = 0;
    mpz_export(&out, nullptr, -1, sizeof(out), 0, 0, v.get_mpz_t());
    return out;
  };
  return (static_cast<unsigned __int128>(to_u64(hi)) << 64) | to_u64(lo);
}

std::size_t significant_digits(const std::string& digits) {
  std::size_t count = 0;
  bool leading = true;
  for (char c : digits) {
    if (c == 'e' || c == 'E') break;
    if (!std::isdigit(static_cast<unsigned char>(c))) continue;
    if (leading && c == '0') continue;
    leading = false;
    ++count;
  }
  return count;
}

Rational alpha_from_continued_fraction(const std::vector<std::uint64_t>& quotients) {
  Rational tail(0);
  for (auto it = quotients.rbegin(); it != quotients.rend(); ++it) {
    if (*it == 0) {
      throw InvalidSystem("continued fraction partial quotients must be >= 1");
    }
    Rational denom = Rational(static_cast<unsigned long>(*it)) + tail;
    tail = 1 / denom;
    tail.canonicalize();
  }
  return tail;
}

}  // namespace

// ---------------------------------------------------------------------------

Angle Angle::from_rational(const Rational& q) {
  mpz_class fl;
  mpz_fdiv_q(fl.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  const Rational frac = q - Rational(fl);
  mpz_class scaled = frac.get_num() * two_pow_128();
  mpz_class out;
  mpz_fdiv_q(out.get_mpz_t(), scaled.get_mpz_t(), frac.get_den_mpz_t());
  return Angle{low_128_bits(out)};
}

double Angle::to_double() const {
  const auto hi = static_cast<std::uint64_t>(raw >> 64);
  const auto lo = static_cast<std::uint64_t>(raw);
  return std::ldexp(static_cast<double>(hi), -64) + std::ldexp(static_cast<double>(lo), -128);
}

Rational Angle::to_rational() const {
  mpz_class z = (mpz_class(static_cast<unsigned long>(raw >> 64)) << 64) +
                mpz_class(static_cast<unsigned long>(static_cast<std::uint64_t>(raw)));
  Rational q(z, two_pow_128());
  q.canonicalize();
  return q;
}

// ---------------------------------------------------------------------------

FiniteSystem::FiniteSystem(FiniteExactSpec spec) : cycles_(std::move(spec.cycles)) {
  std::size_t n = 0;
  for (const auto& c : cycles_) {
    if (c.empty()) {
      throw InvalidSystem("empty cycle");
    }
    n += c.size();
  }
  if (n == 0) {
    throw InvalidSystem("finite system has no points");
  }
  cycle_index_.assign(n, n);
  cycle_position_.assign(n, 0);
  next_.assign(n, 0);
  prev_.assign(n, 0);
  for (std::size_t k = 0; k < cycles_.size(); ++k) {
    const auto& c = cycles_[k];
    for (std::size_t j = 0; j < c.size(); ++j) {
      const PointId x = c[j];
      if (x >= n) {
        throw InvalidSystem("point id " + std::to_string(x) + " out of range 0.." + std::to_string(n - 1));
      }
      if (cycle_index_[x] != n) {
        throw InvalidSystem("point id " + std::to_string(x) + " appears in more than one cycle position");
      }
      cycle_index_[x] = k;
      cycle_position_[x] = j;
      next_[x] = c[(j + 1) % c.size()];
      prev_[x] = c[(j + c.size() - 1) % c.size()];
    }
  }

  if (spec.weights.empty()) {
    weights_.assign(n, Rational(1, static_cast<unsigned long>(n)));
    for (auto& w : weights_) w.canonicalize();
  } else {
    if (spec.weights.size() != n) {
      throw InvalidSystem("expected " + std::to_string(n) + " weights, got " + std::to_string(spec.weights.size()));
    }
    weights_ = std::move(spec.weights);
    Rational total(0);
    for (const auto& w : weights_) {
      if (w <= 0) {
        throw InvalidSystem("weights must be positive");
      }
      total += w;
    }
    if (total != 1) {
      throw InvalidSystem("weights sum to " + format_value(total) + ", not 1");
    }
    // mu(T^{-1}{x}) = mu({x}) for every point.
    for (PointId x = 0; x < n; ++x) {
      if (weights_[prev_[x]] != weights_[x]) {
        throw InvalidSystem("weights are not constant on the cycle through point " + std::to_string(x) +
                            ": the permutation would not preserve the measure");
      }
    }
  }

  if (spec.values.size() != n) {
    throw InvalidSystem("expected " + std::to_string(n) + " observable values, got " +
                        std::to_string(spec.values.size()));
  }
  values_ = std::move(spec.values);
}

PointId FiniteSystem::iterate(PointId x, std::uint64_t steps) const {
  const auto& c = cycles_[cycle_of(x)];
  return c[(cycle_position_[x] + steps % c.size()) % c.size()];
}

Rational FiniteSystem::measure(std::span<const PointId> points) const {
  std::vector<PointId> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  Rational total(0);
  for (PointId x : sorted) total += weight(x);
  return total;
}

std::vector<PointId> FiniteSystem::preimage(std::span<const PointId> points) const {
  std::vector<PointId> out;
  out.reserve(points.size());
  for (PointId x : points) out.push_back(apply_inverse(x));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Rational FiniteSystem::integral() const {
  Rational total(0);
  for (PointId x = 0; x < size(); ++x) total += weights_[x] * values_[x];
  return total;
}

// ---------------------------------------------------------------------------

RotationSystem::RotationSystem(RotationSpec spec) : spec_(std::move(spec)) {
  Rational alpha;
  if (!spec_.alpha_digits.empty()) {
    if (significant_digits(spec_.alpha_digits) < kMinAlphaDigits) {
      throw InvalidSystem("alpha must be given to at least " + std::to_string(kMinAlphaDigits) +
                          " significant digits or as a continued fraction");
    }
    try {
      alpha = parse_rational(spec_.alpha_digits);
    } catch (const std::invalid_argument& e) {
      throw InvalidSystem(std::string("alpha: ") + e.what());
    }
  } else if (!spec_.alpha_continued_fraction.empty()) {
    alpha = alpha_from_continued_fraction(spec_.alpha_continued_fraction);
  } else {
    throw InvalidSystem("rotation needs alpha digits or a continued fraction");
  }
  if (alpha <= 0 || alpha >= 1) {
    throw InvalidSystem("alpha must lie in (0, 1)");
  }
  alpha_ = Angle::from_rational(alpha);

  for (const auto& s : spec_.steps) {
    if (s.lo < 0 || s.hi > 1 || s.lo >= s.hi) {
      throw InvalidSystem("step interval [" + format_value(s.lo) + ", " + format_value(s.hi) +
                          ") must be a nonempty subinterval of [0, 1)");
    }
    if (!std::isfinite(s.coefficient)) {
      throw InvalidSystem("step coefficient must be finite");
    }
    Step step;
    step.lo = Angle::from_rational(s.lo);
    step.hi_is_one = s.hi == 1;
    if (!step.hi_is_one) step.hi = Angle::from_rational(s.hi);
    step.coefficient = s.coefficient;
    steps_.push_back(step);
  }
  for (const auto& t : spec_.trig) {
    if (!std::isfinite(t.cos_coefficient) || !std::isfinite(t.sin_coefficient)) {
      throw InvalidSystem("trigonometric coefficients must be finite");
    }
  }
}

double RotationSystem::observable(Angle x) const {
  double v = 0.0;
  for (const auto& s : steps_) {
    if (s.lo.raw <= x.raw && (s.hi_is_one || x.raw < s.hi.raw)) v += s.coefficient;
  }
  if (!spec_.trig.empty()) {
    const double t = x.to_double();
    for (const auto& term : spec_.trig) {
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(term.frequency) * t;
      v += term.cos_coefficient * std::cos(phase) + term.sin_coefficient * std::sin(phase);
    }
  }
  return v;
}

double RotationSystem::integral() const {
  double total = 0.0;
  for (const auto& s : spec_.steps) {
    const Rational len = s.hi - s.lo;
    total += s.coefficient * to_double(len);
  }
  for (const auto& t : spec_.trig) {
    if (t.frequency == 0) total += t.cos_coefficient;
  }
  return total;
}

double RotationSystem::max_abs_observable() const {
  double bound = 0.0;
  for (const auto& s : spec_.steps) bound += std::abs(s.coefficient);
  for (const auto& t : spec_.trig) bound += std::abs(t.cos_coefficient) + std::abs(t.sin_coefficient);
  return bound;
}

// ---------------------------------------------------------------------------

BernoulliSystem::BernoulliSystem(BernoulliSpec spec) : spec_(spec) {
  if (!(spec_.p >= 0.0 && spec_.p <= 1.0)) {
    throw InvalidSystem("bernoulli p must lie in [0, 1]");
  }
}

int BernoulliSystem::coordinate(std::uint64_t seed, std::int64_t index) const {
  return counter_uniform(seed, 0, static_cast<std::uint64_t>(index)) < spec_.p ? 1 : 0;
}

// ---------------------------------------------------------------------------

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::finite_exact:
      return "finite";
    case SystemKind::rotation:
      return "rotation";
    case SystemKind::bernoulli:
      return "bernoulli";
  }
  return "unknown";
}

StartPoint SystemModel::advance(const StartPoint& x, std::uint64_t steps) const {
  switch (kind()) {
    case SystemKind::finite_exact:
      return finite().iterate(std::get<PointId>(x), steps);
    case SystemKind::rotation:
      return rotation().iterate(std::get<Angle>(x), steps);
    case SystemKind::bernoulli: {
      auto p = std::get<BernoulliPoint>(x);
      p.offset += static_cast<std::int64_t>(steps);
      return p;
    }
  }
  return x;
}

double SystemModel::observable(const StartPoint& x) const {
  switch (kind()) {
    case SystemKind::finite_exact:
      return to_double(finite().value(std::get<PointId>(x)));
    case SystemKind::rotation:
      return rotation().observable(std::get<Angle>(x));
    case SystemKind::bernoulli:
      return bernoulli().observable(std::get<BernoulliPoint>(x));
  }
  return 0.0;
}

double SystemModel::space_average() const {
  switch (kind()) {
    case SystemKind::finite_exact:
      return to_double(finite().integral());
    case SystemKind::rotation:
      return rotation().integral();
    case SystemKind::bernoulli:
      return bernoulli().p();
  }
  return 0.0;
}

StartPoint SystemModel::default_start() const {
  switch (kind()) {
    case SystemKind::finite_exact:
      return PointId{0};
    case SystemKind::rotation:
      return Angle{};
    case SystemKind::bernoulli:
      return BernoulliPoint{bernoulli().seed(), 0};
  }
  return PointId{0};
}

SystemModel build_system(const SystemSpec& spec) {
  return std::visit([](const auto& s) -> SystemModel {
    using S = std::decay_t<decltype(s)>;
    if constexpr (std::is_same_v<S, FiniteExactSpec>) {
      return SystemModel(FiniteSystem(s));
    } else if constexpr (std::is_same_v<S, RotationSpec>) {
      return SystemModel(RotationSystem(s));
    } else {
      return SystemModel(BernoulliSystem(s));
    }
  }, spec);
}

void check_start(const SystemModel& model, const StartPoint& start) {
  switch (model.kind()) {
    case SystemKind::finite_exact: {
      const auto* id = std::get_if<PointId>(&start);
      if (id == nullptr) throw WindowError("finite system needs a point id as start");
      if (*id >= model.finite().size()) {
        throw WindowError("start id " + std::to_string(*id) + " out of range (system has " +
                          std::to_string(model.finite().size()) + " points)");
      }
      return;
    }
    case SystemKind::rotation:
      if (!std::holds_alternative<Angle>(start)) throw WindowError("rotation needs an angle as start");
      return;
    case SystemKind::bernoulli:
      if (!std::holds_alternative<BernoulliPoint>(start)) {
        throw WindowError("bernoulli shift needs a (seed, offset) start");
      }
      return;
  }
}

// ---------------------------------------------------------------------------

template <Value V>
OrbitWindow<V>::OrbitWindow(std::shared_ptr<const SystemModel> model, StartPoint start, std::size_t width,
                            std::size_t margin, std::vector<V> fvals, bool negated)
    : model_(std::move(model)), start_(start), margin_(margin), negated_(negated), fvals_(std::move(fvals)) {
  if (fvals_.size() != width) {
    throw WindowError("window width does not match its values");
  }
  if (width == 0) {
    throw WindowError("window width must be at least 1");
  }
  if (2 * margin_ > width) {
    throw WindowError("margin " + std::to_string(margin_) + " exceeds half the width " + std::to_string(width));
  }
  prefix_.reserve(width + 1);
  Accumulator<V> running(0);
  prefix_.push_back(running);
  for (const V& v : fvals_) {
    running += v;
    prefix_.push_back(running);
  }
}

template <Value V>
Accumulator<V> OrbitWindow<V>::sum(IntervalRef interval) const {
  if (interval.lo > interval.hi || interval.hi > width()) {
    throw WindowError("interval [" + std::to_string(interval.lo) + ", " + std::to_string(interval.hi) +
                      ") exceeds window of width " + std::to_string(width()));
  }
  Accumulator<V> s = prefix_[interval.hi] - prefix_[interval.lo];
  return s;
}

template <Value V>
OrbitWindow<V> OrbitWindow<V>::negated_copy() const {
  std::vector<V> flipped;
  flipped.reserve(fvals_.size());
  for (const V& v : fvals_) flipped.push_back(V(-v));
  return OrbitWindow(model_, start_, width(), margin_, std::move(flipped), !negated_);
}

template class OrbitWindow<Rational>;
template class OrbitWindow<double>;

template <Value V>
OrbitWindow<V> orbit_window(std::shared_ptr<const SystemModel> model, const StartPoint& start, std::size_t width,
                            std::size_t margin, WindowLimits limits) {
  if (width == 0) {
    throw WindowError("window width must be at least 1");
  }
  if (width > limits.max_width) {
    throw WindowError("window width " + std::to_string(width) + " exceeds the memory budget of " +
                      std::to_string(limits.max_width) + " points");
  }
  if (2 * margin > width) {
    throw WindowError("margin " + std::to_string(margin) + " exceeds half the width " + std::to_string(width));
  }
  check_start(*model, start);

  std::vector<V> fvals;
  fvals.reserve(width);
  switch (model->kind()) {
    case SystemKind::finite_exact: {
      const auto& sys = model->finite();
      const PointId x0 = std::get<PointId>(start);
      const auto& cycle = sys.cycles()[sys.cycle_of(x0)];
      std::size_t pos = static_cast<std::size_t>(std::find(cycle.begin(), cycle.end(), x0) - cycle.begin());
      for (std::size_t i = 0; i < width; ++i) {
        fvals.push_back(value_from<V>(sys.value(cycle[pos])));
        pos = pos + 1 == cycle.size() ? 0 : pos + 1;
      }
      break;
    }
    case SystemKind::rotation:
      if constexpr (std::same_as<V, Rational>) {
        throw InvalidSystem("exact windows are only available for finite systems");
      } else {
        const auto& rot = model->rotation();
        const Angle x0 = std::get<Angle>(start);
        for (std::size_t i = 0; i < width; ++i) fvals.push_back(rot.observable(rot.iterate(x0, i)));
      }
      break;
    case SystemKind::bernoulli:
      if constexpr (std::same_as<V, Rational>) {
        throw InvalidSystem("exact windows are only available for finite systems");
      } else {
        const auto& shift = model->bernoulli();
        const auto x0 = std::get<BernoulliPoint>(start);
        for (std::size_t i = 0; i < width; ++i) {
          fvals.push_back(shift.coordinate(x0.seed, x0.offset + static_cast<std::int64_t>(i)));
        }
      }
      break;
  }
  return OrbitWindow<V>(std::move(model), start, width, margin, std::move(fvals));
}

template OrbitWindow<Rational> orbit_window(std::shared_ptr<const SystemModel>, const StartPoint&, std::size_t,
                                            std::size_t, WindowLimits);
template OrbitWindow<double> orbit_window(std::shared_ptr<const SystemModel>, const StartPoint&, std::size_t,
                                          std::size_t, WindowLimits);

template <Value V>
void write_window_csv(std::ostream& out, const OrbitWindow<V>& window) {
  out << "index,fval\n";
  const auto values = window.fvals();
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << i << ',' << format_value(values[i]) << '\n';
  }
}

template void write_window_csv(std::ostream&, const OrbitWindow<Rational>&);
template void write_window_csv(std::ostream&, const OrbitWindow<double>&);

}  // namespace orbit_tiler
