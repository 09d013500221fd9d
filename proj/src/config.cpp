#include "orbit_tiler/config.hpp"

#include "orbit_tiler/harness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace orbit_tiler {

ConfigError::ConfigError(const std::string& source, std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error(line == 0 ? source + ": " + message
                                   : source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                                         message),
      line_(line),
      column_(column) {}

std::string to_string(Command c) {
  switch (c) {
    case Command::lemma1: return "lemma1";
    case Command::sections: return "sections";
    case Command::tile: return "tile";
    case Command::chain: return "chain";
    case Command::converge: return "converge";
    case Command::condexp: return "condexp";
  }
  return "?";
}

std::optional<Command> parse_command(std::string_view name) {
  for (Command c : {Command::lemma1, Command::sections, Command::tile, Command::chain, Command::converge,
                    Command::condexp}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

std::size_t ExperimentConfig::resolved_margin() const {
  return margin ? *margin : std::min(cap, width / 8);
}

namespace {

struct Entry {
  std::string value;
  std::size_t line = 0;
  std::size_t column = 0;
};

using Entries = std::map<std::string, Entry>;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"system", {"kind", "alpha", "alpha_cf", "steps", "trig", "p", "seed", "cycles", "weights", "values"}},
      {"window", {"width", "margin", "start"}},
      {"section", {"density"}},
      {"thresholds", {"a", "b", "delta", "epsilon", "L", "cap"}},
      {"run", {"command", "arithmetic", "seed", "starts", "n_grid", "relations", "windows", "spot_checks",
               "tolerance", "jobs", "out"}},
  };
  return keys;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    const auto piece = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

class Reader {
 public:
  Reader(const std::string& source, const Entries& entries) : source_(source), entries_(entries) {}

  const Entry* find(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  [[noreturn]] void fail(const Entry& e, const std::string& message) const {
    throw ConfigError(source_, e.line, e.column, message);
  }

  template <typename Fn>
  auto convert(const Entry& e, const std::string& key, Fn&& fn) const {
    try {
      return fn(e.value);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& ex) {
      fail(e, key + ": " + ex.what());
    }
  }

  std::uint64_t unsigned_at(const Entry& e, const std::string& key) const {
    std::uint64_t v = 0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) fail(e, key + " must be a non-negative integer, got '" + e.value + "'");
    return v;
  }

  std::optional<std::uint64_t> unsigned_value(const std::string& key) const {
    const Entry* e = find(key);
    if (e == nullptr) return std::nullopt;
    return unsigned_at(*e, key);
  }

  std::optional<std::size_t> positive(const std::string& key) const {
    auto v = unsigned_value(key);
    if (v && *v == 0) fail(*find(key), key + " must be positive");
    return v;
  }

  std::optional<double> real(const std::string& key) const {
    const Entry* e = find(key);
    if (e == nullptr) return std::nullopt;
    double v = 0.0;
    const char* first = e->value.data();
    const char* last = first + e->value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) fail(*e, key + " must be a number, got '" + e->value + "'");
    return v;
  }

  std::optional<Rational> rational(const std::string& key) const {
    const Entry* e = find(key);
    if (e == nullptr) return std::nullopt;
    return convert(*e, key, [](const std::string& s) { return parse_rational(s); });
  }

 private:
  const std::string& source_;
  const Entries& entries_;
};

void assign(Entries& entries, const std::string& source, const std::string& section, const std::string& key,
            Entry entry, std::size_t key_column) {
  const auto& keys = known_keys();
  auto sec = keys.find(section);
  if (sec == keys.end()) {
    throw ConfigError(source, entry.line, 1, "unknown section [" + section + "]");
  }
  if (!sec->second.count(key)) {
    throw ConfigError(source, entry.line, key_column, "unknown key '" + key + "' in [" + section + "]");
  }
  entries[section + "." + key] = std::move(entry);
}

Entries scan(std::string_view text, const std::string& source) {
  Entries entries;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view raw = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    const auto body = trim(raw);
    if (body.empty()) {
      if (eol == text.size()) break;
      continue;
    }
    const std::size_t indent = static_cast<std::size_t>(body.data() - raw.data());
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(source, line_no, indent + 1, "unterminated section header");
      section = std::string(trim(body.substr(1, body.size() - 2)));
      if (!known_keys().count(section)) {
        throw ConfigError(source, line_no, indent + 2, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source, line_no, indent + 1, "expected 'key = value'");
    }
    if (section.empty()) {
      throw ConfigError(source, line_no, indent + 1, "key outside of any [section]");
    }
    const std::string key(trim(body.substr(0, eq)));
    const auto value_part = body.substr(eq + 1);
    const auto value = trim(value_part);
    if (key.empty()) throw ConfigError(source, line_no, indent + 1, "empty key");
    const std::size_t value_column =
        indent + eq + 2 + static_cast<std::size_t>(value.data() - value_part.data());
    if (value.empty()) throw ConfigError(source, line_no, value_column, "missing value for '" + key + "'");
    if (entries.count(section + "." + key)) {
      throw ConfigError(source, line_no, indent + 1, "duplicate key '" + key + "'");
    }
    assign(entries, source, section, key, Entry{std::string(value), line_no, value_column}, indent + 1);
    if (eol == text.size()) break;
  }
  return entries;
}

void apply_overrides(Entries& entries, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("--set", 0, 0, "override must look like section.key=value, got '" + o + "'");
    }
    const std::string section(trim(std::string_view(o).substr(0, dot)));
    const std::string key(trim(std::string_view(o).substr(dot + 1, eq - dot - 1)));
    const std::string value(trim(std::string_view(o).substr(eq + 1)));
    if (value.empty()) throw ConfigError("--set", 0, 0, "missing value in '" + o + "'");
    const auto& keys = known_keys();
    auto sec = keys.find(section);
    if (sec == keys.end() || !sec->second.count(key)) {
      throw ConfigError("--set", 0, 0, "unknown key '" + section + "." + key + "'");
    }
    entries[section + "." + key] = Entry{value, 0, 0};
  }
}

std::vector<std::size_t> parse_ids(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& w : words(s)) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size()) throw std::invalid_argument("bad point id '" + w + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<Rational> parse_rationals(const std::string& s) {
  std::vector<Rational> out;
  for (const auto& w : words(s)) out.push_back(parse_rational(w));
  return out;
}

double parse_double(const std::string& w) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
  if (ec != std::errc() || ptr != w.data() + w.size()) throw std::invalid_argument("bad number '" + w + "'");
  return v;
}

SystemSpec parse_system(const Reader& r, const std::string& source) {
  const Entry* kind = r.find("system.kind");
  if (kind == nullptr) throw ConfigError(source, 0, 0, "[system] needs a kind");

  auto reject = [&r](std::initializer_list<const char*> keys, const std::string& kind_name) {
    for (const char* k : keys) {
      if (const Entry* e = r.find(std::string("system.") + k)) {
        r.fail(*e, std::string("key '") + k + "' does not apply to kind " + kind_name);
      }
    }
  };

  if (kind->value == "finite") {
    reject({"alpha", "alpha_cf", "steps", "trig", "p", "seed"}, "finite");
    FiniteExactSpec spec;
    const Entry* cycles = r.find("system.cycles");
    const Entry* values = r.find("system.values");
    if (cycles == nullptr) r.fail(*kind, "finite system needs cycles");
    if (values == nullptr) r.fail(*kind, "finite system needs values");
    spec.cycles = r.convert(*cycles, "cycles", [](const std::string& s) {
      std::vector<std::vector<PointId>> out;
      for (const auto& c : split(s, ';')) out.push_back(parse_ids(c));
      return out;
    });
    spec.values = r.convert(*values, "values", parse_rationals);
    if (const Entry* w = r.find("system.weights"); w != nullptr && w->value != "uniform") {
      spec.weights = r.convert(*w, "weights", parse_rationals);
    }
    try {
      FiniteSystem check(spec);
    } catch (const InvalidSystem& e) {
      r.fail(*cycles, e.what());
    }
    return spec;
  }
  if (kind->value == "rotation") {
    reject({"cycles", "weights", "values", "p", "seed"}, "rotation");
    RotationSpec spec;
    const Entry* alpha = r.find("system.alpha");
    const Entry* cf = r.find("system.alpha_cf");
    if ((alpha == nullptr) == (cf == nullptr)) r.fail(*kind, "rotation needs exactly one of alpha, alpha_cf");
    if (alpha) spec.alpha_digits = alpha->value;
    if (cf) spec.alpha_continued_fraction = r.convert(*cf, "alpha_cf", parse_partial_quotients);
    if (const Entry* steps = r.find("system.steps")) {
      spec.steps = r.convert(*steps, "steps", [](const std::string& s) {
        std::vector<StepTerm> out;
        for (const auto& term : split(s, ';')) {
          const auto w = words(term);
          if (w.size() != 3) throw std::invalid_argument("step term needs 'lo hi coefficient'");
          out.push_back(StepTerm{parse_rational(w[0]), parse_rational(w[1]), parse_double(w[2])});
        }
        return out;
      });
    }
    if (const Entry* trig = r.find("system.trig")) {
      spec.trig = r.convert(*trig, "trig", [](const std::string& s) {
        std::vector<TrigTerm> out;
        for (const auto& term : split(s, ';')) {
          const auto w = words(term);
          if (w.size() != 3) throw std::invalid_argument("trig term needs 'frequency cos sin'");
          const auto k = parse_ids(w[0]);
          out.push_back(TrigTerm{static_cast<unsigned>(k.at(0)), parse_double(w[1]), parse_double(w[2])});
        }
        return out;
      });
    }
    if (spec.steps.empty() && spec.trig.empty()) r.fail(*kind, "rotation needs steps or trig terms");
    try {
      RotationSystem check(spec);
    } catch (const InvalidSystem& e) {
      r.fail(alpha ? *alpha : cf ? *cf : *kind, e.what());
    }
    return spec;
  }
  if (kind->value == "bernoulli") {
    reject({"cycles", "weights", "values", "alpha", "alpha_cf", "steps", "trig"}, "bernoulli");
    BernoulliSpec spec;
    if (auto p = r.real("system.p")) spec.p = *p;
    if (auto s = r.unsigned_value("system.seed")) spec.seed = *s;
    if (!(spec.p >= 0.0 && spec.p <= 1.0)) r.fail(*r.find("system.p"), "p must lie in [0, 1]");
    return spec;
  }
  r.fail(*kind, "unknown system kind '" + kind->value + "' (finite, rotation, bernoulli)");
}

}  // namespace

std::vector<std::uint64_t> parse_partial_quotients(std::string_view text) {
  std::vector<std::uint64_t> out;
  for (const auto& w : words(text)) {
    const auto star = w.find('*');
    const auto number = [](std::string_view s) {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) {
        throw std::invalid_argument("bad partial quotient '" + std::string(s) + "'");
      }
      return v;
    };
    if (star == std::string::npos) {
      out.push_back(number(w));
    } else {
      const auto value = number(std::string_view(w).substr(0, star));
      const auto count = number(std::string_view(w).substr(star + 1));
      if (count > 100000) throw std::invalid_argument("repeat count too large");
      out.insert(out.end(), count, value);
    }
  }
  if (out.empty()) throw std::invalid_argument("empty continued fraction");
  return out;
}

ExperimentConfig parse_config(std::string_view text, const std::string& source,
                              const std::vector<std::string>& overrides) {
  Entries entries = scan(text, source);
  apply_overrides(entries, overrides);
  const Reader r(source, entries);

  ExperimentConfig c;
  c.source = source;
  if (const Entry* e = r.find("run.command")) {
    c.command = parse_command(e->value);
    if (!c.command) r.fail(*e, "unknown command '" + e->value + "'");
  }
  if (r.find("system.kind")) {
    c.system = parse_system(r, source);
  } else {
    for (const auto& [key, entry] : entries) {
      if (key.rfind("system.", 0) == 0) r.fail(entry, "[system] needs a kind");
    }
  }
  c.arithmetic = c.system && std::holds_alternative<FiniteExactSpec>(*c.system) ? Arithmetic::exact
                                                                               : Arithmetic::binary64;
  if (const Entry* e = r.find("run.arithmetic")) {
    if (e->value == "exact") {
      c.arithmetic = Arithmetic::exact;
    } else if (e->value == "binary64") {
      c.arithmetic = Arithmetic::binary64;
    } else {
      r.fail(*e, "arithmetic must be exact or binary64");
    }
  }

  if (const Entry* e = r.find("window.width")) {
    if (!e->value.empty() && e->value.front() == '-') r.fail(*e, "width must be positive, got " + e->value);
  }
  if (auto v = r.positive("window.width")) c.width = *v;
  if (auto v = r.unsigned_value("window.margin")) c.margin = *v;
  if (const Entry* e = r.find("window.start"); e != nullptr && e->value != "random") c.start = e->value;

  if (const Entry* e = r.find("section.density"); e != nullptr && e->value != "auto") {
    c.density = r.real("section.density");
    if (!(*c.density > 0.0 && *c.density < 1.0)) r.fail(*e, "density must lie in (0, 1)");
  }

  c.a = r.rational("thresholds.a");
  c.b = r.rational("thresholds.b");
  c.delta = r.rational("thresholds.delta");
  if (auto eps = r.rational("thresholds.epsilon")) {
    if (*eps <= 0) r.fail(*r.find("thresholds.epsilon"), "epsilon must be positive");
    c.epsilon = *eps;
  } else if (c.delta) {
    c.epsilon = ergodic_epsilon<Rational>(*c.delta);
  }
  if (c.delta && !c.b) c.b = c.delta;
  if (const Entry* e = r.find("thresholds.L"); e != nullptr && e->value != "auto") c.L = r.positive("thresholds.L");
  if (auto v = r.positive("thresholds.cap")) c.cap = *v;

  if (auto v = r.unsigned_value("run.seed")) c.seed = *v;
  if (auto v = r.positive("run.starts")) c.starts = *v;
  if (const Entry* e = r.find("run.n_grid")) {
    c.n_grid = r.convert(*e, "n_grid", parse_ids);
    if (c.n_grid.empty() || c.n_grid.front() == 0 || !std::is_sorted(c.n_grid.begin(), c.n_grid.end())) {
      r.fail(*e, "n_grid must be nonempty, positive and ascending");
    }
  }
  if (auto v = r.positive("run.relations")) c.relations = *v;
  if (auto v = r.positive("run.windows")) c.windows = *v;
  if (auto v = r.unsigned_value("run.spot_checks")) c.spot_checks = *v;
  if (auto v = r.real("run.tolerance")) {
    if (!(*v >= 0.0)) r.fail(*r.find("run.tolerance"), "tolerance must be non-negative");
    c.tolerance = *v;
  }
  if (auto v = r.positive("run.jobs")) c.jobs = *v;
  if (const Entry* e = r.find("run.out")) c.out = e->value;

  // cross-field checks, reported at the most relevant key
  if (c.margin && 2 * *c.margin >= c.width) {
    r.fail(*r.find("window.margin"), "margin must be less than half the width");
  }
  if (c.L && *c.L > c.resolved_margin()) {
    r.fail(*r.find("thresholds.L"), "L exceeds the window margin " + std::to_string(c.resolved_margin()));
  }
  if (c.delta) {
    const Entry& at = *r.find("thresholds.delta");
    if (*c.delta <= 0) r.fail(at, "delta must be positive");
    if (*c.b != *c.delta) r.fail(at, "ergodic-style runs need b = delta");
    if (c.epsilon != ergodic_epsilon<Rational>(*c.delta)) r.fail(at, "ergodic-style runs need epsilon = min(delta, 1)/8");
  }
  if (c.a) {
    const Entry& at = *r.find("thresholds.a");
    if (!c.b) r.fail(at, "two-sided runs need b as well as a");
    if (!(*c.a < *c.b)) r.fail(at, "two-sided runs need a < b");
    if (!two_sided_budget_holds<Rational>(*c.a, *c.b, c.epsilon, Rational(1))) {
      r.fail(at, "budget (b - a) mu(X) > 2 epsilon (|a| + |b| + 2) fails");
    }
  }
  validate_config(c);
  return c;
}

void validate_config(const ExperimentConfig& c) {
  auto fail = [&c](const std::string& m) { throw ConfigError(c.source, 0, 0, m); };
  if (c.width == 0) fail("width must be positive");
  if (2 * c.resolved_margin() >= c.width) fail("margin must be less than half the width");
  if (c.epsilon <= 0) fail("epsilon must be positive");
  if (c.cap == 0) fail("cap must be positive");
  if (c.a && c.b && !two_sided_budget_holds<Rational>(*c.a, *c.b, c.epsilon, Rational(1))) {
    fail("budget (b - a) mu(X) > 2 epsilon (|a| + |b| + 2) fails");
  }
  if (c.arithmetic == Arithmetic::exact && c.system && !std::holds_alternative<FiniteExactSpec>(*c.system)) {
    fail("exact arithmetic needs a finite system");
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), 0, 0, "cannot open config file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string(), overrides);
}

}  // namespace orbit_tiler
