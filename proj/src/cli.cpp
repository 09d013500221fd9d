#include "orbit_tiler/cli.hpp"

#include "orbit_tiler/averages.hpp"
#include "orbit_tiler/generators.hpp"
#include "orbit_tiler/harness.hpp"
#include "orbit_tiler/random.hpp"
#include "orbit_tiler/sections.hpp"
#include "orbit_tiler/tiling.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <unistd.h>

namespace orbit_tiler {

namespace {

/// Runs fn(0..n-1) over up to `jobs` threads. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_lock;
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < jobs; ++t) {
    workers.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard<std::mutex> guard(error_lock);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

/// Prefixes every data row of a CSV with "label," and the header with "column,".
std::string prefix_rows(const std::string& csv, const std::string& column, const std::string& label,
                        bool keep_header) {
  std::istringstream in(csv);
  std::string out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      if (keep_header) out += column + ',' + line + '\n';
      continue;
    }
    out += label + ',' + line + '\n';
  }
  return out;
}

class Report {
 public:
  void line(const std::string& text) { text_ += text + '\n'; }
  void check(const std::string& what, bool pass) {
    line(std::string(pass ? "PASS " : "FAIL ") + what);
    all_pass_ = all_pass_ && pass;
  }
  bool all_pass() const { return all_pass_; }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
  bool all_pass_ = true;
};

[[noreturn]] void config_fail(const ExperimentConfig& c, const std::string& message) {
  throw ConfigError(c.source, 0, 0, message);
}

std::shared_ptr<const SystemModel> require_model(const ExperimentConfig& c) {
  if (!c.system) config_fail(c, to_string(*c.command) + " needs a [system]");
  try {
    return std::make_shared<const SystemModel>(build_system(*c.system));
  } catch (const InvalidSystem& e) {
    config_fail(c, e.what());
  }
}

StartPoint parse_start(const ExperimentConfig& c, const SystemModel& model, const std::string& text) {
  try {
    switch (model.kind()) {
      case SystemKind::finite_exact: {
        std::size_t id = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), id);
        if (ec != std::errc() || ptr != text.data() + text.size()) throw std::invalid_argument("bad point id");
        return PointId{id};
      }
      case SystemKind::rotation:
        return Angle::from_rational(parse_rational(text));
      case SystemKind::bernoulli: {
        const auto colon = text.find(':');
        BernoulliPoint p{model.bernoulli().seed(), 0};
        std::string offset = text;
        if (colon != std::string::npos) {
          p.seed = std::stoull(text.substr(0, colon));
          offset = text.substr(colon + 1);
        }
        std::size_t used = 0;
        p.offset = std::stoll(offset, &used);
        if (used != offset.size()) throw std::invalid_argument("bad offset");
        return p;
      }
    }
  } catch (const std::exception& e) {
    config_fail(c, "start '" + text + "': " + e.what());
  }
  return PointId{0};
}

/// Explicit start advanced by k windows, or a seeded random point.
StartPoint window_start(const ExperimentConfig& c, const SystemModel& model, std::size_t k, std::size_t stride) {
  if (c.start) return model.advance(parse_start(c, model, *c.start), static_cast<std::uint64_t>(k) * stride);
  const std::uint64_t s = derive_seed(c.seed, 2 * k);
  switch (model.kind()) {
    case SystemKind::finite_exact:
      return PointId{static_cast<std::size_t>(s % model.finite().size())};
    case SystemKind::rotation:
      return random_angle(s);
    case SystemKind::bernoulli:
      return BernoulliPoint{s, 0};
  }
  return PointId{0};
}

std::uint64_t section_seed(const ExperimentConfig& c, std::size_t k) { return derive_seed(c.seed, 2 * k + 1); }

template <Value V>
V threshold(const Rational& q) {
  return value_from<V>(q);
}

template <Value V>
OrbitWindow<V> make_window(const ExperimentConfig& c, const std::shared_ptr<const SystemModel>& model,
                           std::size_t k) {
  try {
    return orbit_window<V>(model, window_start(c, *model, k, c.width), c.width, c.resolved_margin());
  } catch (const WindowError& e) {
    config_fail(c, e.what());
  } catch (const InvalidSystem& e) {
    config_fail(c, e.what());
  }
}

void header(Report& r, const ExperimentConfig& c) {
  r.line("command " + to_string(*c.command));
  r.line("seed " + std::to_string(c.seed));
  if (c.system) r.line("system " + to_string(build_system(*c.system).kind()));
  r.line(std::string("arithmetic ") + (c.arithmetic == Arithmetic::exact ? "exact" : "binary64"));
}

// ---------------------------------------------------------------------------

RunOutput run_lemma1(const ExperimentConfig& c) {
  struct Job {
    std::string row;
    bool pass = false;
  };
  std::vector<Job> jobs(c.relations);
  std::optional<FiniteSystem> fixed;
  if (c.system) {
    if (!std::holds_alternative<FiniteExactSpec>(*c.system)) config_fail(c, "lemma1 needs a finite system");
    fixed.emplace(std::get<FiniteExactSpec>(*c.system));
  }
  parallel_for(c.relations, c.jobs, [&](std::size_t k) {
    std::optional<FiniteSystem> generated;
    if (!fixed) generated.emplace(random_finite_spec(derive_seed(c.seed, 2 * k)));
    const FiniteSystem& system = fixed ? *fixed : *generated;
    const auto relation = random_equivalence(derive_seed(c.seed, 2 * k + 1), system.size());
    const auto report = verify_finite_averages(system, relation);
    jobs[k].row = to_csv_record(report, fixed ? "0" : std::to_string(k), std::to_string(k));
    jobs[k].pass = report.equal && report.witnesses_valid;
  });

  RunOutput out;
  Report r;
  header(r, c);
  std::string csv = std::string(kAverageReportCsvHeader) + '\n';
  std::size_t equal = 0;
  for (const auto& j : jobs) {
    csv += j.row + '\n';
    equal += j.pass;
  }
  r.line("relations " + std::to_string(jobs.size()));
  r.check("int f = int A_f[F] on " + std::to_string(equal) + "/" + std::to_string(jobs.size()) + " relations",
          equal == jobs.size());
  out.artifacts["lemma1.csv"] = csv;
  out.artifacts["report.txt"] = r.text();
  out.exit_code = r.all_pass() ? kExitPass : kExitAssertion;
  return out;
}

// ---------------------------------------------------------------------------

RunOutput run_sections(const ExperimentConfig& c) {
  if (!c.L) config_fail(c, "sections needs thresholds.L");
  const std::size_t L = *c.L;
  const double density = c.density ? *c.density : section_density(L, to_double(c.epsilon), 1.0);

  struct Job {
    SectionSet section{{}, 1, 1};
    std::optional<GapStats> stats;
    bool separated = false;
    bool union_ok = false;
  };
  std::vector<Job> jobs(c.windows);
  parallel_for(c.windows, c.jobs, [&](std::size_t k) {
    const auto candidates = generate_candidate_section(c.width, density, section_seed(c, k));
    Job& j = jobs[k];
    j.section = sparsify(candidates, L, c.width);
    const auto& m = j.section.markers();
    j.separated = true;
    for (std::size_t t = 0; t + 1 < m.size(); ++t) j.separated = j.separated && m[t + 1] - m[t] >= L + 1;
    std::vector<std::size_t> expected;
    for (std::size_t x : m) {
      for (std::size_t y = x >= L ? x - L : 0; y < x; ++y) expected.push_back(y);
    }
    std::sort(expected.begin(), expected.end());
    expected.erase(std::unique(expected.begin(), expected.end()), expected.end());
    j.union_ok = expected == j.section.shifted_union();
    if (m.size() >= 2) j.stats = gap_statistics(j.section);
  });

  RunOutput out;
  Report r;
  header(r, c);
  r.line("L " + std::to_string(L));
  r.line("density " + format_value(density));
  std::string markers = "window,index\n";
  std::string gaps = "window,gap,count\n";
  std::vector<SectionSet> all;
  bool separated = true, union_ok = true;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    std::ostringstream s;
    write_section_csv(s, jobs[k].section);
    markers += prefix_rows(s.str(), "window", std::to_string(k), false);
    if (jobs[k].stats) {
      std::ostringstream g;
      write_gap_histogram_csv(g, *jobs[k].stats);
      gaps += prefix_rows(g.str(), "window", std::to_string(k), false);
      r.line("window " + std::to_string(k) + " markers " + std::to_string(jobs[k].section.markers().size()) +
             " min_gap " + std::to_string(jobs[k].stats->min_gap) + " mean_gap " +
             format_value(jobs[k].stats->mean_gap));
    } else {
      r.line("window " + std::to_string(k) + " markers " + std::to_string(jobs[k].section.markers().size()));
    }
    separated = separated && jobs[k].separated;
    union_ok = union_ok && jobs[k].union_ok;
    all.push_back(jobs[k].section);
  }
  r.line("saturation_mass " + format_value(saturation_mass(all)));
  r.check("S and T^-i S disjoint for i in [1, L] (min gap >= L + 1)", separated);
  r.check("shifted union is the L points before each marker", union_ok);
  out.artifacts["sections.csv"] = markers;
  out.artifacts["gaps.csv"] = gaps;
  out.artifacts["report.txt"] = r.text();
  out.exit_code = r.all_pass() ? kExitPass : kExitAssertion;
  return out;
}

// ---------------------------------------------------------------------------

template <Value V>
std::size_t resolve_L(const ExperimentConfig& c, const OrbitWindow<V>& window, const V& b, Report& r,
                      std::string& trace_csv, const std::string& label) {
  if (c.L) return *c.L;
  const auto choice = choose_L(window, b, value_from<V>(c.epsilon), c.cap);
  for (const auto& step : choice.trace) {
    trace_csv += label + ',' + std::to_string(step.L) + ',' + format_value(step.z_mass) + ',' +
                 format_value(step.z_f_mass) + '\n';
  }
  r.line(label + " choose_L " + (choice.reached_cap ? "CapReached at L = " : "L = ") + std::to_string(choice.L));
  return choice.L;
}

template <Value V>
RunOutput run_tile(const ExperimentConfig& c) {
  if (!c.b) config_fail(c, "tile needs thresholds.b");
  const auto model = require_model(c);
  const V b = threshold<V>(*c.b);

  struct Job {
    Report report;
    std::string trace;
    std::string classes;
    std::string tiling;
    std::string coverage;
  };
  std::vector<Job> jobs(c.windows);
  parallel_for(c.windows, c.jobs, [&](std::size_t k) {
    Job& j = jobs[k];
    const std::string label = std::to_string(k);
    const auto window = make_window<V>(c, model, k);
    const std::size_t L = resolve_L(c, window, b, j.report, j.trace, label);
    const SectionSet section =
        c.density ? sparsify(generate_candidate_section(window, *c.density, section_seed(c, k)), L, window.width())
                  : budget_section(window, L, to_double(c.epsilon), section_seed(c, k));
    const auto plan = build_tiling_plan(window, L, b);
    const auto relation = build_partial_equivalence(window, plan, section);
    const auto violations = check_partial_equivalence(relation, plan, section);
    const auto coverage = coverage_check(relation, plan, section, window);
    const auto bound = class_average_bound(relation, window, plan);

    for (const auto& v : violations) j.report.line("window " + label + " violation: " + v);
    j.report.check("window " + label + " F is a partial equivalence of tiles", violations.empty());
    // with no marker in the interior the inclusion below is vacuous
    j.report.check("window " + label + " working region is non-empty", coverage.working_size > 0);
    j.report.check("window " + label + " dom F contains working \\ (S~ u Z)", coverage.inclusion_holds);
    j.report.check("window " + label + " class averages >= b over " + std::to_string(bound.classes_checked) +
                       " classes",
                   bound.holds);

    std::ostringstream cls;
    write_classes_csv(cls, relation);
    j.classes = prefix_rows(cls.str(), "window", label, false);

    // uniqueness spot checks on short intervals
    std::mt19937_64 rng(derive_seed(section_seed(c, k), 7));
    const IntervalRef domain = plan.domain();
    const std::size_t max_len = std::min<std::size_t>(12, domain.size());
    std::size_t agree = 0;
    for (std::size_t t = 0; t < c.spot_checks && max_len > 0; ++t) {
      const std::size_t len = std::uniform_int_distribution<std::size_t>(1, max_len)(rng);
      const std::size_t lo = std::uniform_int_distribution<std::size_t>(domain.lo, domain.hi - len)(rng);
      const IntervalRef interval{lo, lo + len};
      const auto greedy = greedy_tile(plan, interval);
      const auto all = tiling_uniqueness_oracle(plan, interval);
      const bool ok = all.size() <= 1 && (greedy ? all.size() == 1 && all.front() == *greedy : all.empty());
      agree += ok;
      std::ostringstream row;
      write_tiling_csv(row, interval, greedy, false);
      j.tiling += prefix_rows("\n" + row.str(), "window", label, false);
    }
    j.report.check("window " + label + " greedy tiling unique on " + std::to_string(agree) + "/" +
                       std::to_string(c.spot_checks) + " intervals",
                   agree == c.spot_checks);

    j.coverage = label + ',' + std::to_string(L) + ',' + std::to_string(coverage.working_size) + ',' +
                 std::to_string(coverage.missing) + ',' + format_value(coverage.uncovered_mass) + ',' +
                 format_value(coverage.uncovered_f_mass) + ',' + format_value(coverage.shifted_union_mass) + ',' +
                 format_value(coverage.fail_set_mass) + ',' + format_value(coverage.boundary_mass) + ',' +
                 (bound.min_average ? format_value(*bound.min_average) : std::string()) + '\n';
  });

  RunOutput out;
  Report r;
  header(r, c);
  r.line("b " + format_value(b));
  r.line("epsilon " + format_value(c.epsilon));
  std::string trace = "window,L,z_mass,z_f_mass\n";
  std::string classes = "window,lo,hi,witness\n";
  std::string tiling = "window,interval_lo,interval_hi,status,lo,hi,witness\n";
  std::string coverage =
      "window,L,working_size,missing,uncovered_mass,uncovered_f_mass,shifted_union_mass,fail_set_mass,"
      "boundary_mass,min_class_average\n";
  for (auto& j : jobs) {
    std::istringstream lines(j.report.text());
    std::string line;
    while (std::getline(lines, line)) {
      if (line.rfind("FAIL ", 0) == 0) {
        r.check(line.substr(5), false);
      } else if (line.rfind("PASS ", 0) == 0) {
        r.check(line.substr(5), true);
      } else {
        r.line(line);
      }
    }
    trace += j.trace;
    classes += j.classes;
    tiling += j.tiling;
    coverage += j.coverage;
  }
  out.artifacts["l_trace.csv"] = trace;
  out.artifacts["classes.csv"] = classes;
  out.artifacts["tiling.csv"] = tiling;
  out.artifacts["coverage.csv"] = coverage;
  out.artifacts["report.txt"] = r.text();
  out.exit_code = r.all_pass() ? kExitPass : kExitAssertion;
  return out;
}

// ---------------------------------------------------------------------------

template <Value V>
void record_chain(RunOutput& out, Report& r, const std::string& prefix, const ChainReport<V>& chain) {
  std::ostringstream quantities, links;
  write_chain_quantities_csv(quantities, chain.quantities);
  write_chain_links_csv(links, chain.links);
  out.artifacts[prefix + "_quantities.csv"] = quantities.str();
  out.artifacts[prefix + "_links.csv"] = links.str();

  r.line(prefix + " L " + std::to_string(chain.quantities.L) + " classes " + std::to_string(chain.classes) +
         " (witness in Z: " + std::to_string(chain.classes_with_witness_in_z) + ")");
  r.line(prefix + " preconditions " + (chain.preconditions_hold ? "hold" : "do not hold"));
  for (const auto& link : chain.links) {
    r.check(prefix + " " + link.name + " [" + format_value(link.lhs) + " " + link.relation + " " +
                format_value(link.rhs) + "]",
            link.pass);
  }
  r.line(prefix + " lower bound " + format_value(chain.lower_bound) + " measured int f " +
         format_value(chain.quantities.integral_x));

  // the serialized quantities alone must reproduce every link
  std::istringstream back(quantities.str());
  const auto again = evaluate_chain_links(read_chain_quantities_csv<V>(back));
  std::ostringstream relinks;
  write_chain_links_csv(relinks, again);
  r.check(prefix + " links re-evaluate identically from the serialized quantities", relinks.str() == links.str());
}

template <Value V>
RunOutput run_chain(const ExperimentConfig& c) {
  if (!c.b) config_fail(c, "chain needs thresholds.b");
  const auto model = require_model(c);
  const auto window = make_window<V>(c, model, 0);
  const V b = threshold<V>(*c.b);
  const V eps = value_from<V>(c.epsilon);

  RunOutput out;
  Report r;
  header(r, c);
  r.line("b " + format_value(b));
  r.line("epsilon " + format_value(eps));
  r.line("width " + std::to_string(window.width()) + " margin " + std::to_string(window.margin()));
  std::string trace = "side,L,z_mass,z_f_mass\n";

  if (c.a) {
    const V a = threshold<V>(*c.a);
    r.line("a " + format_value(a));
    const auto probe = two_sided_contradiction_probe(window, a, b, eps, c.cap, section_seed(c, 0));
    r.check("budget (b - a) mu(X) > 2 eps (|a| + |b| + 2)", probe.budget_holds);
    for (const auto& [side, choice] : {std::pair{"upper", &probe.upper}, std::pair{"lower", &probe.lower}}) {
      for (const auto& step : choice->trace) {
        trace += std::string(side) + ',' + std::to_string(step.L) + ',' + format_value(step.z_mass) + ',' +
                 format_value(step.z_f_mass) + '\n';
      }
      r.line(std::string(side) + " choose_L " + (choice->reached_cap ? "CapReached at L = " : "L = ") +
             std::to_string(choice->L));
    }
    if (probe.upper_chain) record_chain(out, r, "chain_upper", *probe.upper_chain);
    if (probe.lower_chain) record_chain(out, r, "chain_lower", *probe.lower_chain);
    r.check("at most one side completes", !probe.dual_success);
  } else {
    std::size_t L = 0;
    bool capped = false;
    if (c.L) {
      L = *c.L;
    } else {
      const auto choice = choose_L(window, b, eps, c.cap);
      for (const auto& step : choice.trace) {
        trace += "upper," + std::to_string(step.L) + ',' + format_value(step.z_mass) + ',' +
                 format_value(step.z_f_mass) + '\n';
      }
      L = choice.L;
      capped = choice.reached_cap;
      r.line(std::string("choose_L ") + (capped ? "CapReached at L = " : "L = ") + std::to_string(L));
    }
    if (capped) {
      r.line("no L up to the cap isolates Z; b is above the limit along this orbit");
    } else {
      const auto section = c.density
                               ? sparsify(generate_candidate_section(window, *c.density, section_seed(c, 0)), L,
                                          window.width())
                               : budget_section(window, L, to_double(c.epsilon), section_seed(c, 0));
      BudgetParams<V> params{b, std::nullopt, eps, std::nullopt, L, c.cap};
      if (c.delta) params.delta = threshold<V>(*c.delta);
      record_chain(out, r, "chain", verify_chain(window, section, params));
    }
  }
  out.artifacts["l_trace.csv"] = trace;
  out.artifacts["report.txt"] = r.text();
  out.exit_code = r.all_pass() ? kExitPass : kExitAssertion;
  return out;
}

// ---------------------------------------------------------------------------

template <Value V>
RunOutput run_converge(const ExperimentConfig& c) {
  const auto model = require_model(c);
  std::vector<StartPoint> starts;
  for (std::size_t s = 0; s < c.starts; ++s) starts.push_back(window_start(c, *model, s, c.n_grid.back()));

  const std::size_t chunks = std::min(c.jobs, starts.size());
  std::vector<ConvergenceRecord<V>> parts(chunks);
  parallel_for(chunks, c.jobs, [&](std::size_t t) {
    const std::size_t lo = starts.size() * t / chunks;
    const std::size_t hi = starts.size() * (t + 1) / chunks;
    try {
      parts[t] = convergence_experiment<V>(model, {starts.begin() + lo, starts.begin() + hi}, c.n_grid);
    } catch (const WindowError& e) {
      config_fail(c, e.what());
    }
  });
  ConvergenceRecord<V> record = parts.front();
  for (std::size_t t = 1; t < parts.size(); ++t) {
    record.starts.insert(record.starts.end(), parts[t].starts.begin(), parts[t].starts.end());
    record.averages.insert(record.averages.end(), parts[t].averages.begin(), parts[t].averages.end());
    record.reference.insert(record.reference.end(), parts[t].reference.begin(), parts[t].reference.end());
  }

  RunOutput out;
  Report r;
  header(r, c);
  std::ostringstream csv;
  write_convergence_csv(csv, record);
  out.artifacts["convergence.csv"] = csv.str();

  const std::size_t last = record.n_grid.size() - 1;
  V worst(0);
  for (std::size_t s = 0; s < record.starts.size(); ++s) worst = std::max(worst, record.deviation(s, last));
  r.line("starts " + std::to_string(record.starts.size()) + " n " + std::to_string(record.n_grid.back()));
  r.line("max deviation at largest n " + format_value(worst));
  r.line("max deviation overall " + format_value(record.max_deviation()));

  if (model->kind() == SystemKind::finite_exact) {
    bool zero = true;
    for (std::size_t s = 0; s < record.starts.size(); ++s) {
      const std::size_t period = model->finite().period(std::get<PointId>(record.starts[s]));
      for (std::size_t k = 0; k < record.n_grid.size(); ++k) {
        if (record.n_grid[k] % period == 0) zero = zero && record.deviation(s, k) == V(0);
      }
    }
    r.check("deviation is zero at every full-period n", zero);
  }
  if (c.tolerance) {
    std::size_t within = 0;
    for (std::size_t s = 0; s < record.starts.size(); ++s) within += to_double(record.deviation(s, last)) <= *c.tolerance;
    r.line("within tolerance " + std::to_string(within) + "/" + std::to_string(record.starts.size()));
    r.check("max deviation at largest n <= " + format_value(*c.tolerance), to_double(worst) <= *c.tolerance);
  }
  out.artifacts["report.txt"] = r.text();
  out.exit_code = r.all_pass() ? kExitPass : kExitAssertion;
  return out;
}

// ---------------------------------------------------------------------------

RunOutput run_condexp(const ExperimentConfig& c) {
  const auto model = require_model(c);
  if (model->kind() != SystemKind::finite_exact) config_fail(c, "condexp needs a finite system");
  const auto report = limit_vs_conditional_expectation(model);

  RunOutput out;
  Report r;
  header(r, c);
  std::string csv = "point,k,average,expectation,equal\n";
  for (const auto& l : report.limits) {
    csv += std::to_string(l.point) + ',' + std::to_string(l.k) + ',' + format_value(l.average) + ',' +
           format_value(l.expectation) + ',' + (l.equal ? "true" : "false") + '\n';
  }
  out.artifacts["condexp.csv"] = csv;
  r.line("cycles " + std::to_string(model->finite().cycles().size()));
  r.check("A_f[T, k period] = E(f | inv) for k = 1..3 at every point", report.limits_match);
  r.check(std::string("int_A f = int_A E(f | inv) over ") + std::to_string(report.invariant_sets) +
              (report.exhaustive ? " invariant sets (all unions of cycles)" : " invariant sets (cycles and X)"),
          report.integrals_match);
  out.artifacts["report.txt"] = r.text();
  out.exit_code = r.all_pass() ? kExitPass : kExitAssertion;
  return out;
}

}  // namespace

RunOutput execute(const ExperimentConfig& c) {
  validate_config(c);
  if (!c.command) config_fail(c, "no command given");
  const bool exact = c.arithmetic == Arithmetic::exact;
  switch (*c.command) {
    case Command::lemma1: return run_lemma1(c);
    case Command::sections: return run_sections(c);
    case Command::tile: return exact ? run_tile<Rational>(c) : run_tile<double>(c);
    case Command::chain: return exact ? run_chain<Rational>(c) : run_chain<double>(c);
    case Command::converge: return exact ? run_converge<Rational>(c) : run_converge<double>(c);
    case Command::condexp: return run_condexp(c);
  }
  config_fail(c, "unknown command");
}

void write_artifacts(const std::filesystem::path& dir, const std::map<std::string, std::string>& artifacts) {
  std::filesystem::create_directories(dir);
  const std::string suffix = ".tmp" + std::to_string(::getpid());
  std::vector<std::filesystem::path> temps;
  try {
    for (const auto& [name, content] : artifacts) {
      const auto tmp = dir / (name + suffix);
      temps.push_back(tmp);
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      f << content;
      f.close();
      if (!f) throw std::runtime_error("failed to write " + tmp.string());
    }
    std::size_t k = 0;
    for (const auto& [name, content] : artifacts) std::filesystem::rename(temps[k++], dir / name);
  } catch (...) {
    std::error_code ec;
    for (const auto& t : temps) std::filesystem::remove(t, ec);
    throw;
  }
}

int run(const ExperimentConfig& config, std::ostream& err) {
  RunOutput output;
  try {
    output = execute(config);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  write_artifacts(config.out, output.artifacts);
  return output.exit_code;
}

void apply_environment(ExperimentConfig& config) {
  const char* cap = std::getenv("ORBIT_TILER_CAP");
  if (cap == nullptr) return;
  const std::string text(cap);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v == 0) {
    throw ConfigError("ORBIT_TILER_CAP", 0, 0, "must be a positive integer, got '" + text + "'");
  }
  config.cap = v;
}

}  // namespace orbit_tiler
