// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria (capped at 1).

#include "orbit_tiler/cli.hpp"
#include "orbit_tiler/generators.hpp"
#include "orbit_tiler/harness.hpp"
#include "orbit_tiler/random.hpp"
#include "support/oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

using namespace orbit_tiler;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  std::string tool;
  fs::path configs;
  fs::path scratch;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// criterion 1
Outcome lemma1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t failures = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const FiniteSystem s(random_finite_spec(seed, {2, 64, false, 1}));
    const auto r = verify_finite_averages(s, random_equivalence(seed ^ 0x5eed, s.size()));
    failures += !r.equal;
  }
  const double t = seconds_since(t0);
  return {failures == 0 && t < 5.0, std::to_string(100 - failures) + "/100 exact, " + fmt(t, 3) + " s (< 5 s)"};
}

// criterion 2
Outcome tiling_uniqueness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t intervals = 0, tiled = 0, disagreements = 0;
  const std::size_t domain = 24;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const std::size_t L = 1 + seed % 3;
    const auto plan = random_plan(seed, domain + L - 1, L);
    for (std::size_t lo = 0; lo <= domain; ++lo) {
      for (std::size_t hi = lo; hi <= std::min(domain, lo + 12); ++hi) {
        const auto greedy = greedy_tile(plan, IntervalRef{lo, hi});
        const auto all = tiling_uniqueness_oracle(plan, IntervalRef{lo, hi});
        ++intervals;
        tiled += greedy.has_value();
        const bool agree = all.size() <= 1 && (greedy ? all.size() == 1 && all.front() == *greedy : all.empty());
        disagreements += !agree;
      }
    }
  }
  const double t = seconds_since(t0);
  return {disagreements == 0 && t < 30.0, std::to_string(intervals) + " intervals (" + std::to_string(tiled) +
                                              " tiled), " + std::to_string(disagreements) + " disagreements, " +
                                              fmt(t, 3) + " s (< 30 s)"};
}

// criterion 3
Outcome section_invariants() {
  std::size_t bad = 0;
  std::size_t markers = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const double density = 0.005 + 0.5 * static_cast<double>(counter_uniform(31, 0, k));
    const std::size_t L = 1 + counter_bits(31, 1, k) % 64;
    const std::size_t width = 20000;
    const auto s0 = generate_candidate_section(width, density, derive_seed(31, k));
    const auto s = sparsify(s0, L, width);
    const auto& m = s.markers();
    markers += m.size();
    bool ok = m == oracle::sparsify(s0, L, width);
    for (std::size_t j = 1; j < m.size(); ++j) ok = ok && m[j] - m[j - 1] >= L + 1;
    for (std::size_t x : m) {
      for (std::size_t i = 1; i <= L; ++i) ok = ok && !s.contains(x + i);
    }
    bad += !ok;
  }
  return {bad == 0, std::to_string(100 - bad) + "/100 configurations, " + std::to_string(markers) + " markers"};
}

// criteria 4 and 5
std::pair<Outcome, Outcome> coverage_and_class_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto golden = oracle::golden_half_model();
  const auto coin = std::make_shared<const SystemModel>(build_system(BernoulliSpec{0.3, 99}));
  const double eps = 0.01;
  std::size_t inclusion_fail = 0, mass_fail = 0, capped = 0, empty = 0, bound_fail = 0, bound_applicable = 0;
  double worst_excluded = 0.0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const bool rotation = k % 2 == 0;
    const auto w = rotation ? orbit_window<double>(golden, random_angle(derive_seed(4, k)), 100000, 4096)
                            : orbit_window<double>(coin, BernoulliPoint{derive_seed(4, k), 0}, 100000, 4096);
    const double b = rotation ? 0.45 : 0.15;
    const auto choice = choose_L(w, b, eps);
    if (choice.reached_cap) {
      ++capped;
      continue;
    }
    const auto section = budget_section(w, choice.L, eps, derive_seed(5, k));
    const auto plan = build_tiling_plan(w, choice.L, b);
    const auto relation = build_partial_equivalence(w, plan, section);
    const auto coverage = coverage_check(relation, plan, section, w);
    inclusion_fail += !coverage.inclusion_holds;
    // an empty working region would make the inclusion vacuous
    empty += coverage.working_size == 0;
    worst_excluded = std::max(worst_excluded, coverage.excluded_total());
    mass_fail += !(coverage.excluded_total() < 2 * eps);
    const auto bound = class_average_bound(relation, w, plan);
    bound_applicable += bound.applicable();
    bound_fail += !bound.holds;
  }
  const double t = seconds_since(t0);
  Outcome coverage{inclusion_fail == 0 && mass_fail == 0 && capped == 0 && empty == 0,
                   "inclusion failures " + std::to_string(inclusion_fail) + ", empty working regions " +
                       std::to_string(empty) + ", excluded mass >= 2 eps in " +
                       std::to_string(mass_fail) + " windows (worst " + fmt(worst_excluded) + " vs " + fmt(2 * eps) +
                       "), CapReached " + std::to_string(capped) + ", " + fmt(t, 3) + " s"};
  Outcome bound{bound_fail == 0 && bound_applicable == 100 - capped,
                std::to_string(bound_applicable - bound_fail) + "/" + std::to_string(bound_applicable) +
                    " windows with min class average >= b"};
  return {coverage, bound};
}

// criterion 6
Outcome golden_chain(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = execute(load_config(o.configs / "golden_chain.conf"));
  const double t = seconds_since(t0);
  if (!out.artifacts.count("chain_quantities.csv")) return {false, "no chain was run (CapReached?)"};
  std::istringstream q(out.artifacts.at("chain_quantities.csv"));
  const auto quantities = read_chain_quantities_csv<double>(q);
  std::size_t links = 0, passed = 0;
  const auto rows = lines_of(out.artifacts.at("chain_links.csv"));
  for (std::size_t k = 1; k < rows.size(); ++k) {
    ++links;
    passed += split_csv(rows[k]).back() == "true";
  }
  const double b = quantities.b, eps = quantities.epsilon;
  const double lower = b * quantities.mass_x - 2 * eps * (std::abs(b) + 1);
  const double measured = quantities.integral_x;
  const bool ok = out.exit_code == kExitPass && links >= 4 && passed == links && lower <= measured &&
                  std::abs(lower - 0.421) < 1e-9 && std::abs(measured - 0.5) <= 1e-3 && t < 60.0;
  return {ok, "L = " + std::to_string(quantities.L) + ", links " + std::to_string(passed) + "/" +
                  std::to_string(links) + ", lower bound " + fmt(lower) + " <= int f " + fmt(measured, 8) +
                  ", " + fmt(t, 3) + " s (< 60 s)"};
}

struct ProbeSides {
  bool upper = false;
  bool lower = false;
  bool dual_check = false;
};

ProbeSides probe_sides(const RunOutput& out) {
  ProbeSides s;
  for (const auto& line : lines_of(out.artifacts.at("report.txt"))) {
    if (line.rfind("upper choose_L L = ", 0) == 0) s.upper = true;
    if (line.rfind("lower choose_L L = ", 0) == 0) s.lower = true;
    if (line == "PASS at most one side completes") s.dual_check = true;
  }
  return s;
}

// criterion 7
Outcome one_sidedness(const Options& o) {
  const auto straddle = probe_sides(execute(load_config(o.configs / "golden_probe_straddle.conf")));
  const auto below = probe_sides(execute(load_config(o.configs / "golden_probe_below.conf")));
  std::size_t probes = 0, dual = 0;
  for (const auto& entry : fs::directory_iterator(o.configs)) {
    if (entry.path().extension() != ".conf") continue;
    const auto c = load_config(entry.path());
    if (c.command != Command::chain || !c.a) continue;
    ++probes;
    const auto sides = probe_sides(execute(c));
    dual += (sides.upper && sides.lower) || !sides.dual_check;
  }
  const bool ok = !straddle.upper && !straddle.lower && below.upper && !below.lower && probes >= 2 && dual == 0;
  auto word = [](bool success) { return success ? std::string("L found") : std::string("CapReached"); };
  return {ok, "straddle (0.45, 0.55): b side " + word(straddle.upper) + ", a side " + word(straddle.lower) +
                  "; below (0.3, 0.45): b side " + word(below.upper) + ", a side " + word(below.lower) +
                  "; dual success in " + std::to_string(dual) + "/" + std::to_string(probes) + " shipped probes"};
}

// criterion 8
Outcome convergence(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto golden = execute(load_config(o.configs / "golden_converge.conf"));
  const auto coin = execute(load_config(o.configs / "bernoulli_converge.conf"));
  const double t = seconds_since(t0);

  double golden_max = 0.0;
  std::size_t golden_rows = 0;
  for (const auto& line : lines_of(golden.artifacts.at("convergence.csv"))) {
    const auto cells = split_csv(line);
    if (cells.size() != 4 || cells[1] != "100000") continue;
    ++golden_rows;
    golden_max = std::max(golden_max, std::abs(std::stod(cells[2]) - 0.5));
  }
  std::size_t coin_rows = 0, coin_close = 0;
  for (const auto& line : lines_of(coin.artifacts.at("convergence.csv"))) {
    const auto cells = split_csv(line);
    if (cells.size() != 4 || cells[1] != "100000") continue;
    ++coin_rows;
    coin_close += std::abs(std::stod(cells[2]) - 0.3) <= 0.01;
  }
  const double fraction = coin_rows ? static_cast<double>(coin_close) / static_cast<double>(coin_rows) : 0.0;
  const bool ok = golden_rows == 100 && golden_max <= 1e-3 && coin_rows == 200 && fraction >= 0.95 && t < 60.0;
  return {ok, "golden n = 1e5, " + std::to_string(golden_rows) + " starts, max |A - 1/2| = " + fmt(golden_max) +
                  " (<= 1e-3); bernoulli p = 0.3, " + std::to_string(coin_close) + "/" + std::to_string(coin_rows) +
                  " within 0.01 (>= 95%); " + fmt(t, 3) + " s (< 60 s)"};
}

// criterion 9
Outcome conditional_expectation_limits() {
  std::size_t ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto model = std::make_shared<const SystemModel>(FiniteSystem(random_finite_spec(seed + 900, {4, 64, true, 2})));
    ok += limit_vs_conditional_expectation(model).all_pass();
  }
  return {ok == 20, std::to_string(ok) + "/20 multi-cycle systems"};
}

int run_tool(const Options& o, const fs::path& config, const fs::path& out) {
  const std::string command = "'" + o.tool + "' " + to_string(*load_config(config).command) + " --config '" +
                              config.string() + "' --out '" + out.string() + "' > /dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// criterion 10
Outcome reproducibility(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t configs = 0, csvs = 0;
  std::vector<std::string> problems;
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(o.configs)) {
    if (entry.path().extension() == ".conf") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& path : paths) {
    ++configs;
    const auto name = path.stem().string();
    const auto first = o.scratch / name / "first";
    const auto second = o.scratch / name / "second";
    fs::remove_all(o.scratch / name);
    const int c1 = run_tool(o, path, first);
    const int c2 = run_tool(o, path, second);
    if (c1 != 0 || c2 != 0) {
      problems.push_back(name + " exit " + std::to_string(c1) + "/" + std::to_string(c2));
      continue;
    }
    for (const auto& file : fs::directory_iterator(first)) {
      if (file.path().extension() != ".csv") continue;
      ++csvs;
      const auto other = second / file.path().filename();
      if (!fs::exists(other) || slurp(file.path()) != slurp(other)) {
        problems.push_back(name + "/" + file.path().filename().string() + " differs");
      }
    }
  }
  std::string detail = std::to_string(configs) + " configs, " + std::to_string(csvs) + " CSVs compared, " +
                       fmt(seconds_since(t0), 3) + " s";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty() && configs > 0 && csvs > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"acceptance checks"};
  app.add_option("--tool", o.tool, "orbit-tiler binary")->required();
  app.add_option("--configs", o.configs, "directory of shipped configs")->required();
  app.add_option("--scratch", o.scratch, "scratch directory for tool runs")->required();
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(o.scratch);

  int failed = 0;
  auto report = [&failed](int id, const std::string& title, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failed += !r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << " [" << id << "] " << title << ": " << r.detail << " ("
              << fmt(seconds_since(t0), 3) << " s)" << std::endl;
  };

  report(1, "finite averaging exactness", lemma1);
  report(2, "tiling uniqueness oracle", tiling_uniqueness);
  report(3, "section invariants", section_invariants);
  std::pair<Outcome, Outcome> cov;
  report(4, "coverage", [&cov] {
    cov = coverage_and_class_bound();
    return cov.first;
  });
  report(5, "class-average bound", [&cov] { return cov.second; });
  report(6, "inequality chain", [&o] { return golden_chain(o); });
  report(7, "one-sidedness", [&o] { return one_sidedness(o); });
  report(8, "Birkhoff convergence", [&o] { return convergence(o); });
  report(9, "conditional expectation", conditional_expectation_limits);
  report(10, "reproducibility", [&o] { return reproducibility(o); });

  std::cout << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criteria fail") << std::endl;
  return failed == 0 ? 0 : 1;
}
