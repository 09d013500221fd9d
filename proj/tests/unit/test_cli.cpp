#include "orbit_tiler/cli.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace orbit_tiler;
namespace fs = std::filesystem;

namespace {

fs::path config_path(const std::string& name) { return fs::path(ORBIT_TILER_CONFIG_DIR) / name; }

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("orbit_tiler_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int shell(const std::string& command) {
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("execute is deterministic") {
  const auto c = load_config(config_path("lemma1.conf"), {"run.relations=20"});
  const auto first = execute(c);
  const auto second = execute(c);
  CHECK(first.exit_code == kExitPass);
  CHECK(first.artifacts == second.artifacts);
  CHECK(first.artifacts.count("lemma1.csv"));
  CHECK(first.artifacts.count("report.txt"));
}

TEST_CASE("converge on the 4-cycle") {
  const auto out = execute(load_config(config_path("four_cycle_converge.conf")));
  CHECK(out.exit_code == kExitPass);
  const auto& csv = out.artifacts.at("convergence.csv");
  CHECK(csv.rfind("start,n,average,deviation\n", 0) == 0);
  CHECK(csv.find("0,400,1/4,0\n") != std::string::npos);
}

TEST_CASE("condexp on two cycles") {
  const auto out = execute(load_config(config_path("two_cycles_condexp.conf")));
  CHECK(out.exit_code == kExitPass);
  CHECK(out.artifacts.at("condexp.csv").rfind("point,k,average,expectation,equal\n", 0) == 0);
}

TEST_CASE("config errors write nothing") {
  auto c = parse_config("[run]\ncommand = converge\n");
  const auto dir = scratch("no_system");
  c.out = dir;
  std::ostringstream err;
  CHECK(run(c, err) == kExitConfig);
  CHECK(err.str().find("config error") != std::string::npos);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("artifacts are written whole, with no temporaries left") {
  const auto dir = scratch("artifacts");
  write_artifacts(dir, {{"a.csv", "x,y\n1,2\n"}, {"report.txt", "PASS\n"}});
  CHECK(slurp(dir / "a.csv") == "x,y\n1,2\n");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 2);
  fs::remove_all(dir.parent_path());
}

TEST_CASE("ORBIT_TILER_CAP overrides the cap") {
  ExperimentConfig c;
  ::setenv("ORBIT_TILER_CAP", "128", 1);
  apply_environment(c);
  CHECK(c.cap == 128);
  ::setenv("ORBIT_TILER_CAP", "lots", 1);
  CHECK_THROWS_AS(apply_environment(c), ConfigError);
  ::unsetenv("ORBIT_TILER_CAP");
}

TEST_CASE("the command-line tool") {
  const char* tool = std::getenv("ORBIT_TILER_TOOL");
  if (tool == nullptr) {
    MESSAGE("ORBIT_TILER_TOOL not set; skipping");
    return;
  }
  const auto dir = scratch("tool");
  const std::string base = std::string(tool) + " ";
  const std::string quiet = " > /dev/null 2>&1";
  CHECK(shell(base + "condexp --config " + config_path("two_cycles_condexp.conf").string() + " --out " +
              dir.string() + quiet) == 0);
  CHECK(fs::exists(dir / "condexp.csv"));
  CHECK(fs::exists(dir / "report.txt"));

  // the subcommand overrides the configured command
  const auto conv = scratch("tool_conv");
  CHECK(shell(base + "converge --config " + config_path("two_cycles_condexp.conf").string() + " --out " +
              conv.string() + " --set run.n_grid=8" + quiet) == 0);
  CHECK(fs::exists(conv / "convergence.csv"));

  const auto bad = scratch("tool_bad");
  CHECK(shell(base + "converge --config " + config_path("two_cycles_condexp.conf").string() + " --out " +
              bad.string() + " --set window.width=-1" + quiet) == 2);
  CHECK_FALSE(fs::exists(bad));
  CHECK(shell(base + "chain --config /nonexistent.conf" + quiet) == 2);
  CHECK(shell(base + quiet) == 2);
  fs::remove_all(dir.parent_path());
}
