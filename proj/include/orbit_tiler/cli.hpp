#pragma once

#include "orbit_tiler/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace orbit_tiler {

inline constexpr int kExitPass = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitConfig = 2;

struct RunOutput {
  int exit_code = kExitPass;
  /// File name -> contents. Always includes report.txt.
  std::map<std::string, std::string> artifacts;
};

/// Runs the experiment in memory. Throws ConfigError when the configuration
/// cannot be run (missing system, bad start, ...).
RunOutput execute(const ExperimentConfig& config);

/// Writes every artifact to a temporary name inside `dir`, then renames them
/// all into place.
void write_artifacts(const std::filesystem::path& dir, const std::map<std::string, std::string>& artifacts);

/// execute + write_artifacts. Config errors go to `err` and return kExitConfig
/// without touching the output directory.
int run(const ExperimentConfig& config, std::ostream& err);

/// Applies ORBIT_TILER_CAP if set. Throws ConfigError on a malformed value.
void apply_environment(ExperimentConfig& config);

}  // namespace orbit_tiler
