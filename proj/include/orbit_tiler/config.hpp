#pragma once

#include "orbit_tiler/systems.hpp"
#include "orbit_tiler/value.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace orbit_tiler {

/// Malformed or inconsistent configuration. line/column are 1-based; 0 when
/// the problem is not tied to one place in the text.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, std::size_t column, const std::string& message);

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

enum class Command { lemma1, sections, tile, chain, converge, condexp };
enum class Arithmetic { exact, binary64 };

std::string to_string(Command c);
std::optional<Command> parse_command(std::string_view name);

struct ExperimentConfig {
  std::string source = "<config>";
  std::optional<Command> command;
  std::optional<SystemSpec> system;
  Arithmetic arithmetic = Arithmetic::binary64;

  std::size_t width = 100000;
  /// Defaults to min(cap, width / 8) once resolved.
  std::optional<std::size_t> margin;
  /// Raw start text; interpreted per system kind. Empty means a seeded random start.
  std::optional<std::string> start;

  /// Candidate density; empty means the budget density for L and epsilon.
  std::optional<double> density;

  std::optional<Rational> a;
  std::optional<Rational> b;
  std::optional<Rational> delta;
  Rational epsilon = Rational(1, 100);
  std::optional<std::size_t> L;
  std::size_t cap = std::size_t{1} << 16;

  std::uint64_t seed = 1;
  std::size_t starts = 10;
  std::vector<std::size_t> n_grid{1000, 10000, 100000};
  std::size_t relations = 100;
  std::size_t windows = 1;
  /// Number of random spot-check intervals for the tile command.
  std::size_t spot_checks = 200;
  std::optional<double> tolerance;
  std::size_t jobs = 1;
  std::filesystem::path out = "out";

  std::size_t resolved_margin() const;
};

/// Parses "[section]" headers and "key = value" lines; '#' starts a comment.
/// `overrides` are "section.key=value" strings applied after the text.
ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>",
                              const std::vector<std::string>& overrides = {});

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Cross-field checks (budget, ergodic epsilon, margin). Throws ConfigError.
void validate_config(const ExperimentConfig& config);

/// "1*40" expands to forty ones; other entries are plain integers.
std::vector<std::uint64_t> parse_partial_quotients(std::string_view text);

}  // namespace orbit_tiler
