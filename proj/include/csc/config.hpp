#pragma once

/**
 * @file
 * @brief Experiment configuration: a flat TOML subset keyed by model symbol.
 *
 * Supported syntax: `key = value` lines, `[section]` headers, `#` comments,
 * numbers, double-quoted strings, booleans and (nested, possibly multi-line)
 * arrays. Every key has a default except `k_s`. With `strict = true` no
 * defaults apply, which is how manifests pin the full parameter set.
 */

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "codesign.hpp"
#include "simloop.hpp"

namespace csc {

/// Schema or value error; the message names the offending key.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct TomlValue;
using TomlArray = std::vector<TomlValue>;

struct TomlValue
{
  std::variant<double, bool, std::string, TomlArray> v;
};

/// Parsed document: "section.key" (or "key" at top level) to value.
using TomlTable = std::map<std::string, TomlValue>;

TomlTable parse_toml(const std::string & text, const std::string & origin = "<config>");

std::string to_toml(const TomlValue & value);

struct Config
{
  CodesignProblem problem;
  SolverOptions solver;
  SimConfig sim;
  std::uint64_t seed{1};
  /// Every schema key with its resolved value, in schema order, and whether it came from the file.
  std::vector<std::pair<std::string, TomlValue>> resolved;
  std::vector<bool> from_file;
};

/// `seed_override` replaces the file's seed (the --seed flag). With
/// `lenient_weights`, non-PSD weight matrices are kept instead of rejected so
/// that the validation suite can report them.
Config parse_config(const std::string & text, const std::string & origin = "<config>",
                    std::optional<std::uint64_t> seed_override = std::nullopt, bool lenient_weights = false);

Config load_config(const std::filesystem::path & path, std::optional<std::uint64_t> seed_override = std::nullopt,
                   bool lenient_weights = false);

/// Manifest text: a strict config that reproduces `cfg`, followed by a
/// [manifest] section holding `record` (tool version, paths, command line).
std::string render_manifest(const Config & cfg, const std::vector<std::pair<std::string, std::string>> & record);

}  // namespace csc
