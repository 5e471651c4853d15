#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rmtu::cli {

using Json = nlohmann::json;

enum class FieldType { Flag, Count, Real, Text, Reals, Counts };

struct Field {
  std::string section;
  std::string key;
  FieldType type;
  Json fallback;
};

/// Fully resolved experiment configuration: every field of the subcommand's
/// schema holds a typed value. Precedence is overrides > file > defaults.
class Config {
 public:
  /// Throws Error(ConfigError) on unreadable files, unknown sections or keys,
  /// malformed overrides and type mismatches.
  static Config load(std::string_view command, const std::string& path,
                     const std::vector<std::string>& overrides);

  const std::string& command() const noexcept { return command_; }

  bool flag(const std::string& section, const std::string& key) const;
  std::uint64_t count(const std::string& section, const std::string& key) const;
  double real(const std::string& section, const std::string& key) const;
  std::string text(const std::string& section, const std::string& key) const;
  std::vector<double> reals(const std::string& section, const std::string& key) const;
  std::vector<std::uint64_t> counts(const std::string& section, const std::string& key) const;

  void set_seed(std::uint64_t seed);
  void set_output(const std::string& dir);

  /// Resolved values; the output directory is left out so that relocating
  /// a run does not change its identity.
  Json canonical() const;
  /// FNV-1a 64 of canonical().dump(), as 16 hex digits.
  std::string hash() const;

 private:
  const Json& at(const std::string& section, const std::string& key) const;

  std::string command_;
  Json values_ = Json::object();
};

/// Schema of a subcommand; empty for unknown names.
const std::vector<Field>& schema_for(std::string_view command);

}  // namespace rmtu::cli
