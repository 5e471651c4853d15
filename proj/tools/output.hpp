#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "config.hpp"

namespace rmtu::cli {

inline constexpr int kSchemaVersion = 1;

struct Provenance {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;

  Json to_json() const;
  /// Leading comment line of every CSV artifact.
  std::string csv_comment() const;
};

/// Writes artifacts under one directory. Everything written here is a pure
/// function of (config, seed); wall-clock time goes to runtime.txt only.
class OutputDir {
 public:
  OutputDir(std::filesystem::path dir, Provenance prov);

  const std::filesystem::path& path() const noexcept { return dir_; }
  const Provenance& provenance() const noexcept { return prov_; }

  /// Writes {"provenance": ..., <body keys>} with two-space indentation.
  void write_json(const std::string& name, Json body) const;
  /// Opens a CSV whose first line is the provenance comment. Throws
  /// ConfigError when the file cannot be created.
  std::ofstream open_csv(const std::string& name) const;
  void write_runtime(double seconds) const;

 private:
  std::filesystem::path dir_;
  Provenance prov_;
};

/// RFC 4180 field: quoted when it holds a comma, quote or line break.
std::string csv_field(const std::string& s);

}  // namespace rmtu::cli
