#include "output.hpp"

#include <cstdio>

#include "rmtu/error.hpp"

namespace rmtu::cli {

namespace fs = std::filesystem;

Json Provenance::to_json() const {
  return Json{{"schema_version", kSchemaVersion},
              {"command", command},
              {"config_hash", config_hash},
              {"seed", seed}};
}

std::string Provenance::csv_comment() const {
  return "# schema_version=" + std::to_string(kSchemaVersion) + " command=" + command +
         " config_hash=" + config_hash + " seed=" + std::to_string(seed);
}

OutputDir::OutputDir(fs::path dir, Provenance prov) : dir_(std::move(dir)), prov_(std::move(prov)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) {
    throw Error(ErrorKind::ConfigError, "cannot create output directory " + dir_.string());
  }
}

static std::ofstream open_or_throw(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + p.string());
  return out;
}

void OutputDir::write_json(const std::string& name, Json body) const {
  Json doc = Json::object();
  doc["provenance"] = prov_.to_json();
  for (auto& [k, v] : body.items()) doc[k] = std::move(v);
  auto out = open_or_throw(dir_ / name);
  out << doc.dump(2) << '\n';
}

std::ofstream OutputDir::open_csv(const std::string& name) const {
  auto out = open_or_throw(dir_ / name);
  out << prov_.csv_comment() << '\n';
  return out;
}

void OutputDir::write_runtime(double seconds) const {
  auto out = open_or_throw(dir_ / "runtime.txt");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", seconds);
  out << prov_.command << " wall_clock_s " << buf << '\n';
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace rmtu::cli
