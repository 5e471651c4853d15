#include "config.hpp"

#include <cstdio>
#include <map>
#include <numbers>

#include <yaml-cpp/yaml.h>

#include "rmtu/error.hpp"

namespace rmtu::cli {

namespace {

using FT = FieldType;

constexpr double kPi = std::numbers::pi;

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

std::vector<Field> run_fields() {
  return {
      {"run", "kind", FT::Text, ""},
      {"run", "seed", FT::Count, 1},
      {"run", "output", FT::Text, "out"},
  };
}

std::vector<Field> arm_fields() {
  return {
      {"chain", "link_lengths", FT::Reals, {0.155, 0.135, 0.218}},
      {"chain", "joint_lower", FT::Reals, {-kPi, -kPi, -kPi}},
      {"chain", "joint_upper", FT::Reals, {kPi, kPi, kPi}},
      {"task", "q0", FT::Reals, {1.05, 0.73, 0.8}},
      {"task", "displacement", FT::Reals, {0.117, -0.009, -0.723}},
      {"task", "steps", FT::Count, 320},
      {"task", "dt", FT::Real, 0.01},
      {"truth", "noise_gain", FT::Real, 0.3},
      {"truth", "mode", FT::Text, "velocity_scaled"},
  };
}

std::vector<Field> model_fields() {
  return {
      {"models", "additive_variance", FT::Real, 4.4e-6},
      {"models", "wishart_dispersion", FT::Real, 0.65},
      {"models", "gaussian_norm_bound", FT::Real, 28.35},
      {"models", "gaussian_alpha", FT::Real, 0.2},
      {"models", "gaussian_target", FT::Text, "inverse"},
  };
}

std::vector<Field> wrench_fields() {
  return {
      {"wrench", "bounds", FT::Text, "design_study"},
      {"wrench", "concentration", FT::Reals, Json::array()},
      {"wrench", "tension_std", FT::Reals, Json::array()},
      {"wrench", "mean_tension", FT::Reals, Json::array()},
      {"wrench", "mean_angle", FT::Reals, Json::array()},
  };
}

std::vector<Field> build_schema(std::string_view command) {
  std::vector<Field> s = run_fields();
  auto add = [&s](std::vector<Field> more) { s.insert(s.end(), more.begin(), more.end()); };
  if (command == "motion-mc") {
    add(arm_fields());
    add(model_fields());
    add({{"motion_mc", "runs", FT::Count, 500}, {"motion_mc", "write_runs", FT::Flag, false}});
  } else if (command == "calibrate") {
    add(arm_fields());
    add({
        {"calibrate", "runs", FT::Count, 100},
        {"calibrate", "alpha1", FT::Real, 0.5},
        {"calibrate", "alpha2", FT::Real, 0.5},
        {"calibrate", "beta1", FT::Real, 0.5},
        {"calibrate", "beta2", FT::Real, 0.5},
        {"calibrate", "relative_residuals", FT::Flag, true},
        {"calibrate", "target", FT::Text, "inverse"},
        {"calibrate", "inner_runs", FT::Count, 100},
        {"calibrate", "refine_iterations", FT::Count, 24},
        {"calibrate", "u_tilde_grid", FT::Reals, {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}},
        {"calibrate", "alpha_grid", FT::Reals, {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0}},
    });
  } else if (command == "filter") {
    add(arm_fields());
    add(model_fields());
    add({
        {"sensor", "final_bias", FT::Real, 0.02},
        {"sensor", "base_std", FT::Real, 0.01},
        {"sensor", "std_amplitude", FT::Real, 0.005},
        {"sensor", "likelihood_std", FT::Real, 0.01},
        {"filter", "runs", FT::Count, 50},
        {"filter", "particles", FT::Count, 1000},
        {"filter", "resample", FT::Text, "systematic"},
        {"filter", "write_runs", FT::Flag, true},
    });
  } else if (command == "wrench-cov") {
    add(wrench_fields());
    add({
        {"wrench", "agents", FT::Count, 3},
        {"wrench", "models", FT::Count, 20},
        {"wrench", "draws", FT::Count, 1000000},
        {"wrench", "sigma_s", FT::Reals, Json::array()},
    });
  } else if (command == "wrench-fit") {
    add(wrench_fields());
    add({{"wrench", "agents", FT::Count, 3}, {"wrench", "systems", FT::Count, 1000}});
  } else if (command == "wrench-hist") {
    add(wrench_fields());
    add({
        {"wrench", "m_list", FT::Counts, {3, 5, 10, 15, 20}},
        {"wrench", "n_train", FT::Count, 200},
        {"wrench", "n_test", FT::Count, 500},
    });
  } else if (command != "selftest") {
    s.clear();
  }
  return s;
}

Json convert(const YAML::Node& node, FieldType type, const std::string& name) {
  try {
    switch (type) {
      case FT::Flag: return node.as<bool>();
      case FT::Count: return node.as<std::uint64_t>();
      case FT::Real: return node.as<double>();
      case FT::Text: return node.as<std::string>();
      case FT::Reals:
      case FT::Counts: {
        if (!node.IsSequence()) config_error(name + " must be a list");
        Json out = Json::array();
        for (const auto& item : node) {
          if (type == FT::Reals) {
            out.push_back(item.as<double>());
          } else {
            out.push_back(item.as<std::uint64_t>());
          }
        }
        return out;
      }
    }
  } catch (const YAML::Exception&) {
    config_error(name + " has the wrong type");
  }
  config_error(name + " has an unsupported type");
}

const Field* find_field(const std::vector<Field>& schema, const std::string& section,
                        const std::string& key) {
  for (const auto& f : schema) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

void assign(Json& values, const std::vector<Field>& schema, const std::string& section,
            const std::string& key, const YAML::Node& node) {
  const Field* f = find_field(schema, section, key);
  if (f == nullptr) config_error("unknown key " + section + "." + key);
  values[section][key] = convert(node, f->type, section + "." + key);
}

}  // namespace

const std::vector<Field>& schema_for(std::string_view command) {
  static const std::map<std::string, std::vector<Field>, std::less<>> schemas = [] {
    std::map<std::string, std::vector<Field>, std::less<>> m;
    for (const char* c : {"motion-mc", "calibrate", "filter", "wrench-cov", "wrench-fit",
                          "wrench-hist", "selftest"}) {
      m.emplace(c, build_schema(c));
    }
    return m;
  }();
  static const std::vector<Field> none;
  const auto it = schemas.find(command);
  return it == schemas.end() ? none : it->second;
}

Config Config::load(std::string_view command, const std::string& path,
                    const std::vector<std::string>& overrides) {
  const auto& schema = schema_for(command);
  if (schema.empty()) config_error("unknown subcommand " + std::string(command));
  Config cfg;
  cfg.command_ = std::string(command);
  for (const auto& f : schema) cfg.values_[f.section][f.key] = f.fallback;

  if (!path.empty()) {
    YAML::Node root;
    try {
      root = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
      config_error("cannot read " + path + ": " + e.what());
    }
    if (root.IsDefined() && !root.IsNull()) {
      if (!root.IsMap()) config_error("top level of " + path + " must be a mapping of sections");
      for (const auto& sec : root) {
        const auto section = sec.first.as<std::string>();
        if (!sec.second.IsMap()) config_error("section " + section + " must be a mapping");
        for (const auto& kv : sec.second) assign(cfg.values_, schema, section, kv.first.as<std::string>(), kv.second);
      }
    }
  }

  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      config_error("override '" + o + "' is not section.key=value");
    }
    YAML::Node node;
    try {
      node = YAML::Load(o.substr(eq + 1));
    } catch (const YAML::Exception&) {
      config_error("cannot parse the value of override '" + o + "'");
    }
    assign(cfg.values_, schema, o.substr(0, dot), o.substr(dot + 1, eq - dot - 1), node);
  }

  const auto kind = cfg.text("run", "kind");
  if (!kind.empty() && kind != command) {
    config_error("config is for '" + kind + "', not '" + std::string(command) + "'");
  }
  return cfg;
}

const Json& Config::at(const std::string& section, const std::string& key) const {
  const auto s = values_.find(section);
  if (s == values_.end() || !s->contains(key)) config_error("missing " + section + "." + key);
  return (*s)[key];
}

bool Config::flag(const std::string& section, const std::string& key) const {
  return at(section, key).get<bool>();
}

std::uint64_t Config::count(const std::string& section, const std::string& key) const {
  return at(section, key).get<std::uint64_t>();
}

double Config::real(const std::string& section, const std::string& key) const {
  return at(section, key).get<double>();
}

std::string Config::text(const std::string& section, const std::string& key) const {
  return at(section, key).get<std::string>();
}

std::vector<double> Config::reals(const std::string& section, const std::string& key) const {
  return at(section, key).get<std::vector<double>>();
}

std::vector<std::uint64_t> Config::counts(const std::string& section, const std::string& key) const {
  return at(section, key).get<std::vector<std::uint64_t>>();
}

void Config::set_seed(std::uint64_t seed) { values_["run"]["seed"] = seed; }

void Config::set_output(const std::string& dir) { values_["run"]["output"] = dir; }

Json Config::canonical() const {
  Json c = values_;
  c["run"].erase("output");
  c["run"]["kind"] = command_;
  return c;
}

std::string Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical().dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rmtu::cli
