#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "rmtu/error.hpp"
#include "rmtu/parallel.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Subcommand {
  const char* name;
  const char* help;
};

constexpr Subcommand kSubcommands[] = {
    {"motion-mc", "Ensemble simulation and per-step std of the three motion models"},
    {"calibrate", "Fit Sigma_omega, sigma_B and the Gaussian (u, alpha) to a simulated ensemble"},
    {"filter", "Particle filter runs with every motion model and bound-quality metrics"},
    {"wrench-cov", "Closed-form wrench covariance against the product Monte Carlo"},
    {"wrench-fit", "Estimate Sigma_S over random cable systems"},
    {"wrench-hist", "Relative variance error histograms over agent counts"},
    {"selftest", "Fast invariant suite"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-matrix uncertainty experiments for manipulators and cable systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out_dir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "YAML experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed (overrides run.seed)");
  app.add_option("--threads", threads, "Worker threads, 0 for all cores");
  app.add_option("--out", out_dir, "Output directory (overrides run.output)");
  app.add_option("--set", overrides, "Override as section.key=value, repeatable");
  for (const auto& s : kSubcommands) app.add_subcommand(s.name, s.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    auto cfg = rmtu::cli::Config::load(command, config_path, overrides);
    if (seed) cfg.set_seed(*seed);
    if (!out_dir.empty()) cfg.set_output(out_dir);
    rmtu::parallel::set_thread_count(threads);

    rmtu::cli::OutputDir out(cfg.text("run", "output"),
                             {command, cfg.hash(), cfg.count("run", "seed")});
    out.write_json("config.json", {{"config", cfg.canonical()}});

    const auto start = std::chrono::steady_clock::now();
    const int status = rmtu::cli::run_command(cfg, out);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.write_runtime(seconds);
    std::cerr << command << ": wrote " << out.path().string() << " in " << seconds << " s\n";
    return status;
  } catch (const rmtu::Error& e) {
    if (e.kind() == rmtu::ErrorKind::ConfigError) {
      std::cerr << "config error: " << e.what() << '\n';
      return kExitConfig;
    }
    std::cerr << "numerical failure [" << e.name() << "]: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}
