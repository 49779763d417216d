#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "polysrc/config.hpp"
#include "polysrc/errors.hpp"
#include "polysrc/experiment.hpp"
#include "polysrc/parallel.hpp"
#include "polysrc/selftest.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
  int threads = 0;
  std::string out;
  bool reproducible = false;
};

void add_common(CLI::App* app, Common& c, bool needs_config) {
  auto* opt = app->add_option("--config", c.config, "experiment config (JSON)");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "override monte_carlo.master_seed");
  app->add_option("--threads", c.threads, "worker threads (default: POLYSRC_THREADS or all cores)");
  app->add_option("--out", c.out, "output directory (default: outputs.directory)");
  app->add_flag("--reproducible", c.reproducible, "force the reproducible flag");
}

polysrc::ExperimentConfig load(const Common& c) {
  polysrc::ExperimentConfig cfg = polysrc::ExperimentConfig::load(c.config);
  if (c.seed) cfg.monte_carlo.master_seed = *c.seed;
  if (c.reproducible) cfg.monte_carlo.reproducible = true;
  if (!c.out.empty()) cfg.outputs.directory = c.out;
  cfg.validate();
  return cfg;
}

polysrc::experiment::CommandOptions command_options(const Common& c,
                                                    const polysrc::ExperimentConfig& cfg) {
  polysrc::experiment::CommandOptions o;
  o.out_dir = cfg.outputs.directory;
  o.threads = c.threads > 0 ? c.threads : polysrc::default_threads();
  o.log = [](const std::string& m) { std::cerr << "[polysrc] " << m << std::endl; };
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polysrc: stochastic polyharmonic source experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(POLYSRC_VERSION));

  Common c_direct, c_rec, c_sweep;
  std::string archive;
  bool inject = false, json_out = false;
  auto* direct = app.add_subcommand("direct", "simulate realizations and write boundary traces");
  add_common(direct, c_direct, true);
  auto* rec = app.add_subcommand("reconstruct", "estimate sigma_hat and synthesize sigma");
  add_common(rec, c_rec, true);
  rec->add_option("--archive", archive, "trace archive from `direct` (default: simulate inline)");
  auto* sweep = app.add_subcommand("sweep", "stability sweep over realization counts");
  add_common(sweep, c_sweep, true);
  auto* self = app.add_subcommand("selftest", "fast invariant suite");
  self->add_flag("--inject-kernel-fault", inject, "flip the kernel sign (the suite must fail)");
  self->add_flag("--json", json_out, "print the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*self) {
      polysrc::selftest::Options o;
      o.inject_kernel_sign_flip = inject;
      const auto checks = polysrc::selftest::run(o);
      if (json_out) {
        std::cout << polysrc::selftest::to_json(checks).dump(2) << "\n";
      } else {
        for (const auto& ch : checks) {
          std::printf("%-4s %-55s value=%.3e tol=%.1e\n", ch.passed ? "PASS" : "FAIL",
                      ch.name.c_str(), ch.value, ch.tolerance);
        }
      }
      return polysrc::selftest::all_passed(checks) ? 0 : 1;
    }
    nlohmann::json summary;
    if (*direct) {
      const auto cfg = load(c_direct);
      summary = polysrc::experiment::cmd_direct(cfg, command_options(c_direct, cfg));
    } else if (*rec) {
      const auto cfg = load(c_rec);
      auto o = command_options(c_rec, cfg);
      o.archive = archive;
      summary = polysrc::experiment::cmd_reconstruct(cfg, o);
    } else if (*sweep) {
      const auto cfg = load(c_sweep);
      summary = polysrc::experiment::cmd_sweep(cfg, command_options(c_sweep, cfg));
    }
    std::cout << summary.dump(2) << "\n";
    return 0;
  } catch (const polysrc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const polysrc::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const polysrc::FormatError& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kExitConfig;
  }
}
