#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "polysrc/fields.hpp"
#include "polysrc/kernel.hpp"

namespace polysrc {

struct ExperimentConfig {
  kernel::ModelParams model;

  struct Grid {
    double extent = 1.0;
    int N = 32;
    int source_order = 2;
  } grid;

  struct Quadrature {
    int n_theta = 32;
    int n_phi = 32;
  } quadrature;

  fields::ProfileSpec source = fields::smooth_bump(1.0, 0.85);
  fields::ProfileSpec potential = [] {
    fields::ProfileSpec p;
    p.kind = "zero";
    return p;
  }();

  struct MonteCarlo {
    uint64_t P = 10000;
    uint64_t master_seed = 20240917;
    bool reproducible = true;
    int block = 256;
    int batches = 10;
  } monte_carlo;

  struct Probes {
    std::string kind = "auto";  // auto | plane_wave | cgo
    double zeta = 6.0;
    double dgamma = 0.5;
    double t = 2.0;
    double t_min = 0.0;
    double tau = 0.5;
    bool t_rule = false;
    int box_points = 64;
    double box_side = 0.0;  // 0: 4R + 2
    std::vector<Vec3> extra;  // additional frequencies, estimated but not synthesized
  } probes;

  struct Sweep {
    std::vector<uint64_t> P_values;
  } sweep;

  struct Correlation {
    bool enabled = true;
    bool second_moments = false;
  } correlation;

  struct Solver {
    double tolerance = 1e-8;
    int restart = 50;
    int max_iterations = 500;
  } solver;

  struct Outputs {
    std::string directory = "polysrc_out";
    bool traces = true;
    int eval_points = 33;
  } outputs;

  /// Resolved probe kind: auto picks plane waves when q = 0.
  std::string probe_kind() const;

  /// Re-checks every module precondition; throws ConfigError.
  void validate() const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);

  /// SHA-256 of the canonical JSON (sorted keys) of everything that affects
  /// results; `outputs` is excluded. Independent of key order in the file.
  std::string hash() const;

  /// Hash of the settings that determine the boundary traces (model, grid,
  /// quadrature, profiles, seed, solver). Trace archives carry this one.
  std::string data_hash() const;
};

}  // namespace polysrc
