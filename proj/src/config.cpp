#include "polysrc/config.hpp"

#include <cmath>
#include <fstream>

#include "polysrc/errors.hpp"
#include "polysrc/io.hpp"
#include "polysrc/probes.hpp"

namespace polysrc {

using nlohmann::json;

namespace {

json profile_json(const fields::ProfileSpec& p) {
  return {{"kind", p.kind},     {"amplitude", p.amplitude}, {"radius", p.radius},
          {"width", p.width},   {"offset", p.offset},       {"s_nominal", p.s_nominal}};
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
  }
}

fields::ProfileSpec profile_from(const json& j, const std::string& where,
                                 fields::ProfileSpec p) {
  check_keys(j, where, {"kind", "amplitude", "radius", "width", "offset", "s_nominal"});
  read(j, "kind", p.kind);
  read(j, "amplitude", p.amplitude);
  read(j, "radius", p.radius);
  read(j, "width", p.width);
  read(j, "offset", p.offset);
  read(j, "s_nominal", p.s_nominal);
  return p;
}

}  // namespace

std::string ExperimentConfig::probe_kind() const {
  if (probes.kind == "auto") return potential.is_zero() ? "plane_wave" : "cgo";
  return probes.kind;
}

void ExperimentConfig::validate() const {
  model.validate();
  fields::make_grid(grid.extent, grid.N);
  if (grid.source_order < 1 || grid.source_order > 8) {
    throw ConfigError("grid.source_order must be in [1, 8]");
  }
  if (quadrature.n_theta < 2 || quadrature.n_phi < 2) {
    throw ConfigError("quadrature needs n_theta, n_phi >= 2");
  }
  source.validate();
  if (source.amplitude < 0.0) throw ConfigError("source amplitude must be >= 0");
  potential.validate();
  if (source.support_radius() > 1.0 || potential.support_radius() > 1.0) {
    throw ConfigError("profiles must be supported in the unit ball");
  }
  if (monte_carlo.P < 1) throw ConfigError("monte_carlo.P must be >= 1");
  if (monte_carlo.block < 1) throw ConfigError("monte_carlo.block must be >= 1");
  if (monte_carlo.batches < 2) throw ConfigError("monte_carlo.batches must be >= 2");
  const std::string kind = probe_kind();
  if (kind != "plane_wave" && kind != "cgo") {
    throw ConfigError("probes.kind must be auto, plane_wave or cgo");
  }
  if (kind == "plane_wave" && !potential.is_zero()) {
    throw ConfigError("plane-wave probes need q = 0; use cgo probes with a potential");
  }
  if (!(probes.zeta >= 0.0) || !(probes.dgamma > 0.0)) {
    throw ConfigError("probes.zeta must be >= 0 and probes.dgamma > 0");
  }
  if (kind == "plane_wave" && !(probes.zeta < 2.0 * model.k)) {
    throw ConfigError("plane-wave probes need zeta < 2k");
  }
  if (kind == "cgo") {
    if (!(probes.t > 0.5 * probes.zeta)) throw ConfigError("cgo probes need t > zeta / 2");
    if (probes.t < probes.t_min) throw ConfigError("probes.t is below probes.t_min");
    if (probes.t > probes::max_conditioned_t(model.R)) {
      throw ConfigError("probes.t fails the conditioning guard exp(2 R t) <= 1e14");
    }
    if (probes.box_points < 8 || probes.box_points % 2 != 0) {
      throw ConfigError("probes.box_points must be even and >= 8");
    }
    if (!(probes.tau > 0.0 && probes.tau < 1.0)) throw ConfigError("probes.tau must be in (0, 1)");
  }
  for (const Vec3& g : probes.extra) {
    if (kind == "plane_wave" && !(g.norm() < 2.0 * model.k)) {
      throw ConfigError("probes.extra frequency outside |gamma| < 2k");
    }
  }
  if (!(solver.tolerance > 0.0) || solver.restart < 1 || solver.max_iterations < 1) {
    throw ConfigError("invalid solver settings");
  }
  for (uint64_t P : sweep.P_values) {
    if (P < 2) throw ConfigError("sweep.P_values entries must be >= 2");
  }
  if (outputs.eval_points < 2) throw ConfigError("outputs.eval_points must be >= 2");
}

json ExperimentConfig::to_json() const {
  json extra = json::array();
  for (const Vec3& g : probes.extra) extra.push_back({g[0], g[1], g[2]});
  return {
      {"model", {{"n", model.n}, {"k", model.k}, {"R", model.R}}},
      {"grid", {{"extent", grid.extent}, {"N", grid.N}, {"source_order", grid.source_order}}},
      {"quadrature", {{"n_theta", quadrature.n_theta}, {"n_phi", quadrature.n_phi}}},
      {"source", profile_json(source)},
      {"potential", profile_json(potential)},
      {"monte_carlo",
       {{"P", monte_carlo.P},
        {"master_seed", monte_carlo.master_seed},
        {"reproducible", monte_carlo.reproducible},
        {"block", monte_carlo.block},
        {"batches", monte_carlo.batches}}},
      {"probes",
       {{"kind", probes.kind},
        {"zeta", probes.zeta},
        {"dgamma", probes.dgamma},
        {"t", probes.t},
        {"t_min", probes.t_min},
        {"tau", probes.tau},
        {"t_rule", probes.t_rule},
        {"box_points", probes.box_points},
        {"box_side", probes.box_side},
        {"extra", extra}}},
      {"sweep", {{"P_values", sweep.P_values}}},
      {"correlation",
       {{"enabled", correlation.enabled}, {"second_moments", correlation.second_moments}}},
      {"solver",
       {{"tolerance", solver.tolerance},
        {"restart", solver.restart},
        {"max_iterations", solver.max_iterations}}},
      {"outputs",
       {{"directory", outputs.directory},
        {"traces", outputs.traces},
        {"eval_points", outputs.eval_points}}},
  };
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, "", {"model", "grid", "quadrature", "source", "potential", "monte_carlo", "probes",
                     "sweep", "correlation", "solver", "outputs"});
  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, "model", {"n", "k", "R"});
    read(m, "n", c.model.n);
    read(m, "k", c.model.k);
    read(m, "R", c.model.R);
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, "grid", {"extent", "N", "source_order"});
    read(g, "extent", c.grid.extent);
    read(g, "N", c.grid.N);
    read(g, "source_order", c.grid.source_order);
  }
  if (j.contains("quadrature")) {
    const json& q = j["quadrature"];
    check_keys(q, "quadrature", {"n_theta", "n_phi"});
    read(q, "n_theta", c.quadrature.n_theta);
    read(q, "n_phi", c.quadrature.n_phi);
  }
  if (j.contains("source")) c.source = profile_from(j["source"], "source", c.source);
  if (j.contains("potential")) c.potential = profile_from(j["potential"], "potential", c.potential);
  if (j.contains("monte_carlo")) {
    const json& m = j["monte_carlo"];
    check_keys(m, "monte_carlo", {"P", "master_seed", "reproducible", "block", "batches"});
    read(m, "P", c.monte_carlo.P);
    read(m, "master_seed", c.monte_carlo.master_seed);
    read(m, "reproducible", c.monte_carlo.reproducible);
    read(m, "block", c.monte_carlo.block);
    read(m, "batches", c.monte_carlo.batches);
  }
  if (j.contains("probes")) {
    const json& p = j["probes"];
    check_keys(p, "probes", {"kind", "zeta", "dgamma", "t", "t_min", "tau", "t_rule", "box_points",
                             "box_side", "extra"});
    read(p, "kind", c.probes.kind);
    read(p, "zeta", c.probes.zeta);
    read(p, "dgamma", c.probes.dgamma);
    read(p, "t", c.probes.t);
    read(p, "t_min", c.probes.t_min);
    read(p, "tau", c.probes.tau);
    read(p, "t_rule", c.probes.t_rule);
    read(p, "box_points", c.probes.box_points);
    read(p, "box_side", c.probes.box_side);
    if (p.contains("extra")) {
      std::vector<std::vector<double>> ex;
      read(p, "extra", ex);
      for (const auto& v : ex) {
        if (v.size() != 3) throw ConfigError("probes.extra entries must have 3 components");
        c.probes.extra.emplace_back(v[0], v[1], v[2]);
      }
    }
  }
  if (j.contains("sweep")) {
    check_keys(j["sweep"], "sweep", {"P_values"});
    read(j["sweep"], "P_values", c.sweep.P_values);
  }
  if (j.contains("correlation")) {
    const json& s = j["correlation"];
    check_keys(s, "correlation", {"enabled", "second_moments"});
    read(s, "enabled", c.correlation.enabled);
    read(s, "second_moments", c.correlation.second_moments);
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, "solver", {"tolerance", "restart", "max_iterations"});
    read(s, "tolerance", c.solver.tolerance);
    read(s, "restart", c.solver.restart);
    read(s, "max_iterations", c.solver.max_iterations);
  }
  if (j.contains("outputs")) {
    const json& o = j["outputs"];
    check_keys(o, "outputs", {"directory", "traces", "eval_points"});
    read(o, "directory", c.outputs.directory);
    read(o, "traces", c.outputs.traces);
    read(o, "eval_points", c.outputs.eval_points);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return from_json(j);
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("outputs");
  return io::sha256_hex(j.dump());
}

std::string ExperimentConfig::data_hash() const {
  json j = to_json();
  json d = {{"model", j["model"]},
            {"grid", j["grid"]},
            {"quadrature", j["quadrature"]},
            {"source", j["source"]},
            {"potential", j["potential"]},
            {"master_seed", monte_carlo.master_seed},
            {"solver", j["solver"]}};
  return io::sha256_hex(d.dump());
}

}  // namespace polysrc
