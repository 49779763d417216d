#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "polysrc/config.hpp"
#include "polysrc/correlation.hpp"
#include "polysrc/direct.hpp"
#include "polysrc/probes.hpp"
#include "polysrc/recon.hpp"

namespace polysrc::experiment {

struct RunOptions {
  /// Ascending realization counts at which estimates are formed; the last
  /// one is the total.
  std::vector<uint64_t> checkpoints;
  bool estimate = true;         // probe functionals and reconstruction
  std::string archive_out;      // write traces here when set
  std::string archive_in;       // read traces instead of simulating
  std::string correlation_out;  // tensor checkpoint, rewritten at every checkpoint
  std::function<void(const std::string&)> log;
};

struct CheckpointResult {
  uint64_t P = 0;
  std::optional<correlation::DataStatistic> stat;
  recon::FourierEstimate fe;            // synthesis frequencies
  std::vector<recon::Estimate> extra;   // probes.extra frequencies
  Eigen::MatrixXcd batches;             // frequencies x batches
  recon::ReconstructionResult rec;
  double t_rule = std::numeric_limits<double>::quiet_NaN();
  std::optional<recon::ReconstructionResult> rec_rule;
};

struct RunResult {
  std::vector<CheckpointResult> checkpoints;
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage
  std::vector<std::string> warnings;
  int max_gmres_iterations = 0;
  double max_gmres_residual = 0.0;
};

/// Monte Carlo engine. Realizations are processed in blocks: noise charges
/// S on the source support, traces X = T S through the transfer matrix (or
/// one Lippmann-Schwinger solve per realization when the potential support
/// is too large), probe functionals BF = W X, then products and streaming
/// sums. Blocks are evaluated concurrently and folded in block order, so
/// results do not depend on the thread count.
class Experiment {
 public:
  Experiment(const ExperimentConfig& cfg, int threads);
  ~Experiment();

  const ExperimentConfig& config() const { return cfg_; }
  const fields::StrengthField& sigma() const { return sigma_; }
  const fields::PotentialField& potential() const { return q_; }
  const SphereQuadrature& quad() const { return quad_; }
  direct::DirectSolver& solver() { return *solver_; }
  probes::ProbeKind probe_kind() const { return kind_; }

  /// Synthesis frequencies followed by the extra ones.
  const std::vector<Vec3>& frequencies() const { return freqs_; }
  size_t synthesis_count() const { return n_synth_; }

  /// Probe weight rows: [w1 of every frequency; w2 of every frequency].
  const Eigen::MatrixXcd& weights();
  /// Probe pair weights for one frequency at CGO parameter t (plane waves ignore t).
  std::pair<Eigen::VectorXcd, Eigen::VectorXcd> pair_weights(const Vec3& gamma, double t);

  /// Trace columns for realizations [first, first + count).
  Eigen::MatrixXcd simulate(uint64_t first, uint64_t count);

  RunResult run(const RunOptions& opt);

 private:
  void ensure_transfer();

  ExperimentConfig cfg_;
  int threads_;
  fields::VolumeGrid grid_;
  fields::StrengthField sigma_;
  fields::PotentialField q_;
  SphereQuadrature quad_;
  probes::ProbeKind kind_;
  std::unique_ptr<direct::DirectSolver> solver_;
  std::unique_ptr<probes::CgoSolver> cgo_;
  std::vector<Vec3> freqs_;
  size_t n_synth_ = 0;
  Eigen::MatrixXcd W_;
  bool use_transfer_ = false;
  bool transfer_ready_ = false;
  Eigen::MatrixXd Tre_, Tim_;
  std::vector<double> sqrt_sigma_;  // on the source cells
  int gmres_iterations_ = 0;
  double gmres_residual_ = 0.0;
};

/// Files, checksums, timings and warnings of one command.
class Manifest {
 public:
  Manifest(std::string directory, std::string command, const ExperimentConfig& cfg);
  void add_file(const std::string& name);
  void timing(const std::string& stage, double seconds);
  void warn(const std::string& message);
  void absorb(const RunResult& r);
  /// Writes manifest.json into the directory.
  void write() const;
  nlohmann::json to_json() const;

 private:
  std::string dir_, command_, hash_, data_hash_;
  bool reproducible_;
  std::vector<std::pair<std::string, std::string>> files_;
  std::vector<std::pair<std::string, double>> timings_;
  std::vector<std::string> warnings_;
};

struct CommandOptions {
  std::string out_dir;
  int threads = 1;
  std::string archive;  // reconstruct: existing trace archive
  std::function<void(const std::string&)> log;
};

/// Simulates P realizations and writes the trace archive plus a radiation
/// residual report. Returns the summary JSON.
nlohmann::json cmd_direct(const ExperimentConfig& cfg, const CommandOptions& opt);

/// Estimates sigma_hat on the frequency ball and synthesizes sigma_rec.
/// Traces come from `opt.archive` when set, otherwise they are simulated.
nlohmann::json cmd_reconstruct(const ExperimentConfig& cfg, const CommandOptions& opt);

/// One nested run over sweep.P_values with a (P, M, error) table and fitted slopes.
nlohmann::json cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opt);

/// Summary of one checkpoint as JSON.
nlohmann::json checkpoint_json(const CheckpointResult& c);

}  // namespace polysrc::experiment
