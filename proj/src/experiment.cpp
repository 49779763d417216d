#include "polysrc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "polysrc/errors.hpp"
#include "polysrc/io.hpp"
#include "polysrc/parallel.hpp"

namespace polysrc {

int default_threads() {
  if (const char* env = std::getenv("POLYSRC_THREADS")) {
    const int t = std::atoi(env);
    if (t >= 1) return t;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace polysrc

namespace polysrc::experiment {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPiCubed = 8.0 * kPi * kPi * kPi;
constexpr size_t kTransferLimit = 8000;

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void say(const RunOptions& opt, const std::string& msg) {
  if (opt.log) opt.log(msg);
}

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << text;
  }
  fs::rename(tmp, path);
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

Experiment::Experiment(const ExperimentConfig& cfg, int threads)
    : cfg_(cfg), threads_(std::max(1, threads)) {
  cfg_.validate();
  grid_ = fields::make_grid(cfg_.grid.extent, cfg_.grid.N);
  sigma_ = fields::sample_strength(cfg_.source, grid_);
  q_ = fields::sample_potential(cfg_.potential, grid_);
  quad_ = build_sphere_quadrature(cfg_.model.R, cfg_.quadrature.n_theta, cfg_.quadrature.n_phi);
  kind_ = cfg_.probe_kind() == "cgo" ? probes::ProbeKind::cgo : probes::ProbeKind::plane_wave;

  direct::DirectOptions dopt;
  dopt.source.gauss_order = cfg_.grid.source_order;
  dopt.gmres.restart = cfg_.solver.restart;
  dopt.gmres.max_iterations = cfg_.solver.max_iterations;
  dopt.gmres.tolerance = cfg_.solver.tolerance;
  dopt.threads = threads_;
  solver_ = std::make_unique<direct::DirectSolver>(cfg_.model, sigma_, q_, quad_, dopt);

  if (kind_ == probes::ProbeKind::cgo) {
    probes::CgoBox box{cfg_.probes.box_side, cfg_.probes.box_points};
    cgo_ = std::make_unique<probes::CgoSolver>(cfg_.potential, cfg_.model, box);
  }
  freqs_ = recon::frequency_ball(cfg_.probes.zeta, cfg_.probes.dgamma);
  n_synth_ = freqs_.size();
  freqs_.insert(freqs_.end(), cfg_.probes.extra.begin(), cfg_.probes.extra.end());

  for (uint32_t c : solver_->source_cells()) sqrt_sigma_.push_back(sigma_.sqrt_values[c]);
  use_transfer_ = q_.is_zero() || q_.support().size() <= kTransferLimit;
}

Experiment::~Experiment() = default;

std::pair<VectorXcd, VectorXcd> Experiment::pair_weights(const Vec3& gamma, double t) {
  const int n = cfg_.model.n;
  if (kind_ == probes::ProbeKind::plane_wave) {
    const auto pair = probes::plane_wave_pair(gamma, cfg_.model);
    const auto [U1, U2] = probes::probe_boundary_data(pair, nullptr, nullptr, quad_, nullptr, cfg_.model);
    return {recon::probe_weights(U1, quad_, n), recon::probe_weights(U2, quad_, n)};
  }
  const auto pair = probes::cgo_pair(gamma, t, cfg_.model, cfg_.probes.t_min);
  const probes::CgoProbe p1 = cgo_->probe(pair.xi1);
  const probes::CgoProbe p2 = cgo_->probe(pair.xi2);
  const auto [U1, U2] = probes::probe_boundary_data(pair, &p1, &p2, quad_, nullptr, cfg_.model);
  return {recon::probe_weights(U1, quad_, n), recon::probe_weights(U2, quad_, n)};
}

const MatrixXcd& Experiment::weights() {
  if (W_.size() > 0) return W_;
  const Index F = static_cast<Index>(freqs_.size());
  const Index rows = 2 * cfg_.model.n * static_cast<Index>(quad_.size());
  W_.resize(2 * F, rows);
  // The first CGO probe fills the remainder cache; the rest reuse it.
  if (kind_ == probes::ProbeKind::cgo && F > 0) {
    const auto [w1, w2] = pair_weights(freqs_[0], cfg_.probes.t);
    W_.row(0) = w1.transpose();
    W_.row(F) = w2.transpose();
  }
  const size_t start = kind_ == probes::ProbeKind::cgo ? 1 : 0;
  parallel_for(start, freqs_.size(), threads_, [&](size_t f) {
    const auto [w1, w2] = pair_weights(freqs_[f], cfg_.probes.t);
    W_.row(static_cast<Index>(f)) = w1.transpose();
    W_.row(F + static_cast<Index>(f)) = w2.transpose();
  });
  return W_;
}

void Experiment::ensure_transfer() {
  if (transfer_ready_) return;
  if (use_transfer_) {
    solver_->transfer_matrix(Tre_, Tim_);
    solver_->boundary().release();
  } else {
    solver_->boundary().assemble(threads_);
  }
  transfer_ready_ = true;
}

MatrixXcd Experiment::simulate(uint64_t first, uint64_t count) {
  ensure_transfer();
  const auto& cells = solver_->source_cells();
  const Index rows = 2 * cfg_.model.n * static_cast<Index>(quad_.size());
  const Index B = static_cast<Index>(count);
  MatrixXcd X(rows, B);
  if (use_transfer_) {
    MatrixXd S(static_cast<Index>(cells.size()), B);
    std::vector<double> dw(cells.size());
    for (Index b = 0; b < B; ++b) {
      fields::sample_white_noise(grid_, cfg_.monte_carlo.master_seed, first + b, cells, dw.data());
      for (size_t i = 0; i < cells.size(); ++i) {
        S(static_cast<Index>(i), b) = sqrt_sigma_[i] * dw[i];
      }
    }
    if (cells.empty()) {
      X.setZero();
    } else {
      const MatrixXd re = Tre_ * S;
      const MatrixXd im = Tim_ * S;
      X.real() = re;
      X.imag() = im;
    }
    return X;
  }
  for (Index b = 0; b < B; ++b) {
    const auto w = fields::sample_white_noise(grid_, cfg_.monte_carlo.master_seed, first + b);
    const direct::BoundaryTrace tr = solver_->solve(w);
    X.col(b) = tr.data;
    gmres_iterations_ = std::max(gmres_iterations_, tr.iterations);
    gmres_residual_ = std::max(gmres_residual_, tr.residual);
  }
  return X;
}

RunResult Experiment::run(const RunOptions& opt) {
  if (opt.checkpoints.empty()) throw ConfigError("run: no realization counts given");
  std::vector<uint64_t> cps = opt.checkpoints;
  if (!std::is_sorted(cps.begin(), cps.end()) ||
      std::adjacent_find(cps.begin(), cps.end()) != cps.end() || cps.front() < 1) {
    throw ConfigError("run: realization counts must be positive and strictly increasing");
  }
  const uint64_t P = cps.back();
  const int n = cfg_.model.n;
  const size_t nodes = quad_.size();
  const Index rows = 2 * n * static_cast<Index>(nodes);
  RunResult result;
  Stopwatch clock;

  std::unique_ptr<io::TraceArchiveReader> reader;
  if (!opt.archive_in.empty()) {
    reader = std::make_unique<io::TraceArchiveReader>(opt.archive_in);
    if (reader->config_hash() != cfg_.data_hash()) {
      throw ConfigError("trace archive was produced with different model or source settings");
    }
    if (reader->n() != n || reader->nodes() != nodes) {
      throw ShapeMismatchError("trace archive shape does not match the configuration");
    }
    if (reader->count() < P) {
      throw ConfigError("trace archive holds " + std::to_string(reader->count()) +
                        " realizations, " + std::to_string(P) + " requested");
    }
  } else {
    say(opt, "assembling boundary operator");
    ensure_transfer();
    result.timings.emplace_back("assemble", clock.lap());
  }

  const Index F = static_cast<Index>(freqs_.size());
  if (opt.estimate) {
    say(opt, "building probe weights for " + std::to_string(F) + " frequencies");
    weights();
    result.timings.emplace_back("probes", clock.lap());
  }

  std::unique_ptr<io::TraceArchiveWriter> writer;
  if (!opt.archive_out.empty()) {
    writer = std::make_unique<io::TraceArchiveWriter>(opt.archive_out, cfg_.data_hash(), n, nodes, P);
  }
  std::unique_ptr<correlation::CorrelationTensor> tensor;
  if (cfg_.correlation.enabled) {
    tensor = std::make_unique<correlation::CorrelationTensor>(n, nodes,
                                                              cfg_.correlation.second_moments);
  }

  // Segments refine every checkpoint's batch partition, so batch sums are
  // sums of whole segments.
  const int nb = cfg_.monte_carlo.batches;
  std::vector<uint64_t> bounds{0};
  for (uint64_t c : cps) {
    for (int k = 1; k <= nb; ++k) bounds.push_back(c * static_cast<uint64_t>(k) / nb);
  }
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
  const size_t nseg = bounds.size() - 1;
  std::vector<VectorXcd> seg_sum;
  std::vector<Eigen::VectorXd> seg_sum2;
  if (opt.estimate) {
    seg_sum.assign(nseg, VectorXcd::Zero(F));
    seg_sum2.assign(nseg, Eigen::VectorXd::Zero(F));
  }

  // Blocks: fixed size, also split at checkpoints.
  std::vector<uint64_t> edges;
  for (uint64_t b = 0; b < P; b += static_cast<uint64_t>(cfg_.monte_carlo.block)) edges.push_back(b);
  edges.insert(edges.end(), cps.begin(), cps.end());
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  const size_t nblocks = edges.size() - 1;

  const std::vector<Vec3> points = recon::evaluation_points(cfg_.outputs.eval_points);
  const fields::ProfileSpec truth = cfg_.source;
  double t_sim = 0.0, t_est = 0.0, t_corr = 0.0, t_ckpt = 0.0;
  size_t next_cp = 0;

  auto do_checkpoint = [&](uint64_t Pc) {
    Stopwatch ck;
    CheckpointResult cr;
    cr.P = Pc;
    if (tensor) {
      cr.stat = correlation::compute_M(*tensor, quad_);
      if (!opt.correlation_out.empty()) {
        const std::string tmp = opt.correlation_out + ".tmp";
        tensor->save(tmp, cfg_.hash());
        fs::rename(tmp, opt.correlation_out);
      }
    }
    if (opt.estimate) {
      VectorXcd sum = VectorXcd::Zero(F);
      Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(F);
      size_t s = 0;
      for (; s < nseg && bounds[s + 1] <= Pc; ++s) {
        sum += seg_sum[s];
        sum2 += seg_sum2[s];
      }
      const double Pd = static_cast<double>(Pc);
      std::vector<recon::Estimate> est(static_cast<size_t>(F));
      for (Index f = 0; f < F; ++f) {
        const cplx mean = sum[f] / Pd;
        recon::Estimate& e = est[static_cast<size_t>(f)];
        e.count = Pc;
        e.value = mean / kTwoPiCubed;
        if (Pc > 1) {
          const double var = std::max(0.0, sum2[f] / Pd - std::norm(mean)) * Pd / (Pd - 1.0);
          e.se = std::sqrt(var / Pd) / kTwoPiCubed;
        }
      }
      cr.fe.zeta = cfg_.probes.zeta;
      cr.fe.dgamma = cfg_.probes.dgamma;
      for (size_t f = 0; f < n_synth_; ++f) {
        cr.fe.frequencies.push_back(freqs_[f]);
        cr.fe.values.push_back(est[f].value);
        cr.fe.std_errors.push_back(est[f].se);
      }
      cr.extra.assign(est.begin() + static_cast<long>(n_synth_), est.end());
      const Index Fs = static_cast<Index>(n_synth_);
      if (Pc >= static_cast<uint64_t>(nb) && nb >= 2) {
        cr.batches = MatrixXcd::Zero(Fs, nb);
        for (int k = 0; k < nb; ++k) {
          const uint64_t lo = Pc * static_cast<uint64_t>(k) / nb;
          const uint64_t hi = Pc * static_cast<uint64_t>(k + 1) / nb;
          VectorXcd bsum = VectorXcd::Zero(F);
          for (size_t g = 0; g < nseg; ++g) {
            if (bounds[g] >= lo && bounds[g + 1] <= hi) bsum += seg_sum[g];
          }
          cr.batches.col(k) = bsum.head(Fs) / (static_cast<double>(hi - lo) * kTwoPiCubed);
        }
      }
      if (Fs > 0) {
        cr.rec = recon::synthesize_sigma(cr.fe, points, &truth,
                                         cr.batches.size() > 0 ? &cr.batches : nullptr);
      }
      if (cfg_.probes.t_rule && kind_ == probes::ProbeKind::cgo && cr.stat && Fs > 0) {
        const double M = cr.stat->M;
        cr.t_rule = (1.0 - cfg_.probes.tau) * std::log(3.0 + 1.0 / M) / (4.0 * cfg_.model.R);
        const bool admissible = cr.t_rule > 0.5 * cfg_.probes.zeta && cr.t_rule >= cfg_.probes.t_min &&
                                cr.t_rule <= probes::max_conditioned_t(cfg_.model.R);
        if (admissible) {
          recon::FourierEstimate fr = cr.fe;
          std::vector<cplx> vals(n_synth_);
          parallel_for(0, n_synth_, threads_, [&](size_t f) {
            const auto [w1, w2] = pair_weights(freqs_[f], cr.t_rule);
            vals[f] = recon::contract_correlations(*tensor, w1, w2) / kTwoPiCubed;
          });
          fr.values = vals;
          fr.std_errors.assign(n_synth_, 0.0);
          cr.rec_rule = recon::synthesize_sigma(fr, points, &truth);
        } else {
          std::ostringstream w;
          w << "t-rule value t = " << cr.t_rule << " at P = " << Pc
            << " is not admissible (needs t > zeta/2, t >= t_min and the conditioning guard)";
          result.warnings.push_back(w.str());
        }
      }
    }
    result.checkpoints.push_back(std::move(cr));
    t_ckpt += ck.lap();
    say(opt, "checkpoint P = " + std::to_string(Pc));
  };

  // Blocks are computed in waves of `threads_` and folded in order.
  const size_t wave = static_cast<size_t>(threads_);
  for (size_t b0 = 0; b0 < nblocks; b0 += wave) {
    const size_t b1 = std::min(nblocks, b0 + wave);
    std::vector<MatrixXcd> Xs(b1 - b0), prods(b1 - b0);
    Stopwatch sw;
    if (reader) {
      for (size_t b = b0; b < b1; ++b) {
        const uint64_t cnt = edges[b + 1] - edges[b];
        MatrixXcd& X = Xs[b - b0];
        X.resize(rows, static_cast<Index>(cnt));
        direct::BoundaryTrace tr;
        for (uint64_t r = 0; r < cnt; ++r) {
          if (!reader->next(tr)) throw FormatError("trace archive ended early");
          X.col(static_cast<Index>(r)) = tr.data;
        }
      }
    }
    // Only the transfer path is safe to run concurrently; GMRES solves use
    // the solver's own threads.
    const int sim_threads = (reader || use_transfer_) ? threads_ : 1;
    parallel_for(b0, b1, sim_threads, [&](size_t b) {
      if (!reader) Xs[b - b0] = simulate(edges[b], edges[b + 1] - edges[b]);
    });
    t_sim += sw.lap();
    if (opt.estimate) {
      parallel_for(b0, b1, threads_, [&](size_t b) {
        const MatrixXcd BF = W_ * Xs[b - b0];
        prods[b - b0] = BF.topRows(F).cwiseProduct(BF.bottomRows(F));
      });
      t_est += sw.lap();
    }
    for (size_t b = b0; b < b1; ++b) {
      const MatrixXcd& X = Xs[b - b0];
      if (tensor) {
        Stopwatch tc;
        tensor->accumulate_block(X);
        t_corr += tc.lap();
      }
      if (writer) {
        direct::BoundaryTrace tr;
        tr.n = n;
        tr.nodes = nodes;
        for (Index r = 0; r < X.cols(); ++r) {
          tr.realization = edges[b] + static_cast<uint64_t>(r);
          tr.data = X.col(r);
          writer->write(tr);
        }
      }
      if (opt.estimate) {
        const MatrixXcd& pr = prods[b - b0];
        for (Index r = 0; r < pr.cols(); ++r) {
          const uint64_t g = edges[b] + static_cast<uint64_t>(r);
          const size_t s = static_cast<size_t>(
              std::upper_bound(bounds.begin(), bounds.end(), g) - bounds.begin() - 1);
          seg_sum[s] += pr.col(r);
          seg_sum2[s] += pr.col(r).cwiseAbs2();
        }
      }
      if (next_cp < cps.size() && edges[b + 1] == cps[next_cp]) {
        do_checkpoint(cps[next_cp]);
        ++next_cp;
      }
    }
  }
  if (writer) writer->close();
  result.timings.emplace_back("simulate", t_sim);
  if (opt.estimate) result.timings.emplace_back("probe_functionals", t_est);
  if (tensor) result.timings.emplace_back("correlation", t_corr);
  result.timings.emplace_back("checkpoints", t_ckpt);
  result.max_gmres_iterations = gmres_iterations_;
  result.max_gmres_residual = gmres_residual_;
  if (!use_transfer_ && !reader) {
    result.warnings.push_back("potential support exceeds the dense transfer limit; used one "
                              "GMRES solve per realization");
  }
  return result;
}

// ---------------------------------------------------------------------------

Manifest::Manifest(std::string directory, std::string command, const ExperimentConfig& cfg)
    : dir_(std::move(directory)),
      command_(std::move(command)),
      hash_(cfg.hash()),
      data_hash_(cfg.data_hash()),
      reproducible_(cfg.monte_carlo.reproducible) {}

void Manifest::add_file(const std::string& name) {
  files_.emplace_back(name, io::sha256_file((fs::path(dir_) / name).string()));
}

void Manifest::timing(const std::string& stage, double seconds) {
  timings_.emplace_back(stage, seconds);
}

void Manifest::warn(const std::string& message) { warnings_.push_back(message); }

void Manifest::absorb(const RunResult& r) {
  for (const auto& t : r.timings) timings_.push_back(t);
  for (const auto& w : r.warnings) warnings_.push_back(w);
}

json Manifest::to_json() const {
  json files = json::array();
  for (const auto& [name, digest] : files_) {
    files.push_back({{"path", name},
                     {"sha256", digest},
                     {"bytes", fs::file_size(fs::path(dir_) / name)}});
  }
  json timings = json::object();
  for (const auto& [stage, s] : timings_) timings[stage] = s;
  return {{"command", command_},     {"config_hash", hash_}, {"data_hash", data_hash_},
          {"version", POLYSRC_VERSION}, {"reproducible", reproducible_},
          {"files", files},          {"timings_seconds", timings}, {"warnings", warnings_}};
}

void Manifest::write() const {
  write_text(fs::path(dir_) / "manifest.json", to_json().dump(2) + "\n");
}

// ---------------------------------------------------------------------------

json checkpoint_json(const CheckpointResult& c) {
  json j = {{"P", c.P}};
  if (c.stat) {
    j["M"] = c.stat->M;
  }
  if (!c.fe.frequencies.empty()) {
    const auto& r = c.rec;
    j["linf_error"] = r.linf_error;
    j["linf_relative"] = r.linf_relative;
    j["l2_error"] = r.l2_error;
    j["l2_relative"] = r.l2_relative;
    j["linf_se"] = r.linf_se;
    j["max_imag"] = r.max_imag;
    j["imag_se"] = r.imag_se;
    j["argmax"] = vec_json(r.points[r.argmax]);
    double se_max = 0.0;
    for (double s : c.fe.std_errors) se_max = std::max(se_max, s);
    j["max_coefficient_se"] = se_max;
  }
  if (!std::isnan(c.t_rule)) {
    j["t_rule"] = c.t_rule;
    if (c.rec_rule) j["t_rule_linf_error"] = c.rec_rule->linf_error;
  }
  return j;
}

namespace {

fs::path prepare_dir(const CommandOptions& opt) {
  if (opt.out_dir.empty()) throw ConfigError("no output directory given");
  fs::create_directories(opt.out_dir);
  return fs::path(opt.out_dir);
}

void write_sigma_hat(const fs::path& path, const CheckpointResult& c) {
  std::ostringstream s;
  s << "gamma_x,gamma_y,gamma_z,re,im,se\n";
  for (size_t f = 0; f < c.fe.frequencies.size(); ++f) {
    const Vec3& g = c.fe.frequencies[f];
    s << fmt(g[0]) << ',' << fmt(g[1]) << ',' << fmt(g[2]) << ',' << fmt(c.fe.values[f].real())
      << ',' << fmt(c.fe.values[f].imag()) << ',' << fmt(c.fe.std_errors[f]) << '\n';
  }
  write_text(path, s.str());
}

/// sigma_rec on the full per_axis^3 grid, zero outside the unit ball.
void write_sigma_rec(const fs::path& path, const recon::ReconstructionResult& r, int per_axis) {
  std::vector<double> grid(static_cast<size_t>(per_axis) * per_axis * per_axis, 0.0);
  const double step = 2.0 / (per_axis - 1);
  for (size_t i = 0; i < r.points.size(); ++i) {
    const Vec3& x = r.points[i];
    const auto idx = [&](double v) { return static_cast<size_t>(std::lround((v + 1.0) / step)); };
    grid[(idx(x[0]) * per_axis + idx(x[1])) * per_axis + idx(x[2])] = r.sigma_rec[i];
  }
  const uint64_t d = static_cast<uint64_t>(per_axis);
  io::write_field(path.string(), grid, {d, d, d});
}

}  // namespace

json cmd_direct(const ExperimentConfig& cfg, const CommandOptions& opt) {
  const fs::path dir = prepare_dir(opt);
  ExperimentConfig traces_only = cfg;
  traces_only.correlation.enabled = false;
  Experiment ex(traces_only, opt.threads);
  Manifest man(dir.string(), "direct", cfg);
  RunOptions ro;
  ro.checkpoints = {cfg.monte_carlo.P};
  ro.estimate = false;
  ro.archive_out = (dir / "traces.pstr").string();
  ro.log = opt.log;
  const RunResult rr = ex.run(ro);
  man.absorb(rr);

  // Radiation residual on realization 0 through the exterior point-charge field.
  Stopwatch sw;
  const auto w = fields::sample_white_noise(ex.sigma().grid, cfg.monte_carlo.master_seed, 0);
  const VectorXcd f = ex.solver().source_charges(w);
  GmresResult info;
  const VectorXcd u = ex.potential().is_zero() ? VectorXcd::Zero(f.size())
                                               : ex.solver().volume_solution(f, &info);
  const std::vector<Vec3> dirs = {{1, 0, 0},  {0, 1, 0},  {0, 0, 1},
                                  {-1, 0, 0}, {0, -1, 0}, {0, 0, -1}};
  const direct::RadiationReport rad = direct::radiation_residual(ex.solver(), f, u, dirs);
  man.timing("radiation", sw.lap());

  json summary = {{"command", "direct"},
                  {"config_hash", cfg.hash()},
                  {"data_hash", cfg.data_hash()},
                  {"P", cfg.monte_carlo.P},
                  {"nodes", ex.quad().size()},
                  {"n", cfg.model.n},
                  {"radiation", {{"radii", rad.radii}, {"residual", rad.residual}}},
                  {"max_gmres_iterations", std::max(rr.max_gmres_iterations, info.iterations)},
                  {"max_gmres_residual", std::max(rr.max_gmres_residual, info.relative_residual)}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  man.add_file("traces.pstr");
  man.add_file("summary.json");
  man.write();
  return summary;
}

json cmd_reconstruct(const ExperimentConfig& cfg, const CommandOptions& opt) {
  const fs::path dir = prepare_dir(opt);
  if (!opt.archive.empty() && !fs::exists(opt.archive)) {
    throw ConfigError("trace archive not found: " + opt.archive);
  }
  Experiment ex(cfg, opt.threads);
  Manifest man(dir.string(), "reconstruct", cfg);
  RunOptions ro;
  ro.checkpoints = {cfg.monte_carlo.P};
  ro.archive_in = opt.archive;
  if (cfg.correlation.enabled) ro.correlation_out = (dir / "correlation.pscorr").string();
  ro.log = opt.log;
  const RunResult rr = ex.run(ro);
  man.absorb(rr);
  const CheckpointResult& c = rr.checkpoints.back();

  Stopwatch sw;
  const auto decay = recon::decay_diagnostic(ex.sigma());
  man.timing("decay_diagnostic", sw.lap());

  write_sigma_hat(dir / "sigma_hat.csv", c);
  write_sigma_rec(dir / "sigma_rec.bin", c.rec, cfg.outputs.eval_points);
  json extra = json::array();
  for (size_t i = 0; i < c.extra.size(); ++i) {
    const Vec3& g = cfg.probes.extra[i];
    extra.push_back({{"gamma", vec_json(g)},
                     {"re", c.extra[i].value.real()},
                     {"im", c.extra[i].value.imag()},
                     {"se", c.extra[i].se},
                     {"quadrature", {recon::fourier_transform(ex.sigma(), g).real(),
                                     recon::fourier_transform(ex.sigma(), g).imag()}}});
  }
  json summary = {{"command", "reconstruct"},
                  {"config_hash", cfg.hash()},
                  {"probe_kind", cfg.probe_kind()},
                  {"frequencies", ex.synthesis_count()},
                  {"zeta", cfg.probes.zeta},
                  {"dgamma", cfg.probes.dgamma},
                  {"result", checkpoint_json(c)},
                  {"extra", extra},
                  {"decay",
                   {{"s_nominal", decay.s_nominal},
                    {"sup_weighted", decay.sup_weighted},
                    {"head_weighted", decay.head_weighted},
                    {"tail_weighted", decay.tail_weighted},
                    {"fitted_exponent", decay.fitted_exponent},
                    {"violation", decay.violation},
                    {"c1", decay.c1},
                    {"s_fit", decay.s_fit}}}};
  if (cfg.probe_kind() == "cgo") summary["t"] = cfg.probes.t;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  man.add_file("sigma_hat.csv");
  man.add_file("sigma_rec.bin");
  man.add_file("summary.json");
  if (cfg.correlation.enabled) man.add_file("correlation.pscorr");
  man.write();
  return summary;
}

json cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opt) {
  if (cfg.sweep.P_values.empty()) throw ConfigError("sweep.P_values is empty");
  std::vector<uint64_t> Ps = cfg.sweep.P_values;
  std::sort(Ps.begin(), Ps.end());
  Ps.erase(std::unique(Ps.begin(), Ps.end()), Ps.end());
  const fs::path dir = prepare_dir(opt);
  Experiment ex(cfg, opt.threads);
  Manifest man(dir.string(), "sweep", cfg);
  RunOptions ro;
  ro.checkpoints = Ps;
  ro.log = opt.log;
  const RunResult rr = ex.run(ro);
  man.absorb(rr);

  std::ostringstream csv;
  csv << "P,M,linf_error,linf_se,l2_error,linf_relative,max_coefficient_se,t_rule\n";
  std::vector<double> logP, logM, logE, logSE;
  json rows = json::array();
  for (const auto& c : rr.checkpoints) {
    const json j = checkpoint_json(c);
    rows.push_back(j);
    const double M = c.stat ? c.stat->M : std::nan("");
    const double se = j.value("max_coefficient_se", 0.0);
    csv << c.P << ',' << fmt(M) << ',' << fmt(c.rec.linf_error) << ',' << fmt(c.rec.linf_se) << ','
        << fmt(c.rec.l2_error) << ',' << fmt(c.rec.linf_relative) << ',' << fmt(se) << ','
        << fmt(c.t_rule) << '\n';
    logP.push_back(std::log(static_cast<double>(c.P)));
    logE.push_back(std::log(c.rec.linf_error));
    logSE.push_back(std::log(se));
    if (c.stat) logM.push_back(std::log(M));
  }
  write_text(dir / "sweep.csv", csv.str());

  json slopes = json::object();
  bool monotone = true;
  for (size_t i = 1; i < rr.checkpoints.size(); ++i) {
    const auto& a = rr.checkpoints[i - 1].rec;
    const auto& b = rr.checkpoints[i].rec;
    if (b.linf_error > a.linf_error + std::max(a.linf_se, b.linf_se)) monotone = false;
  }
  if (logP.size() >= 2) {
    slopes["error_vs_P"] = recon::fit_line(logP, logE).first;
    slopes["error_vs_se"] = recon::fit_line(logSE, logE).first;
    if (logM.size() == logE.size()) slopes["error_vs_M"] = recon::fit_line(logM, logE).first;
  }
  json summary = {{"command", "sweep"},
                  {"config_hash", cfg.hash()},
                  {"probe_kind", cfg.probe_kind()},
                  {"rows", rows},
                  {"fitted_slopes", slopes},
                  {"monotone_within_se", monotone}};
  if (cfg.probe_kind() == "cgo") summary["t"] = cfg.probes.t;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  man.add_file("sweep.csv");
  man.add_file("summary.json");
  man.write();
  return summary;
}

}  // namespace polysrc::experiment
