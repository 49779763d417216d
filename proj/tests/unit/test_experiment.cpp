#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "polysrc/config.hpp"
#include "polysrc/errors.hpp"
#include "polysrc/experiment.hpp"
#include "polysrc/io.hpp"

using namespace polysrc;
using namespace polysrc::experiment;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const std::string& name) {
  const fs::path p = fs::path(POLYSRC_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.model = {2, 4.0, 1.2};
  c.grid.N = 12;
  c.quadrature = {8, 8};
  c.source = fields::smooth_bump(1.0, 0.85);
  c.monte_carlo.P = 60;
  c.monte_carlo.block = 16;
  c.monte_carlo.batches = 4;
  c.probes.zeta = 2.0;
  c.probes.extra = {Vec3(0.3, 0.0, 0.0)};
  c.outputs.eval_points = 9;
  c.validate();
  return c;
}

CommandOptions options(const std::string& dir, int threads = 1) {
  CommandOptions o;
  o.out_dir = dir;
  o.threads = threads;
  return o;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("direct with sigma = 0 writes zero traces; reruns are byte identical") {
    ExperimentConfig c = small_config();
    c.source.kind = "zero";
    c.monte_carlo.P = 1;
    const std::string a = tmp_dir("direct_a"), b = tmp_dir("direct_b");
    const auto s = cmd_direct(c, options(a));
    CHECK(s["P"] == 1);
    io::TraceArchiveReader rd((fs::path(a) / "traces.pstr").string());
    CHECK(rd.config_hash() == c.data_hash());
    direct::BoundaryTrace t;
    REQUIRE(rd.next(t));
    CHECK(t.data.cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(rd.next(t));

    cmd_direct(c, options(b));
    CHECK(io::sha256_file((fs::path(a) / "traces.pstr").string()) ==
          io::sha256_file((fs::path(b) / "traces.pstr").string()));
    const auto man = nlohmann::json::parse(slurp(fs::path(a) / "manifest.json"));
    CHECK(man["config_hash"] == c.hash());
    CHECK(man["files"].size() == 2);
  }

  TEST_CASE("reconstruct from an archive equals the inline run") {
    const ExperimentConfig c = small_config();
    const std::string d = tmp_dir("rec_direct"), r1 = tmp_dir("rec_inline"), r2 = tmp_dir("rec_archive");
    cmd_direct(c, options(d));
    const auto inline_run = cmd_reconstruct(c, options(r1));
    CommandOptions o = options(r2);
    o.archive = (fs::path(d) / "traces.pstr").string();
    const auto from_archive = cmd_reconstruct(c, o);
    CHECK(slurp(fs::path(r1) / "sigma_hat.csv") == slurp(fs::path(r2) / "sigma_hat.csv"));
    CHECK(inline_run["result"]["linf_error"] == from_archive["result"]["linf_error"]);
    CHECK(inline_run["result"]["M"].get<double>() > 0.0);
    CHECK(fs::exists(fs::path(r1) / "correlation.pscorr"));
    const auto f = io::read_field((fs::path(r1) / "sigma_rec.bin").string());
    CHECK(f.dims == std::vector<uint64_t>{9, 9, 9});

    // an archive written for other data settings is refused
    ExperimentConfig other = c;
    other.monte_carlo.master_seed += 1;
    CommandOptions o2 = options(tmp_dir("rec_mismatch"));
    o2.archive = o.archive;
    CHECK_THROWS_AS(cmd_reconstruct(other, o2), ConfigError);

    // a corrupted archive fails its checksum
    const fs::path bad = fs::path(tmp_dir("rec_corrupt")) / "traces.pstr";
    fs::copy_file(o.archive, bad);
    {
      std::fstream f(bad, std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(300);
      f.put('\x11');
    }
    CommandOptions o3 = options(tmp_dir("rec_corrupt_out"));
    o3.archive = bad.string();
    CHECK_THROWS_AS(cmd_reconstruct(c, o3), FormatError);
  }

  TEST_CASE("sigma = 0 reconstructs to zero") {
    ExperimentConfig c = small_config();
    c.source.kind = "zero";
    const auto s = cmd_reconstruct(c, options(tmp_dir("rec_zero")));
    CHECK(s["result"]["linf_error"].get<double>() == 0.0);
    CHECK(s["result"]["M"].get<double>() == 0.0);
  }

  TEST_CASE("single-point sweep equals reconstruct") {
    ExperimentConfig c = small_config();
    c.sweep.P_values = {c.monte_carlo.P};
    const auto rec = cmd_reconstruct(c, options(tmp_dir("sw_rec")));
    const auto sw = cmd_sweep(c, options(tmp_dir("sw_sweep")));
    REQUIRE(sw["rows"].size() == 1);
    CHECK(sw["rows"][0]["linf_error"] == rec["result"]["linf_error"]);
    CHECK(sw["rows"][0]["M"] == rec["result"]["M"]);
  }

  TEST_CASE("nested sweep checkpoints") {
    ExperimentConfig c = small_config();
    c.sweep.P_values = {40, 20, 60, 40};
    const auto sw = cmd_sweep(c, options(tmp_dir("sw_nested")));
    REQUIRE(sw["rows"].size() == 3);
    CHECK(sw["rows"][0]["P"] == 20);
    CHECK(sw["rows"][2]["P"] == 60);
    CHECK(sw["fitted_slopes"].contains("error_vs_P"));
    // the last checkpoint is the full run
    const auto rec = cmd_reconstruct(c, options(tmp_dir("sw_nested_rec")));
    CHECK(sw["rows"][2]["linf_error"] == rec["result"]["linf_error"]);

    c.sweep.P_values.clear();
    CHECK_THROWS_AS(cmd_sweep(c, options(tmp_dir("sw_empty"))), ConfigError);
  }

  TEST_CASE("results do not depend on the thread count") {
    const ExperimentConfig c = small_config();
    const std::string a = tmp_dir("thr1"), b = tmp_dir("thr3");
    cmd_reconstruct(c, options(a, 1));
    cmd_reconstruct(c, options(b, 3));
    CHECK(slurp(fs::path(a) / "sigma_hat.csv") == slurp(fs::path(b) / "sigma_hat.csv"));
    CHECK(io::sha256_file((fs::path(a) / "sigma_rec.bin").string()) ==
          io::sha256_file((fs::path(b) / "sigma_rec.bin").string()));
  }

  TEST_CASE("engine: estimates equal the tensor contraction") {
    ExperimentConfig c = small_config();
    c.correlation.second_moments = true;
    Experiment ex(c, 1);
    RunOptions ro;
    ro.checkpoints = {c.monte_carlo.P};
    ro.correlation_out = (fs::path(tmp_dir("engine")) / "t.pscorr").string();
    const RunResult r = ex.run(ro);
    const auto& cp = r.checkpoints.back();
    REQUIRE(cp.stat);
    const auto T = correlation::CorrelationTensor::load(ro.correlation_out);
    CHECK(T.count() == c.monte_carlo.P);
    const Vec3 g = cp.fe.frequencies[3];
    const auto [w1, w2] = ex.pair_weights(g, c.probes.t);
    const cplx via_tensor = recon::contract_correlations(T, w1, w2) / std::pow(2.0 * kPi, 3);
    CHECK(std::abs(via_tensor - cp.fe.values[3]) <= 1e-10 * std::abs(via_tensor));
  }

  TEST_CASE("command errors") {
    const ExperimentConfig c = small_config();
    CommandOptions o = options(tmp_dir("err"));
    o.archive = (fs::path(POLYSRC_TEST_TMP) / "nope.pstr").string();
    CHECK_THROWS_AS(cmd_reconstruct(c, o), ConfigError);
    CHECK_THROWS_AS(cmd_direct(c, CommandOptions{}), ConfigError);
  }

  TEST_CASE("CLI exit codes") {
    const std::string dir = tmp_dir("cli");
    const fs::path bad = fs::path(dir) / "bad.json";
    {
      std::ofstream f(bad);
      f << R"({"model": {"n": 2, "k": 4.0, "R": 1.2, "bogus": true}})";
    }
    const std::string out = (fs::path(dir) / "out").string();
    const std::string cmd = std::string(POLYSRC_CLI) + " reconstruct --config " + bad.string() +
                            " --out " + out + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 2);

    const std::string missing = std::string(POLYSRC_CLI) + " direct --config " + dir +
                                "/absent.json --out " + out + " > /dev/null 2>&1";
    const int s2 = std::system(missing.c_str());
    REQUIRE(WIFEXITED(s2));
    CHECK(WEXITSTATUS(s2) == 2);
  }
}
