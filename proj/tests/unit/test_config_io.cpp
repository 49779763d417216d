#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "polysrc/config.hpp"
#include "polysrc/errors.hpp"
#include "polysrc/io.hpp"

using namespace polysrc;
using nlohmann::json;

namespace {

std::string tmp_path(const std::string& name) {
  std::filesystem::create_directories(POLYSRC_TEST_TMP);
  return std::string(POLYSRC_TEST_TMP) + "/" + name;
}

void flip_byte(const std::string& path, std::streamoff at) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(at);
  char c = 0;
  f.get(c);
  f.seekp(at);
  f.put(static_cast<char>(c ^ 0x5a));
}

}  // namespace

TEST_SUITE("config_io") {
  TEST_CASE("defaults are valid and round-trip") {
    const ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.probe_kind() == "plane_wave");
    const ExperimentConfig d = ExperimentConfig::from_json(c.to_json());
    CHECK(d.to_json() == c.to_json());
    CHECK(d.hash() == c.hash());
    CHECK(c.hash().size() == 64);
  }

  TEST_CASE("hash ignores key order and outputs, tracks everything else") {
    const ExperimentConfig c;
    const std::string text = c.to_json().dump();
    // reversed key order in the text
    json rev = json::parse(text);
    std::string reordered = "{";
    bool first = true;
    for (auto it = rev.rbegin(); it != rev.rend(); ++it) {
      reordered += (first ? "" : ",") + json(it.key()).dump() + ":" + it.value().dump();
      first = false;
    }
    reordered += "}";
    CHECK(ExperimentConfig::from_json(json::parse(reordered)).hash() == c.hash());

    ExperimentConfig o = c;
    o.outputs.directory = "elsewhere";
    o.outputs.eval_points = 17;
    CHECK(o.hash() == c.hash());

    ExperimentConfig s = c;
    s.monte_carlo.master_seed += 1;
    CHECK(s.hash() != c.hash());
    CHECK(s.data_hash() != c.data_hash());

    ExperimentConfig z = c;
    z.probes.zeta = 5.0;
    CHECK(z.hash() != c.hash());
    CHECK(z.data_hash() == c.data_hash());
  }

  TEST_CASE("invalid configurations") {
    json j = ExperimentConfig().to_json();
    j["model"]["bogus"] = 1;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

    j = ExperimentConfig().to_json();
    j["model"]["n"] = 0;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

    j = ExperimentConfig().to_json();
    j["model"]["R"] = 0.9;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

    j = ExperimentConfig().to_json();
    j["probes"]["zeta"] = 9.0;  // plane waves need zeta < 2k = 8
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

    j = ExperimentConfig().to_json();
    j["potential"] = {{"kind", "smooth_bump"}, {"amplitude", 0.5}, {"radius", 0.8}};
    j["probes"]["kind"] = "plane_wave";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
    j["probes"]["kind"] = "cgo";
    j["probes"]["t"] = 2.0;  // t must exceed zeta / 2 = 3
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
    j["probes"]["t"] = 3.5;
    CHECK(ExperimentConfig::from_json(j).probe_kind() == "cgo");

    j = ExperimentConfig().to_json();
    j["monte_carlo"]["P"] = 0;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

    j = ExperimentConfig().to_json();
    j["source"]["kind"] = "nope";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);

    CHECK_THROWS_AS(ExperimentConfig::load(tmp_path("missing.json")), ConfigError);
    {
      std::ofstream f(tmp_path("broken.json"));
      f << "{ \"model\": ";
    }
    CHECK_THROWS_AS(ExperimentConfig::load(tmp_path("broken.json")), ConfigError);
  }

  TEST_CASE("sha256 known vectors") {
    CHECK(io::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(io::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  }

  TEST_CASE("field files") {
    const std::string path = tmp_path("field.bin");
    const std::vector<double> v = {1.0, -2.5, 3.25, 0.0, 1e-300, 7.0};
    io::write_field(path, v, {2, 3});
    const auto f = io::read_field(path);
    CHECK(f.dtype == 1);
    CHECK(f.dims == std::vector<uint64_t>{2, 3});
    CHECK(f.data == v);

    const std::vector<cplx> c = {{1.0, 2.0}, {-3.0, 0.5}};
    io::write_field(path, c, {2});
    const auto g = io::read_field(path);
    CHECK(g.dtype == 2);
    CHECK(g.data == std::vector<double>{1.0, 2.0, -3.0, 0.5});
    CHECK_THROWS_AS(io::write_field(path, v, {4}), ShapeMismatchError);
    CHECK_THROWS_AS(io::read_field(tmp_path("absent.bin")), FormatError);
  }

  TEST_CASE("trace archive round trip and corruption") {
    const std::string path = tmp_path("traces.pstr");
    const std::string hash = ExperimentConfig().data_hash();
    const size_t nodes = 5;
    std::vector<direct::BoundaryTrace> traces(3);
    for (size_t r = 0; r < traces.size(); ++r) {
      auto& t = traces[r];
      t.n = 2;
      t.nodes = nodes;
      t.data.resize(4 * nodes);
      for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = cplx(0.1 * i + r, -1.0 * r * i);
    }
    {
      io::TraceArchiveWriter w(path, hash, 2, nodes, traces.size());
      for (const auto& t : traces) w.write(t);
      w.close();
    }
    {
      io::TraceArchiveReader rd(path);
      CHECK(rd.config_hash() == hash);
      CHECK(rd.n() == 2);
      CHECK(rd.nodes() == nodes);
      CHECK(rd.count() == 3);
      direct::BoundaryTrace t;
      size_t r = 0;
      while (rd.next(t)) {
        CHECK(t.data == traces[r].data);
        ++r;
      }
      CHECK(r == 3);
    }
    flip_byte(path, 150);
    CHECK_THROWS_AS(io::TraceArchiveReader{path}, FormatError);

    // an archive without its digest is rejected
    {
      io::TraceArchiveWriter w(tmp_path("open.pstr"), hash, 2, nodes, 1);
      w.write(traces[0]);
    }
    CHECK_THROWS_AS(io::TraceArchiveReader{tmp_path("open.pstr")}, FormatError);
  }
}
