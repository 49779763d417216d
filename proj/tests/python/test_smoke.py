import cmath
import json
import math
import os
import subprocess

import numpy as np
import pytest

import polysrc


def small_config():
    return {
        "model": {"n": 2, "k": 4.0, "R": 1.2},
        "grid": {"N": 12},
        "quadrature": {"n_theta": 8, "n_phi": 8},
        "monte_carlo": {"P": 40, "block": 16, "batches": 4},
        "probes": {"zeta": 2.0},
        "outputs": {"eval_points": 9},
    }


def test_kernel_values():
    p = polysrc.ModelParams(2, 1.0, 1.2)
    g = polysrc.poly_green([1.0, 0.0, 0.0], [0.0, 0.0, 0.0], p)
    assert abs(g - (cmath.exp(1j) - math.exp(-1.0)) / (8 * math.pi)) < 1e-15
    h = polysrc.helmholtz_green([0.0, 1.0, 0.0], [0.0, 0.0, 0.0], math.pi)
    assert abs(h + 1 / (4 * math.pi)) < 1e-15
    roots = polysrc.split_roots(p)
    assert len(roots) == 2 and abs(roots[1] - 1j) < 1e-15


def test_invalid_params_raise():
    with pytest.raises(polysrc.ConfigError):
        polysrc.ModelParams(0, 1.0, 1.2)
    with pytest.raises(ValueError):
        polysrc.poly_green([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], polysrc.ModelParams())


def test_probe_pairs():
    p = polysrc.ModelParams(1, 2.0, 1.2)
    g = np.array([0.5, 1.0, -1.5])
    xi1, xi2 = polysrc.cgo_pair(g, 3.0, p)
    assert np.allclose(xi1 + xi2, -g, atol=1e-14)
    assert abs(np.sum(xi1 * xi1)) < 1e-13
    with pytest.raises(polysrc.ConfigError):
        polysrc.plane_wave_pair([9.0, 0.0, 0.0], p)


def test_fields_and_quadrature():
    values, integral, vol = polysrc.sample_strength("smooth_bump", 1.0, 0.8, 1.0, 16)
    assert values.shape == (16**3,)
    assert values.min() >= 0.0
    assert integral == pytest.approx(values.sum() * vol)
    nodes, weights = polysrc.sphere_quadrature(1.3, 8, 12)
    assert nodes.shape == (96, 3)
    assert weights.sum() == pytest.approx(4 * math.pi * 1.3**2, rel=1e-12)
    assert len(polysrc.frequency_ball(1.0, 0.5)) == 33


def test_selftest_passes():
    report = polysrc.selftest()
    assert report["passed"], [c for c in report["checks"] if not c["passed"]]
    assert not polysrc.selftest(inject_kernel_fault=True)["passed"]


def test_config_hash_and_normalization():
    cfg = small_config()
    reordered = dict(reversed(list(cfg.items())))
    assert polysrc.config_hash(cfg) == polysrc.config_hash(reordered)
    full = polysrc.normalize_config(cfg)
    assert full["monte_carlo"]["master_seed"] == 20240917
    assert polysrc.config_hash(full) == polysrc.config_hash(json.dumps(cfg))
    with pytest.raises(polysrc.ConfigError):
        polysrc.config_hash({"model": {"n": 2, "bogus": 1}})


def test_reconstruct_and_archive(tmp_path):
    cfg = small_config()
    direct = polysrc.direct(cfg, tmp_path / "d", threads=1)
    assert direct["P"] == 40
    inline = polysrc.reconstruct(cfg, tmp_path / "r1", threads=1)
    archived = polysrc.reconstruct(cfg, tmp_path / "r2", threads=1, archive=tmp_path / "d" / "traces.pstr")
    assert inline["result"]["linf_error"] == archived["result"]["linf_error"]
    assert inline["result"]["M"] > 0.0
    rows = (tmp_path / "r1" / "sigma_hat.csv").read_text().splitlines()
    assert rows[0] == "gamma_x,gamma_y,gamma_z,re,im,se"
    assert len(rows) == 1 + inline["frequencies"]
    manifest = json.loads((tmp_path / "r1" / "manifest.json").read_text())
    assert manifest["config_hash"] == polysrc.config_hash(cfg)
    with pytest.raises(polysrc.ConfigError):
        polysrc.reconstruct(cfg, tmp_path / "r3", archive=tmp_path / "missing.pstr")


def test_sweep(tmp_path):
    cfg = small_config()
    cfg["sweep"] = {"P_values": [20, 40]}
    s = polysrc.sweep(cfg, tmp_path / "s", threads=1)
    assert [r["P"] for r in s["rows"]] == [20, 40]
    assert "error_vs_P" in s["fitted_slopes"]


@pytest.mark.skipif("POLYSRC_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_exit_codes(tmp_path):
    cli = os.environ["POLYSRC_CLI"]
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": {"n": -1}}')
    r = subprocess.run([cli, "reconstruct", "--config", str(bad), "--out", str(tmp_path / "o")],
                       capture_output=True)
    assert r.returncode == 2
    good = tmp_path / "good.json"
    good.write_text(json.dumps(small_config()))
    r = subprocess.run([cli, "direct", "--config", str(good), "--out", str(tmp_path / "d"),
                        "--threads", "1"], capture_output=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "d" / "traces.pstr").exists()
