"""Stochastic polyharmonic source simulation and reconstruction."""

import json as _json

from . import _polysrc
from ._polysrc import (
    ConfigError,
    FormatError,
    ModelParams,
    NumericalError,
    cgo_pair,
    fourier_transform,
    frequency_ball,
    helmholtz_green,
    plane_wave_pair,
    poly_green,
    poly_green_laplacian,
    poly_green_normal_derivative,
    sample_strength,
    sphere_quadrature,
    split_roots,
)

__version__ = _polysrc.__version__


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def config_hash(config):
    """SHA-256 of the normalized config (dict or JSON text)."""
    return _polysrc.config_hash(_text(config))


def normalize_config(config):
    return _json.loads(_polysrc.normalize_config(_text(config)))


def selftest(inject_kernel_fault=False):
    return _json.loads(_polysrc.selftest(inject_kernel_fault))


def direct(config, out, threads=0):
    return _json.loads(_polysrc.cmd_direct(_text(config), str(out), threads))


def reconstruct(config, out, threads=0, archive=""):
    return _json.loads(_polysrc.cmd_reconstruct(_text(config), str(out), threads, str(archive)))


def sweep(config, out, threads=0):
    return _json.loads(_polysrc.cmd_sweep(_text(config), str(out), threads))
