"""Generalized pairwise comparison estimators for cluster-randomized trials."""

import json
import os

from ._gce import GceError, version
from . import _gce

__all__ = ["analyze", "simulate", "truth", "GceError", "version", "error_info"]


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def _run(result, csv):
    report = json.loads(result.report)
    return (report, result.csv) if csv else report


def analyze(config, base_dir=None, threads=1, csv=False):
    """Run the analyze pipeline. `config` is a dict or JSON text; relative
    paths in it resolve against `base_dir` (default: current directory)."""
    base = os.fspath(base_dir) if base_dir is not None else os.getcwd()
    return _run(_gce.analyze(_text(config), base, threads), csv)


def simulate(config, threads=1, csv=False):
    return _run(_gce.simulate(_text(config), threads), csv)


def truth(config, threads=1):
    return _run(_gce.truth(_text(config), threads), False)


def error_info(exc):
    """The {"kind", "message", "exit_code"} record carried by a GceError."""
    return json.loads(str(exc))["error"]
