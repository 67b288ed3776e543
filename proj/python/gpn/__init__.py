# Copyright (c) 2026, The GPN Authors
# SPDX-License-Identifier: Apache-2.0
"""Python front end for the gpn C++ core."""

import json as _json

from . import _gpn
from ._gpn import (
    ConfigError,
    DimensionError,
    FormatError,
    generate_sbm,
    load_dataset,
    normalize_adjacency,
    run_cli,
    verify_dataset,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "FormatError",
    "generate_sbm",
    "gradcheck",
    "load_dataset",
    "normalize_adjacency",
    "run_cli",
    "run_experiment",
    "train",
    "verify_dataset",
]


def _encode(config):
    return "" if config is None else _json.dumps(config)


def train(config=None):
    """Train one model from an experiment config dict; returns the run report."""
    return _json.loads(_gpn.train_json(_encode(config)))


def run_experiment(config=None, jobs=1):
    """Run the seeded experiment grid of a config dict; returns the result table."""
    return _json.loads(_gpn.experiment_json(_encode(config), jobs))


def gradcheck(cases=100, seed=0):
    """Finite-difference gradient suite; returns per-check maximum relative errors."""
    return _json.loads(_gpn.gradcheck_json(cases, seed))
