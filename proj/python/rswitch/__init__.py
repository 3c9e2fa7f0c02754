"""Regime-switching diffusion simulation and bound checking.

The compiled core lives in ``rswitch._core``; this module adds dict-based
wrappers around the JSON-speaking entry points.
"""

import json

from ._core import (
    DEFAULT_SEED,
    ConfigError,
    Error,
    InvalidModel,
    Model,
    NumericalBlowup,
    Unsupported,
    cutoff,
    run_cli,
    simulate_path,
    transition_matrix,
    xi_generator,
    zoo_names,
)
from . import _core

__all__ = [
    "DEFAULT_SEED",
    "ConfigError",
    "Error",
    "InvalidModel",
    "Model",
    "NumericalBlowup",
    "Unsupported",
    "check_assumptions",
    "cutoff",
    "lipschitz_sweep",
    "run_cli",
    "semigroup_estimate",
    "simulate_path",
    "table_model",
    "transition_matrix",
    "xi_generator",
    "zoo",
    "zoo_names",
]


def zoo(name, **params):
    """Build a zoo model, e.g. ``zoo("switching_ou", dim=2, beta=[1, 2])``."""
    return _core._zoo(name, json.dumps(params))


def table_model(table):
    """Build an affine model from a coefficient table (dict)."""
    return _core._table_model(json.dumps(table))


def check_assumptions(model, pairs=2000, max_regime=20, horizon=1.0):
    """Sampled assumption report: a list of dicts, one per assumption."""
    return json.loads(_core._check_assumptions(model, pairs, max_regime, horizon))


def semigroup_estimate(model, f, t, x, i=1, n=10000, dt=1e-3, seed=DEFAULT_SEED,
                       scheme="frozen_rate", threads=0):
    """Monte Carlo estimate of E[f(X_t, L_t)]; returns (mean, stderr, n, aborted).

    ``f`` is a test-function dict such as ``{"kind": "gauss", "scale": 1.0}``.
    """
    return _core._semigroup_estimate(model, json.dumps(f), t, list(x), i, n, dt, seed, scheme, threads)


def lipschitz_sweep(seed=DEFAULT_SEED, cases=1000, max_regime=20):
    """Exact jump-function Lp sweep; one report dict per random case."""
    return json.loads(_core._lipschitz_sweep(seed, cases, max_regime))
