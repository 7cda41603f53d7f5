"""Compound Poisson approximation bounds for renewal and Markov renewal point counts."""

import json as _json

from ._core import (
    Distribution,
    Error,
    Profile,
    build_profile,
    compound_pmf,
    geometric_compound_pmf,
    tail_inf_f,
    tv_distance,
)
from . import _core

__all__ = [
    "Distribution",
    "Error",
    "Profile",
    "build_profile",
    "tail_inf_f",
    "compound_pmf",
    "geometric_compound_pmf",
    "tv_distance",
    "renewal_bound",
    "bound",
    "h1",
    "run",
    "exact_lattice_distribution",
    "empirical_distribution",
]


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def renewal_bound(dist, gamma, t, exact_u=False, epsilon=None):
    """Bound report (dict) for a renewal count with the given reference rate."""
    return _json.loads(_core.renewal_bound_json(dist, gamma, t, exact_u, epsilon))


def bound(config):
    """Bound report (dict) for a run configuration given as dict or JSON text."""
    return _json.loads(_core.bound_json(_text(config)))


def h1(pi):
    return _json.loads(_core.h1_json(list(pi)))


def run(command, config):
    """Run a CLI command in-process. Returns (exit_status, artifact_text, log_text)."""
    return _core.run(command, _text(config))


def exact_lattice_distribution(config, t):
    return _core.exact_lattice_distribution(_text(config), t)


def empirical_distribution(config, reps, seed):
    return _json.loads(_core.empirical_distribution_json(_text(config), reps, seed))
