"""FEPA fluid models: ODEs, fluid lumping and perturbation bounds."""

import json

from . import _fepa
from ._fepa import (
    LumpingError,
    Model,
    ModelError,
    SolverError,
    System,
    Trajectory,
    error_bound,
    parse_model,
    spread_model,
)

__all__ = [
    "LumpingError",
    "Model",
    "ModelError",
    "SolverError",
    "System",
    "Trajectory",
    "aggregate",
    "discover",
    "error_bound",
    "load_model",
    "lumped_odes",
    "parse_model",
    "solve",
    "spread_model",
    "sweep",
    "trajectory_distance",
    "verify",
]


def _partition_text(partition):
    if partition is None:
        return ""
    if isinstance(partition, str):
        return partition
    return json.dumps(partition)


def load_model(path):
    with open(path, encoding="utf-8") as f:
        return parse_model(f.read())


def solve(system, partition=None, **config):
    """Integrate `system`, or its lumping when a partition is given."""
    return _fepa.solve(system, _partition_text(partition), **config)


def verify(system, partition, samples=50, tol=1e-9, seed=42):
    """Verification report for {"blocks": ...} (ordinary) or {"tuples": ...} (exact)."""
    return json.loads(_fepa.verify(system, _partition_text(partition), samples, tol, seed))


def discover(system, mode, eps=False):
    """Candidate partitions as (description, partition dict), coarsest first."""
    return [(d, json.loads(p)) for d, p in _fepa.discover(system, mode, eps)]


def lumped_odes(system, partition):
    names, text = _fepa.lumped_odes(system, _partition_text(partition))
    return names, text


def aggregate(system, partition, norm="inf", t_end=100.0):
    """Homogenized reference model and its perturbation report."""
    model, report = _fepa.aggregate(system, _partition_text(partition), norm, t_end)
    report = json.loads(report)
    if report["bound"] == "inf":
        report["bound"] = float("inf")
    return model, report


def trajectory_distance(a, b, norm="inf"):
    if a.times != b.times or a.names != b.names:
        raise ValueError("trajectories differ in grid or states")
    return _fepa.trajectory_distance(a.times, a.names, a.rows(), b.rows(), norm)


def sweep(**config):
    """Aggregation-error sweep; returns (csv text, check summary)."""
    return _fepa.sweep(**config)
