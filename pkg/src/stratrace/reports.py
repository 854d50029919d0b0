"""Report containers shared by the trace and stochastic layers.

Payload dictionaries hold only deterministic scientific content; wall-time and
host details belong to the separate env block the CLI attaches, so identical
inputs produce byte-identical payloads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["TraceReport", "MCReport", "jsonable"]


def jsonable(value):
    """Convert numpy scalars/arrays and complex numbers to JSON-safe values.

    Complex numbers become [re, im] pairs.
    """
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        c = complex(value)
        return [c.real, c.imag]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


@dataclass
class TraceReport:
    """Partial sums of a trace-style quantity against a target value.

    `index_values` is the truncation ladder (or the averaging-width schedule,
    see `index_label`); `partial_sums[k]` is the value at `index_values[k]`.
    """

    experiment: str
    basis_id: str | None
    weight_ids: tuple
    index_label: str
    index_values: list
    partial_sums: list
    target: object
    abs_errors: list
    tolerance: float
    converged: bool
    metadata: dict = field(default_factory=dict)

    @property
    def final_error(self) -> float:
        return float(self.abs_errors[-1]) if self.abs_errors else float("nan")

    def payload(self) -> dict:
        return jsonable(
            {
                "experiment": self.experiment,
                "basis": self.basis_id,
                "weights": list(self.weight_ids),
                "index_label": self.index_label,
                "N_values": list(self.index_values),
                "partial_sums": list(self.partial_sums),
                "target": self.target,
                "errors": list(self.abs_errors),
                "tolerance": self.tolerance,
                "converged": bool(self.converged),
                "metadata": self.metadata,
            }
        )


@dataclass
class MCReport:
    """Monte Carlo summary for simulated iterated stochastic integrals."""

    n_paths: int
    truncation: int
    mean: float
    variance: float
    ci95: float
    target_trace: float
    target_half_inner: float
    oracle_rms: float | None
    seed: int
    basis_id: str | None = None
    weight_ids: tuple = ()
    metadata: dict = field(default_factory=dict)

    def payload(self) -> dict:
        return jsonable(
            {
                "experiment": "simulate",
                "basis": self.basis_id,
                "weights": list(self.weight_ids),
                "n_paths": self.n_paths,
                "N": self.truncation,
                "mean": self.mean,
                "variance": self.variance,
                "ci95": self.ci95,
                "target_trace": self.target_trace,
                "target_half_inner": self.target_half_inner,
                "oracle_rms": self.oracle_rms,
                "seed": self.seed,
                "metadata": self.metadata,
            }
        )
