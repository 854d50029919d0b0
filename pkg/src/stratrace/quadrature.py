"""Composite Gauss-Legendre quadrature with exactness-aware node selection.

Rules are built from a uniform panel split of the interval, unioned with any
breakpoints the integrand demands (dyadic Haar edges, tabulated-weight grids).
The per-panel node count starts at the configured default and is raised until
the rule is exact for the declared polynomial degree and resolves the declared
oscillation; refusal to meet a demand raises instead of silently degrading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "QuadratureConfig",
    "QuadratureError",
    "CompositeRule",
    "NestedRule",
    "gauss_rule",
    "nodes_for",
    "panel_edges",
    "composite_rule",
    "nested_rule",
    "scaled_segments",
]


class QuadratureError(RuntimeError):
    """A rule could not meet its accuracy demand within the node cap."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Baseline composite rule: `panels` uniform panels, `nodes_per_panel`
    Gauss nodes each (exact for polynomials of degree <= 2*nodes_per_panel - 1
    per panel).  `tolerance` is the accuracy the engine is allowed to assume
    when deciding convergence flags."""

    panels: int = 16
    nodes_per_panel: int = 8
    tolerance: float = 1e-12
    max_nodes_per_panel: int = 4096

    def __post_init__(self):
        if self.panels < 1:
            raise ValueError(f"panels must be >= 1, got {self.panels}")
        if self.nodes_per_panel < 1:
            raise ValueError(f"nodes_per_panel must be >= 1, got {self.nodes_per_panel}")
        if not (self.tolerance > 0.0):
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")

    def fingerprint(self) -> str:
        return f"gl:p{self.panels}:n{self.nodes_per_panel}:tol{self.tolerance:g}"


DEFAULT_QUADRATURE = QuadratureConfig()


@lru_cache(maxsize=None)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule(n: int):
    """Gauss-Legendre nodes and weights on [-1, 1], cached."""
    if n < 1:
        raise ValueError("a Gauss rule needs at least one node")
    return _leggauss(int(n))


def nodes_for(config: QuadratureConfig, degree: int = 0, phase: float = 0.0) -> int:
    """Per-panel node count meeting a polynomial-degree and oscillation demand.

    `degree` is the largest total polynomial degree of the integrand on the
    panel; `phase` is the largest angular sweep (|omega| * panel width) of any
    oscillatory factor.  The degree rule is the exactness bound; the phase rule
    keeps the Gauss error in the superexponential regime with margin to spare.
    """
    need = max(0, (int(degree) + 2) // 2)
    if phase > 0.0:
        need += math.ceil(0.67 * float(phase)) + 14
    n = max(config.nodes_per_panel, need)
    if n > config.max_nodes_per_panel:
        raise QuadratureError(
            f"demand of {n} nodes per panel exceeds cap {config.max_nodes_per_panel} "
            f"(degree={degree}, phase={phase:.1f})"
        )
    return n


def panel_edges(t0: float, t1: float, panels: int, breakpoints=()) -> np.ndarray:
    """Sorted union of uniform panel edges and interior breakpoints."""
    edges = np.linspace(t0, t1, panels + 1)
    br = np.asarray(breakpoints, dtype=float)
    if br.size:
        br = br[(br > t0) & (br < t1)]
        edges = np.concatenate([edges, br])
    edges = np.unique(edges)
    # drop near-duplicate edges so panels keep nonzero width
    tol = 1e-13 * (t1 - t0)
    keep = np.concatenate([[True], np.diff(edges) > tol])
    edges = edges[keep]
    edges[0], edges[-1] = t0, t1
    return edges


@dataclass(frozen=True)
class CompositeRule:
    """Flattened composite Gauss rule: nodes `x`, weights `w`, panel `edges`,
    a common per-panel node count, and `panel_index` mapping node -> panel."""

    x: np.ndarray
    w: np.ndarray
    edges: np.ndarray
    nodes_per_panel: int
    panel_index: np.ndarray

    @property
    def panels(self) -> int:
        return len(self.edges) - 1

    @property
    def panel_starts(self) -> np.ndarray:
        return self.edges[self.panel_index]

    def integrate(self, values: np.ndarray):
        return np.tensordot(values, self.w, axes=([0], [0])) if values.ndim > 1 else values @ self.w

    def panel_sums(self, values: np.ndarray) -> np.ndarray:
        """Per-panel integral of point values sampled on this rule.

        `values` has node index first; returns an array with panel index first.
        """
        wv = values * (self.w if values.ndim == 1 else self.w.reshape((-1,) + (1,) * (values.ndim - 1)))
        shaped = wv.reshape((self.panels, self.nodes_per_panel) + values.shape[1:])
        return shaped.sum(axis=1)


def composite_rule(
    t0: float,
    t1: float,
    config: QuadratureConfig = DEFAULT_QUADRATURE,
    breakpoints=(),
    degree: int = 0,
    phase: float = 0.0,
) -> CompositeRule:
    """Build a composite rule over [t0, t1].

    `phase` is the total angular sweep over the whole interval; it is scaled
    to the widest panel before the per-panel node count is chosen.
    """
    if not (t1 > t0):
        raise ValueError(f"empty integration range [{t0}, {t1}]")
    edges = panel_edges(t0, t1, config.panels, breakpoints)
    widths = np.diff(edges)
    panel_phase = phase * widths.max() / (t1 - t0) if phase > 0.0 else 0.0
    n = nodes_for(config, degree, panel_phase)
    ref_x, ref_w = gauss_rule(n)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * widths
    x = (mid[:, None] + half[:, None] * ref_x[None, :]).ravel()
    w = (half[:, None] * ref_w[None, :]).ravel()
    panel_index = np.repeat(np.arange(len(widths)), n)
    return CompositeRule(x=x, w=w, edges=edges, nodes_per_panel=n, panel_index=panel_index)


@dataclass(frozen=True)
class NestedRule:
    """Inner Gauss rules for the running segments [panel_start(g), x_g].

    `y[g, m]` / `v[g, m]` integrate over the partial panel left of outer node
    g; combined with per-panel prefix sums they evaluate running primitives
    t -> int_{t0}^t exactly at every outer node.
    """

    outer: CompositeRule
    y: np.ndarray
    v: np.ndarray


def nested_rule(outer: CompositeRule, inner_nodes: int) -> NestedRule:
    ref_x, ref_w = gauss_rule(inner_nodes)
    # reference rule on [0, 1]
    r = 0.5 * (ref_x + 1.0)
    u = 0.5 * ref_w
    a = outer.panel_starts
    span = outer.x - a
    y = a[:, None] + span[:, None] * r[None, :]
    v = span[:, None] * u[None, :]
    return NestedRule(outer=outer, y=y, v=v)


def scaled_segments(lo, hi, inner_nodes: int):
    """Gauss nodes/weights for a batch of segments [lo_g, hi_g].

    Either bound may be a scalar broadcast against the other.  Returns arrays
    shaped (G, inner_nodes); zero-length segments get zero weights.
    """
    ref_x, ref_w = gauss_rule(inner_nodes)
    r = 0.5 * (ref_x + 1.0)
    u = 0.5 * ref_w
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lo, hi = np.broadcast_arrays(lo, hi)
    span = hi - lo
    y = lo[..., None] + span[..., None] * r
    v = span[..., None] * u
    return y, v
