"""Expansion coefficients of Volterra-type kernels in an orthonormal basis.

The central objects are the matrices

    G[i, j] = int_{t0}^{T} phi(t) q_i(t) (int_{t0}^{t} psi(s) q_j(s) ds) dt

for a weight pair (phi, psi), their order-3 analogue for weight triples, and
the same expansion for general two-variable kernels.  Running primitives are
evaluated with per-panel prefix sums plus a nested Gauss rule on the partial
panel, so every entry is exact (up to roundoff) whenever the weights and
basis make the integrands piecewise polynomial or resolved oscillations.

Matrices and tensors can be cached on disk in a small binary format keyed by
a content hash; see `matrix_key`, `cache_store`, `cache_load`.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import Interval, OrthonormalBasis
from .kernel import Kernel
from .quadrature import (
    DEFAULT_QUADRATURE,
    CompositeRule,
    QuadratureConfig,
    composite_rule,
    nested_rule,
    nodes_for,
    scaled_segments,
)
from .weights import WeightFunction

__all__ = [
    "CoefficientMatrix",
    "CoefficientTensor",
    "coefficient",
    "coefficient_matrix",
    "volterra_diagonal",
    "volterra_norm_sq",
    "weight_basis_inner",
    "kernel_coefficient",
    "kernel_matrix",
    "kernel_diagonal",
    "tensor_coefficients",
    "CacheKeyError",
    "CacheCorruptError",
    "matrix_key",
    "tensor_key",
    "cache_path",
    "cache_store",
    "cache_load",
    "cached_coefficient_matrix",
]

# cap on the number of points evaluated in one basis-block call
_CHUNK_POINTS = 32768


# ---------------------------------------------------------------------------
# result containers


@dataclass(frozen=True)
class CoefficientMatrix:
    """Dense expansion matrix together with the identifiers that produced it."""

    entries: np.ndarray
    basis_id: str
    weight_ids: tuple
    interval: Interval
    quad_fingerprint: str

    @property
    def count(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self):
        return self.entries.trace()

    def symmetrized(self) -> np.ndarray:
        """entries + entries^T, the matrix of the symmetrized kernel."""
        return self.entries + self.entries.T


@dataclass(frozen=True)
class CoefficientTensor:
    """Order-3 expansion tensor for a triple of weights."""

    entries: np.ndarray
    basis_id: str
    weight_ids: tuple
    interval: Interval
    quad_fingerprint: str

    @property
    def count(self) -> int:
        return self.entries.shape[0]


# ---------------------------------------------------------------------------
# shared demand bookkeeping


def _check_same_interval(basis: OrthonormalBasis, *weights: WeightFunction):
    for w in weights:
        if w.interval != basis.interval:
            raise ValueError(
                f"weight {w.id} lives on {w.interval.id}, basis on {basis.interval.id}"
            )


def _union_breakpoints(basis: OrthonormalBasis, count: int, *weights):
    pieces = [np.asarray(basis.breakpoints(count), dtype=float)]
    for w in weights:
        pieces.append(np.asarray(w.breakpoints, dtype=float))
    return np.unique(np.concatenate(pieces)) if pieces else np.empty(0)


def _inner_nodes(quad: QuadratureConfig, rule: CompositeRule, degree: int, phase: float) -> int:
    """Node count for nested segments, which never exceed one panel in width."""
    iv_len = rule.edges[-1] - rule.edges[0]
    frac = np.diff(rule.edges).max() / iv_len
    return nodes_for(quad, degree, phase * frac if phase > 0.0 else 0.0)


def _running_primitive(
    weight: WeightFunction,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig,
    rule: CompositeRule,
) -> np.ndarray:
    """Psi[g, j] = int_{t0}^{x_g} weight(s) q_j(s) ds at every outer node.

    Full panels left of the node come from prefix sums over the outer rule
    (exact there by construction); the partial panel uses a nested Gauss rule.
    """
    q_at_nodes = basis.evaluate_block(rule.x, count)
    w_at_nodes = weight(rule.x)
    per_panel = rule.panel_sums(w_at_nodes[:, None] * q_at_nodes)
    prefix = np.vstack([np.zeros((1, count)), np.cumsum(per_panel, axis=0)[:-1]])

    m = _inner_nodes(quad, rule, weight.degree + basis.degree_hint(count),
                     weight.phase + basis.phase_hint(count))
    nested = nested_rule(rule, m)
    partial = np.empty((len(rule.x), count))
    rows = max(1, _CHUNK_POINTS // m)
    for lo in range(0, len(rule.x), rows):
        hi = min(lo + rows, len(rule.x))
        y = nested.y[lo:hi]
        v = nested.v[lo:hi]
        q = basis.evaluate_block(y.ravel(), count).reshape(y.shape + (count,))
        partial[lo:hi] = np.einsum("gm,gm,gmj->gj", v, weight(y), q)
    return prefix[rule.panel_index] + partial


def _volterra_rule(
    phi: WeightFunction,
    psi: WeightFunction,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig,
) -> CompositeRule:
    iv = basis.interval
    return composite_rule(
        iv.t0, iv.T, quad,
        breakpoints=_union_breakpoints(basis, count, phi, psi),
        degree=phi.degree + psi.degree + 2 * (basis.degree_hint(count) + 1),
        phase=phi.phase + psi.phase + 2 * basis.phase_hint(count),
    )


def _volterra_tables(phi, psi, basis, count, quad):
    rule = _volterra_rule(phi, psi, basis, count, quad)
    q_out = basis.evaluate_block(rule.x, count)
    psi_run = _running_primitive(psi, basis, count, quad, rule)
    left = (rule.w * phi(rule.x))[:, None] * q_out
    return rule, left, psi_run


# ---------------------------------------------------------------------------
# Volterra coefficient matrices


def coefficient_matrix(
    phi: WeightFunction,
    psi: WeightFunction,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
) -> CoefficientMatrix:
    """All entries G[i, j] for i, j < count."""
    _check_same_interval(basis, phi, psi)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    _, left, psi_run = _volterra_tables(phi, psi, basis, count, quad)
    entries = left.T @ psi_run
    return CoefficientMatrix(
        entries=entries,
        basis_id=basis.id,
        weight_ids=(phi.id, psi.id),
        interval=basis.interval,
        quad_fingerprint=quad.fingerprint(),
    )


def coefficient(
    phi: WeightFunction,
    psi: WeightFunction,
    basis: OrthonormalBasis,
    i: int,
    j: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """Single entry G[i, j]."""
    if i < 0 or j < 0:
        raise ValueError(f"indices must be >= 0, got ({i}, {j})")
    count = max(i, j) + 1
    return float(coefficient_matrix(phi, psi, basis, count, quad).entries[i, j])


def volterra_diagonal(
    phi: WeightFunction,
    psi: WeightFunction,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
) -> np.ndarray:
    """The diagonal G[i, i] for i < count, without forming the full matrix."""
    _check_same_interval(basis, phi, psi)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    _, left, psi_run = _volterra_tables(phi, psi, basis, count, quad)
    return np.einsum("gi,gi->i", left, psi_run)


def volterra_norm_sq(
    phi: WeightFunction,
    psi: WeightFunction,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """Squared Hilbert-Schmidt norm of phi(t) psi(tau) 1(t - tau).

    Equals the absolutely convergent sum of all squared matrix entries in any
    orthonormal basis, so partial entry sums are bounded by it.
    """
    iv = phi.interval
    if iv != psi.interval:
        raise ValueError("weight functions live on different intervals")
    breaks = np.union1d(phi.breakpoints, psi.breakpoints)
    rule = composite_rule(iv.t0, iv.T, quad, breakpoints=breaks,
                          degree=2 * (phi.degree + psi.degree) + 1,
                          phase=2 * (phi.phase + psi.phase))
    m = _inner_nodes(quad, rule, 2 * psi.degree, 2 * psi.phase)
    nested = nested_rule(rule, m)
    per_panel = rule.panel_sums(psi(rule.x) ** 2)
    prefix = np.concatenate([[0.0], np.cumsum(per_panel)[:-1]])
    partial = np.einsum("gm,gm->g", nested.v, psi(nested.y) ** 2)
    running = prefix[rule.panel_index] + partial
    return float(rule.integrate(phi(rule.x) ** 2 * running))


def weight_basis_inner(
    w: WeightFunction,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
) -> np.ndarray:
    """Vector of inner products (w, q_i) for i < count."""
    _check_same_interval(basis, w)
    iv = basis.interval
    rule = composite_rule(
        iv.t0, iv.T, quad,
        breakpoints=_union_breakpoints(basis, count, w),
        degree=w.degree + basis.degree_hint(count),
        phase=w.phase + basis.phase_hint(count),
    )
    q = basis.evaluate_block(rule.x, count)
    return (rule.w * w(rule.x)) @ q


# ---------------------------------------------------------------------------
# general kernel coefficients (two-dimensional quadrature over the square)


def _kernel_tables(spec: Kernel, basis: OrthonormalBasis, count: int, quad: QuadratureConfig):
    """Outer rule plus Inner[g, j] = int_{t0}^{T} f(x_g, tau) q_j(tau) dtau.

    The inner integral is split at the diagonal tau = x_g and at every static
    breakpoint, so each Gauss segment sees a smooth integrand.  This route
    never uses the one-sided factorized form, which keeps it an independent
    check on the running-primitive engine.
    """
    if spec.interval != basis.interval:
        raise ValueError(f"kernel lives on {spec.interval.id}, basis on {basis.interval.id}")
    iv = spec.interval
    breaks = np.union1d(np.asarray(spec.breakpoints, dtype=float),
                        np.asarray(basis.breakpoints(count), dtype=float))
    degree = spec.degree_hint + basis.degree_hint(count)
    phase = spec.phase_hint + basis.phase_hint(count)
    rule = composite_rule(iv.t0, iv.T, quad, breakpoints=breaks,
                          degree=2 * degree + 1, phase=2 * phase)
    ladder = np.concatenate([[iv.t0], breaks[(breaks > iv.t0) & (breaks < iv.T)], [iv.T]])
    n_in = _inner_nodes(quad, rule, degree, phase)

    dtype = complex if spec.is_complex else float
    inner = np.zeros((len(rule.x), count), dtype=dtype)
    rows = max(1, _CHUNK_POINTS // n_in)
    for lo in range(0, len(rule.x), rows):
        hi = min(lo + rows, len(rule.x))
        x = rule.x[lo:hi]
        acc = np.zeros((len(x), count), dtype=dtype)
        for a, b in zip(ladder[:-1], ladder[1:]):
            # cell [a, b] clipped to [t0, x_g] (below the diagonal) ...
            for seg_lo, seg_hi in (
                (np.minimum(a, x), np.minimum(b, x)),
                # ... and clipped to [x_g, T] (above it)
                (np.maximum(a, x), np.maximum(b, x)),
            ):
                y, v = scaled_segments(seg_lo, seg_hi, n_in)
                q = basis.evaluate_block(y.ravel(), count).reshape(y.shape + (count,))
                f = spec.evaluate(x[:, None], y)
                acc += np.einsum("gm,gm,gmj->gj", v, f, q)
        inner[lo:hi] = acc
    return rule, inner


def kernel_matrix(
    spec: Kernel,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
) -> CoefficientMatrix:
    """Expansion matrix K[i, j] = int int f(t, tau) q_i(t) q_j(tau) dtau dt."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rule, inner = _kernel_tables(spec, basis, count, quad)
    q_out = basis.evaluate_block(rule.x, count)
    entries = (rule.w[:, None] * q_out).T @ inner
    return CoefficientMatrix(
        entries=entries,
        basis_id=basis.id,
        weight_ids=(spec.id,),
        interval=basis.interval,
        quad_fingerprint=quad.fingerprint(),
    )


def kernel_diagonal(
    spec: Kernel,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
) -> np.ndarray:
    """The diagonal K[i, i] for i < count."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rule, inner = _kernel_tables(spec, basis, count, quad)
    q_out = basis.evaluate_block(rule.x, count)
    return np.einsum("g,gi,gi->i", rule.w, q_out, inner)


def kernel_coefficient(
    spec: Kernel,
    basis: OrthonormalBasis,
    i: int,
    j: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
):
    """Single entry K[i, j]."""
    if i < 0 or j < 0:
        raise ValueError(f"indices must be >= 0, got ({i}, {j})")
    entry = kernel_matrix(spec, basis, max(i, j) + 1, quad).entries[i, j]
    return complex(entry) if spec.is_complex else float(entry)


# ---------------------------------------------------------------------------
# order-3 tensors


def tensor_coefficients(
    w1: WeightFunction,
    w2: WeightFunction,
    w3: WeightFunction,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
) -> CoefficientTensor:
    """Entries[i1, i2, i3] = int w3 q_{i3}(t) (int^t w2 q_{i2}(s) (int^s w1 q_{i1}(r) dr) ds) dt,
    the iterated integral over t > s > r with w1 innermost and w3 outermost.

    Three nesting levels: the innermost primitive is tabulated at the outer
    nodes and at the nested mid-level nodes, the mid-level primitive at the
    outer nodes, and the outer rule finishes the job.
    """
    _check_same_interval(basis, w1, w2, w3)
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    iv = basis.interval
    bdeg, bph = basis.degree_hint(count), basis.phase_hint(count)
    rule = composite_rule(
        iv.t0, iv.T, quad,
        breakpoints=_union_breakpoints(basis, count, w1, w2, w3),
        degree=w1.degree + w2.degree + w3.degree + 3 * (bdeg + 1),
        phase=w1.phase + w2.phase + w3.phase + 3 * bph,
    )
    G = len(rule.x)

    # innermost primitive at the outer nodes, Psi1[g, i1]
    psi1 = _running_primitive(w1, basis, count, quad, rule)

    # mid-level integrand at the outer nodes and its per-panel prefix sums
    q_out = basis.evaluate_block(rule.x, count)
    g_mid = (w2(rule.x)[:, None] * q_out)[:, :, None] * psi1[:, None, :]
    per_panel = rule.panel_sums(g_mid)
    prefix2 = np.concatenate(
        [np.zeros((1, count, count)), np.cumsum(per_panel, axis=0)[:-1]], axis=0
    )

    # partial mid-level panels via nested nodes y, with the innermost
    # primitive re-evaluated at those y from its own panel prefix
    m = _inner_nodes(quad, rule, w1.degree + w2.degree + 2 * bdeg + 1,
                     w1.phase + w2.phase + 2 * bph)
    m2 = _inner_nodes(quad, rule, w1.degree + bdeg, w1.phase + bph)
    nested = nested_rule(rule, m)
    per_panel1 = rule.panel_sums(w1(rule.x)[:, None] * q_out)
    prefix1 = np.vstack([np.zeros((1, count)), np.cumsum(per_panel1, axis=0)[:-1]])

    lam_partial = np.empty((G, count, count))
    rows = max(1, _CHUNK_POINTS // (m * m2))
    for lo in range(0, G, rows):
        hi = min(lo + rows, G)
        y, v = nested.y[lo:hi], nested.v[lo:hi]
        starts = rule.panel_starts[lo:hi]
        z, u = scaled_segments(starts[:, None], y, m2)
        qz = basis.evaluate_block(z.ravel(), count).reshape(z.shape + (count,))
        psi1_y = prefix1[rule.panel_index[lo:hi], None, :] + np.einsum(
            "gmn,gmn,gmnk->gmk", u, w1(z), qz
        )
        qy = basis.evaluate_block(y.ravel(), count).reshape(y.shape + (count,))
        lam_partial[lo:hi] = np.einsum(
            "gm,gm,gmj,gmk->gjk", v, w2(y), qy, psi1_y
        )
    # lam[g, i2, i1]: the mid-level running integral at each outer node
    lam = prefix2[rule.panel_index] + lam_partial

    entries = np.einsum("g,go,gjk->kjo", rule.w * w3(rule.x), q_out, lam)
    return CoefficientTensor(
        entries=entries,
        basis_id=basis.id,
        weight_ids=(w1.id, w2.id, w3.id),
        interval=basis.interval,
        quad_fingerprint=quad.fingerprint(),
    )


# ---------------------------------------------------------------------------
# binary cache


class CacheKeyError(RuntimeError):
    """The cache file exists but was written for a different computation."""


class CacheCorruptError(RuntimeError):
    """The cache file is malformed or truncated."""


_MAGIC = b"STRC"
_VERSION = 1


def _digest(parts: dict) -> str:
    blob = json.dumps(parts, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def matrix_key(
    phi: WeightFunction,
    psi: WeightFunction,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
) -> str:
    """Hex content key for a Volterra coefficient matrix."""
    return _digest({
        "kind": "volterra-matrix",
        "phi": phi.id,
        "psi": psi.id,
        "basis": basis.id,
        "count": int(count),
        "quad": quad.fingerprint(),
    })


def tensor_key(
    w1: WeightFunction,
    w2: WeightFunction,
    w3: WeightFunction,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
) -> str:
    """Hex content key for an order-3 coefficient tensor."""
    return _digest({
        "kind": "volterra-tensor",
        "weights": [w1.id, w2.id, w3.id],
        "basis": basis.id,
        "count": int(count),
        "quad": quad.fingerprint(),
    })


def cache_path(directory, key: str) -> Path:
    return Path(directory) / f"{key}.strc"


def cache_store(entries: np.ndarray, path, key: str) -> None:
    """Write a float64 array: magic, version, key digest, leading dim, payload."""
    arr = np.ascontiguousarray(entries, dtype="<f8")
    header = (
        _MAGIC
        + np.uint32(_VERSION).astype("<u4").tobytes()
        + bytes.fromhex(key)
        + np.uint32(arr.shape[0]).astype("<u4").tobytes()
    )
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(header + arr.tobytes())
    os.replace(tmp, path)


def cache_load(path, key: str, shape: tuple) -> np.ndarray:
    """Read an array written by `cache_store`, validating every header field."""
    raw = Path(path).read_bytes()
    head = 4 + 4 + 32 + 4
    if len(raw) < head:
        raise CacheCorruptError(f"{path}: shorter than the fixed header")
    if raw[:4] != _MAGIC:
        raise CacheCorruptError(f"{path}: bad magic {raw[:4]!r}")
    version = int(np.frombuffer(raw[4:8], dtype="<u4")[0])
    if version != _VERSION:
        raise CacheCorruptError(f"{path}: unsupported version {version}")
    if raw[8:40] != bytes.fromhex(key):
        raise CacheKeyError(f"{path}: stored key does not match the requested computation")
    n = int(np.frombuffer(raw[40:44], dtype="<u4")[0])
    if n != shape[0]:
        raise CacheKeyError(f"{path}: stored leading dimension {n}, expected {shape[0]}")
    expect = int(np.prod(shape)) * 8
    if len(raw) - head != expect:
        raise CacheCorruptError(f"{path}: payload is {len(raw) - head} bytes, expected {expect}")
    return np.frombuffer(raw[head:], dtype="<f8").reshape(shape).copy()


def cached_coefficient_matrix(
    phi: WeightFunction,
    psi: WeightFunction,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
    directory=None,
) -> CoefficientMatrix:
    """`coefficient_matrix` with a disk cache.

    The directory comes from the argument or the STRC_CACHE_DIR environment
    variable; with neither set this computes directly.  A corrupt or
    mismatched file is recomputed and overwritten.
    """
    if directory is None:
        directory = os.environ.get("STRC_CACHE_DIR") or None
    if directory is None:
        return coefficient_matrix(phi, psi, basis, count, quad)

    key = matrix_key(phi, psi, basis, count, quad)
    path = cache_path(directory, key)
    if path.exists():
        try:
            entries = cache_load(path, key, (count, count))
            return CoefficientMatrix(
                entries=entries,
                basis_id=basis.id,
                weight_ids=(phi.id, psi.id),
                interval=basis.interval,
                quad_fingerprint=quad.fingerprint(),
            )
        except (CacheKeyError, CacheCorruptError):
            pass
    result = coefficient_matrix(phi, psi, basis, count, quad)
    Path(directory).mkdir(parents=True, exist_ok=True)
    cache_store(result.entries, path, key)
    return result
