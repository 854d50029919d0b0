"""Trace identities for expansion matrices and tensors.

The headline identity: for weights phi, psi and ANY orthonormal basis, the
diagonal sums of the Volterra coefficient matrix converge to half the inner
product,

    sum_i G[i, i]  ->  (1/2) int phi(t) psi(t) dt,

independent of the basis.  This module turns that statement and its
relatives (symmetrized-kernel traces, bilinear pair sums, order-3 partial
traces) into report-producing verifiers with explicit targets and ladders.
"""

from __future__ import annotations

import numpy as np

from .basis import OrthonormalBasis
from .coeffs import (
    CoefficientTensor,
    kernel_diagonal,
    volterra_diagonal,
    weight_basis_inner,
)
from .kernel import (
    ComplexExponential,
    Kernel,
    MonomialMax,
    MonomialMin,
    SeparableRankOne,
    SymmetrizedVolterra,
    diagonal_trace,
)
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig, composite_rule, nested_rule, nodes_for
from .reports import TraceReport
from .weights import PolynomialWeight, WeightFunction

__all__ = [
    "inner_product",
    "verify_volterra_trace",
    "verify_kernel_trace",
    "two_route_kernel_trace",
    "verify_symmetric_pair_sum",
    "basis_independence",
    "tensor_neighbor_trace",
    "tensor_nonneighbor_trace",
]


def inner_product(
    phi: WeightFunction,
    psi: WeightFunction,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """int phi(t) psi(t) dt over the common interval."""
    iv = phi.interval
    if iv != psi.interval:
        raise ValueError("weight functions live on different intervals")
    rule = composite_rule(
        iv.t0, iv.T, quad,
        breakpoints=np.union1d(phi.breakpoints, psi.breakpoints),
        degree=phi.degree + psi.degree,
        phase=phi.phase + psi.phase,
    )
    return float(rule.integrate(phi(rule.x) * psi(rule.x)))


def verify_volterra_trace(
    phi: WeightFunction,
    psi: WeightFunction,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
    tol: float = 1e-3,
) -> TraceReport:
    """Diagonal partial sums of G against the limit (phi, psi) / 2."""
    diag = volterra_diagonal(phi, psi, basis, count, quad)
    sums = np.cumsum(diag)
    target = 0.5 * inner_product(phi, psi, quad)
    errors = np.abs(sums - target)
    return TraceReport(
        experiment="volterra-trace",
        basis_id=basis.id,
        weight_ids=(phi.id, psi.id),
        index_label="N",
        index_values=list(range(1, count + 1)),
        partial_sums=[float(s) for s in sums],
        target=target,
        abs_errors=[float(e) for e in errors],
        tolerance=tol,
        converged=bool(errors[-1] <= tol),
        metadata={},
    )


_CERTIFIED_KINDS = (
    SymmetrizedVolterra,
    MonomialMin,
    MonomialMax,
    ComplexExponential,
    SeparableRankOne,
)


def verify_kernel_trace(
    spec: Kernel,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
    tol: float = 1e-3,
) -> TraceReport:
    """Diagonal partial sums of a kernel's expansion matrix against the
    integral of the kernel along the diagonal.

    Only kernel kinds certified trace class (a closed-form factorization or
    finite rank) are accepted; the one-sided product kernel is rejected, its
    statement lives in `verify_volterra_trace`.
    """
    if not isinstance(spec, _CERTIFIED_KINDS):
        raise ValueError(
            f"kernel kind {type(spec).__name__} is not certified trace class; "
            "symmetrized and finite-rank kinds are"
        )
    diag = kernel_diagonal(spec, basis, count, quad)
    sums = np.cumsum(diag)
    iv = spec.interval
    rule = composite_rule(
        iv.t0, iv.T, quad,
        breakpoints=spec.breakpoints,
        degree=2 * spec.degree_hint,
        phase=2 * spec.phase_hint,
    )
    target = rule.integrate(spec.evaluate(rule.x, rule.x))
    target = complex(target) if spec.is_complex else float(target)
    errors = np.abs(sums - target)
    caster = complex if spec.is_complex else float
    return TraceReport(
        experiment="kernel-trace",
        basis_id=basis.id,
        weight_ids=(spec.id,),
        index_label="N",
        index_values=list(range(1, count + 1)),
        partial_sums=[caster(s) for s in sums],
        target=target,
        abs_errors=[float(e) for e in errors],
        tolerance=tol,
        converged=bool(errors[-1] <= tol),
        metadata={},
    )


def two_route_kernel_trace(
    spec: Kernel,
    basis: OrthonormalBasis,
    count: int,
    eps_schedule=None,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
    tol: float = 1e-3,
) -> TraceReport:
    """Kernel trace computed two independent ways and cross-checked.

    Route one expands the kernel in the basis and sums the diagonal
    coefficients; route two never sees the basis, it box-averages the kernel
    near the diagonal and shrinks the box.  Both must land on the integral
    of f(t, t), so their agreement checks the expansion machinery against
    plain two-dimensional quadrature.

    The ladder reports route one (partial sums over N); the averaging route
    rides along in the metadata.  Converged requires BOTH final values
    within `tol` of the shared target.
    """
    expansion = verify_kernel_trace(spec, basis, count, quad, tol)
    averaged = diagonal_trace(spec, eps_schedule, quad, tol)
    extrapolated = averaged.metadata["extrapolated"]
    gap = abs(expansion.partial_sums[-1] - extrapolated)
    ok = bool(
        expansion.abs_errors[-1] <= tol
        and abs(extrapolated - averaged.target) <= tol
    )
    return TraceReport(
        experiment="two-route-kernel-trace",
        basis_id=basis.id,
        weight_ids=(spec.id,),
        index_label="N",
        index_values=expansion.index_values,
        partial_sums=expansion.partial_sums,
        target=expansion.target,
        abs_errors=expansion.abs_errors,
        tolerance=tol,
        converged=ok,
        metadata={
            "averaged_eps": averaged.index_values,
            "averaged_sums": averaged.partial_sums,
            "averaged_extrapolated": extrapolated,
            "route_gap": float(gap),
        },
    )


def verify_symmetric_pair_sum(
    phi: WeightFunction,
    psi: WeightFunction,
    basis: OrthonormalBasis,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
    tol: float = 1e-3,
) -> TraceReport:
    """Partial sums of G[i, i] + G'[i, i] (pair and swapped pair) against
    the full inner product (phi, psi).

    Entry-wise the two one-sided matrices glue to the rank-one expansion
    G[i, j] + G'[j, i] = (phi, q_i)(psi, q_j); on the diagonal the sums
    reproduce (phi, psi) whenever the basis is complete.  The statement is
    scoped to polynomial weights, where the glued expansion truncates after
    finitely many terms; other weight kinds are rejected.
    """
    for name, w in (("phi", phi), ("psi", psi)):
        if not isinstance(w, PolynomialWeight):
            raise ValueError(
                f"non-polynomial weight {name} ({w.id}); "
                "the paired diagonal sum is only certified for polynomial weights"
            )
    d1 = volterra_diagonal(phi, psi, basis, count, quad)
    d2 = volterra_diagonal(psi, phi, basis, count, quad)
    sums = np.cumsum(d1 + d2)
    target = inner_product(phi, psi, quad)
    errors = np.abs(sums - target)
    return TraceReport(
        experiment="symmetric-pair-sum",
        basis_id=basis.id,
        weight_ids=(phi.id, psi.id),
        index_label="N",
        index_values=list(range(1, count + 1)),
        partial_sums=[float(s) for s in sums],
        target=target,
        abs_errors=[float(e) for e in errors],
        tolerance=tol,
        converged=bool(errors[-1] <= tol),
        metadata={},
    )


def basis_independence(
    phi: WeightFunction,
    psi: WeightFunction,
    bases: list,
    count: int,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
    tol: float = 2e-3,
) -> TraceReport:
    """Diagonal sums at truncation `count` across several bases.

    Converged means the per-basis sums agree: the pairwise spread stays
    within `tol` and every sum lies within `tol` of the shared limit
    (phi, psi) / 2.
    """
    if not bases:
        raise ValueError("need at least one basis")
    sums = []
    for basis in bases:
        diag = volterra_diagonal(phi, psi, basis, count, quad)
        sums.append(float(np.sum(diag)))
    target = 0.5 * inner_product(phi, psi, quad)
    spread = max(sums) - min(sums) if len(sums) > 1 else 0.0
    abs_errors = [abs(s - target) for s in sums]
    return TraceReport(
        experiment="basis-independence",
        basis_id=";".join(b.id for b in bases),
        weight_ids=(phi.id, psi.id),
        index_label="basis_index",
        index_values=list(range(len(bases))),
        partial_sums=sums,
        target=target,
        abs_errors=abs_errors,
        tolerance=tol,
        converged=bool(spread <= tol and max(abs_errors) <= tol),
        metadata={"max_spread": spread, "N": count, "bases": [b.id for b in bases]},
    )


def _reduced_limit_vector(w_pair, w_outer, basis, n_reduced, quad, from_left: bool):
    """Expansion coefficients of (1/2) w_outer(t) R(t) in the basis, where
    R is the running integral of w_pair[0] * w_pair[1] from the left endpoint
    (from_left) or up to the right endpoint."""
    w_a, w_b = w_pair
    iv = w_a.interval
    breaks = np.union1d(
        np.union1d(w_a.breakpoints, w_b.breakpoints),
        np.union1d(w_outer.breakpoints, basis.breakpoints(n_reduced)),
    )
    rule = composite_rule(
        iv.t0, iv.T, quad,
        breakpoints=breaks,
        degree=w_a.degree + w_b.degree + 1 + w_outer.degree + basis.degree_hint(n_reduced),
        phase=w_a.phase + w_b.phase + w_outer.phase + basis.phase_hint(n_reduced),
    )
    m = nodes_for(quad, w_a.degree + w_b.degree,
                  (w_a.phase + w_b.phase) * float(np.diff(rule.edges).max()) / iv.length)
    nested = nested_rule(rule, m)
    product = w_a(rule.x) * w_b(rule.x)
    per_panel = rule.panel_sums(product)
    prefix = np.concatenate([[0.0], np.cumsum(per_panel)[:-1]])
    running = prefix[rule.panel_index] + np.einsum(
        "gm,gm->g", nested.v, w_a(nested.y) * w_b(nested.y)
    )
    if not from_left:
        running = float(rule.integrate(product)) - running
    reduced_vals = 0.5 * w_outer(rule.x) * running
    q = basis.evaluate_block(rule.x, n_reduced)
    return (rule.w * reduced_vals) @ q


def tensor_neighbor_trace(
    tensor: CoefficientTensor,
    w1: WeightFunction,
    w2: WeightFunction,
    w3: WeightFunction,
    basis: OrthonormalBasis,
    pair: tuple = (1, 2),
    n_reduced: int = 8,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
    tol: float = 5e-3,
) -> TraceReport:
    """Partial traces of an order-3 tensor over a NEIGHBORING slot pair.

    Slot 1 indexes the innermost integral and slot 3 the outermost.  Tracing
    slots (1, 2) collapses the two inner variables and leaves the vector
    v_k(N) = sum_{i<N} T[i, i, k], whose limit is the expansion of
    (1/2) w3(t) int_{t0}^t w1 w2; tracing (2, 3) collapses the two outer
    variables and leaves v_i(N) = sum_{j<N} T[i, j, j] with limit the
    expansion of (1/2) w1(r) int_r^T w2 w3.  The report tracks the worst
    component deviation over the first `n_reduced` reduced indices.
    """
    if tensor.basis_id != basis.id:
        raise ValueError(f"tensor was built in {tensor.basis_id}, got basis {basis.id}")
    count = tensor.count
    n_reduced = min(n_reduced, count)
    if pair == (1, 2):
        traced = np.einsum("iik->ik", tensor.entries).cumsum(axis=0)
        limits = _reduced_limit_vector((w1, w2), w3, basis, n_reduced, quad, from_left=True)
    elif pair == (2, 3):
        traced = np.einsum("ijj->ji", tensor.entries).cumsum(axis=0)
        limits = _reduced_limit_vector((w2, w3), w1, basis, n_reduced, quad, from_left=False)
    else:
        raise ValueError(f"pair must be (1, 2) or (2, 3), got {pair}")

    deviations = np.abs(traced[:, :n_reduced] - limits[None, :])
    worst = deviations.max(axis=1)
    return TraceReport(
        experiment="tensor-neighbor-trace",
        basis_id=basis.id,
        weight_ids=(w1.id, w2.id, w3.id),
        index_label="N",
        index_values=list(range(1, count + 1)),
        partial_sums=[float(x) for x in worst],
        target=0.0,
        abs_errors=[float(x) for x in worst],
        tolerance=tol,
        converged=bool(worst[-1] <= tol),
        metadata={
            "pair": list(pair),
            "n_reduced": n_reduced,
            "limits": [float(x) for x in limits],
            "final_vector": [float(x) for x in traced[-1, :n_reduced]],
        },
    )


def tensor_nonneighbor_trace(
    tensor: CoefficientTensor,
    Ns=None,
    tol: float = 5e-2,
) -> TraceReport:
    """Partial traces over the NON-neighboring slot pair (1, 3).

    v_j(N) = sum_{i<N} T[i, j, i] carries no trace identity; the statement
    is that it vanishes in the limit, so the report tracks max_j |v_j(N)|
    along a truncation ladder.
    """
    count = tensor.count
    if Ns is None:
        Ns = [n for n in (2 ** k for k in range(1, 30)) if n <= count]
        if not Ns or Ns[-1] != count:
            Ns.append(count)
    Ns = sorted(set(int(n) for n in Ns))
    if Ns[0] < 1 or Ns[-1] > count:
        raise ValueError(f"ladder {Ns} outside 1..{count}")

    partial = np.einsum("iji->ij", tensor.entries).cumsum(axis=0)
    worst = [float(np.max(np.abs(partial[n - 1]))) for n in Ns]
    return TraceReport(
        experiment="tensor-nonneighbor-trace",
        basis_id=tensor.basis_id,
        weight_ids=tensor.weight_ids,
        index_label="N",
        index_values=Ns,
        partial_sums=worst,
        target=0.0,
        abs_errors=list(worst),
        tolerance=tol,
        converged=bool(worst[-1] <= tol),
        metadata={"final_vector": [float(x) for x in partial[Ns[-1] - 1]]},
    )
