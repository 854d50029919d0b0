"""Volterra-type kernels on the square, their box averaging, and the
closed-form factorizations that certify them as trace class.

Every kernel kind evaluates pointwise with the unit step taking the value 1/2
on the diagonal, so symmetrized kinds agree with their two-sided definition at
t = tau.  `averaging` implements the zero-extension box average

    S_eps f(t, tau) = (1 / 4 eps^2) * int int over the eps-box around (t, tau)

and `diagonal_trace` integrates it along the diagonal for a decreasing eps
schedule, extrapolating the limit.  `explicit_factor_pair` emits the pieces
(f1, f2, rank-one remainder) with f(t,tau) = int f1(t,xi) f2(xi,tau) dxi +
remainder(t,tau), and `factorization_residual` checks that identity on a
lattice with the xi-integral done numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import Interval
from .quadrature import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    composite_rule,
    gauss_rule,
    nodes_for,
    scaled_segments,
)
from .reports import TraceReport
from .weights import WeightFunction

__all__ = [
    "Kernel",
    "VolterraProduct",
    "SymmetrizedVolterra",
    "MonomialMin",
    "MonomialMax",
    "ComplexExponential",
    "SeparableRankOne",
    "FactorPair",
    "evaluate_kernel",
    "averaging",
    "default_eps_schedule",
    "diagonal_trace",
    "explicit_factor_pair",
    "factorization_residual",
]


def _step(x):
    """Unit step with value 1/2 at zero."""
    return np.heaviside(x, 0.5)


class Kernel:
    interval: Interval
    has_step: bool = True
    is_complex: bool = False

    def evaluate(self, t, tau):
        raise NotImplementedError

    # quadrature demand hints, per variable
    @property
    def degree_hint(self) -> int:
        return 0

    @property
    def phase_hint(self) -> float:
        return 0.0

    @property
    def breakpoints(self) -> np.ndarray:
        return np.empty(0)

    @property
    def id(self) -> str:
        raise NotImplementedError


def _common_interval(phi: WeightFunction, psi: WeightFunction) -> Interval:
    if phi.interval != psi.interval:
        raise ValueError("weight functions live on different intervals")
    return phi.interval


@dataclass(frozen=True)
class VolterraProduct(Kernel):
    """phi(t) psi(tau) 1(t - tau): the one-sided product kernel."""

    phi: WeightFunction
    psi: WeightFunction

    def __post_init__(self):
        object.__setattr__(self, "interval", _common_interval(self.phi, self.psi))

    def evaluate(self, t, tau):
        t = np.asarray(t, dtype=float)
        tau = np.asarray(tau, dtype=float)
        return self.phi(t) * self.psi(tau) * _step(t - tau)

    @property
    def degree_hint(self):
        return max(self.phi.degree, self.psi.degree)

    @property
    def phase_hint(self):
        return max(self.phi.phase, self.psi.phase)

    @property
    def breakpoints(self):
        return np.union1d(self.phi.breakpoints, self.psi.breakpoints)

    @property
    def id(self):
        return f"volterra({self.phi.id};{self.psi.id})"


@dataclass(frozen=True)
class SymmetrizedVolterra(Kernel):
    """phi(t) psi(tau) 1(t - tau) + psi(t) phi(tau) 1(tau - t)."""

    phi: WeightFunction
    psi: WeightFunction

    def __post_init__(self):
        object.__setattr__(self, "interval", _common_interval(self.phi, self.psi))

    def evaluate(self, t, tau):
        t = np.asarray(t, dtype=float)
        tau = np.asarray(tau, dtype=float)
        lower = self.phi(t) * self.psi(tau)
        upper = self.psi(t) * self.phi(tau)
        s = _step(t - tau)
        return lower * s + upper * (1.0 - s)

    @property
    def degree_hint(self):
        return max(self.phi.degree, self.psi.degree)

    @property
    def phase_hint(self):
        return max(self.phi.phase, self.psi.phase)

    @property
    def breakpoints(self):
        return np.union1d(self.phi.breakpoints, self.psi.breakpoints)

    @property
    def id(self):
        return f"symmetrized({self.phi.id};{self.psi.id})"


@dataclass(frozen=True)
class MonomialMin(Kernel):
    """t^n tau^(m+n) 1(t - tau) + tau^n t^(m+n) 1(tau - t)
    = (t tau)^n min(t, tau)^m, with n >= 0, m >= 1."""

    n: int
    m: int
    interval: Interval

    def __post_init__(self):
        if self.n < 0 or self.m < 1:
            raise ValueError("monomial kernel needs n >= 0 and m >= 1")

    def evaluate(self, t, tau):
        t = np.asarray(t, dtype=float)
        tau = np.asarray(tau, dtype=float)
        s = _step(t - tau)
        lower = t**self.n * tau ** (self.m + self.n)
        upper = tau**self.n * t ** (self.m + self.n)
        return lower * s + upper * (1.0 - s)

    @property
    def degree_hint(self):
        return self.m + self.n

    @property
    def id(self):
        return f"monomial_min(n={self.n},m={self.m})"


@dataclass(frozen=True)
class MonomialMax(Kernel):
    """t^(m+n) tau^n 1(t - tau) + tau^(m+n) t^n 1(tau - t)
    = (t tau)^n max(t, tau)^m, with n >= 0, m >= 1."""

    n: int
    m: int
    interval: Interval

    def __post_init__(self):
        if self.n < 0 or self.m < 1:
            raise ValueError("monomial kernel needs n >= 0 and m >= 1")

    def evaluate(self, t, tau):
        t = np.asarray(t, dtype=float)
        tau = np.asarray(tau, dtype=float)
        s = _step(t - tau)
        lower = t ** (self.m + self.n) * tau**self.n
        upper = tau ** (self.m + self.n) * t**self.n
        return lower * s + upper * (1.0 - s)

    @property
    def degree_hint(self):
        return self.m + self.n

    @property
    def id(self):
        return f"monomial_max(n={self.n},m={self.m})"


@dataclass(frozen=True)
class ComplexExponential(Kernel):
    """exp(i n t) exp(i m tau) 1(t - tau) + exp(i n tau) exp(i m t) 1(tau - t),
    integer n, nonzero integer m."""

    n: int
    m: int
    interval: Interval
    is_complex = True

    def __post_init__(self):
        if self.m == 0:
            raise ValueError("complex exponential kernel needs m != 0")

    def evaluate(self, t, tau):
        t = np.asarray(t, dtype=float)
        tau = np.asarray(tau, dtype=float)
        s = _step(t - tau)
        lower = np.exp(1j * self.n * t) * np.exp(1j * self.m * tau)
        upper = np.exp(1j * self.n * tau) * np.exp(1j * self.m * t)
        return lower * s + upper * (1.0 - s)

    @property
    def phase_hint(self):
        return (abs(self.n) + abs(self.m)) * self.interval.length

    @property
    def id(self):
        return f"complex_exp(n={self.n},m={self.m})"


@dataclass(frozen=True)
class SeparableRankOne(Kernel):
    """phi(t) psi(tau) on the whole square; no step, trivially trace class."""

    phi: WeightFunction
    psi: WeightFunction
    has_step = False

    def __post_init__(self):
        object.__setattr__(self, "interval", _common_interval(self.phi, self.psi))

    def evaluate(self, t, tau):
        t = np.asarray(t, dtype=float)
        tau = np.asarray(tau, dtype=float)
        return self.phi(t) * self.psi(tau)

    @property
    def degree_hint(self):
        return max(self.phi.degree, self.psi.degree)

    @property
    def phase_hint(self):
        return max(self.phi.phase, self.psi.phase)

    @property
    def breakpoints(self):
        return np.union1d(self.phi.breakpoints, self.psi.breakpoints)

    @property
    def id(self):
        return f"rank_one({self.phi.id};{self.psi.id})"


def evaluate_kernel(spec: Kernel, t, tau):
    """Pointwise kernel value(s); validates that the points lie in the square."""
    iv = spec.interval
    if not (iv.contains(t) and iv.contains(tau)):
        raise ValueError(f"points fall outside the square over {iv.id}")
    out = spec.evaluate(t, tau)
    if np.ndim(t) == 0 and np.ndim(tau) == 0:
        return complex(out) if spec.is_complex else float(out)
    return out


def _box_nodes(spec: Kernel, eps: float, base_nodes: int) -> int:
    cfg = QuadratureConfig(panels=1, nodes_per_panel=base_nodes)
    local_phase = spec.phase_hint * (2.0 * eps) / spec.interval.length
    return nodes_for(cfg, 2 * spec.degree_hint + 1, local_phase)


def averaging(spec: Kernel, eps: float, t: float, tau: float, nodes: int = 24):
    """Box average of the zero-extended kernel over the eps-box around (t, tau)."""
    if not (eps > 0.0):
        raise ValueError(f"eps must be positive, got {eps}")
    iv = spec.interval
    th_lo, th_hi = max(iv.t0, t - eps), min(iv.T, t + eps)
    vt_lo, vt_hi = max(iv.t0, tau - eps), min(iv.T, tau + eps)
    zero = 0.0j if spec.is_complex else 0.0
    if th_hi <= th_lo or vt_hi <= vt_lo:
        return zero

    n = _box_nodes(spec, eps, nodes)
    # outer (theta) panels split where the diagonal enters/leaves the box and
    # at any kernel breakpoints, so every panel integrand is smooth
    cuts = [th_lo, th_hi]
    if spec.has_step:
        cuts += [x for x in (vt_lo, vt_hi) if th_lo < x < th_hi]
    cuts += [x for x in spec.breakpoints if th_lo < x < th_hi]
    edges = np.unique(np.asarray(cuts, dtype=float))

    total = zero
    ref_x, ref_w = gauss_rule(n)
    for a, b in zip(edges[:-1], edges[1:]):
        theta = 0.5 * (a + b) + 0.5 * (b - a) * ref_x
        w_theta = 0.5 * (b - a) * ref_w
        inner = _inner_strip(spec, theta, vt_lo, vt_hi, n)
        total = total + np.sum(w_theta * inner)
    return total / (4.0 * eps * eps)


def _inner_strip(spec: Kernel, theta: np.ndarray, vt_lo: float, vt_hi: float, n: int):
    """int_{vt_lo}^{vt_hi} f(theta_g, v) dv for a batch of theta nodes,
    splitting at the diagonal v = theta_g and at kernel breakpoints."""
    bounds = [vt_lo, vt_hi] + [x for x in spec.breakpoints if vt_lo < x < vt_hi]
    bounds = np.unique(np.asarray(bounds, dtype=float))
    dtype = complex if spec.is_complex else float
    out = np.zeros(len(theta), dtype=dtype)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if spec.has_step:
            split = np.clip(theta, lo, hi)
            for seg_lo, seg_hi in ((lo, split), (split, hi)):
                y, v = scaled_segments(seg_lo, seg_hi, n)
                out = out + np.sum(v * spec.evaluate(theta[:, None], y), axis=1)
        else:
            y, v = scaled_segments(lo, hi, n)
            out = out + np.sum(v * spec.evaluate(theta[:, None], y), axis=1)
    return out


def default_eps_schedule(interval: Interval, k_min: int = 3, k_max: int = 12):
    """Geometric schedule L * 2^-k for k = k_min .. k_max."""
    if k_min > k_max:
        raise ValueError("need k_min <= k_max")
    return [interval.length * 2.0 ** (-k) for k in range(k_min, k_max + 1)]


def diagonal_trace(
    spec: Kernel,
    eps_schedule=None,
    quad: QuadratureConfig = DEFAULT_QUADRATURE,
    tol: float = 1e-4,
) -> TraceReport:
    """Integral of the box-averaged kernel along the diagonal, per eps.

    The target is the direct quadrature of t -> f(t, t) (diagonal convention
    1(0) = 1/2); the extrapolated limit removes the leading O(eps) boundary
    term by Richardson extrapolation over the last two schedule entries.
    """
    iv = spec.interval
    if eps_schedule is None:
        eps_schedule = default_eps_schedule(iv)
    eps_schedule = [float(e) for e in eps_schedule]
    if any(e <= 0 for e in eps_schedule):
        raise ValueError("eps schedule must be positive")
    if any(b >= a for a, b in zip(eps_schedule[:-1], eps_schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")

    diag_rule = composite_rule(
        iv.t0, iv.T, quad,
        breakpoints=spec.breakpoints,
        degree=2 * spec.degree_hint,
        phase=2 * spec.phase_hint,
    )
    target = diag_rule.integrate(spec.evaluate(diag_rule.x, diag_rule.x))
    target = complex(target) if spec.is_complex else float(target)

    sums = []
    for eps in eps_schedule:
        breaks = np.concatenate([[iv.t0 + eps, iv.T - eps], spec.breakpoints])
        rule = composite_rule(
            iv.t0, iv.T, quad,
            breakpoints=breaks,
            degree=2 * spec.degree_hint + 2,
            phase=2 * spec.phase_hint,
        )
        vals = np.array([averaging(spec, eps, t, t) for t in rule.x])
        s = rule.integrate(vals)
        sums.append(complex(s) if spec.is_complex else float(s))

    if len(sums) >= 2:
        e1, e2 = eps_schedule[-2], eps_schedule[-1]
        extrapolated = (e1 * sums[-1] - e2 * sums[-2]) / (e1 - e2)
    else:
        extrapolated = sums[-1]
    errors = [abs(s - target) for s in sums]
    converged = bool(abs(extrapolated - target) <= tol)
    return TraceReport(
        experiment="kernel-trace",
        basis_id=None,
        weight_ids=(spec.id,),
        index_label="epsilon",
        index_values=list(eps_schedule),
        partial_sums=sums,
        target=target,
        abs_errors=errors,
        tolerance=tol,
        converged=converged,
        metadata={"extrapolated": extrapolated},
    )


@dataclass(frozen=True)
class FactorPair:
    """Closed-form factorization f = int f1(.,xi) f2(xi,.) dxi + remainder.

    `support` names where the xi-integrand lives: below the running minimum of
    (t, tau) or above the running maximum.  `f1` already carries any sign
    needed to make the identity additive.
    """

    f1: object
    f2: object
    remainder: object
    support: str
    xi_degree: int = 0
    xi_phase: float = 0.0


def explicit_factor_pair(spec: Kernel) -> FactorPair:
    """The proof's factor pair and rank-one remainder for a kernel kind."""
    iv = spec.interval
    if isinstance(spec, MonomialMin):
        n, m = spec.n, spec.m

        def f1(t, xi):
            return m * t**n * xi ** (m - 1) * _step(t - xi)

        def f2(xi, tau):
            return tau**n * _step(tau - xi)

        def remainder(t, tau):
            return t**n * tau**n * iv.t0**m

        return FactorPair(f1, f2, remainder, "below_min", xi_degree=m - 1)

    if isinstance(spec, MonomialMax):
        n, m = spec.n, spec.m

        def f1(t, xi):
            # sign flipped so the composition enters additively
            return -m * t**n * xi ** (m - 1) * _step(xi - t)

        def f2(xi, tau):
            return tau**n * _step(xi - tau)

        def remainder(t, tau):
            return t**n * tau**n * iv.T**m

        return FactorPair(f1, f2, remainder, "above_max", xi_degree=m - 1)

    if isinstance(spec, ComplexExponential):
        n, d = spec.n, spec.m - spec.n

        def f1(t, xi):
            if d == 0:
                return np.zeros(np.broadcast(t, xi).shape, dtype=complex)
            return 1j * d * np.exp(1j * n * t) * np.exp(1j * d * xi) * _step(t - xi)

        def f2(xi, tau):
            return np.exp(1j * n * tau) * _step(tau - xi)

        def remainder(t, tau):
            return np.exp(1j * n * t) * np.exp(1j * n * tau) * np.exp(1j * d * iv.t0)

        return FactorPair(f1, f2, remainder, "below_min", xi_phase=abs(d) * iv.length)

    raise ValueError(f"no closed-form factor pair for kernel kind {type(spec).__name__}")


def factorization_residual(
    spec: Kernel,
    pair: FactorPair | None = None,
    sample_grid: int = 32,
    nodes: int | None = None,
) -> float:
    """max over a lattice of |f(t,tau) - int f1 f2 dxi - remainder(t,tau)|,
    with the xi-integral evaluated numerically."""
    if pair is None:
        pair = explicit_factor_pair(spec)
    iv = spec.interval
    if nodes is None:
        cfg = QuadratureConfig(panels=1, nodes_per_panel=8)
        nodes = nodes_for(cfg, pair.xi_degree, pair.xi_phase)

    t = np.linspace(iv.t0, iv.T, sample_grid)
    tau = np.linspace(iv.t0, iv.T, sample_grid)
    T_grid = t[:, None]
    Tau_grid = tau[None, :]

    if pair.support == "below_min":
        lo, hi = iv.t0, np.minimum(T_grid, Tau_grid)
    elif pair.support == "above_max":
        lo, hi = np.maximum(T_grid, Tau_grid), iv.T
    else:
        raise ValueError(f"unsupported factor-pair support {pair.support!r}")

    y, v = scaled_segments(np.broadcast_to(lo, (sample_grid, sample_grid)),
                           np.broadcast_to(hi, (sample_grid, sample_grid)), nodes)
    composition = np.sum(v * pair.f1(T_grid[..., None], y) * pair.f2(y, Tau_grid[..., None]), axis=-1)
    residual = spec.evaluate(T_grid, Tau_grid) - composition - pair.remainder(T_grid, Tau_grid)
    return float(np.max(np.abs(residual)))
