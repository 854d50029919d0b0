"""Orthonormal bases of L2 on a closed interval.

Three families are implemented: shifted Legendre polynomials, a trigonometric
(constant + sin/cos harmonics) system, and dyadic Haar wavelets.  Every family
exposes pointwise evaluation and the exact running antiderivative
Q_i(t) = int_{t0}^t q_i(s) ds in closed form; the antiderivative of every
non-constant basis function vanishes at both endpoints' full integral,
i.e. Q_i(T) = 0 for i >= 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig, composite_rule

__all__ = ["Interval", "OrthonormalBasis", "FAMILIES", "gram_matrix"]

FAMILIES = ("legendre", "fourier", "haar")


@dataclass(frozen=True)
class Interval:
    """Closed interval [t0, T] with T > t0."""

    t0: float
    T: float

    def __post_init__(self):
        if not (self.T > self.t0):
            raise ValueError(f"need T > t0, got [{self.t0}, {self.T}]")

    @property
    def length(self) -> float:
        return self.T - self.t0

    def contains(self, t) -> bool:
        t = np.asarray(t, dtype=float)
        slack = 1e-12 * self.length
        return bool(np.all((t >= self.t0 - slack) & (t <= self.T + slack)))

    @property
    def id(self) -> str:
        return f"[{self.t0:g},{self.T:g}]"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class OrthonormalBasis:
    family: str
    interval: Interval
    max_index: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}, expected one of {FAMILIES}")
        if self.max_index < 0:
            raise ValueError(f"max_index must be >= 0, got {self.max_index}")
        if self.family == "haar" and not _is_power_of_two(self.max_index + 1):
            raise ValueError(
                "haar basis is depth-limited: max_index + 1 must be a power of two, "
                f"got max_index={self.max_index}"
            )

    @property
    def size(self) -> int:
        return self.max_index + 1

    @property
    def id(self) -> str:
        return f"{self.family}{self.interval.id}:n{self.max_index}"

    # -- pointwise API ------------------------------------------------------

    def evaluate(self, i: int, t):
        """q_i(t); scalar in, scalar out, arrays broadcast."""
        self._check_index(i)
        t_arr = self._check_points(t)
        block = self._evaluate_block(t_arr, i + 1)
        out = block[:, i]
        return float(out[0]) if np.isscalar(t) or np.ndim(t) == 0 else out.reshape(np.shape(t))

    def antiderivative(self, i: int, t):
        """Q_i(t) = int_{t0}^t q_i, in closed form."""
        self._check_index(i)
        t_arr = self._check_points(t)
        block = self._antiderivative_block(t_arr, i + 1)
        out = block[:, i]
        return float(out[0]) if np.isscalar(t) or np.ndim(t) == 0 else out.reshape(np.shape(t))

    # -- block API (all indices < count at once, used by the engines) -------

    def evaluate_block(self, t, count: int) -> np.ndarray:
        self._check_index(count - 1)
        return self._evaluate_block(self._check_points(t), count)

    def antiderivative_block(self, t, count: int) -> np.ndarray:
        self._check_index(count - 1)
        return self._antiderivative_block(self._check_points(t), count)

    # -- quadrature demand hints --------------------------------------------

    def degree_hint(self, count: int) -> int:
        """Polynomial degree of the highest basis function in play."""
        return count - 1 if self.family == "legendre" else 0

    def phase_hint(self, count: int) -> float:
        """Total angular sweep over the interval of the fastest oscillation."""
        if self.family != "fourier":
            return 0.0
        k_max = (count - 1 + 1) // 2
        return 2.0 * np.pi * k_max

    def breakpoints(self, count: int) -> np.ndarray:
        """Interior discontinuity points of basis functions with index < count."""
        if self.family != "haar" or count <= 1:
            return np.empty(0)
        level = int(np.floor(np.log2(count - 1)))
        segments = 2 ** (level + 1)
        t0, length = self.interval.t0, self.interval.length
        return t0 + length * np.arange(1, segments) / segments

    # -- internals -----------------------------------------------------------

    def _check_index(self, i: int):
        if not (0 <= i <= self.max_index):
            raise ValueError(f"index {i} out of range for {self.id}")

    def _check_points(self, t) -> np.ndarray:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        if not self.interval.contains(t_arr):
            raise ValueError(f"evaluation points fall outside {self.interval.id}")
        return t_arr

    def _evaluate_block(self, t: np.ndarray, count: int) -> np.ndarray:
        if self.family == "legendre":
            return self._legendre_block(t, count, derivative=False)
        if self.family == "fourier":
            return self._fourier_block(t, count, derivative=False)
        return self._haar_block(t, count, derivative=False)

    def _antiderivative_block(self, t: np.ndarray, count: int) -> np.ndarray:
        if self.family == "legendre":
            return self._legendre_block(t, count, derivative=True)
        if self.family == "fourier":
            return self._fourier_block(t, count, derivative=True)
        return self._haar_block(t, count, derivative=True)

    def _legendre_block(self, t, count, derivative):
        t0, length = self.interval.t0, self.interval.length
        u = 2.0 * (t - t0) / length - 1.0
        # three-term recurrence, one extra order for the antiderivative identity
        orders = count + 1
        p = np.empty((len(t), orders))
        p[:, 0] = 1.0
        if orders > 1:
            p[:, 1] = u
        for n in range(1, orders - 1):
            p[:, n + 1] = ((2 * n + 1) * u * p[:, n] - n * p[:, n - 1]) / (n + 1)
        idx = np.arange(count)
        norm = np.sqrt((2 * idx + 1) / length)
        if not derivative:
            return p[:, :count] * norm
        out = np.empty((len(t), count))
        out[:, 0] = (t - t0) / np.sqrt(length)
        if count > 1:
            i = idx[1:]
            out[:, 1:] = (length / 2.0) * norm[1:] * (p[:, 2:count + 1] - p[:, 0:count - 1]) / (2 * i + 1)
        return out

    def _fourier_block(self, t, count, derivative):
        t0, length = self.interval.t0, self.interval.length
        u = (t - t0) / length
        out = np.empty((len(t), count))
        out[:, 0] = (t - t0) / np.sqrt(length) if derivative else 1.0 / np.sqrt(length)
        amp = np.sqrt(2.0 / length)
        for i in range(1, count):
            k = (i + 1) // 2
            ang = 2.0 * np.pi * k * u
            if i % 2 == 1:  # sine harmonic
                out[:, i] = np.sqrt(2.0 * length) * (1.0 - np.cos(ang)) / (2.0 * np.pi * k) if derivative \
                    else amp * np.sin(ang)
            else:  # cosine harmonic
                out[:, i] = np.sqrt(2.0 * length) * np.sin(ang) / (2.0 * np.pi * k) if derivative \
                    else amp * np.cos(ang)
        return out

    def _haar_block(self, t, count, derivative):
        t0, length = self.interval.t0, self.interval.length
        s = (t - t0) / length
        out = np.zeros((len(t), count))
        out[:, 0] = (t - t0) / np.sqrt(length) if derivative else 1.0 / np.sqrt(length)
        for i in range(1, count):
            level = int(np.floor(np.log2(i)))
            k = i - (1 << level)
            x = s * (1 << level) - k  # wavelet-local coordinate in [0, 1]
            amp = (2.0 ** (0.5 * level)) / np.sqrt(length)
            if not derivative:
                inside = (x >= 0.0) & (x <= 1.0)
                out[:, i] = np.where(inside, np.where(x < 0.5, amp, -amp), 0.0)
            else:
                half = length / (1 << (level + 1))  # half-support width in t units
                rise = np.clip(x, 0.0, 0.5) * 2.0 * half
                fall = (np.clip(x, 0.5, 1.0) - 0.5) * 2.0 * half
                out[:, i] = amp * (rise - fall)
        return out


def gram_matrix(basis: OrthonormalBasis, n: int, quad: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """Quadrature Gram matrix of the first n basis functions (identity check)."""
    if n < 1 or n > basis.size:
        raise ValueError(f"need 1 <= n <= {basis.size}, got {n}")
    rule = composite_rule(
        basis.interval.t0,
        basis.interval.T,
        quad,
        breakpoints=basis.breakpoints(n),
        degree=2 * basis.degree_hint(n),
        phase=2.0 * basis.phase_hint(n),
    )
    block = basis.evaluate_block(rule.x, n)
    return (block * rule.w[:, None]).T @ block
