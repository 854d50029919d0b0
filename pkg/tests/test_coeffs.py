"""Expansion coefficients: closed forms, independent quadrature oracles, cache.

The independent oracles here never touch the running-primitive engine:
scipy's adaptive dblquad, exact rational polynomial algebra, and frozen
analytic diagonals.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from stratrace import (
    CacheCorruptError,
    CacheKeyError,
    ComplexExponential,
    Interval,
    MonomialMin,
    QuadratureConfig,
    SymmetrizedVolterra,
    cache_load,
    cache_store,
    cached_coefficient_matrix,
    coefficient,
    coefficient_matrix,
    kernel_coefficient,
    kernel_diagonal,
    kernel_matrix,
    matrix_key,
    tensor_coefficients,
    tensor_key,
    volterra_diagonal,
    volterra_norm_sq,
    weight_basis_inner,
)
from stratrace.coeffs import cache_path

from conftest import UNIT, make_basis, poly

ONE = poly(1.0)
TEE = poly(0.0, 1.0)
TSQ = poly(0.0, 0.0, 1.0)


# -- single entries against closed forms ---------------------------------------


def test_constant_weights_first_diagonal_entry():
    leg = make_basis("legendre", 4)
    assert coefficient(ONE, ONE, leg, 0, 0) == pytest.approx(0.5, abs=1e-14)
    assert coefficient(ONE, ONE, leg, 1, 1) == pytest.approx(0.0, abs=1e-14)


def test_zero_weights_zero_everywhere():
    leg = make_basis("legendre", 4)
    zero = poly(0.0)
    matrix = coefficient_matrix(zero, zero, leg, 4)
    assert np.all(matrix.entries == 0.0)


def test_constant_weight_matrix_diagonal():
    leg = make_basis("legendre", 4)
    matrix = coefficient_matrix(ONE, ONE, leg, 4)
    assert np.allclose(np.diag(matrix.entries), [0.5, 0.0, 0.0, 0.0], atol=1e-14)


def test_linear_weight_diagonal_closed_forms():
    # for phi = 1, psi = t on [0, 1] with shifted Legendre:
    # G_00 = 1/6 and G_ii = (1/4) / ((2i + 3)(2i - 1)) for i >= 1
    leg = make_basis("legendre", 8)
    diag = volterra_diagonal(ONE, TEE, leg, 8)
    closed = [1.0 / 6.0] + [0.25 / ((2 * i + 3) * (2 * i - 1)) for i in range(1, 8)]
    assert np.allclose(diag, closed, atol=1e-13)


def test_linear_weight_fourier_diagonal_closed_forms():
    # sine harmonic k: 3 / (8 pi^2 k^2); cosine harmonic k: 1 / (8 pi^2 k^2)
    fou = make_basis("fourier", 7)
    diag = volterra_diagonal(ONE, TEE, fou, 7)
    assert diag[0] == pytest.approx(1.0 / 6.0, abs=1e-13)
    for k in (1, 2, 3):
        assert diag[2 * k - 1] == pytest.approx(3.0 / (8 * np.pi**2 * k**2), abs=1e-13)
        assert diag[2 * k] == pytest.approx(1.0 / (8 * np.pi**2 * k**2), abs=1e-13)


def test_linear_weight_haar_diagonal_closed_forms():
    # every level-j wavelet contributes 2^(-2j) / 24
    haar = make_basis("haar", 8)
    diag = volterra_diagonal(ONE, TEE, haar, 8)
    assert diag[0] == pytest.approx(1.0 / 6.0, abs=1e-13)
    idx = 1
    for level in range(3):
        expected = 2.0 ** (-2 * level) / 24.0
        assert np.allclose(diag[idx: idx + 2**level], expected, atol=1e-13), level
        idx += 2**level


def test_entries_against_adaptive_dblquad():
    leg = make_basis("legendre", 4)
    for i in range(3):
        for j in range(3):
            def integrand(tau, t, i=i, j=j):
                return t * leg.evaluate(i, t) * tau**2 * leg.evaluate(j, tau)

            oracle, est = integrate.dblquad(
                integrand, 0.0, 1.0, lambda t: 0.0, lambda t: t,
                epsabs=1e-12, epsrel=1e-12,
            )
            assert est < 1e-10
            assert coefficient(TEE, TSQ, leg, i, j) == pytest.approx(oracle, abs=1e-11)


def test_fourier_entries_against_adaptive_dblquad():
    # (1, 1) with sine/cosine harmonics: G_12 = 1/(2 pi) = -G_21
    fou = make_basis("fourier", 4)
    assert coefficient(ONE, ONE, fou, 1, 2) == pytest.approx(1.0 / (2 * np.pi), abs=1e-13)
    assert coefficient(ONE, ONE, fou, 2, 1) == pytest.approx(-1.0 / (2 * np.pi), abs=1e-13)


def test_matrix_and_single_entry_agree():
    leg = make_basis("legendre", 6)
    matrix = coefficient_matrix(TEE, TSQ, leg, 6)
    for i, j in ((0, 0), (2, 3), (5, 1)):
        assert matrix.entries[i, j] == pytest.approx(coefficient(TEE, TSQ, leg, i, j), abs=1e-15)


def test_submatrix_extension_consistency():
    leg = make_basis("legendre", 8)
    small = coefficient_matrix(TEE, TSQ, leg, 4)
    large = coefficient_matrix(TEE, TSQ, leg, 8)
    assert np.max(np.abs(large.entries[:4, :4] - small.entries)) < 1e-13
    tiny = coefficient_matrix(ONE, ONE, leg, 1)
    two = coefficient_matrix(ONE, ONE, leg, 2)
    assert abs(tiny.entries[0, 0] - two.entries[0, 0]) < 1e-15


def test_matrix_metadata():
    leg = make_basis("legendre", 4)
    matrix = coefficient_matrix(ONE, TEE, leg, 4)
    assert matrix.count == 4
    assert matrix.basis_id == leg.id
    assert matrix.weight_ids == (ONE.id, TEE.id)
    assert np.all(np.isfinite(matrix.entries))
    assert matrix.trace == pytest.approx(np.trace(matrix.entries))


# -- invariants ----------------------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(
    family=st.sampled_from(["legendre", "fourier", "haar"]),
    coeffs=st.lists(st.floats(-2, 2), min_size=1, max_size=5),
)
def test_equal_weights_diagonal_equals_half_squared_inner(family, coeffs):
    psi = poly(*coeffs)
    basis = make_basis(family, 8)
    diag = volterra_diagonal(psi, psi, basis, 8)
    inner = weight_basis_inner(psi, basis, 8)
    assert np.max(np.abs(diag - 0.5 * inner**2)) < 1e-10


@settings(max_examples=15, deadline=None)
@given(
    pc=st.lists(st.floats(-2, 2), min_size=1, max_size=4),
    qc=st.lists(st.floats(-2, 2), min_size=1, max_size=4),
)
def test_bessel_bound_and_monotonicity(pc, qc):
    phi, psi = poly(*pc), poly(*qc)
    leg = make_basis("legendre", 12)
    matrix = coefficient_matrix(phi, psi, leg, 12)
    bound = volterra_norm_sq(phi, psi)
    partial = [float(np.sum(matrix.entries[:n, :n] ** 2)) for n in (3, 6, 12)]
    assert partial == sorted(partial)
    assert partial[-1] <= bound + 1e-10


def test_node_raising_changes_nothing_beyond_roundoff():
    leg = make_basis("legendre", 16)
    base = coefficient_matrix(TEE, TSQ, leg, 16, QuadratureConfig(nodes_per_panel=8))
    finer = coefficient_matrix(TEE, TSQ, leg, 16, QuadratureConfig(nodes_per_panel=12))
    assert np.max(np.abs(base.entries - finer.entries)) < 1e-13


# -- two-dimensional kernel coefficients ----------------------------------------


def test_symmetrized_kernel_entries():
    leg = make_basis("legendre", 6)
    assert kernel_coefficient(SymmetrizedVolterra(ONE, ONE), leg, 0, 0) == pytest.approx(1.0, abs=1e-12)
    f = kernel_matrix(SymmetrizedVolterra(TEE, TSQ), leg, 6)
    g = coefficient_matrix(TEE, TSQ, leg, 6)
    assert np.max(np.abs(f.entries - (g.entries + g.entries.T))) < 1e-10
    assert np.max(np.abs(f.entries - f.entries.T)) < 1e-12


def test_min_kernel_entries():
    leg = make_basis("legendre", 6)
    spec = MonomialMin(0, 1, UNIT)
    assert kernel_coefficient(spec, leg, 0, 0) == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert kernel_coefficient(spec, leg, 0, 1) == pytest.approx(0.25 / np.sqrt(3.0), abs=1e-12)
    diag = kernel_diagonal(spec, leg, 5)
    closed = [1.0 / 3.0] + [0.5 / ((2 * i + 3) * (2 * i - 1)) for i in range(1, 5)]
    assert np.allclose(diag, closed, atol=1e-12)


def test_min_kernel_against_adaptive_dblquad():
    leg = make_basis("legendre", 4)
    def integrand(tau, t):
        return min(t, tau) * leg.evaluate(2, t) * leg.evaluate(1, tau)
    oracle, est = integrate.dblquad(integrand, 0.0, 1.0, lambda t: 0.0, lambda t: 1.0,
                                    epsabs=1e-12, epsrel=1e-12)
    assert est < 1e-10
    assert kernel_coefficient(MonomialMin(0, 1, UNIT), leg, 2, 1) == pytest.approx(oracle, abs=1e-11)


def test_complex_kernel_entries_are_complex_and_hermitian_symmetric():
    leg = make_basis("legendre", 4)
    f = kernel_matrix(ComplexExponential(0, 1, UNIT), leg, 4)
    assert np.iscomplexobj(f.entries)
    # the kernel itself is symmetric in (t, tau), so F_ij = F_ji (no conjugate)
    assert np.max(np.abs(f.entries - f.entries.T)) < 1e-12
    # int_0^1 int_0^1 cos(min(t, tau)) dt dtau = 2 (1 - cos 1); adaptive 2d
    # quadrature loses ~1e-9 on the diagonal kink, so pin the closed form
    oracle_00 = 2.0 * (1.0 - np.cos(1.0))
    assert f.entries[0, 0].real == pytest.approx(oracle_00, abs=1e-12)


# -- order-3 tensors -------------------------------------------------------------


def _pmul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return out


def _pinteg(a):
    return [Fraction(0)] + [c / (k + 1) for k, c in enumerate(a)]


def _polynomial_tensor_oracle(weights, basis_count):
    """Exact triple iterated integrals via rational polynomial algebra.

    The degree-n orthonormal element on [0, 1] is sqrt(2n+1) times an
    integer-coefficient polynomial, so everything except the final square
    roots stays in Fraction arithmetic.  Entry [i1, i2, i3] nests i1 at the
    innermost level and i3 at the outermost.
    """
    ps = [
        [Fraction((-1) ** (n + k) * math.comb(n, k) * math.comb(n + k, k))
         for k in range(n + 1)]
        for n in range(basis_count)
    ]
    ws = [[Fraction(c) for c in w.coeffs] for w in weights]
    out = np.empty((basis_count,) * 3)
    for i1 in range(basis_count):
        inner1 = _pinteg(_pmul(ws[0], ps[i1]))
        for i2 in range(basis_count):
            inner2 = _pinteg(_pmul(_pmul(ws[1], ps[i2]), inner1))
            for i3 in range(basis_count):
                exact = sum(_pinteg(_pmul(_pmul(ws[2], ps[i3]), inner2)))
                scale = math.sqrt((2 * i1 + 1) * (2 * i2 + 1) * (2 * i3 + 1))
                out[i1, i2, i3] = scale * float(exact)
    return out


def test_tensor_first_entry_is_simplex_volume():
    leg = make_basis("legendre", 4)
    tensor = tensor_coefficients(ONE, ONE, ONE, leg, 4)
    assert tensor.entries[0, 0, 0] == pytest.approx(1.0 / 6.0, abs=1e-13)
    assert np.all(np.isfinite(tensor.entries))


def test_tensor_zero_middle_weight():
    leg = make_basis("legendre", 4)
    tensor = tensor_coefficients(ONE, poly(0.0), ONE, leg, 4)
    assert np.all(tensor.entries == 0.0)


def test_tensor_against_polynomial_algebra_oracle():
    leg = make_basis("legendre", 8)
    tensor = tensor_coefficients(ONE, ONE, ONE, leg, 8)
    oracle = _polynomial_tensor_oracle([ONE, ONE, ONE], 8)
    assert np.max(np.abs(tensor.entries - oracle)) < 1e-12


def test_tensor_with_mixed_weights_against_oracle():
    leg = make_basis("legendre", 4)
    tensor = tensor_coefficients(ONE, TEE, TSQ, leg, 4)
    oracle = _polynomial_tensor_oracle([ONE, TEE, TSQ], 4)
    assert np.max(np.abs(tensor.entries - oracle)) < 1e-13


def test_tensor_metadata():
    leg = make_basis("legendre", 3)
    tensor = tensor_coefficients(ONE, TEE, ONE, leg, 3)
    assert tensor.count == 3
    assert tensor.weight_ids == (ONE.id, TEE.id, ONE.id)
    assert tensor.basis_id == leg.id


# -- persistent cache ------------------------------------------------------------


def test_cache_round_trip_is_bit_exact(tmp_path):
    leg = make_basis("legendre", 8)
    matrix = coefficient_matrix(ONE, ONE, leg, 8)
    key = matrix_key(ONE, ONE, leg, 8)
    path = tmp_path / "m.strc"
    cache_store(matrix.entries, path, key)
    restored = cache_load(path, key, (8, 8))
    assert restored.tobytes() == matrix.entries.tobytes()


def test_cache_rejects_key_mismatch(tmp_path):
    leg = make_basis("legendre", 4)
    matrix = coefficient_matrix(ONE, ONE, leg, 4)
    key = matrix_key(ONE, ONE, leg, 4)
    other_basis = make_basis("legendre", 4, Interval(0.0, 2.0))
    other = matrix_key(ONE, ONE, other_basis, 4)
    assert other != key
    path = tmp_path / "m.strc"
    cache_store(matrix.entries, path, key)
    with pytest.raises(CacheKeyError):
        cache_load(path, other, (4, 4))


def test_cache_rejects_truncated_file(tmp_path):
    leg = make_basis("legendre", 4)
    matrix = coefficient_matrix(ONE, ONE, leg, 4)
    key = matrix_key(ONE, ONE, leg, 4)
    path = tmp_path / "m.strc"
    cache_store(matrix.entries, path, key)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(CacheCorruptError):
        cache_load(path, key, (4, 4))
    path.write_bytes(raw[:10])
    with pytest.raises(CacheCorruptError):
        cache_load(path, key, (4, 4))


def test_cache_rejects_bad_magic_and_version(tmp_path):
    leg = make_basis("legendre", 4)
    matrix = coefficient_matrix(ONE, ONE, leg, 4)
    key = matrix_key(ONE, ONE, leg, 4)
    path = tmp_path / "m.strc"
    cache_store(matrix.entries, path, key)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"JUNK"
    path.write_bytes(bytes(raw))
    with pytest.raises(CacheCorruptError):
        cache_load(path, key, (4, 4))
    raw[:4] = b"STRC"
    raw[4] = 99
    path.write_bytes(bytes(raw))
    with pytest.raises(CacheCorruptError):
        cache_load(path, key, (4, 4))


def test_cached_matrix_recomputes_after_corruption(tmp_path):
    leg = make_basis("legendre", 4)
    first = cached_coefficient_matrix(ONE, TEE, leg, 4, directory=tmp_path)
    key = matrix_key(ONE, TEE, leg, 4)
    path = cache_path(tmp_path, key)
    assert path.exists()
    path.write_bytes(b"garbage")
    healed = cached_coefficient_matrix(ONE, TEE, leg, 4, directory=tmp_path)
    assert np.array_equal(healed.entries, first.entries)
    assert cache_load(path, key, (4, 4)).tobytes() == first.entries.tobytes()


def test_cache_dir_environment_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("STRC_CACHE_DIR", str(tmp_path))
    leg = make_basis("legendre", 4)
    cached_coefficient_matrix(ONE, ONE, leg, 4)
    key = matrix_key(ONE, ONE, leg, 4)
    assert cache_path(tmp_path, key).exists()


def test_keys_depend_on_every_ingredient():
    leg = make_basis("legendre", 8)
    fou = make_basis("fourier", 8)
    base = matrix_key(ONE, TEE, leg, 8)
    assert matrix_key(ONE, TEE, leg, 16) != base
    assert matrix_key(ONE, TEE, fou, 8) != base
    assert matrix_key(TEE, ONE, leg, 8) != base
    assert matrix_key(ONE, TEE, leg, 8, QuadratureConfig(panels=32)) != base
    assert tensor_key(ONE, ONE, ONE, leg, 8) != base
