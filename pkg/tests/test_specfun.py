import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vortexlab.errors import CapabilityError, DomainError
from vortexlab.specfun import (assoc_laguerre, bessel_i, bessel_j, hermite,
                               leggauss, sph_harm, wigner_d)


def hermite_coefficient_sum(k, x):
    """Closed-form coefficient sum H_k(x) = k! sum_m (-1)^m (2x)^{k-2m}/(m!(k-2m)!)."""
    total = 0.0
    for m in range(k // 2 + 1):
        total += (-1) ** m * (2 * x) ** (k - 2 * m) / (math.factorial(m) * math.factorial(k - 2 * m))
    return math.factorial(k) * total


def test_hermite_trivial():
    assert hermite(0, 3.7) == 1.0
    assert hermite(2, 1.0) == pytest.approx(2.0, abs=1e-14)


def test_hermite_coefficient_oracle():
    assert hermite(7, 0.5) == pytest.approx(hermite_coefficient_sum(7, 0.5), rel=1e-12)


def test_hermite_cap():
    with pytest.raises(CapabilityError):
        hermite(61, 0.0)


@given(st.integers(2, 25), st.floats(-5, 5))
@settings(max_examples=60, deadline=None)
def test_hermite_matches_coefficients(k, x):
    ref = hermite_coefficient_sum(k, x)
    assert hermite(k, x) == pytest.approx(ref, rel=1e-9, abs=1e-6)


def test_laguerre_trivial():
    assert assoc_laguerre(0, 2, 5.0) == 1.0
    assert assoc_laguerre(1, 2, 1.0) == pytest.approx(2.0, abs=1e-14)
    # binomial(n + a, n) at x = 0
    assert assoc_laguerre(2, 1, 0.0) == pytest.approx(3.0, abs=1e-14)


def test_laguerre_cap_and_domain():
    with pytest.raises(CapabilityError):
        assoc_laguerre(61, 0, 1.0)
    with pytest.raises(DomainError):
        assoc_laguerre(2, -1.5, 1.0)


def test_wigner_trivial():
    assert wigner_d(0, 0, 0, 1.234) == pytest.approx(1.0)
    assert wigner_d(1, 0, 0, np.pi / 3) == pytest.approx(0.5, abs=1e-14)
    assert wigner_d(1, 1, 1, np.pi / 2) == pytest.approx(0.5, abs=1e-14)


def test_wigner_identity_at_zero():
    for l in range(4):
        for m in range(-l, l + 1):
            for mp in range(-l, l + 1):
                expect = 1.0 if m == mp else 0.0
                assert wigner_d(l, m, mp, 0.0) == pytest.approx(expect, abs=1e-14)


def test_wigner_row_orthonormality_grid():
    thetas = np.linspace(0, np.pi, 100)
    for l in range(4):
        for m in range(-l, l + 1):
            total = sum(wigner_d(l, m, mp, thetas) ** 2 for mp in range(-l, l + 1))
            assert np.allclose(total, 1.0, atol=1e-12)


def test_wigner_domain():
    with pytest.raises(DomainError):
        wigner_d(1, 2, 0, 0.5)


def bessel_i_series(m, x):
    term = (x / 2) ** m / math.factorial(m)
    total = term
    k = 0
    while term > 1e-20 * total:
        k += 1
        term *= (x * x / 4) / (k * (k + m))
        total += term
    return total


def test_bessel_trivial_and_small_x():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(3, 0.0) == 0.0
    # small-argument asymptotic J_m(x) ~ (x/2)^m / m!
    approx = (0.005) ** 3 / 6
    assert abs(bessel_j(3, 0.01) - approx) / approx < 1e-4


def test_bessel_i_series_oracle():
    assert bessel_i(2, 1.5) == pytest.approx(bessel_i_series(2, 1.5), rel=1e-13)


def test_bessel_negative_order():
    assert bessel_j(-3, 2.0) == pytest.approx(-bessel_j(3, 2.0), rel=1e-12)
    assert bessel_i(-2, 1.1) == pytest.approx(bessel_i(2, 1.1), rel=1e-12)


@given(st.integers(0, 12), st.floats(0.01, 50.0))
@settings(max_examples=80, deadline=None)
def test_bessel_j_wronskian(m, x):
    # J_{m+1}(x) J_m'(x) - ... use the recurrence consistency instead:
    # J_{m-1}(x) + J_{m+1}(x) = (2m/x) J_m(x)
    lhs = bessel_j(m - 1, x) + bessel_j(m + 1, x) if m >= 1 else 2 * bessel_j(1, x)
    rhs = (2 * m / x) * bessel_j(m, x) if m >= 1 else 2 * bessel_j(1, x)
    scale = max(abs(bessel_j(m, x)), abs(lhs), 1e-10)
    assert abs(lhs - rhs) / scale < 1e-9


def test_jacobi_anger_resummation():
    # |e^{-i x cos phi} - sum_{|m|<=M} (-i)^m J_m(x) e^{i m phi}| < 1e-10
    for x in (0.5, 2.0, 5.0):
        phis = np.linspace(0, 2 * np.pi, 17)
        series = np.zeros_like(phis, dtype=complex)
        for m in range(-40, 41):
            series += (-1j) ** m * bessel_j(m, x) * np.exp(1j * m * phis)
        exact = np.exp(-1j * x * np.cos(phis))
        assert np.max(np.abs(exact - series)) < 1e-10


def test_sph_harm_trivial():
    assert sph_harm(0, 0, 0.7, 0.3) == pytest.approx(1 / math.sqrt(4 * np.pi))
    assert sph_harm(1, 0, 0.0, 0.0) == pytest.approx(math.sqrt(3 / (4 * np.pi)))


def test_sph_harm_conjugation():
    th, ph = 0.8, 2.1
    for l in range(4):
        for m in range(0, l + 1):
            lhs = sph_harm(l, -m, th, ph)
            rhs = (-1) ** m * np.conj(sph_harm(l, m, th, ph))
            assert lhs == pytest.approx(rhs, abs=1e-13)


def test_sph_harm_orthonormality_quadrature():
    x, w = leggauss(80)
    th = np.arccos(x)
    nphi = 32
    ph = 2 * np.pi * np.arange(nphi) / nphi
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    W = w[:, None] * (2 * np.pi / nphi)
    for (l1, m1), (l2, m2) in [((2, 1), (2, 1)), ((2, 1), (2, -1)), ((3, 2), (1, 0)),
                               ((3, -3), (3, -3)), ((0, 0), (2, 0)), ((1, 1), (1, 1))]:
        val = np.sum(W * np.conj(sph_harm(l1, m1, TH, PH)) * sph_harm(l2, m2, TH, PH))
        expect = 1.0 if (l1, m1) == (l2, m2) else 0.0
        assert abs(val - expect) < 1e-10


def test_sph_harm_domain():
    with pytest.raises(DomainError):
        sph_harm(1, 2, 0.5, 0.5)
