import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vortexlab.atom import AtomSpec, BoundState, TransitionSpec
from vortexlab.kinematics import (absorption_delta_residual, absorption_resonant_omega,
                                  scattering_delta_residual, scattering_resonant_omega,
                                  triangle_decompose)

ATOM = AtomSpec(1, 1.0)
T12 = TransitionSpec(ATOM, BoundState(1, 0, 0), BoundState(2, 1, 1))
T11 = TransitionSpec(ATOM, BoundState(1, 0, 0), BoundState(1, 0, 0))


def test_triangle_right():
    tri = triangle_decompose(3.0, 4.0, 5.0)
    assert tri.valid
    assert tri.area == pytest.approx(6.0, rel=1e-12)
    assert tri.alpha == pytest.approx(np.arccos(0.6), rel=1e-12)
    assert tri.alpha + tri.beta + tri.gamma == pytest.approx(np.pi, abs=1e-12)


def test_triangle_invalid():
    assert not triangle_decompose(1.0, 1.0, 3.0).valid


@given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0.1, 50))
@settings(max_examples=200, deadline=None)
def test_triangle_area_consistency(a, b, c):
    tri = triangle_decompose(a, b, c)
    if not tri.valid:
        return
    assert tri.alpha + tri.beta + tri.gamma == pytest.approx(np.pi, abs=1e-10)
    s1 = 0.5 * c * a * np.sin(tri.alpha)
    s2 = 0.5 * b * a * np.sin(tri.beta)
    s3 = 0.5 * c * b * np.sin(tri.gamma)
    assert s1 == pytest.approx(s2, rel=1e-9, abs=1e-12)
    assert s1 == pytest.approx(s3, rel=1e-9, abs=1e-12)


def test_absorption_root_at_rest():
    mt = ATOM.total_mass
    deps = T12.energy_gap
    root = absorption_resonant_omega(T12, 0.0, 1.0)
    # root of omega^2 + 2 mt omega - 2 mt deps = 0 in cancellation-free form
    expect = 2 * mt * deps / (np.sqrt(mt**2 + 2 * mt * deps) + mt)
    assert root.omega == pytest.approx(expect, rel=1e-14)
    assert root.omega == pytest.approx(deps - deps**2 / (2 * mt), rel=1e-9)
    assert root.jacobian == pytest.approx(1.0, abs=1e-7)


def test_absorption_no_elastic_channel():
    # delta_eps -> 0 gives omega -> 0: no root with positive frequency
    assert absorption_resonant_omega(T11, 0.0, 0.5) is None


def test_absorption_residual_and_monotonicity():
    rng = np.random.default_rng(5)
    prev = -np.inf
    for cos_t in np.linspace(-1, 1, 21):
        root = absorption_resonant_omega(T12, 40.0, cos_t)
        res = absorption_delta_residual(T12, root.omega, 40.0, cos_t)
        assert abs(res) < 1e-10
        assert root.omega > prev
        prev = root.omega
    for _ in range(50):
        pf = rng.uniform(0, 200)
        ct = rng.uniform(-1, 1)
        root = absorption_resonant_omega(T12, pf, ct)
        assert abs(absorption_delta_residual(T12, root.omega, pf, ct)) < 1e-10


def test_scattering_forward_elastic_fixed_point():
    kf = 10.2
    root = scattering_resonant_omega(T11, kf, 30.0, 1.0, 1.0, 1.0)
    assert root.omega == pytest.approx(kf, rel=1e-12)
    assert abs(scattering_delta_residual(T11, root.omega, kf, 30.0, 1.0, 1.0, 1.0)) < 1e-10


def test_scattering_backscatter_bisection_oracle():
    # Rayleigh backscatter: solve energy conservation by bisection and compare
    kf, pf = 10.2, 21.0
    c1, c2, c3 = -1.0, 0.3, -0.3
    root = scattering_resonant_omega(T11, kf, pf, c1, c2, c3)

    def energy_residual(om):
        return scattering_delta_residual(T11, om, kf, pf, c1, c2, c3)

    lo, hi = 1e-6, 100.0
    assert energy_residual(lo) < 0 < energy_residual(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if energy_residual(mid) < 0:
            lo = mid
        else:
            hi = mid
    assert root.omega == pytest.approx(0.5 * (lo + hi), abs=1e-10)


def test_scattering_jacobian_positive_random():
    rng = np.random.default_rng(11)
    count = 0
    for _ in range(10_000):
        ki_hat = rng.normal(size=3)
        ki_hat /= np.linalg.norm(ki_hat)
        kf_vec = rng.normal(size=3) * 10
        pf_vec = rng.normal(size=3) * 40
        kf = np.linalg.norm(kf_vec)
        pf = np.linalg.norm(pf_vec)
        c1 = ki_hat @ kf_vec / kf
        c2 = ki_hat @ pf_vec / pf
        c3 = kf_vec @ pf_vec / (kf * pf)
        root = scattering_resonant_omega(T12, kf, pf, c1, c2, c3)
        if root is not None:
            count += 1
            assert root.jacobian > 0
            assert abs(scattering_delta_residual(T12, root.omega, kf, pf, c1, c2, c3)) < 1e-9
    assert count > 5000  # most samples are admissible


def test_cylindrical_delta_decomposition_integrates():
    """The two-configuration triangle expansion reproduces a direct 2-D convolution."""
    pf = np.array([6.0, 0.0])
    pf_mag = np.hypot(*pf)

    def f_test(pi_vec, k_vec):
        return (np.exp(-0.5 * np.sum((pi_vec - np.array([2.0, 1.0])) ** 2) / 9.0)
                * np.exp(-0.5 * np.sum((k_vec - np.array([1.0, -0.5])) ** 2) / 4.0))

    # direct: integral d2Pi f(Pi, Pf - Pi)
    n = 220
    xs = np.linspace(-18, 24, n)
    direct = 0.0
    dx = xs[1] - xs[0]
    for x in xs:
        for y in xs:
            direct += f_test(np.array([x, y]), pf - np.array([x, y]))
    direct *= dx * dx

    # decomposition: radial magnitudes with the 1/(2 Delta) weight, two configs
    xg, wg = np.polynomial.legendre.leggauss(260)
    pi_mag = 0.5 * 30 * (xg + 1)
    wpi = 0.5 * 30 * wg
    total = 0.0
    for a, wa in zip(pi_mag, wpi):
        k_lo, k_hi = abs(pf_mag - a), pf_mag + a
        # endpoint substitution k = mid - half cos(v)
        vv = 0.5 * np.pi * (xg + 1)
        wv = 0.5 * np.pi * wg
        kk = 0.5 * (k_hi + k_lo) - 0.5 * (k_hi - k_lo) * np.cos(vv)
        for k, w_v, v in zip(kk, wv, vv):
            tri = triangle_decompose(a, k, pf_mag)
            if not tri.valid or tri.area <= 0:
                continue
            jac = 0.5 * (k_hi - k_lo) * np.sin(v) * w_v
            for sign in (+1, -1):
                phi_i = -sign * tri.alpha          # phi_f = 0
                phi_k = +sign * tri.gamma
                pi_vec = a * np.array([np.cos(phi_i), np.sin(phi_i)])
                k_vec = k * np.array([np.cos(phi_k), np.sin(phi_k)])
                total += wa * jac * a * k * f_test(pi_vec, k_vec) / (2 * tri.area)
    assert total == pytest.approx(direct, rel=1e-3)
