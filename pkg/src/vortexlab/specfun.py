"""Self-contained special-function kernels.

Everything here is pure and reentrant.  Conventions:

* spherical harmonics carry the Condon-Shortley phase;
* wigner_d is the standard small-d matrix d^l_{m,m'}(theta) = <lm|exp(-i theta Jy)|lm'>,
  so D^l_{mm'}(phi, theta, 0) = exp(-i m phi) d^l_{mm'}(theta);
* J_{-m} = (-1)^m J_m and I_{-m} = I_m extend Bessel orders to negative integers.

Index caps (HERMITE_CAP etc.) exist to stop silent overflow, not as accuracy
limits; wigner_d is accurate for l <= 10 which covers every state used here.
"""

from functools import lru_cache
from math import lgamma, pi, sqrt

import numpy as np

from .errors import CapabilityError, DomainError

HERMITE_CAP = 60
LAGUERRE_CAP = 60
WIGNER_CAP = 10

# log k! for k = 0..170 (ratio stability in Wigner sums and LG norms)
LOG_FACT = np.array([lgamma(k + 1.0) for k in range(171)])


def log_fact(k):
    return LOG_FACT[k]


@lru_cache(maxsize=64)
def leggauss(n):
    """Cached Gauss-Legendre nodes/weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def hermite(k, x):
    """Physicists' Hermite polynomial H_k(x) by the three-term recurrence."""
    if k < 0 or k != int(k):
        raise DomainError("hermite order must be a non-negative integer")
    if k > HERMITE_CAP:
        raise CapabilityError(f"hermite order {k} exceeds cap {HERMITE_CAP}")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if k == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = 2.0 * x
    for j in range(1, k):
        h, h_prev = 2.0 * x * h - 2.0 * j * h_prev, h
    return h if h.ndim else float(h)


def assoc_laguerre(n, a, x):
    """Generalized Laguerre polynomial L_n^a(x), stable upward recurrence."""
    if n < 0 or n != int(n):
        raise DomainError("laguerre index must be a non-negative integer")
    if n > LAGUERRE_CAP:
        raise CapabilityError(f"laguerre index {n} exceeds cap {LAGUERRE_CAP}")
    if a < -1:
        raise DomainError("laguerre parameter a must be >= -1")
    x = np.asarray(x, dtype=float)
    l_prev = np.ones_like(x)
    if n == 0:
        return l_prev if l_prev.ndim else float(l_prev)
    l = 1.0 + a - x
    for j in range(1, n):
        l, l_prev = ((2 * j + 1 + a - x) * l - (j + a) * l_prev) / (j + 1.0), l
    return l if l.ndim else float(l)


def wigner_d(l, m, mp, theta):
    """Small Wigner matrix element d^l_{m,mp}(theta) via the factorial sum."""
    if l < 0 or l != int(l):
        raise DomainError("l must be a non-negative integer")
    if abs(m) > l or abs(mp) > l:
        raise DomainError(f"|m|,|mp| must not exceed l={l}")
    if l > WIGNER_CAP:
        raise CapabilityError(f"wigner_d not validated beyond l={WIGNER_CAP}")
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    pref = 0.5 * (LOG_FACT[l + m] + LOG_FACT[l - m] + LOG_FACT[l + mp] + LOG_FACT[l - mp])
    total = np.zeros_like(theta)
    for k in range(max(0, mp - m), min(l - m, l + mp) + 1):
        lden = (LOG_FACT[l + mp - k] + LOG_FACT[k] + LOG_FACT[m - mp + k] + LOG_FACT[l - m - k])
        coeff = (-1.0) ** (m - mp + k) * np.exp(pref - lden)
        # powers of cos, sin of theta/2; exponents are >= 0 in this k range
        total = total + coeff * c ** (2 * l + mp - m - 2 * k) * s ** (m - mp + 2 * k)
    return total if total.ndim else float(total)


def _legendre_pmm(m, x):
    """P_m^m(x) with Condon-Shortley phase: (-1)^m (2m-1)!! (1-x^2)^{m/2}."""
    p = np.ones_like(x)
    if m > 0:
        somx2 = np.sqrt(np.maximum(0.0, (1.0 - x) * (1.0 + x)))
        fact = 1.0
        for _ in range(m):
            p = -p * fact * somx2
            fact += 2.0
    return p


def sph_harm(l, m, theta, phi):
    """Spherical harmonic Y_l^m(theta, phi), Condon-Shortley phase."""
    if l < 0 or l != int(l):
        raise DomainError("l must be a non-negative integer")
    if abs(m) > l:
        raise DomainError(f"|m|={abs(m)} exceeds l={l}")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    ma = abs(m)
    x = np.cos(theta)
    pmm = _legendre_pmm(ma, x)
    if l == ma:
        plm = pmm
    else:
        pmmp1 = x * (2 * ma + 1) * pmm
        if l == ma + 1:
            plm = pmmp1
        else:
            for ll in range(ma + 2, l + 1):
                pmm, pmmp1 = pmmp1, (x * (2 * ll - 1) * pmmp1 - (ll + ma - 1) * pmm) / (ll - ma)
            plm = pmmp1
    norm = sqrt((2 * l + 1) / (4 * pi)) * np.exp(0.5 * (LOG_FACT[l - ma] - LOG_FACT[l + ma]))
    y = norm * plm * np.exp(1j * ma * phi)
    if m < 0:
        y = (-1.0) ** ma * np.conj(y)
    return y if np.ndim(y) else complex(y)


def sph_harm_dtheta(l, m, theta, phi):
    """d/dtheta of Y_l^m, from m*cot(theta)*Y_l^m + sqrt((l-m)(l+m+1)) e^{-i phi} Y_l^{m+1}.

    Safe away from the poles (quadrature grids here never hit sin(theta)=0).
    """
    theta = np.asarray(theta, dtype=float)
    y = sph_harm(l, m, theta, phi)
    out = m * (np.cos(theta) / np.sin(theta)) * y
    if m + 1 <= l:
        out = out + sqrt((l - m) * (l + m + 1)) * np.exp(-1j * np.asarray(phi)) * sph_harm(l, m + 1, theta, phi)
    return out


def bessel_j(m, x):
    """Bessel J_m(x) for integer m, x >= 0; series at small x, Miller recurrence else."""
    m = int(m)
    if not np.isfinite(x):
        raise DomainError("bessel_j requires finite x")
    if x < 0:
        raise DomainError("bessel_j implemented for x >= 0")
    sign = (-1.0) ** m if m < 0 else 1.0
    ma = abs(m)
    if x == 0.0:
        return sign if ma == 0 else 0.0
    if x <= 12.0:
        return sign * _bessel_j_series(ma, x)
    return sign * _bessel_j_miller(ma, x)


def _bessel_j_series(m, x):
    term = np.exp(m * np.log(x / 2) - LOG_FACT[m])
    total = term
    k = 0
    while True:
        k += 1
        term *= -(x * x / 4) / (k * (k + m))
        total += term
        if abs(term) < 1e-18 * max(abs(total), 1e-280) or k > 200:
            return total


def _bessel_j_miller(m, x):
    n_start = m + int(1.5 * x) + 40
    if n_start % 2:
        n_start += 1
    jp, j = 0.0, 1e-300
    norm = 0.0
    jm = 0.0
    for n in range(n_start, 0, -1):
        jm = (2.0 * n / x) * j - jp
        jp, j = j, jm
        if n - 1 == m:
            out = j
        if (n - 1) % 2 == 0:
            norm += 2.0 * j
        if abs(j) > 1e250:  # rescale to avoid overflow
            jp *= 1e-250
            j *= 1e-250
            norm *= 1e-250
            if n - 1 <= m:
                out *= 1e-250
    norm -= j  # J_0 counted twice in the even sum
    if m == 0:
        out = j
    return out / norm


def bessel_i(m, x):
    """Modified Bessel I_m(x) for integer m, x >= 0, by direct series (no cancellation)."""
    m = abs(int(m))  # I_{-m} = I_m
    if not np.isfinite(x):
        raise DomainError("bessel_i requires finite x")
    if x < 0:
        raise DomainError("bessel_i implemented for x >= 0")
    if x == 0.0:
        return 1.0 if m == 0 else 0.0
    term = np.exp(m * np.log(x / 2) - LOG_FACT[m])
    total = term
    k = 0
    while True:
        k += 1
        term *= (x * x / 4) / (k * (k + m))
        total += term
        if term < 1e-18 * total or k > 400:
            return total
