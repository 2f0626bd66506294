"""Wave-packet models: massive HG x LG packets, paraxial photon packets,
spectra, emittances, and the two-packet luminosity.

Public signatures use eV for momenta, nm for lengths, and c*t in nm for times;
internal helpers work in natural units (lengths/times in 1/eV).

The longitudinal factor is the spreading Hermite-gaussian, the transverse one
the Laguerre-gaussian vortex with orbital index l; both are exact solutions of
the free Schroedinger equation, so momentum-space densities are static and the
position-space widths follow sigma(t) = sigma(0) sqrt(1 + t^2/t_d^2).
"""

import csv
from dataclasses import dataclass
from functools import lru_cache
from math import pi, sqrt

import numpy as np

from .errors import DomainError
from .specfun import assoc_laguerre, hermite, leggauss, log_fact
from .units import HBARC, UNITS, Units, nm_to_inv_ev

__all__ = [
    "Units", "UNITS", "MassivePacketSpec", "PhotonPacketSpec", "SpectrumTable",
    "CollisionGeometry", "massive_packet_momentum", "massive_packet_position",
    "photon_packet_momentum", "photon_spectrum", "mean_photon_energy",
    "emittance", "rms_width_at", "luminosity",
]


@dataclass(frozen=True)
class MassivePacketSpec:
    """HG x LG packet of a massive particle (the atomic center of mass)."""

    k: int = 0                 # longitudinal HG index
    n: int = 0                 # radial LG index
    l: int = 0                 # orbital angular momentum
    sigma_perp: float = 20.0   # nm, focal transverse width
    sigma_z: float = 20.0      # nm, focal longitudinal width
    mean_pz: float = 0.0       # eV
    mass: float = 938272088.16 # eV

    def __post_init__(self):
        if self.sigma_perp <= 0 or self.sigma_z <= 0:
            raise DomainError("packet widths must be positive")
        if self.mass <= 0:
            raise DomainError("mass must be positive")
        if self.k < 0 or self.n < 0:
            raise DomainError("packet indices must be non-negative")

    @property
    def quality_factor(self):
        return 2 * self.n + abs(self.l) + 1


@dataclass(frozen=True)
class PhotonPacketSpec:
    """Paraxial photon HG x LG packet with fixed helicity."""

    k_gamma: int = 0
    n_gamma: int = 0
    l_gamma: int = 0
    helicity: int = 1
    sigma_perp: float = 1000.0   # nm
    sigma_z: float = 10000.0     # nm
    mean_kz: float = 10.2        # eV

    def __post_init__(self):
        if self.sigma_perp <= 0 or self.sigma_z <= 0:
            raise DomainError("packet widths must be positive")
        if abs(self.helicity) != 1:
            raise DomainError("helicity must be +1 or -1")
        if self.k_gamma < 0 or self.n_gamma < 0:
            raise DomainError("packet indices must be non-negative")

    @property
    def quality_factor(self):
        return 2 * self.n_gamma + abs(self.l_gamma) + 1


@dataclass(frozen=True)
class CollisionGeometry:
    """Transverse offset between the photon propagation axis and the CM."""

    b: float = 0.0        # nm
    phi_b: float = 0.0    # rad

    def __post_init__(self):
        if self.b < 0:
            raise DomainError("impact parameter must be >= 0")


@dataclass
class SpectrumTable:
    energies: np.ndarray   # eV
    density: np.ndarray    # dimensionless, unit max

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["energy_ev", "density"])
            for e, d in zip(self.energies, self.density):
                w.writerow([repr(float(e)), repr(float(d))])


# ---------------------------------------------------------------------------
# momentum-space profiles (natural units)
# ---------------------------------------------------------------------------

def hg_momentum_profile(k, sigma_nat, dp):
    """1-D HG momentum profile at focus; int dp/(2pi) |.|^2 = 1."""
    lognorm = 0.5 * (np.log(2 * pi * sigma_nat) - k * np.log(2.0) - log_fact(k) - 0.5 * np.log(pi))
    x = sigma_nat * np.asarray(dp)
    return np.exp(lognorm) * hermite(k, x) * np.exp(-0.5 * x * x)


def lg_momentum_profile(n, l, sigma_nat, p_perp):
    """Transverse LG momentum profile at focus, azimuthal phase excluded;
    int d2p/(2pi)^2 |.|^2 = 1."""
    la = abs(l)
    p = np.asarray(p_perp)
    x = (sigma_nat * p) ** 2
    lognorm = 0.5 * (np.log(4 * pi) + log_fact(n) - log_fact(n + la))
    amp = np.exp(lognorm) * sigma_nat ** (la + 1) * p**la * np.exp(-0.5 * x) * assoc_laguerre(n, la, x)
    return ((-1.0) ** n) * ((-1j) ** la) * amp


def massive_packet_momentum(spec, p, t_nm=0.0):
    """Momentum-space wave function psi(P, t) (eV^-3/2); p is (..., 3) in eV."""
    p = np.asarray(p, dtype=float)
    sz = nm_to_inv_ev(spec.sigma_z)
    sp = nm_to_inv_ev(spec.sigma_perp)
    t = nm_to_inv_ev(t_nm)
    pz = p[..., 2]
    pperp = np.hypot(p[..., 0], p[..., 1])
    phi = np.arctan2(p[..., 1], p[..., 0])
    val = (hg_momentum_profile(spec.k, sz, pz - spec.mean_pz)
           * lg_momentum_profile(spec.n, spec.l, sp, pperp)
           * np.exp(1j * spec.l * phi))
    if t != 0.0:
        p2 = np.sum(p * p, axis=-1)
        val = val * np.exp(-1j * t * p2 / (2 * spec.mass))
    return val


def _sigma_t(sigma0, t, t_d):
    return sigma0 * np.sqrt(1.0 + (t / t_d) ** 2)


def massive_packet_position(spec, r_nm, t_nm=0.0):
    """Position-space wave function psi(r, t) (nm^-3/2); r is (..., 3) in nm."""
    r = np.asarray(r_nm, dtype=float) / HBARC
    t = nm_to_inv_ev(t_nm)
    sz0 = nm_to_inv_ev(spec.sigma_z)
    sp0 = nm_to_inv_ev(spec.sigma_perp)
    td_z = spec.mass * sz0**2
    td_p = spec.mass * sp0**2
    sz = _sigma_t(sz0, t, td_z)
    sp = _sigma_t(sp0, t, td_p)
    z = r[..., 2]
    rho = np.hypot(r[..., 0], r[..., 1])
    phi = np.arctan2(r[..., 1], r[..., 0])

    u = spec.mean_pz / spec.mass
    zz = (z - u * t) / sz
    k = spec.k
    lognorm_z = -0.5 * (k * np.log(2.0) + log_fact(k) + 0.5 * np.log(pi) + np.log(sz))
    psi_z = ((1j) ** k * np.exp(lognorm_z) * hermite(k, zz)
             * np.exp(-1j * t * spec.mean_pz**2 / (2 * spec.mass) + 1j * spec.mean_pz * z
                      - 1j * (k + 0.5) * np.arctan(t / td_z)
                      - 0.5 * zz**2 * (1 - 1j * t / td_z)))

    n, la = spec.n, abs(spec.l)
    x = (rho / sp) ** 2
    lognorm_p = 0.5 * (log_fact(n) - log_fact(n + la) - np.log(pi))
    psi_p = (np.exp(lognorm_p) * rho**la / sp ** (la + 1) * assoc_laguerre(n, la, x)
             * np.exp(1j * spec.l * phi - 1j * (2 * n + la + 1) * np.arctan(t / td_p)
                      - 0.5 * x * (1 - 1j * t / td_p)))
    return (psi_z * psi_p) * HBARC ** (-1.5)


def photon_packet_momentum(spec, kvec):
    """Photon momentum-space wave function (eV^-3/2), azimuthal phase (l+helicity)."""
    k = np.asarray(kvec, dtype=float)
    sz = nm_to_inv_ev(spec.sigma_z)
    sp = nm_to_inv_ev(spec.sigma_perp)
    kz = k[..., 2]
    kperp = np.hypot(k[..., 0], k[..., 1])
    phi = np.arctan2(k[..., 1], k[..., 0])
    return (hg_momentum_profile(spec.k_gamma, sz, kz - spec.mean_kz)
            * lg_momentum_profile(spec.n_gamma, spec.l_gamma, sp, kperp)
            * np.exp(1j * (spec.l_gamma + spec.helicity) * phi))


def photon_momentum_factors(spec, kz, kperp):
    """(longitudinal, transverse) profile factors without the azimuthal phase."""
    sz = nm_to_inv_ev(spec.sigma_z)
    sp = nm_to_inv_ev(spec.sigma_perp)
    return (hg_momentum_profile(spec.k_gamma, sz, np.asarray(kz) - spec.mean_kz),
            lg_momentum_profile(spec.n_gamma, spec.l_gamma, sp, kperp))


def mean_photon_energy(spec):
    """<omega> = sqrt(<k_z>^2 + (2 n + |l| + 1)/sigma_perp^2), in eV."""
    inv_sp = 1.0 / nm_to_inv_ev(spec.sigma_perp)
    return sqrt(spec.mean_kz**2 + spec.quality_factor * inv_sp**2)


def mean_kz_for_energy(spec, omega):
    """Longitudinal momentum giving mean_photon_energy == omega."""
    inv_sp = 1.0 / nm_to_inv_ev(spec.sigma_perp)
    arg = omega**2 - spec.quality_factor * inv_sp**2
    if arg <= 0:
        raise DomainError(f"requested mean energy {omega} eV below the transverse floor")
    return sqrt(arg)


def photon_spectrum(spec, grid):
    """Angle-averaged energy density rho(omega) on the grid, unit maximum."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DomainError("spectrum grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("spectrum grid must be strictly increasing")
    dens = np.empty_like(grid)
    # nodes packed toward x = cos(theta) = 1 (paraxial support) plus a coarse tail
    x1, w1 = leggauss(220)
    x2, w2 = leggauss(60)
    for i, om in enumerate(grid):
        edge = 1.0 - min(2.0, (14.0 / (om * nm_to_inv_ev(spec.sigma_perp) + 1e-12)) ** 2)
        edge = max(-0.99, edge)
        xs = np.concatenate([edge + 0.5 * (1 - edge) * (x1 + 1), -1 + 0.5 * (edge + 1) * (x2 + 1)])
        ws = np.concatenate([0.5 * (1 - edge) * w1, 0.5 * (edge + 1) * w2])
        kz = om * xs
        kp = om * np.sqrt(np.maximum(0.0, 1 - xs**2))
        fz, fp = photon_momentum_factors(spec, kz, kp)
        dens[i] = om**2 * np.sum(ws * np.abs(fz) ** 2 * np.abs(fp) ** 2)
    peak = dens.max()
    if peak <= 0:
        raise DomainError("spectrum vanished on the requested grid")
    return SpectrumTable(grid, dens / peak)


def emittance(spec):
    """Quantum emittances (nm): eps_z = lc (k + 1/2), eps_perp = lc sqrt(Q^2 - 1)."""
    lc = HBARC / spec.mass
    q = spec.quality_factor
    return lc * (spec.k + 0.5), lc * sqrt(q * q - 1.0)


def rms_width_at(spec, z_mean_nm):
    """Transverse rms width after drifting to <z> = z_mean (van Cittert-Zernike)."""
    if z_mean_nm < 0:
        raise DomainError("z_mean must be >= 0")
    if spec.mean_pz <= 0:
        raise DomainError("rms_width_at needs a propagation axis (mean_pz > 0)")
    q = spec.quality_factor
    rho0 = spec.sigma_perp * sqrt(q)
    z_r = spec.mean_pz * nm_to_inv_ev(spec.sigma_perp) ** 2 * HBARC  # nm
    if z_mean_nm <= z_r:
        return rho0 * sqrt(1.0 + (z_mean_nm / z_r) ** 2)
    lam_db_over_2pi = HBARC / spec.mean_pz  # nm
    return (z_mean_nm / rho0) * lam_db_over_2pi * q


# ---------------------------------------------------------------------------
# luminosity
# ---------------------------------------------------------------------------

def _lg_density(n, l, sigma0, t_d, rho, t):
    """|LG(rho, t)|^2 for unit norm in the plane (natural units)."""
    s = _sigma_t(sigma0, t, t_d)
    la = abs(l)
    x = (rho / s) ** 2
    lognorm = log_fact(n) - log_fact(n + la) - np.log(pi)
    return np.exp(lognorm) * x**la / s**2 * assoc_laguerre(n, la, x) ** 2 * np.exp(-x)


def _hg_density(k, sigma0, t_d, dz, t):
    """|HG(z, t)|^2 for unit norm on the line (natural units); t_d=None freezes it."""
    s = sigma0 if t_d is None else _sigma_t(sigma0, t, t_d)
    zz = dz / s
    lognorm = -(k * np.log(2.0) + log_fact(k) + 0.5 * np.log(pi))
    return np.exp(lognorm) / s * hermite(k, zz) ** 2 * np.exp(-zz**2)


def _simpson_doubling(f_vec, a, b, rel_tol, n0=64, max_doublings=12):
    """Composite Simpson on [a, b] with interval doubling until rel_tol.

    f_vec evaluates on an array of abscissas.  Simple and deterministic;
    the integrands here are smooth localized bumps.
    """
    n = n0
    prev = None
    for _ in range(max_doublings):
        xs = np.linspace(a, b, n + 1)
        fx = f_vec(xs)
        h = (b - a) / n
        val = h / 3.0 * (fx[0] + fx[-1] + 4 * np.sum(fx[1:-1:2]) + 2 * np.sum(fx[2:-2:2]))
        floor = 1e-14 * (b - a) * np.max(np.abs(fx))  # machine-noise floor
        if prev is not None and abs(val - prev) <= max(rel_tol * abs(val), floor, 1e-300):
            return val
        prev = val
        n *= 2
    from .errors import QuadratureError
    raise QuadratureError(f"simpson doubling did not reach {rel_tol:g}",
                          achieved=abs(val - prev) / (abs(val) + 1e-300))


@lru_cache(maxsize=8)
def _hermgauss(n):
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w * np.exp(x * x)  # weights for plain dx integration of gaussians


def luminosity(cm, ph, geometry, rel_tol=1e-6, gh_nodes=48):
    """Spacetime overlap luminosity L (per nm^2), Eq.-level definition:
    |v_rel| * int d3r dt  |psi_cm(r,t)|^2 |psi_ph(r - b, t)|^2.

    CM at focus at t = 0 centered at the origin, moving with <v> = mean_pz/mass;
    photon center crosses the origin at t = 0 moving with c = 1, its transverse
    profile spreading with effective mass <k_z> (paraxial factorization).
    Transverse plane: tensor Gauss-Hermite matched to the combined gaussian;
    (z, t): vectorized adaptive-doubling Simpson to rel_tol.
    """
    if cm.sigma_perp <= 0 or ph.sigma_perp <= 0:
        raise DomainError("non-positive packet widths")
    s_cm_p = nm_to_inv_ev(cm.sigma_perp)
    s_cm_z = nm_to_inv_ev(cm.sigma_z)
    s_ph_p = nm_to_inv_ev(ph.sigma_perp)
    s_ph_z = nm_to_inv_ev(ph.sigma_z)
    b = nm_to_inv_ev(geometry.b)
    td_cm_p = cm.mass * s_cm_p**2
    td_cm_z = cm.mass * s_cm_z**2
    td_ph_p = ph.mean_kz * s_ph_p**2
    v = cm.mean_pz / cm.mass
    v_rel = abs(v - 1.0)

    xg, wg = _hermgauss(gh_nodes)

    def transverse_overlap(t):
        s1 = _sigma_t(s_cm_p, t, td_cm_p)
        s2 = _sigma_t(s_ph_p, t, td_ph_p)
        # gaussian core exp(-x^2/s1^2 - (x-b)^2/s2^2): complete the square
        inv2 = 1.0 / s1**2 + 1.0 / s2**2
        w = 1.0 / np.sqrt(inv2)
        x0 = (b / s2**2) / inv2
        xs = x0 + w * xg
        ys = w * xg
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        WXY = np.outer(wg, wg)
        rho1 = np.hypot(X, Y)
        rho2 = np.hypot(X - b, Y)
        dens = (_lg_density(cm.n, cm.l, s_cm_p, td_cm_p, rho1, t)
                * _lg_density(ph.n_gamma, ph.l_gamma, s_ph_p, td_ph_p, rho2, t))
        return w * w * np.sum(WXY * dens)

    def longitudinal_overlap(t):
        s1 = _sigma_t(s_cm_z, t, td_cm_z)
        lo = max(v * t - 9 * s1, t - 9 * s_ph_z)
        hi = min(v * t + 9 * s1, t + 9 * s_ph_z)
        if hi <= lo:
            return 0.0
        return _simpson_doubling(
            lambda z: (_hg_density(cm.k, s_cm_z, td_cm_z, z - v * t, t)
                       * _hg_density(ph.k_gamma, s_ph_z, None, z - t, t)),
            lo, hi, rel_tol, n0=64)

    # crossing-time window: both packets localized, moving with relative speed v_rel
    width0 = (9 * (s_cm_z + s_ph_z)) / max(v_rel, 1e-12)
    for _ in range(4):
        s1 = _sigma_t(s_cm_z, width0, td_cm_z)
        width0 = (9 * (s1 + s_ph_z)) / max(v_rel, 1e-12)

    def f_time(ts):
        return np.array([transverse_overlap(t) * longitudinal_overlap(t) for t in ts])

    val = _simpson_doubling(f_time, -width0, width0, rel_tol, n0=128)
    return float(v_rel * val / HBARC**2)
