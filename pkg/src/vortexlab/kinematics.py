"""Delta-function machinery: resonance roots and the transverse-plane triangle.

The energy delta of each process is resolved analytically for the photon
frequency; forbidden kinematics is a value-level signal (None), not an
exception, so sampling loops can count rejections cheaply.
"""

from dataclasses import dataclass
from math import pi

import numpy as np

from .atom import bound_energy


@dataclass(frozen=True)
class TriangleGeometry:
    valid: bool
    area: float          # eV^2
    alpha: float         # angle opposite k_perp   (between P_f and P_i)
    beta: float          # angle opposite P_f_perp (between P_i and k)
    gamma: float         # angle opposite P_i_perp (between k and P_f)


@dataclass(frozen=True)
class ResonanceRoot:
    omega: float         # eV
    jacobian: float      # |dE/d omega| weight, dimensionless


def triangle_decompose(p_i_perp, k_perp, p_f_perp):
    """Triangle with legs (P_i_perp, k_perp, P_f_perp); invalid if inequalities fail."""
    a, b, c = float(p_i_perp), float(k_perp), float(p_f_perp)
    if min(a, b, c) < 0:
        raise ValueError("transverse momenta must be non-negative")
    if not (c < a + b and a < b + c and b < c + a):
        return TriangleGeometry(False, 0.0, 0.0, 0.0, 0.0)
    alpha = float(np.arccos(np.clip((c * c + a * a - b * b) / (2 * c * a), -1, 1)))
    beta = float(np.arccos(np.clip((a * a + b * b - c * c) / (2 * a * b), -1, 1)))
    gamma = float(np.arccos(np.clip((c * c + b * b - a * a) / (2 * b * c), -1, 1)))
    area = 0.5 * c * a * np.sin(alpha)
    return TriangleGeometry(True, float(area), alpha, beta, gamma)


def absorption_omega_arrays(total_mass, delta_eps, pf_cos):
    """Vectorized positive root of the absorption energy delta.

    pf_cos = |P_f| cos(Theta); returns (omega, jacobian) with nan where no
    positive root exists.
    """
    pf_cos = np.asarray(pf_cos, dtype=float)
    b = total_mass - pf_cos
    c = 2.0 * total_mass * delta_eps
    disc = b * b + c
    bad = disc < 0
    root = np.sqrt(np.where(bad, 0.0, disc))
    # omega = root - b, written cancellation-free when b > 0
    omega = np.where(b > 0, c / (root + np.abs(b)), root - b)
    bad = bad | (omega <= 0)
    omega = np.where(bad, np.nan, omega)
    jac = np.abs(omega / total_mass - pf_cos / total_mass + 1.0)
    return omega, np.where(bad, np.nan, jac)


def absorption_resonant_omega(t, pf_mag, cos_theta):
    """Photon frequency satisfying energy conservation for absorption.

    Theta is the angle between P_f and k.  Returns None when kinematically
    forbidden (no positive root).
    """
    if not -1.0 <= cos_theta <= 1.0:
        raise ValueError("cos_theta must lie in [-1, 1]")
    omega, jac = absorption_omega_arrays(t.atom.total_mass, t.energy_gap, pf_mag * cos_theta)
    if np.isnan(omega):
        return None
    return ResonanceRoot(float(omega), float(jac))


def scattering_omega_arrays(total_mass, delta_eps, kf_mag, pf_mag, cos_t1, cos_t2, cos_t3):
    """Vectorized root of the scattering energy delta (initial photon frequency).

    Theta1 = angle(k_i, k_f), Theta2 = angle(k_i, P_f), Theta3 = angle(k_f, P_f);
    momentum conservation P_i = P_f + k_f - k_i is implied.
    """
    kf = np.asarray(kf_mag, dtype=float)
    s = np.asarray(pf_mag) * np.asarray(cos_t2) + kf * np.asarray(cos_t1)
    b = total_mass - s
    c = (2.0 * total_mass * (delta_eps + kf)
         - 2.0 * kf * np.asarray(pf_mag) * np.asarray(cos_t3) - kf**2)
    disc = b * b + c
    bad = disc < 0
    root = np.sqrt(np.where(bad, 0.0, disc))
    omega = np.where(b > 0, c / (root + np.abs(b)), root - b)
    bad = bad | (omega <= 0)
    omega = np.where(bad, np.nan, omega)
    jac = np.abs(omega / total_mass - s / total_mass + 1.0)
    return omega, np.where(bad, np.nan, jac)


def scattering_resonant_omega(t, kf_mag, pf_mag, cos_t1, cos_t2, cos_t3):
    """Initial photon frequency for the scattering delta; None when forbidden."""
    for c in (cos_t1, cos_t2, cos_t3):
        if not -1.0 <= c <= 1.0:
            raise ValueError("direction cosines must lie in [-1, 1]")
    omega, jac = scattering_omega_arrays(
        t.atom.total_mass, t.energy_gap, kf_mag, pf_mag, cos_t1, cos_t2, cos_t3)
    if np.isnan(omega):
        return None
    return ResonanceRoot(float(omega), float(jac))


def absorption_delta_residual(t, omega, pf_mag, cos_theta):
    """Exact energy-conservation residual for a candidate omega (test hook).

    Written in the cancellation-free form omega - c/(sqrt(b^2+c) + b).
    """
    mt = t.atom.total_mass
    b = mt - pf_mag * cos_theta
    c = 2 * mt * t.energy_gap
    root = np.sqrt(b * b + c)
    return omega - (c / (root + b) if b > 0 else root - b)


def scattering_delta_residual(t, omega_i, kf_mag, pf_mag, cos_t1, cos_t2, cos_t3):
    mt = t.atom.total_mass
    s = pf_mag * cos_t2 + kf_mag * cos_t1
    b = mt - s
    c = (2 * mt * (t.energy_gap + kf_mag)
         - 2 * kf_mag * pf_mag * cos_t3 - kf_mag**2)
    disc = b * b + c
    if disc < 0:
        return np.nan
    root = np.sqrt(disc)
    return omega_i - (c / (root + b) if b > 0 else root - b)
