"""Unit system: hbar = c = 1, energies/momenta in eV, lengths in nm.

Conversions hinge on hbar*c = 197.3269804 eV nm.  A length sigma given in nm
enters natural-unit formulas as sigma/hbar_c (units 1/eV); times are measured
as c*t in nm and convert the same way.
"""

from dataclasses import dataclass
from math import pi, sqrt


@dataclass(frozen=True)
class Units:
    hbar_c: float = 197.3269804          # eV nm
    electron_mass: float = 510998.95     # eV
    alpha: float = 7.2973525693e-3
    amu: float = 931.49410242e6          # eV
    barn_per_nm2: float = 1e10


UNITS = Units()

HBARC = UNITS.hbar_c
ELECTRON_MASS = UNITS.electron_mass
ALPHA = UNITS.alpha
AMU = UNITS.amu
BARN_PER_NM2 = UNITS.barn_per_nm2

# electron charge, Heaviside-Lorentz natural units (e < 0, e^2 = 4 pi alpha)
E_CHARGE = -sqrt(4 * pi * ALPHA)


def nm_to_inv_ev(length_nm):
    """Length (or c*t) in nm -> natural units of 1/eV."""
    return length_nm / HBARC


def inv_ev_to_nm(length_inv_ev):
    return length_inv_ev * HBARC
