import numpy as np
import pytest

from vortexlab.atom import AtomSpec, BoundState, TransitionSpec
from vortexlab.amplitudes import CollisionConfig, NumericsSpec
from vortexlab.packets import CollisionGeometry, MassivePacketSpec, PhotonPacketSpec, mean_kz_for_energy


@pytest.fixture(scope="session")
def hydrogen():
    return AtomSpec(1, 1.0)


@pytest.fixture(scope="session")
def t_1s2p(hydrogen):
    return TransitionSpec(hydrogen, BoundState(1, 0, 0), BoundState(2, 1, 1))


def make_config(atom, final=BoundState(2, 1, 1), l_gamma=0, helicity=1,
                sigma_cm=20.0, sigma_cm_z=None, sigma_ph=1000.0, sigma_ph_z=10000.0,
                cm_l=0, cm_n=0, cm_k=0, b=0.0, phi_b=0.0, omega=None,
                k_gamma=0, numerics=None, dipole_mode=False, mean_pz=0.0):
    """Collision setup helper; omega=None locks the mean energy to the resonance."""
    tr = TransitionSpec(atom, BoundState(1, 0, 0), final, dipole_mode)
    ph = PhotonPacketSpec(k_gamma, 0, l_gamma, helicity, sigma_ph, sigma_ph_z, 10.0)
    if omega is None:
        gap = tr.energy_gap
        omega = gap - gap**2 / (2 * atom.total_mass)
    ph = PhotonPacketSpec(k_gamma, 0, l_gamma, helicity, sigma_ph, sigma_ph_z,
                          mean_kz_for_energy(ph, omega))
    cm = MassivePacketSpec(cm_k, cm_n, cm_l, sigma_cm,
                           sigma_cm if sigma_cm_z is None else sigma_cm_z,
                           mean_pz, atom.total_mass)
    return CollisionConfig(atom, tr, cm, ph, CollisionGeometry(b, phi_b),
                           numerics or NumericsSpec())


# reduced-order numerics for unit tests (acceptance uses spec-grade settings)
FAST = NumericsSpec(theta_nodes=40, phi_nodes=96, pperp_nodes=32, pz_nodes=32,
                    nphi_f=64, mc_samples=20_000, mc_batch=5_000)
