"""Absorption and resonant scattering of structured photon wave packets by
freely moving hydrogen-like atomic wave packets."""

__version__ = "0.1.0"
