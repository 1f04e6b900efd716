"""Heralded multi-phonon Fock states from forward Brillouin scattering."""

__version__ = "0.1.0"
