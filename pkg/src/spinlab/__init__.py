"""Spherical mixed p-spin glasses: Hamiltonians, Gibbs sampling, Parisi and
TAP variational formulas, ground states and pure-state structure."""

from .mixture import Mixture, MixtureError
from .hamiltonian import Disorder, sample_disorder, energy, gradient
from .geometry import BandSpec
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "Mixture", "MixtureError", "Disorder", "sample_disorder", "energy", "gradient",
    "BandSpec", "BACKEND", "__version__",
]
