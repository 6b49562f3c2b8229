"""SU(2)-equivariant subproduct systems: construction, fusion rules, Toeplitz relations
and blockwise certificates for the Gysin sequence in K-theory."""

from .report import IdentityReport
from .sequences import IntegerSequencePack, dim_sequence, gamma_limit, mu_sequence
from .sps_core import SubproductSystem, build_system, load_system

__all__ = [
    "IdentityReport",
    "IntegerSequencePack",
    "SubproductSystem",
    "build_system",
    "dim_sequence",
    "gamma_limit",
    "load_system",
    "mu_sequence",
]
