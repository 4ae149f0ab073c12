"""Perturbed Bessel operators -d^2 + (m^2 - 1/4)/x^2 + Q on the half-line.

Modules
-------
specfun        complex-order Gamma, digamma, F_m and the 1d Bessel pair I_m, K_m
model          potentials Q, integrability classes, k-dependent weights
unperturbed    closed-form solutions and Green kernels for Q = 0
volterra       radial grids, panel quadrature and the Neumann-series solver
solutions      distinguished solutions (u, p_0, w, v, q, compressed, u^[n])
jost_spectral  Jost function, its zeros, perturbed Green kernels and resolvents
boundary       boundary functionals at 0, realizations, scattering length
cli            command-line front end
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import BesselKitError  # noqa: E402
from .model import (CoulombCutoff, ExpDecay, PowerLaw, SpectralPoint, SquareWell, Tabulated,  # noqa: E402
                    Zero)
from .specfun import calI, calK, gamma  # noqa: E402
from .solutions import (build_p0, build_q, build_u, build_u_bowtie, build_un, build_v,  # noqa: E402
                        build_w)
from .jost_spectral import find_jost_zeros, jost, resolvent_apply  # noqa: E402
from .boundary import boundary_basis, domain_test, scattering_length, wronskian_at_zero  # noqa: E402

__all__ = [
    "BesselKitError", "CoulombCutoff", "ExpDecay", "PowerLaw", "SpectralPoint", "SquareWell",
    "Tabulated", "Zero", "calI", "calK", "gamma", "build_p0", "build_q", "build_u",
    "build_u_bowtie", "build_un", "build_v", "build_w", "find_jost_zeros", "jost",
    "resolvent_apply", "boundary_basis", "domain_test", "scattering_length", "wronskian_at_zero",
]
