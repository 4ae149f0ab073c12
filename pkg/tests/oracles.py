"""Independent reference computations used by the test-suite.

Nothing here calls the Volterra machinery: special functions come from
mpmath, solutions of the radial equation from scipy's DOP853 integrator.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

mp.mp.dps = 30


def calI_ref(m, z) -> complex:
    return complex(mp.sqrt(mp.pi * z / 2) * mp.besseli(m, z))


def calK_ref(m, z) -> complex:
    return complex(mp.sqrt(2 * z / mp.pi) * mp.besselk(m, z))


def _rhs(m: complex, k: complex, Q):
    c = m * m - 0.25

    def f(t, Y):
        x = math.exp(t)
        q = complex(Q(x)) if not Q.is_zero else 0.0
        # Y = (y, x y'), evolved in t = ln x
        return [Y[1], Y[1] + (c + x * x * (q + k * k)) * Y[0]]

    return f


def integrate_radial(m, k, Q, x0: float, y0: complex, dy0: complex, xs) -> np.ndarray:
    """Solve y'' = ((m^2 - 1/4)/x^2 + Q + k^2) y from (x0, y0, y0') to the points xs.

    The integration runs in t = ln x and is restarted at every breakpoint of Q.
    All xs must lie on one side of x0."""
    m, k = complex(m), complex(k)
    xs = np.asarray(xs, dtype=float)
    target = xs.max() if xs.max() > x0 else xs.min()
    lo, hi = sorted((x0, target))
    cuts = [b for b in Q.breakpoints() if lo < b < hi]
    edges = [x0] + (sorted(cuts) if target > x0 else sorted(cuts, reverse=True)) + [target]
    state = np.array([y0, x0 * dy0], dtype=complex)
    out = np.empty(xs.size, dtype=complex)
    rhs = _rhs(m, k, Q)
    for a, b in zip(edges[:-1], edges[1:]):
        sol = solve_ivp(rhs, (math.log(a), math.log(b)), state, method="DOP853",
                        rtol=1e-12, atol=1e-14 * abs(state[0]) + 1e-300, dense_output=True)
        if not sol.success:
            raise RuntimeError(sol.message)
        inside = (xs >= min(a, b)) & (xs <= max(a, b))
        if np.any(inside):
            out[inside] = sol.sol(np.log(xs[inside]))[0]
        state = sol.y[:, -1]
    return out


def square_well_bound_states(V0: float, kmax: float | None = None) -> list[float]:
    """Roots k > 0 of sqrt(V0 - k^2) cot sqrt(V0 - k^2) = -k, by bracketed bisection."""
    kmax = math.sqrt(V0) if kmax is None else kmax

    def g(k):
        s = math.sqrt(V0 - k * k)
        return s * math.cos(s) + k * math.sin(s)

    ks = np.linspace(1e-9, kmax - 1e-12, 20001)
    vals = [g(k) for k in ks]
    roots = []
    for a, b, fa, fb in zip(ks[:-1], ks[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0:
            roots.append(brentq(g, a, b, xtol=1e-15))
    return roots


def square_well_scattering_length(V0: float) -> float:
    """m = 1/2 scattering length of the unit well from the zero-energy ODE (no closed form used)."""
    from besselkit.model import SquareWell  # only the potential's pointwise values

    Q = SquareWell(V0, 0.0, 1.0)
    x0 = 1e-8
    xs = np.array([2.0, 3.0])
    y = integrate_radial(0.5, 0.0, Q, x0, x0, 1.0, xs)
    # beyond the well y = A (x - a): a from two samples
    slope = (y[1] - y[0]) / (xs[1] - xs[0])
    return float((xs[0] - y[0] / slope).real)
