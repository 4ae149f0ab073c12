"""Distinguished solutions of (L + k^2) f = 0 with L = -d^2 + (m^2 - 1/4)/x^2 + Q.

Each builder returns a :class:`SolutionBundle` holding the grid function,
the Neumann report and short notes on the checks that were made.  Builders
share the grid passed to them, so Wronskians of bundles built on one grid can
be taken node by node.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import integrate

from . import specfun as sf
from .errors import (ClassViolation, DegenerateBasis, DomainError, NonContraction)
from .model import PotentialSpec, SpectralPoint, in_class_infinity, in_class_zero, max_class_eps
from .unperturbed import (KernelSpec, Scaled, U0, V0, W0, P0, _pair_for_bisolution, factor_scaled,
                          solution_scaled, v0_prefactor)
from .volterra import (GreenOperator, GridFunction, NeumannReport, Quadrature, RadialGrid,
                       choose_a, default_grid, neumann_solve, operator_norm_estimate)

K0_DIAMOND = 10.0
SLOPE_MARGIN = 0.1


@dataclass(eq=False)
class SolutionBundle:
    """A solution on a grid plus the parameters and checks used to build it."""

    tag: str
    params: dict
    data: GridFunction
    report: Optional[NeumannReport] = None
    notes: list = field(default_factory=list)

    @property
    def grid(self) -> RadialGrid:
        return self.data.grid

    @property
    def a(self) -> Optional[float]:
        return self.params.get("a")

    def plain(self) -> tuple[np.ndarray, np.ndarray]:
        return self.data.plain()

    def to_csv(self, path: Union[str, Path]) -> None:
        export_csv(self.data, path)


Solutionlike = Union[SolutionBundle, GridFunction]


def _gf(f: Solutionlike) -> GridFunction:
    return f.data if isinstance(f, SolutionBundle) else f


def export_csv(f: Solutionlike, path: Union[str, Path]) -> None:
    """Write ``x,re(f),im(f),re(f'),im(f')`` rows."""
    g = _gf(f)
    vals, ders = g.plain()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "re_f", "im_f", "re_df", "im_df"])
        for x, v, d in zip(g.x, vals, ders):
            w.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag)),
                        repr(float(d.real)), repr(float(d.imag))])


# --------------------------------------------------------------------- helpers


def _grid(k, Q: PotentialSpec, grid: Optional[RadialGrid], extra=()) -> RadialGrid:
    if grid is not None:
        return grid
    return default_grid(k, Q, extra_breakpoints=extra)


def _unperturbed(kind: str, m: complex, k: complex, grid: RadialGrid) -> GridFunction:
    return GridFunction.from_scaled(grid, solution_scaled(kind, m, k, grid.nodes))


def _factor(fac: tuple[str, complex], k: complex, grid: RadialGrid) -> GridFunction:
    return GridFunction.from_scaled(grid, factor_scaled(fac, k, grid.nodes))


def _require_zero_class(Q: PotentialSpec, eps: float, log_power: float, what: str) -> None:
    if not in_class_zero(Q, eps, log_power):
        raise ClassViolation(f"{what}: Q is not in the near-0 class (eps={eps:g}, log power {log_power:g})")


def _require_inf_class(Q: PotentialSpec, delta: float, log_power: float, what: str) -> None:
    if not in_class_infinity(Q, delta, log_power):
        raise ClassViolation(f"{what}: Q is not in the near-infinity class (delta={delta:g}, log power {log_power:g})")


def asymptotic_slope(diff: np.ndarray, x: np.ndarray, decades: float = 2.0) -> float:
    """Least-squares slope of log|diff| against log x over the smallest decades."""
    sel = (x <= x[0] * 10.0 ** decades) & (np.abs(diff) > 0)
    if np.count_nonzero(sel) < 3:
        return math.inf
    return float(np.polyfit(np.log(x[sel]), np.log(np.abs(diff[sel])), 1)[0])


def _check_slope(bundle: SolutionBundle, ref: GridFunction, exponent: float, label: str) -> None:
    x = bundle.grid.nodes
    near = x <= x[0] * 100.0
    f, g = bundle.data, ref
    diff = (f.values[near] * np.exp(f.rate * x[near])
            - g.values[near] * np.exp(g.rate * x[near]))
    slope = asymptotic_slope(diff, x[near])
    ok = slope >= exponent - SLOPE_MARGIN
    bundle.params["asymptotic_slope"] = slope
    bundle.params["asymptotics_ok"] = ok
    bundle.notes.append(f"{label}: slope {slope:.3f} vs required {exponent:.3f}")


def _forward(m: complex, k: complex, Q: PotentialSpec, f0: GridFunction, start: int = 0,
             certify: bool = False):
    op = GreenOperator(KernelSpec("Forward", m, k), Quadrature(f0.grid, Q), start=start)
    return neumann_solve(op, f0, certify=certify)


def _backward(m: complex, k: complex, Q: PotentialSpec, f0: GridFunction, certify: bool = False):
    op = GreenOperator(KernelSpec("Backward", m, k), Quadrature(f0.grid, Q))
    return neumann_solve(op, f0, certify=certify)


# ------------------------------------------------------------ principal at 0


def build_u(m, k, Q: PotentialSpec, grid: Optional[RadialGrid] = None,
              certify: bool = True) -> SolutionBundle:
    """Solution principal at 0: u_m = (1 + G_fwd Q)^{-1} u0_m."""
    m = sf._order(m)
    sp = SpectralPoint.of(k)
    if m != 0:
        _require_zero_class(Q, 2.0 * max(-m.real, 0.0), 0.0, "u_m")
    else:
        _require_zero_class(Q, 0.0, 1.0, "u_0")
    grid = _grid(sp.k, Q, grid)
    f0 = _unperturbed(U0, m, sp.k, grid)
    f, rep = _forward(m, sp.k, Q, f0, certify=certify)
    b = SolutionBundle("U", {"m": m, "k": sp.k}, f, rep)
    eps = min(max_class_eps(Q), 2.0) if m != 0 else 0.0
    _check_slope(b, f0, 0.5 + m.real + min(eps, 2.0 * max(-m.real, 0.0)), "u - u0 near 0")
    return b


def build_p0(k, Q: PotentialSpec, grid: Optional[RadialGrid] = None,
              certify: bool = True) -> SolutionBundle:
    """Logarithmic solution at m = 0: p_0 = (1 + G_fwd Q)^{-1} p0_0."""
    sp = SpectralPoint.of(k)
    _require_zero_class(Q, 0.0, 2.0, "p_0")
    grid = _grid(sp.k, Q, grid)
    f0 = _unperturbed(P0, 0.0, sp.k, grid)
    f, rep = _forward(0.0, sp.k, Q, f0, certify=certify)
    b = SolutionBundle("P0", {"m": 0.0, "k": sp.k}, f, rep)
    _check_slope(b, f0, 0.5, "p0 - p0^0 near 0")
    return b


# -------------------------------------------------------------- Jost-type


def build_w(m, k, Q: PotentialSpec, grid: Optional[RadialGrid] = None,
              certify: bool = True) -> SolutionBundle:
    """Jost solution w_m ~ e^{-kx}; w_m = w_{-m}, so the order used is the one with Re m >= 0."""
    m = sf._order(m)
    sp = SpectralPoint.of(k)
    if sp.is_zero:
        raise DomainError("the Jost solution needs k != 0")
    _require_inf_class(Q, 0.0, 0.0, "w_m")
    mm = -m if (m.real < 0 or (m.real == 0 and m.imag < 0)) else m
    grid = _grid(sp.k, Q, grid)
    f0 = _unperturbed(W0, mm, sp.k, grid)
    f, rep = _backward(mm, sp.k, Q, f0, certify=certify)
    b = SolutionBundle("W", {"m": m, "k": sp.k, "order_used": mm}, f, rep)
    x = grid.nodes
    outer = x >= x[-1] / 10.0
    if np.any(outer):
        dv = np.abs(f.values[outer] - f0.values[outer])
        b.params["outer_rel_dev"] = float(np.max(dv))
    return b


def build_v(m, k, Q: PotentialSpec, grid: Optional[RadialGrid] = None,
              certify: bool = True) -> SolutionBundle:
    """v_m = sqrt(pi / 2k) (k/2)^m w_m."""
    m = sf._order(m)
    w = build_w(m, k, Q, grid, certify)
    c = v0_prefactor(m, w.params["k"])
    return SolutionBundle("V", {**w.params, "m": m}, c * w.data, w.report, list(w.notes))


# --------------------------------------------------------------- zero energy


def build_q(m, Q: PotentialSpec, grid: Optional[RadialGrid] = None,
              certify: bool = True) -> SolutionBundle:
    """Zero-energy solution q_{-m} ~ x^{1/2 - m} at infinity (leading coefficient 1)."""
    m = sf._order(m)
    if m == 0:
        _require_inf_class(Q, 1.0, 1.0, "q_0")
    else:
        _require_inf_class(Q, 1.0 + 2.0 * max(m.real, 0.0), 0.0, "q_{-m}")
    grid = _grid(0.0, Q, grid)
    f0 = _factor(("X-", m), 0.0, grid)
    f, rep = _backward(m, 0.0, Q, f0, certify=certify)
    return SolutionBundle("Qzero", {"m": -m, "k": 0.0}, f, rep,
                          ["normalized to leading coefficient 1 at infinity"])


def build_q0ln(Q: PotentialSpec, grid: Optional[RadialGrid] = None,
              certify: bool = True) -> SolutionBundle:
    """q_{0,ln} = (1 + G_bwd Q)^{-1} x^{1/2} ln x at k = 0."""
    _require_inf_class(Q, 1.0, 2.0, "q_0ln")
    grid = _grid(0.0, Q, grid)
    f0 = _unperturbed(P0, 0.0, 0.0, grid)
    f, rep = _backward(0.0, 0.0, Q, f0, certify=certify)
    return SolutionBundle("Q0Ln", {"m": 0.0, "k": 0.0}, f, rep)


# -------------------------------------------------------- compressed solutions


def _snap_a(grid: RadialGrid, a: float) -> float:
    return float(grid.nodes[grid.index_of(a)])


def _continue_past(f: GridFunction, m: complex, k: complex, Q: PotentialSpec, ia: int) -> tuple[GridFunction, NeumannReport]:
    """Continue f from node ia as a solution of the perturbed equation (forward Volterra)."""
    grid = f.grid
    A, B, c = _pair_for_bisolution(m, k)
    Af = _factor(A, k, grid).rescaled(f.rate)
    Bf = _factor(B, k, grid).rescaled(f.rate)
    hv, hd = f.values[ia], f.derivs[ia]
    # Wronskian of scaled values carries exp(2 rate x); it cancels in the ratios below
    wAB = Af.values[ia] * Bf.derivs[ia] - Af.derivs[ia] * Bf.values[ia]
    c_A = (hv * Bf.derivs[ia] - hd * Bf.values[ia]) / wAB
    c_B = (Af.values[ia] * hd - Af.derivs[ia] * hv) / wAB
    h0 = (c_A * Af + c_B * Bf).masked(np.arange(grid.n) >= ia)
    h, rep = _forward(m, k, Q, h0, start=ia)
    return h, rep


def _splice(inner: GridFunction, outer: GridFunction, ia: int) -> GridFunction:
    keep = np.arange(inner.grid.n) <= ia
    o = outer.rescaled(inner.rate)
    return GridFunction(inner.grid, np.where(keep, inner.values, o.values),
                        np.where(keep, inner.derivs, o.derivs), inner.rate)


def _compressed_solve(tag: str, m: complex, k: complex, Q: PotentialSpec, f0: GridFunction,
                      a: Optional[float], weight, label: str) -> tuple[GridFunction, NeumannReport, float, float]:
    grid = f0.grid
    spec = KernelSpec(tag, m, k)
    if a is None:
        a = choose_a(spec, Q, weight=weight, grid=grid)
    a = _snap_a(grid, a)
    spec = KernelSpec(tag, m, k, compressed_to=a)
    est = operator_norm_estimate(spec, Q, grid=grid, weight=weight)
    if est >= 1.0:
        raise NonContraction(f"{label}: operator norm estimate {est:.3f} >= 1 at a = {a:g}")
    op = GreenOperator(spec, Quadrature(grid, Q))
    f, rep = neumann_solve(op, f0, check_contraction=False, certify=False)
    ia = grid.index_of(a)
    if ia < grid.n - 1:
        ext, _ = _continue_past(f, m if tag != "Diamond" else 0.0, k, Q, ia)
        f = _splice(f, ext, ia)
    return f, rep, a, est


def build_u_bowtie(m, k, Q: PotentialSpec, a: Optional[float] = None,
                   grid: Optional[RadialGrid] = None) -> SolutionBundle:
    """Non-principal solution (1 + G_bowtie^(a) Q)^{-1} u0_{-m}, continued past a."""
    m = sf._order(m)
    sp = SpectralPoint.of(k)
    if m.real < 0 or abs(m) <= sf.DELTA_INT:
        raise DomainError("u_bowtie needs Re m >= 0 and m away from 0")
    _require_zero_class(Q, 0.0, 0.0, "u_bowtie")
    grid = _grid(sp.k, Q, grid, [a] if a else ())
    f0 = _unperturbed(U0, -m, sp.k, grid)
    weight = ("mu_eta", 0.5 - m.real)
    f, rep, a, est = _compressed_solve("Bowtie", m, sp.k, Q, f0, a, weight, "u_bowtie")
    return SolutionBundle("UBowtie", {"m": m, "k": sp.k, "a": a, "norm_estimate": est}, f, rep)


def build_p_diamond(k, Q: PotentialSpec, a: Optional[float] = None,
                    grid: Optional[RadialGrid] = None) -> SolutionBundle:
    """(1 + G_diamond^(a) Q)^{-1} p0_0 at m = 0, continued past a; Bowtie kernel for |k| > 10."""
    sp = SpectralPoint.of(k)
    _require_zero_class(Q, 0.0, 1.0, "p_diamond")
    grid = _grid(sp.k, Q, grid, [a] if a else ())
    f0 = _unperturbed(P0, 0.0, sp.k, grid)
    tag = "Diamond" if abs(sp.k) <= K0_DIAMOND else "Bowtie"
    weight = ("x_log", 1.0)
    f, rep, a, est = _compressed_solve(tag, 0.0, sp.k, Q, f0, a, weight, "p_diamond")
    b = SolutionBundle("PDiamond", {"m": 0.0, "k": sp.k, "a": a, "kernel": tag, "norm_estimate": est}, f, rep)
    _check_slope(b, f0, 0.5, "p_diamond - p0 near 0")
    return b


# ---------------------------------------------------- partial sums and u^[n]


def _u0n_terms(n: int, m: complex, k: complex, Q: PotentialSpec, grid: RadialGrid,
               a: float = 1.0) -> list[GridFunction]:
    if n < 0:
        raise DomainError("n must be a non-negative integer")
    a = _snap_a(grid, a)
    op = GreenOperator(KernelSpec("Bowtie", m, k, compressed_to=a), Quadrature(grid, Q))
    terms = [_unperturbed(U0, -m, k, grid)]
    for _ in range(n):
        terms.append(-1.0 * op.apply(terms[-1]))
    return terms


def build_u0n(n: int, m, k, Q: PotentialSpec, grid: Optional[RadialGrid] = None,
              a: float = 1.0) -> GridFunction:
    """Partial sum sum_{j<=n} (-G_bowtie^(a) Q)^j u0_{-m} (a = 1 by default); no inversion."""
    m = sf._order(m)
    sp = SpectralPoint.of(k)
    grid = _grid(sp.k, Q, grid, [a])
    terms = _u0n_terms(int(n), m, sp.k, Q, grid, a)
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


def build_u0n_standard(n: int, m, Q: PotentialSpec, grid: Optional[RadialGrid] = None) -> GridFunction:
    """The k-independent reference u^{0[n]}_{-m}(x, 0)."""
    return build_u0n(n, m, 0.0, Q, grid)


def build_un(n: int, m, k, Q: PotentialSpec, grid: Optional[RadialGrid] = None) -> SolutionBundle:
    """u^[n]_{-m} = u^{0[n]}_{-m} - (1 + G_fwd Q)^{-1} G_fwd Q (-G_bowtie^(1) Q)^n u0_{-m}."""
    m = sf._order(m)
    sp = SpectralPoint.of(k)
    n = int(n)
    if m == 0 or m.real < 0:
        raise DomainError("u^[n] needs Re m >= 0 and m != 0")
    eps = 2.0 * m.real / (n + 1)
    _require_zero_class(Q, eps, 0.0, "u^[n]")
    grid = _grid(sp.k, Q, grid, [1.0])
    terms = _u0n_terms(n, m, sp.k, Q, grid)
    u0n = terms[0]
    for t in terms[1:]:
        u0n = u0n + t
    quad = Quadrature(grid, Q)
    fwd = GreenOperator(KernelSpec("Forward", m, sp.k), quad)
    s = fwd.apply(terms[-1])
    r, rep = neumann_solve(fwd, s, certify=False) if np.any(s.values) else (s, None)
    f = u0n - r
    # the compressed partial sum jumps at a = 1; continue the solution from there
    ia = grid.index_of(1.0)
    if ia < grid.n - 1:
        ext, _ = _continue_past(f, m, sp.k, Q, ia)
        f = _splice(f, ext, ia)
    b = SolutionBundle("UN", {"m": m, "k": sp.k, "n": n, "a": float(grid.nodes[ia])}, f, rep)
    _check_slope(b, u0n, 0.5 + m.real, "u^[n] - u^{0[n]} near 0")
    return b


# ----------------------------------------------------------------- Wronskians


def _wronskian_array(f: Solutionlike, g: Solutionlike) -> np.ndarray:
    F, G = _gf(f), _gf(g)
    if F.grid is not G.grid and not np.array_equal(F.grid.nodes, G.grid.nodes):
        raise DomainError("Wronskian needs functions on a shared grid")
    w = F.values * G.derivs - F.derivs * G.values
    rate = F.rate + G.rate
    return w * np.exp(rate * F.x) if rate != 0 else w


def wronskian_of(f: Solutionlike, g: Solutionlike, x: Optional[float] = None, average: int = 1) -> complex:
    """f g' - f' g at the node nearest x (default: geometric middle), optionally averaged."""
    grid = _gf(f).grid
    w = _wronskian_array(f, g)
    i = grid.index_of(x) if x is not None else grid.index_of(math.sqrt(grid.x_min * grid.x_max))
    lo = max(0, i - average // 2)
    hi = min(grid.n, lo + average)
    return complex(np.mean(w[lo:hi]))


def wronskian_constancy(f: Solutionlike, g: Solutionlike) -> tuple[complex, float]:
    """(mean, max deviation) of the Wronskian over the middle half of the grid."""
    w = _wronskian_array(f, g)
    n = w.size
    mid = w[n // 4: 3 * n // 4]
    mean = complex(np.mean(mid))
    return mean, float(np.max(np.abs(mid - mean)))


def extract_coefficient(f: Solutionlike, basis1: Solutionlike, basis2: Solutionlike,
                        x: Optional[float] = None) -> tuple[complex, complex]:
    """(c1, c2) with f = c1 basis1 + c2 basis2, from Wronskians."""
    w12 = wronskian_of(basis1, basis2, x, average=5)
    grid = _gf(basis1).grid
    i = grid.index_of(x) if x is not None else grid.index_of(math.sqrt(grid.x_min * grid.x_max))
    b1 = _gf(basis1).plain()
    b2 = _gf(basis2).plain()
    size = abs(b1[0][i] * b2[1][i]) + abs(b1[1][i] * b2[0][i])
    if abs(w12) <= 1e-12 * size:
        raise DegenerateBasis("basis functions are linearly dependent")
    c1 = wronskian_of(f, basis2, x, average=5) / w12
    c2 = wronskian_of(basis1, f, x, average=5) / w12
    return c1, c2


def _derivative_weights(x: np.ndarray, width: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Centered nonuniform stencils and weights for d/dx at interior nodes.

    Returns (index array of shape (n, width), weights of the same shape); row i
    differentiates at node i + width // 2."""
    half = width // 2
    centers = np.arange(half, x.size - half)
    idx = centers[:, None] + np.arange(-half, half + 1)[None, :]
    h = (x[centers + 1] - x[centers - 1])[:, None]
    t = (x[idx] - x[centers][:, None]) / h
    V = t[:, None, :] ** np.arange(width)[None, :, None]  # V[c, power, node]
    rhs = np.zeros((centers.size, width, 1))
    rhs[:, 1, 0] = 1.0
    w = np.linalg.solve(V, rhs)[..., 0] / h
    return idx, w


RESIDUAL_STENCIL = 9


def ode_residual(f: Solutionlike, m, k, Q: PotentialSpec, rhs: Optional[np.ndarray] = None) -> np.ndarray:
    """(-f'' + ((m^2 - 1/4)/x^2 + Q + k^2) f) - rhs at interior nodes away from breakpoints.

    f'' is a 9-point (eighth-order) difference of the stored derivatives; near
    0 the two terms cancel at the scale |f|/x^2, so lower orders leave a
    visible truncation floor there.  Entries whose stencil would cross a
    segment end are set to 0."""
    F = _gf(f)
    x = F.x
    vals, ders = F.plain()
    m = sf._order(m)
    k = SpectralPoint.of(k).k
    half = RESIDUAL_STENCIL // 2
    idx, w = _derivative_weights(x, RESIDUAL_STENCIL)
    d2 = np.zeros_like(vals)
    d2[half:-half] = np.sum(w * ders[idx], axis=1)
    res = -d2 + ((m * m - 0.25) / x ** 2 + Q(x) + k * k) * vals
    if rhs is not None:
        res = res - rhs
    res[:half] = res[-half:] = 0.0
    for b in F.grid.seg_bounds:
        res[max(b - half, 0):b + half + 1] = 0.0
    return res


def relative_residual(f: Solutionlike, m, k, Q: PotentialSpec, rhs: np.ndarray) -> float:
    """||(L + k^2) f - rhs|| / ||rhs|| in L^2(]0, inf[, dx), trapezoid rule on the grid."""
    F = _gf(f)
    res = ode_residual(F, m, k, Q, rhs)
    res = np.where(np.isfinite(res), res, 0.0)
    num = integrate.trapezoid(np.abs(res) ** 2, F.x)
    den = integrate.trapezoid(np.abs(rhs) ** 2, F.x)
    return float(math.sqrt(num / den))
