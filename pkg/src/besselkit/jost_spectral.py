"""Jost function, zeros of the Jost function and perturbed Green kernels."""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np

from . import specfun as sf
from .errors import (ContourThroughZero, CountMismatch, DomainError, MethodUnavailable, NoConvergence,
                     ResolventPole)
from .model import PotentialSpec, SpectralPoint
from .boundary import BoundaryFunctional, wronskian_at_zero
from .solutions import (SolutionBundle, build_p0, build_q, build_u, build_u0n_standard, build_un, build_v,
                        wronskian_of)
from .unperturbed import U0, W0, solution_scaled, v0_prefactor
from .volterra import N_DEFAULT, GridFunction, Quadrature, RadialGrid, default_grid

METHODS = ("WronskianMatch", "OverlapFormula", "ZeroEnergy")
CONTOUR_SAMPLES = 512
CONTOUR_GRID_N = 512
NEWTON_TOL = 1e-8


@dataclass(frozen=True)
class JostResult:
    value: complex
    method: str
    matching_x: Optional[float] = None
    cross_check_dev: float = math.nan
    alt_value: Optional[complex] = None


def jost_grid(k, Q: PotentialSpec, n: int = N_DEFAULT) -> RadialGrid:
    """Grid for Jost computations; ends at the support of Q when it is compact."""
    return default_grid(k, Q, n=n, truncate_to_support=True)


def _compact(Q: PotentialSpec, grid: RadialGrid) -> bool:
    return Q.support_end <= grid.x_max * (1 + 1e-12)


def _unperturbed_gf(kind: str, m: complex, k: complex, grid: RadialGrid) -> GridFunction:
    return GridFunction.from_scaled(grid, solution_scaled(kind, m, k, grid.nodes))


def _jost_wronskian(m: complex, k: complex, Q: PotentialSpec, grid: RadialGrid) -> tuple[complex, float]:
    u = build_u(m, k, Q, grid, certify=False)
    if _compact(Q, grid):
        # beyond the support v_m is the unperturbed v0_m; match at the last node
        mm = -m if m.real < 0 else m
        v0 = complex(v0_prefactor(m, k)) * _unperturbed_gf(W0, mm, k, grid)
        i = grid.n - 1
        return wronskian_of(v0, u, grid.nodes[i]), float(grid.nodes[i])
    v = build_v(m, k, Q, grid, certify=False)
    xm = math.sqrt(grid.x_min * grid.x_max)
    return wronskian_of(v, u, xm, average=5), xm


def _jost_overlap(m: complex, k: complex, Q: PotentialSpec, grid: RadialGrid) -> complex:
    """1 + int u0_m Q v_m dy."""
    v = build_v(m, k, Q, grid, certify=False)
    u0 = _unperturbed_gf(U0, m, k, grid)
    quad = Quadrature(grid, Q)
    g = u0.values * v.data.values
    beta = u0.rate + v.data.rate
    if beta != 0.0:
        g = g * np.exp(beta * grid.nodes)
    total = quad.lower(g, 0.0, 0)[-1]
    return complex(1.0 + total)


def _jost_zero_energy(m: complex, Q: PotentialSpec, grid: RadialGrid) -> complex:
    if m.real <= 0:
        raise MethodUnavailable("the zero-energy formula needs Re m > 0")
    q = build_q(m, Q, grid, certify=False)
    u = build_u(m, 0.0, Q, grid, certify=False)
    return complex(0.5 * sf.gamma(m) * wronskian_of(q, u, None, average=5))


def jost(m, k, Q: PotentialSpec, method: str = "WronskianMatch", grid: Optional[RadialGrid] = None,
         n: int = N_DEFAULT, cross_check: bool = True) -> JostResult:
    """The Jost function W(v_m, u_m) at k by the chosen method."""
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}")
    m = sf._order(m)
    sp = SpectralPoint.of(k)
    if method == "ZeroEnergy":
        if not sp.is_zero:
            raise MethodUnavailable("ZeroEnergy applies at k = 0 only")
        grid = grid or jost_grid(0.0, Q, n)
        return JostResult(_jost_zero_energy(m, Q, grid), method)
    if sp.is_zero:
        raise MethodUnavailable(f"{method} needs k != 0")
    k = sp.k
    if Q.is_zero:
        return JostResult(1.0 + 0j, method, None, 0.0, 1.0 + 0j)
    grid = grid or jost_grid(k, Q, n)
    if method == "WronskianMatch":
        val, xm = _jost_wronskian(m, k, Q, grid)
        alt = _jost_overlap(m, k, Q, grid) if cross_check else None
    else:
        val, xm = _jost_overlap(m, k, Q, grid), None
        alt = _jost_wronskian(m, k, Q, grid)[0] if cross_check else None
    dev = abs(val - alt) if alt is not None else math.nan
    return JostResult(val, method, xm, dev, alt)


def jost_value(m, k, Q: PotentialSpec, n: int = N_DEFAULT) -> complex:
    """Jost function by Wronskian matching, without the cross-check."""
    return jost(m, k, Q, "WronskianMatch", n=n, cross_check=False).value


# ------------------------------------------------------------------ zeros


def _rectangle(region) -> tuple[float, float, float, float]:
    re0, re1, im0, im1 = (float(v) for v in region)
    if not (0 < re0 < re1 and im0 < im1):
        raise DomainError("region must be a rectangle strictly inside Re k > 0")
    return re0, re1, im0, im1


def _perimeter(rect, n: int) -> np.ndarray:
    re0, re1, im0, im1 = rect
    corners = [complex(re0, im0), complex(re1, im0), complex(re1, im1), complex(re0, im1)]
    lengths = [re1 - re0, im1 - im0, re1 - re0, im1 - im0]
    total = sum(lengths)
    pts = []
    for c0, c1, L in zip(corners, corners[1:] + corners[:1], lengths):
        cnt = max(4, int(round(n * L / total)))
        t = np.arange(cnt) / cnt
        pts.append(c0 + (c1 - c0) * t)
    return np.concatenate(pts)


@dataclass
class _Contour:
    ks: np.ndarray
    ws: np.ndarray
    winding: float = 0.0
    dlog: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _trace(f, rect, n: int, max_points: int = 8192) -> _Contour:
    ks = list(_perimeter(rect, n))
    ws = [f(k) for k in ks]
    while True:
        kk = np.array(ks + ks[:1])
        ww = np.array(ws + ws[:1])
        dphi = np.angle(ww[1:] / ww[:-1])
        bad = np.nonzero(np.abs(dphi) > 0.4)[0]
        if bad.size == 0 or len(ks) >= max_points:
            break
        new_k, new_w = [], []
        refine = set(bad.tolist())
        for j in range(len(ks)):
            new_k.append(ks[j])
            new_w.append(ws[j])
            if j in refine:
                km = 0.5 * (kk[j] + kk[j + 1])
                new_k.append(km)
                new_w.append(f(km))
        ks, ws = new_k, new_w
    kk = np.array(ks + ks[:1])
    ww = np.array(ws + ws[:1])
    dlog = np.log(np.abs(ww[1:] / ww[:-1])) + 1j * np.angle(ww[1:] / ww[:-1])
    return _Contour(kk, ww, float(np.sum(dlog.imag) / (2 * math.pi)), dlog)


def _initial_guesses(c: _Contour, count: int) -> np.ndarray:
    """Roots from contour moments s_p = (1/2 pi i) sum k^p dlog W."""
    kmid = 0.5 * (c.ks[1:] + c.ks[:-1])
    s = [complex(np.sum(kmid ** p * c.dlog) / (2j * math.pi)) for p in range(1, count + 1)]
    # Newton identities: e_0 = 1, p e_p = sum_{i=1}^p (-1)^{i-1} e_{p-i} s_i
    e = [1.0 + 0j]
    for p in range(1, count + 1):
        acc = sum((-1) ** (i - 1) * e[p - i] * s[i - 1] for i in range(1, p + 1))
        e.append(acc / p)
    coeffs = [(-1) ** p * e[p] for p in range(count + 1)]
    return np.roots(coeffs)


def _newton(f, k0: complex, tol: float = NEWTON_TOL, maxit: int = 40) -> tuple[complex, complex]:
    k = complex(k0)
    w = f(k)
    for _ in range(maxit):
        h = 1e-6 * max(1.0, abs(k))
        dw = (f(k + h) - f(k - h)) / (2 * h)
        if dw == 0:
            break
        step = w / dw
        k = k - step
        if k.real <= 0:
            k = complex(1e-3, k.imag)
        w = f(k)
        if abs(w) <= tol and abs(step) <= 1e-12 * max(1.0, abs(k)):
            return k, w
        if abs(w) <= tol * 1e-2:
            return k, w
    if abs(w) <= tol:
        return k, w
    raise NoConvergence(f"Newton did not converge near k = {k0}")


def find_jost_zeros(m, Q: PotentialSpec, region, samples: int = CONTOUR_SAMPLES,
                    contour_n: int = CONTOUR_GRID_N, n: int = N_DEFAULT) -> list[tuple[complex, int]]:
    """Zeros of the Jost function inside a rectangle in Re k > 0, with multiplicities."""
    rect = _rectangle(region)
    if Q.is_zero:
        return []
    m = sf._order(m)

    def coarse(k):
        return jost_value(m, k, Q, n=contour_n)

    def fine(k):
        return jost_value(m, k, Q, n=n)

    for attempt in range(4):
        c = _trace(coarse, rect, samples)
        scale = float(np.median(np.abs(c.ws)))
        if np.min(np.abs(c.ws)) < 1e-6 * scale or abs(c.winding - round(c.winding)) > 0.01:
            if attempt == 3:
                raise ContourThroughZero("contour passes too close to a zero of the Jost function")
            re0, re1, im0, im1 = rect
            d = 0.013 * (attempt + 1)
            rect = (re0 * (1 + d), re1 * (1 - d / 2), im0 - d * (im1 - im0), im1 + d * (im1 - im0))
            continue
        break
    count = int(round(c.winding))
    if count <= 0:
        return []
    guesses = _initial_guesses(c, count)
    roots = []
    for g in guesses:
        k, _ = _newton(fine, g)
        roots.append(k)
    found: list[list] = []
    for k in roots:
        for entry in found:
            if abs(entry[0] - k) <= 1e-6 * max(1.0, abs(k)):
                entry[1] += 1
                break
        else:
            found.append([k, 1])
    re0, re1, im0, im1 = rect
    inside = [(k, mult) for k, mult in found if re0 <= k.real <= re1 and im0 <= k.imag <= im1]
    if sum(mult for _, mult in inside) != count:
        raise CountMismatch(f"winding number {count} but {len(inside)} zeros refined inside the region")
    return sorted(((complex(k), mult) for k, mult in inside), key=lambda t: (t[0].real, t[0].imag))


# ---------------------------------------------------------- perturbed kernels


@dataclass(frozen=True)
class PerturbedKernelSpec:
    """realization: 'Pure', 'MixedKappa', 'MixedNu' or 'MixedN'."""

    realization: str
    m: complex
    k: complex
    kappa: Optional[complex] = None
    nu: Optional[complex] = None
    n: int = 0

    def __post_init__(self):
        if self.realization not in ("Pure", "MixedKappa", "MixedNu", "MixedN"):
            raise DomainError(f"unknown realization {self.realization!r}")
        object.__setattr__(self, "m", sf._order(self.m))
        sp = SpectralPoint.of(self.k)
        object.__setattr__(self, "k", sp.k)
        if self.realization != "Pure" and sp.is_zero:
            raise DomainError("mixed realizations need k != 0")
        if self.realization == "MixedNu" and self.m != 0:
            raise DomainError("MixedNu requires m = 0")
        if self.realization in ("MixedKappa", "MixedN") and self.kappa is None:
            raise DomainError(f"{self.realization} needs kappa")
        if self.realization == "MixedNu" and self.nu is None:
            raise DomainError("MixedNu needs nu")
        if self.realization == "MixedN" and not self.m.real < 0:
            raise DomainError("MixedN is meant for Re m < 0")


@dataclass(eq=False)
class PerturbedKernel:
    """K(x,y) = h(min(x,y)) v(max(x,y)) / W(v, h)."""

    spec: PerturbedKernelSpec
    h: GridFunction
    v: GridFunction
    denominator: complex

    @property
    def grid(self) -> RadialGrid:
        return self.h.grid

    def __call__(self, x, y):
        xa, ya = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        lo = np.minimum(xa, ya).ravel()
        hi = np.maximum(xa, ya).ravel()
        hv, _ = self.h.at(lo)
        vv, _ = self.v.at(hi)
        out = (hv * vv / self.denominator).reshape(xa.shape)
        return complex(out) if out.ndim == 0 else out


def _boundary_solution(spec: PerturbedKernelSpec, Q: PotentialSpec, grid: RadialGrid) -> GridFunction:
    m, k = spec.m, spec.k
    if spec.realization == "Pure":
        return build_u(m, k, Q, grid).data
    if spec.realization == "MixedKappa":
        kap = complex(spec.kappa)
        if m == 0:
            return build_u(0.0, k, Q, grid).data
        if math.isinf(abs(kap)):
            return build_u(-m, k, Q, grid).data
        c = kap * sf.gamma(1.0 - m) / sf.gamma(1.0 + m)
        return build_u(m, k, Q, grid).data + c * build_u(-m, k, Q, grid).data
    if spec.realization == "MixedNu":
        return complex(spec.nu) * build_u(0.0, k, Q, grid).data + build_p0(k, Q, grid).data
    c = complex(spec.kappa) * sf.gamma(1.0 - m) / sf.gamma(1.0 + m)
    un = build_un(spec.n, -m, k, Q, grid).data
    um = build_u(-m, k, Q, grid).data
    # u^[n](., k) uses the k-dependent compressed kernel, which shifts its boundary
    # value by a multiple of u_{-m}; undo the shift so the condition is the k = 0 one
    ref = BoundaryFunctional.solution("u^0[n]", lambda g: build_u0n_standard(spec.n, -m, Q, g))
    lam = -wronskian_at_zero(ref, un)[0] / wronskian_at_zero(ref, um)[0]
    return un + (c + lam) * um


def perturbed_kernel(spec: PerturbedKernelSpec, Q: PotentialSpec, grid: Optional[RadialGrid] = None) -> PerturbedKernel:
    """Assemble the kernel from the boundary solution at 0 and the Jost solution."""
    if spec.k == 0:
        raise MethodUnavailable("perturbed kernels are assembled for k != 0")
    grid = grid or default_grid(spec.k, Q)
    h = _boundary_solution(spec, Q, grid)
    v = build_v(spec.m, spec.k, Q, grid).data
    xm = math.sqrt(grid.x_min * grid.x_max)
    i = grid.index_of(xm)
    hv, hd = h.value_at(i)
    vv, vd = v.value_at(i)
    D = wronskian_of(v, h, xm, average=5)
    if abs(D) <= 1e-12 * (abs(vv * hd) + abs(vd * hv)):
        raise ResolventPole(f"boundary and Jost solutions are dependent at k = {spec.k}")
    return PerturbedKernel(spec, h, v, D)


def eval_perturbed_kernel(spec: PerturbedKernelSpec, Q: PotentialSpec, x, y,
                          grid: Optional[RadialGrid] = None):
    return perturbed_kernel(spec, Q, grid)(x, y)


def resolvent_apply(spec: PerturbedKernelSpec, Q: PotentialSpec, g: GridFunction,
                    kernel: Optional[PerturbedKernel] = None) -> GridFunction:
    """f(x) = int K(x,y) g(y) dy on the grid of g."""
    K = kernel or perturbed_kernel(spec, Q, g.grid)
    grid = g.grid
    if K.grid.n != grid.n or not np.array_equal(K.grid.nodes, grid.nodes):
        raise DomainError("kernel and right-hand side must share a grid")
    quad = Quadrature(grid, _UNIT)
    gs = g.values
    # int_0^x h g dy, carried with factor e^{rate_h x}
    beta_h = K.h.rate + g.rate
    low = quad.lower(K.h.values * gs, beta_h, 0)
    beta_v = K.v.rate + g.rate
    up = quad.upper(K.v.values * gs, beta_v)
    e_low = np.exp((K.v.rate + beta_h) * grid.nodes)
    e_up = np.exp((K.h.rate + beta_v) * grid.nodes)
    vals = (K.v.values * low * e_low + K.h.values * up * e_up) / K.denominator
    ders = (K.v.derivs * low * e_low + K.h.derivs * up * e_up) / K.denominator
    return GridFunction(grid, vals, ders, 0.0)


class _Unit(PotentialSpec):
    def _eval(self, x, side):
        return np.ones_like(x)


_UNIT = _Unit()
