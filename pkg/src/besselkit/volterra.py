"""Radial grids, cumulative quadrature and the Neumann-series engine for (1 + G0 Q) f = f0.

Integrals are assembled panel by panel with 4-point Lagrange (cubic) rules on
the nonuniform grid.  Lower integrals (int_0^x) use causal stencils ending at
the panel's right node; upper integrals (int_x^E) use anti-causal stencils
starting at the panel's left node, so Volterra operators stay Volterra on the
grid.  Breakpoints of Q are grid nodes and no stencil crosses one; Q is taken
as a one-sided limit at segment ends.  The piece [0, x_min] of a lower
integral is added from a local power-law fit of the integrand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Optional, Sequence

import numpy as np

from .errors import (ClassViolation, DomainError, NoAdmissibleA, NonContraction,
                     NonConvergence, OverflowError_, TailError)
from .model import PotentialSpec, SpectralPoint, Zero
from .unperturbed import KernelSpec, Scaled, factor_scaled, separable_terms

X_MIN_DEFAULT = 1e-6
N_DEFAULT = 2048
TOL_TAIL = 1e-10
NEUMANN_CAP = 200
NEUMANN_TOL = 1e-14
_BLOCK_EXP = 300.0
_MAX_EXP = 690.0


# ------------------------------------------------------------------------ grid


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes x_0 < ... < x_{N-1}; ``seg_bounds`` are node indices of segment ends."""

    nodes: np.ndarray
    seg_bounds: tuple[int, ...]

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    @property
    def x_min(self) -> float:
        return float(self.nodes[0])

    @property
    def x_max(self) -> float:
        return float(self.nodes[-1])

    def index_of(self, x: float) -> int:
        return int(np.argmin(np.abs(self.nodes - x)))

    def has_node(self, x: float, rtol: float = 1e-12) -> bool:
        i = self.index_of(x)
        return abs(self.nodes[i] - x) <= rtol * x

    @classmethod
    def build(cls, x_min: float = X_MIN_DEFAULT, x_max: float = 40.0, n: int = N_DEFAULT,
              breakpoints: Sequence[float] = (), h_max: Optional[float] = None) -> "RadialGrid":
        """Geometric nodes on [x_min, 1], milder geometric nodes on [1, x_max]."""
        if not (0 < x_min < x_max):
            raise DomainError("grid requires 0 < x_min < x_max")
        if n < 64:
            raise DomainError("grid needs at least 64 nodes")
        if x_max > 1.0 and x_min < 1.0:
            dec_in = math.log10(1.0 / x_min)
            dec_out = math.log10(x_max)
            # inner section gets the larger share; the outer ratio is milder
            n_out = max(16, int(round(n * dec_out / (dec_in + dec_out) * 1.6)))
            n_out = min(n_out, n // 2)
            n_in = n - n_out
            inner = np.geomspace(x_min, 1.0, n_in)
            outer = np.geomspace(1.0, x_max, n_out + 1)[1:]
            nodes = np.concatenate([inner, outer])
        else:
            nodes = np.geomspace(x_min, x_max, n)
        if h_max is not None:
            gaps = np.diff(nodes)
            cnt = np.maximum(1, np.ceil(gaps / h_max).astype(int))
            if np.any(cnt > 1):
                left = np.repeat(nodes[:-1], cnt)
                step = np.repeat(gaps / cnt, cnt)
                offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt) + 1
                nodes = np.concatenate([nodes[:1], left + step * offs])
        bps = sorted({float(b) for b in breakpoints if x_min < b < x_max})
        for b in bps:
            i = int(np.searchsorted(nodes, b))
            left = nodes[i - 1]
            right = nodes[i] if i < nodes.size else np.inf
            step = right - left
            if abs(b - left) < 0.3 * step and i - 1 > 0:
                nodes[i - 1] = b
            elif abs(right - b) < 0.3 * step and i < nodes.size - 1:
                nodes[i] = b
            else:
                nodes = np.insert(nodes, i, b)
        nodes = np.unique(nodes)
        bounds = [0] + [int(np.argmin(np.abs(nodes - b))) for b in bps] + [nodes.size - 1]
        return cls(nodes, tuple(sorted(set(bounds))))


def default_x_max(k) -> float:
    sp = SpectralPoint.of(k)
    if sp.is_zero:
        return 1e3
    if sp.k.real <= 0:
        return 1e3
    return min(1e3, max(40.0 / sp.k.real, 40.0))


def default_x_min(Q: PotentialSpec) -> float:
    """Left end with x_min^(2 + alpha0) <= X_MIN_DEFAULT, so the part of ]0, x_min[ left
    to the power-law head estimate stays small for strongly singular Q."""
    p = 2.0 + Q.declared_sing_exponent
    if Q.is_zero or p >= 1.0:
        return X_MIN_DEFAULT
    return max(X_MIN_DEFAULT ** (1.0 / max(p, 0.25)), 1e-24)


def default_grid(k, Q: PotentialSpec, n: int = N_DEFAULT, x_min: Optional[float] = None,
                 x_max: Optional[float] = None, extra_breakpoints: Sequence[float] = (),
                 truncate_to_support: bool = False) -> RadialGrid:
    """Grid for spectral parameter k and potential Q.

    With ``truncate_to_support`` the grid ends at the support of Q when it is
    compact (used where solutions beyond the support are unperturbed)."""
    sp = SpectralPoint.of(k)
    if x_min is None:
        x_min = default_x_min(Q)
    if x_max is None:
        x_max = default_x_max(sp)
        if truncate_to_support and math.isfinite(Q.support_end) and Q.support_end > 0:
            x_max = Q.support_end
    h_max = 0.5 / abs(sp.k) if abs(sp.k) > 1.0 else None
    bps = list(Q.breakpoints()) + list(extra_breakpoints)
    if x_min < 1.0 < x_max:
        bps.append(1.0)
    return RadialGrid.build(x_min, x_max, n, bps, h_max)


# ---------------------------------------------------------------- quadrature


def _lagrange_panel_weights(x: np.ndarray, stencils: np.ndarray, left: np.ndarray) -> np.ndarray:
    """Weights of int_{x[left]}^{x[left+1]} for interpolation on the given stencils."""
    a = x[left]
    b = x[left + 1]
    h = b - a
    t = (x[stencils] - a[:, None]) / h[:, None]
    npts = stencils.shape[1]
    V = t[:, None, :] ** np.arange(npts)[None, :, None]  # V[p, power, node]
    mom = 1.0 / (np.arange(npts) + 1.0)
    rhs = np.broadcast_to(mom, (stencils.shape[0], npts))[..., None]
    w = np.linalg.solve(V, rhs)[..., 0]
    return w * h[:, None]


@dataclass(eq=False)
class Quadrature:
    """Panel rules for a grid and the one-sided values of Q at stencil nodes."""

    grid: RadialGrid
    Q: PotentialSpec
    extra_bounds: tuple = ()
    idx_lo: np.ndarray = field(init=False)
    wq_lo: np.ndarray = field(init=False)
    idx_up: np.ndarray = field(init=False)
    wq_up: np.ndarray = field(init=False)
    q_nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        x = self.grid.nodes
        n = x.size
        bounds = tuple(sorted(set(self.grid.seg_bounds) | {int(b) for b in self.extra_bounds if 0 < b < n - 1}))
        self.bounds = bounds
        seg_of_panel = np.searchsorted(np.asarray(bounds[1:]), np.arange(1, n), side="left")
        seg_lo = np.asarray(bounds)[seg_of_panel]
        seg_hi = np.asarray(bounds)[seg_of_panel + 1]
        right = np.arange(1, n)
        left = right - 1
        seglen = seg_hi - seg_lo + 1
        npts = np.minimum(4, seglen)
        q_plus = self.Q(x, side=1)
        q_minus = self.Q(x, side=-1)
        q_mid = self.Q(x, side=0)
        self.q_nodes = q_mid
        results = []
        for causal in (True, False):
            idx = np.zeros((n - 1, 4), dtype=int)
            w = np.zeros((n - 1, 4))
            for p in (2, 3, 4):
                sel = npts == p
                if not np.any(sel):
                    continue
                if causal:
                    start = np.clip(right[sel] - (p - 1), seg_lo[sel], seg_hi[sel] - (p - 1))
                else:
                    start = np.clip(left[sel], seg_lo[sel], seg_hi[sel] - (p - 1))
                st = start[:, None] + np.arange(p)[None, :]
                wp = _lagrange_panel_weights(x, st, left[sel])
                idx[sel, :p] = st
                idx[sel, p:] = st[:, -1:]
                w[sel, :p] = wp
            qs = np.where(idx == seg_lo[:, None], q_plus[idx],
                          np.where(idx == seg_hi[:, None], q_minus[idx], q_mid[idx]))
            results.append((idx, w * qs))
        (self.idx_lo, self.wq_lo), (self.idx_up, self.wq_up) = results
        self._abs_w = np.abs(w)

    @property
    def is_zero(self) -> bool:
        return self.Q.is_zero

    # -- cumulative integrals of exp(-beta (x - y)) g(y) Q(y) ----------------

    def lower(self, g: np.ndarray, beta: float = 0.0, start: int = 0) -> np.ndarray:
        """D_i = int_{x_start}^{x_i} e^{-beta (x_i - y)} g Q dy (+ head on [0, x_0] if start=0)."""
        x = self.grid.nodes
        n = x.size
        idx = self.idx_lo
        panel = self.wq_lo * g[idx]
        if beta != 0.0:
            panel = panel * np.exp(-beta * (x[1:, None] - x[idx]))
        P = panel.sum(axis=1)
        D = np.zeros(n, dtype=complex)
        head = self._head(g) if start == 0 else 0.0
        _linear_recurrence(x, P, beta, start, head, D)
        return D

    def upper(self, g: np.ndarray, beta: float = 0.0, end: Optional[int] = None) -> np.ndarray:
        """U_i = int_{x_i}^{x_end} e^{beta (y - x_i)} g Q dy."""
        x = self.grid.nodes
        n = x.size
        end = n - 1 if end is None else end
        idx = self.idx_up
        panel = self.wq_up * g[idx]
        if beta != 0.0:
            panel = panel * np.exp(beta * (x[idx] - x[:-1, None]))
        P = panel.sum(axis=1)
        # reverse the problem into a lower-type recurrence on mirrored coordinates
        xr = -x[::-1]
        Pr = P[::-1]
        Ur = np.zeros(n, dtype=complex)
        _linear_recurrence(xr, Pr, -beta, n - 1 - end, 0.0, Ur)
        U = Ur[::-1].copy()
        return U

    def _head(self, g: np.ndarray) -> complex:
        x = self.grid.nodes
        h0 = g[0] * self.q_nodes[0]
        h1 = g[1] * self.q_nodes[1]
        if h0 == 0 or h1 == 0:
            return 0.0
        # deep Neumann terms decay like high powers of x; their first nodes are rounding noise
        peak = float(np.max(np.abs(x * g * self.q_nodes)))
        if abs(x[0] * h0) <= 1e-30 * peak and abs(x[1] * h1) <= 1e-30 * peak:
            return 0.0
        s = np.log(h1 / h0) / math.log(x[1] / x[0])
        if s.real <= -1.0 + 1e-6:
            raise ClassViolation("integrand is not integrable at 0 (local exponent "
                                 f"{s.real:.3f} <= -1)")
        return complex(x[0] * h0 / (s + 1.0))

    def tail_estimate(self, g: np.ndarray, beta: float = 0.0) -> float:
        """Rough size of int_{X}^{inf} beyond the grid when Q is not supported inside it."""
        x = self.grid.nodes
        if self.Q.support_end <= x[-1] * (1 + 1e-12):
            return 0.0
        Qend = self.Q(np.array([x[-2], x[-1]]))
        h = np.abs(g[-2:] * Qend)
        if h[1] == 0:
            return 0.0
        if h[0] == 0 or h[1] >= h[0]:
            return math.inf
        rate = math.log(h[0] / h[1]) / (x[-1] - x[-2]) - beta
        if rate <= 0:
            return math.inf
        return float(h[1] / rate)


def _linear_recurrence(x: np.ndarray, P: np.ndarray, beta: float, start: int, D0: complex,
                       D: np.ndarray) -> None:
    """Solve D_i = e^{-beta (x_i - x_{i-1})} D_{i-1} + P_i (P indexed by panel i-1) for i > start."""
    n = x.size
    D[:start] = 0.0
    D[start] = D0
    if start >= n - 1:
        return
    if beta == 0.0:
        D[start + 1:] = D0 + np.cumsum(P[start:])
        return
    s = start
    while s < n - 1:
        lim = x[s] + _BLOCK_EXP / abs(beta)
        e = int(np.searchsorted(x, lim, side="right")) - 1
        e = max(min(e, n - 1), s + 1)
        rel = x[s + 1:e + 1] - x[s]
        acc = np.cumsum(P[s:e] * np.exp(beta * rel))
        D[s + 1:e + 1] = np.exp(-beta * rel) * (D[s] + acc)
        s = e


# -------------------------------------------------------------- grid functions


@dataclass(eq=False)
class GridFunction:
    """Values and derivatives on a grid, scaled: f = values * exp(rate * x)."""

    grid: RadialGrid
    values: np.ndarray
    derivs: np.ndarray
    rate: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.derivs = np.asarray(self.derivs, dtype=complex)
        if self.values.shape != self.grid.nodes.shape or self.derivs.shape != self.grid.nodes.shape:
            raise DomainError("grid function length does not match its grid")

    @classmethod
    def from_scaled(cls, grid: RadialGrid, s: Scaled) -> "GridFunction":
        return cls(grid, s.values, s.derivs, s.rate)

    @classmethod
    def zeros(cls, grid: RadialGrid, rate: float = 0.0) -> "GridFunction":
        z = np.zeros(grid.n, dtype=complex)
        return cls(grid, z, z.copy(), rate)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def plain(self) -> tuple[np.ndarray, np.ndarray]:
        e = np.exp(self.rate * self.x)
        return self.values * e, self.derivs * e

    def rescaled(self, rate: float) -> "GridFunction":
        e = np.exp((self.rate - rate) * self.x)
        return GridFunction(self.grid, self.values * e, self.derivs * e, rate)

    def at(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Plain (value, derivative) at arbitrary points by cubic Hermite interpolation."""
        from scipy.interpolate import CubicHermiteSpline

        xq = np.asarray(x, dtype=float)
        if np.any(xq < self.x[0] * (1 - 1e-12)) or np.any(xq > self.x[-1] * (1 + 1e-12)):
            raise DomainError("evaluation point outside the grid")
        # scaled derivative of values*exp(rate x) is derivs - rate*values
        sv = CubicHermiteSpline(self.x, self.values, self.derivs - self.rate * self.values)
        s = sv(xq)
        e = np.exp(self.rate * xq)
        return s * e, (sv.derivative()(xq) + self.rate * s) * e

    def value_at(self, i: int) -> tuple[complex, complex]:
        e = math.exp(self.rate * self.x[i])
        return complex(self.values[i] * e), complex(self.derivs[i] * e)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        o = other if other.rate == self.rate else other.rescaled(self.rate)
        return GridFunction(self.grid, self.values + o.values, self.derivs + o.derivs, self.rate)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self + (-1.0) * other

    def __rmul__(self, c: complex) -> "GridFunction":
        return GridFunction(self.grid, c * self.values, c * self.derivs, self.rate)

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy(), self.derivs.copy(), self.rate)

    def masked(self, keep: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, np.where(keep, self.values, 0.0),
                            np.where(keep, self.derivs, 0.0), self.rate)


# -------------------------------------------------------------- Green operator


@dataclass(eq=False)
class GreenOperator:
    """The operator f -> G0 Q f on a grid for a kernel spec.

    ``start`` (node index) restricts lower integrals to [x_start, x]; used to
    continue solutions past a compression point.
    """

    spec: KernelSpec
    quad: Quadrature
    start: int = 0
    _factors: dict = field(default_factory=dict, init=False)

    def __post_init__(self):
        self.terms = separable_terms(self.spec)
        self._quad_cache = {}
        x = self.grid.nodes
        for t in self.terms:
            for fac in (t.left, t.right):
                if fac not in self._factors:
                    self._factors[fac] = factor_scaled(fac, self.spec.k, x)
        a = self.spec.compressed_to
        if a is not None:
            if not self.grid.has_node(a) and a < self.grid.x_max:
                raise DomainError("compression point must be a grid node")
            self.end = min(self.grid.index_of(a), self.grid.n - 1) if a < self.grid.x_max else self.grid.n - 1
        else:
            self.end = self.grid.n - 1
        cuts = tuple(b for b in (self.start, self.end) if 0 < b < self.grid.n - 1)
        if any(b not in self.quad.bounds for b in cuts):
            # stencils must not straddle the compression or start point
            self.quad = Quadrature(self.quad.grid, self.quad.Q, tuple(self.quad.extra_bounds) + cuts)

    @property
    def grid(self) -> RadialGrid:
        return self.quad.grid

    @property
    def is_volterra(self) -> bool:
        return self.spec.tag in ("Forward", "Backward") and self.spec.compressed_to is None

    def apply(self, f: GridFunction) -> GridFunction:
        """(G0 Q f) with values and derivatives; derivative uses the left factors only."""
        x = self.grid.nodes
        n = x.size
        rho = f.rate
        vals = np.zeros(n, dtype=complex)
        ders = np.zeros(n, dtype=complex)
        if self.quad.is_zero:
            return GridFunction(self.grid, vals, ders, rho)
        end = self.end
        for t in self.terms:
            L = self._factors[t.left]
            R = self._factors[t.right]
            g = R.values * f.values
            beta = R.rate + rho
            gamma_ = L.rate + R.rate
            if t.region == "lower":
                J = self.quad.lower(g, beta, self.start)
            elif t.region == "upper":
                J = self.quad.upper(g, beta, end)
                if end == n - 1:
                    tail = self.quad.tail_estimate(g, beta)
                    scale = max(float(np.max(np.abs(J))), 1e-300)
                    if tail > TOL_TAIL * scale:
                        raise TailError(f"tail beyond X_max estimated at {tail:.3e}")
            else:
                total = self.quad.lower(g, beta, 0)[end] if beta == 0.0 else None
                if total is None:
                    raise DomainError("full-line integrals need matching rates")
                J = np.full(n, total)
            if gamma_ != 0.0:
                if abs(gamma_) * x[end] > _MAX_EXP:
                    raise OverflowError_("kernel growth exceeds the exponent range")
                J = J * np.exp(gamma_ * x)
            vals += t.coef * L.values * J
            ders += t.coef * L.derivs * J
        if end < n - 1:
            vals[end + 1:] = 0.0
            ders[end + 1:] = 0.0
        if self.start > 0:
            vals[:self.start] = 0.0
            ders[:self.start] = 0.0
        return GridFunction(self.grid, vals, ders, rho)


def apply_GQ(spec: KernelSpec, Q: PotentialSpec, f: GridFunction) -> GridFunction:
    """One application of G0 Q to a grid function."""
    return GreenOperator(spec, Quadrature(f.grid, Q)).apply(f)


# ------------------------------------------------------------- Neumann series


@dataclass(frozen=True)
class NeumannReport:
    terms_used: int
    last_term_norm: float
    majorant_bound: float
    converged: bool
    term_norms: tuple[float, ...] = ()
    heuristic_constant: bool = True


def near_zero_exponent(f: GridFunction) -> float:
    """Real exponent p of the power law |f| ~ x^p at the first nodes."""
    a, b = abs(f.values[0]), abs(f.values[1])
    if a == 0 or b == 0:
        return 0.0
    return float(math.log(b / a) / math.log(f.x[1] / f.x[0]))


def norm_weight(f0: GridFunction, k: complex) -> np.ndarray:
    """mu_k(x)^p with p the near-zero exponent of f0 (exponential rates live in the scaling)."""
    p = near_zero_exponent(f0)
    x = f0.x
    mu = x if abs(k) < 1e-12 else np.minimum(x, 1.0 / abs(k))
    return mu ** p


def weighted_norm(f: GridFunction, weight: np.ndarray, upto: Optional[int] = None) -> float:
    v = np.abs(f.values) / weight
    if upto is not None:
        v = v[:upto + 1]
    return float(np.max(v)) if v.size else 0.0


def neumann_solve(op: GreenOperator, f0: GridFunction, tol: float = NEUMANN_TOL,
                  cap: int = NEUMANN_CAP, check_contraction: bool = True,
                  weight: Optional[np.ndarray] = None,
                  certify: bool = True) -> tuple[GridFunction, NeumannReport]:
    """Sum the Neumann series sum_n (-G0 Q)^n f0.

    With ``certify`` the report carries the factorial majorant for Volterra
    kernels (this samples the kernel and costs about as much as the solve)."""
    if op.quad.is_zero:
        return f0.copy(), NeumannReport(1, 0.0, 0.0, True, (weighted_norm(f0, np.ones(f0.grid.n)),))
    w = norm_weight(f0, op.spec.k) if weight is None else weight
    if check_contraction and op.spec.compressed_to is not None and not op.is_volterra:
        est = operator_norm_estimate(op.spec, op.quad.Q, grid=op.grid,
                                     weight=("power", near_zero_exponent(f0)))
        if est >= 1.0:
            raise NonContraction(f"operator norm estimate {est:.3f} >= 1 at a = {op.spec.compressed_to}")
    total = f0.copy()
    term = f0
    norms = [weighted_norm(f0, w)]
    small = 0
    converged = False
    for n in range(1, cap + 1):
        term = -1.0 * op.apply(term)
        tn = weighted_norm(term, w)
        norms.append(tn)
        total = total + term
        sn = weighted_norm(total, w)
        if not math.isfinite(tn):
            raise NonConvergence("Neumann term overflowed")
        if not op.is_volterra and n > 8 and tn > 10.0 * norms[1] and tn > norms[-2]:
            raise NonContraction("Neumann series is diverging")
        if tn <= tol * sn:
            small += 1
            if small >= 2:
                converged = True
                break
        else:
            small = 0
    if not converged:
        raise NonConvergence(f"Neumann series not converged after {cap} terms")
    maj = factorial_majorant(op, f0, len(norms) - 1, w) if (op.is_volterra and certify) else math.nan
    return total, NeumannReport(len(norms), norms[-1], maj, converged, tuple(norms))


# ------------------------------------------------------------ norm estimates


def _weight_array(weight, x: np.ndarray, k: complex) -> tuple[np.ndarray, float]:
    """Resolve a weight description into (algebraic part on x, exponential rate)."""
    kind = weight[0]
    kabs = abs(k)
    mu = x if kabs < 1e-12 else np.minimum(x, 1.0 / kabs)
    if kind == "power":
        return mu ** weight[1], 0.0
    if kind == "mu_eta":
        return mu ** weight[1], -k.real
    if kind == "mu_lambda":
        lam = 1.0 - np.log(kabs * mu) if kabs >= 1e-12 else 1.0 - np.log(np.minimum(x, 1.0))
        return np.sqrt(mu) * lam ** weight[1], -k.real
    if kind == "x_log":
        return np.sqrt(x) * (1.0 - np.log(np.minimum(x, 1.0))) ** weight[1], 0.0
    raise DomainError(f"unknown weight {kind!r}")


def _sample_indices(n: int, upto: int, count: int = 240) -> np.ndarray:
    hi = max(upto, 1)
    return np.unique(np.linspace(0, hi, min(count, hi + 1)).round().astype(int))


def kernel_matrix(spec: KernelSpec, x: np.ndarray, rate: float = 0.0) -> np.ndarray:
    """Uncompressed K[i, j] = G(x_i, x_j) exp(rate (x_j - x_i)), from the separable factors."""
    K = np.zeros((x.size, x.size), dtype=complex)
    lower = x[:, None] > x[None, :]
    upper = x[:, None] < x[None, :]
    for t in separable_terms(spec):
        L = factor_scaled(t.left, spec.k, x)
        R = factor_scaled(t.right, spec.k, x)
        expo = (L.rate - rate) * x[:, None] + (R.rate + rate) * x[None, :]
        expo = np.clip(expo, -_MAX_EXP, _MAX_EXP)
        val = t.coef * np.outer(L.values, R.values) * np.exp(expo)
        mask = lower if t.region == "lower" else upper if t.region == "upper" else True
        K += np.where(mask, val, 0.0)
    return K


def kernel_ratio_constant(spec: KernelSpec, x: np.ndarray, phi: np.ndarray, mu_pow: np.ndarray,
                          rate: float = 0.0) -> float:
    """Sampled sup of |G(x,y)| phi(y) / (phi(x) mu(y)^(1-eps)) (heuristic constant C).

    The weight is phi(x) exp(rate x); the exponential part is applied inside the kernel."""
    K = np.abs(kernel_matrix(spec, x, rate))
    ratio = K * phi[None, :] / (phi[:, None] * mu_pow[None, :])
    ratio = np.where(np.isfinite(ratio), ratio, 0.0)
    return float(np.max(ratio))


def operator_norm_estimate(spec: KernelSpec, Q: PotentialSpec, grid: Optional[RadialGrid] = None,
                           weight=("mu_eta", 0.0), eps: float = 0.0, a: Optional[float] = None) -> float:
    """C * int_0^a mu_k^(1-eps) |Q| with C from sampling the kernel ratio."""
    if Q.is_zero:
        return 0.0
    a = spec.compressed_to if a is None else a
    if grid is None:
        grid = default_grid(spec.k, Q, n=1024, extra_breakpoints=[a] if a else ())
    x = grid.nodes
    upto = grid.index_of(a) if a is not None and a < grid.x_max else grid.n - 1
    k = spec.k
    mu = x if abs(k) < 1e-12 else np.minimum(x, 1.0 / abs(k))
    quad = Quadrature(grid, Q)
    integral = _abs_integral(quad, mu ** (1.0 - eps), upto)
    if not math.isfinite(integral):
        return math.inf
    sel = _sample_indices(grid.n, upto)
    phi, rate = _weight_array(weight, x[sel], k)
    C = kernel_ratio_constant(spec, x[sel], phi, mu[sel] ** (1.0 - eps), rate)
    return C * integral


def _abs_integral(quad: Quadrature, weightvals: np.ndarray, upto: int) -> float:
    """int_0^{x_upto} weight |Q| dx with trapezoid panels plus a power-law head."""
    x = quad.grid.nodes
    q = np.abs(quad.q_nodes) * weightvals
    qs_plus = np.abs(quad.Q(x, side=1)) * weightvals
    qs_minus = np.abs(quad.Q(x, side=-1)) * weightvals
    panels = 0.5 * (qs_plus[:-1] + qs_minus[1:]) * np.diff(x)
    head = 0.0
    if q[0] > 0 and q[1] > 0:
        s = math.log(q[1] / q[0]) / math.log(x[1] / x[0])
        head = x[0] * q[0] / (s + 1.0) if s > -1 else math.inf
    return float(head + np.sum(panels[:upto]))


def choose_a(spec: KernelSpec, Q: PotentialSpec, weight=("mu_eta", 0.0), target: float = 0.5,
             grid: Optional[RadialGrid] = None, eps: float = 0.0) -> float:
    """Largest grid-aligned a with operator_norm_estimate <= target (bisection on node index)."""
    if grid is None:
        grid = default_grid(spec.k, Q, n=512)
    if Q.is_zero:
        return grid.x_max
    x = grid.nodes

    def est(i: int) -> float:
        s = KernelSpec(spec.tag, spec.m, spec.k, float(x[i]), spec.kappa, spec.nu)
        return operator_norm_estimate(s, Q, grid=grid, weight=weight, eps=eps, a=float(x[i]))

    lo, hi = 8, grid.n - 1
    if est(lo) > target:
        raise NoAdmissibleA("no admissible compression length on this grid")
    if est(hi) <= target:
        return float(x[hi])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if est(mid) <= target:
            lo = mid
        else:
            hi = mid
    return float(x[lo])


def factorial_majorant(op: GreenOperator, f0: GridFunction, n: int,
                       weight: Optional[np.ndarray] = None) -> float:
    """||f0|| (C I)^n / n! with I = int mu_k |Q| over the grid (Volterra bound)."""
    C, I = volterra_constants(op, f0, weight)
    w = norm_weight(f0, op.spec.k) if weight is None else weight
    return weighted_norm(f0, w) * (C * I) ** n / math.factorial(n)


def volterra_constants(op: GreenOperator, f0: GridFunction,
                       weight: Optional[np.ndarray] = None) -> tuple[float, float]:
    """(C, I): sampled kernel-ratio constant in the solution weight and int mu |Q|."""
    grid = op.grid
    x = grid.nodes
    k = op.spec.k
    mu = x if abs(k) < 1e-12 else np.minimum(x, 1.0 / abs(k))
    w = norm_weight(f0, k) if weight is None else weight
    sel = _sample_indices(grid.n, grid.n - 1, 400)
    # the scaled representation absorbs e^{rate x}; the ratio includes it
    C = kernel_ratio_constant(op.spec, x[sel], w[sel], mu[sel], rate=f0.rate)
    I = _abs_integral(op.quad, mu, grid.n - 1)
    return C, I
