"""Boundary functionals at the singular endpoint, realizations and scattering lengths.

A boundary functional is f -> W(r, f; 0) = lim_{x -> 0} (r f' - r' f)(x) for a
reference function r.  The limit is extrapolated from the smallest grid nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Callable, Optional, Union

import numpy as np

from . import specfun as sf
from .errors import (ClassViolation, DegenerateDecomposition, DomainError, NoConvergence,
                     TrivialBoundarySpace)
from .model import PotentialSpec, Zero, in_class_infinity, in_class_zero, max_class_eps
from .solutions import (SolutionBundle, build_p0, build_p_diamond, build_q, build_q0ln, build_u,
                        build_u0n_standard, build_u_bowtie, build_un, wronskian_of)
from .volterra import GridFunction, RadialGrid, default_grid

RICHARDSON_NODES = 8
RICHARDSON_ORDER = 3
RICHARDSON_RATIO = 1.5
TOL_BC_REL = 1e-6
N_MAX_PARTIAL = 64
ALPHA_ZERO_TOL = 1e-10

Fnlike = Union[GridFunction, SolutionBundle]


def _gf(f: Fnlike) -> GridFunction:
    return f.data if isinstance(f, SolutionBundle) else f


# ----------------------------------------------------------- functionals


@dataclass(eq=False)
class BoundaryFunctional:
    """f -> W(r, f; 0) for a reference r.

    ``reference(x)`` returns (r, r') at an array of points for closed forms;
    ``builder(grid)`` returns r as a grid function for solution-type references.
    Exactly one of the two is set.
    """

    label: str
    reference: Optional[Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]] = None
    builder: Optional[Callable[[RadialGrid], GridFunction]] = None
    case: str = ""
    params: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if (self.reference is None) == (self.builder is None):
            raise DomainError("a boundary functional needs exactly one of reference or builder")

    @property
    def is_closed_form(self) -> bool:
        return self.reference is not None

    def on_grid(self, grid: RadialGrid, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(r, r') at the grid nodes ``idx``."""
        if self.reference is not None:
            return self.reference(grid.nodes[idx])
        key = id(grid)
        if key not in self._cache:
            self._cache.clear()
            self._cache[key] = (grid, self.builder(grid))
        vals, ders = self._cache[key][1].plain()
        return vals[idx], ders[idx]

    def with_case(self, case: str) -> "BoundaryFunctional":
        self.case = case
        return self

    # closed-form constructors

    @classmethod
    def power(cls, s: complex, coef: complex = 1.0, label: Optional[str] = None) -> "BoundaryFunctional":
        """Reference coef * x^(1/2 + s)."""
        s = complex(s)
        p = 0.5 + s

        def ref(x):
            xp = np.exp(p * np.log(x))
            return coef * xp, coef * p * xp / x

        return cls(label or f"x^(1/2{_signed(s)})", reference=ref, params={"s": s})

    @classmethod
    def sqrt_log(cls, nu: complex = 0.0) -> "BoundaryFunctional":
        """Reference x^(1/2) (ln x + nu)."""
        nu = complex(nu)

        def ref(x):
            sx = np.sqrt(x)
            lx = np.log(x) + nu
            return sx * lx, (0.5 * lx + 1.0) / sx

        label = "x^(1/2) ln x" if nu == 0 else f"x^(1/2) (ln x + {nu})"
        return cls(label, reference=ref, params={"nu": nu})

    @classmethod
    def linear(cls, label: str, terms: list[tuple[complex, "BoundaryFunctional"]]) -> "BoundaryFunctional":
        """sum c_j r_j; closed form when all parts are."""
        if all(t.is_closed_form for _, t in terms):
            def ref(x):
                v = np.zeros(np.shape(x), dtype=complex)
                d = np.zeros(np.shape(x), dtype=complex)
                for c, t in terms:
                    tv, td = t.reference(x)
                    v = v + c * tv
                    d = d + c * td
                return v, d

            return cls(label, reference=ref)

        def build(grid):
            total = None
            for c, t in terms:
                r = _reference_gf(t, grid)
                total = c * r if total is None else total + c * r
            return total

        return cls(label, builder=build)

    @classmethod
    def solution(cls, label: str, build: Callable[[RadialGrid], Fnlike], case: str = "",
                 params: Optional[dict] = None) -> "BoundaryFunctional":
        return cls(label, builder=lambda g: _gf(build(g)), case=case, params=dict(params or {}))


def _signed(s: complex) -> str:
    if s.imag == 0:
        return f"{s.real:+g}"
    return f"+({s})"


def _reference_gf(phi: BoundaryFunctional, grid: RadialGrid) -> GridFunction:
    if phi.builder is not None:
        return phi.builder(grid)
    v, d = phi.reference(grid.nodes)
    return GridFunction(grid, v, d, 0.0)


# ------------------------------------------------------ Wronskian at zero


def _sample_indices(grid: RadialGrid, count: int = RICHARDSON_NODES,
                    ratio: float = RICHARDSON_RATIO) -> np.ndarray:
    """Node indices near x_min * ratio^j, j = 0..count-1, strictly increasing."""
    x0 = grid.nodes[0]
    out = []
    for j in range(count):
        i = grid.index_of(x0 * ratio ** j)
        if out and i <= out[-1]:
            i = out[-1] + 1
        out.append(i)
    if out[-1] >= grid.n:
        raise DomainError("grid has too few nodes near 0 for extrapolation")
    return np.asarray(out)


def _neville_at_zero(x: np.ndarray, y: np.ndarray) -> complex:
    """Value at 0 of the polynomial through (x, y)."""
    p = np.array(y, dtype=complex)
    n = len(x)
    for level in range(1, n):
        for i in range(n - level):
            p[i] = (x[i + level] * p[i] - x[i] * p[i + 1]) / (x[i + level] - x[i])
    return complex(p[0])


@dataclass(frozen=True)
class _Samples:
    x: np.ndarray
    w: np.ndarray
    term_size: float


def _wronskian_samples(phi: BoundaryFunctional, f: Fnlike) -> _Samples:
    g = _gf(f)
    idx = _sample_indices(g.grid)
    x = g.grid.nodes[idx]
    r, dr = phi.on_grid(g.grid, idx)
    e = np.exp(g.rate * x) if g.rate != 0 else 1.0
    fv = g.values[idx] * e
    fd = g.derivs[idx] * e
    a = r * fd
    b = dr * fv
    return _Samples(x, a - b, float(np.max(np.abs(a) + np.abs(b))))


def _remainder_exponent(x: np.ndarray, w: np.ndarray) -> float:
    """Leading exponent p of W(x) - W(0) ~ c x^p from ratios of successive differences.

    Falls back to p = 1 when the samples are constant to rounding or the ratios
    do not indicate a single decaying power."""
    d = np.diff(w)
    scale = float(np.max(np.abs(w)))
    if float(np.max(np.abs(d))) <= 1e-11 * max(scale, 1e-300):
        return 1.0
    ratio = x[1] / x[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.abs(d[1:4] / d[0:3])
    q = q[np.isfinite(q) & (q > 0)]
    if q.size == 0:
        return 1.0
    p = float(np.median(np.log(q) / np.log(ratio)))
    return p if 0.05 <= p <= 4.0 else 1.0


def _extrapolate(s: _Samples) -> tuple[complex, float]:
    width = RICHARDSON_ORDER + 1
    p = _remainder_exponent(s.x, s.w)
    t = s.x ** p
    est = np.array([_neville_at_zero(t[j:j + width], s.w[j:j + width])
                    for j in range(len(s.x) - width + 1)])
    value = complex(est[0])
    err = float(np.max(np.abs(est - value)))
    aw = np.abs(s.w)
    growing = bool(np.all(np.diff(aw) < 0)) and aw[0] > 2.0 * aw[-1]
    if growing and p == 1.0 and _growth_slope(s.x, aw) < -0.05:
        raise NoConvergence(f"W(r, f; x) grows as x -> 0 ({aw[-1]:.3g} -> {aw[0]:.3g})")
    return value, err


def _growth_slope(x: np.ndarray, aw: np.ndarray) -> float:
    return float(np.polyfit(np.log(x), np.log(aw), 1)[0])


def wronskian_at_zero(phi: BoundaryFunctional, f: Fnlike) -> tuple[complex, float]:
    """W(r, f; 0) by order-3 Richardson extrapolation on 8 small, geometrically spaced nodes.

    The table is built in t = x^p with p the estimated leading exponent of the
    remainder, since remainders are often non-integer powers of x.  Returns
    (value, error estimate), the error being the spread of the extrapolated
    values over the sliding windows.
    """
    return _extrapolate(_wronskian_samples(phi, f))


# --------------------------------------------------------- realizations


REALIZATION_KINDS = ("Hm", "HmKappa", "H0Nu", "HmN", "Min", "Max")


@dataclass(frozen=True)
class RealizationSpec:
    """A closed realization of L_{m^2} fixed by one boundary functional.

    kind  Hm       W(x^{1/2+m}, f; 0) = 0
          HmKappa  W(x^{1/2+m} + kappa x^{1/2-m}, f; 0) = 0, kappa = inf gives x^{1/2-m}
          H0Nu     W(nu x^{1/2} + p_0, f; 0) = 0 at m = 0, nu = inf gives x^{1/2}
          HmN      W(Gamma(1-m) u^{0[n]}_{-m} + kappa x^{1/2+m}, f; 0) = 0, 0 <= Re m < 1
          Min, Max both or no basis functionals vanish
    """

    kind: str
    m: complex = 0.0
    kappa: Optional[complex] = None
    nu: Optional[complex] = None
    n: int = 0

    def __post_init__(self):
        if self.kind not in REALIZATION_KINDS:
            raise DomainError(f"unknown realization {self.kind!r}")
        object.__setattr__(self, "m", sf._order(self.m))
        if self.kind == "HmKappa":
            if self.kappa is None:
                raise DomainError("HmKappa needs kappa")
            if self.m == 0 or abs(self.m.real) >= 1.0:
                raise DomainError("HmKappa needs m != 0 and |Re m| < 1")
        if self.kind == "H0Nu":
            if self.nu is None:
                raise DomainError("H0Nu needs nu")
            if self.m != 0:
                raise DomainError("H0Nu requires m = 0")
        if self.kind == "HmN":
            if self.kappa is None:
                raise DomainError("HmN needs kappa")
            if not (0.0 <= self.m.real < 1.0) or self.m == 0:
                raise DomainError("HmN needs 0 <= Re m < 1 and m != 0")
            if int(self.n) != self.n or self.n < 0:
                raise DomainError("HmN needs a non-negative integer n")

    @property
    def label(self) -> str:
        extra = {"HmKappa": f", kappa={self.kappa}", "H0Nu": f", nu={self.nu}",
                 "HmN": f", n={self.n}, kappa={self.kappa}"}.get(self.kind, "")
        return f"{self.kind}(m={self.m}{extra})"

    def functional(self, Q: PotentialSpec = Zero()) -> BoundaryFunctional:
        """The defining boundary functional (not available for Min and Max)."""
        m = self.m
        if self.kind == "Hm":
            return BoundaryFunctional.power(m)
        if self.kind == "HmKappa":
            kap = complex(self.kappa)
            if math.isinf(abs(kap)):
                return BoundaryFunctional.power(-m)
            return BoundaryFunctional.linear(
                "x^(1/2+m) + kappa x^(1/2-m)",
                [(1.0, BoundaryFunctional.power(m)), (kap, BoundaryFunctional.power(-m))])
        if self.kind == "H0Nu":
            nu = complex(self.nu)
            if math.isinf(abs(nu)):
                return BoundaryFunctional.power(0.0)
            if max_class_eps(Q) > 0 and in_class_zero(Q, 0.5 * max_class_eps(Q)):
                return BoundaryFunctional.sqrt_log(nu)
            return BoundaryFunctional.linear(
                "nu x^(1/2) + p_0",
                [(nu, BoundaryFunctional.power(0.0)),
                 (1.0, BoundaryFunctional.solution("p_0", lambda g: build_p0(0.0, Q, g, certify=False)))])
        if self.kind == "HmN":
            kap = complex(self.kappa)
            if math.isinf(abs(kap)):
                return BoundaryFunctional.power(m)
            n = int(self.n)
            partial = BoundaryFunctional.solution(f"u^0[{n}]_-m", lambda g: build_u0n_standard(n, m, Q, g))
            # normalized so that n = 0 gives x^{1/2-m} + kappa x^{1/2+m}
            return BoundaryFunctional.linear(
                "Gamma(1-m) u^0[n]_-m + kappa x^(1/2+m)",
                [(sf.gamma(1.0 - m), partial), (kap, BoundaryFunctional.power(m))])
        raise DomainError(f"{self.kind} is not defined by a single functional")

    def zero_energy_solution(self, Q: PotentialSpec, grid: RadialGrid) -> GridFunction:
        """The k = 0 solution g satisfying the boundary condition (up to a factor)."""
        m = self.m
        if self.kind == "Hm":
            return build_u(m, 0.0, Q, grid, certify=False).data
        if self.kind == "HmKappa":
            kap = complex(self.kappa)
            if math.isinf(abs(kap)):
                return build_u(-m, 0.0, Q, grid, certify=False).data
            c = kap * sf.gamma(1.0 - m) / sf.gamma(1.0 + m)
            return (build_u(m, 0.0, Q, grid, certify=False).data
                    + c * build_u(-m, 0.0, Q, grid, certify=False).data)
        if self.kind == "H0Nu":
            nu = complex(self.nu)
            u0 = build_u(0.0, 0.0, Q, grid, certify=False).data
            if math.isinf(abs(nu)):
                return u0
            return nu * u0 + build_p0(0.0, Q, grid, certify=False).data
        if self.kind == "HmN":
            kap = complex(self.kappa)
            um = build_u(m, 0.0, Q, grid, certify=False).data
            if math.isinf(abs(kap)):
                return um
            c = kap * sf.gamma(1.0 + m) / sf.gamma(1.0 - m)
            return build_un(int(self.n), m, 0.0, Q, grid).data + c * um
        raise DomainError(f"{self.kind} has no distinguished zero-energy solution")


def Hm(m) -> RealizationSpec:
    return RealizationSpec("Hm", m)


def HmKappa(m, kappa) -> RealizationSpec:
    return RealizationSpec("HmKappa", m, kappa=kappa)


def H0Nu(nu) -> RealizationSpec:
    return RealizationSpec("H0Nu", 0.0, nu=nu)


def HmN(n: int, m, kappa) -> RealizationSpec:
    return RealizationSpec("HmN", m, kappa=kappa, n=n)


# ---------------------------------------------------------- basis choice


def boundary_basis(m, Q: PotentialSpec, grid: Optional[RadialGrid] = None) -> tuple[BoundaryFunctional, BoundaryFunctional]:
    """Basis of the boundary space under the strongest class condition Q satisfies near 0.

    The pair depends only on m^2, so m is replaced by -m when Re m < 0.
    Solution-type references are built at k = 0 on ``grid`` (default grid if None).
    """
    m = sf._order(m)
    if m.real < 0 or (m.real == 0 and m.imag < 0):
        m = -m
    if m.real >= 1.0:
        raise TrivialBoundarySpace(f"|Re m| = {m.real:g} >= 1: the boundary space is trivial")
    eps_max = max_class_eps(Q)
    if m == 0:
        if eps_max > 0 and in_class_zero(Q, 0.5 * eps_max):
            return (BoundaryFunctional.sqrt_log().with_case("log_pair"),
                    BoundaryFunctional.power(0.0).with_case("log_pair"))
        if in_class_zero(Q, 0.0, 2.0):
            p0 = BoundaryFunctional.solution("p_0", lambda g: build_p0(0.0, Q, g, certify=False), "p0_pair")
            return p0, BoundaryFunctional.power(0.0).with_case("p0_pair")
        if in_class_zero(Q, 0.0, 1.0):
            grid = grid or default_grid(0.0, Q)
            pd = build_p_diamond(0.0, Q, grid=grid)
            a = pd.a
            pdf = BoundaryFunctional.solution(
                f"p_0^diamond(a={a:g})", lambda g: pd if g is grid else build_p_diamond(0.0, Q, a, g),
                "diamond_pair", {"a": a})
            u0 = BoundaryFunctional.solution("u_0(.,0)", lambda g: build_u(0.0, 0.0, Q, g, certify=False),
                                             "diamond_pair")
            return pdf, u0
        raise ClassViolation("m = 0 needs Q in the logarithmic near-0 class")
    plus = BoundaryFunctional.power(m)
    if m.real == 0:
        if not in_class_zero(Q, 0.0):
            raise ClassViolation("imaginary m needs Q in the near-0 class of order 0")
        return BoundaryFunctional.power(-m).with_case("imaginary_order"), plus.with_case("imaginary_order")
    if in_class_zero(Q, 2.0 * m.real):
        return BoundaryFunctional.power(-m).with_case("power_pair"), plus.with_case("power_pair")
    if eps_max > 0:
        for n in range(1, N_MAX_PARTIAL + 1):
            if in_class_zero(Q, 2.0 * m.real / (n + 1)):
                part = BoundaryFunctional.solution(
                    f"u^0[{n}]_-m", lambda g, n=n: build_u0n_standard(n, m, Q, g), "partial_sum", {"n": n})
                return part, plus.with_case("partial_sum")
    if in_class_zero(Q, 0.0):
        grid = grid or default_grid(0.0, Q)
        ub = build_u_bowtie(m, 0.0, Q, grid=grid)
        a = ub.a
        ubf = BoundaryFunctional.solution(
            f"u_-m^bowtie(a={a:g})(.,0)", lambda g: ub if g is grid else build_u_bowtie(m, 0.0, Q, a, g),
            "compressed", {"a": a})
        return ubf, plus.with_case("compressed")
    raise ClassViolation("Q is not in the near-0 class of order 0")


def basis_matrix(basis: tuple[BoundaryFunctional, BoundaryFunctional],
                 tests: tuple[Fnlike, Fnlike]) -> tuple[np.ndarray, float]:
    """2x2 matrix of the basis functionals on two test functions and its condition number."""
    M = np.array([[wronskian_at_zero(phi, f)[0] for f in tests] for phi in basis], dtype=complex)
    return M, float(np.linalg.cond(M))


# ------------------------------------------------------------ domain test


@dataclass(frozen=True)
class DomainTestResult:
    in_domain: bool
    functional_value: complex
    error_estimate: float
    tolerance: float


def _boundary_scale(phi: BoundaryFunctional, f: Fnlike, m: complex, Q: PotentialSpec) -> Optional[float]:
    """Bound on |W(r, f; 0)| from a basis (rho1, rho2) of the boundary space.

    W(r, f; 0) = (phi1(r) phi2(f) - phi2(r) phi1(f)) / W(rho1, rho2; 0), so
    |W(r, f; 0)| <= |r| |f| / |W(rho1, rho2; 0)| with |g| = |phi1(g)| + |phi2(g)|.
    None when no basis is available."""
    grid = _gf(f).grid
    try:
        basis = boundary_basis(m, Q, grid)
        r = _reference_gf(phi, grid)
        rho2 = _reference_gf(basis[1], grid)
        d = abs(wronskian_at_zero(basis[0], rho2)[0])
        r_norm = sum(abs(wronskian_at_zero(b, r)[0]) for b in basis)
        f_norm = sum(abs(wronskian_at_zero(b, f)[0]) for b in basis)
    except (ClassViolation, TrivialBoundarySpace, NoConvergence):
        return None
    if d == 0 or not math.isfinite(d):
        return None
    return r_norm * f_norm / d


def _test_one(phi: BoundaryFunctional, f: Fnlike, m: complex, Q: PotentialSpec) -> DomainTestResult:
    s = _wronskian_samples(phi, f)
    value, err = _extrapolate(s)
    scale = _boundary_scale(phi, f, m, Q)
    tol = TOL_BC_REL * (scale if scale is not None else s.term_size)
    return DomainTestResult(abs(value) <= max(tol, 3.0 * err), value, err, tol)


def domain_test(spec: RealizationSpec, f: Fnlike, Q: PotentialSpec = Zero()) -> DomainTestResult:
    """Whether f satisfies the boundary condition of ``spec`` at 0.

    The functional is scale-covariant, so the tolerance is relative: 1e-6
    times the size of the boundary form on (r, f) measured in the boundary
    basis chosen for (m, Q)."""
    if spec.kind == "Max":
        return DomainTestResult(True, 0.0, 0.0, 0.0)
    if spec.kind == "Min":
        grid = _gf(f).grid
        results = [_test_one(phi, f, spec.m, Q) for phi in boundary_basis(spec.m, Q, grid)]
        worst = max(results, key=lambda r: abs(r.functional_value) - max(r.tolerance, 3 * r.error_estimate))
        return DomainTestResult(all(r.in_domain for r in results), worst.functional_value,
                                worst.error_estimate, worst.tolerance)
    return _test_one(spec.functional(Q), f, spec.m, Q)


# ------------------------------------------------------- scattering length


@dataclass(frozen=True)
class ScatteringLengthResult:
    a: complex
    alpha: complex
    beta: complex
    x_star: float


def _x_star(Q: PotentialSpec) -> float:
    end = Q.support_end
    return max(5.0, 2.0 * end) if math.isfinite(end) else 5.0


def scattering_length(spec: RealizationSpec, Q: PotentialSpec,
                      grid: Optional[RadialGrid] = None) -> ScatteringLengthResult:
    """a with g proportional to q_m - a q_{-m} (m != 0) or q_{0,ln} - a q_0 (m = 0).

    g is the zero-energy solution obeying the boundary condition of ``spec``;
    the coefficients come from Wronskians at x* = max(5, 2 * support radius)
    averaged over 5 nodes.  q_{+-m} are normalized to leading coefficient 1
    at infinity; a is ``inf`` when the q_m coefficient vanishes.
    """
    if spec.kind in ("Min", "Max"):
        raise DomainError("the scattering length is defined for realizations with one boundary condition")
    m = spec.m
    if m == 0:
        if not in_class_infinity(Q, 1.0, 2.0):
            raise ClassViolation("m = 0 scattering length needs Q in the log^2 near-infinity class of order 1")
    elif not in_class_infinity(Q, 1.0 + 2.0 * abs(m.real)):
        raise ClassViolation("scattering length needs Q in the near-infinity class of order 1 + 2|Re m|")
    x_star = _x_star(Q)
    grid = grid or default_grid(0.0, Q, extra_breakpoints=[x_star])
    if grid.x_max < x_star:
        raise DomainError(f"grid ends at {grid.x_max:g} < x* = {x_star:g}")
    g = spec.zero_energy_solution(Q, grid)
    if m == 0:
        lead = build_q0ln(Q, grid, certify=False)
        sub = build_q(0.0, Q, grid, certify=False)
        norm = 1.0  # W(q_0, q_{0,ln})
    else:
        lead = build_q(-m, Q, grid, certify=False)  # q_m
        sub = build_q(m, Q, grid, certify=False)    # q_{-m}
        norm = 2.0 * m  # W(q_{-m}, q_m)
    alpha = wronskian_of(sub, g, x_star, average=5) / norm
    beta = wronskian_of(g, lead, x_star, average=5) / norm
    size = abs(alpha) + abs(beta)
    if size == 0 or not math.isfinite(size):
        raise DegenerateDecomposition("zero-energy solution vanishes at x*")
    if abs(alpha) <= ALPHA_ZERO_TOL * size:
        return ScatteringLengthResult(complex(math.inf, 0.0), alpha, beta, x_star)
    return ScatteringLengthResult(-beta / alpha, alpha, beta, x_star)
