"""Potentials Q, spectral points, integrability classes and k-dependent weights."""

from __future__ import annotations

from dataclasses import dataclass, field
import functools
import math
from pathlib import Path
from typing import Callable
import warnings

import numpy as np
from scipy import integrate

from .errors import DomainError, WeightUndefined

DELTA_K0 = 1e-12
RE_K_CLAMP = 1e-14


class _DivergentMarker(float):
    """+inf that prints as ``Divergent``; returned by class integrals."""

    def __new__(cls):
        return super().__new__(cls, math.inf)

    def __repr__(self) -> str:
        return "Divergent"


Divergent = _DivergentMarker()


def is_divergent(value: float) -> bool:
    return math.isinf(value)


# ------------------------------------------------------------------ potentials


@dataclass(frozen=True)
class PotentialSpec:
    """Base class.  ``side`` selects one-sided limits at breakpoints (-1, 0, +1)."""

    declared_sing_exponent: float = field(default=0.0, init=False)
    declared_decay_exponent: float = field(default=math.inf, init=False)

    def _eval(self, x: np.ndarray, side: int) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x, side: int = 0):
        x_arr = np.asarray(x, dtype=float)
        if np.any(x_arr <= 0):
            raise DomainError("Q is only defined for x > 0")
        out = self._eval(x_arr, side).astype(complex)
        return complex(out) if np.ndim(x) == 0 else out

    def breakpoints(self) -> tuple[float, ...]:
        """Interior points where Q jumps (grid nodes are placed there)."""
        return ()

    def kinks(self) -> tuple[float, ...]:
        """Points where Q is not smooth; class integrals are split there."""
        return self.breakpoints()

    @property
    def support_end(self) -> float:
        """Smallest X with Q = 0 on ]X, inf[ (inf when not compactly supported)."""
        return math.inf

    @property
    def is_zero(self) -> bool:
        return False

    def label(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class Zero(PotentialSpec):
    def _eval(self, x, side):
        return np.zeros_like(x)

    @property
    def support_end(self) -> float:
        return 0.0

    @property
    def is_zero(self) -> bool:
        return True


@dataclass(frozen=True)
class PowerLaw(PotentialSpec):
    """Q(x) = c x^(-alpha) on ]0, x_c], zero beyond."""

    c: complex = 1.0
    alpha: float = 1.0
    x_c: float = 1.0

    def __post_init__(self):
        if self.x_c <= 0:
            raise DomainError("x_c must be positive")
        object.__setattr__(self, "declared_sing_exponent", -float(self.alpha))

    def _eval(self, x, side):
        inside = x < self.x_c if side > 0 else x <= self.x_c
        return np.where(inside, self.c * x ** (-self.alpha), 0.0)

    def breakpoints(self):
        return (self.x_c,)

    @property
    def support_end(self):
        return self.x_c


@dataclass(frozen=True)
class CoulombCutoff(PowerLaw):
    """Q(x) = -beta/x on ]0, x_c]."""

    beta: float = 1.0

    def __init__(self, beta: float = 1.0, x_c: float = 1.0):
        object.__setattr__(self, "beta", beta)
        PowerLaw.__init__(self, c=-beta, alpha=1.0, x_c=x_c)


@dataclass(frozen=True)
class SquareWell(PotentialSpec):
    """Attractive well Q = -V0 on [x0, x1]."""

    V0: complex = 1.0
    x0: float = 0.0
    x1: float = 1.0

    def __post_init__(self):
        if not (self.x1 > self.x0 >= 0):
            raise DomainError("SquareWell requires x1 > x0 >= 0")

    def _eval(self, x, side):
        if side > 0:
            inside = (x >= self.x0) & (x < self.x1)
        elif side < 0:
            inside = (x > self.x0) & (x <= self.x1)
        else:
            inside = (x >= self.x0) & (x <= self.x1)
        return np.where(inside, -self.V0, 0.0)

    def breakpoints(self):
        return tuple(b for b in (self.x0, self.x1) if b > 0)

    @property
    def support_end(self):
        return self.x1


@dataclass(frozen=True)
class ExpDecay(PotentialSpec):
    """Q(x) = c exp(-lam x)."""

    c: complex = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if self.lam <= 0:
            raise DomainError("ExpDecay requires lam > 0")

    def _eval(self, x, side):
        return self.c * np.exp(-self.lam * x)


@dataclass(frozen=True)
class Tabulated(PotentialSpec):
    """Linear interpolation in (ln x, Q); constant below the first node, 0 after the last."""

    nodes: tuple = ()
    values: tuple = ()
    sing_exponent: float = 0.0
    decay_exponent: float = math.inf

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.size < 2 or len(self.values) != nodes.size:
            raise DomainError("Tabulated needs at least two nodes and matching values")
        if np.any(nodes <= 0) or np.any(np.diff(nodes) <= 0):
            raise DomainError("Tabulated nodes must be positive and strictly increasing")
        object.__setattr__(self, "nodes", tuple(float(v) for v in nodes))
        object.__setattr__(self, "values", tuple(complex(v) for v in self.values))
        object.__setattr__(self, "declared_sing_exponent", float(self.sing_exponent))
        object.__setattr__(self, "declared_decay_exponent", float(self.decay_exponent))

    def _eval(self, x, side):
        t = np.log(np.asarray(self.nodes))
        vals = np.asarray(self.values)
        lx = np.log(x)
        re = np.interp(lx, t, vals.real)
        im = np.interp(lx, t, vals.imag)
        last = self.nodes[-1]
        beyond = x > last if side <= 0 else x >= last
        return np.where(beyond, 0.0, re + 1j * im)

    def breakpoints(self):
        return (self.nodes[-1],)

    def kinks(self):
        return self.nodes

    @property
    def support_end(self):
        return self.nodes[-1]


def eval_Q(spec: PotentialSpec, x):
    """Q(x) for x > 0."""
    return spec(x)


def read_tabulated(path: str | Path, sing_exponent: float = 0.0,
                   decay_exponent: float = math.inf) -> Tabulated:
    """Read ``x value_re value_im`` rows (``#`` starts a comment)."""
    xs, vals = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise DomainError(f"{path}:{lineno}: expected 'x value_re [value_im]'")
        xs.append(float(parts[0]))
        vals.append(complex(float(parts[1]), float(parts[2]) if len(parts) == 3 else 0.0))
    return Tabulated(tuple(xs), tuple(vals), sing_exponent, decay_exponent)


def write_tabulated(spec: Tabulated, path: str | Path) -> None:
    lines = ["# x value_re value_im"]
    for x, v in zip(spec.nodes, spec.values):
        lines.append(f"{x!r} {v.real!r} {v.imag!r}")
    Path(path).write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------- spectral point


@dataclass(frozen=True)
class SpectralPoint:
    k: complex
    is_zero: bool

    @classmethod
    def of(cls, k) -> "SpectralPoint":
        if isinstance(k, SpectralPoint):
            return k
        k = complex(k)
        if not (math.isfinite(k.real) and math.isfinite(k.imag)):
            raise DomainError(f"k must be finite, got {k}")
        if k.real < -RE_K_CLAMP:
            raise DomainError(f"Re k must be non-negative, got {k}")
        if k.real < 0:
            k = complex(0.0, k.imag)
        return cls(k, abs(k) < DELTA_K0)


# --------------------------------------------------------- integrability classes


def _log_weight(x, beta: float):
    return 1.0 + np.abs(np.log(x)) ** beta if beta > 0 else np.ones_like(x)


@functools.lru_cache(maxsize=512)
def class_integral(spec: PotentialSpec, side: str, eps: float, log_power: float = 0.0) -> float:
    """Integral defining the near-0 or near-infinity integrability class.

    side="zero":     int_0^1 x^(1-eps) (1+|ln x|^beta) |Q| dx
    side="infinity": int_1^inf x^eps (1+(ln x)^beta) |Q| dx
    The log factor is dropped when beta = 0.  Returns ``Divergent`` (+inf)
    when the integral does not converge.
    """
    if spec.is_zero:
        return 0.0
    if side == "zero":
        alpha0 = spec.declared_sing_exponent
        if alpha0 + 2.0 - eps <= 0.0:
            return Divergent
        upper = min(1.0, spec.support_end)
        if upper <= 0:
            return 0.0

        def f(t):
            x = math.exp(t)
            return x ** (2.0 - eps) * float(_log_weight(np.array(x), log_power)) * abs(spec(x))

        # keep x^alp0 representable; below t_low Q follows its power law, whose tail is f(t_low)/p
        p = alpha0 + 2.0 - eps
        t_low = min(-700.0 / max(1.0, -alpha0), math.log(upper) - 1.0)
        pts = [math.log(b) for b in spec.kinks() if 0 < b < upper]
        body = _quad_log(f, t_low, math.log(upper), pts)
        return body + f(t_low) / p
    if side == "infinity":
        end = spec.support_end
        if end <= 1.0:
            return 0.0
        if math.isinf(end) and not math.isinf(spec.declared_decay_exponent):
            if spec.declared_decay_exponent - eps <= 1.0:
                return Divergent

        def g(t):
            x = math.exp(t)
            q = abs(spec(x))
            if q == 0.0:
                return 0.0
            # log domain: x^(1+eps) alone overflows long before |Q| decays
            lv = (1.0 + eps) * t + math.log(float(_log_weight(np.array(x), log_power))) + math.log(q)
            return math.exp(lv) if lv < 700.0 else math.inf

        pts = [math.log(b) for b in spec.kinks() if 1.0 < b < end]
        upper = math.log(end) if math.isfinite(end) else 700.0
        return _quad_log(g, 0.0, upper, pts)
    raise DomainError(f"side must be 'zero' or 'infinity', got {side!r}")


def _quad_log(f: Callable[[float], float], a: float, b: float, pts: list[float]) -> float:
    edges = [a] + sorted(p for p in pts if a < p < b) + [b]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(f, lo, hi, limit=400, epsabs=0.0, epsrel=1e-10)
        if not math.isfinite(val) or err > 1e-6 * max(abs(val), 1e-300) + 1e-12:
            return Divergent
        total += val
    return total


def in_class_zero(spec: PotentialSpec, eps: float, log_power: float = 0.0) -> bool:
    return not is_divergent(class_integral(spec, "zero", eps, log_power))


def in_class_infinity(spec: PotentialSpec, delta: float, log_power: float = 0.0) -> bool:
    return not is_divergent(class_integral(spec, "infinity", delta, log_power))


def max_class_eps(spec: PotentialSpec, cap: float = 2.0) -> float:
    """Supremum-style estimate of the largest eps with Q in the near-0 class of order eps.

    For symbolic potentials this is 2 + declared_sing_exponent (exclusive)."""
    return min(cap, 2.0 + spec.declared_sing_exponent)


# --------------------------------------------------------------------- weights


@dataclass(frozen=True)
class WeightTriple:
    k: complex

    @property
    def _kabs(self) -> float:
        return abs(self.k)

    def mu(self, x):
        x = np.asarray(x, dtype=float)
        if self._kabs < DELTA_K0:
            return x
        return np.minimum(1.0 / self._kabs, x)

    def lam(self, x):
        if self._kabs < DELTA_K0:
            raise WeightUndefined("lambda_k is undefined at k = 0")
        return 1.0 - np.log(self._kabs * self.mu(x))

    def eta_plus(self, x):
        return np.exp(self.k.real * np.asarray(x, dtype=float))

    def eta_minus(self, x):
        return np.exp(-self.k.real * np.asarray(x, dtype=float))


def weights(k) -> WeightTriple:
    return WeightTriple(SpectralPoint.of(k).k)
