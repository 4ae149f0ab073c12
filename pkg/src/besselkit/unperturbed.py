"""Closed-form solutions and Green kernels of L0 + k^2 with L0 = -d^2 + (m^2 - 1/4)/x^2.

Solutions are returned either plainly or exponentially scaled: a scaled
triple (values, derivs, rate) represents f(x) = values * exp(rate * x).
Forward-type solutions (u0, p0) carry rate +Re k and the Jost-type ones
(v0, w0) carry rate -Re k, so nothing overflows at large |k| x.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Optional

import numpy as np

from . import specfun as sf
from .errors import DomainError, MixedDenominatorZero
from .model import SpectralPoint

U0, V0, W0, P0 = "U0", "V0", "W0", "P0"
KERNEL_TAGS = ("Bisolution", "Forward", "Backward", "Bowtie", "Diamond", "Triangledown",
               "MixedKappa", "MixedNu")
DM_STEP = 1e-5  # central m-difference step for the MixedNu kernel


@dataclass(frozen=True)
class Scaled:
    """f = values * exp(rate * x) and f' = derivs * exp(rate * x)."""

    values: np.ndarray
    derivs: np.ndarray
    rate: float

    def plain(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        e = np.exp(self.rate * np.asarray(x, dtype=float))
        return self.values * e, self.derivs * e

    def rescaled(self, x: np.ndarray, rate: float) -> "Scaled":
        e = np.exp((self.rate - rate) * np.asarray(x, dtype=float))
        return Scaled(self.values * e, self.derivs * e, rate)

    def __add__(self, other: "Scaled") -> "Scaled":
        if self.rate != other.rate:
            raise ValueError("cannot add scaled functions with different rates")
        return Scaled(self.values + other.values, self.derivs + other.derivs, self.rate)

    def __rmul__(self, c: complex) -> "Scaled":
        return Scaled(c * self.values, c * self.derivs, self.rate)


def _x(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("x must be positive")
    return arr


def _pow(x: np.ndarray, p: complex) -> np.ndarray:
    return np.exp(p * np.log(x))


def _split(k: complex, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = k * x
    return z, np.abs(z) <= sf.R_SERIES


# ------------------------------------------------------------------- solutions


def u0_scaled(m: complex, k, x) -> Scaled:
    """u0_m(x,k) = x^(1/2+m) F_m(k^2 x^2 / 4), scaled with rate Re k."""
    sp = SpectralPoint.of(k)
    x = _x(x)
    m = complex(m)
    kap = sp.k.real
    if sp.is_zero:
        rg = complex(sf.rgamma(m + 1.0))
        return Scaled(_pow(x, 0.5 + m) * rg, (0.5 + m) * _pow(x, m - 0.5) * rg, 0.0)
    k = sp.k
    z, ser = _split(k, x)
    vals = np.empty(x.shape, dtype=complex)
    ders = np.empty(x.shape, dtype=complex)
    if np.any(ser):
        xs = x[ser]
        w = (k * xs / 2.0) ** 2
        F = sf._bigF_series(m, w)
        F1 = sf._bigF_series(m + 1.0, w)
        damp = np.exp(-kap * xs)
        vals[ser] = _pow(xs, 0.5 + m) * F * damp
        ders[ser] = ((0.5 + m) * _pow(xs, m - 0.5) * F + _pow(xs, 0.5 + m) * F1 * k * k * xs / 2.0) * damp
    big = ~ser
    if np.any(big):
        Is, dIs, _, _ = sf.calIK_scaled(m, z[big])
        pref = np.exp(0.5 * np.log(2.0 / (np.pi * k)) + m * np.log(2.0 / k))
        vals[big] = pref * Is
        ders[big] = pref * k * dIs
    return Scaled(vals, ders, kap)


def w0_scaled(m: complex, k, x) -> Scaled:
    """w0_m(x,k) = K_m(kx), scaled with rate -Re k."""
    sp = SpectralPoint.of(k)
    if sp.is_zero:
        raise DomainError("w0 is not defined at k = 0")
    x = _x(x)
    _, _, Ks, dKs = sf.calIK_scaled(complex(m), sp.k * x)
    return Scaled(Ks, sp.k * dKs, -sp.k.real)


def v0_prefactor(m: complex, k: complex) -> complex:
    """sqrt(pi/(2k)) (k/2)^m, so that v0 = prefactor * w0."""
    return complex(np.exp(0.5 * np.log(np.pi / (2.0 * k)) + m * np.log(k / 2.0)))


def v0_scaled(m: complex, k, x) -> Scaled:
    """v0_m(x,k) = sqrt(pi/2k) (k/2)^m K_m(kx); k = 0 gives Gamma(m) x^(1/2-m)/2."""
    sp = SpectralPoint.of(k)
    x = _x(x)
    m = complex(m)
    if sp.is_zero:
        if m == 0 or m.real < 0:
            raise DomainError("v0 at k = 0 requires Re m >= 0 and m != 0")
        g = complex(sf._gamma_raw(m)) / 2.0
        return Scaled(g * _pow(x, 0.5 - m), g * (0.5 - m) * _pow(x, -0.5 - m), 0.0)
    w = w0_scaled(m, sp.k, x)
    return v0_prefactor(m, sp.k) * w


def p0_scaled(k, x) -> Scaled:
    """p0_0(x,k) = -v0_0 - (ln(k/2) + gamma) u0_0, scaled with rate Re k."""
    sp = SpectralPoint.of(k)
    x = _x(x)
    kap = sp.k.real
    k = sp.k
    if sp.is_zero:
        sx = np.sqrt(x)
        lx = np.log(x)
        return Scaled((sx * lx).astype(complex), ((0.5 * lx + 1.0) / sx).astype(complex), 0.0)
    z, ser = _split(k, x)
    vals = np.empty(x.shape, dtype=complex)
    ders = np.empty(x.shape, dtype=complex)
    if np.any(ser):
        xs = x[ser]
        w = (k * xs / 2.0) ** 2
        F0 = sf._bigF_series(0.0, w)
        F1 = sf._bigF_series(1.0, w)
        G0 = sf._bigF_series(0.0, w, derivative=True)
        G1 = sf._bigF_series(1.0, w, derivative=True)
        sx = np.sqrt(xs)
        lg = np.log(xs) - sf.EULER_GAMMA
        core = lg * F0 + G0
        dcore = F0 / xs + (lg * F1 + G1) * k * k * xs / 2.0
        damp = np.exp(-kap * xs)
        vals[ser] = sx * core * damp
        ders[ser] = (core / (2.0 * sx) + sx * dcore) * damp
    big = ~ser
    if np.any(big):
        xb = x[big]
        v = v0_scaled(0.0, k, xb)
        u = u0_scaled(0.0, k, xb)
        c = np.log(k / 2.0) + sf.EULER_GAMMA
        e = np.exp(-2.0 * kap * xb)
        vals[big] = -v.values * e - c * u.values
        ders[big] = -v.derivs * e - c * u.derivs
    return Scaled(vals, ders, kap)


def solution_scaled(kind: str, m: complex, k, x) -> Scaled:
    if kind == U0:
        return u0_scaled(m, k, x)
    if kind == V0:
        return v0_scaled(m, k, x)
    if kind == W0:
        return w0_scaled(m, k, x)
    if kind == P0:
        if complex(m) != 0:
            raise DomainError("P0 requires m = 0")
        return p0_scaled(k, x)
    raise DomainError(f"unknown solution kind {kind!r}")


def eval_solution(kind: str, m, k, x):
    """(value, derivative) of U0, V0, W0 or P0 at x > 0."""
    mm = sf._order(m)
    s = solution_scaled(kind, mm, k, x)
    vals, ders = s.plain(x)
    if np.ndim(x) == 0:
        return complex(vals), complex(ders)
    return vals, ders


def exact_wronskian(pair: tuple[str, str], m, k=0.0) -> complex:
    """Closed-form Wronskians W(f, g) = f g' - f' g of the unperturbed pairs."""
    mm = sf._order(m)
    if pair == (V0, U0):
        return 1.0 + 0j
    if pair == (U0, "U0_neg_m"):
        return complex(-2.0 * sf.sinpi(mm) / np.pi)
    if pair == (U0, P0):
        if mm != 0:
            raise DomainError("(U0, P0) requires m = 0")
        return 1.0 + 0j
    raise DomainError(f"unknown Wronskian pair {pair!r}")


# --------------------------------------------------------------------- kernels


@dataclass(frozen=True)
class KernelSpec:
    """Selects an unperturbed Green kernel; ``compressed_to`` applies theta(a-x)theta(a-y)."""

    tag: str
    m: complex
    k: complex
    compressed_to: Optional[float] = None
    kappa: Optional[complex] = None
    nu: Optional[complex] = None

    def __post_init__(self):
        if self.tag not in KERNEL_TAGS:
            raise DomainError(f"unknown kernel tag {self.tag!r}")
        object.__setattr__(self, "m", complex(self.m))
        object.__setattr__(self, "k", SpectralPoint.of(self.k).k)
        zero_k = abs(self.k) < 1e-12
        if self.tag in ("Diamond", "Triangledown", "MixedNu") and self.m != 0:
            raise DomainError(f"{self.tag} requires m = 0")
        if self.tag == "Bowtie" and zero_k and self.m == 0:
            raise DomainError("Bowtie at k = 0 requires m != 0")
        if self.tag in ("MixedKappa", "MixedNu") and zero_k:
            raise DomainError("mixed kernels require k != 0")
        if self.tag == "MixedKappa" and self.kappa is None:
            raise DomainError("MixedKappa needs kappa")
        if self.tag == "MixedNu" and self.nu is None:
            raise DomainError("MixedNu needs nu")
        if self.compressed_to is not None and self.compressed_to <= 0:
            raise DomainError("compression length must be positive")

    @property
    def is_zero_k(self) -> bool:
        return abs(self.k) < 1e-12


@dataclass(frozen=True)
class SepTerm:
    """One separable piece c * L(x) R(y) restricted to y < x ('lower'), y > x ('upper') or all y."""

    coef: complex
    left: tuple[str, complex]
    right: tuple[str, complex]
    region: str


def _pair_for_bisolution(m: complex, k: complex) -> tuple[tuple[str, complex], tuple[str, complex], complex]:
    """(A, B, c) with bisolution = c (A(x) B(y) - B(x) A(y)); A plays the role of v0."""
    mc = sf._canonical(m)
    if abs(k) < 1e-12:
        if mc == 0:
            return ("mP0", 0.0), (U0, 0.0), 1.0
        return ("X-", mc), ("X+", mc), 1.0 / (2.0 * mc)
    return (V0, mc), (U0, mc), 1.0


def separable_terms(spec: KernelSpec) -> list[SepTerm]:
    """Decompose a kernel into separable pieces (used by the Volterra engine)."""
    m, k, tag = spec.m, spec.k, spec.tag
    if tag in ("Bisolution", "Forward", "Backward"):
        A, B, c = _pair_for_bisolution(m, k)
        if tag == "Bisolution":
            return [SepTerm(c, A, B, "all"), SepTerm(-c, B, A, "all")]
        if tag == "Forward":
            return [SepTerm(c, A, B, "lower"), SepTerm(-c, B, A, "lower")]
        return [SepTerm(-c, A, B, "upper"), SepTerm(c, B, A, "upper")]
    if tag == "Bowtie":
        return _bowtie_terms(m, k, 1.0)
    if tag == "Diamond":
        # -p0(x) u0(y) below the diagonal: the orientation matching the k = 0 limit
        # and Diamond - Bowtie = (ln(k/2) + gamma) u0 u0
        return [SepTerm(-1.0, (P0, 0.0), (U0, 0.0), "lower"), SepTerm(-1.0, (U0, 0.0), (P0, 0.0), "upper")]
    if tag == "Triangledown":
        return [SepTerm(1.0, (P0, 0.0), (U0, 0.0), "lower"), SepTerm(1.0, (U0, 0.0), (P0, 0.0), "upper")]
    if tag == "MixedKappa":
        if m == 0:
            return _bowtie_terms(0.0, k, 1.0)
        a, b = _mixed_kappa_coeffs(m, k, spec.kappa)
        return _bowtie_terms(m, k, a) + _bowtie_terms(-m, k, b)
    if tag == "MixedNu":
        a, b = _mixed_nu_coeffs(k, spec.nu)
        h = DM_STEP
        return (_bowtie_terms(0.0, k, a) + _bowtie_terms(h, k, b / (2 * h))
                + _bowtie_terms(-h, k, -b / (2 * h)))
    raise DomainError(tag)


def _bowtie_terms(m: complex, k: complex, c: complex) -> list[SepTerm]:
    if abs(k) < 1e-12:
        return [SepTerm(c / (2.0 * m), ("X-", m), ("X+", m), "lower"),
                SepTerm(c / (2.0 * m), ("X+", m), ("X-", m), "upper")]
    return [SepTerm(c, (V0, m), (U0, m), "lower"), SepTerm(c, (U0, m), (V0, m), "upper")]


def _mixed_kappa_coeffs(m: complex, k: complex, kappa: complex) -> tuple[complex, complex]:
    a = complex(sf.rgamma(-m)) * np.exp(-m * np.log(k / 2.0))
    b = -kappa * complex(sf.rgamma(m)) * np.exp(m * np.log(k / 2.0))
    den = a + b
    if abs(den) < 1e-14 * max(abs(a), abs(b), 1e-300):
        raise MixedDenominatorZero("mixed kappa denominator vanishes")
    return a / den, b / den


def _mixed_nu_coeffs(k: complex, nu: complex) -> tuple[complex, complex]:
    den = nu - sf.EULER_GAMMA - np.log(k / 2.0)
    if abs(den) < 1e-14 * max(abs(nu), 1.0):
        raise MixedDenominatorZero("mixed nu denominator vanishes")
    return 1.0, 1.0 / den


def factor_scaled(factor: tuple[str, complex], k: complex, x: np.ndarray) -> Scaled:
    """Evaluate a kernel factor; 'X+'/'X-' are x^(1/2 +- m), 'mP0' is -p0."""
    kind, m = factor
    if kind == "X+":
        return Scaled(_pow(x, 0.5 + m), (0.5 + m) * _pow(x, m - 0.5), 0.0)
    if kind == "X-":
        return Scaled(_pow(x, 0.5 - m), (0.5 - m) * _pow(x, -m - 0.5), 0.0)
    if kind == "mP0":
        return -1.0 * p0_scaled(k, x)
    return solution_scaled(kind, m, k, x)


def eval_kernel(spec: KernelSpec, x, y):
    """Kernel value K(x, y); broadcasts over x and y."""
    xa, ya = np.broadcast_arrays(_x(x), _x(y))
    out = np.zeros(xa.shape, dtype=complex)
    for t in separable_terms(spec):
        L = factor_scaled(t.left, spec.k, xa.ravel())
        R = factor_scaled(t.right, spec.k, ya.ravel())
        expo = L.rate * xa.ravel() + R.rate * ya.ravel()
        val = (t.coef * L.values * R.values * np.exp(expo)).reshape(xa.shape)
        if t.region == "lower":
            mask = xa > ya
        elif t.region == "upper":
            mask = xa < ya
        else:
            mask = np.ones(xa.shape, dtype=bool)
        out += np.where(mask, val, 0.0)
    if spec.compressed_to is not None:
        a = spec.compressed_to
        out = np.where((xa < a) & (ya < a), out, 0.0)
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        return complex(out)
    return out


def bowtie_k0(m: complex, x, y):
    """Closed form of the two-sided kernel at k = 0 (m != 0)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo = _pow(x, 0.5 - m) * _pow(y, 0.5 + m)
    hi = _pow(x, 0.5 + m) * _pow(y, 0.5 - m)
    return np.where(x > y, lo, hi) / (2.0 * m)
