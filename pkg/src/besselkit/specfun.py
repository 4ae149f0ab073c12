"""Complex-order special functions: Gamma, digamma, F_m and the 1d Bessel pair.

The hyperbolic 1d Bessel function and the 1d Macdonald function are

    I_m(z) = sqrt(pi) (z/2)^(m+1/2) F_m(z^2/4),
    K_m(z) = (I_{-m}(z) - I_m(z)) / sin(pi m),

with F_m(w) = sum_n w^n / (n! Gamma(m+n+1)).  Both solve f'' = (1 + c/z^2) f
with c = m^2 - 1/4 and satisfy W(K_m, I_m) = K_m I_m' - K_m' I_m = 1.

Evaluation uses three regimes in |z|:

* |z| <= R_SERIES: power series (K via the sine quotient, or via a paired
  series with the integer limit resolved analytically when m is within
  DELTA_INT of an integer);
* R_SERIES < |z| < R_ASYM: for real m the exponentially scaled AMOS routines
  in scipy.special; for complex m Taylor stepping of the ODE along the ray
  through z, inward for K (its growth direction) and outward for I;
* |z| >= R_ASYM: the Macdonald asymptotic series for K, truncated at its
  smallest term, with I obtained from the connection formula.

All array routines broadcast over z; the order m is a scalar.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy import special

from .errors import BranchError, DomainError, NonConvergence, OverflowError_, PoleError

DELTA_INT = 1e-4
R_SERIES = 2.0
R_ASYM = 20.0
EULER_GAMMA = 0.57721566490153286061
ZETA3 = 1.2020569031595942854

_LANCZOS_G = 7.0
_LANCZOS_P = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
# Bernoulli numbers B_2 .. B_14 for the digamma asymptotic series
_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)

_MAX_EXP = 700.0


@dataclass(frozen=True)
class OrderParam:
    """Bessel order with its classification flags."""

    m: complex
    near_integer: bool
    sign_normalized: bool

    @classmethod
    def of(cls, m: complex | "OrderParam") -> "OrderParam":
        if isinstance(m, OrderParam):
            return m
        m = complex(m)
        if not (math.isfinite(m.real) and math.isfinite(m.imag)):
            raise DomainError(f"order must be finite, got {m}")
        return cls(m, _dist_to_int(m) < DELTA_INT, _is_canonical(m))

    @property
    def canonical(self) -> complex:
        """The representative of {m, -m} with Re m >= 0 (Im m >= 0 on the axis)."""
        return self.m if self.sign_normalized else -self.m


def _order(m) -> complex:
    return m.m if isinstance(m, OrderParam) else complex(m)


def _dist_to_int(m: complex) -> float:
    return abs(m - round(m.real))


def _is_canonical(m: complex) -> bool:
    return m.real > 0 or (m.real == 0 and m.imag >= 0)


def _canonical(m: complex) -> complex:
    return m if _is_canonical(m) else -m


def _cplx(z) -> np.ndarray:
    return np.asarray(z, dtype=complex)


def _out(arr: np.ndarray, like):
    return complex(arr) if np.ndim(like) == 0 else arr


def sinpi(z):
    """sin(pi z) with exact reduction of the real part."""
    z = _cplx(z)
    n = np.round(z.real)
    r = z - n
    return np.where(np.mod(n, 2) == 0, 1.0, -1.0) * np.sin(np.pi * r)


def cospi(z):
    z = _cplx(z)
    n = np.round(z.real)
    r = z - n
    return np.where(np.mod(n, 2) == 0, 1.0, -1.0) * np.cos(np.pi * r)


# ---------------------------------------------------------------- Gamma family


def _lanczos_loggamma(z: np.ndarray) -> np.ndarray:
    # valid for Re z >= 1/2
    zm = z - 1.0
    acc = np.full(z.shape, _LANCZOS_P[0], dtype=complex)
    for i in range(1, len(_LANCZOS_P)):
        acc = acc + _LANCZOS_P[i] / (zm + i)
    t = zm + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (zm + 0.5) * np.log(t) - t + np.log(acc)


def loggamma(z):
    """A logarithm of Gamma(z) (not necessarily the principal branch)."""
    z_arr = _cplx(z)
    out = np.empty(z_arr.shape, dtype=complex)
    right = z_arr.real >= 0.5
    out[right] = _lanczos_loggamma(z_arr[right])
    left = ~right
    if np.any(left):
        zl = z_arr[left]
        out[left] = math.log(math.pi) - np.log(sinpi(zl)) - _lanczos_loggamma(1.0 - zl)
    return _out(out, z)


def _pole_distance(z: np.ndarray) -> np.ndarray:
    n = np.round(z.real)
    d = np.abs(z - n)
    return np.where(n <= 0, d, np.inf)


def rgamma(z):
    """1/Gamma(z), entire; exact zeros at the non-positive integers."""
    z_arr = _cplx(z)
    out = np.empty(z_arr.shape, dtype=complex)
    right = z_arr.real >= 0.5
    out[right] = np.exp(-_lanczos_loggamma(z_arr[right]))
    left = ~right
    if np.any(left):
        zl = z_arr[left]
        out[left] = sinpi(zl) * np.exp(_lanczos_loggamma(1.0 - zl)) / np.pi
    return _out(out, z)


def _gamma_raw(z):
    z_arr = _cplx(z)
    out = np.empty(z_arr.shape, dtype=complex)
    right = z_arr.real >= 0.5
    out[right] = np.exp(_lanczos_loggamma(z_arr[right]))
    left = ~right
    if np.any(left):
        zl = z_arr[left]
        out[left] = np.pi / (sinpi(zl) * np.exp(_lanczos_loggamma(1.0 - zl)))
    return _out(out, z)


def gamma(z):
    """Gamma(z) by Lanczos (g=7, 9 terms) with reflection for Re z < 1/2."""
    if np.any(_pole_distance(_cplx(z)) < DELTA_INT):
        raise PoleError(f"Gamma has a pole near {z}")
    return _gamma_raw(z)


def _digamma_raw(z):
    z_arr = _cplx(z).copy()
    shape = z_arr.shape
    z_arr = z_arr.ravel()
    out = np.zeros(z_arr.shape, dtype=complex)
    left = z_arr.real < 0.5
    if np.any(left):
        zl = z_arr[left]
        out[left] = -np.pi * cospi(zl) / sinpi(zl)
        z_arr[left] = 1.0 - zl
    for _ in range(10):
        small = z_arr.real < 10.0
        if not np.any(small):
            break
        out[small] -= 1.0 / z_arr[small]
        z_arr[small] += 1.0
    inv2 = 1.0 / (z_arr * z_arr)
    series = np.zeros_like(z_arr)
    p = inv2.copy()
    for k, b in enumerate(_BERNOULLI, start=1):
        series += b / (2 * k) * p
        p = p * inv2
    out += np.log(z_arr) - 0.5 / z_arr - series
    return _out(out.reshape(shape), z)


def digamma(z):
    """psi(z) = Gamma'(z)/Gamma(z)."""
    if np.any(_pole_distance(_cplx(z)) < DELTA_INT):
        raise PoleError(f"digamma has a pole near {z}")
    return _digamma_raw(z)


def drgamma(z):
    """d/dz (1/Gamma(z)); finite everywhere, equal to (-1)^p p! at z = -p."""
    z_arr = _cplx(z)
    out = np.empty(z_arr.shape, dtype=complex)
    n = np.round(z_arr.real)
    at_pole = (n <= 0) & (z_arr == n)
    reg = ~at_pole
    out[reg] = -_digamma_raw(z_arr[reg]) * rgamma(z_arr[reg])
    if np.any(at_pole):
        p = (-n[at_pole]).astype(int)
        out[at_pole] = [(-1.0) ** q * math.factorial(q) for q in p]
    return _out(out, z)


def _psi_int(s: int) -> float:
    return -EULER_GAMMA + sum(1.0 / j for j in range(1, s))


def _psi1_int(s: int) -> float:
    return math.pi**2 / 6 - sum(1.0 / j**2 for j in range(1, s))


def _psi2_int(s: int) -> float:
    return -2 * ZETA3 + 2 * sum(1.0 / j**3 for j in range(1, s))


# ------------------------------------------------------------------ F_m series


def _series_terms(wmax: float, m: complex) -> int:
    return 30 + int(3.0 * math.sqrt(wmax) + abs(m))


def _fcoeffs(m: complex, nterms: int, derivative: bool = False) -> np.ndarray:
    n = np.arange(nterms)
    inv_fact = np.exp(-np.array([math.lgamma(j + 1) for j in n]))
    args = m + n + 1.0
    g = drgamma(args) if derivative else rgamma(args)
    return g * inv_fact


def _horner(coeffs: np.ndarray, w: np.ndarray) -> np.ndarray:
    acc = np.full(w.shape, coeffs[-1], dtype=complex)
    for c in coeffs[-2::-1]:
        acc = acc * w + c
    return acc


def _check_tail(coeffs: np.ndarray, w: np.ndarray, total: np.ndarray) -> None:
    if w.size == 0:
        return
    wmax = float(np.max(np.abs(w)))
    n = len(coeffs) - 1
    last = np.abs(coeffs[-1]) * wmax**n + np.abs(coeffs[-2]) * wmax ** (n - 1)
    scale = max(float(np.max(np.abs(total))), 1e-300)
    if last > 1e-15 * scale and last > 1e-300:
        raise NonConvergence("F-series did not stagnate within the term cap")


def _bigF_series(m: complex, w: np.ndarray, derivative: bool = False) -> np.ndarray:
    wmax = float(np.max(np.abs(w))) if w.size else 0.0
    nterms = _series_terms(wmax, m)
    if nterms > 2000:
        raise NonConvergence("F-series term cap exceeded")
    coeffs = _fcoeffs(m, nterms, derivative)
    total = _horner(coeffs, w)
    _check_tail(coeffs, w, total)
    return total


def bigF(m, w):
    """F_m(w) = sum_n w^n / (n! Gamma(m+n+1))."""
    mm = _order(m)
    w_arr = _cplx(w)
    small = np.abs(w_arr) <= 1.0
    out = np.empty(w_arr.shape, dtype=complex)
    out[small] = _bigF_series(mm, w_arr[small])
    big = ~small
    if np.any(big):
        z = 2.0 * np.sqrt(w_arr[big])
        i_s, _, _, _ = _ik_scaled(mm, z)
        logpref = (mm + 0.5) * np.log(z / 2.0)
        out[big] = i_s * np.exp(z.real - logpref) / math.sqrt(math.pi)
    return _out(out, w)


def dF_dm(m, w):
    """Partial derivative of F_m(w) in the order m."""
    mm = _order(m)
    w_arr = _cplx(w)
    return _out(_bigF_series(mm, w_arr, derivative=True), w)


# --------------------------------------------------------- small-|z| regime


def _series_I(m: complex, z: np.ndarray, L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w = (z / 2.0) ** 2
    nterms = _series_terms(float(np.max(np.abs(w))) if w.size else 0.0, m)
    coeffs = _fcoeffs(m, nterms)
    s = _horner(coeffs, w)
    ds = _horner(coeffs * (m + 0.5 + 2.0 * np.arange(nterms)), w)
    pref = math.sqrt(math.pi) * np.exp((m + 0.5) * L)
    return pref * s, pref * ds / z


def _series_K_near_int(m: complex, z: np.ndarray, L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # m canonical, within DELTA_INT of the integer n >= 0
    n = int(round(m.real))
    d = m - n
    sq = math.sqrt(math.pi)
    K = np.zeros(z.shape, dtype=complex)
    dK = np.zeros(z.shape, dtype=complex)
    for j in range(n):
        term = sq * np.exp((0.5 - m + 2 * j) * L) * (-1) ** j * _gamma_raw(n - j + d) / (
            math.pi * math.factorial(j)
        )
        K += term
        dK += term * (0.5 - m + 2 * j) / z
    pd = math.pi * d
    sinc = 1.0 - pd**2 / 6.0 + pd**4 / 120.0
    nterms = 20 + int(4 * float(np.max(np.abs(z))))
    sign = (-1) ** n
    for i in range(nterms):
        s1, s2 = i + 1, i + n + 1
        E = (
            -2.0 * L
            + _psi_int(s1)
            + _psi_int(s2)
            - d * (_psi1_int(s1) - _psi1_int(s2)) / 2.0
            + d * d * (_psi2_int(s1) + _psi2_int(s2)) / 6.0
        )
        b = d * L - d * _psi_int(s2) - d * d * _psi1_int(s2) / 2.0 - d**3 * _psi2_int(s2) / 6.0
        x = d * E
        with np.errstate(over="ignore", invalid="ignore"):
            exprel = np.where(np.abs(x) < 1e-8, 1.0 + x / 2.0, np.expm1(x) / np.where(x == 0, 1.0, x))
        eb = np.exp(b)
        diff = eb * E * exprel / (math.pi * sinc)  # (r1 - r2)/sin(pi d)
        summ = (eb * np.exp(x) + eb) / (math.pi * sinc)  # d (r1 + r2)/sin(pi d)
        q = 0.5 + n + 2 * i
        pref = sign * sq * np.exp(q * L) / (math.factorial(i) * math.factorial(i + n))
        K += pref * diff
        dK += pref / z * (q * diff - summ)
    return K, dK


def _series_IK(m: complex, z: np.ndarray):
    """Unscaled (I_m, I_m', K_m, K_m') by power series; m arbitrary."""
    L = np.log(z / 2.0)
    I, dI = _series_I(m, z, L)
    mc = _canonical(m)
    if _dist_to_int(mc) < DELTA_INT:
        K, dK = _series_K_near_int(mc, z, L)
    else:
        Ip, dIp = (I, dI) if mc == m else _series_I(mc, z, L)
        Im, dIm = _series_I(-mc, z, L)
        s = complex(sinpi(mc))
        K, dK = (Im - Ip) / s, (dIm - dIp) / s
    return I, dI, K, dK


# -------------------------------------------------------- large-|z| regime


def _asym_terms(m: complex, z: np.ndarray):
    """S(z) = sum a_n z^-n and S'(z), truncated at the smallest term."""
    mu = 4.0 * m * m
    inv = 1.0 / z
    S = np.ones(z.shape, dtype=complex)
    dS = np.zeros(z.shape, dtype=complex)
    term = np.ones(z.shape, dtype=complex)
    prev = np.full(z.shape, np.inf)
    active = np.ones(z.shape, dtype=bool)
    for n in range(1, 200):
        term = term * (mu - (2 * n - 1) ** 2) / (8.0 * n) * inv
        mag = np.abs(term)
        active &= mag < prev
        if not np.any(active):
            break
        S = np.where(active, S + term, S)
        dS = np.where(active, dS - n * term * inv, dS)
        prev = np.where(active, mag, prev)
        if np.all(mag[active] < 1e-17 * np.abs(S[active])):
            break
    return S, dS


def _asym_IK_scaled(m: complex, z: np.ndarray):
    """Scaled (I e^{-Re z}, I' e^{-Re z}, K e^{Re z}, K' e^{Re z}) for Re z >= 0."""
    mc = _canonical(m)
    S, dS = _asym_terms(mc, z)
    Sm, dSm = _asym_terms(mc, -z)
    ph = np.exp(-1j * z.imag)
    Ks = ph * S
    dKs = ph * (dS - S)
    # K_m(e^{-+i pi} z) ~ e^{z} S(-z); its z-derivative is e^{z}(S(-z) - S'(-z))
    php = np.exp(1j * z.imag)
    A = php * Sm
    dA = php * (Sm - dSm)
    upper = z.imag >= 0
    c = np.where(upper, 1j * np.exp(1j * np.pi * m), -1j * np.exp(-1j * np.pi * m))
    damp = np.exp(-2.0 * z.real)
    Is = 0.5 * (A + c * Ks * damp)
    dIs = 0.5 * (dA + c * dKs * damp)
    return Is, dIs, Ks, dKs


# ------------------------------------------------------- intermediate regime


_TAYLOR_MAX_ORDER = 60


def _taylor_step(c: complex, z0: np.ndarray, f: np.ndarray, df: np.ndarray, h: np.ndarray):
    """One Taylor step of z^2 f'' = (z^2 + c) f from z0 to z0 + h."""
    z2 = z0 * z0
    coef = [f, df]
    val = f + df * h
    der = df.copy()
    hp = h.copy()  # h^(n+1) for the term being added
    scale = np.maximum(np.abs(f), np.abs(df) * np.abs(h))
    small_run = 0
    for n in range(0, _TAYLOR_MAX_ORDER - 2):
        cm1 = coef[n - 1] if n >= 1 else 0.0
        cm2 = coef[n - 2] if n >= 2 else 0.0
        num = (z2 + c) * coef[n] + 2.0 * z0 * cm1 + cm2
        num = num - 2.0 * z0 * (n * (n + 1)) * coef[n + 1] - (n * (n - 1)) * coef[n]
        cn = num / (z2 * ((n + 1) * (n + 2)))
        coef.append(cn)
        der = der + (n + 2) * cn * hp
        hp = hp * h
        term = cn * hp
        val = val + term
        if np.all(np.abs(term) <= 1e-17 * scale):
            small_run += 1
            if small_run >= 2:
                break
        else:
            small_run = 0
    return val, der


def _radius_schedule(r_from: float, r_to: float) -> list[float]:
    """Radii visited when stepping from r_from to r_to with |h| <= min(1, 0.3 r)."""
    radii = [r_from]
    r = r_from
    if r_to > r_from:
        while r < r_to:
            r = min(r + min(1.0, 0.3 * r), r_to)
            radii.append(r)
    else:
        while r > r_to:
            r = max(r - min(1.0, 0.3 * r / 1.3), r_to)
            radii.append(r)
    return radii


def _march(c: complex, unit: np.ndarray, r_start: float, f: np.ndarray, df: np.ndarray, r_target: np.ndarray):
    """March along rays z = unit * r from r_start to the per-point radius r_target."""
    f = f.copy()
    df = df.copy()
    outward = bool(np.all(r_target >= r_start))
    bound = float(np.max(r_target)) if outward else float(np.min(r_target))
    radii = _radius_schedule(r_start, bound)
    r_now = np.full(r_target.shape, r_start)
    for r_next in radii[1:]:
        if outward:
            active = r_now < r_target
            r_new = np.minimum(r_next, r_target)
        else:
            active = r_now > r_target
            r_new = np.maximum(r_next, r_target)
        if not np.any(active):
            break
        idx = np.nonzero(active)[0]
        z0 = unit[idx] * r_now[idx]
        h = unit[idx] * (r_new[idx] - r_now[idx])
        f[idx], df[idx] = _taylor_step(c, z0, f[idx], df[idx], h)
        r_now[idx] = r_new[idx]
    return f, df


def _mid_real_order(nu: float, z: np.ndarray):
    """Scaled values for real order via the exponentially scaled AMOS routines."""
    sq = np.sqrt(z)
    pre_i = math.sqrt(math.pi / 2.0)
    pre_k = math.sqrt(2.0 / math.pi)
    i0, im1, ip1 = (special.ive(nu + d, z) for d in (0.0, -1.0, 1.0))
    phase = np.exp(-1j * z.imag)
    k0, km1, kp1 = (special.kve(nu + d, z) * phase for d in (0.0, -1.0, 1.0))
    Is = pre_i * sq * i0
    dIs = pre_i * (i0 / (2.0 * sq) + sq * 0.5 * (im1 + ip1))
    Ks = pre_k * sq * k0
    dKs = pre_k * (k0 / (2.0 * sq) - sq * 0.5 * (km1 + kp1))
    return Is, dIs, Ks, dKs


def _r_asym(m: complex) -> float:
    return R_ASYM + abs(m) ** 2


def _ik_scaled(m, z) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Scaled values for Re z >= 0: I e^{-Re z}, I' e^{-Re z}, K e^{Re z}, K' e^{Re z}."""
    m = _order(m)
    z = _cplx(z)
    shape = z.shape
    z = z.ravel()
    if np.any(z == 0):
        raise DomainError("z must be nonzero")
    if np.any(z.real < -1e-14 * np.abs(z)):
        raise BranchError("core evaluation requires Re z >= 0")
    r = np.abs(z)
    ra = _r_asym(m)
    Is = np.empty(z.shape, dtype=complex)
    dIs = np.empty_like(Is)
    Ks = np.empty_like(Is)
    dKs = np.empty_like(Is)
    ser = r <= R_SERIES
    if np.any(ser):
        zs = z[ser]
        I, dI, K, dK = _series_IK(m, zs)
        e = np.exp(zs.real)
        Is[ser], dIs[ser], Ks[ser], dKs[ser] = I / e, dI / e, K * e, dK * e
    asy = r >= ra
    if np.any(asy):
        Is[asy], dIs[asy], Ks[asy], dKs[asy] = _asym_IK_scaled(m, z[asy])
    mid = ~(ser | asy)
    if np.any(mid) and m.imag == 0.0:
        Is[mid], dIs[mid], Ks[mid], dKs[mid] = _mid_real_order(m.real, z[mid])
        mid[:] = False
    if np.any(mid):
        zm = z[mid]
        rm = np.abs(zm)
        c = m * m - 0.25
        unit = zm / rm
        # K: march inward from the asymptotic circle
        za = unit * ra
        _, _, Ka, dKa = _asym_IK_scaled(m, za)
        ea = np.exp(-za.real)
        K, dK = _march(c, unit, ra, Ka * ea, dKa * ea, rm)
        # I: direct series where it cannot cancel, else march outward
        I = np.empty(zm.shape, dtype=complex)
        dI = np.empty(zm.shape, dtype=complex)
        direct = rm - zm.real <= 3.0
        if np.any(direct):
            I[direct], dI[direct] = _series_I(m, zm[direct], np.log(zm[direct] / 2.0))
        far = ~direct
        if np.any(far):
            zs = unit[far] * R_SERIES
            I0, dI0 = _series_I(m, zs, np.log(zs / 2.0))
            I[far], dI[far] = _march(c, unit[far], R_SERIES, I0, dI0, rm[far])
        e = np.exp(zm.real)
        Is[mid], dIs[mid], Ks[mid], dKs[mid] = I / e, dI / e, K * e, dK * e
    return (Is.reshape(shape), dIs.reshape(shape), Ks.reshape(shape), dKs.reshape(shape))


# ---------------------------------------------------------------- public API


def _split_halfplane(z: np.ndarray):
    """Map z to zeta with Re zeta >= 0; returns (zeta, flipped mask, rotation sign)."""
    flipped = z.real < 0
    zeta = np.where(flipped, -z, z)
    sgn = np.where(z.imag >= 0, 1.0, -1.0)
    return zeta, flipped, sgn


def _unscale(vals: np.ndarray, rate: np.ndarray) -> np.ndarray:
    if np.any(rate > _MAX_EXP):
        raise OverflowError_("result exceeds the double-precision exponent range")
    return vals * np.exp(rate)


def calI_with_derivative(m, z):
    """(I_m(z), I_m'(z)) on the principal branch, |arg z| <= pi."""
    mm = _order(m)
    z_arr = _cplx(z)
    zeta, flipped, sgn = _split_halfplane(z_arr)
    Is, dIs, _, _ = _ik_scaled(mm, zeta)
    I = _unscale(Is, zeta.real)
    dI = _unscale(dIs, zeta.real)
    rot = np.exp(1j * np.pi * (mm + 0.5) * sgn)
    I = np.where(flipped, rot * I, I)
    dI = np.where(flipped, -rot * dI, dI)
    return _out(I, z), _out(dI, z)


def calI(m, z):
    """Hyperbolic 1d Bessel function I_m(z) = sqrt(pi) (z/2)^(m+1/2) F_m(z^2/4)."""
    return calI_with_derivative(m, z)[0]


def calK_with_derivative(m, z):
    """(K_m(z), K_m'(z)) on the principal branch, |arg z| <= pi."""
    mm = _order(m)
    z_arr = _cplx(z)
    zeta, flipped, sgn = _split_halfplane(z_arr)
    Is, dIs, Ks, dKs = _ik_scaled(mm, zeta)
    K = _unscale(Ks, -zeta.real)
    dK = _unscale(dKs, -zeta.real)
    if np.any(flipped):
        I = _unscale(Is, zeta.real)
        dI = _unscale(dIs, zeta.real)
        c = 1j * sgn * np.exp(-1j * np.pi * mm * sgn)
        Kf = 2.0 * I + c * K
        dKf = -(2.0 * dI + c * dK)
        K = np.where(flipped, Kf, K)
        dK = np.where(flipped, dKf, dK)
    return _out(K, z), _out(dK, z)


def calK(m, z):
    """1d Macdonald function K_m(z); even in m."""
    return calK_with_derivative(m, z)[0]


def calK_continued(m, z, sign: int):
    """K_m(e^{sign i pi} z) for |arg z| <= pi/2, with its z-derivative.

    Uses K_m(e^{+-i pi} z) = 2 I_m(z) +- i e^{-+i pi m} K_m(z).
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    z_arr = _cplx(z)
    if np.any(np.abs(np.angle(z_arr)) > np.pi / 2 + 1e-14):
        raise BranchError("continuation is only provided for |arg z| <= pi/2")
    mm = _canonical(_order(m))
    I, dI = calI_with_derivative(mm, z_arr)
    K, dK = calK_with_derivative(mm, z_arr)
    c = sign * 1j * np.exp(-sign * 1j * np.pi * mm)
    # d/dz of K_m(e^{i pi s} z) as a function of z
    return _out(2.0 * I + c * K, z), _out(2.0 * dI + c * dK, z)


def calIK_scaled(m, z):
    """Exponentially scaled values for Re z >= 0.

    Returns (I e^{-Re z}, I' e^{-Re z}, K e^{Re z}, K' e^{Re z}); never overflows.
    """
    return _ik_scaled(m, z)


def wronskian(f: complex, df: complex, g: complex, dg: complex) -> complex:
    """W(f, g) = f g' - f' g."""
    return f * dg - df * g
