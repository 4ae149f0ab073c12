from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import calI_ref, calK_ref

from besselkit import specfun as sf
from besselkit.errors import BranchError, DomainError, PoleError


# ----------------------------------------------------------- Gamma family


@pytest.mark.parametrize("z, expected", [(1.0, 1.0), (5.0, 24.0), (0.5, math.sqrt(math.pi))])
def test_gamma_values(z, expected):
    assert abs(sf.gamma(z) - expected) <= 1e-14 * expected


@pytest.mark.parametrize("z", [0.3 + 0.2j, -2.7 + 1j, 7.5 - 3j, -0.5, 12.25])
def test_gamma_matches_mpmath(z):
    assert abs(sf.gamma(z) / complex(mp.gamma(z)) - 1) <= 1e-13


def test_gamma_poles():
    assert sf.rgamma(0.0) == 0
    assert sf.rgamma(-3.0) == 0
    with pytest.raises(PoleError):
        sf.gamma(-2.0)


@pytest.mark.parametrize("z, expected", [
    (1.0, -0.57721566490153286),
    (2.0, 1 - 0.57721566490153286),
    (0.5, -0.57721566490153286 - 2 * math.log(2)),
])
def test_digamma_values(z, expected):
    assert abs(sf.digamma(z) - expected) <= 1e-14


@pytest.mark.parametrize("z", [0.3 + 1j, -1.7 + 1j, 25.0 - 4j])
def test_digamma_matches_mpmath(z):
    assert abs(sf.digamma(z) - complex(mp.digamma(z))) <= 1e-13 * max(1, abs(complex(mp.digamma(z))))


def test_loggamma_large_argument():
    z = 150.0 + 20j
    ref = complex(mp.loggamma(z))
    assert abs(sf.loggamma(z) - ref) <= 1e-12 * abs(ref)


# ------------------------------------------------------------------- F_m


def test_bigF_at_zero_argument():
    for m in (0.0, 0.3, 2.5 + 1j):
        assert abs(sf.bigF(m, 0.0) - sf.rgamma(m + 1)) <= 1e-15


def test_bigF_equals_I0():
    # I_0(2) through I_m(z) = (z/2)^m F_m(z^2/4)
    assert abs(sf.bigF(0, 1) - 2.27958530233607) <= 1e-13


def test_bigF_integer_reflection():
    w = 0.3
    assert abs(sf.bigF(-2, w) - w * w * sf.bigF(2, w)) <= 1e-12


def test_bigF_against_hypergeometric_oracle():
    for m, w in ((0.3, -50 + 3j), (1.7 - 0.2j, 4.0), (-0.4, 0.01)):
        ref = complex(mp.hyp0f1(m + 1, w) / mp.gamma(m + 1))
        assert abs(sf.bigF(m, w) - ref) <= 1e-12 * max(1, abs(ref))


@pytest.mark.parametrize("m, w", [(0, 0.25), (1, 1.0), (0.3 + 0.1j, 2.0)])
def test_dF_dm_central_difference(m, w):
    h = 1e-6
    fd = (sf.bigF(m + h, w) - sf.bigF(m - h, w)) / (2 * h)
    assert abs(sf.dF_dm(m, w) - fd) <= 1e-8


def test_dF_dm_at_zero_argument():
    m = 0.7
    assert abs(sf.dF_dm(m, 0.0) + sf.digamma(m + 1) / sf.gamma(m + 1)) <= 1e-14


# ------------------------------------------------------------- I and K


def test_I_half_is_sinh():
    assert abs(sf.calI(0.5, 1.0) - 1.17520119364380) <= 1e-13


def test_K_half_is_exp():
    assert abs(sf.calK(0.5, 2.0) - 0.13533528323661) <= 1e-13


def test_I_small_z_asymptotics():
    m = 0.4 + 0.2j
    for z in (1e-3, 1e-5):
        lead = math.sqrt(math.pi) / sf.gamma(m + 1) * (z / 2) ** (m + 0.5)
        assert abs(sf.calI(m, z) / lead - 1) <= 2 * z * z


def test_I_integer_order_reflection():
    z = 0.7 + 0.3j
    assert abs(sf.calI(2, z) - sf.calI(-2, z)) <= 1e-14 * abs(sf.calI(2, z))


def test_K_even_in_m():
    assert abs(sf.calK(0.3 + 0.2j, 1.1) - sf.calK(-0.3 - 0.2j, 1.1)) <= 1e-12


def test_K0_small_z_log():
    for z in (1e-2, 1e-3):
        approx = -math.sqrt(2 * z / math.pi) * (math.log(z / 2) + np.euler_gamma)
        assert abs(sf.calK(0, z) - approx) <= 5 * z ** 2.5 * abs(math.log(z))


def test_I_K_against_mpmath_all_regimes():
    rng = np.random.default_rng(7)
    for _ in range(60):
        m = complex(rng.uniform(-3, 3), rng.uniform(-1, 1))
        z = 10 ** rng.uniform(-4, 1.8) * np.exp(1j * rng.uniform(-np.pi / 2, np.pi / 2))
        assert abs(sf.calI(m, z) / calI_ref(m, z) - 1) <= 1e-10
        assert abs(sf.calK(m, z) / calK_ref(m, z) - 1) <= 1e-10


def test_left_half_plane_principal_branch():
    z = -2 + 1j
    assert abs(sf.calK(0.3, z) / calK_ref(0.3, z) - 1) <= 1e-11
    z = -25 + 1j
    assert abs(sf.calI(0.3, z) / calI_ref(0.3, z) - 1) <= 1e-11


def test_K_continued_wronskian_is_two():
    for m in (0.3, 1.0, 0.2 + 0.5j):
        for z in (0.5, 3.0 + 1j, 12.0 - 4j):
            K, dK = sf.calK_with_derivative(m, z)
            for s in (1, -1):
                Kc, dKc = sf.calK_continued(m, z, s)
                # dKc is the z-derivative of z -> K(e^{i pi s} z)
                assert abs(sf.wronskian(K, dK, Kc, dKc) - 2) <= 1e-9 * max(1, abs(K * dKc))


def test_K_continued_rejects_outside_sector():
    with pytest.raises(BranchError):
        sf.calK_continued(0.3, -1 + 0.1j, 1)


def test_zero_argument_rejected():
    with pytest.raises(DomainError):
        sf.calK(0.3, 0.0)


def test_global_bound_sanity():
    rng = np.random.default_rng(11)
    ratios = []
    for _ in range(80):
        m = complex(rng.uniform(-1.5, 1.5), rng.uniform(-0.5, 0.5))
        z = 10 ** rng.uniform(-3, 1.5) * np.exp(1j * rng.uniform(-np.pi / 2, np.pi / 2))
        bound = min(1.0, abs(z)) ** (0.5 - abs(m.real)) * math.exp(-z.real)
        ratios.append(abs(sf.calK(m, z)) / bound)
    assert max(ratios) < 50.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 2.5), st.floats(-0.8, 0.8), st.floats(1e-3, 40.0), st.floats(-1.5, 1.5))
def test_wronskian_K_I_property(mr, mi, r, th):
    m, z = complex(mr, mi), r * np.exp(1j * th)
    I, dI = sf.calI_with_derivative(m, z)
    K, dK = sf.calK_with_derivative(m, z)
    assert abs(sf.wronskian(K, dK, I, dI) - 1) <= 1e-9


def test_array_input_shape_preserved():
    z = np.array([[0.5, 1.0], [3.0, 30.0]])
    assert sf.calK(0.3, z).shape == (2, 2)
    assert isinstance(sf.calK(0.3, 1.0), complex)
