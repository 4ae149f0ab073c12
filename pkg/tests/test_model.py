from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besselkit.errors import DomainError, WeightUndefined
from besselkit.model import (CoulombCutoff, ExpDecay, PowerLaw, SpectralPoint, SquareWell, Tabulated, Zero,
                             class_integral, eval_Q, in_class_infinity, in_class_zero, is_divergent,
                             max_class_eps, read_tabulated, weights, write_tabulated)


def test_coulomb_value():
    assert eval_Q(CoulombCutoff(2.0, 1.0), 0.5) == -4.0


def test_zero_and_outside_support():
    assert eval_Q(Zero(), 3.7) == 0.0
    assert eval_Q(SquareWell(4.0, 0.0, 1.0), 2.0) == 0.0
    assert eval_Q(SquareWell(4.0, 0.0, 1.0), 0.5) == -4.0


def test_one_sided_values_at_breakpoint():
    Q = SquareWell(4.0, 0.0, 1.0)
    assert Q(1.0, side=-1) == -4.0
    assert Q(1.0, side=1) == 0.0


def test_expdecay_and_powerlaw():
    assert abs(eval_Q(ExpDecay(2.0, 3.0), 0.5) - 2.0 * math.exp(-1.5)) <= 1e-15
    assert abs(eval_Q(PowerLaw(0.5, 1.5, 2.0), 0.25) - 0.5 * 0.25 ** -1.5) <= 1e-12
    assert eval_Q(PowerLaw(0.5, 1.5, 2.0), 3.0) == 0.0


def test_vectorized_evaluation():
    x = np.array([0.1, 0.5, 1.5])
    assert np.allclose(SquareWell(2.0, 0.2, 1.0)(x), [0, -2, 0])


def test_nonpositive_x_rejected():
    with pytest.raises(DomainError):
        eval_Q(Zero(), 0.0)


def test_invalid_parameters():
    with pytest.raises(DomainError):
        SquareWell(1.0, 2.0, 1.0)
    with pytest.raises(DomainError):
        ExpDecay(1.0, -1.0)
    with pytest.raises(DomainError):
        Tabulated((1.0,), (1.0,))
    with pytest.raises(DomainError):
        Tabulated((2.0, 1.0), (1.0, 1.0))


def test_tabulated_interpolates_in_log_x():
    T = Tabulated((1.0, 4.0), (0.0, 2.0))
    assert abs(eval_Q(T, 2.0) - 1.0) <= 1e-14  # ln 2 is halfway between ln 1 and ln 4
    assert eval_Q(T, 0.5) == 0.0  # constant below the first node
    assert eval_Q(T, 5.0) == 0.0


def test_tabulated_round_trip(tmp_path):
    T = Tabulated((0.1, 0.3, 1.0, 2.5), (-1.0, -2.0 + 0.5j, 1.0 / 3.0, 0.0), sing_exponent=0.0)
    path = tmp_path / "q.txt"
    write_tabulated(T, path)
    R = read_tabulated(path)
    assert R.nodes == T.nodes and R.values == T.values


def test_read_tabulated_rejects_bad_rows(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# x v\n1.0 2.0 3.0 4.0\n")
    with pytest.raises(DomainError):
        read_tabulated(path)


# ------------------------------------------------------------ classes


def test_coulomb_class_integral_closed_form():
    assert abs(class_integral(CoulombCutoff(1.0, 1.0), "zero", 0.5) - 2.0) <= 1e-8


def test_coulomb_class_divergent_at_eps_one():
    assert is_divergent(class_integral(CoulombCutoff(1.0, 1.0), "zero", 1.0))
    assert repr(class_integral(CoulombCutoff(1.0, 1.0), "zero", 1.0)) == "Divergent"


def test_zero_potential_class_integral():
    assert class_integral(Zero(), "zero", 1.5) == 0.0
    assert class_integral(Zero(), "infinity", 3.0, 2.0) == 0.0


def test_power_law_tail_is_analytic():
    # int_0^1 x^{1-0.3} x^{-1.5} dx = 1 / 0.2
    assert abs(class_integral(PowerLaw(1.0, 1.5, 1.0), "zero", 0.3) - 5.0) <= 1e-6


def test_log_weight():
    # int_0^1 x^{1-0.5} (1 + |ln x|) x^{-1} dx = 2 + 4
    assert abs(class_integral(CoulombCutoff(1.0, 1.0), "zero", 0.5, 1.0) - 6.0) <= 1e-7


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.4), st.floats(0.0, 0.5))
def test_class_zero_monotone_in_eps(eps, step):
    Q = PowerLaw(1.0, 0.5, 1.0)
    if is_divergent(class_integral(Q, "zero", eps + step)):
        return
    assert not is_divergent(class_integral(Q, "zero", eps))


@pytest.mark.parametrize("Q", [SquareWell(3.0, 0.5, 2.0), ExpDecay(-1.0, 0.7)])
@pytest.mark.parametrize("delta, beta", [(0.0, 0.0), (3.0, 0.0), (5.0, 2.0)])
def test_infinity_classes_finite(Q, delta, beta):
    assert in_class_infinity(Q, delta, beta)


def test_declared_decay_exponent():
    T = Tabulated((0.5, 1.0), (1.0, 1.0), decay_exponent=3.0)
    assert in_class_infinity(T, 1.5)


def test_max_class_eps():
    assert max_class_eps(CoulombCutoff(1.0, 1.0)) == 1.0
    assert max_class_eps(SquareWell(1.0, 0.0, 1.0)) == 2.0
    assert in_class_zero(CoulombCutoff(1.0, 1.0), 0.99)


# ------------------------------------------------------ spectral points


def test_spectral_point_clamps_and_rejects():
    assert SpectralPoint.of(-1e-16 + 1j).k == 1j
    assert SpectralPoint.of(1e-13).is_zero
    with pytest.raises(DomainError):
        SpectralPoint.of(-0.1)
    with pytest.raises(DomainError):
        SpectralPoint.of(complex(math.inf, 0))


def test_weights():
    assert np.allclose(weights(0.0).mu(np.array([0.3, 7.0])), [0.3, 7.0])
    w = weights(2.0)
    assert w.mu(3.0) == 0.5 and w.lam(3.0) == 1.0
    assert abs(weights(1.0).lam(math.exp(-1)) - 2.0) <= 1e-15
    with pytest.raises(WeightUndefined):
        weights(0.0).lam(1.0)
    assert abs(weights(1.5 + 2j).eta_plus(2.0) - math.exp(3.0)) <= 1e-12


def test_finely_tabulated_class_integral():
    # Q = -3 e^{-x} sampled on 200 nodes; int_0^1 x |Q| dx = 3 (1 - 2/e) up to interpolation error
    x = np.geomspace(1e-4, 2.0, 200)
    T = Tabulated(tuple(x), tuple(-3.0 * np.exp(-x)))
    assert abs(class_integral(T, "zero", 0.0) - 3 * (1 - 2 / math.e)) <= 1e-4
