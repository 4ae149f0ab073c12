from __future__ import annotations

import cmath

import numpy as np
import pytest

from oracles import square_well_bound_states

from besselkit import jost_spectral as js
from besselkit import solutions as so
from besselkit import unperturbed as up
from besselkit.errors import DomainError, MethodUnavailable
from besselkit.model import ExpDecay, SquareWell, Zero
from besselkit.volterra import GridFunction, default_grid


def well_jost_half(V0: float, k: complex) -> complex:
    """Jost function of the unit well at m = 1/2, matched by hand at x = 1.

    Inside, u = (2/sqrt(pi)) sin(s x)/s with s^2 = V0 - k^2; outside v = (sqrt(pi)/2) e^{-kx}."""
    s = cmath.sqrt(V0 - k * k)
    return cmath.exp(-k) * (cmath.cos(s) + k * cmath.sin(s) / s)


@pytest.mark.parametrize("k", [0.5, 1.7, 1.0 + 0.8j, 3.0 - 0.5j])
def test_square_well_jost_closed_form(k):
    V0 = 6.0
    got = js.jost(0.5, k, SquareWell(V0, 0.0, 1.0)).value
    ref = well_jost_half(V0, k)
    assert abs(got - ref) <= 1e-8 * max(1.0, abs(ref))


def test_zero_potential_jost_is_one():
    r = js.jost(0.3, 1.0, Zero())
    assert r.value == 1.0 and r.cross_check_dev == 0.0


def test_methods_agree_for_noncompact_q():
    Q = ExpDecay(-2.0, 1.0)
    a = js.jost(0.3, 1.2 + 0.3j, Q, "WronskianMatch")
    b = js.jost(0.3, 1.2 + 0.3j, Q, "OverlapFormula")
    assert abs(a.value - b.value) <= 1e-7
    assert a.cross_check_dev <= 1e-7


def test_jost_vanishes_at_bound_state():
    V0 = 6.0
    k = square_well_bound_states(V0)[0]
    assert abs(js.jost_value(0.5, k, SquareWell(V0, 0.0, 1.0))) <= 1e-9


def test_zero_energy_method():
    # k -> 0 limit of the closed form: cos sqrt(V0)
    V0 = 2.0
    r = js.jost(0.5, 0.0, SquareWell(V0, 0.0, 1.0), "ZeroEnergy")
    assert abs(r.value - np.cos(np.sqrt(V0))) <= 1e-7


def test_method_availability():
    Q = SquareWell(2.0, 0.0, 1.0)
    with pytest.raises(MethodUnavailable):
        js.jost(0.5, 1.0, Q, "ZeroEnergy")
    with pytest.raises(MethodUnavailable):
        js.jost(0.5, 0.0, Q, "WronskianMatch")
    with pytest.raises(MethodUnavailable):
        js.jost(-0.3, 0.0, Q, "ZeroEnergy")
    with pytest.raises(DomainError):
        js.jost(0.5, 1.0, Q, "Bogus")


def test_find_zeros_of_zero_potential():
    assert js.find_jost_zeros(0.5, Zero(), (0.1, 2.0, -1.0, 1.0)) == []


def test_find_zeros_matches_oracle():
    V0 = 6.0
    zeros = js.find_jost_zeros(0.5, SquareWell(V0, 0.0, 1.0), (0.2, 3.0, -0.5, 0.5), samples=256)
    ref = square_well_bound_states(V0)
    assert len(zeros) == len(ref) == 1
    assert abs(zeros[0][0] - ref[0]) <= 1e-8 and zeros[0][1] == 1


# --------------------------------------------------------- perturbed kernels


def test_pure_kernel_without_potential_is_bowtie():
    m, k = 0.3, 1.0 + 0.2j
    x, y = np.array([0.2, 1.5, 3.0]), np.array([0.9, 0.4, 3.5])
    K = js.eval_perturbed_kernel(js.PerturbedKernelSpec("Pure", m, k), Zero(), x, y)
    ref = up.eval_kernel(up.KernelSpec("Bowtie", m, k), x, y)
    assert np.max(np.abs(K / ref - 1)) <= 1e-6


def test_perturbed_kernel_is_symmetric():
    Q = SquareWell(2.0, 0.0, 1.0)
    K = js.perturbed_kernel(js.PerturbedKernelSpec("MixedKappa", 0.3, 1.0, kappa=0.4), Q)
    x, y = np.array([0.1, 0.7, 2.0]), np.array([2.0, 0.05, 0.6])
    assert np.allclose(K(x, y), K(y, x), rtol=1e-14)


def test_mixed_kappa_zero_is_pure():
    Q = SquareWell(2.0, 0.0, 1.0)
    g = default_grid(1.0, Q, n=1024)
    a = js.perturbed_kernel(js.PerturbedKernelSpec("MixedKappa", 0.3, 1.0, kappa=0.0), Q, g)
    b = js.perturbed_kernel(js.PerturbedKernelSpec("Pure", 0.3, 1.0), Q, g)
    x, y = np.array([0.1, 0.7]), np.array([2.0, 0.3])
    assert np.allclose(a(x, y), b(x, y), rtol=1e-13)


def test_resolvent_inverts_operator():
    Q = SquareWell(2.0, 0.0, 1.0)
    m, k = 0.3, 1.0
    g = default_grid(k, Q, n=2048)
    x = g.nodes
    rhs = np.where((x > 1.0) & (x < 2.0), np.sin(np.pi * (x - 1.0)) ** 4, 0.0)
    drhs = np.where((x > 1.0) & (x < 2.0), 4 * np.pi * np.sin(np.pi * (x - 1.0)) ** 3 * np.cos(np.pi * (x - 1.0)), 0.0)
    f = js.resolvent_apply(js.PerturbedKernelSpec("Pure", m, k), Q, GridFunction(g, rhs, drhs))
    assert so.relative_residual(f, m, k, Q, rhs) <= 1e-6


@pytest.mark.parametrize("kwargs", [
    dict(realization="Nope", m=0.3, k=1.0),
    dict(realization="MixedKappa", m=0.3, k=1.0),
    dict(realization="MixedNu", m=0.3, k=1.0, nu=1.0),
    dict(realization="MixedN", m=0.3, k=1.0, kappa=1.0),
    dict(realization="MixedKappa", m=0.3, k=0.0, kappa=1.0),
])
def test_perturbed_spec_invariants(kwargs):
    with pytest.raises(DomainError):
        js.PerturbedKernelSpec(**kwargs)


def test_kernel_needs_nonzero_k():
    with pytest.raises(MethodUnavailable):
        js.perturbed_kernel(js.PerturbedKernelSpec("Pure", 0.3, 0.0), Zero())
