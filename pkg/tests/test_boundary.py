from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import integrate_radial, square_well_scattering_length

from besselkit import boundary as bd
from besselkit import solutions as so
from besselkit import specfun as sf
from besselkit.errors import DomainError, TrivialBoundarySpace
from besselkit.model import CoulombCutoff, SquareWell, Zero
from besselkit.volterra import default_grid

WELL = SquareWell(2.0, 0.0, 1.0)
COUL = CoulombCutoff(1.0, 1.0)


# ------------------------------------------------------------- functionals


@pytest.mark.parametrize("Q", [Zero(), WELL, COUL])
def test_power_functional_on_principal_solution(Q):
    m = 0.3
    g = default_grid(1.0, Q, n=1024)
    u = so.build_u(m, 1.0, Q, g)
    w_minus, _ = bd.wronskian_at_zero(bd.BoundaryFunctional.power(-m), u)
    w_plus, _ = bd.wronskian_at_zero(bd.BoundaryFunctional.power(m), u)
    # W(x^{1/2-m}, x^{1/2+m} / Gamma(1+m)) = 2m / Gamma(1+m)
    assert abs(w_minus - 2 * m / sf.gamma(1 + m)) <= 1e-8
    assert abs(w_plus) <= 1e-8


def test_log_functional():
    g = default_grid(1.0, Zero(), n=1024)
    u = so.build_u(0.0, 1.0, Zero(), g)
    # W(x^{1/2} ln x, x^{1/2}) = -1
    w, _ = bd.wronskian_at_zero(bd.BoundaryFunctional.sqrt_log(), u)
    assert abs(w + 1) <= 1e-8


def test_functional_needs_one_source():
    with pytest.raises(DomainError):
        bd.BoundaryFunctional("bad")


# ------------------------------------------------------------------- bases


@pytest.mark.parametrize("m, Q, case", [
    (0.0, Zero(), "log_pair"),
    (0.0, COUL, "log_pair"),
    (0.3, WELL, "power_pair"),
    (-0.3, WELL, "power_pair"),
    (0.7, COUL, "partial_sum"),
    (0.4j, WELL, "imaginary_order"),
])
def test_basis_cases(m, Q, case):
    basis = bd.boundary_basis(m, Q)
    assert basis[0].case == case and basis[1].case == case


def test_partial_sum_order():
    # Coulomb is in the near-0 class for eps < 1: 2m / (n + 1) < 1 first holds at n = 1 for m = 0.7
    assert bd.boundary_basis(0.7, COUL)[0].params["n"] == 1


def test_trivial_boundary_space():
    with pytest.raises(TrivialBoundarySpace):
        bd.boundary_basis(1.2, WELL)


def test_basis_matrix_is_well_conditioned():
    m = 0.3
    g = default_grid(0.0, WELL, n=1024)
    basis = bd.boundary_basis(m, WELL, g)
    tests = (so.build_u(m, 0.0, WELL, g), so.build_u(-m, 0.0, WELL, g))
    M, cond = bd.basis_matrix(basis, tests)
    # M[i, j] = phi_i(test_j) with u_{+-m} ~ x^{1/2 +- m} / Gamma(1 +- m): a diagonal matrix
    assert abs(M[0, 0] - 2 * m / sf.gamma(1 + m)) <= 1e-8
    assert abs(M[1, 1] + 2 * m / sf.gamma(1 - m)) <= 1e-8
    assert abs(M[0, 1]) <= 1e-8 and abs(M[1, 0]) <= 1e-8
    assert cond < 10


# ------------------------------------------------------------- domain tests


def test_principal_solution_in_hm():
    g = default_grid(1.0, WELL, n=1024)
    assert bd.domain_test(bd.Hm(0.3), so.build_u(0.3, 1.0, WELL, g), WELL).in_domain
    assert not bd.domain_test(bd.Hm(0.3), so.build_u_bowtie(0.3, 1.0, WELL, grid=g), WELL).in_domain


def test_kappa_combination_in_hm_kappa():
    m, kap = 0.3, 0.8 - 0.2j
    g = default_grid(1.0, WELL, n=1024)
    c = kap * sf.gamma(1 - m) / sf.gamma(1 + m)
    f = so.build_u(m, 1.0, WELL, g).data + c * so.build_u(-m, 1.0, WELL, g).data
    assert bd.domain_test(bd.HmKappa(m, kap), f, WELL).in_domain
    assert not bd.domain_test(bd.Hm(m), f, WELL).in_domain
    assert bd.domain_test(bd.HmKappa(m, math.inf), so.build_u(-m, 1.0, WELL, g), WELL).in_domain


def test_h0nu_combination():
    nu = 0.5
    g = default_grid(1.0, WELL, n=1024)
    f = nu * so.build_u(0.0, 1.0, WELL, g).data + so.build_p0(1.0, WELL, g).data
    assert bd.domain_test(bd.H0Nu(nu), f, WELL).in_domain
    assert not bd.domain_test(bd.H0Nu(-nu), f, WELL).in_domain


def test_hmn_zero_energy_solution_in_domain():
    spec = bd.HmN(1, 0.7, 0.5)
    g = default_grid(0.0, COUL, n=2048)
    f = spec.zero_energy_solution(COUL, g)
    assert bd.domain_test(spec, f, COUL).in_domain
    assert not bd.domain_test(bd.HmN(1, 0.7, -0.5), f, COUL).in_domain


def test_min_and_max():
    g = default_grid(1.0, WELL, n=1024)
    u = so.build_u(0.3, 1.0, WELL, g)
    assert bd.domain_test(bd.RealizationSpec("Max", 0.3), u, WELL).in_domain
    assert not bd.domain_test(bd.RealizationSpec("Min", 0.3), u, WELL).in_domain


@pytest.mark.parametrize("kwargs", [
    dict(kind="Nope"),
    dict(kind="HmKappa", m=0.3),
    dict(kind="HmKappa", m=0.0, kappa=1.0),
    dict(kind="H0Nu", m=0.3, nu=1.0),
    dict(kind="HmN", m=0.3, kappa=1.0, n=-1),
    dict(kind="HmN", m=1.3, kappa=1.0),
])
def test_realization_invariants(kwargs):
    with pytest.raises(DomainError):
        bd.RealizationSpec(**kwargs)


# ------------------------------------------------------- scattering lengths


def test_scattering_length_half_order_well():
    V0 = 1.5
    r = bd.scattering_length(bd.Hm(0.5), SquareWell(V0, 0.0, 1.0))
    assert abs(r.a - square_well_scattering_length(V0)) <= 1e-7
    assert r.x_star == 5.0


def test_scattering_length_h0nu_against_ode():
    nu = 0.5
    x0 = 1e-8
    # near 0 the solution is x^{1/2} (ln x + nu) up to O(x^2) corrections
    y0 = math.sqrt(x0) * (math.log(x0) + nu)
    dy0 = (0.5 * (math.log(x0) + nu) + 1.0) / math.sqrt(x0)
    xs = np.array([2.0, 3.0])
    y = integrate_radial(0.0, 0.0, WELL, x0, y0, dy0, xs) / np.sqrt(xs)
    # outside the well y / sqrt(x) = A ln x + B and a = -B / A
    A = (y[1] - y[0]) / math.log(xs[1] / xs[0])
    B = y[0] - A * math.log(xs[0])
    r = bd.scattering_length(bd.H0Nu(nu), WELL)
    assert abs(r.a - (-B / A)) <= 1e-7


def test_scattering_length_zero_potential():
    assert bd.scattering_length(bd.Hm(0.5), Zero()).a == 0
    assert math.isinf(bd.scattering_length(bd.HmKappa(0.5, math.inf), Zero()).a.real)


def test_scattering_length_rejects_min():
    with pytest.raises(DomainError):
        bd.scattering_length(bd.RealizationSpec("Min", 0.3), WELL)
