import math

import numpy as np
import pytest

from shootdeg.dirichlet import solve_dirichlet_scalar, solve_dirichlet_system
from shootdeg.errors import InvalidInput, NotADirichletSolution, QuadratureFailure, UnsupportedSystem
from shootdeg.integrator import ShotConfig, integrate
from shootdeg.pohozaev import (
    BallSolution,
    integrate_1d,
    merged_coefficients,
    nonexistence_certificate,
    radial_integral,
    rellich_scalar,
    scalar_coefficient,
    sphere_area,
    verify_cross_identity,
    verify_merged_identity,
    verify_scalar_identity,
)
from shootdeg.system import builtin


@pytest.fixture(scope="module")
def scalar_ball():
    res = solve_dirichlet_scalar(3, 3, 1.0)
    assert res.found
    return res.solution


def test_sphere_area():
    assert sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sphere_area(4) == pytest.approx(2 * math.pi ** 2, rel=1e-15)


def test_radial_integral_volumes():
    one = lambda r: np.ones_like(r)
    assert radial_integral(one, 3, 1.0) == pytest.approx(4 * math.pi / 3, rel=1e-14)
    assert radial_integral(lambda r: r ** 2, 3, 1.0) == pytest.approx(4 * math.pi / 5, rel=1e-14)
    assert radial_integral(one, 4, 2.0) == pytest.approx(8 * math.pi ** 2, rel=1e-14)


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("m", range(9))
def test_moments_exact(n, m):
    R = 1.7
    got = radial_integral(lambda r: r ** m, n, R)
    exact = sphere_area(n) * R ** (m + n) / (m + n)
    assert abs(got - exact) <= 1e-12 * exact


def test_quadrature_error_estimate_and_failure():
    val, err = radial_integral(lambda r: np.sqrt(r), 3, 1.0, with_error=True)
    assert val == pytest.approx(4 * math.pi / 3.5, rel=1e-10)
    assert err <= 1e-10 * (1 + val)
    with pytest.raises(QuadratureFailure):
        integrate_1d(lambda r: 1.0 / np.abs(r - 0.3), 0.0, 1.0)


def test_coefficient_table():
    assert scalar_coefficient(3, 5) == 0
    assert scalar_coefficient(3, 3) == 0.25
    assert scalar_coefficient(4, 3) == 0
    assert merged_coefficients(3, 5, 7) == {"p": 0.0, "q": -0.125}
    assert scalar_coefficient(5, 2) == pytest.approx(5 / 3 - 1.5)


def test_scalar_identity(scalar_ball):
    rep = verify_scalar_identity(scalar_ball, 3)
    assert rep.residual <= 1e-4
    assert rep.rhs > 0


def test_cross_equals_twice_rellich(scalar_ball):
    cross = verify_cross_identity(scalar_ball)
    rel = rellich_scalar(scalar_ball)
    assert abs(cross.lhs / 2 - rel.lhs) <= 1e-8 * abs(rel.lhs)
    assert abs(cross.rhs / 2 - rel.rhs) <= 1e-8 * abs(rel.rhs)
    assert cross.residual <= 1e-4 and rel.residual <= 1e-4


def test_zero_profiles():
    spec = builtin("zero")
    traj, _ = integrate(spec, [1.0, 1.0], ShotConfig(r_max=2.0))
    # a constant profile has vanishing gradient: every term is zero
    rep = verify_cross_identity(BallSolution(1.0, 3, traj))
    assert rep.lhs == 0 and rep.rhs == 0 and rep.residual == 0


def test_not_a_dirichlet_solution():
    spec = builtin("lane_emden_scalar", {"p": 3})
    traj, _ = integrate(spec, [1.0])
    with pytest.raises(NotADirichletSolution):
        verify_scalar_identity(BallSolution(2.0, 3, traj, spec=spec), 3)


def test_synthetic_merged_is_finite(scalar_ball):
    rep = verify_merged_identity(scalar_ball, "sign_changing", 3, synthetic=True)
    assert rep.synthetic
    assert math.isfinite(rep.lhs) and math.isfinite(rep.rhs) and math.isfinite(rep.residual)


def test_merged_argument_checks(scalar_ball):
    with pytest.raises(InvalidInput):
        verify_merged_identity(scalar_ball, "sign_changing", 3, theta=0.3, synthetic=True)
    with pytest.raises(UnsupportedSystem):
        verify_merged_identity(scalar_ball, "hls", 3, synthetic=True)


@pytest.fixture(scope="module")
def subcritical_pair():
    spec = builtin("sign_changing", {"p": 2, "n": 5})
    res = solve_dirichlet_system(spec, 1.0)
    assert res.found
    return spec, res.solution


def test_merged_identity_subcritical_pair(subcritical_pair):
    _, sol = subcritical_pair
    rep = verify_merged_identity(sol, "sign_changing", 2)
    assert rep.residual <= 1e-3
    assert rep.rhs > 0


def test_merged_identity_with_grad_u_squared_does_not_balance(subcritical_pair):
    # the boundary term built from u'(R)^2 instead of v'(R)^2 misses by far more
    # than the quadrature error: the identity needs v'(R)^2
    _, sol = subcritical_pair
    rep = verify_merged_identity(sol, "sign_changing", 2)
    d = sol.boundary_derivatives
    area = sphere_area(sol.n) * sol.R ** sol.n
    alt = 0.5 * area * d[0] ** 2 + area * d[0] * d[1]
    assert abs(alt - rep.lhs) / abs(rep.lhs) > 1e-2


def test_cross_identity_hls_pair():
    spec = builtin("hls", {"p": 3, "q": 3})
    res = solve_dirichlet_system(spec, 1.0)
    assert res.found
    rep = verify_cross_identity(res.solution)
    assert rep.residual <= 1e-4 and rep.rhs > 0


@pytest.mark.parametrize("name,params,status", [
    ("sign_changing", {"p": 5}, "Certified"),
    ("sign_changing", {"p": 6}, "Certified"),
    ("sign_changing", {"p": 3}, "Inconclusive"),
    ("sign_changing_pq", {"p": 5, "q": 7}, "Certified"),
    ("sign_changing_pq", {"p": 3, "q": 7}, "Inconclusive"),
    ("potential_type1", {"p": 7}, "Certified"),
    ("potential_type2", {"p": 7}, "Certified"),
    ("potential_type2", {"p": 5}, "Inconclusive"),
    ("lane_emden_scalar", {"p": 5}, "Inconclusive"),
    ("lane_emden_scalar", {"p": 6}, "Certified"),
])
def test_certificates(name, params, status):
    cert = nonexistence_certificate(builtin(name, params))
    assert cert.status == status, cert.text()


def test_certificate_text_and_unsupported():
    cert = nonexistence_certificate(builtin("sign_changing", {"p": 5}))
    assert "coefficient n/(p+1) - (n-2)/2 = 0" in cert.text()
    cert = nonexistence_certificate(builtin("potential_type1", {"p": 7}))
    assert cert.margin > 0 and cert.samples > 4096
    with pytest.raises(UnsupportedSystem):
        nonexistence_certificate(builtin("hls", {"p": 3}))
