import math

import numpy as np
import pytest

from shootdeg.errors import InvalidInput
from shootdeg.integrator import (
    Blowup,
    NoHitUpTo,
    ShotConfig,
    WallHit,
    integrate,
    residual,
    taylor_start,
)
from shootdeg.system import builtin

A_BUBBLE = 3 ** 0.25


def bubble(r):
    return A_BUBBLE / np.sqrt(1 + np.asarray(r) ** 2)


def test_bubble_accuracy_and_residual():
    spec = builtin("lane_emden_scalar", {"p": 5, "n": 3})
    traj, out = integrate(spec, [A_BUBBLE], ShotConfig(r_max=5.0))
    assert isinstance(out, NoHitUpTo)
    r = np.linspace(0, 5, 2001)
    err = np.abs(traj.u(r)[:, 0] - bubble(r)).max() / A_BUBBLE
    assert err <= 1e-6
    assert residual(traj, spec) <= 1e-6


def endpoint_error(tol):
    spec = builtin("lane_emden_scalar", {"p": 5, "n": 3})
    traj, _ = integrate(spec, [A_BUBBLE], ShotConfig(r_max=5.0, rel_tol=tol, abs_tol=tol * 1e-2))
    return abs(traj.y[-1, 0] - bubble(5.0)) / A_BUBBLE, len(traj.r) - 1


def empirical_order(tols):
    errs, steps = zip(*(endpoint_error(t) for t in tols))
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    return -slope, errs


def test_convergence_order():
    order, errs = empirical_order([1e-6, 1e-7, 1e-8, 1e-9])
    assert all(e1 > e2 for e1, e2 in zip(errs, errs[1:]))
    assert order >= 4


def test_linear_lane_emden_first_zero_is_pi():
    # p = 1: u = sin(r)/r
    spec = builtin("lane_emden_scalar", {"p": 1, "n": 3})
    traj, out = integrate(spec, [1.0])
    assert isinstance(out, WallHit)
    assert out.r_alpha == pytest.approx(math.pi, rel=1e-8)
    r = np.linspace(0.1, 3.0, 50)
    np.testing.assert_allclose(traj.u(r)[:, 0], np.sin(r) / r, atol=1e-8)


def test_cubic_lane_emden_first_zero():
    # tabulated first zero of the index-3 Lane-Emden function
    spec = builtin("lane_emden_scalar", {"p": 3, "n": 3})
    _, out = integrate(spec, [1.0])
    assert out.r_alpha == pytest.approx(6.89684862, abs=2e-8)
    assert out.hit_set == (0,)
    assert out.du_end[0] < 0


def test_zero_system():
    spec = builtin("zero")
    traj, out = integrate(spec, [1.0, 2.0], ShotConfig(r_max=100.0))
    assert isinstance(out, NoHitUpTo) and out.r_max == 100.0
    assert residual(traj, spec) <= 1e-12


def test_invalid_alpha():
    spec = builtin("sign_changing", {"p": 5})
    with pytest.raises(InvalidInput):
        integrate(spec, [0.0, 1.0])
    with pytest.raises(InvalidInput):
        integrate(spec, [1.0])


def test_taylor_start():
    spec = builtin("lane_emden_scalar", {"p": 5, "n": 3})
    u, du = taylor_start(spec, [A_BUBBLE], 1e-3)
    assert u[0] == pytest.approx(bubble(1e-3), rel=1e-12)
    assert du[0] == pytest.approx(-A_BUBBLE * 1e-3 / (1 + 1e-6) ** 1.5, rel=1e-5)


def test_first_hit_stable_under_tighter_tolerances():
    spec = builtin("sign_changing", {"p": 5})
    cfg = ShotConfig()
    tight = cfg.replace(rel_tol=cfg.rel_tol / 100, abs_tol=cfg.abs_tol / 100)
    for alpha in ([0.5, 1.5], [1.2, 0.8], [1.9, 0.1]):
        _, a = integrate(spec, alpha, cfg)
        _, b = integrate(spec, alpha, tight)
        assert isinstance(a, WallHit) and isinstance(b, WallHit)
        assert abs(a.r_alpha - b.r_alpha) <= 1e-6 * b.r_alpha


def test_simultaneous_hit_set():
    spec = builtin("hls", {"p": 3, "q": 3})
    _, out = integrate(spec, [1.0, 1.0])
    assert isinstance(out, WallHit)
    assert out.hit_set == (0, 1)


def test_monotone_mass():
    spec = builtin("sign_changing", {"p": 5})
    for alpha in ([0.5, 1.5], [1.0, 1.0], [1.7, 0.3]):
        traj, _ = integrate(spec, alpha)
        mass = traj.y[:, :2].sum(axis=1)
        assert np.all(np.diff(mass) <= 1e-9)
        assert mass.max() <= sum(alpha) + 1e-9


def test_blowup_outcome():
    spec = builtin("custom", {}, exprs=["-u1^3"])
    _, out = integrate(spec, [1.0])
    assert isinstance(out, Blowup)


def test_continuity_in_alpha():
    spec = builtin("sign_changing", {"p": 5})
    base = np.array([0.8, 1.2])
    _, ref = integrate(spec, base)
    devs = []
    for h in (1e-2, 1e-3, 1e-4):
        _, out = integrate(spec, base + np.array([h, -h]))
        devs.append(np.abs(np.array(out.u_end) - np.array(ref.u_end)).max())
    assert devs[0] > devs[1] > devs[2]
    assert all(d1 / d2 < 100 for d1, d2 in zip(devs, devs[1:]))


def test_trajectory_csv(tmp_path):
    spec = builtin("sign_changing", {"p": 5})
    traj, _ = integrate(spec, [1.0, 1.0])
    path = tmp_path / "t.csv"
    traj.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,u1,u2,du1,du2"
    assert len(lines) == len(traj.r) + 1
    row = [float(x) for x in lines[5].split(",")]
    assert row[0] == traj.r[4] and row[1] == traj.y[4, 0]


def test_reentrant_concurrent_shots():
    from concurrent.futures import ThreadPoolExecutor

    spec = builtin("sign_changing", {"p": 5})
    alphas = [[0.2 + 0.1 * i, 1.8 - 0.1 * i] for i in range(8)]
    serial = [integrate(spec, a)[1].r_alpha for a in alphas]
    with ThreadPoolExecutor(4) as ex:
        par = list(ex.map(lambda a: integrate(spec, a)[1].r_alpha, alphas))
    assert serial == par
