"""Acceptance criteria AC1-AC10, each at its stated tolerance and runtime budget."""

import random

import numpy as np
from scipy.optimize import brentq

from acceptance_log import criterion
from reference_eval import reference_eval
from shootdeg.config import parse_config
from shootdeg.degree import cached_map, degree, find_zero, homotopy_degrees
from shootdeg.dirichlet import solve_dirichlet_scalar, solve_dirichlet_system
from shootdeg.errors import DomainError
from shootdeg.expr import BinOp, Neg, Num, Param, Var, evaluate, parse, to_string
from shootdeg.integrator import NoHitUpTo, ShotConfig, WallHit, integrate
from shootdeg.pohozaev import (
    nonexistence_certificate,
    radial_integral,
    rellich_scalar,
    sphere_area,
    verify_cross_identity,
    verify_scalar_identity,
)
from shootdeg.simplex import SimplexGrid, random_simplex_points
from shootdeg.system import builtin, check_assumptions, check_control_inequality, eval_f
from shootdeg.target import dynamic_estimate_check, phi_map, transversality_check

A_BUBBLE = 3 ** 0.25


def bubble(r):
    return A_BUBBLE / np.sqrt(1 + np.asarray(r) ** 2)


def test_ac1_integrator_oracle():
    with criterion("AC1", "bubble oracle and convergence order", 1.0) as facts:
        spec = builtin("lane_emden_scalar", {"p": 5, "n": 3})
        traj, out = integrate(spec, [A_BUBBLE], ShotConfig(r_max=5.0))
        r = np.linspace(0, 5, 2001)
        err = np.abs(traj.u(r)[:, 0] - bubble(r)).max() / A_BUBBLE
        errs, steps = [], []
        for tol in (1e-6, 1e-7, 1e-8, 1e-9):
            t, _ = integrate(spec, [A_BUBBLE], ShotConfig(r_max=5.0, rel_tol=tol, abs_tol=tol * 1e-2))
            errs.append(abs(t.y[-1, 0] - bubble(5.0)) / A_BUBBLE)
            steps.append(len(t.r) - 1)
        order = -np.polyfit(np.log(steps), np.log(errs), 1)[0]
        facts.update(rel_err=f"{err:.2e}", order=f"{order:.2f}")
        assert isinstance(out, NoHitUpTo)
        assert err <= 1e-6
        assert order >= 4


def test_ac2_two_component_oracle():
    with criterion("AC2", "scaled bubble pair for the sign-changing system", 2.0) as facts:
        p = 5
        poly = lambda x: x ** (p * p - 1) - x ** (p - 1) - 1
        assert poly(1.0) < 0 < poly(2.0)
        lam = brentq(poly, 1.0, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        nu = lam ** p
        spec = builtin("sign_changing", {"p": p, "n": 3})
        traj, out = integrate(spec, [lam * A_BUBBLE, nu * A_BUBBLE], ShotConfig(r_max=10.0))
        r = np.linspace(0, 10, 2001)
        exact = np.stack([lam * bubble(r), nu * bubble(r)], axis=1)
        err = (np.abs(traj.u(r) - exact) / exact).max()
        facts.update(lam=f"{lam:.15g}", rel_err=f"{err:.2e}")
        assert isinstance(out, NoHitUpTo)
        assert err <= 1e-5


AC3_SYSTEMS = [
    ("sign_changing", {"p": 5, "n": 3}),
    ("sign_changing_pq", {"p": 5, "q": 7, "n": 3}),
    ("potential_type1", {"p": 7, "n": 3}),
    ("potential_type2", {"p": 7, "n": 3}),
]


def test_ac3_assumption_suite():
    with criterion("AC3", "decay and control checks on four systems", 5.0) as facts:
        oks = []
        for name, params in AC3_SYSTEMS:
            rep = check_assumptions(builtin(name, params), box_max=10.0, samples=10_000, seed=0)
            oks.append(rep.ok)
            assert rep.decay_ok, name
            assert all(e.ok for e in rep.control_entries), name
        facts["ok"] = oks
        assert all(oks)


def test_ac4_dynamic_estimate():
    with criterion("AC4", "dynamic estimate near abar = (0, 1.5)", 10.0) as facts:
        spec = builtin("sign_changing", {"p": 5, "n": 3})
        abar = (0.0, 1.5)
        entry = check_control_inequality(spec, abar, 0.1, samples=10_000, seed=0)
        assert entry.ok
        C = entry.C_est
        L = 2
        B = max(2 * (3 + L) * C, (3 + C) * L)
        ratios = []
        for delta in (1e-2, 1e-3, 1e-4):
            rep = dynamic_estimate_check(spec, abar, C, delta, samples=16, seed=0)
            assert rep.evaluated > 0 and rep.skipped == 0
            assert rep.bound == B
            assert rep.worst_ratio <= B
            assert rep.ok
            ratios.append((rep.ratio_vs_claim, rep.ratio_vs_proof))
        facts.update(C=C, B=B, ratios_claim_proof=[(f"{a:.3g}", f"{b:.3g}") for a, b in ratios])


def test_ac5_degree_suite():
    with criterion("AC5", "degrees of identity, flip, constant and homotopy", 5.0) as facts:
        ident = lambda x: x
        degs = {}
        for L in (2, 3):
            for k in (8, 32):
                degs[f"id L={L} k={k}"] = degree(ident, np.full(L, 1 / L), SimplexGrid(1.0, L, k)).degree
        degs["flip"] = degree(lambda x: x[::-1], [0.5, 0.5], SimplexGrid(1.0, 2, 8)).degree
        degs["const"] = degree(lambda x: np.array([1.0, 0.0]), [0.5, 0.5], SimplexGrid(1.0, 2, 8)).degree
        fmap = cached_map(phi_map(builtin("sign_changing", {"p": 5, "n": 3})))
        hom = [r.degree for r in homotopy_degrees(fmap, [1.0, 1.0], SimplexGrid(2.0, 2, 8))]
        facts.update(homotopy=hom, flip=degs["flip"], const=degs["const"])
        assert all(degs[k] == 1 for k in degs if k.startswith("id"))
        assert degs["flip"] == -1 and degs["const"] == 0
        assert len(hom) == 5 and len(set(hom)) == 1


def test_ac6_ground_state_search():
    with criterion("AC6", "ground-state bisection on the sign-changing system", 30.0) as facts:
        a = 2.0
        cand = find_zero(builtin("sign_changing", {"p": 5, "n": 3}), a, budget=200)
        lo, hi = cand.bracket
        width = float(np.abs(hi - lo).max())
        facts.update(achieved_r=f"{cand.achieved_r:.3g}", width=f"{width:.2e}", shots=cand.shots)
        assert cand.achieved_r >= 50
        assert width <= 1e-10 * a
        assert cand.shots <= 200
        z = find_zero(builtin("zero"), 1.0)
        assert z.no_hit and z.shots == 1 and z.score == 0.0


def test_ac7_pohozaev_residuals():
    with criterion("AC7", "scalar identity, cross vs Rellich, quadrature moments", 5.0) as facts:
        sol = solve_dirichlet_scalar(3, 3, 1.0).solution
        scalar = verify_scalar_identity(sol, 3)
        cross = verify_cross_identity(sol)
        rel = rellich_scalar(sol)
        agree = abs(cross.lhs / 2 - rel.lhs) / abs(rel.lhs)
        worst = 0.0
        for m in range(9):
            exact = sphere_area(3) * 1.0 ** (m + 3) / (m + 3)
            worst = max(worst, abs(radial_integral(lambda r: r ** m, 3, 1.0) - exact) / exact)
        facts.update(scalar=f"{scalar.residual:.2e}", cross_vs_rellich=f"{agree:.2e}", moments=f"{worst:.2e}")
        assert scalar.residual <= 1e-4
        assert agree <= 1e-8
        assert worst <= 1e-12


AC8_CERTIFIED = [
    ("sign_changing", {"p": 5, "n": 3}),
    ("sign_changing", {"p": 6, "n": 3}),
    ("sign_changing_pq", {"p": 5, "q": 7, "n": 3}),
    ("potential_type1", {"p": 7, "n": 3}),
    ("potential_type2", {"p": 7, "n": 3}),
]


def test_ac8_nonexistence_certificates():
    with criterion("AC8", "certificates and empty Dirichlet searches", 60.0) as facts:
        for name, params in AC8_CERTIFIED:
            assert nonexistence_certificate(builtin(name, params)).certified, name
        assert not nonexistence_certificate(builtin("sign_changing", {"p": 3, "n": 3})).certified
        attempts = []
        for name, params in AC8_CERTIFIED:
            spec = builtin(name, params)
            for R in (0.5, 1.0, 2.0):
                res = solve_dirichlet_system(spec, R, budget=500)
                assert not res.found, (name, params, R)
                assert res.attempts <= 500
                attempts.append(res.attempts)
        facts.update(searches=len(attempts), max_shots=max(attempts))


def test_ac9_transversality():
    with criterion("AC9", "transversal wall hits at random interior points", 10.0) as facts:
        spec = builtin("sign_changing", {"p": 5, "n": 3})
        rng = np.random.default_rng(9)
        slopes = []
        for alpha in random_simplex_points(2.0, 2, 20, rng):
            _, out = integrate(spec, alpha)
            assert isinstance(out, WallHit)
            slope, ok = transversality_check(spec, alpha)
            assert ok and slope < 0
            slopes.append(slope)
        facts.update(points=len(slopes), max_slope=f"{max(slopes):.3g}")


def random_ast(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        kind = rng.randrange(3)
        if kind == 0:
            return Num(rng.choice([0.0, 1.0, 2.0, 0.5, 3.0, 1.25, 7.0, 0.1]))
        if kind == 1:
            return Var(rng.randint(1, 3))
        return Param(rng.choice(("p", "q")))
    if rng.random() < 0.15:
        return Neg(random_ast(rng, depth - 1))
    return BinOp(rng.choice("+-*/^"), random_ast(rng, depth - 1), random_ast(rng, depth - 1))


def test_ac10_parser_and_config():
    with criterion("AC10", "expression round trip and custom-config system", 60.0) as facts:
        rng = random.Random(2024)
        defined = 0
        for _ in range(1000):
            e = random_ast(rng, 6)
            text = to_string(e)
            assert parse(text, 3, {"p", "q"}) == e
            u = [rng.uniform(0, 3) for _ in range(3)]
            params = {"p": rng.choice([2.0, 3.0, 0.5]), "q": rng.uniform(-2, 2)}
            want = reference_eval(text, u, params)
            try:
                got = evaluate(e, u, params)
            except DomainError:
                got = None
            if want is None:
                assert got is None, text
            else:
                defined += 1
                assert got is not None and abs(got - want) <= 1e-12 * max(1.0, abs(want)), text
        cfg = parse_config('[system]\nn = 3\nf1 = "u2^p - u1^p"\nf2 = "u1^p"\n[params]\np = 5\n')
        custom, ref = cfg.spec(), builtin("sign_changing", {"p": 5, "n": 3})
        pts = np.random.default_rng(10).uniform(0, 2, size=(100, 2))
        worst = max(float(np.abs(eval_f(custom, u) - eval_f(ref, u)).max()) for u in pts)
        facts.update(defined=defined, config_max_diff=f"{worst:.1e}")
        assert worst <= 1e-12
