"""Positive radial Dirichlet solutions on balls by shooting.

Used as an oracle for the identity checks and as a consistency check on the
nonexistence certificates: whenever a certificate holds, the search here must
come back empty-handed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BudgetExhausted, InvalidInput
from .integrator import ShotConfig, WallHit, integrate
from .pohozaev import BallSolution
from .system import SystemSpec, builtin


@dataclass
class Found:
    solution: BallSolution
    alpha: np.ndarray
    gap: float
    attempts: int

    found = True

    def to_dict(self):
        sol = self.solution
        return {"status": "Found", "R": sol.R, "n": sol.n,
                "alpha": [float(x) for x in np.atleast_1d(self.alpha)],
                "boundary_values": [float(x) for x in sol.boundary_values],
                "boundary_derivatives": [float(x) for x in sol.boundary_derivatives],
                "gap": self.gap, "attempts": self.attempts}


@dataclass
class NotFound:
    best_gap: float
    attempts: int
    reason: str = ""

    found = False

    def to_dict(self):
        return {"status": "NotFound",
                "best_gap": self.best_gap if math.isfinite(self.best_gap) else "inf",
                "attempts": self.attempts, "reason": self.reason}


def solve_dirichlet_scalar(p: float, n: int, R: float, cfg: ShotConfig | None = None):
    """-Lap u = u^p in B_R, u = 0 on the boundary, for subcritical 1 < p < (n+2)/(n-2)."""
    cfg = cfg or ShotConfig()
    if R <= 0:
        raise InvalidInput("R must be positive")
    crit = (n + 2) / (n - 2)
    if not 1 < p < crit:
        return NotFound(math.inf, 0, f"certified nonexistent: p = {p} outside (1, {crit:.6g})")
    spec = builtin("lane_emden_scalar", {"p": p, "n": n})
    traj, outcome = integrate(spec, np.array([1.0]), cfg)
    if not isinstance(outcome, WallHit):
        return NotFound(math.inf, 1, f"shot from 1 ended with {outcome.kind}")
    lam = outcome.r_alpha / R
    sol = BallSolution(R, n, traj, amp=lam ** (2 / (p - 1)), rate=lam, spec=spec)
    return Found(sol, np.array([sol.amp]), float(abs(sol.boundary_values).max()), 1)


class _Budget:
    def __init__(self, spec, cfg, budget):
        self.spec, self.cfg, self.budget = spec, cfg, budget
        self.shots = 0
        self.best = (math.inf, None)

    def shoot(self, alpha, R):
        if self.shots >= self.budget:
            raise BudgetExhausted(f"shot budget {self.budget} exhausted")
        self.shots += 1
        traj, outcome = integrate(self.spec, alpha, self.cfg)
        if isinstance(outcome, WallHit):
            gap = float(np.abs(outcome.u_end).max()) + abs(outcome.r_alpha - R)
            if gap < self.best[0]:
                self.best = (gap, alpha)
        return traj, outcome


def _label(outcome):
    if not isinstance(outcome, WallHit):
        return None
    return min(outcome.hit_set)


def _switch_radius(ctx, a, R, width, warm=None, coarse=4):
    """First wall-hit radius at the hit-index switch on the level a.

    Returns ``(r_hat, alpha, bracket)``; r_hat is inf when the switch radius
    lies beyond the shot cap.
    """
    L = 2

    def point(s):
        return np.array([s * a, (1 - s) * a])

    def run(s):
        traj, out = ctx.shoot(point(s), R)
        if isinstance(out, WallHit) and len(out.hit_set) == L:
            raise _Simultaneous(out.r_alpha, point(s), (s, s))
        return _label(out), out

    try:
        lo = hi = None
        if warm is not None:
            wl, wh = warm
            pad = max(1e3 * (wh - wl), 1e-9)
            sl, sh = max(wl - pad, 0.0), min(wh + pad, 1.0)
            hl = 0 if sl == 0 else run(sl)[0]
            hh = 1 if sh == 1 else run(sh)[0]
            if hl is not None and hh is not None and hl != hh:
                lo, hi, h_lo = sl, sh, hl
        if lo is None:
            ss = [j / coarse for j in range(coarse + 1)]
            labels = [0] + [run(s)[0] for s in ss[1:-1]] + [1]
            pair = next((j for j in range(coarse)
                         if labels[j] is not None and labels[j + 1] is not None
                         and labels[j] != labels[j + 1]), None)
            if pair is None:
                return math.inf, None, None
            lo, hi, h_lo = ss[pair], ss[pair + 1], labels[pair]
        last = None
        while hi - lo > width:
            mid = 0.5 * (lo + hi)
            h, out = run(mid)
            if h is None:
                return math.inf, None, (lo, hi)
            last = (out.r_alpha, mid)
            if h == h_lo:
                lo = mid
            else:
                hi = mid
        mid = 0.5 * (lo + hi)
        h, out = run(mid)
        if h is None:
            return math.inf, None, (lo, hi)
        return out.r_alpha, point(mid), (lo, hi)
    except _Simultaneous as sim:
        return sim.r, sim.alpha, sim.bracket


class _Simultaneous(Exception):
    def __init__(self, r, alpha, bracket):
        self.r, self.alpha, self.bracket = r, alpha, bracket


def solve_dirichlet_system(spec: SystemSpec, R: float, a_range=(1e-2, 1e2),
                           cfg: ShotConfig | None = None, budget: int = 500,
                           levels: int = 5, switch_width: float = 4e-16, r_tol: float = 1e-11,
                           max_extend: int = 4):
    """Search (alpha_1, alpha_2) for a shot whose components vanish together at R.

    Inner loop: bisection on the hit-index switch along a level a, which
    locates the simultaneous-hit radius r_hat(a). Outer loop: a level scan,
    extended past ``a_range`` by up to ``max_extend`` steps when every finite
    r_hat lies on one side of R, then a safeguarded Illinois iteration on
    log a for r_hat(a) = R. Shots are capped at 4R.
    """
    cfg = cfg or ShotConfig()
    if spec.L != 2:
        raise InvalidInput("the system search handles two components")
    if budget < 100:
        raise InvalidInput("budget must be at least 100")
    if R <= 0 or not 0 < a_range[0] < a_range[1]:
        raise InvalidInput("need R > 0 and 0 < a_lo < a_hi")
    ctx = _Budget(spec, cfg.replace(r_max=4 * R), budget)
    warm = None

    def F(log_a):
        nonlocal warm
        r_hat, alpha, bracket = _switch_radius(ctx, math.exp(log_a), R, switch_width, warm)
        if bracket is not None and alpha is not None:
            warm = bracket
        return (math.log(r_hat / R) if math.isfinite(r_hat) else math.inf), alpha

    try:
        xs = np.linspace(math.log(a_range[0]), math.log(a_range[1]), levels)
        vals = []
        for x in xs:
            vals.append(F(x))
            if abs(vals[-1][0]) <= r_tol:
                return _finish(spec, R, vals[-1][1], ctx, cfg)
        pair = next((j for j in range(levels - 1)
                     if (vals[j][0] > 0) != (vals[j + 1][0] > 0)), None)
        extend = 0
        while pair is None and extend < max_extend:
            # finite radii all on one side of R: walk the level range outwards
            finite = [v[0] for v in vals if math.isfinite(v[0])]
            if not finite:
                break
            step = xs[1] - xs[0]
            if all(f > 0 for f in finite):
                x_new = xs[-1] + step
                xs = np.append(xs, x_new)
                vals.append(F(x_new))
                if (vals[-2][0] > 0) != (vals[-1][0] > 0):
                    pair = len(xs) - 2
            else:
                x_new = xs[0] - step
                xs = np.insert(xs, 0, x_new)
                vals.insert(0, F(x_new))
                if (vals[0][0] > 0) != (vals[1][0] > 0):
                    pair = 0
            extend += 1
        if pair is None:
            return NotFound(ctx.best[0], ctx.shots, "no level brackets the radius")
        x0, x1 = xs[pair], xs[pair + 1]
        f0, f1 = vals[pair][0], vals[pair + 1][0]
        side = 0
        while True:
            if math.isfinite(f0) and math.isfinite(f1):
                x = x1 - f1 * (x1 - x0) / (f1 - f0)
            else:
                x = 0.5 * (x0 + x1)
            fx, alpha = F(x)
            if abs(fx) <= r_tol or abs(x1 - x0) < 1e-14:
                if alpha is None:
                    return NotFound(ctx.best[0], ctx.shots, "bracket collapsed without a switch")
                return _finish(spec, R, alpha, ctx, cfg)
            if (fx > 0) == (f0 > 0):
                x0, f0 = x, fx
                if side == -1 and math.isfinite(f1):
                    f1 *= 0.5
                side = -1
            else:
                x1, f1 = x, fx
                if side == 1 and math.isfinite(f0):
                    f0 *= 0.5
                side = 1
    except BudgetExhausted:
        return NotFound(ctx.best[0], ctx.shots, "budget exhausted")


def _finish(spec, R, alpha, ctx, cfg):
    traj, outcome = ctx.shoot(alpha, R)
    if not isinstance(outcome, WallHit):
        return NotFound(ctx.best[0], ctx.shots, "final shot did not hit the wall")
    sol = BallSolution(R, spec.n, traj, spec=spec)
    gap = float(np.abs(sol.boundary_values).max())
    inside = traj.u(np.linspace(0, R, 200)[:-1] * (1 - cfg.wall_tol))
    ok = (gap <= 10 * cfg.wall_tol and inside.min() > 0
          and np.all(sol.boundary_derivatives < 0))
    if not ok:
        return NotFound(min(ctx.best[0], gap), ctx.shots, f"components miss the boundary by {gap:.3g}")
    return Found(sol, np.asarray(alpha), gap, ctx.shots)
