"""Shooting integrator for u_i'' + (n-1)/r u_i' = -f_i(u), u(0) = alpha, u'(0) = 0.

The first-order system in y = (u, u') is advanced with the Dormand-Prince
5(4) pair and its quartic continuous extension. The coordinate singularity
at r = 0 is bridged with the regular series

    u(r) = alpha - f(alpha) r^2 / (2n),   u'(r) = -f(alpha) r / n,

up to ``eps_start``. The event ``g(r) = min_i u_i(r)`` is monitored after every
accepted step; the first sign change is bracketed on the dense output and
polished with exact re-steps from the last accepted node.

Past the wall the right-hand side is evaluated at ``max(u, 0)``. That
extension only ever affects the step that contains the crossing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EvalError, InvalidInput
from .system import SystemSpec

BLOWUP_CAP = 1e12

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])
ORDER = 5


@dataclass(frozen=True)
class ShotConfig:
    eps_start: float = 1e-6
    r_max: float = 1e4
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    wall_tol: float = 1e-10
    max_steps: int = 200_000

    def __post_init__(self):
        if not 0 < self.eps_start < self.r_max:
            raise InvalidInput("need 0 < eps_start < r_max")
        if min(self.rel_tol, self.abs_tol, self.wall_tol) <= 0:
            raise InvalidInput("tolerances must be positive")
        if self.max_steps < 1:
            raise InvalidInput("max_steps must be positive")

    def replace(self, **kw) -> "ShotConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return ShotConfig(**d)


# -- outcomes -----------------------------------------------------------------

@dataclass(frozen=True)
class WallHit:
    r_alpha: float
    hit_set: tuple
    u_end: tuple
    du_end: tuple
    kind = "wall_hit"

    def to_dict(self):
        return {"kind": self.kind, "r_alpha": self.r_alpha, "hit_set": list(self.hit_set),
                "u_end": list(self.u_end), "du_end": list(self.du_end)}


@dataclass(frozen=True)
class NoHitUpTo:
    r_max: float
    kind = "no_hit"

    def to_dict(self):
        return {"kind": self.kind, "r_max": self.r_max}


@dataclass(frozen=True)
class Blowup:
    r_stop: float
    kind = "blowup"

    def to_dict(self):
        return {"kind": self.kind, "r_stop": self.r_stop}


@dataclass(frozen=True)
class StepLimit:
    r_stop: float
    kind = "step_limit"

    def to_dict(self):
        return {"kind": self.kind, "r_stop": self.r_stop}


# -- trajectory -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense radial solution. ``y[k] = (u, u')`` at ``r[k]``; step k spans r[k]..r[k+1]."""

    alpha: np.ndarray
    n: int
    f_alpha: np.ndarray
    r: np.ndarray
    y: np.ndarray
    K: np.ndarray = field(repr=False)

    @property
    def L(self):
        return self.alpha.shape[0]

    @property
    def r_end(self):
        return float(self.r[-1])

    @property
    def nodes(self):
        L = self.L
        return [(float(r), self.y[k, :L].copy(), self.y[k, L:].copy()) for k, r in enumerate(self.r)]

    def _locate(self, rs):
        idx = np.searchsorted(self.r, rs, side="right") - 1
        return np.clip(idx, 0, len(self.r) - 2)

    def evaluate(self, rs):
        """Return ``(u, du)`` with shapes ``(m, L)`` at radii ``rs``."""
        rs = np.atleast_1d(np.asarray(rs, dtype=float))
        L = self.L
        out = np.empty((rs.shape[0], 2 * L))
        inner = rs < self.r[0]
        if inner.any():
            ri = rs[inner][:, None]
            out[inner, :L] = self.alpha - self.f_alpha * ri ** 2 / (2 * self.n)
            out[inner, L:] = -self.f_alpha * ri / self.n
        outer = ~inner
        if outer.any() and len(self.r) > 1:
            ro = rs[outer]
            idx = self._locate(ro)
            h = self.r[idx + 1] - self.r[idx]
            theta = (ro - self.r[idx]) / h
            powers = np.stack([theta, theta ** 2, theta ** 3, theta ** 4])
            Q = _P @ powers
            out[outer] = self.y[idx] + h[:, None] * np.einsum("msj,sm->mj", self.K[idx], Q)
        elif outer.any():
            out[outer] = self.y[0]
        return out[:, :L], out[:, L:]

    def second_derivative(self, rs):
        """u'' from the derivative of the dense interpolant of u'."""
        rs = np.atleast_1d(np.asarray(rs, dtype=float))
        L = self.L
        out = np.empty((rs.shape[0], L))
        inner = rs < self.r[0]
        if inner.any():
            out[inner] = np.broadcast_to(-self.f_alpha / self.n, (int(inner.sum()), L))
        outer = ~inner
        if outer.any():
            ro = rs[outer]
            idx = self._locate(ro)
            h = self.r[idx + 1] - self.r[idx]
            theta = (ro - self.r[idx]) / h
            dpow = np.stack([np.ones_like(theta), 2 * theta, 3 * theta ** 2, 4 * theta ** 3])
            Q = _P @ dpow
            out[outer] = np.einsum("msj,sm->mj", self.K[idx], Q)[:, L:]
        return out

    def u(self, rs):
        return self.evaluate(rs)[0]

    def du(self, rs):
        return self.evaluate(rs)[1]

    def to_rows(self):
        L = self.L
        return [[float(r)] + [float(x) for x in self.y[k, :L]] + [float(x) for x in self.y[k, L:]]
                for k, r in enumerate(self.r)]

    def write_csv(self, path, header_lines=()):
        """Write nodes as ``r, u1..uL, du1..duL`` with 17 significant digits."""
        L = self.L
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r"] + [f"u{i + 1}" for i in range(L)] + [f"du{i + 1}" for i in range(L)])
            for row in self.to_rows():
                w.writerow([f"{x:.17g}" for x in row])


# -- integration ----------------------------------------------------------------

def taylor_start(spec: SystemSpec, alpha, eps: float):
    """Series values ``(u(eps), u'(eps))`` for the regular solution with u(0) = alpha."""
    from .system import eval_f

    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise InvalidInput("alpha must be strictly positive")
    fa = eval_f(spec, alpha)
    return alpha - fa * eps ** 2 / (2 * spec.n), -fa * eps / spec.n


class _RHS:
    def __init__(self, spec: SystemSpec):
        self.f = spec.f
        self.L = spec.L
        self.c = spec.n - 1
        self.name = spec.name
        self.nfev = 0

    def __call__(self, r, y):
        L = self.L
        u = y[:L]
        if (u < 0).any():
            u = np.maximum(u, 0.0)
        try:
            fu = np.asarray(self.f(u), dtype=float)
        except (ArithmeticError, ValueError, FloatingPointError) as exc:
            raise EvalError(f"evaluating {self.name} at {u.tolist()} failed: {exc}", u) from exc
        if not np.isfinite(fu).all():
            raise EvalError(f"{self.name} returned non-finite values at {u.tolist()}", u)
        self.nfev += 1
        w = y[L:]
        out = np.empty_like(y)
        out[:L] = w
        out[L:] = -fu - (self.c / r) * w
        return out


def _rk_step(rhs, r, y, k1, h):
    K = np.empty((7, y.shape[0]))
    K[0] = k1
    for s in range(1, 6):
        K[s] = rhs(r + _C[s] * h, y + h * (_A[s] @ K[:s]))
    y_new = y + h * (_B @ K[:6])
    K[6] = rhs(r + h, y_new)
    return y_new, K


def _initial_step(rhs, r0, y0, f0, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, r0)
    y1 = y0 + h0 * f0
    f1 = rhs(r0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / ORDER)
    return min(100 * h0, h1, r0)


def integrate(spec: SystemSpec, alpha, cfg: Optional[ShotConfig] = None):
    """Shoot from ``u(0) = alpha``; returns ``(Trajectory, outcome)``."""
    cfg = cfg or ShotConfig()
    from .system import eval_f

    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.shape[0] != spec.L:
        raise InvalidInput(f"alpha needs {spec.L} components")
    if np.any(alpha <= 0):
        raise InvalidInput("alpha must be strictly positive")
    L = spec.L
    rhs = _RHS(spec)
    f_alpha = eval_f(spec, alpha)
    eps = cfg.eps_start
    u0, du0 = taylor_start(spec, alpha, eps)

    r = eps
    y = np.concatenate([u0, du0])
    rs, ys, Ks = [r], [y], []
    with np.errstate(over="raise", divide="raise", invalid="raise", under="ignore"):
        k1 = rhs(r, y)
        h = _initial_step(rhs, r, y, k1, cfg.rel_tol, cfg.abs_tol)
        outcome = None
        steps = 0
        while outcome is None:
            if steps >= cfg.max_steps:
                outcome = StepLimit(r)
                break
            if r >= cfg.r_max:
                outcome = NoHitUpTo(cfg.r_max)
                break
            h = min(h, cfg.r_max - r)
            if h < 16 * np.finfo(float).eps * r:
                outcome = Blowup(r)
                break
            try:
                y_new, K = _rk_step(rhs, r, y, k1, h)
            except FloatingPointError:
                h *= 0.2
                steps += 1
                continue
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err = np.sqrt(np.mean((h * (_E @ K) / scale) ** 2))
            steps += 1
            if not np.isfinite(err) or err > 1.0:
                fac = 0.2 if not np.isfinite(err) else max(0.2, 0.9 * err ** (-1 / ORDER))
                h *= fac
                continue
            r_new = r + h
            if y_new[:L].min() <= 0.0:
                hit = _localize(rhs, r, y, k1, h, K, L, cfg)
                r_hit, y_hit, K_hit = hit
                rs.append(r_hit)
                ys.append(y_hit)
                Ks.append(K_hit)
                u_end = y_hit[:L]
                hit_set = tuple(int(i) for i in np.flatnonzero(u_end <= cfg.wall_tol))
                outcome = WallHit(float(r_hit), hit_set, tuple(float(x) for x in u_end),
                                  tuple(float(x) for x in y_hit[L:]))
                break
            rs.append(r_new)
            ys.append(y_new)
            Ks.append(K)
            r, y, k1 = r_new, y_new, K[6]
            if np.abs(y[:L]).max() > BLOWUP_CAP:
                outcome = Blowup(r)
                break
            fac = 10.0 if err == 0 else min(10.0, 0.9 * err ** (-1 / ORDER))
            h *= fac

    K_arr = np.array(Ks) if Ks else np.zeros((0, 7, 2 * L))
    traj = Trajectory(alpha, spec.n, f_alpha, np.array(rs), np.array(ys), K_arr)
    return traj, outcome


def _dense(y0, h, K, theta):
    return y0 + h * (K.T @ (_P @ np.array([theta, theta ** 2, theta ** 3, theta ** 4])))


def _localize(rhs, r0, y0, k1, h, K, L, cfg):
    """First root of min_i u_i in (r0, r0 + h]; returns (r_hit, y_hit, K_hit)."""
    lo, hi = 0.0, 1.0
    # bracket on the interpolant, in units of the step
    while (hi - lo) * h > cfg.wall_tol * max(1.0, r0):
        mid = 0.5 * (lo + hi)
        if _dense(y0, h, K, mid)[:L].min() > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 4 * np.finfo(float).eps:
            break
    # a left-over sign change inside [0, lo] would mean a grazing earlier root;
    # sample the interpolant to make sure we keep the first crossing
    grid = np.linspace(0.0, hi, 33)[1:-1]
    for t in grid:
        if t < lo and _dense(y0, h, K, t)[:L].min() <= 0.0:
            lo, hi = 0.0, t
            while (hi - lo) * h > cfg.wall_tol * max(1.0, r0):
                mid = 0.5 * (lo + hi)
                if _dense(y0, h, K, mid)[:L].min() > 0.0:
                    lo = mid
                else:
                    hi = mid
            break
    s = 0.5 * (lo + hi) * h
    y_hit, K_hit = _rk_step(rhs, r0, y0, k1, s)
    # Newton polish on exact re-steps
    for _ in range(6):
        i = int(np.argmin(y_hit[:L]))
        ui, wi = y_hit[i], y_hit[L + i]
        if abs(ui) <= 1e-3 * cfg.wall_tol or wi >= 0.0:
            break
        s_new = s - ui / wi
        if not 0.0 < s_new <= h:
            break
        s = s_new
        y_hit, K_hit = _rk_step(rhs, r0, y0, k1, s)
    if y_hit[:L].min() > cfg.wall_tol or y_hit[:L].min() < -cfg.wall_tol:
        # fall back to bisection on the re-step map
        a, b = 0.0, h
        for _ in range(200):
            s = 0.5 * (a + b)
            y_hit, K_hit = _rk_step(rhs, r0, y0, k1, s)
            g = y_hit[:L].min()
            if abs(g) <= cfg.wall_tol:
                break
            if g > 0:
                a = s
            else:
                b = s
    return r0 + s, y_hit, K_hit


def residual(traj: Trajectory, spec: SystemSpec, probe_count: int = 200) -> float:
    """Max over probes of |u'' + (n-1)/r u' + f(u)|, u'' by 4th-order central differences."""
    from .system import eval_f

    if len(traj.r) < 5:
        raise InvalidInput("trajectory needs at least 5 nodes")
    eps = traj.r[0]
    seg = np.flatnonzero(traj.r[:-1] >= 2 * eps)
    if seg.size == 0:
        return 0.0
    pick = seg[np.unique(np.linspace(0, seg.size - 1, min(probe_count, seg.size)).astype(int))]
    worst = 0.0
    L = traj.L
    for k in pick:
        a, b = traj.r[k], traj.r[k + 1]
        r = 0.5 * (a + b)
        d = (b - a) / 8
        w = traj.du([r - 2 * d, r - d, r + d, r + 2 * d])
        upp = (w[0] - 8 * w[1] + 8 * w[2] - w[3]) / (12 * d)
        u_r, du_r = traj.evaluate(r)
        res = upp + (traj.n - 1) / r * du_r[0] + eval_f(spec, np.maximum(u_r[0], 0.0))
        worst = max(worst, float(np.abs(res).max()))
    return worst
