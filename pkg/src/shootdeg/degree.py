"""Brouwer degree of self-maps of the level simplex and searches for ground states.

Maps are plain callables ``alpha -> beta`` on coordinate vectors, returning
``None`` where they are undefined (NoHit shots). Degree methods by dimension:

* L = 2: signed count of crossings of the target's first coordinate along the
  segment.
* L = 3: winding number of the boundary image around the target, refining
  boundary edges whose images turn by more than a quarter turn.
* L >= 4: signed count of piecewise-linear preimages over a Kuhn triangulation.
  Not certified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    BudgetExhausted,
    GridTooCoarse,
    InvalidInput,
    NoSwitchFound,
    TargetOnBoundaryImage,
)
from .integrator import ShotConfig
from .simplex import SimplexGrid, SimplexPoint, chart, kuhn_cells
from .system import SystemSpec
from .target import TargetResult, pi_map, psi

MAX_REFINE_DEPTH = 30


@dataclass
class DegreeReport:
    degree: int
    target: tuple
    method: str
    resolution: int
    excluded: int
    certified: bool = True
    evaluations: int = 0

    def to_dict(self):
        return {
            "degree": self.degree,
            "target": list(self.target),
            "method": self.method,
            "resolution": self.resolution,
            "excluded": self.excluded,
            "certified": self.certified,
            "evaluations": self.evaluations,
        }


class _Counted:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, alpha):
        self.calls += 1
        out = self.fn(np.asarray(alpha, dtype=float))
        return None if out is None else np.asarray(out, dtype=float)


def degree(fmap: Callable, target, grid: SimplexGrid) -> DegreeReport:
    target = np.asarray(target, dtype=float)
    L, a, k = grid.L, grid.a, grid.k
    if L < 2:
        raise InvalidInput("degree needs L >= 2")
    if target.shape != (L,) or target.min() <= 0 or abs(target.sum() - a) > 1e-9 * a:
        raise InvalidInput("target must be an interior point of the level simplex")
    if k < 2:
        raise GridTooCoarse("resolution k must be at least 2")
    fmap = _Counted(fmap)
    values = [None] * len(grid)
    for i in np.flatnonzero(grid.boundary):
        values[i] = fmap(grid.points[i])
    gap = 2 * a / k
    for i in np.flatnonzero(grid.boundary):
        v = values[i]
        if v is not None and np.abs(v - target).max() < gap:
            raise TargetOnBoundaryImage(
                f"boundary image {v.tolist()} lies within {gap} of the target")
    if L == 2:
        report = _degree_segment(fmap, target, grid, values)
    elif L == 3:
        report = _degree_winding(fmap, target, grid, values)
    else:
        report = _degree_pl(fmap, target, grid, values)
    report.evaluations = fmap.calls
    return report


def _degree_segment(fmap, target, grid, values):
    order = np.argsort(grid.points[:, 0])
    g, excluded = [], 0
    for i in order:
        if values[i] is None and not grid.boundary[i]:
            values[i] = fmap(grid.points[i])
        if values[i] is None:
            excluded += 1
            continue
        g.append(values[i][0] - target[0])
    deg = 0
    for lo, hi in zip(g, g[1:]):
        if lo < 0 <= hi:
            deg += 1
        elif lo >= 0 > hi:
            deg -= 1
    return DegreeReport(deg, tuple(target), "interval_sign_count", grid.k, excluded)


def _boundary_loop(grid):
    """Lattice points of the boundary of a 2-simplex, counter-clockwise in the chart."""
    k = grid.k
    loop = []
    corners = [(k, 0, 0), (0, k, 0), (0, 0, k)]
    for c in range(3):
        start, end = np.array(corners[c]), np.array(corners[(c + 1) % 3])
        for j in range(k):
            loop.append(tuple((start * (k - j) + end * j) // k))
    return loop


def _angle(z):
    return math.atan2(z[1], z[0])


def _degree_winding(fmap, target, grid, values):
    a = grid.a
    t2 = chart(target)
    loop = _boundary_loop(grid)
    excluded = 0
    pts, imgs = [], []
    for m in loop:
        idx = grid.index(m)
        v = values[idx]
        if v is None:
            excluded += 1
            continue
        pts.append(grid.points[idx])
        imgs.append(chart(v) - t2)
    if len(pts) < 3:
        raise GridTooCoarse("too few boundary images to wind")
    tiny = 1e-12 * a
    total = 0.0
    for j in range(len(pts)):
        total += _wind_edge(fmap, pts[j], pts[(j + 1) % len(pts)],
                            imgs[j], imgs[(j + 1) % len(pts)], t2, tiny, 0)
    deg = int(round(total / (2 * math.pi)))
    if abs(total / (2 * math.pi) - deg) > 0.25:
        raise GridTooCoarse(f"winding sum {total} is not close to a multiple of 2*pi")
    return DegreeReport(deg, tuple(target), "boundary_winding", grid.k, excluded)


def _wind_edge(fmap, p0, p1, z0, z1, t2, tiny, depth):
    if min(np.hypot(*z0), np.hypot(*z1)) <= tiny:
        raise TargetOnBoundaryImage("target lies on the boundary image")
    d = _angle(z1) - _angle(z0)
    d = (d + math.pi) % (2 * math.pi) - math.pi
    if abs(d) <= math.pi / 2:
        return d
    if depth >= MAX_REFINE_DEPTH:
        raise TargetOnBoundaryImage("boundary image refinement did not resolve the turn")
    pm = 0.5 * (p0 + p1)
    vm = fmap(pm)
    if vm is None:
        raise GridTooCoarse("map undefined at a refined boundary point")
    zm = chart(vm) - t2
    return (_wind_edge(fmap, p0, pm, z0, zm, t2, tiny, depth + 1)
            + _wind_edge(fmap, pm, p1, zm, z1, t2, tiny, depth + 1))


def _degree_pl(fmap, target, grid, values):
    a, L = grid.a, grid.L
    for i in range(len(grid)):
        if values[i] is None and not grid.boundary[i]:
            values[i] = fmap(grid.points[i])
    excluded = sum(v is None for v in values)
    # generic perturbation keeps the target off cell faces
    shift = np.array([1.0 / math.sqrt(j + 2) for j in range(L)])
    shift -= shift.mean()
    y0 = chart(target + 1e-9 * a * shift)
    deg = _pl_count(grid.points, values, grid.cells(), y0)
    return DegreeReport(deg, tuple(target), "heuristic_preimage", grid.k, excluded, certified=False)


def _pl_count(points, values, cells, y0):
    deg = 0
    for cell in cells:
        imgs = [values[i] for i in cell]
        if any(v is None for v in imgs):
            continue
        sgn, lam = _cell_contains(chart(np.array(imgs)), y0)
        if lam is None:
            continue
        dom = chart(points[list(cell)])
        dsgn = np.sign(np.linalg.det((dom[1:] - dom[0]).T))
        deg += int(sgn * dsgn)
    return deg


def _cell_contains(V, y0, slack=0.0):
    M = (V[1:] - V[0]).T
    det = np.linalg.det(M)
    if det == 0:
        return 0, None
    lam = np.linalg.solve(M, y0 - V[0])
    if lam.min() >= -slack and lam.sum() <= 1 + slack:
        return np.sign(det), lam
    return np.sign(det), None


def homotopy_degrees(fmap: Callable, target, grid: SimplexGrid, params=(0.0, 0.25, 0.5, 0.75, 1.0)):
    """Degrees of (1-s) id + s fmap at each s; the values should all agree."""
    out = []
    for s in params:
        def h(alpha, s=s):
            v = fmap(alpha)
            return None if v is None else (1 - s) * alpha + s * v
        out.append(degree(h, target, grid))
    return out


def cached_map(fmap: Callable) -> Callable:
    """Memoise a simplex map on exact coordinates (grid sweeps reuse boundary points)."""
    cache = {}

    def g(alpha):
        key = tuple(np.asarray(alpha, dtype=float).tolist())
        if key not in cache:
            cache[key] = fmap(np.asarray(alpha, dtype=float))
        return cache[key]

    return g


# -- ground-state search ------------------------------------------------------------

@dataclass
class SolutionCandidate:
    alpha0: SimplexPoint
    achieved_r: float
    score: float
    bracket: tuple
    shots: int
    no_hit: bool = False
    trace: list = field(default_factory=list)

    def success(self, r_threshold: float = 50.0) -> bool:
        return self.no_hit or self.achieved_r >= r_threshold

    def to_dict(self):
        return {
            "alpha0": [float(x) for x in self.alpha0.alpha],
            "a": self.alpha0.a,
            "achieved_r": self.achieved_r,
            "score": self.score,
            "bracket": [[float(x) for x in b] for b in self.bracket],
            "bracket_width": float(np.abs(np.asarray(self.bracket[1]) - np.asarray(self.bracket[0])).max()),
            "shots": self.shots,
            "no_hit": self.no_hit,
        }


class _Shooter:
    def __init__(self, spec, a, cfg, budget):
        self.spec, self.a, self.cfg, self.budget = spec, a, cfg, budget
        self.shots = 0

    def __call__(self, alpha) -> TargetResult:
        alpha = np.asarray(alpha, dtype=float)
        p = SimplexPoint(alpha * (self.a / alpha.sum()), self.a)
        if p.alpha.min() > self.cfg.wall_tol:
            if self.shots >= self.budget:
                raise BudgetExhausted(f"shot budget {self.budget} exhausted")
            self.shots += 1
        return psi(self.spec, p, self.cfg)


def _no_hit_candidate(alpha, a, cfg, shots, trace):
    return SolutionCandidate(SimplexPoint(alpha, a), cfg.r_max, 0.0, (alpha, alpha), shots,
                             no_hit=True, trace=trace)


SEARCH_R_MAX = 1e10


def find_zero(spec: SystemSpec, a: float, cfg: ShotConfig | None = None, budget: int = 200,
              width_tol: float = 1e-10, coarse: int = 8,
              search_r_max: float = SEARCH_R_MAX) -> SolutionCandidate:
    """Search the level simplex for an initial value whose shot does not hit the wall.

    Near a ground state r_alpha grows without bound, so shots run out to at least
    ``search_r_max``; otherwise the bisection stalls on NoHit long before the
    bracket is narrow.
    """
    cfg = cfg or ShotConfig()
    if cfg.r_max < search_r_max:
        cfg = cfg.replace(r_max=search_r_max)
    if a <= 0:
        raise InvalidInput("a must be positive")
    if spec.L == 2:
        return _find_zero_segment(spec, a, cfg, budget, width_tol, coarse)
    return _find_zero_simplicial(spec, a, cfg, budget, width_tol, coarse)


def _seg(t, a):
    return np.array([t, a - t])


def _find_zero_segment(spec, a, cfg, budget, width_tol, coarse):
    shoot = _Shooter(spec, a, cfg, budget)
    trace = []
    ts = [a * j / coarse for j in range(coarse + 1)]
    hs = []
    for t in ts:
        res = shoot(_seg(t, a))
        if res.no_hit:
            return _no_hit_candidate(_seg(t, a), a, cfg, shoot.shots, trace)
        hs.append(res.hit_index())
        trace.append({"t": t, "r_alpha": res.r_alpha, "hit_index": hs[-1]})
    switch = next((j for j in range(coarse) if hs[j] != hs[j + 1]), None)
    if switch is None:
        raise NoSwitchFound(f"hit index is {hs[0]} across the whole segment")
    lo, hi, h_lo = ts[switch], ts[switch + 1], hs[switch]
    best = None
    try:
        while hi - lo > width_tol * a:
            mid = 0.5 * (lo + hi)
            res = shoot(_seg(mid, a))
            trace.append({"t": mid, "r_alpha": res.r_alpha, "hit_index": res.hit_index(),
                          "lo": lo, "hi": hi})
            if res.no_hit:
                return _no_hit_candidate(_seg(mid, a), a, cfg, shoot.shots, trace)
            best = (mid, res)
            if res.hit_index() == h_lo:
                lo = mid
            else:
                hi = mid
        mid = 0.5 * (lo + hi)
        res = shoot(_seg(mid, a))
    except BudgetExhausted as exc:
        if best is not None:
            t, res = best
            exc.best = SolutionCandidate(SimplexPoint(_seg(t, a), a), res.r_alpha,
                                         float(res.psi.sum()), (_seg(lo, a), _seg(hi, a)),
                                         shoot.shots, trace=trace)
        raise
    if res.no_hit:
        return _no_hit_candidate(_seg(mid, a), a, cfg, shoot.shots, trace)
    trace.append({"t": mid, "r_alpha": res.r_alpha, "hit_index": res.hit_index(), "lo": lo, "hi": hi})
    return SolutionCandidate(SimplexPoint(_seg(mid, a), a), res.r_alpha, float(res.psi.sum()),
                             (_seg(lo, a), _seg(hi, a)), shoot.shots, trace=trace)


def _find_zero_simplicial(spec, a, cfg, budget, width_tol, coarse):
    L = spec.L
    shoot = _Shooter(spec, a, cfg, budget)
    grid = SimplexGrid(a, L, coarse)
    cache = {}
    trace = []

    def score(alpha):
        key = tuple(np.round(alpha / a, 15))
        if key not in cache:
            res = shoot(alpha)
            cache[key] = res
            trace.append({"alpha": list(map(float, alpha)), "r_alpha": res.r_alpha})
        res = cache[key]
        return (0.0 if res.no_hit else float(res.psi.sum())), res

    best = None

    def consider(alpha):
        nonlocal best
        s, res = score(alpha)
        if res.no_hit:
            raise _Found(alpha)
        if best is None or s < best[0]:
            best = (s, np.array(alpha), res)
        return s

    try:
        vals = [consider(pt) for pt in grid.points]
        cells = grid.cells()
        cell_scores = [np.mean([vals[i] for i in c]) for c in cells]
        starts = [cells[i] for i in np.argsort(cell_scores)[:3]]
        ref = kuhn_cells(L - 1, 2)
        for start in starts:
            V = grid.points[list(start)]
            while np.abs(V[:, None, :] - V[None, :, :]).max() > width_tol * a:
                sub = []
                for cell in ref:
                    W = np.array([np.array(m) @ V / 2 for m in cell])
                    sub.append((np.mean([consider(w) for w in W]), W))
                V = min(sub, key=lambda t: t[0])[1]
    except _Found as hit:
        return _no_hit_candidate(np.asarray(hit.alpha), a, cfg, shoot.shots, trace)
    except BudgetExhausted as exc:
        s, alpha, res = best
        exc.best = SolutionCandidate(SimplexPoint(alpha, a), res.r_alpha, s, (alpha, alpha),
                                     shoot.shots, trace=trace)
        raise
    s, alpha, res = best
    return SolutionCandidate(SimplexPoint(alpha, a), res.r_alpha, s, (V.min(axis=0), V.max(axis=0)),
                             shoot.shots, trace=trace)


class _Found(Exception):
    def __init__(self, alpha):
        self.alpha = alpha


@dataclass
class WitnessResult:
    point: SimplexPoint
    residual: float
    psi: Optional[np.ndarray]
    shots: int

    def to_dict(self):
        return {"alpha": [float(x) for x in self.point.alpha], "a": self.point.a,
                "residual": self.residual,
                "psi": None if self.psi is None else [float(x) for x in self.psi],
                "shots": self.shots}


def onto_witness(spec: SystemSpec, a: float, target, cfg: ShotConfig | None = None,
                 budget: int = 200, tol: float | None = None) -> WitnessResult:
    """Find alpha on the level simplex with |psi(alpha) - target|_inf <= tol.

    NoHit shots count as psi = 0, the limit value at a ground state.
    """
    cfg = cfg or ShotConfig()
    target = np.asarray(target, dtype=float)
    L = spec.L
    tol = 1e-4 * a if tol is None else tol
    if target.shape != (L,) or target.min() < 0 or target.min() > cfg.wall_tol \
            or target.sum() > a + 1e-9:
        raise InvalidInput("target must be a wall point with coordinate sum <= a")
    shoot = _Shooter(spec, a, cfg, budget)

    def value(alpha):
        res = shoot(alpha)
        return np.zeros(L) if res.no_hit else res.psi

    def result(alpha, v):
        return WitnessResult(SimplexPoint(alpha * (a / alpha.sum()), a),
                             float(np.abs(v - target).max()), v, shoot.shots)

    if abs(target.sum() - a) <= 1e-12 * a:
        # psi fixes the boundary of the simplex
        return result(target.copy(), target.copy())
    y0 = pi_map(target, a).alpha
    best = None
    try:
        if L == 2:
            lo, hi = 0.0, a
            while True:
                mid = 0.5 * (lo + hi)
                v = value(_seg(mid, a))
                cand = result(_seg(mid, a), v)
                if best is None or cand.residual < best.residual:
                    best = cand
                if cand.residual <= tol:
                    return cand
                phi0 = pi_map(v, a).alpha[0]
                if phi0 < y0[0]:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-15 * a:
                    raise BudgetExhausted("bracket collapsed before reaching tolerance", best)
        return _witness_simplicial(spec, a, target, y0, value, result, tol, lambda b: best)
    except BudgetExhausted as exc:
        exc.best = exc.best or best
        raise


def _witness_simplicial(spec, a, target, y0, value, result, tol, _):
    L = spec.L
    grid = SimplexGrid(a, L, 4)
    vals = {}

    def phi_at(alpha):
        key = tuple(alpha.tolist())
        if key not in vals:
            v = value(alpha)
            vals[key] = (v, pi_map(np.minimum(v, a), a).alpha)
        return vals[key]

    best = None

    def track(alpha):
        nonlocal best
        v, ph = phi_at(alpha)
        cand = result(alpha, v)
        if best is None or cand.residual < best.residual:
            best = cand
        return ph

    y = chart(y0)
    cells = [grid.points[list(c)] for c in grid.cells()]
    ref = kuhn_cells(L - 1, 2)
    try:
        while True:
            chosen = None
            for V in cells:
                imgs = np.array([track(w) for w in V])
                if best.residual <= tol:
                    return best
                _, lam = _cell_contains(chart(imgs), y, slack=1e-9)
                if lam is not None:
                    chosen = V
                    break
            if chosen is None:
                # nonlinear image: keep the cell whose best vertex is closest
                chosen = min(cells, key=lambda V: min(np.abs(track(w) - y0).max() for w in V))
            cells = [np.array([np.array(m) @ chosen / 2 for m in cell]) for cell in ref]
    except BudgetExhausted as exc:
        exc.best = best
        raise
