"""The target map psi, the retraction pi and the composite phi = pi o psi.

For alpha on the level simplex, psi(alpha) is the point where the shot from
alpha first touches the wall; boundary initial values are fixed. NoHit shots
(the candidate ground states) are reported as ``psi = None``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BlowupError, InvalidInput, NotAWallHit, StepLimitReached
from .integrator import Blowup, NoHitUpTo, ShotConfig, StepLimit, WallHit, integrate
from .simplex import SimplexGrid, SimplexPoint
from .system import SystemSpec


@dataclass(frozen=True, eq=False)
class TargetResult:
    psi: Optional[np.ndarray]
    r_alpha: float
    hit_set: tuple
    outcome: object = None

    @property
    def no_hit(self):
        return self.psi is None

    def hit_index(self):
        """Smallest index attaining the wall hit (ties broken low)."""
        return min(self.hit_set) if self.hit_set else None

    def to_dict(self):
        return {
            "psi": None if self.psi is None else [float(x) for x in self.psi],
            "r_alpha": self.r_alpha if math.isfinite(self.r_alpha) else "inf",
            "hit_set": list(self.hit_set),
            "outcome": None if self.outcome is None else self.outcome.to_dict(),
        }


def _as_point(p):
    return p if isinstance(p, SimplexPoint) else SimplexPoint.from_alpha(p)


def psi(spec: SystemSpec, p, cfg: ShotConfig | None = None) -> TargetResult:
    cfg = cfg or ShotConfig()
    p = _as_point(p)
    alpha = p.alpha
    if alpha.min() <= cfg.wall_tol:
        hit = tuple(int(i) for i in np.flatnonzero(alpha <= cfg.wall_tol))
        return TargetResult(alpha.copy(), 0.0, hit, None)
    _, outcome = integrate(spec, alpha, cfg)
    if isinstance(outcome, WallHit):
        value = np.maximum(np.array(outcome.u_end), 0.0)
        return TargetResult(value, outcome.r_alpha, outcome.hit_set, outcome)
    if isinstance(outcome, NoHitUpTo):
        return TargetResult(None, math.inf, (), outcome)
    if isinstance(outcome, Blowup):
        raise BlowupError(f"shot from {alpha.tolist()} blew up near r = {outcome.r_stop}",
                          outcome.r_stop)
    assert isinstance(outcome, StepLimit)
    raise StepLimitReached(f"step limit reached at r = {outcome.r_stop} from {alpha.tolist()}")


def pi_map(beta, a: float) -> SimplexPoint:
    """Retract a wall point with coordinate sum <= a onto the level simplex."""
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0):
        raise InvalidInput(f"{beta.tolist()} has negative coordinates")
    total = beta.sum()
    if total > a + 1e-9:
        raise InvalidInput(f"coordinate sum {total} exceeds level {a}")
    out = beta + (a - total) / beta.shape[0]
    # land exactly on the level set
    out = np.maximum(out, 0.0)
    out *= a / out.sum()
    return SimplexPoint(out, a)


def pi_inverse(p) -> np.ndarray:
    p = _as_point(p)
    return p.alpha - p.alpha.min()


def phi(spec: SystemSpec, p, cfg: ShotConfig | None = None) -> Optional[SimplexPoint]:
    """pi(psi(p)); boundary points are returned unchanged, NoHit gives ``None``."""
    cfg = cfg or ShotConfig()
    p = _as_point(p)
    if p.alpha.min() <= cfg.wall_tol:
        return p
    res = psi(spec, p, cfg)
    if res.no_hit:
        return None
    return pi_map(res.psi, p.a)


def phi_map(spec: SystemSpec, cfg: ShotConfig | None = None):
    """phi as a plain function of the coordinate vector, for the degree code."""
    cfg = cfg or ShotConfig()

    def f(alpha):
        out = phi(spec, SimplexPoint.from_alpha(alpha), cfg)
        return None if out is None else out.alpha

    return f


@dataclass
class DynamicEstimateReport:
    ok: bool
    worst_ratio: float
    bound: float
    claim_constant: float
    proof_constant: float
    ratio_vs_claim: float
    ratio_vs_proof: float
    evaluated: int
    skipped: int

    def to_dict(self):
        return dict(self.__dict__)


def _perturbations(abar, delta, samples, seed):
    """Interior points alpha on the level simplex with |alpha - abar|_inf <= delta."""
    L = abar.shape[0]
    zero = abar <= 0
    rng = np.random.default_rng(seed)
    out = []
    if L == 2:
        z = int(np.flatnonzero(zero)[0])
        for t in np.linspace(delta, 0, samples, endpoint=False):
            d = np.zeros(2)
            d[z], d[1 - z] = t, -t
            out.append(abar + d)
        return out
    tries = 0
    while len(out) < samples and tries < 1000 * samples:
        tries += 1
        d = np.where(zero, rng.uniform(0, delta, L), rng.uniform(-delta, delta, L))
        d[zero] = np.maximum(d[zero], 1e-3 * delta)
        free = ~zero
        d[free] -= d.sum() / free.sum()
        alpha = abar + d
        if np.abs(d).max() <= delta and alpha.min() > 0:
            out.append(alpha)
    return out


def dynamic_estimate_check(spec: SystemSpec, abar, C: float, delta: float, samples: int = 16,
                           cfg: ShotConfig | None = None, delta0: float | None = None,
                           seed: int = 0) -> DynamicEstimateReport:
    """Check sup_r |u(r, alpha) - abar|_inf <= B delta for alpha near a wall point.

    B = max(2(3+L)C, (3+C)L). When ``delta0`` is given the hypothesis
    delta < delta0 / (2(3+L)C) is enforced.
    """
    cfg = cfg or ShotConfig()
    abar = np.asarray(abar, dtype=float)
    L = abar.shape[0]
    m = int((abar <= 0).sum())
    if not 0 < m < L:
        raise InvalidInput("abar must have between 1 and L-1 zero coordinates")
    if C < 1:
        raise InvalidInput("C must be at least 1")
    claim = 2 * (3 + L) * C
    proof = (3 + C) * L
    if delta0 is not None and not delta < delta0 / claim:
        raise InvalidInput(f"delta = {delta} violates delta < delta0 / {claim}")
    bound = max(claim, proof)
    worst, evaluated, skipped = 0.0, 0, 0
    for alpha in _perturbations(abar, delta, samples, seed):
        traj, outcome = integrate(spec, alpha, cfg)
        if not isinstance(outcome, WallHit):
            skipped += 1
            continue
        evaluated += 1
        dev = max(np.abs(traj.y[:, :L] - abar).max(), np.abs(alpha - abar).max())
        worst = max(worst, float(dev))
    ratio = worst / delta
    return DynamicEstimateReport(
        ok=evaluated > 0 and worst <= bound * delta,
        worst_ratio=ratio, bound=bound, claim_constant=claim, proof_constant=proof,
        ratio_vs_claim=ratio / claim, ratio_vs_proof=ratio / proof,
        evaluated=evaluated, skipped=skipped,
    )


def transversality_check(spec: SystemSpec, p, cfg: ShotConfig | None = None):
    """Slope of the hit-set sum at r_alpha; returns ``(omega_slope, transversal)``."""
    cfg = cfg or ShotConfig()
    p = _as_point(p)
    res = psi(spec, p, cfg)
    if not isinstance(res.outcome, WallHit):
        raise NotAWallHit(f"shot from {p.alpha.tolist()} does not hit the wall")
    hit = res.outcome
    slope = float(sum(hit.du_end[i] for i in hit.hit_set))
    slope_tol = 1e-8 * max(1.0, p.a / hit.r_alpha)
    return slope, slope < -slope_tol


def sweep(spec: SystemSpec, grid: SimplexGrid, cfg: ShotConfig | None = None, threads: int = 1):
    """psi on every lattice point of ``grid`` (order preserved)."""
    cfg = cfg or ShotConfig()
    points = [SimplexPoint(pt, grid.a) for pt in grid.points]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(lambda q: psi(spec, q, cfg), points))
    else:
        results = [psi(spec, q, cfg) for q in points]
    return points, results


def sweep_rows(points, results):
    rows = []
    for pt, res in zip(points, results):
        mask = sum(1 << i for i in res.hit_set)
        psi_vals = [math.nan] * pt.L if res.psi is None else list(res.psi)
        rows.append(list(pt.alpha) + [res.r_alpha, mask] + psi_vals)
    return rows


def write_sweep_csv(path, points, results):
    L = points[0].L
    header = ([f"alpha_{i + 1}" for i in range(L)] + ["r_alpha", "hit_index_mask"]
              + [f"psi_{i + 1}" for i in range(L)])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in sweep_rows(points, results):
            w.writerow([_fmt(x) for x in row])


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if math.isinf(x):
        return "inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"
