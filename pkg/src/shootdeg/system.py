"""Elliptic systems -Δu_i = f_i(u) on R^n and sampling checks of their structure.

A :class:`SystemSpec` bundles the source term ``f`` (defined on the closed
positive orthant of R^L) with the space dimension ``n`` and, optionally, a
potential ``F``. Two potential linkages are supported:

* ``"type1"``: ``f_i = dF/du_i``
* ``"type2"`` (L = 2 only): ``f_1 = dF/dv``, ``f_2 = dF/du``

The assumption checks below are falsification oracles. They sample a
region and report the worst case seen; a pass is evidence, not a proof.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from . import expr as _expr
from .errors import (
    DomainError,
    EvalError,
    InvalidBoundaryPoint,
    InvalidInput,
    MissingParam,
    UnknownSystem,
)

TOL_CLAMP = 1e-12
TOL_ASSUME = 1e-12
DELTA0_FLOOR = 1e-4


@dataclass(frozen=True, eq=False)
class SystemSpec:
    name: str
    L: int
    n: int
    f: Callable[[np.ndarray], np.ndarray]
    params: Mapping[str, float] = field(default_factory=dict)
    potential: Optional[Callable[[np.ndarray], float]] = None
    potential_kind: Optional[str] = None
    exprs: Optional[tuple] = None
    potential_expr: Optional[str] = None

    def __post_init__(self):
        if self.L < 1:
            raise InvalidInput(f"L must be >= 1, got {self.L}")
        if self.n < 3:
            raise InvalidInput(f"n must be >= 3, got {self.n}")
        if self.potential_kind not in (None, "type1", "type2"):
            raise InvalidInput(f"unknown potential kind {self.potential_kind!r}")
        if self.potential_kind == "type2" and self.L != 2:
            raise InvalidInput("type2 potential linkage needs L = 2")
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    def describe(self) -> dict:
        out = {"name": self.name, "L": self.L, "n": self.n, "params": dict(self.params)}
        if self.exprs is not None:
            out["exprs"] = list(self.exprs)
        if self.potential_kind:
            out["potential_kind"] = self.potential_kind
        return out


def eval_f(spec: SystemSpec, u) -> np.ndarray:
    """Evaluate ``f(u)`` after clamping round-off undershoot below the wall."""
    u = np.array(u, dtype=float).reshape(-1)
    if u.shape[0] != spec.L:
        raise InvalidInput(f"expected {spec.L} components, got {u.shape[0]}")
    if np.any(u < -TOL_CLAMP):
        raise DomainError(f"point {u.tolist()} lies outside the closed orthant")
    np.maximum(u, 0.0, out=u)
    try:
        with np.errstate(over="raise", divide="raise", invalid="raise", under="ignore"):
            val = np.asarray(spec.f(u), dtype=float)
    except (ArithmeticError, ValueError, FloatingPointError) as exc:
        raise EvalError(f"evaluating {spec.name} at {u.tolist()} failed: {exc}", u) from exc
    if val.shape != (spec.L,) or not np.all(np.isfinite(val)):
        raise EvalError(f"{spec.name} returned {val!r} at {u.tolist()}", u)
    return val


def eval_f_batch(spec: SystemSpec, U) -> np.ndarray:
    """``f`` at each row of ``U`` (shape (m, L)); same clamping and errors as :func:`eval_f`.

    Fields written with elementwise numpy operations are evaluated in one call;
    anything else (or any failure) falls back to point-by-point evaluation.
    """
    U = np.array(U, dtype=float).reshape(-1, spec.L)
    if np.any(U < -TOL_CLAMP):
        bad = U[np.flatnonzero((U < -TOL_CLAMP).any(axis=1))[0]]
        raise DomainError(f"point {bad.tolist()} lies outside the closed orthant")
    np.maximum(U, 0.0, out=U)
    if spec.exprs is None:
        try:
            with np.errstate(over="raise", divide="raise", invalid="raise", under="ignore"):
                val = np.asarray(spec.f(U.T), dtype=float)
            if val.shape == (spec.L, U.shape[0]) and np.all(np.isfinite(val)):
                return val.T
        except (ArithmeticError, ValueError, FloatingPointError, TypeError, IndexError):
            pass
    return np.array([eval_f(spec, u) for u in U]).reshape(-1, spec.L)


# -- registry -----------------------------------------------------------------

def _need(params, *names):
    for name in names:
        if name not in params:
            raise MissingParam(name)
    return [float(params[name]) for name in names]


def _zero(params, n):
    L = int(params.get("L", 2))
    return SystemSpec("zero", L, n, lambda u: np.zeros(L), {"L": L})


def _lane_emden_scalar(params, n):
    (p,) = _need(params, "p")
    return SystemSpec(
        "lane_emden_scalar", 1, n, lambda u: np.array([u[0] ** p]), {"p": p},
        potential=lambda u: u[0] ** (p + 1) / (p + 1), potential_kind="type1",
    )


def _hls(params, n):
    (p,) = _need(params, "p")
    q = float(params.get("q", p))
    return SystemSpec(
        "hls", 2, n, lambda u: np.array([u[1] ** p, u[0] ** q]), {"p": p, "q": q},
    )


def _sign_changing(params, n):
    (p,) = _need(params, "p")

    def f(u):
        up, vp = u[0] ** p, u[1] ** p
        return np.array([vp - up, up])

    return SystemSpec("sign_changing", 2, n, f, {"p": p})


def _sign_changing_pq(params, n):
    p, q = _need(params, "p", "q")

    def f(u):
        up = u[0] ** p
        return np.array([u[1] ** p + u[1] ** q - up, up])

    return SystemSpec("sign_changing_pq", 2, n, f, {"p": p, "q": q})


def _potential_type1(params, n):
    (p,) = _need(params, "p")

    def F(u):
        a, b = u[0], u[1]
        return -((a - b) ** 2) + b ** (p - 1) * a + a ** (p - 1) * b

    def f(u):
        a, b = u[0], u[1]
        return np.array([
            -2.0 * (a - b) + b ** (p - 1) + (p - 1) * a ** (p - 2) * b,
            2.0 * (a - b) + (p - 1) * b ** (p - 2) * a + a ** (p - 1),
        ])

    return SystemSpec("potential_type1", 2, n, f, {"p": p}, potential=F, potential_kind="type1")


def _potential_type2(params, n):
    (p,) = _need(params, "p")

    def F(u):
        a, b = u[0], u[1]
        return -((a - b) ** 2) + a ** p + b ** p

    # f = (dF/dv, dF/du)
    def f(u):
        a, b = u[0], u[1]
        return np.array([2.0 * (a - b) + p * b ** (p - 1), -2.0 * (a - b) + p * a ** (p - 1)])

    return SystemSpec("potential_type2", 2, n, f, {"p": p}, potential=F, potential_kind="type2")


def _potential_type2_printed(params, n):
    # The right-hand sides exactly as typeset for the Type II example; they
    # are not the (F_v, F_u) of the stated potential, so no linkage is tagged.
    (p,) = _need(params, "p")

    def f(u):
        a, b = u[0], u[1]
        return np.array([-2.0 * (a - b) + p * b ** (p - 1), 2.0 * (a - b) + p * a ** (p - 1)])

    return SystemSpec("potential_type2_printed", 2, n, f, {"p": p})


_REGISTRY = {
    "zero": _zero,
    "lane_emden_scalar": _lane_emden_scalar,
    "hls": _hls,
    "sign_changing": _sign_changing,
    "sign_changing_pq": _sign_changing_pq,
    "potential_type1": _potential_type1,
    "potential_type2": _potential_type2,
    "potential_type2_printed": _potential_type2_printed,
}

BUILTIN_NAMES = tuple(_REGISTRY) + ("custom",)

# parameters each built-in accepts (besides n)
BUILTIN_PARAMS = {
    "zero": ("L",),
    "lane_emden_scalar": ("p",),
    "hls": ("p", "q"),
    "sign_changing": ("p",),
    "sign_changing_pq": ("p", "q"),
    "potential_type1": ("p",),
    "potential_type2": ("p",),
    "potential_type2_printed": ("p",),
}


def builtin(name: str, params: Mapping[str, float] | None = None, **kwargs) -> SystemSpec:
    """Look up a named system. ``n`` (default 3) may be passed in ``params``.

    ``custom`` takes ``exprs=[...]`` and optionally ``potential_expr`` and
    ``potential_kind`` keywords; see :func:`custom_system`.
    """
    params = dict(params or {})
    params.update({k: v for k, v in kwargs.items() if k not in ("exprs", "potential_expr", "potential_kind")})
    n = int(params.pop("n", 3))
    if name == "custom":
        if "exprs" not in kwargs:
            raise MissingParam("exprs")
        return custom_system(
            kwargs["exprs"], params, n,
            potential_expr=kwargs.get("potential_expr"),
            potential_kind=kwargs.get("potential_kind"),
        )
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise UnknownSystem(name) from None
    return factory(params, n)


def custom_system(exprs: Sequence[str], params: Mapping[str, float], n: int = 3,
                  potential_expr: str | None = None, potential_kind: str | None = None,
                  name: str = "custom") -> SystemSpec:
    """Build a system from expression strings ``f_i(u1..uL)``."""
    L = len(exprs)
    params = {k: float(v) for k, v in params.items()}
    trees = [_expr.parse(text, L, params) for text in exprs]

    def f(u):
        return np.array([_expr.evaluate(t, u, params) for t in trees])

    potential = None
    if potential_expr is not None:
        ptree = _expr.parse(potential_expr, L, params)

        def potential(u):
            return _expr.evaluate(ptree, u, params)

        potential_kind = potential_kind or "type1"
    return SystemSpec(name, L, n, f, params, potential=potential, potential_kind=potential_kind,
                      exprs=tuple(exprs), potential_expr=potential_expr)


# -- structural checks --------------------------------------------------------

def _halton(d, count, seed):
    sampler = qmc.Halton(d=d, scramble=True, seed=seed)
    return sampler.random(count)


@dataclass
class ControlEntry:
    boundary_pattern: tuple
    base_point: tuple
    delta0: float
    C_est: float
    ok: bool
    sup_ratio: float
    min_denominator: float
    samples: int

    def to_dict(self):
        return {
            "boundary_pattern": list(self.boundary_pattern),
            "base_point": list(self.base_point),
            "delta0": self.delta0,
            "C_est": _json_float(self.C_est),
            "ok": self.ok,
            "sup_ratio": _json_float(self.sup_ratio),
            "min_denominator": self.min_denominator,
            "samples": self.samples,
        }


@dataclass
class AssumptionReport:
    decay_ok: bool
    decay_worst: tuple
    control_entries: list
    sample_count: int

    @property
    def ok(self):
        return self.decay_ok and all(e.ok for e in self.control_entries)

    def to_dict(self):
        point, value = self.decay_worst
        return {
            "decay_ok": self.decay_ok,
            "decay_worst": {"point": list(point), "value": value},
            "control_entries": [e.to_dict() for e in self.control_entries],
            "sample_count": self.sample_count,
            "ok": self.ok,
        }


def _json_float(x):
    return x if np.isfinite(x) else ("inf" if x > 0 else "-inf")


def check_decay(spec: SystemSpec, box_max: float, samples: int, seed: int = 0):
    """Minimum of sum_i f_i over (0, box_max]^L and every boundary face.

    Returns ``(decay_ok, (point, value), evaluated_count)``.
    """
    if box_max <= 0 or samples < 1:
        raise InvalidInput("box_max must be positive and samples >= 1")
    L = spec.L
    base = box_max * (1.0 - _halton(L, samples, seed))
    worst_val, worst_pt, count = np.inf, None, 0
    patterns = [()] + [z for m in range(1, L + 1) for z in itertools.combinations(range(L), m)]
    for zeros in patterns:
        pts = base.copy()
        if zeros:
            pts[:, list(zeros)] = 0.0
        if len(zeros) == L:
            pts = pts[:1]
        totals = eval_f_batch(spec, pts).sum(axis=1)
        count += len(pts)
        j = int(np.argmin(totals))
        if totals[j] < worst_val:
            worst_val, worst_pt = float(totals[j]), tuple(float(x) for x in pts[j])
    return worst_val >= -TOL_ASSUME, (worst_pt, worst_val), count


def check_control_inequality(spec: SystemSpec, abar, delta0: float, samples: int = 4096,
                             seed: int = 0) -> ControlEntry:
    """Sample sum_{j>m}|f_{i_j}| <= C sum_{j<=m} f_{i_j} in the open delta0-ball about abar.

    The ball is taken in the max norm and intersected with the open orthant.
    """
    abar = np.asarray(abar, dtype=float).reshape(-1)
    if abar.shape[0] != spec.L or np.any(abar < 0):
        raise InvalidBoundaryPoint(f"{abar.tolist()} is not a point of the closed orthant")
    zero = abar <= 0.0
    m = int(zero.sum())
    if not 0 < m < spec.L:
        raise InvalidBoundaryPoint(
            f"{abar.tolist()} must have between 1 and {spec.L - 1} zero coordinates")
    if delta0 <= 0:
        raise InvalidInput("delta0 must be positive")
    h = _halton(spec.L, samples, seed)
    shrink = 1.0 - 1e-12
    lo = np.where(zero, 0.0, np.maximum(abar - delta0, 0.0))
    hi = abar + delta0 * shrink
    # zero coordinates: (0, delta0); others: the ball slab clipped to u > 0
    pts = hi - (hi - lo) * h
    pts = np.where(pts <= 0.0, np.nextafter(0.0, 1.0), pts)

    val = eval_f_batch(spec, pts)
    den = val[:, zero].sum(axis=1)
    num = np.abs(val[:, ~zero]).sum(axis=1)
    ratio = np.zeros_like(den)
    pos = den > TOL_ASSUME
    ratio[pos] = num[pos] / den[pos]
    # 0/0 counts as satisfied; a positive numerator over a vanishing denominator does not
    ratio[~pos & (num > TOL_ASSUME)] = np.inf
    sup_ratio = float(ratio.max()) if ratio.size else 0.0
    min_den = float(den.min()) if den.size else np.inf
    ok = bool(min_den >= -TOL_ASSUME and np.isfinite(sup_ratio))
    C_est = max(1.0, sup_ratio)
    return ControlEntry(
        boundary_pattern=tuple(int(i) for i in np.flatnonzero(zero)),
        base_point=tuple(float(x) for x in abar),
        delta0=float(delta0), C_est=float(C_est), ok=ok,
        sup_ratio=float(sup_ratio), min_denominator=float(min_den), samples=int(samples),
    )


def certify_delta0(spec: SystemSpec, abar, delta0: float = 0.1, samples: int = 4096,
                   seed: int = 0, floor: float = DELTA0_FLOOR) -> ControlEntry:
    """Halve ``delta0`` until the control check passes or the floor is reached."""
    entry = check_control_inequality(spec, abar, delta0, samples, seed)
    while not entry.ok and delta0 / 2 >= floor:
        delta0 /= 2
        entry = check_control_inequality(spec, abar, delta0, samples, seed)
    return entry


def default_base_points(L: int, level: float = 1.0):
    """One base point per proper nonempty zero pattern, other coordinates = level."""
    out = []
    for m in range(1, L):
        for zeros in itertools.combinations(range(L), m):
            pt = np.full(L, level)
            pt[list(zeros)] = 0.0
            out.append(pt)
    return out


def check_assumptions(spec: SystemSpec, box_max: float = 10.0, samples: int = 10_000,
                      base_points=None, delta0: float = 0.1, seed: int = 0) -> AssumptionReport:
    decay_ok, worst, count = check_decay(spec, box_max, samples, seed)
    if base_points is None:
        base_points = default_base_points(spec.L)
    entries = [check_control_inequality(spec, b, delta0, samples, seed) for b in base_points]
    return AssumptionReport(decay_ok, worst, entries, count)


def potential_linkage_error(spec: SystemSpec, samples: int = 200, step: float = 1e-5,
                            box=(1e-2, 2.0), seed: int = 0) -> float:
    """Max relative mismatch between central differences of F and f."""
    if spec.potential is None:
        raise InvalidInput(f"{spec.name} carries no potential")
    L = spec.L
    pts = box[0] + (box[1] - box[0]) * _halton(L, samples, seed)
    worst = 0.0
    for u in pts:
        grad = np.empty(L)
        for i in range(L):
            e = np.zeros(L)
            e[i] = step
            grad[i] = (spec.potential(u + e) - spec.potential(u - e)) / (2 * step)
        if spec.potential_kind == "type2":
            grad = grad[::-1]
        f = eval_f(spec, u)
        err = np.max(np.abs(grad - f) / np.maximum(np.abs(f), 1.0))
        worst = max(worst, float(err))
    return worst
