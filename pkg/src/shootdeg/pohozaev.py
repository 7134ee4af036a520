"""Rellich/Pohozaev identities on balls, evaluated by radial quadrature.

All integrals over B_R of radial integrands reduce to
``sigma_n * int_0^R g(r) r^(n-1) dr`` with ``sigma_n = 2 pi^(n/2) / Gamma(n/2)``
(the area of the unit sphere). Identities are reported as lhs/rhs pairs with a
relative residual.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import InvalidInput, NotADirichletSolution, QuadratureFailure, UnsupportedSystem
from .integrator import Trajectory, residual as eq_residual
from .system import SystemSpec, _halton, eval_f

QUAD_TOL = 1e-10
RESIDUAL_FLOOR = 1e-30
EQUATION_TOL = 1e-4
MAX_PANELS = 20000

_GX, _GW = leggauss(7)


def sphere_area(n: int) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def _panel(g, a, b):
    x = 0.5 * (b - a) * _GX + 0.5 * (a + b)
    return 0.5 * (b - a) * float(np.dot(_GW, g(x)))


def integrate_1d(g: Callable, a: float, b: float, breakpoints=(), tol: float = QUAD_TOL):
    """Adaptive 7-point Gauss-Legendre on [a, b]; returns (value, error_estimate).

    A panel is accepted when its two halves agree with the whole to within its
    share of ``tol * (1 + |value|)``. ``g`` must accept numpy arrays.
    """
    edges = np.unique(np.concatenate([[a, b], [x for x in breakpoints if a < x < b]]))
    stack = [(lo, hi, _panel(g, lo, hi)) for lo, hi in zip(edges[:-1], edges[1:])]
    scale = 1.0 + abs(sum(s[2] for s in stack))
    total, err, panels = 0.0, 0.0, 0
    width = b - a
    while stack:
        lo, hi, whole = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = _panel(g, lo, mid), _panel(g, mid, hi)
        diff = abs(left + right - whole)
        panels += 1
        if diff <= tol * scale * (hi - lo) / width or hi - lo < 1e-14 * width:
            total += left + right
            err += diff
        elif panels > MAX_PANELS:
            raise QuadratureFailure("panel limit reached", err + diff)
        else:
            stack.append((lo, mid, left))
            stack.append((mid, hi, right))
    if not math.isfinite(total):
        raise QuadratureFailure("non-finite integrand", math.inf)
    if err > tol * (1 + abs(total)):
        raise QuadratureFailure(f"error estimate {err} above tolerance", err)
    return total, err


def radial_integral(g: Callable, n: int, R: float, breakpoints=(), tol: float = QUAD_TOL,
                    with_error: bool = False):
    """Integral over the n-ball of radius R of the radial function g."""
    if R < 0 or n < 1:
        raise InvalidInput("need R >= 0 and n >= 1")
    sigma = sphere_area(n)
    val, err = integrate_1d(lambda r: np.asarray(g(r), dtype=float) * r ** (n - 1), 0.0, R,
                            breakpoints, tol)
    return (sigma * val, sigma * err) if with_error else sigma * val


# -- ball solutions -----------------------------------------------------------

@dataclass
class BallSolution:
    """Radial profiles on [0, R]: u(r) = amp * traj.u(rate * r)."""
    R: float
    n: int
    trajectory: Trajectory
    amp: float = 1.0
    rate: float = 1.0
    spec: Optional[SystemSpec] = None

    @property
    def L(self):
        return self.trajectory.L

    def u(self, r):
        return self.amp * self.trajectory.u(self.rate * np.asarray(r, dtype=float))

    def du(self, r):
        return self.amp * self.rate * self.trajectory.du(self.rate * np.asarray(r, dtype=float))

    def d2u(self, r):
        return self.amp * self.rate ** 2 * self.trajectory.second_derivative(
            self.rate * np.asarray(r, dtype=float))

    def laplacian(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        rr = np.maximum(r, 1e-300)[:, None]
        out = self.d2u(r) + (self.n - 1) / rr * self.du(r)
        # at the origin the Laplacian of a radial C^2 function is n u''(0)
        out[r == 0] = self.n * self.d2u(r[r == 0])
        return out

    @property
    def boundary_values(self):
        return self.u(self.R)[0]

    @property
    def boundary_derivatives(self):
        return self.du(self.R)[0]

    def breakpoints(self):
        nodes = self.trajectory.r / self.rate
        return nodes[nodes < self.R]

    def equation_residual(self, spec: SystemSpec | None = None) -> float:
        spec = spec or self.spec
        if spec is None:
            raise InvalidInput("a system is needed for the equation residual")
        return self.amp * self.rate ** 2 * eq_residual(self.trajectory, spec)

    def write_csv(self, path, extra_header=()):
        """Nodes on [0, R] in the trajectory CSV layout, with R and n in the header."""
        tr = self.trajectory
        L = tr.L
        r = tr.r / self.rate
        keep = r <= self.R * (1 + 1e-12)
        u = tr.y[keep, :L] * self.amp
        du = tr.y[keep, L:] * self.amp * self.rate
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in [f"R = {self.R!r}", f"n = {self.n}", *extra_header]:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r"] + [f"u{i + 1}" for i in range(L)] + [f"du{i + 1}" for i in range(L)])
            for k, rk in enumerate(r[keep]):
                w.writerow([f"{x:.17g}" for x in [rk, *u[k], *du[k]]])


@dataclass
class IdentityReport:
    identity_name: str
    lhs: float
    rhs: float
    residual: float
    quadrature_error_estimate: float
    synthetic: bool = False
    terms: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "identity_name": self.identity_name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "quadrature_error_estimate": self.quadrature_error_estimate,
            "synthetic": self.synthetic,
            "terms": dict(self.terms),
        }


def _report(name, lhs, rhs, err, synthetic=False, **terms):
    res = abs(lhs - rhs) / max(abs(lhs), abs(rhs), RESIDUAL_FLOOR)
    return IdentityReport(name, float(lhs), float(rhs), float(res), float(err), synthetic, terms)


def _ball(sol, g):
    return radial_integral(g, sol.n, sol.R, sol.breakpoints(), with_error=True)


def _require_dirichlet(sol: BallSolution, spec: SystemSpec, wall_tol: float):
    ub = np.abs(sol.boundary_values)
    if ub.max() > 10 * wall_tol * max(1.0, sol.amp):
        raise NotADirichletSolution(f"boundary values {ub.tolist()} are not zero")
    res = sol.equation_residual(spec)
    if res > EQUATION_TOL:
        raise NotADirichletSolution(f"equation residual {res:.3g} exceeds {EQUATION_TOL}")


def scalar_coefficient(n, p):
    return n / (p + 1) - (n - 2) / 2


def verify_scalar_identity(sol: BallSolution, p: float, wall_tol: float = 1e-10,
                           spec: SystemSpec | None = None) -> IdentityReport:
    """(n/(p+1) - (n-2)/2) int u^(p+1) = 1/2 int_{dB} (x.nu) u_nu^2 for -Lap u = u^p."""
    from .system import builtin

    if sol.L != 1:
        raise InvalidInput("scalar identity needs a one-component solution")
    spec = spec or sol.spec or builtin("lane_emden_scalar", {"p": p, "n": sol.n})
    _require_dirichlet(sol, spec, wall_tol)
    c = scalar_coefficient(sol.n, p)
    integral, err = _ball(sol, lambda r: np.maximum(sol.u(r)[:, 0], 0.0) ** (p + 1))
    lhs = c * integral
    rhs = 0.5 * sphere_area(sol.n) * sol.R ** sol.n * sol.boundary_derivatives[0] ** 2
    return _report("scalar_pohozaev", lhs, rhs, abs(c) * err, coefficient=c)


def rellich_scalar(sol: BallSolution, component: int = 0) -> IdentityReport:
    """int Lap u (x.grad u) - (n-2)/2 |grad u|^2 = 1/2 int_{dB} (x.nu) |grad u|^2."""
    n, i = sol.n, component

    def g(r):
        return sol.laplacian(r)[:, i] * r * sol.du(r)[:, i] - 0.5 * (n - 2) * sol.du(r)[:, i] ** 2

    lhs, err = _ball(sol, g)
    rhs = 0.5 * sphere_area(n) * sol.R ** n * sol.boundary_derivatives[i] ** 2
    return _report("rellich", lhs, rhs, err)


def verify_cross_identity(sol: BallSolution, components=(0, 1)) -> IdentityReport:
    """int Lap u (x.grad v) + Lap v (x.grad u) - (n-2) grad u.grad v = int_{dB} (x.nu) u_nu v_nu.

    With a one-component solution both slots use the same profile.
    """
    n = sol.n
    i, j = (0, 0) if sol.L == 1 else components

    def g(r):
        lap, du = sol.laplacian(r), sol.du(r)
        return lap[:, i] * r * du[:, j] + lap[:, j] * r * du[:, i] - (n - 2) * du[:, i] * du[:, j]

    lhs, err = _ball(sol, g)
    d = sol.boundary_derivatives
    rhs = sphere_area(n) * sol.R ** n * d[i] * d[j]
    return _report("cross_rellich", lhs, rhs, err)


def merged_coefficients(n, p, q=None):
    out = {"p": scalar_coefficient(n, p)}
    if q is not None:
        out["q"] = scalar_coefficient(n, q)
    return out


def verify_merged_identity(sol: BallSolution, kind: str, p: float, q: float | None = None,
                           theta: float = 0.5, wall_tol: float = 1e-10, synthetic: bool = False,
                           spec: SystemSpec | None = None) -> IdentityReport:
    """Merged identity for -Lap u = v^p (+ v^q) - u^p, -Lap v = u^p on B_R.

    lhs = (n/(p+1) - (n-2)/2) int (u^(p+1) + v^(p+1)) [+ (n/(q+1) - (n-2)/2) int v^(q+1)]
    rhs = 1/2 int_{dB} (x.nu) v_nu^2 + int_{dB} (x.nu) u_nu v_nu

    ``theta`` splits the mixed gradient term between its two integrations by
    parts; the final identity does not depend on it, and only 1/2 is accepted.
    ``synthetic=True`` skips the Dirichlet checks (quadrature smoke tests).
    """
    from .system import builtin

    if kind not in ("sign_changing", "sign_changing_pq"):
        raise UnsupportedSystem(f"no merged identity for {kind!r}")
    if kind == "sign_changing_pq" and q is None:
        raise InvalidInput("sign_changing_pq needs q")
    if theta != 0.5:
        raise InvalidInput("only theta = 1/2 closes the merged identity")
    if sol.L != 2 and not synthetic:
        raise InvalidInput("merged identity needs a two-component solution")
    n = sol.n
    if not synthetic:
        params = {"p": p, "n": n} if q is None else {"p": p, "q": q, "n": n}
        _require_dirichlet(sol, spec or sol.spec or builtin(kind, params), wall_tol)
    iu, iv = (0, 0) if sol.L == 1 else (0, 1)
    coef = merged_coefficients(n, p, q if kind == "sign_changing_pq" else None)

    def g(r):
        u = np.maximum(sol.u(r), 0.0)
        out = coef["p"] * (u[:, iu] ** (p + 1) + u[:, iv] ** (p + 1))
        if "q" in coef:
            out = out + coef["q"] * u[:, iv] ** (q + 1)
        return out

    lhs, err = _ball(sol, g)
    d = sol.boundary_derivatives
    area = sphere_area(n) * sol.R ** n
    rhs = 0.5 * area * d[iv] ** 2 + area * d[iu] * d[iv]
    return _report(f"merged_{kind}", lhs, rhs, err, synthetic=synthetic, **coef)


# -- nonexistence certificates --------------------------------------------------

@dataclass
class Certificate:
    status: str  # "Certified" | "Inconclusive"
    reason: str
    rule: str
    margin: Optional[float] = None
    samples: int = 0

    @property
    def certified(self):
        return self.status == "Certified"

    def text(self):
        lines = [f"system certificate: {self.status}", f"  rule: {self.rule}", f"  reason: {self.reason}"]
        if self.margin is not None:
            lines.append(f"  sampled margin: {self.margin:.6g} over {self.samples} points")
        return "\n".join(lines)

    def to_dict(self):
        return {"status": self.status, "reason": self.reason, "rule": self.rule,
                "margin": self.margin, "samples": self.samples}


SCALAR_RULE = "Pohozaev nonexistence for -Lap u = u^p on balls"
MERGED_RULE = "merged Pohozaev identity for the sign-changing system"
POTENTIAL_RULE = "Pucci-Serrin condition (n-2)/2 u.grad F - n F > 0"


def pucci_serrin_margin(spec: SystemSpec, box_max: float = 10.0, samples: int = 4096,
                        seed: int = 0, puncture: float = 1e-6):
    """min of (n-2)/2 u.grad F - n F over a punctured box, plus the sample count."""
    if spec.potential is None:
        raise UnsupportedSystem(f"{spec.name} carries no potential")
    L, n = spec.L, spec.n
    pts = _halton(L, samples, seed) * box_max
    axes = []
    for i in range(L):
        for t in np.linspace(box_max / 64, box_max, 64):
            e = np.zeros(L)
            e[i] = t
            axes.append(e)
    pts = np.vstack([pts, np.array(axes)])
    pts = pts[pts.sum(axis=1) >= puncture]
    worst = math.inf
    for u in pts:
        f = eval_f(spec, u)
        grad = f[::-1] if spec.potential_kind == "type2" else f
        val = 0.5 * (n - 2) * float(np.dot(u, grad)) - n * float(spec.potential(u))
        worst = min(worst, val)
    return worst, len(pts)


def nonexistence_certificate(spec: SystemSpec, box_max: float = 10.0, samples: int = 4096,
                             seed: int = 0) -> Certificate:
    n = spec.n
    crit = (n + 2) / (n - 2)
    name = spec.name
    if name == "sign_changing":
        p = spec.params["p"]
        coef = f"coefficient n/(p+1) - (n-2)/2 = {scalar_coefficient(n, p):.6g}"
        if p >= crit:
            return Certificate("Certified", f"p = {p} >= (n+2)/(n-2) = {crit:.6g}; {coef}", MERGED_RULE)
        return Certificate("Inconclusive", f"p = {p} < (n+2)/(n-2) = {crit:.6g}; {coef}", MERGED_RULE)
    if name == "sign_changing_pq":
        p, q = spec.params["p"], spec.params["q"]
        if min(p, q) >= crit:
            return Certificate("Certified", f"p = {p}, q = {q} >= (n+2)/(n-2) = {crit:.6g}", MERGED_RULE)
        return Certificate("Inconclusive", f"min(p, q) = {min(p, q)} < (n+2)/(n-2) = {crit:.6g}",
                           MERGED_RULE)
    if spec.potential is None:
        raise UnsupportedSystem(f"no nonexistence rule for {name!r}")
    margin, count = pucci_serrin_margin(spec, box_max, samples, seed)
    rule = SCALAR_RULE if name == "lane_emden_scalar" else POTENTIAL_RULE
    if name in ("potential_type1", "potential_type2"):
        p = spec.params["p"]
        gate = 2 * n / (n - 2)
        if p < gate:
            return Certificate("Inconclusive", f"p = {p} < 2n/(n-2) = {gate:.6g}", rule, margin, count)
        reason = (f"p = {p} >= 2n/(n-2) = {gate:.6g}; analytic bound >= 2(u-v)^2; "
                  f"sampled minimum {margin:.6g}")
    else:
        reason = f"sampled minimum {margin:.6g}"
    if margin > 0:
        return Certificate("Certified", reason, rule, margin, count)
    return Certificate("Inconclusive", f"condition fails: sampled minimum {margin:.6g}", rule,
                       margin, count)
