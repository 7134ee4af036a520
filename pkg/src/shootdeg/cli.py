"""Command-line front end: ``shootdeg <command> --config run.ini [--set section.key=value]``.

Each command writes its report into ``--out``: JSON (validated against the
schemas shipped in ``shootdeg/schemas``), CSV tables with 17 significant
digits, and PNG figures next to the CSV files. Exit codes: 0 success, 2
configuration error, 3 numerical failure, 4 failed check.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config, parse_config
from .errors import (
    BlowupError,
    BudgetExhausted,
    ConfigError,
    NoSwitchFound,
    ShootDegError,
    StepLimitReached,
    UnsupportedSystem,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
COMMANDS = ("shoot", "sweep", "degree", "find", "dirichlet", "pohozaev", "check")


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


class Writer:
    """Single writer per run directory; remembers what it wrote."""

    def __init__(self, cfg: RunConfig):
        self.dir = Path(cfg.out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.csv = cfg.format in ("csv", "both")
        self.json = cfg.format in ("json", "both")
        self.figures = cfg.figures
        self.written = []

    def path(self, name):
        p = self.dir / name
        self.written.append(str(p))
        return p

    def write_json(self, name, obj):
        if self.json:
            self.path(name).write_text(dumps(obj), encoding="utf-8")

    def write_rows(self, name, header, rows):
        if not self.csv:
            return
        with open(self.path(name), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(x) for x in row])

    def figure(self, name, fn, *args, **kw):
        if self.figures and self.csv:
            fn(*args, path=self.path(name), **kw)


def _cell(x):
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _require(cfg, key):
    if key not in cfg.experiment:
        raise ConfigError(f"experiment.{key} is required for this command", None, f"experiment.{key}")
    return cfg.experiment[key]


def _header(cfg, command):
    return {"command": command, "version": __version__, "config": cfg.to_dict()}


# -- commands -------------------------------------------------------------------

def cmd_shoot(cfg, out):
    from . import plotting
    from .integrator import WallHit, integrate, residual

    spec = cfg.spec()
    alpha = np.array(_require(cfg, "alpha"), dtype=float)
    if alpha.shape != (spec.L,):
        raise ConfigError(f"experiment.alpha needs {spec.L} entries", None, "experiment.alpha")
    traj, outcome = integrate(spec, alpha, cfg.shot)
    res = residual(traj, spec) if len(traj.r) >= 5 else 0.0
    if out.csv:
        traj.write_csv(out.path("trajectory.csv"),
                       [f"system = {spec.name}", f"alpha = {alpha.tolist()}", f"outcome = {outcome.kind}"])
    out.figure("trajectory.png", plotting.trajectory_figure, traj, title=f"{spec.name}: {outcome.kind}")
    out.write_json("shoot.json", {**_header(cfg, "shoot"), "system": spec.describe(),
                                  "alpha": alpha, "outcome": outcome.to_dict(),
                                  "nodes": len(traj.r), "equation_residual": res})
    if outcome.kind in ("blowup", "step_limit"):
        return EXIT_NUMERIC
    return EXIT_OK


def _level(cfg, spec):
    a = cfg.get("a", 1.0)
    if a <= 0:
        raise ConfigError("experiment.a must be positive", None, "experiment.a")
    return a


def cmd_sweep(cfg, out):
    from . import plotting
    from .simplex import SimplexGrid
    from .target import sweep, sweep_rows

    spec = cfg.spec()
    grid = SimplexGrid(_level(cfg, spec), spec.L, int(cfg.get("k", 8)))
    points, results = sweep(spec, grid, cfg.shot, threads=cfg.threads)
    L = spec.L
    header = ([f"alpha_{i + 1}" for i in range(L)] + ["r_alpha", "hit_index_mask"]
              + [f"psi_{i + 1}" for i in range(L)])
    out.write_rows("sweep.csv", header, sweep_rows(points, results))
    out.figure("sweep.png", plotting.sweep_figure, points, results, title=f"{spec.name}: r_alpha")
    out.write_json("sweep.json", {**_header(cfg, "sweep"), "a": grid.a, "k": grid.k,
                                  "points": [dict(alpha=p.alpha, **r.to_dict())
                                             for p, r in zip(points, results)]})
    return EXIT_OK


def cmd_degree(cfg, out):
    from .degree import cached_map, degree, homotopy_degrees
    from .simplex import SimplexGrid
    from .target import phi_map

    spec = cfg.spec()
    a = _level(cfg, spec)
    grid = SimplexGrid(a, spec.L, int(cfg.get("k", 8)))
    target = np.array(cfg.get("target", [a / spec.L] * spec.L), dtype=float)
    fmap = cached_map(phi_map(spec, cfg.shot))
    report = degree(fmap, target, grid)
    payload = {**_header(cfg, "degree"), "report": report.to_dict()}
    if cfg.get("homotopy", False):
        hs = homotopy_degrees(fmap, target, grid)
        payload["homotopy"] = [r.to_dict() for r in hs]
        payload["homotopy_constant"] = len({r.degree for r in hs}) == 1
    out.write_json("degree.json", payload)
    return EXIT_OK


def cmd_find(cfg, out):
    from . import plotting
    from .degree import find_zero

    spec = cfg.spec()
    a = _level(cfg, spec)
    r_threshold = cfg.get("r_threshold", 50.0)
    payload = _header(cfg, "find")
    code = EXIT_OK
    try:
        cand = find_zero(spec, a, cfg.shot, budget=int(cfg.get("budget", 200)),
                         width_tol=cfg.get("width_tol", 1e-10))
    except NoSwitchFound as exc:
        payload.update(status="no_switch", message=str(exc))
        out.write_json("find.json", payload)
        return EXIT_OK
    except BudgetExhausted as exc:
        cand = exc.best
        payload.update(status="budget_exhausted", message=str(exc))
        code = EXIT_NUMERIC
        if cand is None:
            out.write_json("find.json", payload)
            return code
    else:
        payload["status"] = "ok"
    payload["candidate"] = cand.to_dict()
    payload["success"] = cand.success(r_threshold)
    payload["r_threshold"] = r_threshold
    rows = []
    for j, t in enumerate(cand.trace):
        alpha = t.get("alpha") or [t["t"], a - t["t"]]
        rows.append([j + 1, *alpha, t["r_alpha"], "" if t.get("hit_index") is None else t["hit_index"]])
    out.write_rows("find_trace.csv", ["shot"] + [f"alpha_{i + 1}" for i in range(spec.L)]
                   + ["r_alpha", "hit_index"], rows)
    if cand.trace:
        out.figure("find.png", plotting.search_figure, cand.trace, title=f"{spec.name}: search")
    out.write_json("find.json", payload)
    return code


def _solve(cfg, spec, R):
    from .dirichlet import solve_dirichlet_scalar, solve_dirichlet_system

    if spec.name == "lane_emden_scalar":
        return solve_dirichlet_scalar(spec.params["p"], spec.n, R, cfg.shot)
    if spec.L != 2:
        raise UnsupportedSystem("the Dirichlet search handles one or two components")
    a_range = tuple(cfg.get("a_range", [1e-2, 1e2]))
    return solve_dirichlet_system(spec, R, a_range, cfg.shot, budget=int(cfg.get("budget", 500)))


def cmd_dirichlet(cfg, out):
    from . import plotting

    spec = cfg.spec()
    results = []
    for j, R in enumerate(cfg.get("R", [1.0])):
        res = _solve(cfg, spec, R)
        entry = {"R": R, **res.to_dict()}
        if res.found:
            name = f"profile_{j + 1}.csv"
            if out.csv:
                res.solution.write_csv(out.path(name), [f"system = {spec.name}"])
            out.figure(f"profile_{j + 1}.png", plotting.profile_figure, res.solution,
                       title=f"{spec.name}: R = {R:g}")
            entry["equation_residual"] = res.solution.equation_residual()
        results.append(entry)
    out.write_json("dirichlet.json", {**_header(cfg, "dirichlet"), "results": results})
    return EXIT_OK


def cmd_pohozaev(cfg, out):
    from .pohozaev import (
        nonexistence_certificate,
        rellich_scalar,
        verify_cross_identity,
        verify_merged_identity,
        verify_scalar_identity,
    )

    spec = cfg.spec()
    payload = _header(cfg, "pohozaev")
    try:
        cert = nonexistence_certificate(spec, box_max=cfg.get("box_max", 10.0),
                                        samples=int(cfg.get("samples", 4096)), seed=cfg.seed)
        payload["certificate"] = cert.to_dict()
        text = cert.text()
    except UnsupportedSystem as exc:
        payload["certificate"] = None
        text = f"system certificate: unsupported\n  reason: {exc}"
    identities = []
    theta = cfg.get("theta", 0.5)
    for R in cfg.get("R", [1.0]):
        try:
            res = _solve(cfg, spec, R)
        except UnsupportedSystem:
            break
        if not res.found:
            identities.append({"R": R, "solution": res.to_dict()})
            continue
        sol = res.solution
        reports = []
        if spec.name == "lane_emden_scalar":
            reports.append(verify_scalar_identity(sol, spec.params["p"], cfg.shot.wall_tol, spec))
            reports.append(rellich_scalar(sol))
        if spec.name in ("sign_changing", "sign_changing_pq"):
            reports.append(verify_merged_identity(sol, spec.name, spec.params["p"], spec.params.get("q"),
                                                  theta, cfg.shot.wall_tol, spec=spec))
        reports.append(verify_cross_identity(sol))
        identities.append({"R": R, "solution": res.to_dict(), "identities": [r.to_dict() for r in reports]})
    payload["identities"] = identities
    out.write_json("pohozaev.json", payload)
    out.path("certificate.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_check(cfg, out):
    from .system import check_assumptions, check_control_inequality
    from .target import dynamic_estimate_check

    spec = cfg.spec()
    delta0 = cfg.get("delta0", 0.1)
    report = check_assumptions(spec, box_max=cfg.get("box_max", 10.0),
                               samples=int(cfg.get("samples", 10_000)), delta0=delta0, seed=cfg.seed)
    payload = {**_header(cfg, "check"), "assumptions": report.to_dict()}
    ok = report.ok
    if "abar" in cfg.experiment:
        abar = np.array(cfg.experiment["abar"], dtype=float)
        entry = check_control_inequality(spec, abar, delta0, int(cfg.get("samples", 4096)), cfg.seed)
        C = cfg.get("C", entry.C_est)
        dyn = []
        for delta in cfg.get("deltas", [1e-2, 1e-3, 1e-4]):
            d = dynamic_estimate_check(spec, abar, C, delta, cfg=cfg.shot, seed=cfg.seed)
            dyn.append({"delta": delta, **d.to_dict()})
            ok = ok and d.ok
        payload["dynamic_estimate"] = {"abar": abar, "C": C, "runs": dyn}
    payload["ok"] = ok
    out.write_json("check.json", payload)
    return EXIT_OK if ok else EXIT_CHECK


HANDLERS = {
    "shoot": cmd_shoot, "sweep": cmd_sweep, "degree": cmd_degree, "find": cmd_find,
    "dirichlet": cmd_dirichlet, "pohozaev": cmd_pohozaev, "check": cmd_check,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="shootdeg", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="run configuration file")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config entry (repeatable)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--format", choices=("csv", "json", "both"))
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    return ap


def _error(exc, code, stream):
    info = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("line", "key", "r_stop", "position"):
        if getattr(exc, attr, None) is not None:
            info[attr] = getattr(exc, attr)
    stream.write(json.dumps(clean(info), sort_keys=True) + "\n")
    return code


def run(command, config_path=None, overrides=(), out=None, seed=None, threads=None, fmt=None,
        figures=True, stderr=None):
    stderr = stderr or sys.stderr
    if command not in HANDLERS:
        return _error(ConfigError(f"unknown command {command!r}"), EXIT_CONFIG, stderr)
    try:
        cfg = load_config(config_path, overrides) if config_path else parse_config("", overrides)
        if out is not None:
            cfg.out_dir = out
        if seed is not None:
            cfg.seed = seed
        if threads is not None:
            cfg.threads = max(1, threads)
        if fmt is not None:
            cfg.format = fmt
        cfg.figures = cfg.figures and figures
    except ConfigError as exc:
        return _error(exc, EXIT_CONFIG, stderr)
    try:
        writer = Writer(cfg)
        return HANDLERS[command](cfg, writer)
    except ConfigError as exc:
        return _error(exc, EXIT_CONFIG, stderr)
    except (BlowupError, BudgetExhausted, StepLimitReached, FloatingPointError) as exc:
        return _error(exc, EXIT_NUMERIC, stderr)
    except ShootDegError as exc:
        return _error(exc, EXIT_NUMERIC, stderr)
    except OSError as exc:
        return _error(exc, EXIT_CONFIG, stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.set, args.out, args.seed, args.threads,
               args.format, figures=not args.no_figures)


if __name__ == "__main__":
    sys.exit(main())
