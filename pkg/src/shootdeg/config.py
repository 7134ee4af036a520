"""Run configuration files.

INI-style sections of ``key = value`` lines::

    [system]
    name = custom
    n = 3
    f1 = "u2^p - u1^p"
    f2 = "u1^p"

    [params]
    p = 5

    [shot]
    rel_tol = 1e-10

    [experiment]
    a = 2
    alpha = 1.0, 1.0

    [output]
    dir = out
    format = both
    seed = 0

Expression strings may be quoted. Unknown sections and keys are rejected;
``[params]`` takes any identifier, checked against the chosen system.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields

from .errors import (
    ConfigParseError,
    ConfigValidationError,
    ExprSyntaxError,
    ShootDegError,
    UnknownIdentifier,
)
from .expr import parse as parse_expr
from .integrator import ShotConfig
from .system import BUILTIN_NAMES, BUILTIN_PARAMS, builtin

SECTIONS = ("system", "params", "shot", "experiment", "output")
SYSTEM_KEYS = {"name", "n", "L", "potential", "potential_kind"}
SHOT_KEYS = {f.name for f in fields(ShotConfig)}
OUTPUT_KEYS = {"dir", "format", "seed", "threads", "figures"}

# experiment keys and their kinds
EXPERIMENT_KEYS = {
    "alpha": "list", "a": "pos", "k": "int", "target": "list", "abar": "list",
    "deltas": "list", "delta0": "pos", "C": "pos", "samples": "int", "box_max": "pos",
    "R": "list", "a_range": "list", "budget": "int", "r_threshold": "pos",
    "width_tol": "pos", "theta": "float", "homotopy": "bool",
}
FORMATS = ("csv", "json", "both")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*$")


@dataclass
class RunConfig:
    system: str = "zero"
    n: int = 3
    params: dict = field(default_factory=dict)
    exprs: tuple = ()
    potential: str | None = None
    potential_kind: str | None = None
    shot: ShotConfig = field(default_factory=ShotConfig)
    experiment: dict = field(default_factory=dict)
    out_dir: str = "out"
    format: str = "both"
    seed: int = 0
    threads: int = 1
    figures: bool = True

    def spec(self):
        if self.system == "custom":
            return builtin("custom", {**self.params, "n": self.n}, exprs=list(self.exprs),
                           potential_expr=self.potential, potential_kind=self.potential_kind)
        return builtin(self.system, {**self.params, "n": self.n})

    def get(self, key, default=None):
        return self.experiment.get(key, default)

    def to_dict(self):
        return {
            "system": self.system, "n": self.n, "params": dict(self.params),
            "exprs": list(self.exprs), "potential": self.potential,
            "potential_kind": self.potential_kind,
            "shot": {f.name: getattr(self.shot, f.name) for f in fields(ShotConfig)},
            "experiment": dict(self.experiment),
            "output": {"dir": self.out_dir, "format": self.format, "seed": self.seed,
                       "threads": self.threads, "figures": self.figures},
        }


def _unquote(v: str) -> str:
    v = v.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        return v[1:-1]
    return v


def _line_of(text: str, section: str, key: str | None = None):
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if current == section and key is not None:
            k = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            if k == key:
                return i
    return None


def _number(kind, raw, path, line):
    try:
        if kind == "int":
            v = int(raw)
        elif kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError
            return low in ("true", "yes", "1", "on")
        elif kind == "list":
            v = [float(x) for x in raw.replace(";", ",").split(",") if x.strip()]
            if not v or not all(math.isfinite(x) for x in v):
                raise ValueError
            return v
        else:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
    except ValueError:
        raise ConfigValidationError(f"{path}: cannot read {raw!r} as {kind}", line, path) from None
    if kind == "pos" and v <= 0:
        raise ConfigValidationError(f"{path} must be positive", line, path)
    if kind == "int" and v < 0:
        raise ConfigValidationError(f"{path} must be nonnegative", line, path)
    return v


def parse_config(text: str, overrides=()) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigParseError(f"line {exc.lineno}: key outside any section", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigParseError(f"line {line}: cannot parse {exc.errors[0][1] if exc.errors else ''}",
                               line) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigParseError(f"line {exc.lineno}: {exc.message}", exc.lineno) from None
    except configparser.Error as exc:
        raise ConfigParseError(str(exc)) from None

    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigValidationError(f"override {item!r} is not section.key=value", None, item)
        path, value = item.split("=", 1)
        section, key = path.strip().split(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key.strip(), value.strip())

    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigValidationError(f"unknown section [{section}]", _line_of(text, section), section)

    def keys(section):
        return list(cp[section].keys()) if cp.has_section(section) else []

    def raw(section, key):
        return _unquote(cp[section][key])

    def check_keys(section, allowed):
        for key in keys(section):
            if key not in allowed:
                raise ConfigValidationError(f"unknown key {section}.{key}",
                                            _line_of(text, section, key), f"{section}.{key}")

    cfg = RunConfig()
    # system
    sys_keys = keys("system")
    exprs = {}
    for key in sys_keys:
        m = re.fullmatch(r"f([1-9][0-9]*)", key)
        if m:
            exprs[int(m.group(1))] = raw("system", key)
        elif key not in SYSTEM_KEYS:
            raise ConfigValidationError(f"unknown key system.{key}",
                                        _line_of(text, "system", key), f"system.{key}")
    if "name" in sys_keys:
        cfg.system = raw("system", "name")
    elif exprs:
        cfg.system = "custom"
    if cfg.system not in BUILTIN_NAMES:
        raise ConfigValidationError(f"unknown system {cfg.system!r}",
                                    _line_of(text, "system", "name"), "system.name")
    if "n" in sys_keys:
        cfg.n = _number("int", raw("system", "n"), "system.n", _line_of(text, "system", "n"))
        if cfg.n < 3:
            raise ConfigValidationError("system.n must be at least 3",
                                        _line_of(text, "system", "n"), "system.n")
    if cfg.system == "custom":
        if not exprs:
            raise ConfigValidationError("custom system needs f1, f2, ...", None, "system.f1")
        if sorted(exprs) != list(range(1, len(exprs) + 1)):
            raise ConfigValidationError("expressions must be numbered f1..fL without gaps",
                                        None, "system.f1")
        cfg.exprs = tuple(exprs[i] for i in sorted(exprs))
        if "L" in sys_keys:
            L = _number("int", raw("system", "L"), "system.L", _line_of(text, "system", "L"))
            if L != len(cfg.exprs):
                raise ConfigValidationError(f"system.L = {L} but {len(cfg.exprs)} expressions given",
                                            _line_of(text, "system", "L"), "system.L")
        if "potential" in sys_keys:
            cfg.potential = raw("system", "potential")
        if "potential_kind" in sys_keys:
            cfg.potential_kind = raw("system", "potential_kind")
            if cfg.potential_kind not in ("type1", "type2"):
                raise ConfigValidationError("system.potential_kind must be type1 or type2",
                                            _line_of(text, "system", "potential_kind"),
                                            "system.potential_kind")
    else:
        for key in ("potential", "potential_kind", "L") + tuple(f"f{i}" for i in exprs):
            if key in sys_keys and not (key == "L" and cfg.system == "zero"):
                raise ConfigValidationError(f"system.{key} only applies to custom systems",
                                            _line_of(text, "system", key), f"system.{key}")
        if "L" in sys_keys:
            cfg.params["L"] = _number("int", raw("system", "L"), "system.L",
                                      _line_of(text, "system", "L"))

    # params
    for key in keys("params"):
        line = _line_of(text, "params", key)
        if not _IDENT.match(key):
            raise ConfigValidationError(f"params.{key} is not an identifier", line, f"params.{key}")
        if cfg.system != "custom" and key not in BUILTIN_PARAMS[cfg.system]:
            raise ConfigValidationError(f"unknown key params.{key} for system {cfg.system}",
                                        line, f"params.{key}")
        cfg.params[key] = _number("float", raw("params", key), f"params.{key}", line)

    # shot
    check_keys("shot", SHOT_KEYS)
    shot = {}
    for key in keys("shot"):
        kind = "int" if key == "max_steps" else "pos"
        shot[key] = _number(kind, raw("shot", key), f"shot.{key}", _line_of(text, "shot", key))
    try:
        cfg.shot = ShotConfig(**shot)
    except (ValueError, ShootDegError) as exc:
        raise ConfigValidationError(f"shot: {exc}", None, "shot") from None

    # experiment
    check_keys("experiment", EXPERIMENT_KEYS)
    for key in keys("experiment"):
        kind = EXPERIMENT_KEYS[key]
        cfg.experiment[key] = _number(kind, raw("experiment", key), f"experiment.{key}",
                                      _line_of(text, "experiment", key))
    for key in ("alpha", "target", "abar"):
        if key in cfg.experiment and min(cfg.experiment[key]) < 0:
            raise ConfigValidationError(f"experiment.{key} must be nonnegative",
                                        _line_of(text, "experiment", key), f"experiment.{key}")
    for key in ("R", "deltas"):
        if key in cfg.experiment and min(cfg.experiment[key]) <= 0:
            raise ConfigValidationError(f"experiment.{key} entries must be positive",
                                        _line_of(text, "experiment", key), f"experiment.{key}")

    # output
    check_keys("output", OUTPUT_KEYS)
    if "dir" in keys("output"):
        cfg.out_dir = raw("output", "dir")
    if "format" in keys("output"):
        cfg.format = raw("output", "format")
        if cfg.format not in FORMATS:
            raise ConfigValidationError("output.format must be csv, json or both",
                                        _line_of(text, "output", "format"), "output.format")
    for key, kind in (("seed", "int"), ("threads", "int"), ("figures", "bool")):
        if key in keys("output"):
            setattr(cfg, key, _number(kind, raw("output", key), f"output.{key}",
                                      _line_of(text, "output", key)))
    if cfg.threads < 1:
        raise ConfigValidationError("output.threads must be at least 1", None, "output.threads")

    # each expression on its own, so errors name the offending key
    if cfg.system == "custom":
        texts = [(f"f{i + 1}", t) for i, t in enumerate(cfg.exprs)]
        if cfg.potential is not None:
            texts.append(("potential", cfg.potential))
        for key, t in texts:
            line = _line_of(text, "system", key)
            try:
                parse_expr(t, len(cfg.exprs), cfg.params)
            except UnknownIdentifier as exc:
                raise ConfigValidationError(
                    f"system.{key}: unknown identifier {exc.name!r} (parameters go under [params])",
                    line, f"system.{key}") from None
            except ExprSyntaxError as exc:
                raise ConfigValidationError(f"system.{key}: {exc}", line, f"system.{key}") from None

    # all referenced parameters bound: building the system checks that
    try:
        cfg.spec()
    except KeyError as exc:
        name = exc.args[0] if exc.args else "?"
        raise ConfigValidationError(f"parameter {name} is not bound", None, f"params.{name}") from None
    except ShootDegError as exc:
        raise ConfigValidationError(str(exc), None, "system") from None
    return cfg


def load_config(path, overrides=()) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from None
    return parse_config(text, overrides)
