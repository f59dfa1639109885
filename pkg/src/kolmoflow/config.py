"""
Run configuration.

Config files are INI text.  A ``[run]`` section holds settings shared by all
commands (``command``, ``out``, ``seed``, ``workers``); one section per
command holds its parameters.  Every key has a type, a default and an allowed
range; unknown keys are rejected with a suggestion.

    [run]
    command = construct
    out = runs/eps01

    [construct]
    epsilon = 0.01
"""

from __future__ import annotations

import configparser
import difflib
import re
from dataclasses import dataclass, field
from typing import Any, Callable

COMMANDS = ("construct", "verify", "simulate", "nodecay", "ratefit", "coercivity", "sweep")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None, key: str | None = None):
        self.line, self.column, self.key = line, column, key
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


@dataclass(frozen=True)
class Key:
    kind: str  # float, int, bool, str, path, floats, choice
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple[str, ...] = ()


def _f(lo=None, hi=None, lo_open=False, hi_open=False):
    def ok(v):
        if lo is not None and (v <= lo if lo_open else v < lo):
            return False
        if hi is not None and (v >= hi if hi_open else v > hi):
            return False
        return True

    left = "(" if lo_open else "["
    right = ")" if hi_open else "]"
    return ok, f"in {left}{'-inf' if lo is None else lo}, {'inf' if hi is None else hi}{right}"


def _even(lo, hi):
    return (lambda v: lo <= v <= hi and v % 2 == 0), f"an even integer in [{lo}, {hi}]"


def K(kind, default, rng=None, choices=()):
    check, rule = rng if rng else (None, "")
    return Key(kind, default, check, rule, tuple(choices))


SCHEMA: dict[str, dict[str, Key]] = {
    "run": {
        "command": K("choice", None, choices=COMMANDS),
        "out": K("path", "runs"),
        "seed": K("int", 0, _f(0, 2**32 - 1)),
        "workers": K("int", 2, _f(1, 64)),
    },
    "construct": {
        "epsilon": K("floats", [0.01], _f(0, 0.05)),
        "tol": K("float", 1e-12, _f(0, 1e-6, lo_open=True)),
        "n": K("int", 64, _even(16, 512)),
        "max_iter": K("int", 200, _f(1, 10000)),
    },
    "verify": {
        "snapshot": K("path", None),
        "report": K("path", ""),
        "stationarity_tol": K("float", 1e-9, _f(0, 1, lo_open=True)),
    },
    "simulate": {
        "nu": K("float", 1e-2, _f(0, 1)),
        "t_end": K("float", 10.0, _f(0, 1e6, lo_open=True)),
        "dt": K("float", 0.02, _f(0, 1, lo_open=True)),
        "mode": K("choice", "nonlinear", choices=("nonlinear", "linear_bar", "heat")),
        "delta": K("float", 1.0, _f(0, 100, lo_open=True)),
        "n": K("int", 64, _even(8, 1024)),
        "initial": K("choice", "stationary", choices=("stationary", "bar", "bar_sinsin", "sinsin")),
        "epsilon": K("float", 1e-3, _f(0, 0.05)),
        "record_every": K("int", 10, _f(1, 10**6)),
        "checkpoint_every": K("int", 0, _f(0, 10**9)),
    },
    "nodecay": {
        "nu": K("float", 1e-2, _f(0, 1, lo_open=True)),
        "epsilon": K("float", 1e-3, _f(0, 0.05, lo_open=True)),
        "n": K("int", 128, _even(16, 1024)),
        "dt": K("float", 0.02, _f(0, 1, lo_open=True)),
        "threshold": K("float", 0.5, _f(0, 1)),
        "control": K("bool", True),
    },
    "ratefit": {
        "delta": K("float", 0.5, _f(0, 100, lo_open=True)),
        "nus": K("floats", [1e-2, 2.5e-3, 6.25e-4], _f(0, 1, lo_open=True)),
        "ny": K("int", 256, _even(16, 4096)),
        "target": K("float", 0.5, _f(0, 2)),
        "target_tol": K("float", 0.15, _f(0, 1)),
        "heat_tol": K("float", 0.05, _f(0, 1)),
    },
    "coercivity": {
        "delta": K("float", 0.0, _f(0, 100)),
        "channel": K("bool", False),
        "samples": K("int", 100, _f(10, 10**6)),
        "epsilon": K("float", 0.0, _f(0, 0.5, hi_open=True)),
        "kmax": K("int", 32, _f(16, 4096)),
    },
    "sweep": {
        "command": K("choice", "construct", choices=("construct", "nodecay", "coercivity", "simulate")),
        "parameter": K("str", "epsilon"),
        "values": K("floats", [0.005, 0.01, 0.02]),
    },
}


@dataclass
class RunConfig:
    command: str
    params: dict[str, Any]
    out: str = "runs"
    seed: int = 0
    workers: int = 2
    sweep: dict[str, Any] = field(default_factory=dict)

    def echo(self) -> dict:
        d = {"command": self.command, "out": self.out, "seed": self.seed, "workers": self.workers, self.command: dict(self.params)}
        if self.sweep:
            d["sweep"] = dict(self.sweep)
        return d

    def to_ini(self) -> str:
        """Config text that reproduces this run."""
        lines = ["[run]", f"command = {self.command}", f"out = {self.out}", f"seed = {self.seed}", f"workers = {self.workers}", ""]
        sections = [(self.command, self.params)]
        if self.sweep:
            sections.append(("sweep", self.sweep))
        for name, vals in sections:
            lines.append(f"[{name}]")
            for k, v in vals.items():
                lines.append(f"{k} = {_fmt(v)}")
            lines.append("")
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, (list, tuple)):
        return ", ".join(repr(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _locate(text: str, section: str | None, key: str) -> tuple[int | None, int | None]:
    """1-based (line, column) of ``key`` inside ``section``."""
    current = None
    pat = re.compile(rf"^(\s*)({re.escape(key)})\s*[=:]", re.IGNORECASE)
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            continue
        if section is None or current == section:
            m = pat.match(raw)
            if m:
                return i, len(m.group(1)) + 1
    return None, None


def _convert(name: str, key: Key, raw: str):
    raw = raw.strip()
    try:
        if key.kind == "float":
            v = float(raw)
        elif key.kind == "int":
            v = int(raw)
        elif key.kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(raw)
            v = low in ("true", "yes", "1", "on")
        elif key.kind == "floats":
            v = [float(p) for p in re.split(r"[,\s]+", raw) if p]
            if not v:
                raise ValueError(raw)
        elif key.kind == "choice":
            if raw not in key.choices:
                raise ConfigError(f"{name!r} must be one of {', '.join(key.choices)}, got {raw!r}", key=name)
            v = raw
        else:
            v = raw
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"{name!r} expects a {key.kind} value, got {raw!r}", key=name) from None
    if key.check is not None:
        vals = v if isinstance(v, list) else [v]
        for x in vals:
            if not key.check(x):
                raise ConfigError(f"{name!r} must be {key.rule}, got {x!r}", key=name)
    return v


def _section_values(name: str, given: dict[str, str], text: str) -> dict[str, Any]:
    schema = SCHEMA[name]
    out = {}
    for k, raw in given.items():
        if k not in schema:
            line, col = _locate(text, name, k)
            close = difflib.get_close_matches(k, schema.keys(), n=1)
            hint = f"; did you mean {close[0]!r}?" if close else ""
            raise ConfigError(f"unknown key {k!r} in [{name}]{hint}", line, col, key=k)
        try:
            out[k] = _convert(k, schema[k], raw)
        except ConfigError as e:
            line, col = _locate(text, name, k)
            raise ConfigError(str(e), line, col, key=k) from None
    for k, spec in schema.items():
        if k not in out:
            out[k] = list(spec.default) if isinstance(spec.default, list) else spec.default
    return out


def parse_config(text: str, command: str | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Parse and validate config text; ``overrides`` (raw strings or values) win over the file."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("expected a [section] header", e.lineno, 1) from None
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"duplicate key {e.option!r} in [{e.section}]", e.lineno, 1, key=e.option) from None
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"duplicate section [{e.section}]", e.lineno, 1) from None
    except configparser.ParsingError as e:
        lineno = e.errors[0][0] if e.errors else None
        raise ConfigError("malformed line (expected key = value)", lineno, 1) from None
    for sec in cp.sections():
        if sec not in SCHEMA:
            line = next((i for i, l in enumerate(text.splitlines(), 1) if l.strip() == f"[{sec}]"), None)
            close = difflib.get_close_matches(sec, SCHEMA.keys(), n=1)
            hint = f"; did you mean [{close[0]}]?" if close else ""
            raise ConfigError(f"unknown section [{sec}]{hint}", line, 1)
    run_given = dict(cp["run"]) if cp.has_section("run") else {}
    run = _section_values("run", run_given, text)
    cmd = command or run["command"]
    if cmd is None:
        raise ConfigError("no command given (set 'command' in [run])", key="command")
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}", key="command")
    overrides = dict(overrides or {})
    for k in ("out", "seed", "workers"):
        if k in overrides:
            run[k] = _convert(k, SCHEMA["run"][k], str(overrides.pop(k)))
    sweep = {}
    if cmd == "sweep":
        sweep = _section_values("sweep", dict(cp["sweep"]) if cp.has_section("sweep") else {}, text)
        target = sweep["command"]
        if sweep["parameter"] not in SCHEMA[target]:
            raise ConfigError(f"sweep parameter {sweep['parameter']!r} is not a key of [{target}]", *_locate(text, "sweep", "parameter"), key="parameter")
    target = sweep.get("command", cmd)
    given = dict(cp[target]) if cp.has_section(target) else {}
    params = _section_values(target, given, text)
    for k, v in overrides.items():
        if v is None:
            continue
        if k not in SCHEMA[target]:
            close = difflib.get_close_matches(k, SCHEMA[target].keys(), n=1)
            hint = f"; did you mean {close[0]!r}?" if close else ""
            raise ConfigError(f"unknown option {k!r} for {target}{hint}", key=k)
        params[k] = _convert(k, SCHEMA[target][k], _fmt(v) if not isinstance(v, str) else v)
    for k, spec in SCHEMA[target].items():
        if spec.default is None and params[k] is None:
            raise ConfigError(f"missing required key {k!r} for {target}", key=k)
    return RunConfig(command=cmd, params=params, out=run["out"], seed=run["seed"], workers=run["workers"], sweep=sweep)
