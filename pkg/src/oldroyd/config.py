"""Run configuration files.

Grammar::

    # comment
    [section]
    key = value        # trailing comments allowed

Values are numbers, ``true``/``false``, ``none``, bare strings, or
comma-separated lists. Sections and keys are listed in ``SCHEMA``. The
``grid`` and ``model`` sections are required (they may be empty). All
problems are collected and reported together, each with its line number.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field, replace
from typing import Optional

from .diagnostics import DiagnosticsConfig
from .experiments import SCENARIOS, Scenario, default_scenario
from .fourier_field import Grid
from .initial_data import DataSpec
from .integrator import StepperConfig
from .oldroyd_rhs import ModelParams

REQUIRED_SECTIONS = ("grid", "model")


def _opt(conv):
    def parse(text):
        return None if text.lower() == "none" else conv(text)
    return parse


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text):
    return tuple(_int(x.strip()) for x in text.split(",") if x.strip())


SCHEMA = {
    "grid": {"dim": _int, "n": _int},
    "model": {"k": float, "b": float, "nu": float, "eta": float, "mu": float, "alpha": float},
    "stepper": {"dt_init": float, "cfl_safety": float, "t_end": float, "scheme": str,
                "snapshot_every": float, "dt_fixed": _opt(float), "dt_max": _opt(float)},
    "data": {"family": str, "amplitude": float, "seed": _int, "N": _int, "k": float,
             "mode": _ints, "spectrum_slope": float, "kmax": float, "tau_ratio": float,
             "bump_radius": float},
    "diagnostics": {"hs": float, "besov_s": _opt(float), "besov_p": float},
    "run": {"scenario": _opt(str), "output_dir": str, "seed": _int, "checkpoint": _bool},
    "scenario": {"k_values": _floats, "deltas": _floats, "t_cap": float,
                 "snapshots_per_run": _int, "fit_fraction": float, "rate_floor": float,
                 "r2_min": float, "ratio_band": _floats, "drift_tol": float, "gap_tol": float,
                 "threshold": _opt(float), "confirm_dim": _opt(_int), "confirm_n": _int,
                 "workers": _int},
}


class ConfigError(ValueError):
    """All problems found in one config text, ``errors`` is ``[(line, message)]``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(f"line {ln}: {msg}" if ln else msg for ln, msg in self.errors))


@dataclass(frozen=True)
class RunConfig:
    grid: Grid = Grid(2, 64)
    params: ModelParams = ModelParams()
    stepper: StepperConfig = StepperConfig()
    data: DataSpec = DataSpec()
    diagnostics: DiagnosticsConfig = DiagnosticsConfig()
    scenario: Optional[str] = None
    output_dir: str = "runs"
    seed: int = 0
    checkpoint: bool = True
    scenario_overrides: tuple = ()
    explicit: tuple = field(default=(), compare=False)

    def was_set(self, section: str) -> dict:
        """Keys the file set explicitly in one section."""
        return {k: v for s, k, v in self.explicit if s == section}

    def build_scenario(self, name: Optional[str] = None) -> Scenario:
        """Scenario defaults overridden by whatever the file set explicitly."""
        name = name or self.scenario
        if name is None:
            raise ValueError("no scenario named in the config or on the command line")
        sc = default_scenario(name)
        over = dict(self.scenario_overrides)
        grid = self.was_set("grid")
        if grid:
            over.update(grid)
        for section, attr in (("model", "params"), ("stepper", "stepper"), ("data", "data"),
                              ("diagnostics", "diagnostics")):
            changed = self.was_set(section)
            if section == "data" and "seed" not in changed and self.was_set("run").get("seed") is not None:
                changed["seed"] = self.seed
            if changed:
                over[attr] = replace(getattr(sc, attr), **changed)
        return replace(sc, **over)


_SECTION = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_PAIR = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate; raises :class:`ConfigError` listing every problem."""
    errors = []
    values = {s: {} for s in SCHEMA}
    lines = {s: {} for s in SCHEMA}
    headers = {}
    explicit = []
    section = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1)
            if section not in SCHEMA:
                errors.append((ln, f"unknown section [{section}]"))
                section = "?"
            elif section in headers:
                errors.append((ln, f"section [{section}] repeated (first at line {headers[section]})"))
            else:
                headers[section] = ln
            continue
        m = _PAIR.match(line)
        if not m:
            errors.append((ln, f"cannot parse {raw.strip()!r}; expected 'key = value'"))
            continue
        if section is None:
            errors.append((ln, "key outside any section"))
            continue
        if section == "?":
            continue
        key, text_value = m.group(1), m.group(2).strip()
        if key not in SCHEMA[section]:
            errors.append((ln, f"unknown key {key!r} in [{section}]"))
            continue
        if key in values[section]:
            errors.append((ln, f"{key} set twice in [{section}] (first at line {lines[section][key]})"))
            continue
        try:
            value = SCHEMA[section][key](text_value)
        except ValueError as exc:
            errors.append((ln, f"{section}.{key}: {exc}"))
            continue
        values[section][key] = value
        lines[section][key] = ln
        explicit.append((section, key, value))

    for req in REQUIRED_SECTIONS:
        if req not in headers:
            errors.append((0, f"missing required section [{req}]"))

    def build(section, cls, default, extra=None):
        kwargs = dict(values[section])
        if extra:
            kwargs.update(extra)
        base = {f.name: getattr(default, f.name) for f in dataclasses.fields(cls)}
        base.update(kwargs)
        probe = object.__new__(cls)
        for k, v in base.items():
            object.__setattr__(probe, k, v)
        problems = probe.problems()
        for msg in problems:
            key = msg.split("=", 1)[0].strip()
            where = lines[section].get(key, headers.get(section, 0))
            errors.append((where, f"[{section}] {msg}"))
        return None if problems else cls(**base)

    grid = None
    g = values["grid"]
    try:
        grid = Grid(g.get("dim", 2), g.get("n", 64))
    except ValueError as exc:
        errors.append((lines["grid"].get("n", headers.get("grid", 0)), f"[grid] {exc}"))

    run = values["run"]
    data_extra = {}
    if "seed" in run and "seed" not in values["data"]:
        data_extra["seed"] = run["seed"]
    if "mode" in values["data"] and grid is not None and len(values["data"]["mode"]) != grid.dim:
        errors.append((lines["data"]["mode"], f"[data] mode needs {grid.dim} components"))

    params = build("model", ModelParams, ModelParams())
    stepper = build("stepper", StepperConfig, StepperConfig())
    data = build("data", DataSpec, DataSpec(), data_extra)
    diag = DiagnosticsConfig(**values["diagnostics"])
    if diag.besov_p < 1:
        errors.append((lines["diagnostics"].get("besov_p", 0), "[diagnostics] besov_p must be >= 1"))

    scen = run.get("scenario")
    if scen is not None and scen not in SCENARIOS:
        errors.append((lines["run"]["scenario"], f"[run] scenario {scen!r} not one of {SCENARIOS}"))
    sc_over = values["scenario"]
    for key in ("k_values",):
        for kv in sc_over.get(key, ()):
            if not 0 <= kv <= 10:
                errors.append((lines["scenario"][key],
                               f"[scenario] k={kv} outside the admissible coupling range [0, 10]"))
    if "ratio_band" in sc_over and len(sc_over["ratio_band"]) != 2:
        errors.append((lines["scenario"]["ratio_band"], "[scenario] ratio_band needs two values"))

    if errors:
        errors.sort(key=lambda e: e[0])
        raise ConfigError(errors)
    return RunConfig(grid=grid, params=params, stepper=stepper, data=data, diagnostics=diag,
                     scenario=scen, output_dir=run.get("output_dir", "runs"),
                     seed=run.get("seed", data.seed), checkpoint=run.get("checkpoint", True),
                     scenario_overrides=tuple(sorted(sc_over.items())),
                     explicit=tuple(explicit))


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def format_config(cfg: RunConfig) -> str:
    """Effective config as text; ``parse_config(format_config(c))`` reproduces ``c``."""
    out = ["[grid]", f"dim = {cfg.grid.dim}", f"n = {cfg.grid.n}", ""]
    for section, obj in (("model", cfg.params), ("stepper", cfg.stepper), ("data", cfg.data),
                         ("diagnostics", cfg.diagnostics)):
        out.append(f"[{section}]")
        for f in dataclasses.fields(obj):
            out.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
        out.append("")
    out += ["[run]", f"scenario = {_fmt(cfg.scenario)}", f"output_dir = {cfg.output_dir}",
            f"seed = {cfg.seed}", f"checkpoint = {_fmt(cfg.checkpoint)}", ""]
    if cfg.scenario_overrides:
        out.append("[scenario]")
        out += [f"{k} = {_fmt(v)}" for k, v in cfg.scenario_overrides]
        out.append("")
    return "\n".join(out)


def format_scenario(sc: Scenario) -> str:
    """Text echo of a fully resolved scenario."""
    out = ["[grid]", f"dim = {sc.dim}", f"n = {sc.n}", ""]
    for section, obj in (("model", sc.params), ("stepper", sc.stepper), ("data", sc.data),
                         ("diagnostics", sc.diagnostics)):
        out.append(f"[{section}]")
        for f in dataclasses.fields(obj):
            out.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
        out.append("")
    out += ["[run]", f"scenario = {sc.name}", "", "[scenario]"]
    for f in dataclasses.fields(sc):
        if f.name in ("name", "dim", "n", "params", "data", "stepper", "diagnostics"):
            continue
        out.append(f"{f.name} = {_fmt(getattr(sc, f.name))}")
    return "\n".join(out) + "\n"
