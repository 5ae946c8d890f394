"""Scenario configuration, execution and serialization.

A scenario is a JSON document naming a model, a formalism, integrator and
averaging settings, and the virial functions to report. Running it yields a
trajectory CSV, a JSON report and a convergence CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from . import averaging as av
from .errors import ConfigError, InvalidParams, ValidationFailure
from .models import ModelDescriptor, build
from .system import FORMALISMS, Dynamics, VirialFunction

SCENARIO_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "formalism", "integrator"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "model": {
            "type": "object",
            "required": ["name"],
            "additionalProperties": False,
            "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
        },
        "formalism": {"enum": list(FORMALISMS)},
        "initial_state": {
            "oneOf": [{"type": "string"}, {"type": "array", "items": {"type": "number"}, "minItems": 1}]
        },
        "integrator": {
            "type": "object",
            "required": ["t_max"],
            "additionalProperties": False,
            "properties": {
                "t_max": {"type": "number", "exclusiveMinimum": 0},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "atol": {"type": "number", "exclusiveMinimum": 0},
                "max_step": {"type": "number", "exclusiveMinimum": 0},
                "dense_dt": {"type": "number", "exclusiveMinimum": 0},
                "method": {"enum": ["RK45", "DOP853"]},
            },
        },
        "averaging": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["cesaro", "periodic"]},
                "convergence_tol": {"type": "number", "exclusiveMinimum": 0},
                "period": {"oneOf": [{"enum": ["auto", "none"]}, {"type": "number", "exclusiveMinimum": 0}]},
                "period_eps": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "virial": {
            "type": "array",
            "items": {
                "oneOf": [
                    {"type": "string"},
                    {
                        "type": "object",
                        "required": ["name", "section"],
                        "additionalProperties": False,
                        "properties": {
                            "name": {"type": "string"},
                            "section": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                        },
                    },
                ]
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {
                    "type": "array",
                    "items": {"enum": ["trajectory", "report", "convergence"]},
                    "uniqueItems": True,
                },
            },
        },
    },
}

ALL_OUTPUTS = ("trajectory", "report", "convergence")


@dataclass
class Scenario:
    config: dict
    path: Optional[Path] = None

    @property
    def name(self) -> str:
        if "name" in self.config:
            return self.config["name"]
        return self.path.stem if self.path is not None else "scenario"


@dataclass
class Prepared:
    scenario: Scenario
    model: ModelDescriptor
    dynamics: Dynamics
    s0: np.ndarray
    settings: av.IntegratorSettings
    virials: list[str]


def load(path) -> Scenario:
    """Read and schema-check a scenario file; IO and schema problems raise :class:`ConfigError`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    check_schema(config, str(path))
    return Scenario(config, path)


def check_schema(config: dict, where: str = "scenario") -> None:
    try:
        jsonschema.validate(config, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: schema violation at {loc}: {exc.message}") from None


def settings_from(config: dict, t_max: Optional[float] = None) -> av.IntegratorSettings:
    cfg = dict(config["integrator"])
    if t_max is not None:
        cfg["t_max"] = t_max
        if "dense_dt" in cfg and cfg["dense_dt"] > t_max / 100:
            del cfg["dense_dt"]
    try:
        return av.IntegratorSettings(**cfg)
    except ValueError as exc:
        raise ConfigError(f"integrator settings: {exc}") from None


def prepare(scenario: Scenario, t_max: Optional[float] = None) -> Prepared:
    """Build and validate the model, resolve the initial state and the virial list.

    Raises :class:`ValidationFailure` (or a subclass-compatible error) when
    the model, its parameters or the requested virial functions are invalid.
    """
    config = scenario.config
    model_cfg = config["model"]
    try:
        model = build(model_cfg["name"], model_cfg.get("params"))
    except InvalidParams as exc:
        raise ValidationFailure(f"invalid parameters for {model_cfg['name']}: {exc}") from exc
    formalism = config["formalism"]
    if formalism not in model.formalisms:
        raise ValidationFailure(
            f"model {model.name} does not support formalism {formalism} (supports {', '.join(model.formalisms)})"
        )
    dyn = model.dynamics(formalism)
    init = config.get("initial_state")
    if init is None or isinstance(init, str):
        s0 = model.initial_state(init, formalism)
    else:
        s0 = np.asarray(init, dtype=float)
        if s0.shape != (dyn.dim,):
            raise ValidationFailure(f"initial_state must have {dyn.dim} components {dyn.state_names}")
    if not np.all(dyn.in_chart(s0)):
        raise ValidationFailure("initial state lies outside the chart of the model")
    names = []
    extra: dict[str, VirialFunction] = {}
    for item in config.get("virial", list(dyn.virials)):
        if isinstance(item, str):
            if item not in dyn.virials:
                raise ValidationFailure(
                    f"virial function {item!r} is not registered for {model.name}/{formalism}; "
                    f"available: {', '.join(dyn.virials)}"
                )
            names.append(item)
        else:
            comps = np.asarray(item["section"], dtype=float)
            if comps.shape != (dyn.dim_fibre,):
                raise ValidationFailure(f"section {item['name']!r} needs {dyn.dim_fibre} components")
            if item["name"] in dyn.virials or item["name"] in extra:
                raise ValidationFailure(f"virial name {item['name']!r} is already in use")
            extra[item["name"]] = dyn.section_virial(comps, item["name"])
            names.append(item["name"])
    if extra:
        dyn = _with_virials(dyn, extra)
    return Prepared(scenario, model, dyn, s0, settings_from(config, t_max), names)


def _with_virials(dyn: Dynamics, extra: dict[str, VirialFunction]) -> Dynamics:
    from dataclasses import replace

    merged = dict(dyn.virials)
    merged.update(extra)
    return replace(dyn, virials=merged)


def _period_setting(config: dict, override: Optional[str]) -> Any:
    avg = config.get("averaging", {})
    if override is not None:
        if override in ("auto", "none"):
            return override
        try:
            value = float(override)
        except ValueError:
            raise ConfigError(f"--period must be auto, none or a number, got {override!r}") from None
        if not value > 0:
            raise ConfigError("--period must be positive")
        return value
    return avg.get("period", "auto" if avg.get("mode") == "periodic" else "none")


@dataclass
class RunResult:
    report: dict
    trajectory_csv: str
    convergence_csv: str
    aborted: bool


def execute(prepared: Prepared, period: Any = None) -> RunResult:
    """Integrate, average and serialize; a tripped guard yields partial results."""
    dyn, cfg = prepared.dynamics, prepared.settings
    config = prepared.scenario.config
    avg_cfg = config.get("averaging", {})
    tol = avg_cfg.get("convergence_tol", av.CESARO_TOL)
    traj = av.integrate_dynamics(dyn, prepared.s0, cfg, raise_on_guard=False)
    setting = _period_setting(config, period)
    tau = None
    if setting == "auto":
        tau = av.detect_period(traj, eps=avg_cfg.get("period_eps", 1e-3), field_fn=dyn.field, angles=dyn.angles)
    elif setting != "none":
        tau = float(setting)
        if tau > traj.span:
            tau = None
    report = av.virial_report(dyn, traj, prepared.virials, period=tau, tol=tol)
    return RunResult(
        _report_dict(prepared, traj, report, setting),
        _trajectory_csv(dyn, traj, prepared.virials),
        _convergence_csv(dyn, traj, prepared.virials),
        traj.aborted,
    )


def _clean(value):
    """JSON-safe floats: non-finite values become strings."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    return value


def _report_dict(prepared: Prepared, traj: av.Trajectory, report: av.VirialReport, setting) -> dict:
    cfg = prepared.settings
    entries = {}
    for name, e in report.entries.items():
        entries[name] = {
            "description": prepared.dynamics.virials[name].description,
            "cesaro_average": e.cesaro,
            "half_average": e.half,
            "periodic_average": e.periodic,
            "boundary_term": e.boundary_term,
            "residual": e.residual,
            "tolerance": e.tolerance,
            "consistent": e.consistent,
            "converged": e.converged,
            "bound_warning": e.bound_warning,
            "max_abs_G": e.max_abs_G,
        }
    stats = {k: v for k, v in traj.stats.items() if k != "drift"}
    return _clean(
        {
            "scenario": prepared.scenario.name,
            "model": prepared.model.name,
            "params": prepared.model.params,
            "formalism": prepared.dynamics.formalism,
            "state_names": list(prepared.dynamics.state_names),
            "initial_state": prepared.s0,
            "integrator": {
                "method": cfg.method,
                "rtol": cfg.rtol,
                "atol": cfg.atol,
                "max_step": cfg.max_step if math.isfinite(cfg.max_step) else None,
                "t_max": cfg.t_max,
                "dense_dt": cfg.dt,
            },
            "span": report.span,
            "period_setting": setting,
            "period": report.period,
            "guard_tripped": traj.aborted,
            "guard_message": traj.message,
            "virial": entries,
            "drift": report.drift,
            "stats": stats,
            "constants": {k: {"value": c.value, "provenance": c.provenance} for k, c in prepared.model.constants.items()},
        }
    )


def _fmt(x: float) -> str:
    return "%.17g" % x


def _write_rows(header: list[str], columns: list[np.ndarray]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _trajectory_csv(dyn: Dynamics, traj: av.Trajectory, names: list[str]) -> str:
    x, y = dyn.split(traj.states)
    header = ["t", *dyn.state_names, "E"]
    cols = [traj.times, *traj.states.T, dyn.energy(x, y)]
    for n in names:
        vf = dyn.virials[n]
        header += [f"G_{n}", f"dG_{n}"]
        cols += [vf.value(x, y), vf.integrand(x, y)]
    return _write_rows(header, cols)


def _convergence_csv(dyn: Dynamics, traj: av.Trajectory, names: list[str]) -> str:
    from scipy.integrate import cumulative_trapezoid

    x, y = dyn.split(traj.states)
    t = traj.times[1:]
    cols = [t]
    for n in names:
        integral = cumulative_trapezoid(dyn.virials[n].integrand(x, y), traj.times)
        cols.append(integral / t)
    return _write_rows(["T", *names], cols)


def write_outputs(result: RunResult, out_dir, formats=ALL_OUTPUTS) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        if "trajectory" in formats:
            written.append(out / "trajectory.csv")
            written[-1].write_text(result.trajectory_csv)
        if "report" in formats:
            written.append(out / "report.json")
            written[-1].write_text(json.dumps(result.report, indent=2, sort_keys=True) + "\n")
        if "convergence" in formats:
            written.append(out / "convergence.csv")
            written[-1].write_text(result.convergence_csv)
    except OSError as exc:
        raise ConfigError(f"cannot write outputs to {out}: {exc}") from exc
    return written


def example_scenario(model: ModelDescriptor, formalism: str) -> dict:
    """A minimal valid scenario for ``model`` in ``formalism``."""
    period = model.constants.get("period")
    t_max = 2.0 * period.value if period is not None else 20.0
    return {
        "name": f"{model.name}_{formalism}",
        "model": {"name": model.name, "params": _clean(model.params)},
        "formalism": formalism,
        "integrator": {"t_max": t_max, "rtol": 1e-10, "atol": 1e-12},
        "averaging": {"mode": "cesaro", "period": "auto"},
    }
