"""Run configuration: a flat ``key = value`` text format with dotted keys.

Example::

    # comments start with '#'
    domain.dim = 1
    domain.lengths = 1.0
    domain.cells = 64
    data.preset = slope_1d
    data.amp = 0.5           # extra data.* keys are preset parameters
    time.T = 0.004
    time.j = 32
    stepper.omega = 0.5

Lists are comma separated.  Unknown keys are rejected so typos fail loudly.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .elliptic import LinearSolveConfig
from .grid import Grid, build_grid
from .stepper import ProblemData, StepperConfig


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or "." not in key:
            raise ConfigError(f"line {lineno}: keys must be dotted 'section.name', got {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _scalar(s: str):
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return ast.literal_eval(s)
    except (ValueError, SyntaxError):
        return s


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split(",") if v.strip())


def _names(s: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in s.split(",") if v.strip())


@dataclass(frozen=True)
class RunConfig:
    dim: int = 1
    lengths: tuple[float, ...] = (1.0,)
    cells: tuple[int, ...] = (32,)
    preset: str = "slope_1d"
    preset_params: tuple[tuple[str, object], ...] = ()
    data_file: str | None = None
    c0: float | None = None
    T: float = 0.004
    j: int = 16
    stepper: StepperConfig = field(default_factory=StepperConfig)
    snapshot_stride: int = 1
    test_functions: tuple[str, ...] = ("parabola", "sine_squared")
    rho_steps: int | None = None
    compare_times: tuple[float, ...] = ()
    verify_samples: int = 100_000
    verify_oracle_draws: int = 20
    sweep_axis: str = "j"
    sweep_values: tuple[float, ...] = ()
    sweep_mode: str = "rothe"
    source: str = ""

    def grid(self) -> Grid:
        return build_grid(self.dim, self.lengths, self.cells)

    def data(self) -> ProblemData:
        """Build and validate the problem data (raises ``ValidationError``)."""
        from .presets import make_data

        g = self.grid()
        if self.data_file:
            arr = np.load(self.data_file)
            c0 = float(arr["c0"]) if self.c0 is None else self.c0
            return ProblemData(g, arr["b0"], arr["b1"], c0, arr["u0"], arr["lap_u0"])
        d = make_data(self.preset, g, **dict(self.preset_params))
        if self.c0 is not None:
            d = ProblemData(g, d.b0, d.b1, self.c0, d.u0, d.lap_u0)
        return d

    def with_overrides(self, **kw) -> "RunConfig":
        from dataclasses import replace

        return replace(self, **kw)

    def echo(self) -> dict:
        """Plain-data view for the run manifest."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "stepper":
                v = {g.name: getattr(v, g.name) for g in fields(v) if g.name != "linear"}
                v["linear"] = {g.name: getattr(self.stepper.linear, g.name) for g in fields(self.stepper.linear)}
            elif f.name == "preset_params":
                v = {k: p for k, p in v}
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


_STEPPER_KEYS = {"omega": float, "fp_tol": float, "fp_max_iter": int, "homotopy_stages": int,
                 "smoothing_passes": int, "anderson_depth": int}
_LINEAR_KEYS = {"method": str, "cg_rel_tol": float, "cg_max_iter": int, "jacobi": bool}


def config_from_mapping(kv: dict[str, str], source: str = "") -> RunConfig:
    kw: dict = {"source": source}
    step: dict = {}
    lin: dict = {}
    params: list = []
    for key, raw in kv.items():
        section, name = key.split(".", 1)
        try:
            if section == "domain" and name == "dim":
                kw["dim"] = int(raw)
            elif section == "domain" and name == "lengths":
                kw["lengths"] = _floats(raw)
            elif section == "domain" and name == "cells":
                kw["cells"] = _ints(raw)
            elif section == "data" and name == "preset":
                kw["preset"] = raw
            elif section == "data" and name == "file":
                kw["data_file"] = raw
            elif section == "data" and name == "c0":
                kw["c0"] = float(raw)
            elif section == "data":
                params.append((name, _scalar(raw)))
            elif section == "time" and name == "T":
                kw["T"] = float(raw)
            elif section == "time" and name == "j":
                kw["j"] = int(raw)
            elif section == "stepper" and name in _STEPPER_KEYS:
                step[name] = _STEPPER_KEYS[name](raw)
            elif section == "linear" and name in _LINEAR_KEYS:
                conv = _LINEAR_KEYS[name]
                lin[name] = _scalar(raw) if conv is bool else conv(raw)
            elif key == "output.snapshot_stride":
                kw["snapshot_stride"] = int(raw)
            elif key == "diagnostics.test_functions":
                kw["test_functions"] = _names(raw)
            elif key == "rho.n_steps":
                kw["rho_steps"] = int(raw)
            elif key == "compare.times":
                kw["compare_times"] = _floats(raw)
            elif key == "verify.samples":
                kw["verify_samples"] = int(raw)
            elif key == "verify.oracle_draws":
                kw["verify_oracle_draws"] = int(raw)
            elif key == "sweep.axis":
                kw["sweep_axis"] = raw
            elif key == "sweep.values":
                kw["sweep_values"] = _floats(raw)
            elif key == "sweep.mode":
                kw["sweep_mode"] = raw
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
    kw["preset_params"] = tuple(sorted(params))
    try:
        kw["stepper"] = StepperConfig(linear=LinearSolveConfig(**lin), **step)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(**kw)
    if cfg.sweep_axis not in ("j", "cells", "tau"):
        raise ConfigError(f"sweep.axis must be j, cells or tau, got {cfg.sweep_axis!r}")
    if cfg.sweep_mode not in ("rothe", "elliptic_mms"):
        raise ConfigError(f"sweep.mode must be rothe or elliptic_mms, got {cfg.sweep_mode!r}")
    if cfg.snapshot_stride < 1 or cfg.j < 1 or not cfg.T > 0:
        raise ConfigError("need snapshot_stride >= 1, time.j >= 1 and time.T > 0")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    return config_from_mapping(parse_config_text(p.read_text()), source=str(p))
