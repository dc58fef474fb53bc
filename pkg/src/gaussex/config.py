"""Experiment configuration (TOML) and result persistence (JSON + CSV).

A config has three sections::

    [model]   kind = "perf_table" | "chi" | "kernel" and its parameters
    [grid]    kind = "uniform" | "refined" and its parameters
    [run]     u, n_reps, seed, out

Unknown fields are rejected with the offending field and line.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import tomli
import tomli_w

from .asymptotics import AsymptoticFormula, chi_formula, perf_table_formula
from .constants import known_value
from .core import fbm_kernel, subfbm_kernel
from .errors import ConfigError, UsageError
from .grids import (
    GridSpec,
    interval_grid,
    proof_band,
    refined_interval_grid,
    refined_simplex_grid_target,
    simplex_grid,
)
from .harness import FieldModel, ResultRecord, chi_model, kernel_model, perf_table_model
from .models import ChiSpec, PerfTableSpec

MODEL_KINDS = ("perf_table", "chi", "kernel")
GRID_KINDS = ("uniform", "refined")
CSV_COLUMNS = ("u", "p_hat", "ci_lo", "ci_hi", "asymptotic", "ratio")


@dataclass
class ModelConfig:
    kind: str
    n: int = 1
    alpha: float = 1.0
    a: list = field(default_factory=lambda: [1.0, 1.0])
    b: Optional[float] = None
    family: str = "fbm"
    gamma: Optional[float] = None
    c_Y: float = 1.0
    regime: Optional[str] = None
    hw: Optional[float] = None
    pickands: Optional[float] = None
    p_const: Optional[float] = None


@dataclass
class GridConfig:
    kind: str = "uniform"
    mesh: Optional[float] = None
    n_points: Optional[int] = None
    band: Optional[float] = None
    levels: int = 4
    ratio: float = 2.0
    lo: float = 0.0
    hi: float = 1.0


@dataclass
class RunConfig:
    u: list
    n_reps: int
    seed: int = 0
    out: str = "results"
    threads: Optional[int] = None


@dataclass
class ExperimentConfig:
    model: ModelConfig
    grid: GridConfig
    run: RunConfig

    def to_dict(self) -> dict:
        return {
            name: {k: v for k, v in dataclasses.asdict(getattr(self, name)).items() if v is not None}
            for name in ("model", "grid", "run")
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_SECTIONS = {"model": ModelConfig, "grid": GridConfig, "run": RunConfig}
_INT_FIELDS = {"n", "n_points", "levels", "n_reps", "seed", "threads"}
_FLOAT_FIELDS = {"alpha", "b", "gamma", "c_Y", "hw", "pickands", "p_const", "mesh", "band", "ratio", "lo", "hi"}
_STR_FIELDS = {"kind", "family", "regime", "out"}


def _line_of(text: str, section: Optional[str], key: Optional[str]) -> Optional[int]:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]", s)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", s):
            return no
    return None


def _coerce(section: str, key: str, value, text: str):
    line = _line_of(text, section, key)
    where = f"{section}.{key}"

    def bad(msg):
        return ConfigError(f"{where}: {msg}", field=where, line=line)

    if key in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad(f"expected an integer, got {value!r}")
        return value
    if key in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise bad(f"expected a decimal number, got {value!r}")
        return float(value)
    if key in _STR_FIELDS:
        if not isinstance(value, str):
            raise bad(f"expected a string, got {value!r}")
        return value
    if key in ("a", "u"):
        vals = value if isinstance(value, list) else [value]
        if not vals or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in vals):
            raise bad("expected a number or a list of numbers")
        return [float(v) for v in vals]
    raise bad("unhandled field")  # pragma: no cover


def config_from_dict(data: dict, text: str = "") -> ExperimentConfig:
    for sec in data:
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]", field=sec, line=_line_of(text, sec, None))
    parts = {}
    for sec, cls in _SECTIONS.items():
        raw = data.get(sec)
        if raw is None:
            if sec == "grid":
                raw = {}
            else:
                raise ConfigError(f"missing section [{sec}]", field=sec)
        if not isinstance(raw, dict):
            raise ConfigError(f"[{sec}] must be a table", field=sec, line=_line_of(text, sec, None))
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for key, value in raw.items():
            if key not in known:
                raise ConfigError(
                    f"unknown field '{sec}.{key}'", field=f"{sec}.{key}", line=_line_of(text, sec, key)
                )
            kw[key] = _coerce(sec, key, value, text)
        required = [
            f.name
            for f in fields(cls)
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
        ]
        for r in required:
            if r not in kw:
                raise ConfigError(f"missing required field '{sec}.{r}'", field=f"{sec}.{r}", line=_line_of(text, sec, None))
        parts[sec] = cls(**kw)
    cfg = ExperimentConfig(parts["model"], parts["grid"], parts["run"])
    validate(cfg, text)
    return cfg


def validate(cfg: ExperimentConfig, text: str = ""):
    def bad(sec, key, msg):
        return ConfigError(f"{sec}.{key}: {msg}", field=f"{sec}.{key}", line=_line_of(text, sec, key))

    m, g, r = cfg.model, cfg.grid, cfg.run
    if m.kind not in MODEL_KINDS:
        raise bad("model", "kind", f"must be one of {MODEL_KINDS}")
    if g.kind not in GRID_KINDS:
        raise bad("grid", "kind", f"must be one of {GRID_KINDS}")
    if any(b <= a for a, b in zip(r.u, r.u[1:])):
        raise bad("run", "u", "u levels must be strictly increasing")
    if r.n_reps < 1:
        raise bad("run", "n_reps", "must be >= 1")
    if g.kind == "uniform" and g.mesh is None:
        raise bad("grid", "mesh", "a uniform grid needs a mesh")
    if g.kind == "refined" and g.n_points is None:
        raise bad("grid", "n_points", "a refined grid needs n_points")
    try:
        formula_from_config(cfg)
    except ConfigError:
        raise
    except UsageError as exc:
        raise ConfigError(str(exc), field="model", line=_line_of(text, "model", None)) from None


def loads_config(text: str) -> ExperimentConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        ln = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed TOML: {exc}", line=int(ln.group(1)) if ln else None) from None
    return config_from_dict(data, text)


def load_config(path) -> ExperimentConfig:
    return loads_config(Path(path).read_text())


def dumps_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


def dump_config(cfg: ExperimentConfig, path):
    Path(path).write_text(dumps_config(cfg))


# ---------------------------------------------------------------------------
# building the experiment


def _perf_spec(m: ModelConfig) -> PerfTableSpec:
    return PerfTableSpec(m.n, m.alpha, tuple(m.a))


def _chi_spec(m: ModelConfig) -> ChiSpec:
    if m.b is None:
        raise ConfigError("chi model needs model.b", field="model.b")
    return ChiSpec(m.n, m.alpha, m.a[0], m.b, y_family=m.family, gamma=m.gamma, c_Y=m.c_Y)


def model_from_config(cfg: ExperimentConfig) -> FieldModel:
    m = cfg.model
    if m.kind == "perf_table":
        return perf_table_model(_perf_spec(m))
    if m.kind == "chi":
        return chi_model(_chi_spec(m))
    kern = {"fbm": fbm_kernel, "subfbm": subfbm_kernel}.get(m.family)
    if kern is None:
        raise ConfigError(f"unknown kernel family '{m.family}'", field="model.family")
    return kernel_model(kern(m.alpha))


def formula_from_config(cfg: ExperimentConfig) -> Optional[AsymptoticFormula]:
    """The asymptotic formula for the configured model (None for bare kernels)."""
    m = cfg.model
    if m.kind == "perf_table":
        return perf_table_formula(_perf_spec(m), hw=m.hw, pickands=m.pickands, regime=m.regime)
    if m.kind == "chi":
        spec = _chi_spec(m)
        p = m.p_const
        if p is None and spec.y_family == "fbm":
            p = known_value("piterbarg", spec.alpha, spec.drift)
        if p is None:
            raise UsageError("chi model needs model.p_const (the Piterbarg constant P_Y^(b/a))")
        return chi_formula(spec, p)
    return None


def grid_from_config(cfg: ExperimentConfig, model: Optional[FieldModel] = None) -> GridSpec:
    m, g = cfg.model, cfg.grid
    model = model or model_from_config(cfg)
    simplex = m.kind == "perf_table"
    dim = m.n if simplex else 1
    if g.kind == "uniform":
        return simplex_grid(dim, g.mesh) if simplex else interval_grid(g.lo, g.hi, g.mesh)
    band = g.band if g.band is not None else proof_band(max(cfg.run.u), model.beta)
    if simplex:
        opt = model.optimizer
        if opt is None or opt.kind == "positive_measure_set":
            raise UsageError("refined grids need an isolated optimizer; use a uniform grid")
        return refined_simplex_grid_target(dim, g.n_points, opt.points, band, g.levels, g.ratio)
    focus = float(np.atleast_2d(model.optimizer.points)[0, 0]) if model.optimizer is not None else g.lo
    return refined_interval_grid(g.lo, g.hi, g.n_points, focus, band, g.levels, g.ratio)


# ---------------------------------------------------------------------------
# records


def record_json(record: ResultRecord) -> str:
    return json.dumps(record.to_dict(), sort_keys=True, indent=2) + "\n"


def store_record(record: ResultRecord, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(record_json(record))
    return path


def load_record(path) -> ResultRecord:
    return ResultRecord.from_dict(json.loads(Path(path).read_text()))


def _fmt(x) -> str:
    return format(float(x), ".17g")


def rows_csv(rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) if isinstance(r[c], (int, float)) and not isinstance(r[c], bool) else r[c] for c in columns])
    return buf.getvalue()


def store_csv(record: ResultRecord, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(rows_csv(record.rows))
    return path
