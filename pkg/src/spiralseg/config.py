"""Experiment configuration: flat ``key = value`` files and named presets.

Recognized keys (``#`` starts a comment)::

    name            label used in reports
    h               number of species with a boundary arc (>= 3)
    k               number of species (default h)
    matrix          "symmetric", "cyclic:c" or rows "a,b,c; d,e,f; ..."
    profile         optional CSV (theta, value) replacing |cos(h theta / 2)|
    grid            NxM  (n_theta x n_y), or the keys n_theta / n_y
    y_max           depth of the inner truncation circle (r_min = exp(-y_max))
    beta_schedule   comma-separated increasing values
    beta_max        drop schedule entries above this value
    tol, inner_tol  outer defect and inner linear tolerances
    method          multigrid | species
    max_outer       iteration cap per beta (default depends on method)
    delta, rho      presence threshold (relative) and probe radius (cells)
    threshold_scale row | global
    fit_window      y_lo, y_hi for the spiral and order fits
    refit_window    second window used for the stability check
    out             output directory
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .grid import StripGrid
from .solver import DEFAULT_SCHEDULE, CompetitionMatrix, MatrixError
from .traces import TraceError, make_sector_traces, read_profile_csv


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    name: str = "custom"
    h: int = 3
    k: int | None = None
    matrix: str = "symmetric"
    profile: str | None = None
    n_theta: int = 512
    n_y: int = 512
    y_max: float = 8.0
    beta_schedule: tuple = DEFAULT_SCHEDULE
    tol: float = 1e-8
    inner_tol: float = 1e-10
    method: str = "multigrid"
    max_outer: int | None = None
    delta: float = 1e-3
    rho: int = 3
    threshold_scale: str = "row"
    fit_window: tuple = (1.0, 3.0)
    refit_window: tuple = (1.5, 2.5)
    out: str = "run"

    def __post_init__(self):
        self.validate()

    @property
    def n_species(self) -> int:
        return self.h if self.k is None else self.k

    def competition(self) -> CompetitionMatrix:
        try:
            return CompetitionMatrix.parse(self.matrix, self.n_species)
        except MatrixError as exc:
            raise ConfigError(f"matrix: {exc}") from None

    def grid(self) -> StripGrid:
        try:
            return StripGrid(self.n_theta, self.n_y, self.y_max)
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None

    def traces(self):
        try:
            if self.profile:
                return read_profile_csv(self.profile, self.h)
            return make_sector_traces(self.h)
        except (TraceError, OSError) as exc:
            raise ConfigError(f"traces: {exc}") from None

    def validate(self) -> None:
        if self.h < 3:
            raise ConfigError(f"h must be at least 3, got {self.h}")
        if self.n_species < self.h:
            raise ConfigError(f"k={self.n_species} is smaller than h={self.h}")
        sched = [float(b) for b in self.beta_schedule]
        if not sched:
            raise ConfigError("beta_schedule is empty")
        if any(b < 0 for b in sched) or any(b1 <= b0 for b0, b1 in zip(sched, sched[1:])):
            raise ConfigError(f"beta_schedule must be nonnegative and increasing: {sched}")
        if self.method not in ("multigrid", "species"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.threshold_scale not in ("row", "global"):
            raise ConfigError(f"threshold_scale must be row or global, got {self.threshold_scale!r}")
        if not self.delta > 0 or self.rho < 2:
            raise ConfigError("need delta > 0 and rho >= 2")
        if not (self.tol > 0 and self.inner_tol > 0):
            raise ConfigError("tolerances must be positive")
        for key in ("fit_window", "refit_window"):
            lo, hi = getattr(self, key)
            if not 0 <= lo < hi <= self.y_max:
                raise ConfigError(f"{key} must satisfy 0 <= lo < hi <= y_max, got {(lo, hi)}")
        self.competition()
        self.grid()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def truncated(self, beta_max: float) -> "ExperimentConfig":
        sched = tuple(b for b in self.beta_schedule if b <= beta_max)
        if not sched:
            raise ConfigError(f"no schedule entry is <= beta_max={beta_max:g}")
        return self.with_overrides(beta_schedule=sched)

    def to_text(self) -> str:
        lines = [f"# experiment {self.name}"]
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ", ".join(repr(float(x)) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


PRESETS = {
    "fig1a": dict(name="fig1a", h=3, matrix="symmetric"),
    "fig1b": dict(name="fig1b", h=3, matrix="cyclic:4"),
    "fig1c": dict(name="fig1c", h=3, matrix="cyclic:10"),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
    return ExperimentConfig(**{**PRESETS[name], **overrides})


_INT = {"h", "k", "n_theta", "n_y", "max_outer", "rho"}
_FLOAT = {"y_max", "tol", "inner_tol", "delta", "beta_max"}
_STR = {"name", "matrix", "profile", "method", "threshold_scale", "out", "preset"}
_TUPLE = {"beta_schedule", "fit_window", "refit_window"}


def _parse_value(key, raw, where):
    try:
        if key in _INT:
            return int(raw)
        if key in _FLOAT:
            return float(raw)
        if key in _TUPLE:
            vals = tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())
            if key != "beta_schedule" and len(vals) != 2:
                raise ValueError("expected two numbers")
            return vals
        if key == "grid":
            a, b = raw.lower().split("x")
            return int(a), int(b)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {raw!r} ({exc})") from None


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse ``key = value`` lines; a ``preset`` key supplies defaults."""
    raw = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _INT | _FLOAT | _STR | _TUPLE | {"grid"}:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        raw[key] = _parse_value(key, val, f"{source}:{n}")
    name = raw.pop("preset", None)
    if name is not None and name not in PRESETS:
        raise ConfigError(f"{source}: unknown preset {name!r}")
    base = dict(PRESETS[name]) if name else {}
    beta_max = raw.pop("beta_max", None)
    if "grid" in raw:
        raw["n_theta"], raw["n_y"] = raw.pop("grid")
    cfg = ExperimentConfig(**{**base, **raw})
    return cfg.truncated(beta_max) if beta_max is not None else cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config_text(text, str(p))
