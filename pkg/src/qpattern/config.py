"""Experiment configuration.

One INI file drives everything: grid generation, the pipeline, peak
detection thresholds, and output locations. Every tunable that another
module exposes is surfaced here so an experiment is reproducible from
its config file and nothing else.

Seed derivation rule: the config carries a single integer seed. The
grid uses it directly; the original-run sampler uses default_rng([seed,
0]), the transposed-run sampler default_rng([seed, 1]), and localise
default_rng([seed, 2]). Dual-run experiments therefore need exactly one
config and stay reproducible sample-for-sample.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, fields

import numpy as np

from .grid import BackgroundSpec, LinePatternSpec, _next_pow2
from .recognize import DetectionPolicy


class ConfigError(ValueError):
    """Invalid configuration; message lists section.key level problems."""


@dataclass(frozen=True)
class GridConfig:
    width: int = 64
    height: int = 64
    rho: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class PatternConfig:
    d: float = 8.0
    theta: float = 0.0
    delta_rho: float = 0.25
    region: tuple[int, int, int, int] | None = None  # x0,y0,w,h
    chi: float | None = None  # centered square region of this area fraction
    z0: int = 0
    line_width: float | None = None


@dataclass(frozen=True)
class RunConfig:
    encoding: str = "amplitude"  # amplitude | phase
    mode: str = "sample"  # oracle | sample
    shots: int = 4096
    sampler: str = "circuit"  # circuit | semiclassical
    transpose: bool = True
    localise: bool = False
    chi_target: float = 1.0 / 16.0  # localise stopping scale


@dataclass(frozen=True)
class DetectConfig:
    tau: float = 16.0
    gap: int | None = None
    chi_target: float = 1.0 / 16.0
    c_min: int = 2
    candidate_factor: float = 4.0
    alpha: float = 0.01


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    prefix: str = "run"


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridConfig = GridConfig()
    pattern: PatternConfig | None = None
    run: RunConfig = RunConfig()
    detect: DetectConfig = DetectConfig()
    output: OutputConfig = OutputConfig()


_SECTIONS = {
    "grid": GridConfig,
    "pattern": PatternConfig,
    "run": RunConfig,
    "detect": DetectConfig,
    "output": OutputConfig,
}

_OPTIONAL_KEYS = {"region", "chi", "line_width", "gap"}


def _parse_value(section: str, key: str, raw: str, kind):
    raw = raw.strip()
    if raw == "":
        if key in _OPTIONAL_KEYS:
            return None
        raise ConfigError(f"{section}.{key}: empty value")
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is tuple:
            parts = [int(p) for p in raw.split(",")]
            if len(parts) != 4:
                raise ValueError("need x0,y0,w,h")
            return tuple(parts)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from None


_FIELD_KINDS = {
    ("grid", "width"): int,
    ("grid", "height"): int,
    ("grid", "rho"): float,
    ("grid", "seed"): int,
    ("pattern", "d"): float,
    ("pattern", "theta"): float,
    ("pattern", "delta_rho"): float,
    ("pattern", "region"): tuple,
    ("pattern", "chi"): float,
    ("pattern", "z0"): int,
    ("pattern", "line_width"): float,
    ("run", "encoding"): str,
    ("run", "mode"): str,
    ("run", "shots"): int,
    ("run", "sampler"): str,
    ("run", "transpose"): bool,
    ("run", "localise"): bool,
    ("run", "chi_target"): float,
    ("detect", "tau"): float,
    ("detect", "gap"): int,
    ("detect", "chi_target"): float,
    ("detect", "c_min"): int,
    ("detect", "candidate_factor"): float,
    ("detect", "alpha"): float,
    ("output", "dir"): str,
    ("output", "prefix"): str,
}


def _build_section(name: str, cls, items: dict[str, str]):
    values = {}
    errors = []
    known = {f.name for f in fields(cls)}
    for key, raw in items.items():
        if key not in known:
            errors.append(f"{name}.{key}: unknown key")
            continue
        try:
            values[key] = _parse_value(name, key, raw, _FIELD_KINDS[(name, key)])
        except ConfigError as exc:
            errors.append(str(exc))
    if errors:
        raise ConfigError("; ".join(errors))
    return cls(**values)


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    errors = []
    built = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            errors.append(f"{section}: unknown section")
            continue
        try:
            built[section] = _build_section(
                section, _SECTIONS[section], dict(parser.items(section))
            )
        except ConfigError as exc:
            errors.append(str(exc))
    if errors:
        raise ConfigError("; ".join(errors))
    cfg = ExperimentConfig(
        grid=built.get("grid", GridConfig()),
        pattern=built.get("pattern"),
        run=built.get("run", RunConfig()),
        detect=built.get("detect", DetectConfig()),
        output=built.get("output", OutputConfig()),
    )
    validate_config(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def validate_config(cfg: ExperimentConfig) -> None:
    errors = []
    g = cfg.grid
    if g.width < 1 or g.height < 1:
        errors.append("grid.width/height: must be positive")
    if not 0.0 < g.rho <= 1.0:
        errors.append(f"grid.rho: {g.rho} outside (0, 1]")
    p = cfg.pattern
    if p is not None:
        if p.d < 2:
            errors.append(f"pattern.d: {p.d} below 2")
        if p.delta_rho < 0:
            errors.append(f"pattern.delta_rho: {p.delta_rho} negative")
        if p.region is None and p.chi is None:
            errors.append("pattern: needs region or chi")
        if p.chi is not None and not 0.0 < p.chi <= 1.0:
            errors.append(f"pattern.chi: {p.chi} outside (0, 1]")
    r = cfg.run
    if r.encoding not in ("amplitude", "phase"):
        errors.append(f"run.encoding: {r.encoding!r} not amplitude|phase")
    if r.mode not in ("oracle", "sample"):
        errors.append(f"run.mode: {r.mode!r} not oracle|sample")
    if r.sampler not in ("circuit", "semiclassical"):
        errors.append(f"run.sampler: {r.sampler!r} not circuit|semiclassical")
    if r.mode == "sample" and r.shots < 1:
        errors.append(f"run.shots: {r.shots} below 1 in sample mode")
    d = cfg.detect
    if d.tau <= 0:
        errors.append(f"detect.tau: {d.tau} not positive")
    if not 0.0 < d.alpha < 1.0:
        errors.append(f"detect.alpha: {d.alpha} outside (0, 1)")
    if not 0.0 < d.chi_target <= 1.0:
        errors.append(f"detect.chi_target: {d.chi_target} outside (0, 1]")
    if errors:
        raise ConfigError("; ".join(errors))


def config_to_ini(cfg: ExperimentConfig) -> str:
    """Canonical INI serialization; the basis of the config hash."""
    parser = configparser.ConfigParser()
    sections = {
        "grid": cfg.grid,
        "pattern": cfg.pattern,
        "run": cfg.run,
        "detect": cfg.detect,
        "output": cfg.output,
    }
    for name, obj in sections.items():
        if obj is None:
            continue
        parser[name] = {}
        for f in fields(obj):
            value = getattr(obj, f.name)
            if value is None:
                rendered = ""
            elif isinstance(value, tuple):
                rendered = ",".join(str(v) for v in value)
            elif isinstance(value, float):
                rendered = repr(value)
            else:
                rendered = str(value)
            parser[name][f.name] = rendered
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def config_hash(cfg: ExperimentConfig) -> str:
    """Short digest identifying the full configuration."""
    return hashlib.sha256(config_to_ini(cfg).encode()).hexdigest()[:12]


def rng_for(cfg: ExperimentConfig, stream: int) -> np.random.Generator:
    """Derived generator: stream 0 = original run, 1 = transposed run,
    2 = localise."""
    return np.random.default_rng([cfg.grid.seed, stream])


def resolved_region(
    pattern: PatternConfig, n_cols: int, m_rows: int
) -> tuple[int, int, int, int]:
    """Explicit region, or the centered square covering fraction chi."""
    if pattern.region is not None:
        return pattern.region
    side = max(1, round((pattern.chi * n_cols * m_rows) ** 0.5))
    side = min(side, n_cols, m_rows)
    x0 = (n_cols - side) // 2
    y0 = (m_rows - side) // 2
    return (x0, y0, side, side)


def build_specs(
    cfg: ExperimentConfig,
) -> tuple[BackgroundSpec, LinePatternSpec | None]:
    """Module-level specs for grid generation."""
    background = BackgroundSpec(rho=cfg.grid.rho, seed=cfg.grid.seed)
    if cfg.pattern is None:
        return background, None
    n_cols = _next_pow2(cfg.grid.width)
    m_rows = _next_pow2(cfg.grid.height)
    region = resolved_region(cfg.pattern, n_cols, m_rows)
    pattern = LinePatternSpec(
        d=cfg.pattern.d,
        theta=cfg.pattern.theta,
        delta_rho=cfg.pattern.delta_rho,
        region=region,
        z0=cfg.pattern.z0,
        line_width=cfg.pattern.line_width,
    )
    return background, pattern


def build_policy(cfg: ExperimentConfig) -> DetectionPolicy:
    d = cfg.detect
    return DetectionPolicy(
        tau=d.tau,
        gap=d.gap,
        chi_target=d.chi_target,
        c_min=d.c_min,
        candidate_factor=d.candidate_factor,
        alpha=d.alpha,
    )
