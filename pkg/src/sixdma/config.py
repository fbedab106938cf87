"""Experiment configuration: a JSON document with flat named sections.

Every key is optional; omitted keys take the defaults below, which
reproduce the reference simulation setup.  Unknown sections or keys are
rejected so typos cannot silently fall back to a default.

Sections and keys::

    system      N, B, site_side_m, wavelength_m, transmit_power_mw,
                noise_power_dbm, antenna_spacing_m, d_min_m, candidates
    scenario    mu, xi, r_min_m, r_max_m, samples, hotspots
    optimizer   t_outer, t_inner, tau_ini, iota, delta, fd_eps, trust_rot,
                max_backtracks, conv_tol, seed, rotation_linearization
    pathloss    eps0, exponent
    pattern     g_max_dbi, g_s_db, g_v_db, theta_3db_deg, phi_3db_deg
    experiment  schemes, seed, out, record_timing, jobs
    sweep       axis, values

Each hotspot is an object with ``radius_m``, ``weight`` and either
``center_m`` (a 3-vector) or ``distance_m``/``azimuth_deg``/``elevation_deg``.
``antenna_spacing_m`` and ``d_min_m`` may be ``null``: the spacing then
defaults to half a wavelength and the minimum surface distance to the
array diagonal plus one spacing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import ParseError, ValidationError
from .geometry import ArrayLayout, SiteBox, layout_clearance
from .optimizer import OptimizerConfig
from .propagation import PathLossModel, RadiationPattern
from .scenario import CoverageRegion, DensityModel, HotspotSpec

SCHEMES = ("proposed", "fpa", "circular", "rotation-only")
SWEEP_AXES = ("none", "users", "xi", "power")
DEFAULT_SWEEP_VALUES = {
    "none": (),
    "users": (10.0, 20.0, 30.0, 40.0, 50.0),
    "xi": (0.0, 0.25, 0.5, 0.75, 1.0),
    "power": (10.0, 40.0, 100.0),
}


@dataclass(frozen=True)
class SystemConfig:
    N: int = 4
    B: int = 16
    site_side_m: float = 1.0
    wavelength_m: float = 0.125
    transmit_power_mw: float = 40.0
    noise_power_dbm: float = -50.0
    antenna_spacing_m: float | None = None
    d_min_m: float | None = None
    candidates: int = 64

    @property
    def transmit_power_w(self) -> float:
        return self.transmit_power_mw * 1e-3

    @property
    def noise_power_w(self) -> float:
        return 10.0 ** (self.noise_power_dbm / 10.0) * 1e-3

    @property
    def spacing(self) -> float:
        return self.wavelength_m / 2 if self.antenna_spacing_m is None else self.antenna_spacing_m

    def layout(self) -> ArrayLayout:
        return ArrayLayout.upa(self.N, self.spacing)

    def d_min_for(self, layout: ArrayLayout) -> float:
        if self.d_min_m is not None:
            return self.d_min_m
        return layout_clearance(layout, self.spacing)

    def site(self) -> SiteBox:
        return SiteBox.cube(self.site_side_m)


@dataclass(frozen=True)
class ScenarioConfig:
    mu: float = 35.0
    xi: float = 0.2
    r_min_m: float = 20.0
    r_max_m: float = 200.0
    samples: int = 100
    hotspots: tuple = field(default_factory=lambda: (
        {"distance_m": 40.0, "radius_m": 5.0, "azimuth_deg": 30.0, "elevation_deg": 10.0, "weight": 1.0},
        {"distance_m": 60.0, "radius_m": 10.0, "azimuth_deg": 150.0, "elevation_deg": 20.0, "weight": 2.0},
        {"distance_m": 100.0, "radius_m": 15.0, "azimuth_deg": 270.0, "elevation_deg": 30.0, "weight": 3.0},
    ))

    def hotspot_specs(self) -> list[HotspotSpec]:
        out = []
        for h in self.hotspots:
            if "center_m" in h:
                out.append(HotspotSpec(h["center_m"], h["radius_m"], h.get("weight", 1.0)))
            else:
                out.append(HotspotSpec.at(h["distance_m"], h["radius_m"], h.get("azimuth_deg", 0.0),
                                          h.get("elevation_deg", 0.0), h.get("weight", 1.0)))
        return out

    def density(self) -> DensityModel:
        region = CoverageRegion(self.r_min_m, self.r_max_m, self.hotspot_specs())
        return DensityModel(self.mu, self.xi, region)


@dataclass(frozen=True)
class PathLossConfig:
    eps0: float = 1e-4
    exponent: float = 2.8

    def model(self) -> PathLossModel:
        return PathLossModel(self.eps0, self.exponent)


@dataclass(frozen=True)
class PatternConfig:
    g_max_dbi: float = 8.0
    g_s_db: float = 25.0
    g_v_db: float = 25.0
    theta_3db_deg: float = 65.0
    phi_3db_deg: float = 65.0

    def pattern(self) -> RadiationPattern:
        return RadiationPattern(self.g_max_dbi, self.g_s_db, self.g_v_db,
                                math.radians(self.theta_3db_deg), math.radians(self.phi_3db_deg))


@dataclass(frozen=True)
class RunConfig:
    schemes: tuple = ("proposed",)
    seed: int = 0
    out: str = "results"
    record_timing: bool = False
    jobs: int = 1


@dataclass(frozen=True)
class SweepConfig:
    axis: str = "none"
    values: tuple | None = None

    def points(self) -> tuple:
        return DEFAULT_SWEEP_VALUES[self.axis] if self.values is None else self.values


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    pathloss: PathLossConfig = field(default_factory=PathLossConfig)
    pattern: PatternConfig = field(default_factory=PatternConfig)
    experiment: RunConfig = field(default_factory=RunConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def with_overrides(self, *, seed=None, scheme=None, sweep=None, out=None, jobs=None) -> "ExperimentConfig":
        run = self.experiment
        if seed is not None:
            run = replace(run, seed=seed)
        if scheme is not None:
            run = replace(run, schemes=(scheme,))
        if out is not None:
            run = replace(run, out=str(out))
        if jobs is not None:
            run = replace(run, jobs=jobs)
        sw = self.sweep
        if sweep is not None and sweep != sw.axis:
            sw = SweepConfig(sweep, None)
        cfg = replace(self, experiment=run, sweep=sw)
        validate(cfg)
        return cfg

    def at_sweep_value(self, value) -> "ExperimentConfig":
        """Copy with the sweep axis set to ``value``."""
        axis = self.sweep.axis
        if axis == "users":
            return replace(self, scenario=replace(self.scenario, mu=float(value)))
        if axis == "xi":
            return replace(self, scenario=replace(self.scenario, xi=float(value)))
        if axis == "power":
            return replace(self, system=replace(self.system, transmit_power_mw=float(value)))
        return self


_SECTIONS = {
    "system": SystemConfig,
    "scenario": ScenarioConfig,
    "optimizer": OptimizerConfig,
    "pathloss": PathLossConfig,
    "pattern": PatternConfig,
    "experiment": RunConfig,
    "sweep": SweepConfig,
}

_INT_KEYS = {"N", "B", "candidates", "samples", "t_outer", "t_inner", "max_backtracks", "seed", "jobs"}
_OPTIONAL_KEYS = {"antenna_spacing_m", "d_min_m", "values"}
_STR_KEYS = {"out", "axis", "rotation_linearization"}
_HOTSPOT_KEYS = {"center_m", "distance_m", "radius_m", "azimuth_deg", "elevation_deg", "weight"}


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _coerce(section: str, key: str, value: Any):
    name = f"{section}.{key}"
    if value is None:
        if key in _OPTIONAL_KEYS:
            return None
        raise ValidationError(f"{name} must not be null")
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{name} must be an integer")
        return value
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ValidationError(f"{name} must be a string")
        return value
    if key == "record_timing":
        if not isinstance(value, bool):
            raise ValidationError(f"{name} must be true or false")
        return value
    if key in ("schemes", "values"):
        if not isinstance(value, list):
            raise ValidationError(f"{name} must be a list")
        if key == "values":
            if not all(_is_number(v) for v in value):
                raise ValidationError(f"{name} must contain numbers")
            return tuple(float(v) for v in value)
        return tuple(value)
    if key == "hotspots":
        if not isinstance(value, list):
            raise ValidationError(f"{name} must be a list")
        out = []
        for i, h in enumerate(value):
            if not isinstance(h, dict):
                raise ValidationError(f"{name}[{i}] must be an object")
            extra = set(h) - _HOTSPOT_KEYS
            if extra:
                raise ValidationError(f"unknown key {name}[{i}].{sorted(extra)[0]}")
            if "radius_m" not in h:
                raise ValidationError(f"{name}[{i}] needs radius_m")
            if ("center_m" in h) == ("distance_m" in h):
                raise ValidationError(f"{name}[{i}] needs exactly one of center_m and distance_m")
            for k, v in h.items():
                if k == "center_m":
                    if not (isinstance(v, list) and len(v) == 3 and all(_is_number(c) for c in v)):
                        raise ValidationError(f"{name}[{i}].center_m must be three numbers")
                elif not _is_number(v):
                    raise ValidationError(f"{name}[{i}].{k} must be a number")
            out.append(dict(h))
        return tuple(out)
    if not _is_number(value):
        raise ValidationError(f"{name} must be a finite number")
    return float(value)


def _positive(name: str, value) -> None:
    if value is not None and not value > 0:
        raise ValidationError(f"{name} must be positive")


def validate(cfg: ExperimentConfig) -> None:
    """Check cross-field invariants; raises :class:`ValidationError`."""
    s = cfg.system
    for key in ("N", "B", "site_side_m", "wavelength_m", "antenna_spacing_m", "d_min_m", "candidates"):
        _positive(f"system.{key}", getattr(s, key))
    if s.transmit_power_mw < 0:
        raise ValidationError("system.transmit_power_mw must be non-negative")
    if s.B > s.candidates:
        raise ValidationError("system.B must not exceed system.candidates")
    layout = s.layout()
    if layout.min_spacing() < s.spacing * (1 - 1e-12):
        raise ValidationError("antenna spacing below the minimum")

    sc = cfg.scenario
    if not 0.0 <= sc.xi <= 1.0:
        raise ValidationError("xi must be in [0,1]")
    if sc.mu < 0:
        raise ValidationError("mu must be non-negative")
    _positive("scenario.samples", sc.samples)
    for i, h in enumerate(sc.hotspots):
        _positive(f"scenario.hotspots[{i}].radius_m", h["radius_m"])
        if h.get("weight", 1.0) < 0:
            raise ValidationError(f"scenario.hotspots[{i}].weight must be non-negative")
    sc.density()  # containment and overlap

    _positive("pathloss.eps0", cfg.pathloss.eps0)
    _positive("pathloss.exponent", cfg.pathloss.exponent)
    try:
        cfg.pattern.pattern()
    except ValueError as exc:
        raise ValidationError(f"pattern: {exc}") from None

    run = cfg.experiment
    if not run.schemes:
        raise ValidationError("experiment.schemes must not be empty")
    for name in run.schemes:
        if name not in SCHEMES:
            raise ValidationError(f"unknown scheme {name!r}; expected one of {', '.join(SCHEMES)}")
    if len(set(run.schemes)) != len(run.schemes):
        raise ValidationError("experiment.schemes contains duplicates")
    if run.seed < 0:
        raise ValidationError("experiment.seed must be non-negative")
    _positive("experiment.jobs", run.jobs)

    sw = cfg.sweep
    if sw.axis not in SWEEP_AXES:
        raise ValidationError(f"unknown sweep axis {sw.axis!r}; expected one of {', '.join(SWEEP_AXES)}")
    if sw.axis == "none" and sw.values:
        raise ValidationError("sweep.values given without a sweep axis")
    if sw.axis != "none":
        if not sw.points():
            raise ValidationError("sweep.values must not be empty")
        for v in sw.points():
            if sw.axis == "xi" and not 0.0 <= v <= 1.0:
                raise ValidationError("xi must be in [0,1]")
            if sw.axis in ("users", "power") and v < 0:
                raise ValidationError(f"sweep.values for {sw.axis} must be non-negative")
            cfg.at_sweep_value(v).scenario.density()


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ValidationError("top level must be an object")
    sections = {}
    for name, body in data.items():
        if name not in _SECTIONS:
            raise ValidationError(f"unknown section {name!r}")
        if not isinstance(body, dict):
            raise ValidationError(f"section {name!r} must be an object")
        cls = _SECTIONS[name]
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in body.items():
            if key not in known:
                raise ValidationError(f"unknown key {name}.{key}")
            kwargs[key] = _coerce(name, key, value)
        try:
            sections[name] = cls(**kwargs)
        except ValidationError:
            raise
        except (ValueError, TypeError) as exc:
            raise ValidationError(f"{name}: {exc}") from None
    cfg = ExperimentConfig(**sections)
    validate(cfg)
    return cfg


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    if not text.strip():
        cfg = ExperimentConfig()
        validate(cfg)
        return cfg
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return config_from_dict(data)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(path))


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-JSON form of a config (inverse of :func:`config_from_dict`)."""
    out = {}
    for name in _SECTIONS:
        section = getattr(cfg, name)
        body = {}
        for f in fields(section):
            v = getattr(section, f.name)
            if isinstance(v, tuple):
                v = [dict(x) if isinstance(x, dict) else x for x in v]
            body[f.name] = v
        out[name] = body
    return out
