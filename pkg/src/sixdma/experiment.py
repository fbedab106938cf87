"""End-to-end runs: drops, schemes, sweeps and output files."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .benchmarks import SectorConfig, circular_movement_optimize, fpa_poses, rotation_only_optimize
from .channel import CapacityModel
from .config import ExperimentConfig
from .errors import SixDMAError
from .geometry import (
    PlacementConstraints,
    check_constraints,
    fibonacci_candidates,
    initial_poses,
    poses_to_arrays,
    surface_normal,
)
from .optimizer import ConvergenceTrace, alternating_optimize
from .scenario import monte_carlo_set

RESULT_HEADER = ["sweep", "scheme", "capacity_bpshz", "stderr", "seconds"]

POSES_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["scheme", "sweep_axis", "sweep_value", "capacity_bpshz", "surfaces"],
    "additionalProperties": False,
    "properties": {
        "scheme": {"type": "string"},
        "sweep_axis": {"type": "string"},
        "sweep_value": {"type": ["number", "null"]},
        "capacity_bpshz": {"type": "number"},
        "surfaces": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["index", "q", "u", "normal"],
                "additionalProperties": False,
                "properties": {
                    "index": {"type": "integer", "minimum": 0},
                    "q": {"$ref": "#/$defs/vec3"},
                    "u": {"$ref": "#/$defs/vec3"},
                    "normal": {"$ref": "#/$defs/vec3"},
                },
            },
        },
    },
    "$defs": {
        "vec3": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
    },
}


class RunError(SixDMAError):
    """A scheme failed; the message says which run."""


@dataclass(frozen=True)
class ResultRow:
    sweep: float | None
    scheme: str
    capacity: float
    stderr: float
    seconds: float

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError("stderr must be non-negative")


@dataclass
class RunOutput:
    row: ResultRow
    trace: ConvergenceTrace
    poses: list
    layout: object
    sweep_axis: str


def _g9(x: float) -> str:
    return f"{x:.9g}"


def _r9(x: float) -> float:
    return float(f"{x:.9g}")


def sweep_token(axis: str, value) -> str:
    return "none" if axis == "none" else f"{axis}{_g9(value)}"


def _stats(rates: np.ndarray) -> tuple[float, float]:
    mean = float(rates.mean())
    se = float(rates.std(ddof=1) / math.sqrt(rates.size)) if rates.size > 1 else 0.0
    return mean, se


def run_point(cfg: ExperimentConfig, index: int, value, scheme: str) -> RunOutput:
    """Run one scheme at one sweep point."""
    point = cfg.at_sweep_value(value) if value is not None else cfg
    s = point.system
    seed = cfg.experiment.seed
    drops = monte_carlo_set(point.scenario.density(), point.pathloss.model(),
                            point.scenario.samples, (seed, index))
    pattern = point.pattern.pattern()
    opt = point.optimizer
    start = time.perf_counter()
    if scheme == "proposed":
        layout = s.layout()
        pc = PlacementConstraints(s.d_min_for(layout), s.site())
        model = CapacityModel(drops, layout, pattern, s.transmit_power_w, s.noise_power_w, s.wavelength_m)
        cands = fibonacci_candidates(s.candidates, s.site().inscribed_radius, s.site().center)
        init = initial_poses(s.B, cands, (seed, index, opt.seed), pc.d_min)
        poses, trace = alternating_optimize(init, model, pc, opt)
    else:
        sc = SectorConfig.for_budget(s.N, s.B, s.spacing, ring_radius=s.site().inscribed_radius)
        layout = sc.layout()
        pc = PlacementConstraints(s.d_min_for(layout), s.site())
        model = CapacityModel(drops, layout, pattern, s.transmit_power_w, s.noise_power_w, s.wavelength_m)
        if scheme == "fpa":
            poses = fpa_poses(sc)
            trace = ConvergenceTrace()
            trace.record_outer(model.capacity(*poses_to_arrays(poses)),
                               check_constraints(poses, layout, pc).max_violation)
        elif scheme == "circular":
            poses, trace = circular_movement_optimize(sc, model, pc, opt)
        elif scheme == "rotation-only":
            poses, trace = rotation_only_optimize(sc, model, pc, opt)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
    seconds = time.perf_counter() - start
    mean, se = _stats(model.rates(*poses_to_arrays(poses)))
    row = ResultRow(None if cfg.sweep.axis == "none" else float(value), scheme, mean, se, seconds)
    return RunOutput(row, trace, poses, layout, cfg.sweep.axis)


def _run_task(args) -> RunOutput:
    cfg, index, value, scheme = args
    try:
        return run_point(cfg, index, value, scheme)
    except Exception as exc:
        where = f"scheme {scheme}" + ("" if value is None else f" at {cfg.sweep.axis}={_g9(value)}")
        raise RunError(f"{where}: {type(exc).__name__}: {exc}") from exc


def run_experiment(cfg: ExperimentConfig) -> list[RunOutput]:
    """Every (sweep value, scheme) pair, in sweep-major order."""
    points = list(cfg.sweep.points()) if cfg.sweep.axis != "none" else [None]
    tasks = [(cfg, i, v, scheme) for i, v in enumerate(points) for scheme in cfg.experiment.schemes]
    if cfg.experiment.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.experiment.jobs) as pool:
            return list(pool.map(_run_task, tasks))
    return [_run_task(t) for t in tasks]


def poses_document(out: RunOutput) -> dict:
    surfaces = []
    for i, p in enumerate(out.poses):
        u = np.mod(p.u, 2 * math.pi)
        surfaces.append({
            "index": i,
            "q": [_r9(x) for x in p.q],
            "u": [_r9(x) for x in u],
            "normal": [_r9(x) for x in surface_normal(p.u, out.layout)],
        })
    return {
        "scheme": out.row.scheme,
        "sweep_axis": out.sweep_axis,
        "sweep_value": None if out.row.sweep is None else _r9(out.row.sweep),
        "capacity_bpshz": _r9(out.row.capacity),
        "surfaces": surfaces,
    }


def results_csv(rows, record_timing: bool = False) -> str:
    lines = [",".join(RESULT_HEADER)]
    for r in rows:
        sweep = "" if r.sweep is None else _g9(r.sweep)
        seconds = _g9(r.seconds) if record_timing else ""
        lines.append(",".join([sweep, r.scheme, _g9(r.capacity), _g9(r.stderr), seconds]))
    return "\n".join(lines) + "\n"


def emit_outputs(outputs, directory, record_timing: bool = False) -> list[Path]:
    """Write ``results.csv`` plus one trace CSV and one poses JSON per run."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    path = directory / "results.csv"
    path.write_text(results_csv([o.row for o in outputs], record_timing), encoding="utf-8")
    written.append(path)
    for o in outputs:
        tag = f"{o.row.scheme}_{sweep_token(o.sweep_axis, o.row.sweep)}"
        path = directory / f"trace_{tag}.csv"
        path.write_text(o.trace.to_csv(), encoding="utf-8")
        written.append(path)
        path = directory / f"poses_{tag}.json"
        path.write_text(json.dumps(poses_document(o), indent=2) + "\n", encoding="utf-8")
        written.append(path)
    return written


def read_results(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
