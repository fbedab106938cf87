"""Three-sector comparison schemes.

All schemes place three planar sectors of ``ceil(N*B/3)`` antennas on a
horizontal ring around the BS reference point.  A sector at azimuth ``psi``
sits at ``r (cos psi, sin psi, 0)`` and faces radially outward, tilted down
by a fixed angle.

* fixed: sectors at 0, 120 and 240 degrees, nothing optimized;
* circular: the three azimuths move along the ring;
* rotation-only: centers fixed, Euler angles optimized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import CapacityModel
from .geometry import (
    ArrayLayout,
    PlacementConstraints,
    SurfacePose,
    check_constraints,
    euler_from_matrix,
    frame_rotation,
)
from .lp import LinearProgram3, solve_lp3
from .optimizer import ConvergenceTrace, OptimizerConfig, alternating_optimize, armijo, fd_gradient


@dataclass(frozen=True)
class SectorConfig:
    antennas_per_sector: int
    spacing: float
    downtilt: float = math.radians(15.0)
    ring_radius: float = 0.5
    azimuths: tuple = (0.0, 2 * math.pi / 3, 4 * math.pi / 3)

    def __post_init__(self):
        if self.antennas_per_sector < 1:
            raise ValueError("antennas_per_sector must be >= 1")
        if not self.ring_radius > 0 or not self.spacing > 0:
            raise ValueError("ring_radius and spacing must be positive")
        if len(self.azimuths) != 3:
            raise ValueError("exactly three sector azimuths are required")

    @classmethod
    def for_budget(cls, N: int, B: int, spacing: float, **kw) -> "SectorConfig":
        """Sectors sharing the antenna budget of ``B`` surfaces with ``N`` each."""
        return cls(math.ceil(N * B / 3), spacing, **kw)

    @property
    def sector_count(self) -> int:
        return 3

    def layout(self) -> ArrayLayout:
        return ArrayLayout.upa(self.antennas_per_sector, self.spacing)


def sector_pose(psi: float, sc: SectorConfig) -> SurfacePose:
    """Pose of a sector at ring azimuth ``psi`` with the configured downtilt."""
    cd, sd = math.cos(sc.downtilt), math.sin(sc.downtilt)
    x_axis = np.array([cd * math.cos(psi), cd * math.sin(psi), -sd])
    y_axis = np.array([-math.sin(psi), math.cos(psi), 0.0])
    u = euler_from_matrix(frame_rotation(x_axis, y_axis))
    q = sc.ring_radius * np.array([math.cos(psi), math.sin(psi), 0.0])
    return SurfacePose(q, np.array(u))


def fpa_poses(sc: SectorConfig) -> list[SurfacePose]:
    return [sector_pose(psi, sc) for psi in sc.azimuths]


def min_arc_gap(sc: SectorConfig, d_min: float) -> float:
    """Smallest azimuth separation keeping two ring points ``d_min`` apart."""
    ratio = d_min / (2.0 * sc.ring_radius)
    if ratio > 1.0:
        raise ValueError("d_min exceeds the ring diameter")
    return 2.0 * math.asin(ratio)


def _ring_constraints(psi: np.ndarray, gap: float, trust: float):
    """Cyclic order with at least ``gap`` between neighbours, plus a trust box
    around ``psi``; constraints are on the new azimuths."""
    A = [[1.0, -1.0, 0.0], [0.0, 1.0, -1.0], [-1.0, 0.0, 1.0]]
    c = [-gap, -gap, 2 * math.pi - gap]
    A += list(np.eye(3)) + list(-np.eye(3))
    c += list(psi + trust) + list(-(psi - trust))
    return np.array(A, dtype=float), np.array(c, dtype=float)


def circular_movement_optimize(sc: SectorConfig, model: CapacityModel, pc: PlacementConstraints,
                               cfg: OptimizerConfig):
    """Move the three sectors along the ring to maximize average capacity.

    ``model`` must use the sector layout.  The azimuths are updated jointly
    by conditional-gradient steps; the trust box ``cfg.trust_rot`` bounds
    each LP step.
    """
    gap = min_arc_gap(sc, pc.d_min)
    psi = np.sort(np.mod(np.asarray(sc.azimuths, dtype=float), 2 * math.pi))
    if psi[2] - psi[0] > 2 * math.pi - gap or np.any(np.diff(psi) < gap):
        raise ValueError("initial sector azimuths violate the minimum separation")

    def arrays(p):
        poses = [sector_pose(x, sc) for x in p]
        return np.array([s.q for s in poses]), np.array([s.u for s in poses])

    def capacity(p):
        return model.capacity(*arrays(p))

    def violation(p):
        return check_constraints([sector_pose(x, sc) for x in p], model.layout, pc).max_violation

    trace = ConvergenceTrace()
    current = capacity(psi)
    trace.record_outer(current, violation(psi))
    for _ in range(cfg.t_outer):
        previous = current
        for _ in range(cfg.t_inner):
            g = fd_gradient(capacity, psi, cfg.fd_eps, current)
            A, c = _ring_constraints(psi, gap, cfg.trust_rot)
            d = solve_lp3(LinearProgram3(-g, A, c)) - psi
            step = armijo(capacity, psi, d, current, float(g @ d), cfg)
            if not step.accepted:
                break
            psi = step.x
            current += step.gain
            trace.taus.append(step.tau)
            trace.step_violations.append(violation(psi))
        current = capacity(psi)
        trace.record_outer(current, violation(psi))
        if current - previous < cfg.conv_tol * abs(previous):
            break
    return [sector_pose(x, sc) for x in psi], trace


def rotation_only_optimize(sc: SectorConfig, model: CapacityModel, pc: PlacementConstraints,
                           cfg: OptimizerConfig):
    """Optimize the sector rotations with the centers frozen."""
    return alternating_optimize(fpa_poses(sc), model, pc, cfg, positions=False)
