"""Alternating conditional-gradient optimization of surface poses.

Each surface is improved in turn with every other surface frozen.  A step
linearizes the objective with a forward-difference gradient and the
non-convex placement constraints around the current point, solves the
resulting three-variable LP for a target point, and backtracks along the
segment towards it until the Armijo sufficient-increase test passes.
Rejected steps leave the variable where it was, so the objective can only
go up.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import CapacityModel, SurfaceObjective, gram_exclusive, gram_update
from .errors import NonFiniteObjective
from .geometry import (
    PlacementConstraints,
    arrays_to_poses,
    check_constraints,
    distance_halfspace,
    poses_to_arrays,
    rotation_derivatives,
    rotation_matrix,
)
from .lp import LinearProgram3, solve_lp3

# generators of the small-angle rotation, ordered like u = (alpha, beta, gamma)
_GENERATORS = np.array([
    [[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
    [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]],
    [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
])

# the current point must satisfy its own linearized constraints to this slack
_CURRENT_POINT_TOL = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    t_outer: int = 20
    t_inner: int = 5
    tau_ini: float = 1.0
    iota: float = 1e-2
    delta: float = 0.5
    fd_eps: float = 1e-6
    trust_rot: float = math.pi / 16
    max_backtracks: int = 30
    conv_tol: float = 1e-4
    seed: int = 0
    rotation_linearization: str = "jacobian"

    def __post_init__(self):
        if self.t_outer < 0:
            raise ValueError("t_outer must be >= 0")
        if self.t_inner < 1 or self.max_backtracks < 1:
            raise ValueError("t_inner and max_backtracks must be >= 1")
        if not 0.0 < self.tau_ini <= 1.0:
            raise ValueError("tau_ini must lie in (0, 1]")
        if not 0.0 < self.iota < 1.0:
            raise ValueError("iota must lie in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not self.fd_eps > 0:
            raise ValueError("fd_eps must be positive")
        if not 0.0 < self.trust_rot <= math.pi / 4:
            raise ValueError("trust_rot must lie in (0, pi/4]")
        if self.conv_tol < 0:
            raise ValueError("conv_tol must be non-negative")
        if self.rotation_linearization not in ("jacobian", "incremental"):
            raise ValueError("rotation_linearization must be 'jacobian' or 'incremental'")


@dataclass
class ConvergenceTrace:
    """Objective after every outer iteration (entry 0 is the start)."""

    objective: list = field(default_factory=list)
    max_violation: list = field(default_factory=list)
    taus: list = field(default_factory=list)
    step_violations: list = field(default_factory=list)

    def record_outer(self, value: float, violation: float) -> None:
        self.objective.append(float(value))
        self.max_violation.append(float(violation))

    def is_monotone(self, slack: float = 1e-9) -> bool:
        obj = np.asarray(self.objective)
        return bool(np.all(np.diff(obj) >= -slack))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["outer_iter", "objective_bps_hz", "max_violation"])
        for t, (obj, vio) in enumerate(zip(self.objective, self.max_violation)):
            w.writerow([t, f"{obj:.9g}", f"{vio:.9g}"])
        return buf.getvalue()


@dataclass(frozen=True)
class StepResult:
    x: np.ndarray
    accepted: bool
    tau: float
    gain: float


def fd_gradient(fun: Callable[[np.ndarray], float], x0, eps: float,
                f0: float | None = None) -> np.ndarray:
    """Forward-difference gradient ``(f(x0 + eps e_j) - f(x0)) / eps``."""
    x0 = np.asarray(x0, dtype=float)
    if f0 is None:
        f0 = fun(x0)
    if not math.isfinite(f0):
        raise NonFiniteObjective(f"objective is {f0!r} at the base point")
    g = np.empty(x0.size)
    for j in range(x0.size):
        x = x0.copy()
        x[j] += eps
        fj = fun(x)
        if not math.isfinite(fj):
            raise NonFiniteObjective(f"objective is {fj!r} at perturbation {j}")
        g[j] = (fj - f0) / eps
    return g


def armijo(fun, x0, direction, f0: float, slope: float, cfg: OptimizerConfig,
           feasible: Callable[[np.ndarray], bool] | None = None) -> StepResult:
    """Backtrack ``tau`` from ``cfg.tau_ini`` until
    ``f(x0 + tau d) - f0 >= iota * tau * slope`` (and ``feasible`` holds)."""
    x0 = np.asarray(x0, dtype=float)
    if not slope > 0:
        return StepResult(x0, False, 0.0, 0.0)
    tau = cfg.tau_ini
    for _ in range(cfg.max_backtracks):
        x = x0 + tau * direction
        f = fun(x)
        if not math.isfinite(f):
            raise NonFiniteObjective(f"objective is {f!r} during backtracking")
        if f - f0 >= cfg.iota * tau * slope and (feasible is None or feasible(x)):
            return StepResult(x, True, tau, f - f0)
        tau *= cfg.delta
    return StepResult(x0, False, 0.0, 0.0)


def _normals(U, local_normal) -> np.ndarray:
    return rotation_matrix(np.asarray(U)) @ local_normal


def position_constraints(b: int, Q, U, pc: PlacementConstraints, local_normal):
    """Linear constraints ``A q <= c`` on the center of surface ``b``.

    Site box, linearized minimum distance to every other center,
    reflection in both directions and blockage.  The current center
    satisfies all of them.
    """
    Q = np.asarray(Q, dtype=float)
    normals = _normals(U, local_normal)
    q0, n_b = Q[b], normals[b]
    A_box, c_box = pc.site.halfspaces()
    rows, rhs = [A_box], [c_box]
    for j in range(len(Q)):
        if j == b:
            continue
        a, bound = distance_halfspace(Q[j], q0, pc.d_min)
        rows.append(a[None])
        rhs.append([bound])
        rows.append(-n_b[None])                    # n_b . (q_j - q) <= 0
        rhs.append([-(n_b @ Q[j])])
        rows.append(normals[j][None])              # n_j . (q - q_j) <= 0
        rhs.append([normals[j] @ Q[j]])
    rows.append(-n_b[None])                        # n_b . q >= 0
    rhs.append([0.0])
    return np.vstack(rows), np.concatenate([np.asarray(r, dtype=float) for r in rhs])


def normal_jacobian(u, local_normal, mode: str = "jacobian") -> np.ndarray:
    """3x3 matrix ``J`` with ``n(u + du) ~ n(u) + J @ du``.

    ``"jacobian"`` differentiates ``R(u) @ n_local`` in the Euler angles
    themselves.  ``"incremental"`` uses the small-angle product
    ``R(u) (I + sum_i du_i E_i) n_local``, which has the same form but is a
    first-order model of ``R(u) R(du)`` rather than of ``R(u + du)``.
    """
    if mode == "jacobian":
        return np.stack([D @ local_normal for D in rotation_derivatives(u)], axis=1)
    R0 = rotation_matrix(u)
    return np.stack([R0 @ (E @ local_normal) for E in _GENERATORS], axis=1)


def rotation_constraints(b: int, Q, U, trust: float, local_normal, mode: str = "jacobian"):
    """Linear constraints ``A du <= c`` on the angle increment of surface ``b``.

    Reflection and blockage with the normal linearized by
    :func:`normal_jacobian`, plus the trust box ``|du_i| <= trust``.
    """
    Q = np.asarray(Q, dtype=float)
    n0 = rotation_matrix(U[b]) @ local_normal
    J = normal_jacobian(U[b], local_normal, mode)
    q_b = Q[b]
    rows = [np.eye(3), -np.eye(3)]
    rhs = [np.full(3, trust), np.full(3, trust)]
    for j in range(len(Q)):
        if j == b:
            continue
        v = Q[j] - q_b
        rows.append((J.T @ v)[None])
        rhs.append([-(n0 @ v)])
    rows.append(-(J.T @ q_b)[None])
    rhs.append([n0 @ q_b])
    return np.vstack(rows), np.concatenate([np.asarray(r, dtype=float) for r in rhs])


def _rotation_feasible(b: int, Q, u, local_normal, tol: float = 0.0) -> bool:
    n = rotation_matrix(u) @ local_normal
    diff = np.delete(np.asarray(Q), b, axis=0) - Q[b]
    if diff.size and float((diff @ n).max()) > tol:
        return False
    return float(n @ Q[b]) >= -tol


def position_step(b: int, Q, U, objective: SurfaceObjective, pc: PlacementConstraints,
                  cfg: OptimizerConfig) -> StepResult:
    """One conditional-gradient step on the center of surface ``b``."""
    local_normal = objective.model.layout.local_normal
    q0 = np.array(Q[b], dtype=float)
    u_b = np.asarray(U[b], dtype=float)
    fun = lambda q: objective.excess(q, u_b)  # noqa: E731
    A, c = position_constraints(b, Q, U, pc, local_normal)
    worst = float((A @ q0 - c).max())
    if worst > _CURRENT_POINT_TOL:
        raise AssertionError(f"current center violates its linearized constraints by {worst:.3g}")

    f0 = fun(q0)
    g = fd_gradient(fun, q0, cfg.fd_eps, f0)
    target = solve_lp3(LinearProgram3(-g, A, c))
    d = target - q0
    slope = float(g @ d)

    Q_try = np.array(Q, dtype=float)

    def feasible(q):
        Q_try[b] = q
        return check_constraints(arrays_to_poses(Q_try, U), objective.model.layout, pc).max_violation <= 1e-12

    return armijo(fun, q0, d, f0, slope, cfg, feasible)


def rotation_step(b: int, Q, U, objective: SurfaceObjective, cfg: OptimizerConfig) -> StepResult:
    """One conditional-gradient step on the Euler angles of surface ``b``."""
    local_normal = objective.model.layout.local_normal
    u0 = np.array(U[b], dtype=float)
    q_b = np.asarray(Q[b], dtype=float)
    fun = lambda u: objective.excess(q_b, u)  # noqa: E731
    A, c = rotation_constraints(b, Q, U, cfg.trust_rot, local_normal, cfg.rotation_linearization)
    worst = float((-c).max())  # A @ 0 - c
    if worst > _CURRENT_POINT_TOL:
        raise AssertionError(f"zero increment violates the linearized constraints by {worst:.3g}")

    f0 = fun(u0)
    g = fd_gradient(fun, u0, cfg.fd_eps, f0)
    du = solve_lp3(LinearProgram3(-g, A, c))
    slope = float(g @ du)
    return armijo(fun, u0, du, f0, slope, cfg,
                  lambda u: _rotation_feasible(b, Q, u, local_normal))


def _surface_pass(model: CapacityModel, Q, U, pc, cfg, trace: ConvergenceTrace, kind: str) -> None:
    """Improve every surface once, in index order, updating ``Q``/``U`` in place."""
    blocks = model.blocks(Q, U)
    cache = gram_exclusive(blocks, 0)
    for b in range(len(Q)):
        if b > 0:
            cache = gram_update(cache, blocks[b - 1], blocks[b])
        objective = model.surface_objective(cache)
        for _ in range(cfg.t_inner):
            if kind == "position":
                step = position_step(b, Q, U, objective, pc, cfg)
            else:
                step = rotation_step(b, Q, U, objective, cfg)
            if not step.accepted:
                break
            if kind == "position":
                Q[b] = step.x
            else:
                U[b] = step.x
            trace.taus.append(step.tau)
            trace.step_violations.append(
                check_constraints(arrays_to_poses(Q, U), model.layout, pc).max_violation)
        blocks[b] = model.block(Q[b], U[b])


def alternating_optimize(poses, model: CapacityModel, pc: PlacementConstraints,
                         cfg: OptimizerConfig, positions: bool = True):
    """Alternate position and rotation passes over all surfaces.

    With ``positions=False`` only the rotations move.  Returns the final
    poses and a :class:`ConvergenceTrace` whose objective entries are
    average capacities in bps/Hz.
    """
    Q, U = poses_to_arrays(poses)
    trace = ConvergenceTrace()
    current = model.capacity(Q, U)
    trace.record_outer(current, check_constraints(poses, model.layout, pc).max_violation)
    for _ in range(cfg.t_outer):
        previous = current
        if positions:
            _surface_pass(model, Q, U, pc, cfg, trace, "position")
        _surface_pass(model, Q, U, pc, cfg, trace, "rotation")
        current = model.capacity(Q, U)
        trace.record_outer(current, check_constraints(arrays_to_poses(Q, U), model.layout, pc).max_violation)
        if current - previous < cfg.conv_tol * abs(previous):
            break
    return arrays_to_poses(Q, U), trace
