"""Rigid-body pose math and placement constraints for movable antenna surfaces.

Angles follow the ``(alpha, beta, gamma)`` ordering everywhere.  The rotation
matrix is the expanded direction-cosine form::

    [[ ca*cg,              ca*sg,              -sa   ],
     [ sb*sa*cg - cb*sg,   sb*sa*sg + cb*cg,    ca*sb],
     [ cb*sa*cg + sb*sg,   cb*sa*sg - sb*cg,    ca*cb]]

Local antenna offsets map to the global frame as ``q + R(u) @ r_local`` and
the local x-axis is the surface normal (boresight).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateDirection, GimbalLock, InitializationFailed

TWO_PI = 2.0 * math.pi
GIMBAL_TOL = 1e-9


class EulerAngles(NamedTuple):
    alpha: float
    beta: float
    gamma: float

    def normalized(self) -> "EulerAngles":
        """Wrap every angle into [0, 2*pi)."""
        return EulerAngles(*(float(np.mod(a, TWO_PI)) for a in self))


@dataclass(frozen=True, eq=False)
class SurfacePose:
    """Center position ``q`` (meters) and Euler rotation ``u`` of one surface."""

    q: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(3))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float).reshape(3))

    @property
    def angles(self) -> EulerAngles:
        return EulerAngles(*map(float, self.u))

    @property
    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.u)


@dataclass(frozen=True, eq=False)
class ArrayLayout:
    """Antenna offsets in the surface's local frame plus the local normal."""

    local_offsets: np.ndarray
    local_normal: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        offsets = np.atleast_2d(np.asarray(self.local_offsets, dtype=float))
        normal = np.asarray(self.local_normal, dtype=float).reshape(3)
        if offsets.shape[1] != 3:
            raise ValueError("local_offsets must have shape (N, 3)")
        if abs(np.linalg.norm(normal) - 1.0) > 1e-12:
            raise ValueError("local_normal must be a unit vector")
        object.__setattr__(self, "local_offsets", offsets)
        object.__setattr__(self, "local_normal", normal)

    @property
    def N(self) -> int:
        return self.local_offsets.shape[0]

    def min_spacing(self) -> float:
        """Smallest pairwise offset distance (inf for a single antenna)."""
        if self.N < 2:
            return math.inf
        diff = self.local_offsets[:, None, :] - self.local_offsets[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        return float(dist[np.triu_indices(self.N, 1)].min())

    @classmethod
    def upa(cls, n: int, spacing: float) -> "ArrayLayout":
        """Near-square uniform planar array in the local y'-z' plane.

        Elements fill a ``rows x cols`` grid row by row, with
        ``rows = ceil(sqrt(n))``; the grid is then shifted so that the element
        centroid sits at the surface center.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        rows = math.ceil(math.sqrt(n))
        cols = math.ceil(n / rows)
        idx = np.arange(n)
        y = (idx % cols) * spacing
        z = (idx // cols) * spacing
        offsets = np.column_stack([np.zeros(n), y, z])
        offsets -= offsets.mean(axis=0)
        return cls(offsets)


def layout_clearance(layout: "ArrayLayout", spacing: float) -> float:
    """Minimum center distance for two surfaces with this layout: the array
    diagonal (largest offset distance) plus one antenna spacing."""
    off = layout.local_offsets
    diag = float(np.linalg.norm(off[:, None, :] - off[None, :, :], axis=-1).max())
    return diag + spacing


@dataclass(frozen=True, eq=False)
class SiteBox:
    """Axis-aligned box holding every surface center."""

    center: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(3)
        h = np.asarray(self.half_extents, dtype=float).reshape(3)
        if np.any(h <= 0):
            raise ValueError("half_extents must be strictly positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_extents", h)

    @classmethod
    def cube(cls, side: float, center=(0.0, 0.0, 0.0)) -> "SiteBox":
        return cls(np.asarray(center, dtype=float), np.full(3, side / 2.0))

    @property
    def inscribed_radius(self) -> float:
        return float(self.half_extents.min())

    def violation(self, q) -> np.ndarray:
        """Per-point distance outside the box along the worst axis (0 inside)."""
        q = np.atleast_2d(q)
        excess = np.abs(q - self.center) - self.half_extents
        return np.maximum(excess.max(axis=-1), 0.0)

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """Box as ``A x <= b`` with the six axis-aligned faces."""
        eye = np.eye(3)
        A = np.vstack([eye, -eye])
        b = np.concatenate([self.center + self.half_extents, -(self.center - self.half_extents)])
        return A, b


@dataclass(frozen=True)
class PlacementConstraints:
    d_min: float
    site: SiteBox

    def __post_init__(self):
        if not self.d_min > 0:
            raise ValueError("d_min must be positive")


@dataclass(frozen=True)
class ConstraintReport:
    """Worst violation per constraint family; zero means satisfied."""

    site: float
    min_distance: float
    reflection: float
    blockage: float
    strict_reflection: float
    tol: float

    @property
    def max_violation(self) -> float:
        # the per-antenna reflection form is diagnostic only
        return max(self.site, self.min_distance, self.reflection, self.blockage)

    @property
    def feasible(self) -> bool:
        return self.max_violation <= self.tol

    @property
    def strict_feasible(self) -> bool:
        return self.strict_reflection <= self.tol


def rotation_matrix(u) -> np.ndarray:
    """Rotation matrix for Euler angles ``u = (alpha, beta, gamma)``.

    Accepts a single triple or a stack of shape ``(..., 3)``.
    """
    u = np.asarray(u, dtype=float)
    a, b, g = u[..., 0], u[..., 1], u[..., 2]
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cg, sg = np.cos(g), np.sin(g)
    R = np.empty(u.shape[:-1] + (3, 3))
    R[..., 0, 0] = ca * cg
    R[..., 0, 1] = ca * sg
    R[..., 0, 2] = -sa
    R[..., 1, 0] = sb * sa * cg - cb * sg
    R[..., 1, 1] = sb * sa * sg + cb * cg
    R[..., 1, 2] = ca * sb
    R[..., 2, 0] = cb * sa * cg + sb * sg
    R[..., 2, 1] = cb * sa * sg - sb * cg
    R[..., 2, 2] = ca * cb
    return R


def rotation_derivatives(u) -> np.ndarray:
    """Partial derivatives of :func:`rotation_matrix` with respect to
    ``(alpha, beta, gamma)``, stacked along the first axis (shape 3x3x3)."""
    a, b, g = np.asarray(u, dtype=float)
    ca, sa = math.cos(a), math.sin(a)
    cb, sb = math.cos(b), math.sin(b)
    cg, sg = math.cos(g), math.sin(g)
    d_a = [[-sa * cg, -sa * sg, -ca],
           [sb * ca * cg, sb * ca * sg, -sa * sb],
           [cb * ca * cg, cb * ca * sg, -sa * cb]]
    d_b = [[0.0, 0.0, 0.0],
           [cb * sa * cg + sb * sg, cb * sa * sg - sb * cg, ca * cb],
           [-sb * sa * cg + cb * sg, -sb * sa * sg - cb * cg, -ca * sb]]
    d_g = [[-ca * sg, ca * cg, 0.0],
           [-sb * sa * sg - cb * cg, sb * sa * cg - cb * sg, 0.0],
           [-cb * sa * sg + sb * cg, cb * sa * cg + sb * sg, 0.0]]
    return np.array([d_a, d_b, d_g])


def euler_from_matrix(R) -> EulerAngles:
    """Invert :func:`rotation_matrix`.

    Raises
    ------
    GimbalLock
        If ``|R[0, 2]| >= 1 - 1e-9``, where alpha is +-pi/2 and beta/gamma
        are not separable.
    """
    R = np.asarray(R, dtype=float)
    if abs(R[0, 2]) >= 1.0 - GIMBAL_TOL:
        raise GimbalLock(f"R[0,2] = {R[0, 2]!r} is at the gimbal-lock boundary")
    alpha = -math.asin(R[0, 2])
    beta = math.atan2(R[1, 2], R[2, 2])
    gamma = math.atan2(R[0, 1], R[0, 0])
    return EulerAngles(alpha, beta, gamma)


def incremental_rotation(du) -> np.ndarray:
    """First-order (small-angle) version of :func:`rotation_matrix`."""
    da, db, dg = np.asarray(du, dtype=float)
    return np.array([
        [1.0, dg, -da],
        [-dg, 1.0, db],
        [da, -db, 1.0],
    ])


def frame_rotation(x_axis, y_axis) -> np.ndarray:
    """Rotation whose columns are the given local x and y axes and x cross y.

    ``y_axis`` is Gram-Schmidt orthogonalized against ``x_axis`` first.
    """
    x = np.asarray(x_axis, dtype=float)
    x = x / np.linalg.norm(x)
    y = np.asarray(y_axis, dtype=float)
    y = y - (y @ x) * x
    ny = np.linalg.norm(y)
    if ny < 1e-12:
        raise DegenerateDirection("y_axis is parallel to x_axis")
    y = y / ny
    return np.column_stack([x, y, np.cross(x, y)])


def antenna_positions(pose: SurfacePose, layout: ArrayLayout) -> np.ndarray:
    """Global antenna positions, shape ``(N, 3)``."""
    return pose.q + layout.local_offsets @ rotation_matrix(pose.u).T


def surface_normal(u, layout: ArrayLayout) -> np.ndarray:
    return rotation_matrix(u) @ layout.local_normal


def _as_layout_list(layouts, count: int) -> list[ArrayLayout]:
    if isinstance(layouts, ArrayLayout):
        return [layouts] * count
    layouts = list(layouts)
    if len(layouts) != count:
        raise ValueError("need one layout per pose")
    return layouts


def check_constraints(
    poses: Sequence[SurfacePose],
    layouts,
    pc: PlacementConstraints,
    tol: float = 1e-9,
) -> ConstraintReport:
    """Evaluate every placement constraint for a set of surfaces.

    ``layouts`` is either one layout shared by all surfaces or a list.
    """
    if len(poses) < 1:
        raise ValueError("need at least one pose")
    layouts = _as_layout_list(layouts, len(poses))
    Q = np.array([p.q for p in poses])
    R = rotation_matrix(np.array([p.u for p in poses]))
    normals = np.einsum("bij,bj->bi", R, np.array([lay.local_normal for lay in layouts]))
    B = len(poses)

    site = float(pc.site.violation(Q).max())
    blockage = float(max(0.0, -np.einsum("bi,bi->b", normals, Q).min()))

    if B == 1:
        return ConstraintReport(site, 0.0, 0.0, blockage, 0.0, tol)

    off = ~np.eye(B, dtype=bool)
    diff = Q[None, :, :] - Q[:, None, :]  # diff[b, j] = q_j - q_b
    dist = np.linalg.norm(diff, axis=-1)
    min_distance = float(max(0.0, (pc.d_min - dist[off]).max()))
    refl = np.einsum("bi,bji->bj", normals, diff)
    reflection = float(max(0.0, refl[off].max()))

    strict = 0.0
    for j in range(B):
        r = antenna_positions(poses[j], layouts[j])  # (N, 3)
        # s[b, n] = n_b . (r_{j,n} - q_b)
        s = normals @ r.T - np.einsum("bi,bi->b", normals, Q)[:, None]
        s = np.delete(s, j, axis=0)
        strict = max(strict, float(s.max()))
    return ConstraintReport(site, min_distance, reflection, blockage, strict, tol)


def boundary_point(q_j, q_prev, d_min: float) -> np.ndarray:
    """Point on the sphere of radius ``d_min`` around ``q_j`` facing ``q_prev``."""
    q_j = np.asarray(q_j, dtype=float)
    q_prev = np.asarray(q_prev, dtype=float)
    v = q_j - q_prev
    dist = np.linalg.norm(v)
    if dist < 1e-12:
        raise DegenerateDirection("q_j and q_prev coincide")
    return q_j - (d_min / dist) * v


def distance_halfspace(q_j, q_prev, d_min: float) -> tuple[np.ndarray, float]:
    """Linear inner approximation of ``||q - q_j|| >= d_min`` around ``q_prev``.

    Returns ``(a, bound)`` meaning ``a @ q <= bound``.  Every point of the
    halfspace lies at least ``d_min`` away from ``q_j``.
    """
    q_j = np.asarray(q_j, dtype=float)
    a = q_j - np.asarray(q_prev, dtype=float)
    return a, float(a @ boundary_point(q_j, q_prev, d_min))


def fibonacci_candidates(count: int, radius: float, center=(0.0, 0.0, 0.0)):
    """Near-uniform candidate poses on a sphere, each facing radially outward.

    Returns a list of ``(position, EulerAngles)``.  The local frame at each
    point is (radial, azimuthal, radial x azimuthal).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not radius > 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    out = []
    for i in range(count):
        z = 1.0 - (2.0 * i + 1.0) / count
        rho = math.sqrt(max(0.0, 1.0 - z * z))
        zeta = i * golden
        radial = np.array([rho * math.cos(zeta), rho * math.sin(zeta), z])
        azimuthal = np.array([-math.sin(zeta), math.cos(zeta), 0.0])
        R = np.column_stack([radial, azimuthal, np.cross(radial, azimuthal)])
        out.append((center + radius * radial, euler_from_matrix(R)))
    return out


def initial_poses(B: int, candidates, seed, d_min: float | None = None,
                  max_draws: int = 1000) -> list[SurfacePose]:
    """Pick ``B`` distinct candidates at random, honoring ``d_min`` if given."""
    if B > len(candidates):
        raise ValueError(f"cannot pick {B} surfaces from {len(candidates)} candidates")
    rng = np.random.default_rng(seed)
    pos = np.array([c[0] for c in candidates])
    for _ in range(max_draws):
        idx = rng.choice(len(candidates), size=B, replace=False)
        if d_min is None or B < 2 or _min_pairwise(pos[idx]) >= d_min:
            return [SurfacePose(candidates[i][0], np.array(candidates[i][1])) for i in idx]
    raise InitializationFailed(f"no feasible draw of {B} candidates after {max_draws} tries")


def _min_pairwise(points: np.ndarray) -> float:
    diff = points[:, None, :] - points[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    return float(dist[np.triu_indices(len(points), 1)].min())


def poses_to_arrays(poses: Sequence[SurfacePose]) -> tuple[np.ndarray, np.ndarray]:
    return np.array([p.q for p in poses]), np.array([p.u for p in poses])


def arrays_to_poses(Q, U) -> list[SurfacePose]:
    return [SurfacePose(q, u) for q, u in zip(np.asarray(Q), np.asarray(U))]
