"""Directional element gain (3GPP sector pattern) and distance path gain."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NonUnitDirection, TooClose
from .geometry import rotation_matrix


@dataclass(frozen=True)
class RadiationPattern:
    """3GPP element pattern parameters (gains in dB, beamwidths in radians)."""

    g_max: float = 8.0
    g_s: float = 25.0
    g_v: float = 25.0
    theta_3db: float = math.radians(65.0)
    phi_3db: float = math.radians(65.0)

    def __post_init__(self):
        if min(self.g_max, self.g_s, self.g_v) <= 0:
            raise ValueError("pattern gains must be positive")
        for bw in (self.theta_3db, self.phi_3db):
            if not 0 < bw < math.pi:
                raise ValueError("3 dB beamwidths must lie in (0, pi)")


@dataclass(frozen=True)
class PathLossModel:
    """``nu = eps0 * d**(-exponent)`` for ``d > d0`` meters."""

    eps0: float = 1e-4
    exponent: float = 2.8
    d0: float = 1.0

    def __post_init__(self):
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not self.exponent > 0:
            raise ValueError("path-loss exponent must be positive")
        if self.d0 != 1.0:
            raise ValueError("reference distance d0 is fixed at 1 m")


class LocalAngles(NamedTuple):
    theta_t: float
    phi_t: float


def _angles_from_local(xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    theta = math.pi / 2 - np.arccos(np.clip(z, -1.0, 1.0))
    rxy = np.sqrt(x * x + y * y)
    degenerate = rxy * rxy < 1e-24
    cos_phi = np.where(degenerate, 1.0, x / np.where(degenerate, 1.0, rxy))
    sign = np.where(y >= 0, 1.0, -1.0)
    phi = np.arccos(np.clip(cos_phi, -1.0, 1.0)) * sign
    return theta, np.where(degenerate, 0.0, phi)


def local_angles(u, f) -> LocalAngles:
    """Elevation/azimuth of the arriving signal in a surface's local frame.

    ``f`` is the unit propagation direction of the signal (user toward BS),
    so ``-R(u).T @ f`` points from the surface toward the user.
    """
    f = np.asarray(f, dtype=float)
    if abs(np.linalg.norm(f) - 1.0) > 1e-9:
        raise NonUnitDirection(f"|f| = {np.linalg.norm(f)!r}")
    xyz = -(rotation_matrix(u).T @ f)
    theta, phi = _angles_from_local(xyz)
    return LocalAngles(float(theta), float(phi))


def local_angles_many(R: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized local angles for directions ``f`` of shape ``(..., 3)``.

    No unit-norm check; callers pass normalized directions.
    """
    return _angles_from_local(-(f @ R))


def element_gain_dbi(theta_t, phi_t, pat: RadiationPattern):
    """Combined horizontal + vertical element gain in dBi (array-friendly)."""
    a_h = -np.minimum(12.0 * (np.asarray(phi_t) / pat.phi_3db) ** 2, pat.g_s)
    a_v = -np.minimum(12.0 * (np.asarray(theta_t) / pat.theta_3db) ** 2, pat.g_v)
    gain = pat.g_max - np.minimum(-(a_h + a_v), pat.g_s)
    return float(gain) if np.ndim(gain) == 0 else gain


def effective_gain_linear(theta_t, phi_t, pat: RadiationPattern):
    return 10.0 ** (np.asarray(element_gain_dbi(theta_t, phi_t, pat)) / 10.0)


def path_gain(user_pos, model: PathLossModel) -> float:
    d = float(np.linalg.norm(user_pos))
    if d <= model.d0:
        raise TooClose(f"user at {d:.3g} m is within the {model.d0} m reference distance")
    return model.eps0 * d ** (-model.exponent)


def path_gains(positions: np.ndarray, model: PathLossModel) -> np.ndarray:
    """Vectorized :func:`path_gain` for positions of shape ``(K, 3)``."""
    d = np.linalg.norm(np.atleast_2d(positions), axis=-1)
    if d.size and d.min() <= model.d0:
        raise TooClose(f"user at {d.min():.3g} m is within the {model.d0} m reference distance")
    return model.eps0 * d ** (-model.exponent)
