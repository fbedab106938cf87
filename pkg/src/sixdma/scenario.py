"""Random user drops from a non-homogeneous Poisson point process.

The coverage region is a spherical annulus around the BS reference point
with a few spherical hotspots inside.  The density is a uniform background
plus a constant excess inside every hotspot, so a drop is the superposition
of a uniform annulus component and one uniform-ball component per hotspot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .propagation import PathLossModel, path_gains


def _ball_volume(r: float) -> float:
    return 4.0 / 3.0 * math.pi * r**3


@dataclass(frozen=True, eq=False)
class HotspotSpec:
    center: np.ndarray
    radius: float
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        if not self.radius > 0:
            raise ValidationError("hotspot radius must be positive")
        if self.weight < 0:
            raise ValidationError("hotspot weight must be non-negative")

    @classmethod
    def at(cls, distance, radius, azimuth_deg, elevation_deg, weight=1.0) -> "HotspotSpec":
        """Hotspot whose center sits at the given distance and direction."""
        az, el = math.radians(azimuth_deg), math.radians(elevation_deg)
        c = distance * np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
        return cls(c, radius, weight)

    @property
    def volume(self) -> float:
        return _ball_volume(self.radius)


def default_hotspots() -> list[HotspotSpec]:
    return [
        HotspotSpec.at(40.0, 5.0, 30.0, 10.0, 1.0),
        HotspotSpec.at(60.0, 10.0, 150.0, 20.0, 2.0),
        HotspotSpec.at(100.0, 15.0, 270.0, 30.0, 3.0),
    ]


@dataclass(frozen=True)
class CoverageRegion:
    r_min: float = 20.0
    r_max: float = 200.0
    hotspots: Sequence[HotspotSpec] = field(default_factory=default_hotspots)

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValidationError("coverage region needs 0 < r_min < r_max")
        object.__setattr__(self, "hotspots", tuple(self.hotspots))
        for i, h in enumerate(self.hotspots):
            d = float(np.linalg.norm(h.center))
            if d - h.radius < self.r_min or d + h.radius > self.r_max:
                raise ValidationError(f"hotspot {i} is not inside the coverage annulus")
        for i in range(len(self.hotspots)):
            for j in range(i + 1, len(self.hotspots)):
                a, b = self.hotspots[i], self.hotspots[j]
                if np.linalg.norm(a.center - b.center) < a.radius + b.radius:
                    raise ValidationError(f"hotspots {i} and {j} overlap")

    @property
    def volume(self) -> float:
        return _ball_volume(self.r_max) - _ball_volume(self.r_min)


@dataclass(frozen=True)
class DensityModel:
    """Expected user count ``mu`` split into a regular fraction ``xi`` and
    hotspot excess shared in proportion to the hotspot weights."""

    mu: float = 35.0
    xi: float = 0.2
    region: CoverageRegion = field(default_factory=CoverageRegion)

    def __post_init__(self):
        if self.mu < 0:
            raise ValidationError("mu must be non-negative")
        if not 0.0 <= self.xi <= 1.0:
            raise ValidationError("xi must be in [0,1]")
        if self.xi < 1.0 and self._weight_sum() <= 0:
            raise ValidationError("xi < 1 requires at least one hotspot with positive weight")

    def _weight_sum(self) -> float:
        return math.fsum(h.weight for h in self.region.hotspots)

    @property
    def rho0(self) -> float:
        return self.xi * self.mu / self.region.volume

    def hotspot_excess_counts(self) -> np.ndarray:
        """Expected number of excess users in each hotspot."""
        if not self.region.hotspots:
            return np.zeros(0)
        w = np.array([h.weight for h in self.region.hotspots])
        total = self._weight_sum()
        if total == 0:
            return np.zeros_like(w)
        return (1.0 - self.xi) * self.mu * w / total

    def hotspot_densities(self) -> np.ndarray:
        vols = np.array([h.volume for h in self.region.hotspots])
        return self.hotspot_excess_counts() / vols if vols.size else np.zeros(0)

    def component_probabilities(self) -> np.ndarray:
        """Probability that a user belongs to the background or hotspot ``w``."""
        if self.mu == 0:
            p = np.zeros(1 + len(self.region.hotspots))
            p[0] = 1.0
            return p
        rest = self.hotspot_excess_counts() / self.mu
        return np.concatenate([[1.0 - math.fsum(rest)], rest])


@dataclass(frozen=True, eq=False)
class UserDrop:
    positions: np.ndarray
    path_gains: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        gains = np.asarray(self.path_gains, dtype=float).reshape(-1)
        if len(pos) != len(gains):
            raise ValueError("positions and path_gains must have equal length")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "path_gains", gains)

    @property
    def K(self) -> int:
        return len(self.positions)


def mean_user_count(dm: DensityModel) -> float:
    vols = np.array([h.volume for h in dm.region.hotspots], dtype=float)
    return dm.rho0 * dm.region.volume + float(np.dot(dm.hotspot_densities(), vols))


def sample_user_count(dm: DensityModel, rng: np.random.Generator) -> int:
    return int(rng.poisson(dm.mu))


def _unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_annulus(rng: np.random.Generator, n: int, r_min: float, r_max: float) -> np.ndarray:
    u = rng.random(n)
    r = np.cbrt(r_min**3 + u * (r_max**3 - r_min**3))
    return r[:, None] * _unit_vectors(rng, n)


def sample_ball(rng: np.random.Generator, n: int, center, radius: float) -> np.ndarray:
    r = radius * np.cbrt(rng.random(n))
    return np.asarray(center) + r[:, None] * _unit_vectors(rng, n)


def sample_drop(dm: DensityModel, plm: PathLossModel, rng: np.random.Generator) -> UserDrop:
    K = sample_user_count(dm, rng)
    probs = dm.component_probabilities()
    comp = rng.choice(len(probs), size=K, p=probs)
    positions = np.empty((K, 3))
    mask = comp == 0
    positions[mask] = sample_annulus(rng, int(mask.sum()), dm.region.r_min, dm.region.r_max)
    for w, h in enumerate(dm.region.hotspots, start=1):
        mask = comp == w
        positions[mask] = sample_ball(rng, int(mask.sum()), h.center, h.radius)
    return UserDrop(positions, path_gains(positions, plm) if K else np.zeros(0))


def drop_rng(seed, s: int) -> np.random.Generator:
    """Generator for drop ``s``, independent of how many other drops exist."""
    key = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    return np.random.default_rng([*key, s])


def monte_carlo_set(dm: DensityModel, plm: PathLossModel, S: int, seed) -> list[UserDrop]:
    if S < 1:
        raise ValueError("S must be >= 1")
    return [sample_drop(dm, plm, drop_rng(seed, s)) for s in range(S)]
