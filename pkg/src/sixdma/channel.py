"""Line-of-sight uplink channels and log-det sum rates.

Per drop ``s`` the transmit-power-scaled channel seen by surface ``b`` is the
``K_s x N`` block ``W_b`` whose row ``k`` is
``sqrt(p * nu_k * g_k(u_b)) * conj(a_k(q_b, u_b))``.  The sum rate is
``log2 det(I + sum_b W_b W_b^H / sigma2)``.

For optimization, drops are stacked into zero-padded arrays: a padded user
has zero amplitude, so its row of every block vanishes and it leaves the
determinant untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalFailure, ZeroPosition
from .geometry import ArrayLayout, SurfacePose, antenna_positions, rotation_matrix
from .propagation import RadiationPattern, effective_gain_linear, local_angles_many
from .scenario import UserDrop

LOG2E = 1.0 / math.log(2.0)


def pointing_vector(user_pos) -> np.ndarray:
    """Unit propagation direction of a signal from ``user_pos`` to the origin."""
    z = np.asarray(user_pos, dtype=float)
    d = np.linalg.norm(z)
    if d == 0:
        raise ZeroPosition("user located at the BS reference point")
    return -z / d


def direction_from_angles(theta: float, phi: float) -> np.ndarray:
    """Unit vector for elevation ``theta`` and azimuth ``phi``."""
    return np.array([math.cos(theta) * math.cos(phi), math.cos(theta) * math.sin(phi), math.sin(theta)])


def steering_vector(pose: SurfacePose, layout: ArrayLayout, f, wavelength: float) -> np.ndarray:
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    r = antenna_positions(pose, layout)
    return np.exp(-2j * math.pi / wavelength * (r @ np.asarray(f, dtype=float)))


def _block(q, u, offsets, dirs, amp, pattern, wavenumber):
    """Stacked surface blocks for directions ``dirs`` of shape (..., K, 3)."""
    R = rotation_matrix(u)
    r = q + offsets @ R.T                      # (N, 3)
    flat = dirs.reshape(-1, 3)
    theta, phi = local_angles_many(R, flat)
    g = effective_gain_linear(theta, phi, pattern).reshape(amp.shape)
    phase = (wavenumber * flat) @ r.T          # (S*K, N)
    steer = np.exp(1j * phase).reshape(amp.shape + (r.shape[0],))
    return (amp * np.sqrt(g))[..., None] * steer


def surface_block(pose: SurfacePose, layout: ArrayLayout, drop: UserDrop,
                  pattern: RadiationPattern, power: float, wavelength: float) -> np.ndarray:
    """``K x N`` block of one surface for one drop."""
    if drop.K == 0:
        return np.zeros((0, layout.N), dtype=complex)
    dirs = -drop.positions / np.linalg.norm(drop.positions, axis=1, keepdims=True)
    amp = np.sqrt(power * drop.path_gains)
    return _block(pose.q, pose.u, layout.local_offsets, dirs, amp, pattern, 2 * math.pi / wavelength)


@dataclass(eq=False)
class ChannelSample:
    blocks: list
    drop: UserDrop

    def __post_init__(self):
        if any(W.shape[0] != self.drop.K for W in self.blocks):
            raise ValueError("every block needs one row per user")


def channel_sample(poses: Sequence[SurfacePose], layout: ArrayLayout, drop: UserDrop,
                   pattern: RadiationPattern, power: float, wavelength: float) -> ChannelSample:
    return ChannelSample([surface_block(p, layout, drop, pattern, power, wavelength) for p in poses], drop)


def log2det_pd(M: np.ndarray) -> np.ndarray:
    """``log2 det`` of Hermitian positive definite matrices, shape (..., n, n)."""
    if M.shape[-1] == 0:
        return np.zeros(M.shape[:-2])
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("Cholesky factorization failed") from exc
    diag = np.diagonal(L, axis1=-2, axis2=-1).real
    return 2.0 * LOG2E * np.log(diag).sum(axis=-1)


def _herm(X: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(X, -1, -2))


def sum_rate(sample: ChannelSample, noise_power: float, side: str = "auto") -> float:
    """Sum rate in bps/Hz, evaluated on the smaller determinant side.

    ``side`` may force ``"users"`` (K x K) or ``"antennas"`` (NB x NB).
    """
    if not noise_power > 0:
        raise ValueError("noise power must be positive")
    K = sample.drop.K
    if K == 0 or not sample.blocks:
        return 0.0
    Qh = np.hstack(sample.blocks)  # K x NB
    NB = Qh.shape[1]
    if side == "auto":
        side = "users" if K <= NB else "antennas"
    if side == "users":
        M = np.eye(K) + Qh @ _herm(Qh) / noise_power
    elif side == "antennas":
        M = np.eye(NB) + _herm(Qh) @ Qh / noise_power
    else:
        raise ValueError(f"unknown side {side!r}")
    return float(log2det_pd(M))


@dataclass(eq=False)
class GramCache:
    """Gram matrix of all blocks except ``excluded_index``; shape (..., K, K)."""

    G_excl: np.ndarray
    excluded_index: int


def gram_exclusive(blocks: Sequence[np.ndarray], b: int) -> GramCache:
    """Direct computation of the Gram matrix excluding block ``b``."""
    K = blocks[0].shape[-2]
    G = np.zeros(blocks[0].shape[:-2] + (K, K), dtype=complex)
    for j, W in enumerate(blocks):
        if j != b:
            G += W @ _herm(W)
    return GramCache(G, b)


def gram_update(cache: GramCache, block_prev: np.ndarray, block_new: np.ndarray) -> GramCache:
    """Shift the exclusion from surface ``b-1`` to surface ``b`` with one
    rank-2N product: ``G + [W_prev, W_new] @ [W_prev, -W_new]^H``."""
    M_a = np.concatenate([block_prev, block_new], axis=-1)
    M_b = np.concatenate([block_prev, -block_new], axis=-1)
    return GramCache(cache.G_excl + M_a @ _herm(M_b), cache.excluded_index + 1)


class CapacityModel:
    """Channel model bound to a fixed list of drops.

    Drops are zero-padded to a common user count so every evaluation runs as
    one batched linear-algebra call over all drops.  Reductions over drops
    use a fixed order, so results are bit-reproducible.
    """

    def __init__(self, drops: Sequence[UserDrop], layout: ArrayLayout, pattern: RadiationPattern,
                 power: float, noise_power: float, wavelength: float):
        if len(drops) < 1:
            raise ValueError("need at least one drop")
        if not noise_power > 0 or not wavelength > 0 or power < 0:
            raise ValueError("invalid power, noise power or wavelength")
        self.drops = list(drops)
        self.layout = layout
        self.pattern = pattern
        self.power = power
        self.noise_power = noise_power
        self.wavelength = wavelength
        self.wavenumber = 2 * math.pi / wavelength

        S = len(self.drops)
        K = max(d.K for d in self.drops)
        self.counts = np.array([d.K for d in self.drops])
        self.dirs = np.zeros((S, K, 3))
        self.dirs[..., 0] = 1.0
        self.amp = np.zeros((S, K))
        for s, d in enumerate(self.drops):
            if d.K:
                self.dirs[s, :d.K] = -d.positions / np.linalg.norm(d.positions, axis=1, keepdims=True)
                self.amp[s, :d.K] = np.sqrt(power * d.path_gains)

    @property
    def S(self) -> int:
        return len(self.drops)

    @property
    def K(self) -> int:
        return self.amp.shape[1]

    def block(self, q, u) -> np.ndarray:
        """Blocks of one surface for every drop, shape (S, K, N)."""
        return _block(np.asarray(q, dtype=float), u, self.layout.local_offsets, self.dirs,
                      self.amp, self.pattern, self.wavenumber)

    def blocks(self, Q, U) -> list[np.ndarray]:
        return [self.block(q, u) for q, u in zip(Q, U)]

    def rates(self, Q, U) -> np.ndarray:
        """Per-drop sum rate for surfaces with centers ``Q`` and angles ``U``."""
        if self.K == 0:
            return np.zeros(self.S)
        G = np.zeros((self.S, self.K, self.K), dtype=complex)
        for W in self.blocks(Q, U):
            G += W @ _herm(W)
        return log2det_pd(np.eye(self.K) + G / self.noise_power)

    def capacity(self, Q, U) -> float:
        return float(self.rates(Q, U).mean())

    def exclusion_cache(self, blocks: Sequence[np.ndarray], b: int) -> GramCache:
        return gram_exclusive(blocks, b)

    def surface_objective(self, cache: GramCache) -> "SurfaceObjective":
        return SurfaceObjective(self, cache)


class SurfaceObjective:
    """Average capacity as a function of one surface's pose.

    With ``M0 = I + G_excl / sigma2`` fixed, the determinant lemma gives
    ``log det(M0 + W W^H / sigma2) = log det M0 + log det(I_N + W^H P W)``
    where ``P = (sigma2 I + G_excl)^-1``.  ``offset`` holds the first term
    averaged over drops; :meth:`excess` evaluates the second on N x N
    matrices, which is what the optimizer differences.
    """

    def __init__(self, model: CapacityModel, cache: GramCache):
        self.model = model
        self.cache = cache
        if model.K == 0:
            self.offset = 0.0
            self._P = None
            return
        M = model.noise_power * np.eye(model.K) + cache.G_excl
        M = 0.5 * (M + _herm(M))
        self.offset = float((log2det_pd(M) - model.K * math.log2(model.noise_power)).mean())
        P = np.linalg.inv(M)
        self._P = 0.5 * (P + _herm(P))

    def excess_per_drop(self, q, u) -> np.ndarray:
        if self._P is None:
            return np.zeros(self.model.S)
        W = self.model.block(q, u)
        X = _herm(W) @ (self._P @ W)
        X = 0.5 * (X + _herm(X))
        return log2det_pd(np.eye(W.shape[-1]) + X)

    def excess(self, q, u) -> float:
        return float(self.excess_per_drop(q, u).mean())

    def __call__(self, q, u) -> float:
        return self.offset + self.excess(q, u)


def partial_objective(model: CapacityModel, cache: GramCache, q, u) -> float:
    """Average capacity with every surface but ``cache.excluded_index`` frozen."""
    return SurfaceObjective(model, cache)(q, u)


def avg_capacity(poses: Sequence[SurfacePose], drops: Sequence[UserDrop], layout: ArrayLayout,
                 pattern: RadiationPattern, power: float, noise_power: float,
                 wavelength: float) -> float:
    Q = np.array([p.q for p in poses])
    U = np.array([p.u for p in poses])
    return CapacityModel(drops, layout, pattern, power, noise_power, wavelength).capacity(Q, U)
