"""Noise schedules, the closed-form forward process, and accelerated
timestep subsequences.

Convention: alpha_bars[t-1] is the cumulative product prod_{s<=t}(1 - betas[s-1]),
and alpha_bar_at(0) == 1 (empty product), so t ranges over [0, t_train].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import LatentGrid


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray
    alpha_bars: np.ndarray

    def __post_init__(self):
        betas = np.ascontiguousarray(self.betas, dtype=np.float64)
        abars = np.ascontiguousarray(self.alpha_bars, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ValueError("betas must be a non-empty 1-d array")
        if abars.shape != betas.shape:
            raise ValueError("alpha_bars must match betas in length")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ValueError("betas must lie strictly in (0, 1)")
        if np.any(abars <= 0.0) or np.any(abars >= 1.0):
            raise ValueError("alpha_bars must lie strictly in (0, 1)")
        if np.any(np.diff(abars) >= 0.0):
            raise ValueError("alpha_bars must be strictly decreasing")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_bars", abars)

    @property
    def t_train(self) -> int:
        return self.betas.size


@dataclass(frozen=True)
class TimestepSubsequence:
    """Strictly increasing timesteps tau_1..tau_S, each in [1, t_train]."""

    taus: np.ndarray

    def __post_init__(self):
        taus = np.ascontiguousarray(self.taus, dtype=np.int64)
        if taus.ndim != 1 or taus.size < 1:
            raise ValueError("taus must be a non-empty 1-d array")
        if taus[0] < 1:
            raise ValueError("timesteps must be >= 1")
        if np.any(np.diff(taus) <= 0):
            raise ValueError("taus must be strictly increasing")
        object.__setattr__(self, "taus", taus)

    @property
    def s_steps(self) -> int:
        return self.taus.size

    def tau(self, n: int) -> int:
        """tau_n for 1-based n; tau(0) == 0 denotes the clean endpoint."""
        if n == 0:
            return 0
        if not 1 <= n <= self.s_steps:
            raise ValueError(f"subsequence index {n} out of range [0, {self.s_steps}]")
        return int(self.taus[n - 1])


def linear_beta_schedule(t_train: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    if t_train < 1:
        raise ValueError("t_train must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    if t_train == 1:
        betas = np.array([beta_start])
    else:
        betas = np.linspace(beta_start, beta_end, t_train)
    return NoiseSchedule(betas=betas, alpha_bars=np.cumprod(1.0 - betas))


def alpha_bar_at(sched: NoiseSchedule, t: int) -> float:
    if not 0 <= t <= sched.t_train:
        raise ValueError(f"timestep {t} out of range [0, {sched.t_train}]")
    if t == 0:
        return 1.0
    return float(sched.alpha_bars[t - 1])


def make_subsequence(t_train: int, s_steps: int) -> TimestepSubsequence:
    """Uniformly spaced subsequence: tau_n = round(n * t_train / s_steps)."""
    if t_train < 1 or s_steps < 1:
        raise ValueError("t_train and s_steps must be positive")
    if s_steps > t_train:
        raise ValueError(f"s_steps {s_steps} exceeds t_train {t_train}")
    taus = np.array(
        [int(math.floor(n * t_train / s_steps + 0.5)) for n in range(1, s_steps + 1)],
        dtype=np.int64,
    )
    return TimestepSubsequence(taus=taus)


def forward_diffuse(x0: LatentGrid, t: int, eps: LatentGrid, sched: NoiseSchedule) -> LatentGrid:
    """Closed-form corruption: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps."""
    if x0.shape != eps.shape:
        raise ValueError(f"shape mismatch: x0 {x0.shape} vs eps {eps.shape}")
    a = alpha_bar_at(sched, t)
    return LatentGrid(math.sqrt(a) * x0.data + math.sqrt(1.0 - a) * eps.data)


def start_index_from_fraction(noise_fraction: float, s_steps: int) -> int:
    """Subsequence index N at which reverse sampling starts."""
    if not 0.0 < noise_fraction <= 1.0:
        raise ValueError("noise_fraction must lie in (0, 1]")
    if s_steps < 1:
        raise ValueError("s_steps must be positive")
    n = int(math.floor(noise_fraction * s_steps + 0.5))
    return max(1, min(n, s_steps))
