"""Grid value types shared by the whole pipeline.

Layout is channel-major (c, h, w), C-contiguous float64, so a grid has one
canonical byte representation for golden-file comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .rng import Rng


class Position(NamedTuple):
    y: float
    x: float


def _validated(data: np.ndarray, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"{what} data must be 3-dimensional (c, h, w), got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ValueError(f"{what} dimensions must be positive, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    return arr


@dataclass(frozen=True)
class LatentGrid:
    """A c x h x w real field; latent variables and decoded planes live here."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _validated(self.data, "LatentGrid"))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @classmethod
    def zeros(cls, channels: int, height: int, width: int) -> "LatentGrid":
        return cls(np.zeros((channels, height, width)))

    @classmethod
    def full(cls, channels: int, height: int, width: int, value: float) -> "LatentGrid":
        return cls(np.full((channels, height, width), float(value)))


@dataclass(frozen=True)
class FeatureGrid:
    """A dim x h x w descriptor field (one dim-vector per spatial position)."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _validated(self.data, "FeatureGrid"))

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def vectors(self) -> np.ndarray:
        """(h*w, dim) view, row-major over positions."""
        return self.data.reshape(self.dim, -1).T


def rng_gaussian(rng: Rng, shape: tuple[int, int, int]) -> LatentGrid:
    """Grid of i.i.d. standard normals; advances rng deterministically."""
    c, h, w = shape
    if c < 1 or h < 1 or w < 1:
        raise ValueError(f"shape components must be positive, got {shape}")
    return LatentGrid(rng.gaussians(c * h * w).reshape(c, h, w))


def l2_normalize_vectors(f: FeatureGrid) -> FeatureGrid:
    """Scale every per-position vector to unit norm; zero vectors stay zero."""
    norms = np.sqrt(np.sum(f.data * f.data, axis=0, keepdims=True))
    safe = np.where(norms > 0.0, norms, 1.0)
    return FeatureGrid(f.data / safe)
