"""Dense matching: patch descriptors, correlation volumes, soft warping,
soft-argmax flows, and cycle-consistency confidence masks.

The patch descriptor is a deterministic stand-in for learned feature
extractors: flattened edge-replicated neighborhoods, mean-subtracted per
position so constant regions carry no signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import FeatureGrid, LatentGrid, Position, l2_normalize_vectors


@dataclass(frozen=True)
class DescriptorConfig:
    patch_radius: int = 1
    condition_weight: float = 0.5

    def __post_init__(self):
        if self.patch_radius < 0:
            raise ValueError("patch_radius must be non-negative")
        if self.condition_weight < 0.0:
            raise ValueError("condition_weight must be non-negative")


@dataclass(frozen=True)
class CorrelationMap:
    """Pairwise similarity between query positions (rows) and source
    positions (cols), with the grid shapes needed to fold rows back to 2-d."""

    values: np.ndarray
    query_shape: tuple[int, int]
    source_shape: tuple[int, int]

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("correlation values must be 2-d")
        if not np.all(np.isfinite(v)):
            raise ValueError("correlation values must be finite")
        qh, qw = self.query_shape
        sh, sw = self.source_shape
        if v.shape != (qh * qw, sh * sw):
            raise ValueError(
                f"values shape {v.shape} inconsistent with query {self.query_shape} "
                f"and source {self.source_shape}"
            )
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def transposed(self) -> "CorrelationMap":
        """Same similarities with query and source roles swapped."""
        return CorrelationMap(
            values=self.values.T.copy(),
            query_shape=self.source_shape,
            source_shape=self.query_shape,
        )


@dataclass(frozen=True)
class ConfidenceMask:
    flags: np.ndarray  # (h, w) bool

    def __post_init__(self):
        f = np.ascontiguousarray(self.flags, dtype=bool)
        if f.ndim != 2:
            raise ValueError("mask flags must be 2-d")
        object.__setattr__(self, "flags", f)

    @property
    def height(self) -> int:
        return self.flags.shape[0]

    @property
    def width(self) -> int:
        return self.flags.shape[1]

    @property
    def coverage(self) -> float:
        return float(np.mean(self.flags))


@dataclass(frozen=True)
class FlowField:
    """Per query position, a (y, x) source coordinate in latent-pixel units."""

    positions: np.ndarray  # (h, w, 2) float, [..., 0]=y, [..., 1]=x

    def __post_init__(self):
        p = np.ascontiguousarray(self.positions, dtype=np.float64)
        if p.ndim != 3 or p.shape[2] != 2:
            raise ValueError("flow positions must have shape (h, w, 2)")
        if not np.all(np.isfinite(p)):
            raise ValueError("flow positions must be finite")
        object.__setattr__(self, "positions", p)

    @property
    def height(self) -> int:
        return self.positions.shape[0]

    @property
    def width(self) -> int:
        return self.positions.shape[1]

    def at(self, y: int, x: int) -> Position:
        return Position(*self.positions[y, x])


def patch_descriptor(g: LatentGrid, cfg: DescriptorConfig) -> FeatureGrid:
    """Flattened (2r+1)^2 * c neighborhood per position, edge-replicated at
    borders, mean-subtracted per position."""
    r = cfg.patch_radius
    c, h, w = g.shape
    if 2 * r + 1 > min(h, w):
        raise ValueError(f"patch of radius {r} does not fit a {h}x{w} grid")
    padded = np.pad(g.data, ((0, 0), (r, r), (r, r)), mode="edge")
    side = 2 * r + 1
    desc = np.empty((c * side * side, h, w))
    idx = 0
    for ci in range(c):
        for dy in range(side):
            for dx in range(side):
                desc[idx] = padded[ci, dy : dy + h, dx : dx + w]
                idx += 1
    desc -= np.mean(desc, axis=0, keepdims=True)
    return FeatureGrid(desc)


def correlation_map(q: FeatureGrid, s: FeatureGrid) -> CorrelationMap:
    """Cosine similarity between every query and source position; zero
    vectors contribute similarity 0."""
    if q.dim != s.dim:
        raise ValueError(f"descriptor dim mismatch: {q.dim} vs {s.dim}")
    qn = l2_normalize_vectors(q).vectors()
    sn = l2_normalize_vectors(s).vectors()
    values = np.clip(qn @ sn.T, -1.0, 1.0)
    return CorrelationMap(
        values=values, query_shape=(q.height, q.width), source_shape=(s.height, s.width)
    )


def _softmax_rows(values: np.ndarray, temperature: float) -> np.ndarray:
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    scaled = values / temperature
    scaled -= np.max(scaled, axis=1, keepdims=True)
    weights = np.exp(scaled)
    weights /= np.sum(weights, axis=1, keepdims=True)
    return weights


def soft_warp(c: CorrelationMap, source: LatentGrid, temperature: float) -> LatentGrid:
    """Convex recombination of source values under temperature-softmaxed
    correlation weights."""
    if c.cols != source.height * source.width:
        raise ValueError(
            f"correlation cols {c.cols} do not match source grid "
            f"{source.height}x{source.width}"
        )
    weights = _softmax_rows(c.values, temperature)
    src_flat = source.data.reshape(source.channels, -1)  # (c, cols)
    out = weights @ src_flat.T  # (rows, c)
    qh, qw = c.query_shape
    return LatentGrid(out.T.reshape(source.channels, qh, qw))


def soft_argmax_flow(
    c: CorrelationMap, temperature: float, source_dims: tuple[int, int]
) -> FlowField:
    """Softmax-expected source coordinate per query position."""
    sh, sw = source_dims
    if (sh, sw) != c.source_shape:
        raise ValueError(f"source_dims {source_dims} do not match map {c.source_shape}")
    weights = _softmax_rows(c.values, temperature)
    ys, xs = np.meshgrid(np.arange(sh, dtype=np.float64), np.arange(sw, dtype=np.float64),
                         indexing="ij")
    ey = weights @ ys.ravel()
    ex = weights @ xs.ravel()
    qh, qw = c.query_shape
    return FlowField(np.stack([ey.reshape(qh, qw), ex.reshape(qh, qw)], axis=-1))


def cycle_confidence_mask(
    c_fwd: CorrelationMap,
    c_bwd: CorrelationMap,
    gamma: float,
    temperature: float,
    dims: tuple[int, int],
) -> ConfidenceMask:
    """Position u is confident when the forward-then-backward correspondence
    returns within squared distance gamma of u (strict inequality).

    The backward flow is read at the nearest grid position of the forward
    endpoint.
    """
    if gamma < 0.0:
        raise ValueError("gamma must be non-negative")
    if c_fwd.query_shape != dims:
        raise ValueError(f"dims {dims} do not match forward map query {c_fwd.query_shape}")
    if c_bwd.query_shape != c_fwd.source_shape or c_bwd.source_shape != c_fwd.query_shape:
        raise ValueError("backward map must swap the forward map's query/source roles")
    qh, qw = dims
    sh, sw = c_fwd.source_shape
    fwd = soft_argmax_flow(c_fwd, temperature, (sh, sw)).positions
    bwd = soft_argmax_flow(c_bwd, temperature, (qh, qw)).positions
    iy = np.clip(np.floor(fwd[..., 0] + 0.5).astype(np.int64), 0, sh - 1)
    ix = np.clip(np.floor(fwd[..., 1] + 0.5).astype(np.int64), 0, sw - 1)
    back = bwd[iy, ix]  # (qh, qw, 2)
    uy, ux = np.meshgrid(np.arange(qh, dtype=np.float64), np.arange(qw, dtype=np.float64),
                         indexing="ij")
    d2 = (uy - back[..., 0]) ** 2 + (ux - back[..., 1]) ** 2
    return ConfidenceMask(flags=d2 < gamma)


def iter_features(r_tilde: LatentGrid, d_x: LatentGrid, cfg: DescriptorConfig) -> FeatureGrid:
    """Descriptor for the interleaved iterations: current denoised prediction
    concatenated with the weighted condition descriptor."""
    if (r_tilde.height, r_tilde.width) != (d_x.height, d_x.width):
        raise ValueError(
            f"spatial mismatch: {r_tilde.height}x{r_tilde.width} vs {d_x.height}x{d_x.width}"
        )
    main = patch_descriptor(r_tilde, cfg)
    cond = patch_descriptor(d_x, cfg)
    return FeatureGrid(np.concatenate([main.data, cfg.condition_weight * cond.data], axis=0))
