"""Training objectives as evaluatable scalar functions, plus a
finite-difference gradient checker. No training loop lives here.

Reductions over elements are means, so values are comparable across grid
sizes; relative weighting is the caller's job.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grids import FeatureGrid, LatentGrid

# default relative weights: perceptual, source, style, cycle, domain, diffusion
LOSS_WEIGHTS = {
    "perc": 0.002,
    "src": 1.0,
    "style": 1.0,
    "cycle": 1.0,
    "dom": 10.0,
    "diff": 1.0,
}


@dataclass(frozen=True)
class ContextualConfig:
    bandwidth: float = 0.5
    epsilon: float = 1e-5

    def __post_init__(self):
        if self.bandwidth <= 0.0:
            raise ValueError("bandwidth must be positive")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")


class ToyPyramidExtractor:
    """Deterministic 3-level feature pyramid: per level, box-blurred
    intensity plus gradient magnitude, 2x-downsampled between levels."""

    def __init__(self, num_levels: int = 3):
        if num_levels < 1:
            raise ValueError("need at least one level")
        self.num_levels = num_levels

    def levels(self, image: np.ndarray) -> list[FeatureGrid]:
        arr = np.asarray(image, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) image, got shape {arr.shape}")
        gray = arr.mean(axis=2) / 255.0
        out = []
        cur = _box_blur3(gray)
        for _ in range(self.num_levels):
            gy, gx = np.gradient(cur)
            out.append(FeatureGrid(np.stack([cur, np.hypot(gy, gx)], axis=0)))
            if min(cur.shape) >= 2:
                h2, w2 = (cur.shape[0] // 2) * 2, (cur.shape[1] // 2) * 2
                cur = cur[:h2, :w2].reshape(h2 // 2, 2, w2 // 2, 2).mean(axis=(1, 3))
        return out


def _box_blur3(a: np.ndarray) -> np.ndarray:
    padded = np.pad(a, 1, mode="edge")
    out = np.zeros_like(a)
    for dy in range(3):
        for dx in range(3):
            out += padded[dy : dy + a.shape[0], dx : dx + a.shape[1]]
    return out / 9.0


def loss_dom(s_x_gt: FeatureGrid, s_x: FeatureGrid) -> float:
    """Mean absolute difference between two same-domain feature grids."""
    if s_x_gt.data.shape != s_x.data.shape:
        raise ValueError("feature grid shapes differ")
    return float(np.mean(np.abs(s_x_gt.data - s_x.data)))


def loss_cycle(cyclic_warps: Sequence[LatentGrid], d_y: LatentGrid) -> float:
    """Sum over steps of the mean absolute gap between the cyclic-warped
    exemplar and the exemplar itself."""
    total = 0.0
    for warp in cyclic_warps:
        if warp.shape != d_y.shape:
            raise ValueError("cyclic warp shape differs from exemplar")
        total += float(np.mean(np.abs(warp.data - d_y.data)))
    return total


def loss_src(i_warp_self: np.ndarray, i_x_gt: np.ndarray, phi: ToyPyramidExtractor) -> float:
    """Feature-space L1 between the self-warped image and ground truth."""
    if np.asarray(i_warp_self).shape != np.asarray(i_x_gt).shape:
        raise ValueError("image dimensions differ")
    total = 0.0
    for fa, fb in zip(phi.levels(i_warp_self), phi.levels(i_x_gt)):
        total += float(np.mean(np.abs(fa.data - fb.data)))
    return total


def loss_perc(i_out: np.ndarray, i_x_gt: np.ndarray, phi: ToyPyramidExtractor) -> float:
    """Same feature-space L1, applied to (output, ground truth)."""
    return loss_src(i_out, i_x_gt, phi)


def contextual_level_score(
    feats_out: np.ndarray, feats_ref: np.ndarray, cx: ContextualConfig
) -> float:
    """Contextual similarity between two feature sets of shape (n, dim):
    normalized-exponential affinities over cosine distances, scored as
    mean over reference features of the best matching output feature."""
    if feats_out.size == 0 or feats_ref.size == 0:
        raise ValueError("empty feature set")
    a = feats_out / np.maximum(np.linalg.norm(feats_out, axis=1, keepdims=True), 1e-12)
    b = feats_ref / np.maximum(np.linalg.norm(feats_ref, axis=1, keepdims=True), 1e-12)
    d = 1.0 - a @ b.T  # (n_out, n_ref) cosine distances
    d_rel = d / (np.min(d, axis=1, keepdims=True) + cx.epsilon)
    w = np.exp((1.0 - d_rel) / cx.bandwidth)
    cx_ij = w / np.sum(w, axis=1, keepdims=True)
    return float(np.mean(np.max(cx_ij, axis=0)))


def loss_style_contextual(
    i_out: np.ndarray,
    i_y: np.ndarray,
    phi: ToyPyramidExtractor,
    cx: ContextualConfig,
) -> float:
    """Negative log of the mean per-level contextual similarity."""
    scores = []
    for fo, fy in zip(phi.levels(i_out), phi.levels(i_y)):
        scores.append(contextual_level_score(fo.vectors(), fy.vectors(), cx))
    return float(-math.log(float(np.mean(scores))))


def loss_diff(
    eps_preds: Sequence[LatentGrid],
    eps_targets: Sequence[LatentGrid],
    squared: bool = True,
) -> float:
    """Sum over steps of the noise-prediction error: mean squared error by
    default, root-mean-square with squared=False."""
    if len(eps_preds) != len(eps_targets):
        raise ValueError("prediction/target count mismatch")
    total = 0.0
    for pred, target in zip(eps_preds, eps_targets):
        if pred.shape != target.shape:
            raise ValueError("prediction/target shape mismatch")
        mse = float(np.mean((pred.data - target.data) ** 2))
        total += mse if squared else math.sqrt(mse)
    return total


def fd_grad_check(
    f: Callable[[LatentGrid], float],
    grad: Callable[[LatentGrid], np.ndarray],
    x: LatentGrid,
    step: float,
) -> float:
    """Central differences per coordinate against the analytic gradient;
    returns the max relative error with denominator max(|g|, 1e-8)."""
    if step <= 0.0:
        raise ValueError("step must be positive")
    if x.data.size > 64:
        raise ValueError("gradient check limited to grids of <= 64 elements")
    g = np.asarray(grad(x), dtype=np.float64)
    if g.shape != x.data.shape:
        raise ValueError("analytic gradient shape mismatch")
    worst = 0.0
    flat = x.data.ravel()
    for i in range(flat.size):
        plus = flat.copy()
        minus = flat.copy()
        plus[i] += step
        minus[i] -= step
        fd = (f(LatentGrid(plus.reshape(x.shape))) - f(LatentGrid(minus.reshape(x.shape)))) / (
            2.0 * step
        )
        gi = g.ravel()[i]
        worst = max(worst, abs(fd - gi) / max(abs(gi), 1e-8))
    return worst


def weighted_total(values: dict[str, float], weights: dict[str, float] | None = None) -> float:
    w = LOSS_WEIGHTS if weights is None else weights
    return float(sum(w[k] * v for k, v in values.items()))
