"""Desk-scale proxies for structural and style consistency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .matching import ConfidenceMask, FlowField


@dataclass(frozen=True)
class Metrics:
    edge_f1: float
    color_hist_l1: float
    flow_epe_median: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.edge_f1 <= 1.0:
            raise ValueError("edge_f1 must lie in [0, 1]")
        if self.color_hist_l1 < 0.0:
            raise ValueError("color_hist_l1 must be non-negative")
        if self.flow_epe_median is not None and self.flow_epe_median < 0.0:
            raise ValueError("flow_epe_median must be non-negative")


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


def sobel_magnitude(img: np.ndarray) -> np.ndarray:
    gray = np.asarray(img, dtype=np.float64).mean(axis=2) / 255.0
    gx = ndimage.convolve(gray, _SOBEL_X, mode="nearest")
    gy = ndimage.convolve(gray, _SOBEL_X.T, mode="nearest")
    return np.hypot(gx, gy)


def otsu_threshold(values: np.ndarray, bins: int = 256) -> float:
    """Parameter-free threshold maximizing between-class variance."""
    v = values.ravel()
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        return lo
    hist, edges = np.histogram(v, bins=bins, range=(lo, hi))
    p = hist.astype(np.float64) / v.size
    centers = (edges[:-1] + edges[1:]) / 2.0
    w0 = np.cumsum(p)
    m = np.cumsum(p * centers)
    mt = m[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        var_between = (mt * w0 - m) ** 2 / (w0 * (1.0 - w0))
    var_between[~np.isfinite(var_between)] = -1.0
    return float(centers[int(np.argmax(var_between))])


def binary_edge_f1(pred: np.ndarray, cond: np.ndarray) -> float:
    """F1 between two binary edge maps with 1-pixel tolerance both ways."""
    pred = pred.astype(bool)
    cond = cond.astype(bool)
    if pred.shape != cond.shape:
        raise ValueError("edge map shapes differ")
    if not pred.any() or not cond.any():
        return 0.0
    near = np.ones((3, 3), dtype=bool)
    dil_cond = ndimage.binary_dilation(cond, structure=near)
    dil_pred = ndimage.binary_dilation(pred, structure=near)
    precision = float(np.sum(pred & dil_cond)) / float(np.sum(pred))
    recall = float(np.sum(cond & dil_pred)) / float(np.sum(cond))
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def metric_edge_f1(output: np.ndarray, condition: np.ndarray) -> float:
    """Structural consistency: Sobel edges of the output, Otsu-binarized,
    scored against the condition edge map."""
    if np.asarray(output).shape != np.asarray(condition).shape:
        raise ValueError("image dimensions differ")
    mag = sobel_magnitude(output)
    pred = mag > otsu_threshold(mag)
    cond = np.asarray(condition).max(axis=2) > 127
    return binary_edge_f1(pred, cond)


def metric_color_hist(output: np.ndarray, exemplar: np.ndarray) -> float:
    """L1 distance between 8-bins-per-channel color histograms, the
    concatenation normalized to total mass 1, so the range is [0, 2]."""
    out = np.asarray(output)
    ex = np.asarray(exemplar)
    hists = []
    for img in (out, ex):
        h = np.concatenate(
            [np.histogram(img[..., c], bins=8, range=(0, 256))[0] for c in range(3)]
        ).astype(np.float64)
        hists.append(h / h.sum())
    return float(np.sum(np.abs(hists[0] - hists[1])))


def flow_epe_median(flow: FlowField, gt_flow: FlowField, fg: ConfidenceMask) -> float:
    """Median endpoint error over foreground positions, in latent pixels."""
    if flow.positions.shape != gt_flow.positions.shape:
        raise ValueError("flow field shapes differ")
    if not fg.flags.any():
        return 0.0
    diff = flow.positions - gt_flow.positions
    epe = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(np.median(epe[fg.flags]))
