"""Synthetic paired imagery with ground-truth correspondence.

Each pair is a binary edge-map condition, a colored ground-truth rendering of
the same shapes, and an exemplar with the shapes translated and recolored.
Shape centers snap to the latent grid so the true flow is exact in latent
units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .matching import ConfidenceMask, FlowField
from .rng import Rng


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ShapeSpec:
    kind: str  # "rect" or "ellipse"
    half_h: int
    half_w: int
    cond_center: tuple[int, int]  # (y, x) pixels
    ex_center: tuple[int, int]
    cond_color: tuple[int, int, int]
    ex_color: tuple[int, int, int]


@dataclass(frozen=True)
class SyntheticPair:
    condition: np.ndarray  # (h, w, 3) uint8, values in {0, 255}
    ground_truth: np.ndarray
    exemplar: np.ndarray
    gt_flow: FlowField  # condition latent position -> exemplar latent position
    fg_mask: ConfidenceMask  # where gt_flow is defined
    shapes: tuple[ShapeSpec, ...]
    seed: int


_BACKGROUND = 128


def _shape_mask(kind: str, center: tuple[int, int], half_h: int, half_w: int,
                h: int, w: int) -> np.ndarray:
    cy, cx = center
    ys, xs = np.mgrid[0:h, 0:w]
    if kind == "rect":
        return (np.abs(ys - cy) <= half_h) & (np.abs(xs - cx) <= half_w)
    return ((ys - cy) / half_h) ** 2 + ((xs - cx) / half_w) ** 2 <= 1.0


def _place_centers(
    rng: Rng, specs: list[tuple[int, int]], h: int, w: int, factor: int, budget: list[int]
) -> list[tuple[int, int]]:
    """Non-overlapping centers (bounding boxes with 2px margin), snapped to
    the latent grid. budget is a shared mutable attempt counter."""
    centers: list[tuple[int, int]] = []
    for half_h, half_w in specs:
        placed = False
        while not placed:
            budget[0] -= 1
            if budget[0] < 0:
                raise GenerationError("could not place shapes without overlap after 1000 attempts")
            u = rng.uniforms(2)
            cy_min, cy_max = half_h + 2, h - half_h - 3
            cx_min, cx_max = half_w + 2, w - half_w - 3
            if cy_max < cy_min or cx_max < cx_min:
                raise GenerationError("shapes too large for the requested image size")
            cy = int(cy_min + u[0] * (cy_max - cy_min))
            cx = int(cx_min + u[1] * (cx_max - cx_min))
            cy = (cy // factor) * factor
            cx = (cx // factor) * factor
            ok = True
            for (oy, ox), (ohh, ohw) in zip(centers, specs):
                if abs(cy - oy) <= half_h + ohh + 4 and abs(cx - ox) <= half_w + ohw + 4:
                    ok = False
                    break
            if ok:
                centers.append((cy, cx))
                placed = True
    return centers


def _random_color(rng: Rng) -> tuple[int, int, int]:
    # bright against the gray background so edge-map and color contrasts
    # share a sign in every channel
    u = rng.uniforms(3)
    return tuple(int(170 + v * 85) for v in u)


def gen_synthetic_pair(
    seed: int, size: tuple[int, int], num_shapes: int, factor: int = 4
) -> SyntheticPair:
    h, w = size
    if h % factor or w % factor:
        raise ValueError(f"size {size} not divisible by latent factor {factor}")
    if not 1 <= num_shapes <= 8:
        raise ValueError("num_shapes must lie in [1, 8]")
    rng = Rng(seed)
    budget = [1000]

    # thin elongated shapes with distinct orientations: thin enough that
    # every latent cell of a shape touches its outline (so the edge-map and
    # filled renderings stay correlated after pooling), elongated so shapes
    # are not confused with one another
    scale = max(1.0, h / 64.0)
    base_geoms = [
        ("rect", 3, 10), ("rect", 10, 3), ("ellipse", 3, 7), ("ellipse", 7, 3),
        ("rect", 3, 6), ("rect", 6, 3), ("ellipse", 3, 10), ("ellipse", 10, 3),
    ]
    specs = []
    kinds = []
    for k in range(num_shapes):
        kind, hh, ww = base_geoms[k]
        kinds.append(kind)
        specs.append((int(hh * scale), int(ww * scale)))
    cond_centers = _place_centers(rng, specs, h, w, factor, budget)
    ex_centers = _place_centers(rng, specs, h, w, factor, budget)

    shapes = []
    condition = np.zeros((h, w, 3), dtype=np.uint8)
    ground_truth = np.full((h, w, 3), _BACKGROUND, dtype=np.uint8)
    exemplar = np.full((h, w, 3), _BACKGROUND, dtype=np.uint8)
    lh, lw = h // factor, w // factor
    ys, xs = np.mgrid[0:lh, 0:lw].astype(np.float64)
    flow = np.stack([ys, xs], axis=-1)  # identity outside foreground
    fg = np.zeros((lh, lw), dtype=bool)

    for k in range(num_shapes):
        cond_color = _random_color(rng)
        ex_color = _random_color(rng)
        spec = ShapeSpec(
            kind=kinds[k],
            half_h=specs[k][0],
            half_w=specs[k][1],
            cond_center=cond_centers[k],
            ex_center=ex_centers[k],
            cond_color=cond_color,
            ex_color=ex_color,
        )
        shapes.append(spec)
        mask_c = _shape_mask(spec.kind, spec.cond_center, spec.half_h, spec.half_w, h, w)
        mask_e = _shape_mask(spec.kind, spec.ex_center, spec.half_h, spec.half_w, h, w)
        outline = mask_c & ~ndimage.binary_erosion(mask_c)
        condition[outline] = 255
        ground_truth[mask_c] = cond_color
        exemplar[mask_e] = ex_color

        block = mask_c.reshape(lh, factor, lw, factor).mean(axis=(1, 3))
        latent_fg = block > 0.5
        dy = (spec.ex_center[0] - spec.cond_center[0]) / factor
        dx = (spec.ex_center[1] - spec.cond_center[1]) / factor
        flow[latent_fg, 0] = ys[latent_fg] + dy
        flow[latent_fg, 1] = xs[latent_fg] + dx
        fg |= latent_fg

    return SyntheticPair(
        condition=condition,
        ground_truth=ground_truth,
        exemplar=exemplar,
        gt_flow=FlowField(flow),
        fg_mask=ConfidenceMask(fg),
        shapes=tuple(shapes),
        seed=seed,
    )


def gen_self_translation_pair(
    seed: int, size: tuple[int, int], num_shapes: int, factor: int = 4
) -> SyntheticPair:
    """Pair whose condition is derived from the exemplar itself: outlines are
    drawn at the exemplar shape positions, so the true flow is the identity
    and the exemplar is its own ground truth."""
    base = gen_synthetic_pair(seed, size, num_shapes, factor)
    h, w = size
    condition = np.zeros_like(base.condition)
    for s in base.shapes:
        m = _shape_mask(s.kind, s.ex_center, s.half_h, s.half_w, h, w)
        outline = m & ~ndimage.binary_erosion(m)
        condition[outline] = 255
    lh, lw = h // factor, w // factor
    ys, xs = np.mgrid[0:lh, 0:lw].astype(np.float64)
    fg = np.zeros((lh, lw), dtype=bool)
    for s in base.shapes:
        m = _shape_mask(s.kind, s.ex_center, s.half_h, s.half_w, h, w)
        block = m.reshape(lh, factor, lw, factor).mean(axis=(1, 3))
        fg |= block > 0.5
    return SyntheticPair(
        condition=condition,
        ground_truth=base.exemplar,
        exemplar=base.exemplar,
        gt_flow=FlowField(np.stack([ys, xs], axis=-1)),
        fg_mask=ConfidenceMask(fg),
        shapes=base.shapes,
        seed=seed,
    )
