"""The interleaved matching-and-denoising sampler.

One iteration: predict the clean latent, re-match it against the exemplar,
softly rewarp where the match is cycle-consistent, and return the blend to
the denoising trajectory. gamma -> 0 makes every iteration a plain
deterministic reverse step, bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .denoise import EpsilonModel, _x0_from_eps, predict_x0
from .grids import FeatureGrid, LatentGrid, rng_gaussian
from .matching import (
    ConfidenceMask,
    CorrelationMap,
    DescriptorConfig,
    FlowField,
    correlation_map,
    cycle_confidence_mask,
    iter_features,
    patch_descriptor,
    soft_argmax_flow,
    soft_warp,
)
from .rng import Rng
from .schedule import (
    NoiseSchedule,
    TimestepSubsequence,
    alpha_bar_at,
    forward_diffuse,
    linear_beta_schedule,
    make_subsequence,
    start_index_from_fraction,
)


@dataclass(frozen=True)
class MIDMConfig:
    t_train: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    s_steps: int = 16
    noise_fraction: float = 0.25
    temperature: float = 0.01
    gamma: float = 0.3
    skip_last_warp: bool = True
    renoise_refine_enabled: bool = True
    renoise_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.noise_fraction <= 1.0:
            raise ValueError("noise_fraction must lie in (0, 1]")
        if self.renoise_refine_enabled and not 0.0 <= self.renoise_fraction < self.noise_fraction:
            raise ValueError("renoise_fraction must lie in [0, noise_fraction)")
        if self.gamma < 0.0:
            raise ValueError("gamma must be non-negative")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if self.s_steps < 2:
            raise ValueError("s_steps must be >= 2")

    def schedule(self) -> NoiseSchedule:
        return linear_beta_schedule(self.t_train, self.beta_start, self.beta_end)

    def subsequence(self) -> TimestepSubsequence:
        return make_subsequence(self.t_train, self.s_steps)

    def start_index(self) -> int:
        return start_index_from_fraction(self.noise_fraction, self.s_steps)


@dataclass
class IterationRecord:
    n: int
    tau_n: int
    r_n: LatentGrid
    r_tilde: LatentGrid
    mask: ConfidenceMask
    mask_coverage: float
    flow: FlowField


@dataclass
class MIDMTrace:
    initial_flow: FlowField | None = None
    records: list[IterationRecord] = field(default_factory=list)
    final_latent: LatentGrid | None = None

    @property
    def iterations(self) -> int:
        return len(self.records)


@dataclass
class IterationResult:
    r_prev: LatentGrid
    mask: ConfidenceMask
    r_tilde: LatentGrid
    flow: FlowField
    corr: CorrelationMap


def initial_warp(
    d_x: LatentGrid, d_y: LatentGrid, cfg: MIDMConfig, desc: DescriptorConfig
) -> LatentGrid:
    """Warp the exemplar toward the condition layout before any denoising."""
    if (d_x.height, d_x.width) != (d_y.height, d_y.width):
        raise ValueError("condition and exemplar latents must share spatial dims")
    s_x = patch_descriptor(d_x, desc)
    s_y = patch_descriptor(d_y, desc)
    c = correlation_map(s_x, s_y)
    return soft_warp(c, d_y, cfg.temperature)


def midm_iteration(
    r_n: LatentGrid,
    n: int,
    d_x: LatentGrid,
    d_y: LatentGrid,
    s_y: FeatureGrid,
    model: EpsilonModel,
    cfg: MIDMConfig,
    sched: NoiseSchedule,
    subseq: TimestepSubsequence,
    desc: DescriptorConfig,
    force_empty_mask: bool = False,
    force_full_mask: bool = False,
) -> IterationResult:
    """One interleaved step: denoise-predict, re-match, masked rewarp, and
    return to the trajectory at tau_{n-1}."""
    if force_empty_mask and force_full_mask:
        raise ValueError("cannot force the mask both empty and full")
    n_max = cfg.start_index()
    if not 2 <= n <= n_max:
        raise ValueError(f"iteration index {n} out of range [2, {n_max}]")
    tau_n = subseq.tau(n)
    tau_prev = subseq.tau(n - 1)
    a_from = alpha_bar_at(sched, tau_n)
    a_to = alpha_bar_at(sched, tau_prev)

    eps_hat = model.eval(r_n, tau_n)
    r_tilde = LatentGrid(_x0_from_eps(r_n.data, eps_hat.data, a_from))

    s_iter = iter_features(r_tilde, d_x, desc)
    c_iter = correlation_map(s_iter, s_y)
    rewarp = soft_warp(c_iter, d_y, cfg.temperature)
    flow = soft_argmax_flow(c_iter, cfg.temperature, c_iter.source_shape)
    if force_empty_mask:
        mask = ConfidenceMask(np.zeros(c_iter.query_shape, dtype=bool))
    elif force_full_mask:
        mask = ConfidenceMask(np.ones(c_iter.query_shape, dtype=bool))
    else:
        mask = cycle_confidence_mask(
            c_iter, c_iter.transposed(), cfg.gamma, cfg.temperature, c_iter.query_shape
        )
    mask3 = mask.flags[None, :, :]
    blended = np.where(mask3, rewarp.data, r_tilde.data)
    r_prev = LatentGrid(math.sqrt(a_to) * blended + math.sqrt(1.0 - a_to) * eps_hat.data)
    return IterationResult(r_prev=r_prev, mask=mask, r_tilde=r_tilde, flow=flow, corr=c_iter)


def refine_with_renoise(
    r0: LatentGrid,
    model: EpsilonModel,
    fraction: float,
    cfg: MIDMConfig,
    sched: NoiseSchedule,
    subseq: TimestepSubsequence,
    rng: Rng,
) -> LatentGrid:
    """Partially re-noise the finished latent and run a plain deterministic
    reverse pass back down, without any matching."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("fraction must lie in [0, 1)")
    if fraction == 0.0:
        return r0
    n_r = start_index_from_fraction(fraction, cfg.s_steps)
    eps = rng_gaussian(rng, r0.shape)
    z = forward_diffuse(r0, subseq.tau(n_r), eps, sched)
    for n in range(n_r, 1, -1):
        tau_n = subseq.tau(n)
        tau_prev = subseq.tau(n - 1)
        eps_hat = model.eval(z, tau_n)
        a_from = alpha_bar_at(sched, tau_n)
        a_to = alpha_bar_at(sched, tau_prev)
        x0 = _x0_from_eps(z.data, eps_hat.data, a_from)
        z = LatentGrid(math.sqrt(a_to) * x0 + math.sqrt(1.0 - a_to) * eps_hat.data)
    return predict_x0(z, subseq.tau(1), model, sched)


def midm_sample(
    i_x: np.ndarray,
    i_y: np.ndarray,
    model: EpsilonModel,
    cfg: MIDMConfig,
    codec,
    desc: DescriptorConfig,
) -> tuple[np.ndarray, MIDMTrace]:
    """Full interleaved sampling run: encode, warm-start from the noised
    initial warp, iterate matching/denoising, finish with the clean
    prediction and (optionally) the re-noise refinement, decode."""
    from .codec import toy_decode, toy_encode

    if i_x.shape != i_y.shape:
        raise ValueError(f"image shape mismatch: {i_x.shape} vs {i_y.shape}")
    sched = cfg.schedule()
    subseq = cfg.subsequence()
    n_start = cfg.start_index()
    if n_start < 2:
        raise ValueError(
            f"noise_fraction {cfg.noise_fraction} with s_steps {cfg.s_steps} gives start "
            f"index {n_start}; at least 2 is needed to interleave"
        )
    rng = Rng(cfg.seed)
    d_x = toy_encode(i_x, codec)
    d_y = toy_encode(i_y, codec)

    s_x = patch_descriptor(d_x, desc)
    s_y = patch_descriptor(d_y, desc)
    c0 = correlation_map(s_x, s_y)
    warped = soft_warp(c0, d_y, cfg.temperature)
    # exemplar-side descriptor for the iterations, built with the same
    # extractor as the query side so the two live in one descriptor space
    s_y_iter = iter_features(d_y, d_y, desc)

    trace = MIDMTrace(initial_flow=soft_argmax_flow(c0, cfg.temperature, c0.source_shape))

    a_start = alpha_bar_at(sched, subseq.tau(n_start))
    eps0 = rng_gaussian(rng, warped.shape)
    r = LatentGrid(math.sqrt(a_start) * warped.data + math.sqrt(1.0 - a_start) * eps0.data)

    for n in range(n_start, 1, -1):
        res = midm_iteration(
            r, n, d_x, d_y, s_y_iter, model, cfg, sched, subseq, desc,
            force_empty_mask=cfg.skip_last_warp and n == 2,
        )
        trace.records.append(
            IterationRecord(
                n=n,
                tau_n=subseq.tau(n),
                r_n=r,
                r_tilde=res.r_tilde,
                mask=res.mask,
                mask_coverage=res.mask.coverage,
                flow=res.flow,
            )
        )
        r = res.r_prev

    r0 = predict_x0(r, subseq.tau(1), model, sched)
    if cfg.renoise_refine_enabled and cfg.renoise_fraction > 0.0:
        r0 = refine_with_renoise(r0, model, cfg.renoise_fraction, cfg, sched, subseq, rng)
    trace.final_latent = r0
    return toy_decode(r0, codec), trace
