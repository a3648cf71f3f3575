"""Reverse-process steps and analytic epsilon oracles.

The oracles are exact optimal denoisers for known Gaussian / mixture priors
under the closed-form forward corruption, so DDPM/DDIM steps can be verified
without any trained network.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .grids import LatentGrid, rng_gaussian
from .rng import Rng
from .schedule import NoiseSchedule, alpha_bar_at


class EpsilonModel(ABC):
    """Noise predictor: maps (z, t) to an estimated corruption noise grid."""

    @abstractmethod
    def eval(self, z: LatentGrid, t: int) -> LatentGrid:
        ...


class ZeroModel(EpsilonModel):
    def eval(self, z: LatentGrid, t: int) -> LatentGrid:
        return LatentGrid(np.zeros_like(z.data))


class ReplayModel(EpsilonModel):
    """Returns a recorded noise grid regardless of input; makes the
    forward-then-invert round trip exact."""

    def __init__(self, eps: LatentGrid):
        self.eps = eps

    def eval(self, z: LatentGrid, t: int) -> LatentGrid:
        if z.shape != self.eps.shape:
            raise ValueError("replay noise shape does not match input")
        return self.eps


@dataclass(frozen=True)
class GaussianPrior:
    """Isotropic Gaussian or mixture prior over clean latents.

    weights sum to 1; means are full grids so spatially varying priors are
    allowed; stddevs are per-component isotropic scalars.
    """

    weights: np.ndarray
    means: tuple[LatentGrid, ...]
    stddevs: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        s = np.ascontiguousarray(self.stddevs, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a non-empty 1-d array")
        if np.any(w <= 0.0):
            raise ValueError("weights must be positive")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        if s.shape != w.shape or np.any(s <= 0.0):
            raise ValueError("stddevs must be positive, one per component")
        if len(self.means) != w.size:
            raise ValueError("need one mean grid per component")
        shape = self.means[0].shape
        for m in self.means:
            if m.shape != shape:
                raise ValueError("all component means must share one shape")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "stddevs", s)
        object.__setattr__(self, "means", tuple(self.means))

    @classmethod
    def single(cls, mean: LatentGrid, stddev: float) -> "GaussianPrior":
        return cls(weights=np.array([1.0]), means=(mean,), stddevs=np.array([float(stddev)]))

    @property
    def n_components(self) -> int:
        return self.weights.size


def _x0_from_eps(z: np.ndarray, eps: np.ndarray, a_bar: float) -> np.ndarray:
    return (z - math.sqrt(1.0 - a_bar) * eps) / math.sqrt(a_bar)


def predict_x0(z: LatentGrid, t: int, model: EpsilonModel, sched: NoiseSchedule) -> LatentGrid:
    """Predicted clean latent from a noisy one and the model's noise estimate."""
    if not 1 <= t <= sched.t_train:
        raise ValueError(f"timestep {t} out of range [1, {sched.t_train}]")
    a = alpha_bar_at(sched, t)
    eps = model.eval(z, t)
    return LatentGrid(_x0_from_eps(z.data, eps.data, a))


def ddim_step(
    z: LatentGrid, t_from: int, t_to: int, model: EpsilonModel, sched: NoiseSchedule
) -> LatentGrid:
    """One deterministic reverse step from t_from down to t_to (t_to=0 lands
    on the predicted clean latent)."""
    if not 0 <= t_to < t_from <= sched.t_train:
        raise ValueError(f"need 0 <= t_to < t_from <= {sched.t_train}, got {t_to}, {t_from}")
    a_from = alpha_bar_at(sched, t_from)
    a_to = alpha_bar_at(sched, t_to)
    eps = model.eval(z, t_from)
    x0 = _x0_from_eps(z.data, eps.data, a_from)
    return LatentGrid(math.sqrt(a_to) * x0 + math.sqrt(1.0 - a_to) * eps.data)


def ddpm_step(
    x: LatentGrid, t: int, model: EpsilonModel, sched: NoiseSchedule, rng: Rng
) -> LatentGrid:
    """One ancestral reverse step; sigma_t = sqrt(beta_t), sigma_1 = 0."""
    if not 1 <= t <= sched.t_train:
        raise ValueError(f"timestep {t} out of range [1, {sched.t_train}]")
    beta = float(sched.betas[t - 1])
    a = alpha_bar_at(sched, t)
    eps_hat = model.eval(x, t)
    mean = (x.data - (beta / math.sqrt(1.0 - a)) * eps_hat.data) / math.sqrt(1.0 - beta)
    if t == 1:
        return LatentGrid(mean)
    noise = rng_gaussian(rng, x.shape)
    return LatentGrid(mean + math.sqrt(beta) * noise.data)


def oracle_eps(z: LatentGrid, t: int, prior: GaussianPrior, sched: NoiseSchedule) -> LatentGrid:
    """Exact posterior-mean noise predictor for a known prior.

    For a single Gaussian the posterior mean of x0 is linear in z; for
    mixtures, per-position responsibilities (channels treated jointly) weight
    the per-component posterior means, with log-sum-exp stabilization.
    """
    if not 1 <= t <= sched.t_train:
        raise ValueError(f"timestep {t} out of range [1, {sched.t_train}]")
    a = alpha_bar_at(sched, t)
    sa = math.sqrt(a)
    one_minus = 1.0 - a
    c, h, w = z.shape
    k = prior.n_components

    # per-component posterior mean of x0 given z
    x0_k = np.empty((k, c, h, w))
    log_resp = np.empty((k, h, w))
    for i in range(k):
        mu = prior.means[i].data
        var_k = a * prior.stddevs[i] ** 2 + one_minus
        gain = sa * prior.stddevs[i] ** 2 / var_k
        resid = z.data - sa * mu
        x0_k[i] = mu + gain * resid
        sq = np.sum(resid * resid, axis=0)
        log_resp[i] = (
            math.log(float(prior.weights[i]))
            - 0.5 * (sq / var_k + c * math.log(2.0 * math.pi * var_k))
        )
    if k == 1:
        x0_hat = x0_k[0]
    else:
        log_resp -= np.max(log_resp, axis=0, keepdims=True)
        resp = np.exp(log_resp)
        resp /= np.sum(resp, axis=0, keepdims=True)
        x0_hat = np.sum(resp[:, None, :, :] * x0_k, axis=0)
    return LatentGrid((z.data - sa * x0_hat) / math.sqrt(one_minus))


def mixture_responsibilities(
    z: LatentGrid, t: int, prior: GaussianPrior, sched: NoiseSchedule
) -> np.ndarray:
    """(k, h, w) posterior component probabilities; rows sum to 1 per position."""
    a = alpha_bar_at(sched, t)
    sa = math.sqrt(a)
    c = z.channels
    k = prior.n_components
    log_resp = np.empty((k,) + z.shape[1:])
    for i in range(k):
        var_k = a * prior.stddevs[i] ** 2 + (1.0 - a)
        resid = z.data - sa * prior.means[i].data
        sq = np.sum(resid * resid, axis=0)
        log_resp[i] = (
            math.log(float(prior.weights[i]))
            - 0.5 * (sq / var_k + c * math.log(2.0 * math.pi * var_k))
        )
    log_resp -= np.max(log_resp, axis=0, keepdims=True)
    resp = np.exp(log_resp)
    resp /= np.sum(resp, axis=0, keepdims=True)
    return resp


def standard_normal_ddim_factor(sched: NoiseSchedule, taus: np.ndarray) -> float:
    """Closed-form scale a full deterministic reverse pass applies to its
    start grid when the prior is standard normal: one factor of
    sqrt(abar_to * abar_from) + sqrt((1 - abar_to)(1 - abar_from)) per step,
    descending the subsequence and finishing at t = 0."""
    steps = list(map(int, taus))[::-1] + [0]
    factor = 1.0
    for t_from, t_to in zip(steps[:-1], steps[1:]):
        a_from = alpha_bar_at(sched, t_from)
        a_to = alpha_bar_at(sched, t_to)
        factor *= math.sqrt(a_to * a_from) + math.sqrt((1.0 - a_to) * (1.0 - a_from))
    return factor


@dataclass
class PriorModel(EpsilonModel):
    """EpsilonModel backed by the analytic oracle for a fixed prior."""

    prior: GaussianPrior
    sched: NoiseSchedule

    def eval(self, z: LatentGrid, t: int) -> LatentGrid:
        return oracle_eps(z, t, self.prior, self.sched)
