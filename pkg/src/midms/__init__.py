"""Matching-interleaved diffusion sampling for exemplar-based translation,
at desk scale: deterministic grids and RNG, analytic denoiser oracles,
dense-matching primitives, the interleaved sampler, training losses, and a
synthetic-data harness."""

from .grids import FeatureGrid, LatentGrid, Position, l2_normalize_vectors, rng_gaussian
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
from .denoise import (
    EpsilonModel,
    GaussianPrior,
    PriorModel,
    ReplayModel,
    ZeroModel,
    ddim_step,
    ddpm_step,
    oracle_eps,
    predict_x0,
    standard_normal_ddim_factor,
)
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
from .sampler import (
    MIDMConfig,
    MIDMTrace,
    initial_warp,
    midm_iteration,
    midm_sample,
    refine_with_renoise,
)
from .losses import (
    ContextualConfig,
    ToyPyramidExtractor,
    fd_grad_check,
    loss_cycle,
    loss_diff,
    loss_dom,
    loss_perc,
    loss_src,
    loss_style_contextual,
)
from .codec import ParseError, ToyCodec, read_pgm, read_ppm, toy_decode, toy_encode, write_pgm, write_ppm
from .metrics import Metrics, flow_epe_median, metric_color_hist, metric_edge_f1
from .synthetic import GenerationError, SyntheticPair, gen_synthetic_pair
from .pipeline import fit_prior, load_config, run_translation, sweep, translate_pair

__all__ = [name for name in dir() if not name.startswith("_")]
