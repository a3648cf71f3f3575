"""Command-line entry points for the toy exemplar-based translation pipeline."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .codec import ToyCodec, read_ppm, toy_encode, write_pgm, write_ppm
from .denoise import GaussianPrior, PriorModel, ddim_step, predict_x0, standard_normal_ddim_factor
from .grids import LatentGrid, rng_gaussian
from .losses import (
    ContextualConfig,
    ToyPyramidExtractor,
    loss_cycle,
    loss_diff,
    loss_dom,
    loss_perc,
    loss_src,
    loss_style_contextual,
    weighted_total,
)
from .matching import correlation_map, patch_descriptor, soft_warp
from .pipeline import load_config, run_translation, sweep, translate_pair
from .rng import Rng
from .sampler import MIDMConfig
from .schedule import forward_diffuse, linear_beta_schedule, make_subsequence
from .synthetic import gen_synthetic_pair


def _apply_seed_env(cfg: MIDMConfig) -> MIDMConfig:
    env = os.environ.get("MIDM_SEED")
    if env is None:
        return cfg
    return MIDMConfig(**{**cfg.__dict__, "seed": int(env)})


def _cmd_sample(args) -> int:
    cfg, desc = load_config(args.config)
    cfg = _apply_seed_env(cfg)
    condition = read_ppm(args.condition)
    exemplar = read_ppm(args.exemplar)
    codec = ToyCodec()
    output, trace = translate_pair(condition, exemplar, cfg, desc, codec, mixture_components=5)
    write_ppm(args.out, output)
    if args.trace:
        from .pipeline import write_trace

        write_trace(trace, codec, args.trace)
    return 0


def _cmd_gen(args) -> int:
    pair = gen_synthetic_pair(args.seed, (args.size, args.size), args.shapes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ppm(out / "condition.ppm", pair.condition)
    write_ppm(out / "ground_truth.ppm", pair.ground_truth)
    write_ppm(out / "exemplar.ppm", pair.exemplar)
    return 0


def _cmd_sweep(args) -> int:
    fractions = [float(v) for v in args.noise.split(",")]
    sweep(fractions, args.runs, args.report, size=args.size)
    return 0


def _cmd_oracle_check(args) -> int:
    sched = linear_beta_schedule(1000, 1e-4, 0.02)
    subseq = make_subsequence(1000, 16)
    prior = GaussianPrior.single(LatentGrid.zeros(3, 8, 8), 1.0)
    model = PriorModel(prior=prior, sched=sched)
    z = rng_gaussian(Rng(0), (3, 8, 8))
    cur = z
    taus = list(map(int, subseq.taus))
    for t_from, t_to in zip(taus[::-1], taus[-2::-1] + [0]):
        cur = ddim_step(cur, t_from, t_to, model, sched)
    expected = standard_normal_ddim_factor(sched, subseq.taus) * z.data
    rel = float(np.max(np.abs(cur.data - expected)) / np.max(np.abs(expected)))
    print(f"max relative error: {rel:.3e}")
    return 0 if rel < 1e-9 else 1


def _cmd_schedule(args) -> int:
    sched = linear_beta_schedule(args.t_train, args.beta_start, args.beta_end)
    print("t,beta,alpha_bar")
    for t in range(1, sched.t_train + 1):
        print(f"{t},{sched.betas[t - 1]:.10g},{sched.alpha_bars[t - 1]:.10g}")
    return 0


def _cmd_mask_viz(args) -> int:
    cfg, desc = load_config(args.config)
    cfg = _apply_seed_env(cfg)
    condition = read_ppm(args.condition)
    exemplar = read_ppm(args.exemplar)
    _, trace = translate_pair(condition, exemplar, cfg, desc, mixture_components=5)
    write_pgm(args.out, trace.records[-1].mask)
    return 0


def _cmd_losses_eval(args) -> int:
    img_a = read_ppm(args.a)
    img_b = read_ppm(args.b)
    codec = ToyCodec()
    phi = ToyPyramidExtractor()
    from .matching import DescriptorConfig

    desc = DescriptorConfig()
    d_a = toy_encode(img_a, codec)
    d_b = toy_encode(img_b, codec)
    s_a = patch_descriptor(d_a, desc)
    s_b = patch_descriptor(d_b, desc)
    corr = correlation_map(s_a, s_b)
    warped = soft_warp(corr, d_b, 0.01)
    cyclic = soft_warp(corr.transposed(), warped, 0.01)

    sched = linear_beta_schedule(1000, 1e-4, 0.02)
    tau = make_subsequence(1000, 16).tau(4)
    rng = Rng(int(os.environ.get("MIDM_SEED", "0")))
    eps = rng_gaussian(rng, d_b.shape)
    noisy = forward_diffuse(d_b, tau, eps, sched)
    from .pipeline import fit_prior

    model = PriorModel(prior=fit_prior(d_b), sched=sched)

    values = {
        "dom": loss_dom(s_a, s_b),
        "cycle": loss_cycle([cyclic], d_b),
        "src": loss_src(img_a, img_b, phi),
        "perc": loss_perc(img_a, img_b, phi),
        "style": loss_style_contextual(img_a, img_b, phi, ContextualConfig()),
        "diff": loss_diff([model.eval(noisy, tau)], [eps]),
    }
    values["total"] = weighted_total({k: v for k, v in values.items() if k != "total"})
    print(json.dumps(values, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="midm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run interleaved sampling on a PPM pair")
    p.add_argument("--config", required=True)
    p.add_argument("--condition", required=True)
    p.add_argument("--exemplar", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("gen", help="generate a synthetic condition/exemplar pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--shapes", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("sweep", help="sweep noise fractions over seeded synthetic pairs")
    p.add_argument("--noise", default="0.20,0.25,0.30,0.35")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--report", required=True)
    p.add_argument("--size", type=int, default=64)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("oracle-check", help="verify the analytic reverse-pass contraction law")
    p.set_defaults(func=_cmd_oracle_check)

    p = sub.add_parser("schedule", help="dump the noise schedule as CSV")
    p.add_argument("--dump", action="store_true")
    p.add_argument("--t-train", type=int, default=1000)
    p.add_argument("--beta-start", type=float, default=1e-4)
    p.add_argument("--beta-end", type=float, default=0.02)
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("mask-viz", help="write the final confidence mask as PGM")
    p.add_argument("--config", required=True)
    p.add_argument("--condition", required=True)
    p.add_argument("--exemplar", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mask_viz)

    p = sub.add_parser("losses", help="loss utilities")
    losses_sub = p.add_subparsers(dest="losses_command", required=True)
    pe = losses_sub.add_parser("eval", help="print all six losses for a fixture pair as JSON")
    pe.add_argument("--a", required=True, help="output-role PPM image")
    pe.add_argument("--b", required=True, help="reference-role PPM image")
    pe.set_defaults(func=_cmd_losses_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
