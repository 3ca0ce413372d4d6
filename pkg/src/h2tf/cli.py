"""Command-line interface: simulate, denoise, metrics, bench.

Exit codes are a stable contract: 0 success, 2 usage error, 3 I/O or
format error, 4 numeric failure.
"""

import csv
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .metrics import psnr, ssim
from .model import ModelConfig, default_ranks
from .noise import NoiseSpec, make_case
from .solver import DivergenceError, IterationStats, SolverConfig, run
from .tensorfile import FormatError, read_tensor, write_manifest, write_tensor

_MODEL_DEFAULTS = {f.name: f.default for f in dataclasses.fields(ModelConfig)}
_SOLVER_DEFAULTS = SolverConfig()

BENCH_SUITES = ("hmf-layers", "hnt-layers", "factor-sizes")


def _add_noise_flags(p):
    d = NoiseSpec()
    p.add_argument("--case", type=int, default=d.case_id, choices=(1, 2, 3, 4, 5))
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--gaussian-std", type=float, default=d.gaussian_std)
    p.add_argument("--impulse-rate", type=float, default=d.impulse_rate)
    p.add_argument("--deadline-band-fraction", type=float,
                   default=d.deadline_band_fraction)
    p.add_argument("--deadline-count-range", type=int, nargs=2, metavar=("LO", "HI"),
                   default=list(d.deadline_count_range))
    p.add_argument("--deadline-width-range", type=int, nargs=2, metavar=("LO", "HI"),
                   default=list(d.deadline_width_range))
    p.add_argument("--stripe-band-fraction", type=float, default=d.stripe_band_fraction)
    p.add_argument("--stripe-count-range", type=int, nargs=2, metavar=("LO", "HI"),
                   default=list(d.stripe_count_range))


def _add_model_flags(p):
    p.add_argument("--hmf-layers", type=int, default=_MODEL_DEFAULTS["hmf_layers"])
    p.add_argument("--hnt-layers", type=int, default=_MODEL_DEFAULTS["hnt_layers"])
    p.add_argument("--ranks", type=str, default=None,
                   help="comma-separated r_0..r_l (default: doubling interior)")
    p.add_argument("--activation-slope", type=float,
                   default=_MODEL_DEFAULTS["activation_slope"])
    p.add_argument("--model-seed", type=int, default=_MODEL_DEFAULTS["seed"])


def _add_solver_flags(p):
    d = _SOLVER_DEFAULTS
    p.add_argument("--alpha1", type=float, default=d.alpha1)
    p.add_argument("--alpha2", type=float, default=d.alpha2)
    p.add_argument("--alpha3", type=float, default=d.alpha3)
    p.add_argument("--mu", type=float, default=d.mu)
    p.add_argument("--adam-lr", type=float, default=d.adam_lr)
    p.add_argument("--adam-beta1", type=float, default=d.adam_beta1)
    p.add_argument("--adam-beta2", type=float, default=d.adam_beta2)
    p.add_argument("--adam-eps", type=float, default=d.adam_eps)
    p.add_argument("--max-iters", type=int, default=d.max_iters)
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--inner-adam-steps", type=int, default=d.inner_adam_steps)
    p.add_argument("--seed", type=int, default=d.seed)


def _noise_spec(args):
    return NoiseSpec(case_id=args.case,
                     gaussian_std=args.gaussian_std,
                     impulse_rate=args.impulse_rate,
                     deadline_band_fraction=args.deadline_band_fraction,
                     deadline_count_range=tuple(args.deadline_count_range),
                     deadline_width_range=tuple(args.deadline_width_range),
                     stripe_band_fraction=args.stripe_band_fraction,
                     stripe_count_range=tuple(args.stripe_count_range),
                     seed=args.seed)


def _model_config(args, shape, ranks=None, hmf_layers=None, hnt_layers=None):
    if ranks is None and args.ranks is not None:
        ranks = tuple(int(r) for r in args.ranks.split(","))
    return ModelConfig(shape=shape,
                       hmf_layers=args.hmf_layers if hmf_layers is None else hmf_layers,
                       hnt_layers=args.hnt_layers if hnt_layers is None else hnt_layers,
                       ranks=ranks,
                       activation_slope=args.activation_slope,
                       seed=args.model_seed)


def _solver_config(args):
    return SolverConfig(alpha1=args.alpha1, alpha2=args.alpha2, alpha3=args.alpha3,
                        mu=args.mu, adam_lr=args.adam_lr, adam_beta1=args.adam_beta1,
                        adam_beta2=args.adam_beta2, adam_eps=args.adam_eps,
                        max_iters=args.max_iters, tol=args.tol,
                        inner_adam_steps=args.inner_adam_steps, seed=args.seed)


def _config_entries(prefix, cfg):
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        out[f"{prefix}.{f.name}"] = value
    return out


def _base_manifest(command):
    return {"tool": "h2tf", "version": __version__, "command": command}


def cmd_simulate(args):
    x = read_tensor(args.input)
    spec = _noise_spec(args)
    y = make_case(x, spec)
    write_tensor(args.output, y.astype(x.dtype))
    manifest = _base_manifest("simulate")
    manifest.update({"input": args.input, "output": args.output})
    manifest.update(_config_entries("noise", spec))
    write_manifest(str(args.output) + ".manifest", manifest)


def cmd_denoise(args):
    y = read_tensor(args.input)
    truth = read_tensor(args.truth) if args.truth else None
    model_cfg = _model_config(args, y.shape)
    solver_cfg = _solver_config(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    result = run(y, model_cfg, solver_cfg, truth=truth)
    write_tensor(out / "x.ht3", result.x)
    write_tensor(out / "s.ht3", result.s)
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(IterationStats.FIELDS)
        for stats in result.diagnostics:
            writer.writerow(stats.row())
    manifest = _base_manifest("denoise")
    manifest.update({"input": args.input, "output": str(out),
                     "truth": args.truth or "",
                     "iterations": result.iterations,
                     "stopped_early": result.stopped_early,
                     "scale_min": result.scale_min,
                     "scale_range": result.scale_range})
    manifest.update(_config_entries("model", model_cfg))
    manifest.update(_config_entries("solver", solver_cfg))
    write_manifest(out / "manifest.txt", manifest)


def cmd_metrics(args):
    x = read_tensor(args.x)
    ref = read_tensor(args.ref)
    print(f"psnr={psnr(x, ref):.6f}")
    print(f"ssim={ssim(x, ref):.6f}")


def _bench_grid(suite, args, shape):
    if suite == "hmf-layers":
        for l in (2, 3, 4, 5, 6):
            yield f"l={l}", _model_config(args, shape, hmf_layers=l,
                                          ranks=default_ranks(shape, l))
    elif suite == "hnt-layers":
        for m in (0, 1, 2, 3):
            yield f"m={m}", _model_config(args, shape, hnt_layers=m)
    elif suite == "factor-sizes":
        h, w, _ = shape
        for c in range(1, 21):
            ranks = (w, c, 2 * c, 4 * c, 8 * c, h)
            yield f"c={c}", _model_config(args, shape, hmf_layers=5, ranks=ranks)
    else:
        raise ValueError(f"unknown suite {suite!r}")


def cmd_bench(args):
    clean = read_tensor(args.input)
    spec = _noise_spec(args)
    noisy = make_case(clean, spec)
    solver_cfg = _solver_config(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for label, model_cfg in _bench_grid(args.suite, args, clean.shape):
        tic = time.perf_counter()
        result = run(noisy, model_cfg, solver_cfg, truth=clean)
        seconds = time.perf_counter() - tic
        rows.append({"suite": args.suite, "point": label,
                     "hmf_layers": model_cfg.hmf_layers,
                     "hnt_layers": model_cfg.hnt_layers,
                     "ranks": ",".join(str(r) for r in model_cfg.ranks),
                     "psnr": f"{psnr(result.x, clean):.6f}",
                     "ssim": f"{ssim(result.x, clean):.6f}",
                     "seconds": f"{seconds:.3f}"})
    with open(out / "bench.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    manifest = _base_manifest("bench")
    manifest.update({"suite": args.suite, "input": args.input,
                     "output": str(out), "points": len(rows)})
    manifest.update(_config_entries("noise", spec))
    manifest.update(_config_entries("solver", solver_cfg))
    write_manifest(out / "manifest.txt", manifest)


def build_parser():
    import argparse

    parser = argparse.ArgumentParser(
        prog="h2tf",
        description="Spectral-cube denoising via a hierarchical nonlinear "
                    "tensor factorization fitted with ADMM")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="corrupt a clean cube with mixed noise")
    p.add_argument("input")
    p.add_argument("output")
    _add_noise_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("denoise", help="fit the model and write x, s, diagnostics")
    p.add_argument("input")
    p.add_argument("output", help="output directory")
    p.add_argument("--truth", default=None, help="clean cube for per-iteration PSNR")
    _add_model_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("metrics", help="print psnr/ssim as key=value lines")
    p.add_argument("x")
    p.add_argument("ref")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="run a sweep grid and emit a CSV")
    p.add_argument("suite", choices=BENCH_SUITES)
    p.add_argument("output", help="output directory")
    p.add_argument("--input", required=True, help="clean cube to corrupt and denoise")
    _add_noise_flags(p)
    _add_model_flags(p)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (OSError, FormatError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except DivergenceError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 4
    except ValueError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
