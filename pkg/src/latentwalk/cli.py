"""Command-line workflow: train, sample, interpolate, reconstruct, evaluate,
oracle-check.

Every subcommand takes ``--config``, ``--seed``, and ``--out``; equal seeds
and inputs give byte-identical artifacts (the manifest, which carries a
timestamp, is the one exception). Exit codes: 0 success, 1 failed check or
module error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .chain import LatentBatch, interpolation_grid, run_chain, sample_prior
from .data import (Dataset, RunOptions, export_trace, gen_gaussian_mixture,
                   load_checkpoint, load_idx, parse_config,
                   read_checkpoint_header, resolve_variant, save_checkpoint,
                   write_image_grid)
from .errors import LatentWalkError
from .metrics import chain_diagnostics, write_report
from .models import (GenerativeAutoencoder, PriorSpec, encode_mean,
                     set_norm_mode)
from .objectives import CorruptionSpec, TrainConfig, corrupt, train_model
from .oracle import run_oracle_suite
from .rng import Rng
from .tensor import Tensor, no_grad, set_default_dtype


# -- shared plumbing -----------------------------------------------------------


def _steps_arg(text: str) -> tuple[int, ...]:
    try:
        items = tuple(int(p.strip(), 10) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad steps list {text!r}") from None
    if not items:
        raise argparse.ArgumentTypeError("steps list must not be empty")
    if any(i < 0 for i in items):
        raise argparse.ArgumentTypeError("steps must be >= 0")
    return items


def _indices_arg(text: str) -> tuple[int, ...]:
    try:
        items = tuple(int(p.strip(), 10) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad index list {text!r}") from None
    if len(items) != 4:
        raise argparse.ArgumentTypeError("need exactly four corner indices")
    return items


def _resolve(args) -> tuple[TrainConfig, RunOptions]:
    """Config file (if any) merged with command-line overrides."""
    if getattr(args, "config", None):
        cfg, opts = parse_config(Path(args.config))
    else:
        cfg, opts = TrainConfig(), RunOptions()
    if getattr(args, "variant", None):
        opts.variant = args.variant
        _, cfg.denoising = resolve_variant(args.variant)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "corruption_variance", None) is not None:
        cfg.corruption = CorruptionSpec(args.corruption_variance)
    if getattr(args, "steps", None) is not None:
        opts.steps = args.steps
    if getattr(args, "bn_mode", None):
        opts.bn_mode = args.bn_mode
    if getattr(args, "chains", None) is not None:
        opts.chains = args.chains
    return cfg, opts


def _out_dir(args, default: str) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else Path("runs") / default
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, subcommand: str, cfg: TrainConfig,
                    opts: RunOptions, inputs: list[str],
                    outputs: list[str]) -> None:
    manifest = {
        "subcommand": subcommand,
        "seed": cfg.seed,
        "config": {"train": asdict(cfg), "options": asdict(opts)},
        "inputs": inputs,
        "outputs": outputs,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_split(opts: RunOptions, seed: int, split: str) -> Dataset:
    if opts.dataset == "mixture":
        n = opts.train_size if split == "train" else opts.test_size
        return gen_gaussian_mixture(n, k=opts.mixture_components,
                                    radius=opts.mixture_radius,
                                    std=opts.mixture_std, seed=seed, split=split)
    path = opts.dataset if split == "train" else (opts.dataset_test or opts.dataset)
    return load_idx(path)


def _latent_dim(opts: RunOptions) -> int:
    if opts.latent_dim is not None:
        return opts.latent_dim
    return 2 if opts.dataset == "mixture" else 8


def _image_shape(opts: RunOptions, data_dim: int) -> tuple[int, int] | None:
    if opts.dataset == "mixture":
        return None
    side = math.isqrt(data_dim)
    return (side, side) if side * side == data_dim else None


def _write_csv(path: Path, array: np.ndarray, prefix: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"{prefix}{i}" for i in range(array.shape[1])])
        for row in array:
            writer.writerow([f"{v:.17g}" for v in row])


def _emit_step(out: Path, stem: str, decoded: np.ndarray, latents: np.ndarray,
               image_shape: tuple[int, int] | None) -> list[str]:
    """One step's outputs: an image grid for image data, CSV dumps otherwise."""
    written = []
    if image_shape is not None:
        m = min(decoded.shape[0], 64)
        cols = 8 if m > 8 else m
        rows = math.ceil(m / cols)
        path = out / f"{stem}.pgm"
        write_image_grid(path, decoded[:m], rows, cols, *image_shape)
        written.append(str(path))
    else:
        path = out / f"{stem}_decoded.csv"
        _write_csv(path, decoded, "x")
        written.append(str(path))
    lat_path = out / f"{stem}_latents.csv"
    _write_csv(lat_path, latents, "z")
    written.append(str(lat_path))
    return written


def _snapshot_steps(model, z0: LatentBatch, steps: tuple[int, ...],
                    denoising: bool, spec: CorruptionSpec, rng: Rng):
    """Run one chain to max(steps) and return {step: latents} plus the trace."""
    trace = run_chain(model, z0, max(steps), denoising=denoising, spec=spec,
                      rng=rng)
    series = trace.latents()
    return {s: series[s] for s in steps}, trace


# -- subcommands ----------------------------------------------------------------


def cmd_train(args) -> int:
    cfg, opts = _resolve(args)
    if opts.precision == "single":
        set_default_dtype(np.float32)
    out = _out_dir(args, "train")
    data = _load_split(opts, cfg.seed, "train")
    base, denoising = resolve_variant(opts.variant)
    model = GenerativeAutoencoder(
        base, data_dim=data.dim, latent_dim=_latent_dim(opts),
        hidden_dims=opts.hidden_dims, adversary_dims=opts.adversary_dims,
        denoising=denoising, corruption_variance=cfg.corruption.variance,
        init_seed=cfg.seed)
    ckpt = out / "model.ckpt"
    losses = out / "losses.csv"
    _write_manifest(out, "train", cfg, opts, inputs=[data.source],
                    outputs=[str(ckpt), str(losses)])
    stats = train_model(model, data, cfg, log_path=losses)
    save_checkpoint(model, ckpt, train_config=cfg,
                    data_shape=_image_shape(opts, data.dim))
    final = stats[-1]
    print(f"trained {opts.variant} for {cfg.epochs} epochs "
          f"(final recon loss {final.recon_loss:.6f})")
    print(f"wrote {ckpt} and {losses}")
    return 0


def _load_model(args) -> tuple[GenerativeAutoencoder, dict]:
    header = read_checkpoint_header(args.checkpoint)
    return load_checkpoint(args.checkpoint), header


def cmd_sample(args) -> int:
    cfg, opts = _resolve(args)
    out = _out_dir(args, "sample")
    model, header = _load_model(args)
    set_norm_mode(model, opts.bn_mode)
    spec = CorruptionSpec(args.corruption_variance
                          if args.corruption_variance is not None
                          else model.corruption_variance)
    n = args.n if args.n is not None else opts.chains
    planned = [str(out / "trace.bin")]
    _write_manifest(out, "sample", cfg, opts, inputs=[str(args.checkpoint)],
                    outputs=planned)
    rng = Rng(cfg.seed).derive("sample")
    z0 = sample_prior(n, PriorSpec(model.latent_dim), rng)
    snaps, trace = _snapshot_steps(model, z0, opts.steps, model.denoising,
                                   spec, rng)
    export_trace(trace, out / "trace.bin")
    render_rng = Rng(cfg.seed).derive("render")
    image_shape = header.get("data_shape")
    for s in sorted(snaps):
        decoded = model.chain_decode(snaps[s], render_rng)
        _emit_step(out, f"samples_step{s}", decoded, snaps[s],
                   tuple(image_shape) if image_shape else None)
    print(f"sampled {n} chains at steps {','.join(map(str, sorted(snaps)))}; "
          f"outputs in {out}")
    return 0


def cmd_interpolate(args) -> int:
    cfg, opts = _resolve(args)
    out = _out_dir(args, "interpolate")
    _write_manifest(out, "interpolate", cfg, opts,
                    inputs=[str(args.checkpoint)],
                    outputs=[f"grid_step<k> for k in {list(opts.steps)}"])
    model, header = _load_model(args)
    set_norm_mode(model, opts.bn_mode)
    data = _load_split(opts, cfg.seed, "test")
    if max(args.indices) >= len(data):
        raise LatentWalkError(
            f"corner index {max(args.indices)} out of range for "
            f"{len(data)} test items")
    with no_grad():
        corners = encode_mean(model, Tensor(data.samples[list(args.indices)])).data
    grid = interpolation_grid(corners, args.rows, args.cols)
    spec = CorruptionSpec(model.corruption_variance)
    rng = Rng(cfg.seed).derive("interpolate")
    snaps, _ = _snapshot_steps(model, grid, opts.steps, model.denoising,
                               spec, rng)
    render_rng = Rng(cfg.seed).derive("render")
    image_shape = header.get("data_shape")
    for s in sorted(snaps):
        decoded = model.chain_decode(snaps[s], render_rng)
        if image_shape:
            path = out / f"grid_step{s}.pgm"
            write_image_grid(path, decoded, args.rows, args.cols, *image_shape)
        else:
            _write_csv(out / f"grid_step{s}_decoded.csv", decoded, "x")
            _write_csv(out / f"grid_step{s}_latents.csv", snaps[s], "z")
    print(f"interpolated {args.rows}x{args.cols} grid at steps "
          f"{','.join(map(str, sorted(snaps)))}; outputs in {out}")
    return 0


def cmd_reconstruct(args) -> int:
    cfg, opts = _resolve(args)
    out = _out_dir(args, "reconstruct")
    model, header = _load_model(args)
    set_norm_mode(model, opts.bn_mode)
    data = _load_split(opts, cfg.seed, "test")
    n = min(args.n, len(data))
    variance = (args.corruption_variance
                if args.corruption_variance is not None
                else model.corruption_variance)
    spec = CorruptionSpec(variance)
    errors_path = out / "errors.csv"
    _write_manifest(out, "reconstruct", cfg, opts,
                    inputs=[str(args.checkpoint), data.source],
                    outputs=[str(errors_path)])
    rng = Rng(cfg.seed).derive("reconstruct")
    clean = data.samples[:n]
    corrupted = corrupt(clean, spec, rng)
    z = model.chain_encode(corrupted, rng)
    recon = model.chain_decode(z, rng)

    image_shape = header.get("data_shape")
    for stem, batch in (("clean", clean), ("corrupted", corrupted),
                        ("reconstructed", recon)):
        if image_shape:
            cols = 8 if n > 8 else n
            rows = math.ceil(n / cols)
            write_image_grid(out / f"{stem}.pgm", batch, rows, cols, *image_shape)
        else:
            _write_csv(out / f"{stem}.csv", batch, "x")
    with open(errors_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "corruption_sq_error", "reconstruction_sq_error"])
        for i in range(n):
            corr_err = float(np.sum((corrupted[i] - clean[i]) ** 2))
            rec_err = float(np.sum((recon[i] - clean[i]) ** 2))
            writer.writerow([i, f"{corr_err:.17g}", f"{rec_err:.17g}"])
    mean_corr = float(np.mean(np.sum((corrupted - clean) ** 2, axis=1)))
    mean_rec = float(np.mean(np.sum((recon - clean) ** 2, axis=1)))
    print(f"reconstructed {n} items: mean corruption error {mean_corr:.6f}, "
          f"mean reconstruction error {mean_rec:.6f}; outputs in {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg, opts = _resolve(args)
    out = _out_dir(args, "evaluate")
    model, _ = _load_model(args)
    set_norm_mode(model, opts.bn_mode)
    data = _load_split(opts, cfg.seed, "test")
    report_path = out / "report.csv"
    _write_manifest(out, "evaluate", cfg, opts,
                    inputs=[str(args.checkpoint), data.source],
                    outputs=[str(report_path)])
    rng = Rng(cfg.seed).derive("evaluate")
    n_ref = min(len(data), opts.chains)
    reference = LatentBatch(model.chain_encode(data.samples[:n_ref], rng),
                            provenance="encoded")
    z0 = sample_prior(opts.chains, PriorSpec(model.latent_dim), rng)
    spec = CorruptionSpec(model.corruption_variance)
    trace = run_chain(model, z0, max(opts.steps), denoising=model.denoising,
                      spec=spec, rng=rng)
    report = chain_diagnostics(trace, reference, PriorSpec(model.latent_dim),
                               rng=Rng(cfg.seed).derive("metrics-prior"))
    write_report(report, report_path)
    first, last = report.mmd_to_encoded[0], report.mmd_to_encoded[-1]
    print(f"evaluated {opts.chains} chains over {max(opts.steps)} steps: "
          f"mmd_to_encoded {first:.6f} -> {last:.6f}; report at {report_path}")
    return 0


def cmd_oracle_check(args) -> int:
    cfg, opts = _resolve(args)
    out = _out_dir(args, "oracle-check")
    checks_path = out / "checks.csv"
    _write_manifest(out, "oracle-check", cfg, opts, inputs=[],
                    outputs=[str(checks_path)])
    results = run_oracle_suite(seed=cfg.seed, radius=args.spectral_radius,
                               n_chains=args.chains, tol_cov=args.tol_cov)
    width = max(len(r.name) for r in results)
    with open(checks_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["check", "passed", "detail"])
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            print(f"{status}  {r.name:<{width}}  {r.detail}")
            writer.writerow([r.name, str(r.passed).lower(), r.detail])
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


# -- argument parsing --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentwalk",
        description="Train generative autoencoders and refine their samples "
                    "by walking a Markov chain in latent space.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="path to a `key = value` config file")
        p.add_argument("--seed", type=int, help="run seed (default 0)")
        p.add_argument("--out", help="output directory")

    p_train = sub.add_parser("train", help="train a model variant")
    common(p_train)
    p_train.add_argument("--variant", choices=("vae", "dvae", "aae", "daae"))
    p_train.add_argument("--corruption-variance", type=float)

    p_sample = sub.add_parser("sample", help="prior samples refined by the chain")
    common(p_sample)
    p_sample.add_argument("--checkpoint", required=True)
    p_sample.add_argument("--n", type=int, help="number of parallel chains")
    p_sample.add_argument("--steps", type=_steps_arg,
                          help="comma-separated step indices (default 0,1,5,10)")
    p_sample.add_argument("--corruption-variance", type=float)
    p_sample.add_argument("--bn-mode", choices=("train", "eval"))

    p_interp = sub.add_parser("interpolate", help="slerp grid, optionally refined")
    common(p_interp)
    p_interp.add_argument("--checkpoint", required=True)
    p_interp.add_argument("--indices", type=_indices_arg, default=(0, 1, 2, 3),
                          help="four test-item corner indices")
    p_interp.add_argument("--rows", type=int, default=8)
    p_interp.add_argument("--cols", type=int, default=8)
    p_interp.add_argument("--steps", type=_steps_arg)
    p_interp.add_argument("--bn-mode", choices=("train", "eval"))

    p_recon = sub.add_parser("reconstruct", help="denoise corrupted test items")
    common(p_recon)
    p_recon.add_argument("--checkpoint", required=True)
    p_recon.add_argument("--n", type=int, default=16)
    p_recon.add_argument("--corruption-variance", type=float)
    p_recon.add_argument("--bn-mode", choices=("train", "eval"))

    p_eval = sub.add_parser("evaluate", help="distribution metrics along the chain")
    common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--chains", type=int)
    p_eval.add_argument("--steps", type=_steps_arg)
    p_eval.add_argument("--bn-mode", choices=("train", "eval"))

    p_oracle = sub.add_parser("oracle-check",
                              help="closed-form verification suite")
    common(p_oracle)
    p_oracle.add_argument("--spectral-radius", type=float, default=0.5,
                          help="contraction of the base system (>= 1 to "
                               "demonstrate divergence detection)")
    p_oracle.add_argument("--chains", type=int, default=10_000)
    p_oracle.add_argument("--tol-cov", type=float, default=0.05)
    return parser


_DISPATCH = {
    "train": cmd_train,
    "sample": cmd_sample,
    "interpolate": cmd_interpolate,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "oracle-check": cmd_oracle_check,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.subcommand](args)
    except LatentWalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
