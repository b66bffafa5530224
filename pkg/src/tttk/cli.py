"""Command-line interface: ``tttk <command> [options]``.

Every command reads an optional JSON run configuration (``--config``); flags
only select files and override seeds.  Exit status is 0 on success, 1 for
input errors (bad files, shapes, configs) and 2 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import render
from ._parallel import set_threads
from .config import ConfigError, RunConfig, load_config
from .datagen import DatasetError, SamplingError, generate_dataset, load_dataset, save_dataset
from .eikonal import EikonalError, SlownessField, outside_mask_apply, sweep_solve
from .geometry import GridError
from .io import TensorFileError, read_tensor, write_json, write_tensor
from .linearized import KernelError, assemble_kernel
from .nn.metrics import DegenerateTarget, ExactMatch, psnr
from .nn.networks import build_model
from .nn.optim import NonFiniteGradient
from .nn.training import TrainingError, load_checkpoint, predict, save_checkpoint, train
from .reconstruction import CGError, fbp_invert

INPUT_ERRORS = (ConfigError, TensorFileError, GridError, KernelError, SamplingError, OSError, ValueError, KeyError)
NUMERICAL_ERRORS = (EikonalError, CGError, TrainingError, NonFiniteGradient, FloatingPointError, DatasetError)


class InputError(ValueError):
    pass


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    threads = args.threads if args.threads is not None else cfg.threads
    if threads is not None:
        set_threads(threads)
    return cfg


def _check_shape(name, arr, expected):
    if arr.shape[-len(expected):] != tuple(expected):
        raise InputError(f"{name}: trailing shape {arr.shape[-len(expected):]} does not match expected {tuple(expected)}")


def _split(arr, n_train, split):
    if split == "train":
        return arr[:n_train]
    if split == "test":
        return arr[n_train:]
    return arr


def _load_pairs(path, split):
    """``(d, m)`` from a dataset directory (``m`` may be None for a bare tensor file)."""
    p = Path(path)
    if p.is_dir():
        ds = load_dataset(p)
        k = ds.n_train
        return _split(ds.d, k, split), _split(ds.m, k, split)
    return read_tensor(p), None


def _load_targets(path, split):
    p = Path(path)
    if p.is_dir():
        ds = load_dataset(p)
        return _split(ds.m, ds.n_train, split)
    return read_tensor(p)


def cmd_solve(args):
    cfg = _config(args)
    grid = cfg.cartesian_grid()
    if args.slowness:
        values = read_tensor(args.slowness)
        try:
            m = SlownessField(values, grid)
        except ValueError as exc:
            raise InputError(f"{args.slowness}: {exc}") from exc
    else:
        m = SlownessField.constant(grid, cfg.eikonal.m0)
    e = cfg.eikonal
    u = sweep_solve(outside_mask_apply(m, e.outside_slowness), args.source_angle, e.tol, e.max_sweeps)
    write_tensor(args.out, u.values)
    image = args.image or str(Path(args.out).with_suffix(".pgm"))
    render.save_image(image, render.gray(u.values))
    print(f"solved in {u.n_sweeps} sweeps -> {args.out}, {image}")


def cmd_gen_data(args):
    cfg = _config(args)
    spec = cfg.dataset
    overrides = {k: v for k, v in (("seed", args.seed), ("n_samples", args.n_samples), ("kind", args.kind), ("delta", args.delta)) if v is not None}
    if overrides:
        import dataclasses

        if "n_samples" in overrides and spec.n_train is not None and spec.n_train > overrides["n_samples"]:
            overrides["n_train"] = None
        spec = dataclasses.replace(spec, **overrides)
    ds = generate_dataset(spec, cfg.forward_config(), cfg.polar_grid())
    save_dataset(ds, args.out)
    print(f"{spec.n_samples} samples ({spec.kind}, delta={spec.delta}) -> {args.out}")


def cmd_linearize(args):
    cfg = _config(args)
    kernel = assemble_kernel(cfg.polar_grid(), cfg.ring(), cfg.kernel.n_quad)
    if args.kernel_out:
        write_tensor(args.kernel_out, kernel.kappa)
    if args.field:
        m = read_tensor(args.field)
        _check_shape(args.field, m, kernel.pg.shape)
        if not args.out:
            raise InputError("--out is required with --field")
        write_tensor(args.out, kernel.apply(m))
    print("kernel assembled" + (f" -> {args.kernel_out}" if args.kernel_out else ""))


def cmd_fbp(args):
    cfg = _config(args)
    kernel = assemble_kernel(cfg.polar_grid(), cfg.ring(), cfg.kernel.n_quad)
    d, _ = _load_pairs(args.data, args.split)
    _check_shape(str(args.data), d, (kernel.n, kernel.ring.n))
    batch = d.reshape(-1, *d.shape[-2:])
    out = np.stack([fbp_invert(kernel, x, cfg.fbp) for x in batch]).reshape(*d.shape[:-2], *kernel.pg.shape)
    write_tensor(args.out, out)
    if args.image:
        first = out.reshape(-1, *kernel.pg.shape)[0]
        render.save_image(args.image, render.signed_gray(render.polar_to_image_field(first, kernel.pg)))
    print(f"{len(batch)} reconstruction(s) -> {args.out}")


def cmd_train(args):
    cfg = _config(args)
    ds = load_dataset(args.data)
    spec = cfg.inverse_spec()
    _check_shape(args.data, ds.d, (spec.n_theta, spec.n_h))
    _check_shape(args.data, ds.m, (spec.n_theta, spec.n_rho))
    seed = cfg.model_seed if args.seed is None else args.seed
    model = build_model(spec, seed)
    tc = cfg.training
    (dtr, mtr), (dte, mte) = ds.split()
    log = (lambda r: print(json.dumps(r), flush=True)) if args.verbose else None
    hist = train(model, (dtr, mtr), (dte, mte) if len(dte) else None, tc, progress=log)
    save_checkpoint(args.out, model, seed=seed, history=hist, extra={"train_seed": tc.seed})
    if args.history:
        write_json(args.history, hist.to_dict())
    print(f"initial loss {hist.initial_loss:.6g}, final loss {hist.final_loss:.6g} -> {args.out}")


def cmd_predict(args):
    _config(args)
    model, _ = load_checkpoint(args.model)
    d, _ = _load_pairs(args.data, args.split)
    s = model.spec
    _check_shape(str(args.data), d, (s.n_theta, s.n_h))
    write_tensor(args.out, predict(model, d))
    print(f"{len(d) if d.ndim == 3 else 1} prediction(s) -> {args.out}")


def evaluate_psnr(pred, target):
    """Per-sample PSNR values; ``"exact"`` marks an exact match."""
    pred, target = np.asarray(pred), np.asarray(target)
    if pred.shape != target.shape:
        raise InputError(f"prediction shape {pred.shape} does not match target shape {target.shape}")
    out = []
    for p, t in zip(pred.reshape(-1, *pred.shape[-2:]), target.reshape(-1, *target.shape[-2:])):
        try:
            out.append(psnr(p, t))
        except ExactMatch:
            out.append("exact")
        except DegenerateTarget:
            out.append("degenerate")
    return out


def cmd_eval(args):
    _config(args)
    pred = read_tensor(args.pred)
    target = _load_targets(args.data, args.split)
    vals = evaluate_psnr(pred, target)
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["sample", "psnr_db"])
            for i, v in enumerate(vals):
                w.writerow([i, v if isinstance(v, str) else repr(float(v))])
    nums = [v for v in vals if not isinstance(v, str)]
    n_exact = sum(v == "exact" for v in vals)
    n_degen = sum(v == "degenerate" for v in vals)
    if nums:
        notes = [f"{n} {what}" for n, what in ((n_exact, "exact match(es)"), (n_degen, "constant target(s) skipped")) if n]
        print(f"mean PSNR {np.mean(nums):.4f} dB over {len(nums)} sample(s)" + "".join(f"; {s}" for s in notes))
    else:
        print(f"no finite PSNR: {n_exact} exact match(es) of {len(vals)}")


def cmd_render(args):
    cfg = _config(args)
    pg = cfg.polar_grid()
    fields = [read_tensor(args.field)] + ([read_tensor(args.ref)] if args.ref else [])
    panels = []
    for name, f in zip([args.field, args.ref], fields):
        if f.ndim == 3:
            f = f[args.index]
        if args.kind == "polar":
            _check_shape(name, f, pg.shape)
            f = render.polar_to_image_field(f, pg, args.size)
        panels.append(f)
    if args.ref:
        panels = panels[::-1]  # reference on the left
    render.render_signed(args.out, panels, colour=not args.gray)
    print(f"image -> {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tttk", description="Traveltime tomography toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (desk defaults when omitted)")
    common.add_argument("--threads", type=int, help="worker cap (overrides config and TTTK_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="eikonal solve for one boundary source")
    s.add_argument("--slowness", help="Cartesian slowness tensor (constant m0 when omitted)")
    s.add_argument("--source-angle", type=float, default=0.0)
    s.add_argument("--out", required=True)
    s.add_argument("--image", help="image path (default: OUT with .pgm suffix)")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("gen-data", parents=[common], help="generate an ellipse-inclusion dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--n-samples", type=int)
    s.add_argument("--kind", choices=["negative", "positive", "mixture"])
    s.add_argument("--delta", type=float)
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("linearize", parents=[common], help="assemble the straight-ray kernel, optionally apply it")
    s.add_argument("--kernel-out")
    s.add_argument("--field", help="polar perturbation tensor to map to linearised data")
    s.add_argument("--out")
    s.set_defaults(func=cmd_linearize)

    split = dict(choices=["train", "test", "all"], default="test")

    s = sub.add_parser("fbp", parents=[common], help="regularised normal-equations reconstruction")
    s.add_argument("--data", required=True, help="dataset directory or data tensor")
    s.add_argument("--split", **split)
    s.add_argument("--out", required=True)
    s.add_argument("--image")
    s.set_defaults(func=cmd_fbp)

    s = sub.add_parser("train", parents=[common], help="train the inverse network")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, help="initialisation seed (overrides model_seed)")
    s.add_argument("--history")
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", parents=[common], help="apply a trained network")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--split", **split)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", parents=[common], help="PSNR of predictions against targets")
    s.add_argument("--pred", required=True)
    s.add_argument("--data", required=True, help="dataset directory or target tensor")
    s.add_argument("--split", **split)
    s.add_argument("--csv")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("render", parents=[common], help="render a field (and optional reference) to an image")
    s.add_argument("--field", required=True)
    s.add_argument("--ref")
    s.add_argument("--kind", choices=["polar", "cartesian"], default="polar")
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--size", type=int, default=128)
    s.add_argument("--gray", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except NUMERICAL_ERRORS as exc:
        print(f"tttk {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 2
    except INPUT_ERRORS as exc:
        print(f"tttk {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
