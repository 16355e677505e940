"""Command-line entry point: ``srdistill <subcommand> ...``.

Every subcommand writes into a scratch directory that replaces the output
only on success, and exits non-zero on any error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path


from . import __version__
from .edl import complement_mask, softmax_mask
from .fsutil import atomic_output_dir
from .gradcheck import run_gradient_suite
from .imageio import ImageError, load_image, save_image
from .manifest import DatasetManifest, ManifestError, load_manifest, manifest_from_dir
from .metrics import REPORT_HEADER, compare_dirs
from .noisebank import EmptyBankError, EmptyCatiError, build_bank, save_bank
from .pipeline import distill, emit_pairs
from .resample import degrade_pair
from .tensorio import TensorFormatError, read_tensor, write_tensor

GRAD_TOLERANCE = 1e-4


@dataclass
class RunConfig:
    scale: int = 4
    patch_size: int = 64
    bottom_frac: float = 0.02
    seed: int = 0
    workers: int = os.cpu_count() or 1

    def echo(self) -> dict:
        # worker count changes scheduling only, never results, so it stays out of manifests
        d = asdict(self)
        d.pop("workers")
        return d


class CLIError(Exception):
    pass


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, overridden by the ``--config`` JSON file, overridden by flags."""
    values = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CLIError(f"cannot read config {args.config}: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        unknown = set(doc) - known
        if unknown:
            raise CLIError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    cfg = RunConfig(**values)
    if cfg.scale < 1:
        raise CLIError("--scale must be >= 1")
    if cfg.patch_size < 2:
        raise CLIError("--patch-size must be >= 2")
    if not 0 < cfg.bottom_frac <= 1:
        raise CLIError("--bottom-frac must be in (0, 1]")
    if cfg.workers < 1:
        raise CLIError("--workers must be >= 1")
    return cfg


def _dataset(path: str, role: str) -> DatasetManifest:
    p = Path(path)
    m = manifest_from_dir(p) if p.is_dir() else load_manifest(p)
    if not m.images:
        raise CLIError(f"empty dataset: {role} {path} lists no images")
    return m


# ---------------------------------------------------------------- subcommands


def cmd_degrade(args) -> int:
    cfg = resolve_config(args)
    src = Path(args.inp)
    files = sorted(src.glob("*.png")) if src.is_dir() else [src]
    if not files:
        raise CLIError(f"no PNG files in {src}")
    records = []
    with atomic_output_dir(args.out) as tmp:
        (tmp / "hr").mkdir()
        (tmp / "lr").mkdir()
        for f in files:
            hr, lr = degrade_pair(load_image(f), cfg.scale)
            save_image(hr, tmp / "hr" / f"{f.stem}.png")
            save_image(lr, tmp / "lr" / f"{f.stem}.png")
            records.append({"id": f.stem, "hr_size": list(hr.shape[:2]), "lr_size": list(lr.shape[:2])})
        doc = {"format": "srdistill-degrade", "version": 1, "config": cfg.echo(), "images": records}
        (tmp / "degrade.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {len(records)} HR/LR pairs to {args.out}")
    return 0


def cmd_bank(args) -> int:
    cfg = resolve_config(args)
    manifest = _dataset(args.dataset, "dataset")
    bank = build_bank(manifest, cfg.patch_size, cfg.bottom_frac, workers=cfg.workers)
    with atomic_output_dir(args.out) as tmp:
        save_bank(bank, tmp, cfg.echo())
    print(f"bank of {len(bank)} patches written to {args.out}")
    return 0


def cmd_distill(args) -> int:
    cfg = resolve_config(args)
    target = _dataset(args.target, "target")
    aux = _dataset(args.aux, "aux") if args.aux else None
    d = distill(target, aux, cfg.scale, cfg.patch_size, cfg.bottom_frac, cfg.seed, workers=cfg.workers)
    with atomic_output_dir(args.out) as tmp:
        emit_pairs(d, tmp, inject=args.inject, seed=cfg.seed)
    n_aux = len(d.aux_pairs)
    print(f"{len(d.pairs)} pairs ({n_aux} auxiliary), bank of {len(d.bank)} patches -> {args.out}")
    return 0


def cmd_metrics(args) -> int:
    reports = compare_dirs(args.ref_dir, args.test_dir)
    lines = [json.dumps({"header": REPORT_HEADER})] + [r.to_json() for r in reports]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_edl_check_grads(args) -> int:
    seed = 0 if args.seed is None else args.seed
    errs = run_gradient_suite(seed, instances=args.instances)
    for name, err in errs.items():
        print(f"{name:22s} max rel err {err:.3e}")
    worst = max(errs.values())
    ok = worst < GRAD_TOLERANCE
    print(f"max rel err {worst:.3e} ({'ok' if ok else 'FAIL'}, tolerance {GRAD_TOLERANCE:g})")
    return 0 if ok else 1


def cmd_edl_mask(args) -> int:
    logits = read_tensor(args.inp)
    mask = softmax_mask(logits)
    write_tensor(mask, args.out)
    if args.complement:
        write_tensor(complement_mask(mask), args.complement)
    print(f"mask {mask.shape[0]}x{mask.shape[1]}x{mask.shape[2]} written to {args.out}")
    return 0


# ---------------------------------------------------------------- parser


def _run_flags(p, *names):
    if "scale" in names:
        p.add_argument("--scale", type=int, help="downscale factor k (default 4)")
    if "patch_size" in names:
        p.add_argument("--patch-size", dest="patch_size", type=int, help="grid patch size s (default 64)")
    if "bottom_frac" in names:
        p.add_argument("--bottom-frac", dest="bottom_frac", type=float, help="lowest-variance fraction (default 0.02)")
    if "seed" in names:
        p.add_argument("--seed", type=int, help="master seed (default 0)")
    if "workers" in names:
        p.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    p.add_argument("--config", help="JSON file whose keys mirror the flags; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srdistill", description="Noise-guided dataset distillation for real-world super-resolution."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="write HR/LR pairs by two bicubic downscales")
    p.add_argument("--in", dest="inp", required=True, help="PNG file or directory of PNGs")
    p.add_argument("--out", required=True)
    _run_flags(p, "scale")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("bank", help="build a noise bank from a dataset")
    p.add_argument("--dataset", required=True, help="manifest JSON or directory of PNGs")
    p.add_argument("--out", required=True)
    _run_flags(p, "patch_size", "bottom_frac", "workers")
    p.set_defaults(func=cmd_bank)

    p = sub.add_parser("distill", help="distill target + auxiliary datasets into training pairs")
    p.add_argument("--target", required=True, help="manifest JSON or directory of PNGs")
    p.add_argument("--aux", help="auxiliary manifest JSON or directory")
    p.add_argument("--out", required=True)
    p.add_argument("--inject", action="store_true", help="add bank noise to emitted LR images")
    _run_flags(p, "scale", "patch_size", "bottom_frac", "seed", "workers")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("metrics", help="PSNR/SSIM report as JSON lines")
    p.add_argument("--ref-dir", required=True)
    p.add_argument("--test-dir", required=True)
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("edl", help="exclusionary-mask utilities")
    edl_sub = p.add_subparsers(dest="edl_command", required=True)
    q = edl_sub.add_parser("check-grads", help="finite-difference gradient suite")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--instances", type=int, default=20)
    q.set_defaults(func=cmd_edl_check_grads)
    q = edl_sub.add_parser("mask", help="softmax mask of a raw logit tensor")
    q.add_argument("--in", dest="inp", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--complement", help="also write the complementary mask here")
    q.set_defaults(func=cmd_edl_mask)
    return parser


_EXPECTED = (
    CLIError,
    ImageError,
    ManifestError,
    EmptyCatiError,
    EmptyBankError,
    TensorFormatError,
    FileExistsError,
    ValueError,
    OSError,
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _EXPECTED as exc:
        print(f"srdistill: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
