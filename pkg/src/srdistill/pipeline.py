"""Noise-guided distillation of a target dataset plus an auxiliary one.

The target dataset fixes the CATI and contributes every image as an HR/LR
pair. Auxiliary images are kept only if at least one of their grid patches
falls inside the target's CATI; the matching patches join the merged bank.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fsutil import ordered_map
from .imageio import encode_png, load_image
from .manifest import DatasetManifest
from .noisebank import (
    DEFAULT_BOTTOM_FRAC,
    BankEntry,
    Cati,
    NoiseBank,
    cati_from_arrays,
    admit_patches,
    inject_noise,
    sample_noise,
    save_bank,
)
from .patching import DEFAULT_PATCH_SIZE, grid_stats
from .resample import degrade_pair

PAIRS_FORMAT = "srdistill-pairs"
PAIRS_VERSION = 1
DEFAULT_SCALE = 4


@dataclass
class TrainingPair:
    image_id: str
    origin_dataset: str
    hr_path: str
    lr_path: str
    hr: np.ndarray = field(repr=False, compare=False)
    lr: np.ndarray = field(repr=False, compare=False)


@dataclass
class DistilledDataset:
    pairs: list[TrainingPair]
    bank: NoiseBank
    config: dict
    target_id: str
    aux_id: str | None = None

    @property
    def aux_pairs(self) -> list[TrainingPair]:
        return [p for p in self.pairs if p.origin_dataset != self.target_id]


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name) or "_"


def _target_job(job):
    path, s, k = job
    img = load_image(path)
    sigma, mean = grid_stats(img, s)
    hr, lr = degrade_pair(img, k)
    return img, sigma, mean, hr, lr


def _aux_job(job):
    path, source_id, s, k, cati = job
    img = load_image(path)
    sigma, mean = grid_stats(img, s)
    if not cati.contains(sigma, mean).any():
        return None
    entries = admit_patches(img, source_id, s, cati, sigma, mean)
    hr, lr = degrade_pair(img, k)
    return entries, hr, lr


def distill(
    target: DatasetManifest,
    aux: DatasetManifest | None = None,
    k: int = DEFAULT_SCALE,
    s: int = DEFAULT_PATCH_SIZE,
    bottom_frac: float = DEFAULT_BOTTOM_FRAC,
    seed: int = 0,
    workers: int = 1,
) -> DistilledDataset:
    """Run the full distillation and return pairs plus the merged noise bank.

    Per-image work runs on ``workers`` processes; every reduction is an
    ordered merge keyed by manifest order, so the result does not depend on
    the worker count. Image read errors propagate and abort the run.
    """
    target.require_nonempty()
    done = ordered_map(_target_job, [(p, s, k) for _, p in target.images], workers)

    sigma = np.concatenate([d[1].ravel() for d in done])
    mean = np.concatenate([d[2].ravel() for d in done])
    if sigma.size == 0:
        raise ValueError(f"target dataset {target.dataset_id!r} has no full {s}x{s} patches")
    cati = cati_from_arrays(sigma, mean, bottom_frac)

    entries: list[BankEntry] = []
    pairs: list[TrainingPair] = []
    for (image_id, _), (img, sg, mn, hr, lr) in zip(target.images, done):
        entries.extend(admit_patches(img, target.source_id(image_id), s, cati, sg, mn))
        pairs.append(_pair(len(pairs), image_id, target.dataset_id, hr, lr))
    del done

    datasets = [target.dataset_id]
    if aux is not None and len(aux):
        datasets.append(aux.dataset_id)
        jobs = [(p, aux.source_id(i), s, k, cati) for i, p in aux.images]
        for (image_id, _), res in zip(aux.images, ordered_map(_aux_job, jobs, workers)):
            if res is None:
                continue
            found, hr, lr = res
            entries.extend(found)
            pairs.append(_pair(len(pairs), image_id, aux.dataset_id, hr, lr))

    config = {"scale": int(k), "patch_size": int(s), "bottom_frac": float(bottom_frac), "seed": int(seed)}
    bank = NoiseBank(int(s), cati, float(bottom_frac), entries, datasets)
    return DistilledDataset(pairs, bank, config, target.dataset_id, aux.dataset_id if aux is not None else None)


def _pair(index: int, image_id: str, dataset_id: str, hr, lr) -> TrainingPair:
    name = f"{index:05d}_{_safe(dataset_id)}_{_safe(image_id)}.png"
    return TrainingPair(image_id, dataset_id, f"hr/{name}", f"lr/{name}", hr, lr)


def sub_seed(seed: int, *parts: str) -> int:
    """Stable 64-bit seed derived from ``seed`` and string labels."""
    h = hashlib.sha256(str(int(seed)).encode())
    for p in parts:
        h.update(b"\x00" + p.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def noisy_lr(pair: TrainingPair, bank: NoiseBank, seed: int) -> np.ndarray:
    """The injected LR image emitted for ``pair`` under ``seed``."""
    patch = sample_noise(bank, sub_seed(seed, pair.origin_dataset, pair.image_id, "sample"))
    return inject_noise(pair.lr, patch, sub_seed(seed, pair.origin_dataset, pair.image_id, "inject"))


def emit_pairs(d: DistilledDataset, out_dir, inject: bool = False, seed: int | None = None) -> Path:
    """Write ``hr/``, ``lr/``, ``bank/`` and ``pairs.json`` into ``out_dir``.

    With ``inject`` set, each LR image gets a bank patch chosen and placed
    with sub-seeds hashed from ``(seed, dataset, image_id)``.
    """
    out = Path(out_dir)
    seed = d.config.get("seed", 0) if seed is None else int(seed)
    (out / "hr").mkdir(parents=True, exist_ok=True)
    (out / "lr").mkdir(parents=True, exist_ok=True)

    records = []
    for pair in d.pairs:
        lr = noisy_lr(pair, d.bank, seed) if inject else pair.lr
        (out / pair.hr_path).write_bytes(encode_png(pair.hr))
        (out / pair.lr_path).write_bytes(encode_png(lr))
        records.append(
            {
                "image_id": pair.image_id,
                "origin_dataset": pair.origin_dataset,
                "hr_path": pair.hr_path,
                "lr_path": pair.lr_path,
                "hr_size": list(pair.hr.shape[:2]),
                "lr_size": list(pair.lr.shape[:2]),
            }
        )

    config = dict(d.config, seed=seed, inject=bool(inject))
    save_bank(d.bank, out / "bank", config)
    doc = {
        "format": PAIRS_FORMAT,
        "version": PAIRS_VERSION,
        "config": config,
        "target": d.target_id,
        "aux": d.aux_id,
        "bank": "bank/bank.json",
        "pairs": records,
    }
    path = out / "pairs.json"
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def cati_matches(img: np.ndarray, s: int, cati: Cati) -> bool:
    sigma, mean = grid_stats(img, s)
    return bool(cati.contains(sigma, mean).any())
