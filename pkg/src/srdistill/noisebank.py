"""Characteristic intervals, noise-bank construction and noise injection.

A characteristic interval (CATI) is the bounding box, in (variance, mean)
space, of the lowest-variance patches of a dataset that have positive mean.
Patches whose statistics fall inside it are treated as pure sensor noise and
collected into a bank; bank patches are later added to LR images as
zero-mean residuals.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .imageio import check_image, load_image, to_luma
from .manifest import DatasetManifest
from .patching import Patch, PatchStats, grid_stats
from .tensorio import read_tensor, write_tensor
from .fsutil import ordered_map

DEFAULT_BOTTOM_FRAC = 0.02
BANK_FORMAT = "srdistill-noise-bank"
BANK_VERSION = 1
_SEED_MASK = (1 << 64) - 1


class EmptyCatiError(ValueError):
    """No bottom-variance patch has a positive mean."""


class EmptyBankError(ValueError):
    pass


class PatchClass(enum.Enum):
    NOISE = "noise"
    NOISELESS = "noiseless"


@dataclass(frozen=True)
class Cati:
    sigma_lo: float
    sigma_hi: float
    mean_lo: float
    mean_hi: float

    def __post_init__(self):
        if not (0.0 <= self.sigma_lo <= self.sigma_hi):
            raise ValueError(f"bad variance interval [{self.sigma_lo}, {self.sigma_hi}]")
        if not (0.0 < self.mean_lo <= self.mean_hi):
            raise ValueError(f"bad mean interval [{self.mean_lo}, {self.mean_hi}]")

    def contains(self, sigma, mean):
        """Closed-interval membership; works elementwise on arrays."""
        return (
            (sigma >= self.sigma_lo) & (sigma <= self.sigma_hi) & (mean >= self.mean_lo) & (mean <= self.mean_hi)
        )

    def to_json(self) -> dict:
        return {k: repr(float(v)) for k, v in vars(self).items()}

    @classmethod
    def from_json(cls, doc: dict) -> "Cati":
        return cls(**{k: float(doc[k]) for k in ("sigma_lo", "sigma_hi", "mean_lo", "mean_hi")})


def bottom_count(n_patches: int, bottom_frac: float) -> int:
    """``max(1, ceil(bottom_frac * n_patches))`` evaluated on the decimal fraction.

    Going through the decimal literal keeps e.g. ``0.07 * 100`` at exactly 7.
    """
    if not 0.0 < bottom_frac <= 1.0:
        raise ValueError(f"bottom_frac must be in (0, 1], got {bottom_frac}")
    return max(1, math.ceil(Fraction(repr(float(bottom_frac))) * n_patches))


def select_bottom(sigma: np.ndarray, mean: np.ndarray, bottom_frac: float) -> np.ndarray:
    """Indices of the lowest-variance entries, ties broken by mean then index."""
    sigma = np.asarray(sigma, dtype=np.float64).ravel()
    mean = np.asarray(mean, dtype=np.float64).ravel()
    if sigma.size == 0:
        raise ValueError("no patch statistics to select from")
    k = bottom_count(sigma.size, bottom_frac)
    order = np.lexsort((np.arange(sigma.size), mean, sigma))
    return order[:k]


def compute_cati(stats: Sequence[PatchStats], bottom_frac: float = DEFAULT_BOTTOM_FRAC) -> Cati:
    arr = np.asarray(stats, dtype=np.float64).reshape(-1, 2)
    return cati_from_arrays(arr[:, 0], arr[:, 1], bottom_frac)


def cati_from_arrays(sigma: np.ndarray, mean: np.ndarray, bottom_frac: float) -> Cati:
    picked = select_bottom(sigma, mean, bottom_frac)
    s, m = sigma[picked], mean[picked]
    keep = m > 0.0
    if not keep.any():
        raise EmptyCatiError(f"all {picked.size} bottom-variance patches have non-positive mean")
    s, m = s[keep], m[keep]
    return Cati(float(s.min()), float(s.max()), float(m.min()), float(m.max()))


def classify_patch(stats: PatchStats, cati: Cati) -> PatchClass:
    return PatchClass.NOISE if cati.contains(stats.sigma, stats.mean) else PatchClass.NOISELESS


@dataclass
class BankEntry:
    patch: Patch
    stats: PatchStats

    @property
    def sort_key(self):
        return (self.patch.source_id, self.patch.origin[0], self.patch.origin[1])


@dataclass
class NoiseBank:
    patch_size: int
    cati: Cati
    bottom_frac: float
    entries: list[BankEntry] = field(default_factory=list)
    source_datasets: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.entries.sort(key=lambda e: e.sort_key)

    def __len__(self) -> int:
        return len(self.entries)

    def merged(self, other: "NoiseBank") -> "NoiseBank":
        if other.patch_size != self.patch_size:
            raise ValueError("cannot merge banks with different patch sizes")
        return NoiseBank(
            self.patch_size,
            self.cati,
            self.bottom_frac,
            self.entries + other.entries,
            self.source_datasets + [d for d in other.source_datasets if d not in self.source_datasets],
        )


def admit_patches(img: np.ndarray, source_id: str, s: int, cati: Cati, sigma=None, mean=None) -> list[BankEntry]:
    """Bank entries for every grid patch of ``img`` inside ``cati``."""
    if sigma is None:
        sigma, mean = grid_stats(img, s)
    rows, cols = np.nonzero(cati.contains(sigma, mean))
    out = []
    for r, c in zip(rows.tolist(), cols.tolist()):
        px = np.ascontiguousarray(img[r * s : (r + 1) * s, c * s : (c + 1) * s])
        out.append(BankEntry(Patch(px, source_id, (r * s, c * s)), PatchStats(float(sigma[r, c]), float(mean[r, c]))))
    return out


def _load_and_stats(job):
    path, s = job
    img = load_image(path)
    sigma, mean = grid_stats(img, s)
    return sigma, mean


def build_bank_from_images(
    images: Sequence[tuple[str, np.ndarray]], s: int, bottom_frac: float = DEFAULT_BOTTOM_FRAC, stats=None
) -> NoiseBank:
    """Two-pass bank construction over in-memory ``(source_id, image)`` pairs."""
    if not images:
        raise EmptyBankError("no images")
    if stats is None:
        stats = [grid_stats(img, s) for _, img in images]
    cati = cati_from_arrays(
        np.concatenate([sg.ravel() for sg, _ in stats]), np.concatenate([mn.ravel() for _, mn in stats]), bottom_frac
    )
    entries = []
    for (source_id, img), (sg, mn) in zip(images, stats):
        entries.extend(admit_patches(img, source_id, s, cati, sg, mn))
    return NoiseBank(s, cati, bottom_frac, entries)


def build_bank(
    manifest: DatasetManifest, s: int, bottom_frac: float = DEFAULT_BOTTOM_FRAC, workers: int = 1
) -> NoiseBank:
    """Build a noise bank from every image of a dataset.

    Pass one gathers grid statistics for all images (in parallel when
    ``workers > 1``) and derives the CATI; pass two re-reads each image and
    admits its in-interval patches.
    """
    manifest.require_nonempty()
    stats = ordered_map(_load_and_stats, [(p, s) for _, p in manifest.images], workers)
    sigma = np.concatenate([sg.ravel() for sg, _ in stats])
    mean = np.concatenate([mn.ravel() for _, mn in stats])
    if sigma.size == 0:
        raise EmptyBankError(f"dataset {manifest.dataset_id!r} has no full {s}x{s} patches")
    cati = cati_from_arrays(sigma, mean, bottom_frac)
    entries = []
    for (image_id, path), (sg, mn) in zip(manifest.images, stats):
        if cati.contains(sg, mn).any():
            entries.extend(admit_patches(load_image(path), manifest.source_id(image_id), s, cati, sg, mn))
    return NoiseBank(s, cati, bottom_frac, entries, [manifest.dataset_id])


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & _SEED_MASK)


def sample_noise(bank: NoiseBank, seed: int) -> Patch:
    """Uniformly pick one bank patch; the choice depends only on ``seed``."""
    if not bank.entries:
        raise EmptyBankError("cannot sample from an empty noise bank")
    return bank.entries[int(_rng(seed).integers(len(bank.entries)))].patch


def _match_channels(r: np.ndarray, channels: int) -> np.ndarray:
    if r.shape[2] == channels:
        return r
    if channels == 3:
        return np.repeat(r, 3, axis=2)
    return to_luma(r.astype(np.float32)).astype(np.float64)


def tiled_residual(n: Patch, height: int, width: int, channels: int, seed: int) -> np.ndarray:
    """Zero-mean residual of ``n`` tiled over an ``height x width`` canvas.

    The tiling starts at a seeded offset inside the patch. The cropped field
    is re-centred per channel so it stays zero-mean when the canvas is not a
    multiple of the patch size.
    """
    px = n.pixels.astype(np.float64)
    r = _match_channels(px - px.mean(axis=(0, 1)), channels)
    s_h, s_w = r.shape[:2]
    oy, ox = (int(v) for v in _rng(seed).integers(0, (s_h, s_w)))
    rows = (np.arange(height) + oy) % s_h
    cols = (np.arange(width) + ox) % s_w
    field_ = r[rows][:, cols]
    return field_ - field_.mean(axis=(0, 1))


def inject_noise(lr: np.ndarray, n: Patch, seed: int) -> np.ndarray:
    """Add a bank patch's residual to ``lr`` and clamp to ``[0, 1]``."""
    check_image(lr, "lr")
    h, w, c = lr.shape
    out = lr.astype(np.float64) + tiled_residual(n, h, w, c, seed)
    np.clip(out, 0.0, 1.0, out=out)
    return out.astype(np.float32)


def save_bank(bank: NoiseBank, directory, config: dict | None = None) -> Path:
    """Write ``bank.json`` and ``patches/*.ngdc`` under ``directory``."""
    directory = Path(directory)
    (directory / "patches").mkdir(parents=True, exist_ok=True)
    records = []
    for i, e in enumerate(bank.entries):
        name = f"patches/{i:06d}.ngdc"
        write_tensor(e.patch.pixels, directory / name)
        records.append(
            {
                "file": name,
                "sigma": repr(e.stats.sigma),
                "mean": repr(e.stats.mean),
                "source_id": e.patch.source_id,
                "origin": list(e.patch.origin),
            }
        )
    doc = {
        "format": BANK_FORMAT,
        "version": BANK_VERSION,
        "config": config or {},
        "patch_size": bank.patch_size,
        "bottom_frac": bank.bottom_frac,
        "cati": bank.cati.to_json(),
        "source_datasets": bank.source_datasets,
        "entries": records,
    }
    path = directory / "bank.json"
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def load_bank(directory) -> NoiseBank:
    directory = Path(directory)
    doc = json.loads((directory / "bank.json").read_text())
    if doc.get("format") != BANK_FORMAT or doc.get("version") != BANK_VERSION:
        raise ValueError(f"{directory}: not a version {BANK_VERSION} noise bank")
    entries = []
    for rec in doc["entries"]:
        px = read_tensor(directory / rec["file"])
        patch = Patch(px, rec["source_id"], tuple(rec["origin"]))
        entries.append(BankEntry(patch, PatchStats(float(rec["sigma"]), float(rec["mean"]))))
    return NoiseBank(
        int(doc["patch_size"]), Cati.from_json(doc["cati"]), float(doc["bottom_frac"]), entries, doc["source_datasets"]
    )

