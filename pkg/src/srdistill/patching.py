"""Non-overlapping grid patches and their luma statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _backend

DEFAULT_PATCH_SIZE = 64


class PatchStats(NamedTuple):
    sigma: float  # population variance of luma
    mean: float  # mean luma


@dataclass(frozen=True)
class Patch:
    pixels: np.ndarray
    source_id: str
    origin: tuple[int, int]

    @property
    def size(self) -> int:
        return self.pixels.shape[0]


def _check_size(s: int) -> int:
    s = int(s)
    if s < 2:
        raise ValueError(f"patch size must be >= 2, got {s}")
    return s


def grid_origins(height: int, width: int, s: int) -> list[tuple[int, int]]:
    """Row-major origins of the full s-by-s tiles; partial tiles are dropped."""
    s = _check_size(s)
    return [(r * s, c * s) for r in range(height // s) for c in range(width // s)]


def extract_patch_grid(img: np.ndarray, s: int, source_id: str = "") -> list[Patch]:
    """Tile ``img`` at stride ``s`` in row-major order."""
    s = _check_size(s)
    return [
        Patch(np.ascontiguousarray(img[r : r + s, c : c + s]), source_id, (r, c))
        for r, c in grid_origins(img.shape[0], img.shape[1], s)
    ]


def grid_stats(img: np.ndarray, s: int, *, backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-tile ``(sigma, mean)`` arrays shaped ``(H // s, W // s)``.

    Computed in one kernel call over the whole image; values are identical to
    :func:`patch_stats` on the corresponding extracted patch.
    """
    s = _check_size(s)
    kernel = _backend.patch_moments if backend is None else _backend.kernels(backend)[1]
    mean, var = kernel(np.ascontiguousarray(img, dtype=np.float32), s)
    return var, mean


def patch_stats(p: Patch) -> PatchStats:
    s = p.pixels.shape[0]
    if p.pixels.shape[1] != s:
        raise ValueError("patch must be square")
    var, mean = grid_stats(p.pixels, s)
    return PatchStats(float(var[0, 0]), float(mean[0, 0]))
