"""Pure-numpy twins of the compiled kernels in ``_kernels.pyx``.

The operation order mirrors the compiled loops exactly so either backend
produces bit-identical output.
"""

from __future__ import annotations

import numpy as np


def resample_axis(src: np.ndarray, idx: np.ndarray, w: np.ndarray, count: np.ndarray) -> np.ndarray:
    n_out = idx.shape[0]
    out = np.zeros((n_out, src.shape[1]), dtype=np.float64)
    if n_out == 0:
        return out
    rows = np.arange(n_out)
    n_pairs = count // 2
    for t in range(int(n_pairs.max())):
        hi = count - 1 - t
        live = t < n_pairs
        term = w[:, t, None] * src[idx[:, t]]
        term = term + w[rows, hi, None] * src[idx[rows, hi]]
        out = np.where(live[:, None], out + term, out)
    odd = (count % 2) == 1
    mid = count // 2
    term = w[rows, mid, None] * src[idx[rows, mid]]
    return np.where(odd[:, None], out + term, out)


def luma64(img: np.ndarray) -> np.ndarray:
    """Rec.601 luma in float64, rounded through float32 like ``to_luma``."""
    if img.shape[2] == 1:
        return img[:, :, 0].astype(np.float64)
    v = 0.299 * img[:, :, 0].astype(np.float64)
    v = v + 0.587 * img[:, :, 1].astype(np.float64)
    v = v + 0.114 * img[:, :, 2].astype(np.float64)
    np.clip(v, 0.0, 1.0, out=v)
    return v.astype(np.float32).astype(np.float64)


def patch_moments(img: np.ndarray, s: int) -> tuple[np.ndarray, np.ndarray]:
    ph, pw = img.shape[0] // s, img.shape[1] // s
    if ph == 0 or pw == 0:
        empty = np.empty((ph, pw), dtype=np.float64)
        return empty, empty.copy()
    lum = luma64(img[: ph * s, : pw * s])
    tiles = lum.reshape(ph, s, pw, s).transpose(0, 2, 1, 3).reshape(ph * pw, s * s)
    n = float(s * s)
    # add.accumulate is strictly sequential, unlike the pairwise np.sum
    mu = np.add.accumulate(tiles, axis=1)[:, -1] / n
    dev = tiles - mu[:, None]
    dev = dev * dev
    var = np.add.accumulate(dev, axis=1)[:, -1] / n
    return mu.reshape(ph, pw), var.reshape(ph, pw)
