"""Anti-aliased separable bicubic resampling and the two-level degradation.

The kernel is cubic convolution with ``a = -0.5`` (Catmull-Rom). Output
sample ``o`` reads source coordinate ``(o + 0.5) * in / out - 0.5``. When
downscaling, the kernel is stretched by ``in / out`` so it low-passes before
decimation. Out-of-range taps clamp to the border pixel and each output's
weights are renormalized to sum to one.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import _backend
from .imageio import check_image

CUBIC_A = -0.5


def cubic(x):
    """Cubic convolution kernel with ``a = -0.5``, supported on ``|x| < 2``."""
    ax = np.abs(np.asarray(x, dtype=np.float64))
    ax2 = ax * ax
    ax3 = ax2 * ax
    inner = 1.5 * ax3 - 2.5 * ax2 + 1.0
    outer = -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    return np.where(ax <= 1.0, inner, np.where(ax < 2.0, outer, 0.0))


def _pairwise_sum(w: np.ndarray, count: np.ndarray) -> np.ndarray:
    # same outside-in order as the kernels, so the sum is mirror-exact too
    n = w.shape[0]
    rows = np.arange(n)
    total = np.zeros(n)
    n_pairs = count // 2
    for t in range(int(n_pairs.max(initial=0))):
        hi = count - 1 - t
        term = w[:, t] + w[rows, hi]
        total = np.where(t < n_pairs, total + term, total)
    mid = count // 2
    return np.where(count % 2 == 1, total + w[rows, mid], total)


@lru_cache(maxsize=256)
def tap_table(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Clamped source indices, normalized weights and tap counts per output.

    Positions are kept as exact integer ratios: source coordinate of output
    ``o`` is ``((2o + 1) * n_in - n_out) / (2 * n_out)``.
    """
    if n_in < 1 or n_out < 1:
        raise ValueError("resample lengths must be >= 1")
    # kernel stretch s = s_num / s_den, capped at 1 for upscaling
    if n_out < n_in:
        s_num, s_den = n_out, n_in
    else:
        s_num, s_den = 1, 1

    o = np.arange(n_out, dtype=np.int64)
    num = (2 * o + 1) * n_in - n_out  # source coord = num / (2 n_out)
    den = 2 * n_out * s_num
    reach = 4 * n_out * s_den  # half support 2/s over the common denominator
    lo = (num * s_num - reach) // den + 1
    hi = -((-(num * s_num + reach)) // den) - 1
    count = (hi - lo + 1).astype(np.intp)

    width = int(count.max())
    j = lo[:, None] + np.arange(width, dtype=np.int64)[None, :]
    live = np.arange(width)[None, :] < count[:, None]
    # scaled offset (src - j) * s as one correctly rounded int/int division
    x = ((num[:, None] - 2 * n_out * j) * s_num) / (2 * n_out * s_den)
    w = np.where(live, cubic(x), 0.0)
    w = w / _pairwise_sum(w, count)[:, None]
    idx = np.clip(np.where(live, j, 0), 0, n_in - 1).astype(np.intp)
    for arr in (idx, w, count):
        arr.setflags(write=False)
    return np.ascontiguousarray(idx), np.ascontiguousarray(w), np.ascontiguousarray(count)


def _resample_rows(x: np.ndarray, n_out: int, kernel) -> np.ndarray:
    idx, w, count = tap_table(x.shape[0], n_out)
    return kernel(np.ascontiguousarray(x), idx, w, count)


def bicubic_resize(img: np.ndarray, target_h: int, target_w: int, *, backend: str | None = None) -> np.ndarray:
    """Resize an image to ``(target_h, target_w)``.

    Parameters
    ----------
    img : ndarray
        ``(H, W, C)`` float32 image.
    target_h, target_w : int
        Output size, each at least 1.
    backend : {"cython", "python"}, optional
        Force a kernel backend; defaults to the one selected at import.

    Returns
    -------
    ndarray
        ``(target_h, target_w, C)`` float32 image clamped to ``[0, 1]``.
    """
    check_image(img)
    target_h, target_w = int(target_h), int(target_w)
    if target_h < 1 or target_w < 1:
        raise ValueError(f"target size must be positive, got {target_h}x{target_w}")
    kernel = _backend.resample_axis if backend is None else _backend.kernels(backend)[0]

    h, w, c = img.shape
    x = img.astype(np.float64).reshape(h, w * c)
    x = _resample_rows(x, target_h, kernel).reshape(target_h, w, c)
    x = x.transpose(1, 0, 2).reshape(w, target_h * c)
    x = _resample_rows(x, target_w, kernel).reshape(target_w, target_h, c)
    out = x.transpose(1, 0, 2)
    np.clip(out, 0.0, 1.0, out=out)
    return np.ascontiguousarray(out, dtype=np.float32)


def degrade_pair(src: np.ndarray, k: int, *, backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Two successive bicubic downscales by ``k``: source -> HR -> LR."""
    k = int(k)
    if k < 1:
        raise ValueError("scale factor must be >= 1")
    h, w = src.shape[:2]
    hh, hw = h // k, w // k
    lh, lw = hh // k, hw // k
    if min(hh, hw, lh, lw) < 1:
        raise ValueError(f"{h}x{w} source is too small for two downscales by {k}")
    hr = bicubic_resize(src, hh, hw, backend=backend)
    lr = bicubic_resize(hr, lh, lw, backend=backend)
    return hr, lr
