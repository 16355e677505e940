import json
import struct
import sys
import zlib
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from srdistill.imageio import save_image  # noqa: E402


def raw_png(width, height, bit_depth, color_type, rows: bytes) -> bytes:
    """Minimal PNG encoder (filter type 0 on every row) independent of the package."""

    def chunk(tag, data):
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)

    ihdr = struct.pack(">IIBBBBB", width, height, bit_depth, color_type, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", zlib.compress(rows)) + chunk(b"IEND", b"")


def png_from_array(arr: np.ndarray, color_type: int) -> bytes:
    """Encode a uint8/uint16 (H, W, C) array with the given PNG color type."""
    bit_depth = 16 if arr.dtype == np.uint16 else 8
    be = arr.astype(">u2") if bit_depth == 16 else arr
    rows = b"".join(b"\x00" + be[i].tobytes() for i in range(arr.shape[0]))
    return raw_png(arr.shape[1], arr.shape[0], bit_depth, color_type, rows)


def textured(rng, h, w, lo=0.1, hi=0.9):
    return rng.uniform(lo, hi, (h, w, 3)).astype(np.float32)


def flat_patch(s, mean, amp):
    """Gray patch of the given mean with a +-amp checkerboard (luma variance ~amp**2)."""
    yy, xx = np.mgrid[0:s, 0:s]
    v = mean + amp * np.where((yy + xx) % 2 == 0, 1.0, -1.0)
    return np.repeat(v[:, :, None], 3, axis=2).astype(np.float32)


def write_manifest(path: Path, dataset_id: str, named_images) -> Path:
    """Save images as PNGs next to ``path`` and write a manifest listing them.

    Images are quantized on save, so callers should build them on the 8-bit
    grid if they need exact statistics afterwards.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    for image_id, img in named_images:
        rel = f"{dataset_id}_{image_id}.png"
        save_image(img, path.parent / rel)
        entries.append({"id": image_id, "path": rel})
    path.write_text(json.dumps({"dataset_id": dataset_id, "images": entries}))
    return path


def on_byte_grid(img):
    return (np.floor(img.astype(np.float64) * 255 + 0.5) / 255).astype(np.float32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def planted_distill_corpus(seed=7, s=16):
    """3 target + 20 auxiliary 64x64 images; auxiliary indices 1, 4, 9, 13, 18 are planted.

    Target images 0 and 2 hold the two lowest-variance patches (means 0.4 and
    0.6); each planted auxiliary image holds one patch with mean 0.5 and a
    variance between theirs. Everything else is strongly textured. All values
    sit on the 8-bit grid so the corpus survives a PNG round trip unchanged.
    """
    rng = np.random.default_rng(seed)
    target = []
    for i in range(3):
        img = textured(rng, 64, 64)
        if i == 0:
            img[16:32, 32:48] = flat_patch(s, 100 / 255, 2 / 255)
        if i == 2:
            img[48:64, 0:16] = flat_patch(s, 153 / 255, 6 / 255)
        target.append((f"t{i}", on_byte_grid(img)))
    planted = [1, 4, 9, 13, 18]
    aux = []
    for i in range(20):
        img = textured(rng, 64, 64)
        if i in planted:
            r, c = divmod(i % 16, 4)
            img[r * s : (r + 1) * s, c * s : (c + 1) * s] = flat_patch(s, 128 / 255, 4 / 255)
        aux.append((f"a{i:02d}", on_byte_grid(img)))
    return target, aux, [f"a{i:02d}" for i in planted]


def planted_bank_corpus(seed=3, s=16):
    """4 images of 5x5 patches (100 total) with 2 planted near-flat, positive-mean patches."""
    rng = np.random.default_rng(seed)
    imgs = []
    for i in range(4):
        img = textured(rng, 5 * s, 5 * s)
        if i == 1:
            img[2 * s : 3 * s, s : 2 * s] = flat_patch(s, 90 / 255, 1 / 255)
        if i == 3:
            img[4 * s : 5 * s, 4 * s : 5 * s] = flat_patch(s, 170 / 255, 3 / 255)
        imgs.append((f"img{i}", on_byte_grid(img)))
    planted = [("img1", 2 * s, s), ("img3", 4 * s, 4 * s)]
    return imgs, planted
