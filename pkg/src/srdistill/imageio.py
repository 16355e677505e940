"""Image container conventions and PNG input/output.

Images are ``float32`` arrays shaped ``(H, W, C)`` with ``C`` in ``{1, 3}`` and
every value finite and inside ``[0, 1]``.
"""

from __future__ import annotations

import os
import struct

import cv2
import numpy as np

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# PNG color types: 0 gray, 2 RGB, 3 palette, 4 gray+alpha, 6 RGBA
_SUPPORTED_COLOR_TYPES = {0: "gray", 2: "rgb", 4: "gray+alpha", 6: "rgba"}


class ImageError(Exception):
    """Base class for image I/O failures."""


class UnreadableImageError(ImageError, OSError):
    """The file is missing, truncated, or not a decodable PNG."""


class UnsupportedBitDepthError(ImageError, ValueError):
    pass


class UnsupportedColorTypeError(ImageError, ValueError):
    pass


class ImageWriteError(ImageError, OSError):
    pass


def check_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    """Validate the image invariants and return ``img`` unchanged."""
    if not isinstance(img, np.ndarray) or img.ndim != 3:
        raise ValueError(f"{name} must be a 3-D (H, W, C) array")
    h, w, c = img.shape
    if h < 1 or w < 1:
        raise ValueError(f"{name} has an empty spatial extent {img.shape}")
    if c not in (1, 3):
        raise ValueError(f"{name} must have 1 or 3 channels, got {c}")
    if img.dtype != np.float32:
        raise ValueError(f"{name} must be float32, got {img.dtype}")
    if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
        raise ValueError(f"{name} values must be finite and within [0, 1]")
    return img


def as_image(arr) -> np.ndarray:
    """Coerce a 2-D or 3-D array of unit-interval values into an image."""
    a = np.asarray(arr)
    if a.ndim == 2:
        a = a[:, :, None]
    return check_image(np.ascontiguousarray(a, dtype=np.float32))


def read_png_header(data: bytes) -> tuple[int, int, int, int]:
    """Return ``(width, height, bit_depth, color_type)`` from a PNG byte string."""
    if len(data) < 33 or data[:8] != PNG_SIGNATURE or data[12:16] != b"IHDR":
        raise UnreadableImageError("not a PNG file")
    width, height, bit_depth, color_type = struct.unpack(">IIBB", data[16:26])
    return width, height, bit_depth, color_type


def load_image(path) -> np.ndarray:
    """Decode an 8- or 16-bit grayscale/RGB PNG into a unit-interval image.

    Alpha channels are dropped. Values are divided by the bit-depth maximum
    (255 or 65535).
    """
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise UnreadableImageError(f"{path}: cannot read file ({exc.strerror})") from exc

    try:
        _, _, bit_depth, color_type = read_png_header(data)
    except UnreadableImageError as exc:
        raise UnreadableImageError(f"{path}: {exc}") from None
    if color_type not in _SUPPORTED_COLOR_TYPES:
        raise UnsupportedColorTypeError(f"{path}: unsupported PNG color type {color_type}")
    if bit_depth not in (8, 16):
        raise UnsupportedBitDepthError(f"{path}: unsupported PNG bit depth {bit_depth}")

    raw = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise UnreadableImageError(f"{path}: corrupt PNG data")
    expected = np.uint8 if bit_depth == 8 else np.uint16
    if raw.dtype != expected:
        raise UnreadableImageError(f"{path}: decoder returned {raw.dtype} for {bit_depth}-bit data")

    if raw.ndim == 2:
        px = raw[:, :, None]
    elif color_type in (0, 4):
        # the decoder expands gray(+alpha) to BGR(A) with equal color planes
        px = raw[:, :, :1]
    else:
        px = raw[:, :, 2::-1]  # BGR(A) -> RGB
    scale = 255.0 if bit_depth == 8 else 65535.0
    out = px.astype(np.float64) / scale
    return np.ascontiguousarray(out, dtype=np.float32)


def quantize(img: np.ndarray) -> np.ndarray:
    """Map unit-interval values to bytes, rounding half away from zero."""
    q = np.floor(img.astype(np.float64) * 255.0 + 0.5)
    return np.clip(q, 0, 255).astype(np.uint8)


def encode_png(img: np.ndarray) -> bytes:
    check_image(img)
    q = quantize(img)
    if q.shape[2] == 3:
        q = q[:, :, ::-1]
    ok, buf = cv2.imencode(".png", np.ascontiguousarray(q), [cv2.IMWRITE_PNG_COMPRESSION, 6])
    if not ok:
        raise ImageWriteError("PNG encoder failed")
    return buf.tobytes()


def save_image(img: np.ndarray, path) -> None:
    """Write ``img`` as an 8-bit PNG."""
    data = encode_png(img)
    path = os.fspath(path)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise ImageWriteError(f"{path}: cannot write ({exc.strerror})") from exc


def to_luma(img: np.ndarray) -> np.ndarray:
    """Rec.601 luma as a one-channel image; one-channel input is returned as is."""
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError("to_luma expects an (H, W, 1) or (H, W, 3) image")
    if img.shape[2] == 1:
        return img
    wr, wg, wb = LUMA_WEIGHTS
    v = wr * img[:, :, 0].astype(np.float64)
    v = v + wg * img[:, :, 1].astype(np.float64)
    v = v + wb * img[:, :, 2].astype(np.float64)
    np.clip(v, 0.0, 1.0, out=v)
    return v.astype(np.float32)[:, :, None]
