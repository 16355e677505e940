"""The compiled kernels and their numpy twins must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

from srdistill import _backend
from srdistill.patching import grid_stats
from srdistill.resample import bicubic_resize

try:
    from srdistill import _kernels  # noqa: F401

    HAVE_EXT = True
except ImportError:
    HAVE_EXT = False

needs_ext = pytest.mark.skipif(not HAVE_EXT, reason="compiled kernels not built")


def test_backend_name_is_known():
    assert _backend.NAME in ("cython", "python")
    forced = bool(os.environ.get("SRDISTILL_PURE_PYTHON"))
    assert _backend.NAME == ("cython" if HAVE_EXT and not forced else "python")


@needs_ext
def test_resize_bit_identical(rng):
    for _ in range(30):
        h, w = rng.integers(1, 60, 2)
        th, tw = rng.integers(1, 70, 2)
        img = rng.random((h, w, int(rng.choice([1, 3])))).astype(np.float32)
        a = bicubic_resize(img, th, tw, backend="cython")
        b = bicubic_resize(img, th, tw, backend="python")
        assert np.array_equal(a, b)


@needs_ext
@pytest.mark.parametrize("c", [1, 3])
def test_patch_moments_bit_identical(rng, c):
    for s in (2, 5, 16, 64):
        img = rng.random((150, 131, c)).astype(np.float32)
        va, ma = grid_stats(img, s, backend="cython")
        vb, mb = grid_stats(img, s, backend="python")
        assert np.array_equal(va, vb) and np.array_equal(ma, mb)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.kernels("fortran")


def test_env_forces_fallback():
    env = dict(os.environ, SRDISTILL_PURE_PYTHON="1")
    code = "import srdistill; print(srdistill.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
