"""Output-directory helpers: atomic publication and ordered worker maps."""

from __future__ import annotations

import contextlib
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

# files that mark a directory as produced by this package and safe to replace
OUTPUT_MARKERS = ("pairs.json", "bank.json", "degrade.json")


@contextlib.contextmanager
def atomic_output_dir(out):
    """Yield a scratch directory that replaces ``out`` only if the block succeeds.

    An existing ``out`` is replaced only when it is empty or carries one of
    :data:`OUTPUT_MARKERS`; anything else is refused rather than deleted.
    """
    out = Path(out)
    if out.exists():
        if not out.is_dir():
            raise FileExistsError(f"{out} exists and is not a directory")
        if any(out.iterdir()) and not any((out / m).exists() for m in OUTPUT_MARKERS):
            raise FileExistsError(f"{out} is not empty and was not written by srdistill")
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.tmp-", dir=out.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if out.exists():
        shutil.rmtree(out)
    os.replace(tmp, out)


def ordered_map(fn, items, workers: int = 1) -> list:
    """``list(map(fn, items))``, optionally across processes; order is preserved."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
