"""Dataset manifests: ``{"dataset_id": str, "images": [{"id": str, "path": str}, ...]}``."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path


class ManifestError(ValueError):
    pass


class EmptyDatasetError(ManifestError):
    pass


@dataclass(frozen=True)
class DatasetManifest:
    dataset_id: str
    images: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for image_id, _ in self.images:
            if image_id in seen:
                raise ManifestError(f"duplicate image id {image_id!r} in dataset {self.dataset_id!r}")
            seen.add(image_id)

    def __len__(self) -> int:
        return len(self.images)

    def source_id(self, image_id: str) -> str:
        return f"{self.dataset_id}/{image_id}"

    def require_nonempty(self) -> "DatasetManifest":
        if not self.images:
            raise EmptyDatasetError(f"empty dataset {self.dataset_id!r}")
        return self

    def to_json(self) -> dict:
        return {"dataset_id": self.dataset_id, "images": [{"id": i, "path": p} for i, p in self.images]}


def load_manifest(path) -> DatasetManifest:
    """Read a manifest; relative image paths resolve against the manifest's directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{path}: cannot read manifest ({exc})") from exc
    try:
        dataset_id = str(doc["dataset_id"])
        entries = doc["images"]
        images = [(str(e["id"]), os.fspath(path.parent / e["path"])) for e in entries]
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"{path}: malformed manifest ({exc!r})") from exc
    return DatasetManifest(dataset_id, images)


def manifest_from_dir(directory, dataset_id: str | None = None) -> DatasetManifest:
    """Manifest of every ``*.png`` in ``directory``, ids taken from file stems."""
    directory = Path(directory)
    files = sorted(directory.glob("*.png"))
    return DatasetManifest(dataset_id or directory.name, [(f.stem, os.fspath(f)) for f in files])
