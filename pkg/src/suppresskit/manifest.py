"""Corpus manifests: JSON lines of {"id": str, "path": str, "label": ...}.

Labels are single ints for single-label tasks, lists of ints for
multi-label, and may be omitted for transform-only corpora. Paths are
resolved relative to the manifest file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    path: Path
    label: int | tuple[int, ...] | None = None


def load_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{line_no}: malformed JSON: {exc}") from exc
            image_id = obj.get("id")
            rel = obj.get("path")
            if not image_id or not isinstance(image_id, str):
                raise ManifestError(f"{path}:{line_no}: missing or empty 'id'")
            if image_id in seen:
                raise ManifestError(f"{path}:{line_no}: duplicate id {image_id!r}")
            seen.add(image_id)
            if not rel or not isinstance(rel, str):
                raise ManifestError(f"{path}:{line_no}: missing 'path'")
            label = obj.get("label")
            if isinstance(label, list):
                label = tuple(int(v) for v in label)
            elif label is not None:
                label = int(label)
            entries.append(ManifestEntry(image_id=image_id, path=(base / rel), label=label))
    if not entries:
        raise ManifestError(f"{path}: empty manifest")
    return entries


def scan_directory(root, extensions=(".png", ".jpg", ".jpeg")) -> list[ManifestEntry]:
    """Build a manifest from an image tree; ids are the relative paths."""
    root = Path(root)
    if not root.is_dir():
        raise ManifestError(f"not a directory: {root}")
    entries = []
    for p in sorted(root.rglob("*")):
        if p.suffix.lower() in extensions and p.is_file():
            entries.append(ManifestEntry(image_id=p.relative_to(root).as_posix(), path=p))
    if not entries:
        raise ManifestError(f"no images found under {root}")
    return entries


def write_manifest(entries: list[ManifestEntry], path, relative_to=None) -> None:
    path = Path(path)
    base = Path(relative_to) if relative_to is not None else path.parent
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            obj: dict = {"id": e.image_id}
            try:
                obj["path"] = e.path.relative_to(base).as_posix()
            except ValueError:
                obj["path"] = str(e.path)
            if e.label is not None:
                obj["label"] = list(e.label) if isinstance(e.label, tuple) else e.label
            fh.write(json.dumps(obj) + "\n")
