"""Dataset container and manifest I/O shared by the generator, the augmenter
and the CLI.

A dataset on disk is a directory of ``<sample_id>.bvh`` files plus a
``samples.manifest`` with one whitespace-separated record per line::

    <sample_id> <origin_id> <label> <key_frame>

Originals list themselves as origin; synthetics point at the original they
were perturbed from (the fold planner uses that link to keep folds
leak-free).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .bvh import MotionSequence, SkeletonHierarchy, load_bvh, save_bvh
from .features import AffectLabel

MANIFEST_NAME = "samples.manifest"


@dataclass
class MotionSample:
    sample_id: str
    label: AffectLabel
    motion: MotionSequence
    hierarchy: SkeletonHierarchy
    key_frame: int
    origin_id: str | None = None   # None for originals

    @property
    def is_synthetic(self) -> bool:
        return self.origin_id is not None and self.origin_id != self.sample_id


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    origin_id: str
    label: AffectLabel
    key_frame: int


def write_manifest(path, entries: list[ManifestEntry]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("# bodyaffect dataset manifest 1\n")
        for e in entries:
            f.write(f"{e.sample_id}\t{e.origin_id}\t{e.label.name.lower()}\t{e.key_frame}\n")


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for ln in f:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            parts = ln.split()
            if len(parts) != 4:
                raise ValueError(f"{path}: manifest line needs 4 fields, got {ln!r}")
            sid, origin, label, key = parts
            entries.append(ManifestEntry(sid, origin, AffectLabel.parse(label), int(key)))
    return entries


def save_dataset(directory, samples: list[MotionSample]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in samples:
        save_bvh(directory / f"{s.sample_id}.bvh", s.hierarchy, s.motion)
        entries.append(ManifestEntry(s.sample_id, s.origin_id or s.sample_id,
                                     s.label, s.key_frame))
    write_manifest(directory / MANIFEST_NAME, entries)


def load_dataset(directory) -> list[MotionSample]:
    directory = Path(directory)
    manifest = directory / MANIFEST_NAME
    if not manifest.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {directory}")
    samples = []
    for e in read_manifest(manifest):
        hierarchy, motion = load_bvh(directory / f"{e.sample_id}.bvh")
        origin = None if e.origin_id == e.sample_id else e.origin_id
        samples.append(MotionSample(e.sample_id, e.label, motion, hierarchy,
                                    e.key_frame, origin_id=origin))
    return samples
