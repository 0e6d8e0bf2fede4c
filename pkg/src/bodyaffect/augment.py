"""Synthetic sample generation by joint-rotation jitter near key postures.

New sequences are forged from originals by adding small angular noise
(truncated Gaussian by default, at most +/-5 degrees per axis) to the
rotation channels of frames around the labelled key pose, then clamping
every angle into the joint's allowed range so no pose becomes infeasible
(no head turned backwards, no hyper-extended elbow).  Class counts are
topped up round-robin over each class's originals until the dataset is
uniform at the target size.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .bvh import MotionSequence
from .dataset import MotionSample
from .features import LABELS, AffectLabel, JointRangeTable


class EmptyClassError(ValueError):
    """A class with zero originals cannot be augmented."""


@dataclass(frozen=True)
class AugmentConfig:
    max_offset_deg: float = 5.0
    sigma_deg: float = 2.5
    target_total: int = 250
    seed: int = 0
    affected_radius: int = 50
    noise: str = "truncated_gaussian"   # or "uniform" on [-max_offset, +max_offset]

    def __post_init__(self):
        if self.max_offset_deg <= 0:
            raise ValueError("max_offset_deg must be positive")
        if self.sigma_deg < 0:
            raise ValueError("sigma_deg must be non-negative")
        if self.noise not in ("truncated_gaussian", "uniform"):
            raise ValueError(f"unknown noise kind {self.noise!r}")


@dataclass(frozen=True)
class SyntheticSample:
    motion: MotionSequence
    origin_id: str
    label: AffectLabel
    sample_id: str
    key_frame: int


def draw_noise(rng: np.random.Generator, cfg: AugmentConfig, shape) -> np.ndarray:
    """Per-channel angular offsets; zero-mean Gaussian resampled until inside
    [-max_offset, +max_offset] (or plain uniform on that interval)."""
    if cfg.noise == "uniform":
        return rng.uniform(-cfg.max_offset_deg, cfg.max_offset_deg, size=shape)
    if cfg.sigma_deg == 0:
        return np.zeros(shape)
    noise = rng.normal(0.0, cfg.sigma_deg, size=shape)
    bad = np.abs(noise) > cfg.max_offset_deg
    while np.any(bad):
        noise[bad] = rng.normal(0.0, cfg.sigma_deg, size=int(bad.sum()))
        bad = np.abs(noise) > cfg.max_offset_deg
    return noise


def perturb_sequence(sample: MotionSample, cfg: AugmentConfig,
                     ranges: JointRangeTable, rng: np.random.Generator,
                     sample_id: str) -> SyntheticSample:
    """Forge one synthetic sequence from an original.

    Only rotation channels of frames within ``affected_radius`` of the key
    pose receive noise; root position channels and frames outside the radius
    stay bit-identical.
    """
    motion, hierarchy = sample.motion, sample.hierarchy
    T = motion.num_frames
    lo_f = max(0, sample.key_frame - cfg.affected_radius)
    hi_f = min(T, sample.key_frame + cfg.affected_radius + 1)
    frames = motion.frames.copy()
    for idx, joint in enumerate(hierarchy.joints):
        cols, axes = hierarchy.rotation_columns(idx)
        for col, axis in zip(cols, axes):
            offsets = draw_noise(rng, cfg, hi_f - lo_f)
            lo, hi = ranges.lookup(joint.name, axis)
            frames[lo_f:hi_f, col] = np.clip(frames[lo_f:hi_f, col] + offsets, lo, hi)
    return SyntheticSample(
        motion=MotionSequence(frame_time=motion.frame_time, frames=frames,
                              hierarchy_ref=motion.hierarchy_ref),
        origin_id=sample.sample_id, label=sample.label,
        sample_id=sample_id, key_frame=sample.key_frame)


def _origin_rng(seed: int, origin_id: str, replica: int) -> np.random.Generator:
    # independent substream per (origin, replica) so generation order and
    # parallelism cannot change the output
    digest = hashlib.sha256(origin_id.encode()).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "big"), replica])


def class_quotas(counts: dict[AffectLabel, int], target_total: int) -> dict[AffectLabel, int]:
    """Balanced per-class totals summing to target_total (remainder goes to
    the first classes in label order)."""
    base, rem = divmod(target_total, len(LABELS))
    quotas = {}
    for i, lab in enumerate(LABELS):
        quotas[lab] = base + (1 if i < rem else 0)
    for lab in LABELS:
        if counts.get(lab, 0) > quotas[lab]:
            raise ValueError(
                f"class {lab.name} already has {counts[lab]} originals, above its "
                f"quota {quotas[lab]}; cannot balance to {target_total}")
    return quotas


def balance_dataset(originals: list[MotionSample], cfg: AugmentConfig,
                    ranges: JointRangeTable) -> list[SyntheticSample]:
    """Top every class up to a uniform share of ``cfg.target_total``.

    Synthetics for a class are generated round-robin over that class's
    originals (sorted by id), maximizing origin diversity; each synthetic
    gets its own RNG substream so the result is bit-reproducible for a
    given seed regardless of scheduling.
    """
    if not originals:
        raise EmptyClassError("no originals to augment")
    by_class: dict[AffectLabel, list[MotionSample]] = {lab: [] for lab in LABELS}
    for s in originals:
        by_class[s.label].append(s)
    for lab in LABELS:
        if not by_class[lab]:
            raise EmptyClassError(f"class {lab.name} has no originals")
        by_class[lab].sort(key=lambda s: s.sample_id)

    counts = {lab: len(by_class[lab]) for lab in LABELS}
    quotas = class_quotas(counts, cfg.target_total)

    synthetics = []
    for lab in LABELS:
        pool = by_class[lab]
        needed = quotas[lab] - counts[lab]
        for i in range(needed):
            origin = pool[i % len(pool)]
            replica = i // len(pool)
            rng = _origin_rng(cfg.seed, origin.sample_id, replica)
            sid = f"{origin.sample_id}_aug{replica:03d}"
            synthetics.append(perturb_sequence(origin, cfg, ranges, rng, sid))
    synthetics.sort(key=lambda s: (s.origin_id, s.sample_id))
    return synthetics


def as_motion_samples(synthetics: list[SyntheticSample],
                      originals: list[MotionSample]) -> list[MotionSample]:
    """View synthetics as dataset samples (hierarchy shared with the origin)."""
    by_id = {s.sample_id: s for s in originals}
    out = []
    for s in synthetics:
        origin = by_id[s.origin_id]
        out.append(MotionSample(sample_id=s.sample_id, label=s.label, motion=s.motion,
                                hierarchy=origin.hierarchy, key_frame=s.key_frame,
                                origin_id=s.origin_id))
    return out
