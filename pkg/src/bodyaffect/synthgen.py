"""Synthetic labelled motion generator.

Produces desk-scale datasets on a canonical 17-joint skeleton where each
affect class gets its own motion dynamics (amplitude, tempo, arm carriage,
jitter), so the whole pipeline is testable without real capture data.  The
dynamic-vs-static contrast between classes is the separability dial: the
default profiles are clearly separable, the control profiles are all
identical (chance-level floor).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bvh import JointSpec, MotionSequence, SkeletonHierarchy
from .dataset import MotionSample
from .features import LABELS, AffectLabel, JointRangeTable

DEFAULT_WINDOW = 101


def canonical_hierarchy() -> SkeletonHierarchy:
    """17 rotating joints (upper body, one collar, arms, legs); the root also
    carries 3 position channels.  T-pose: arms along +/-X, Y up, wrists 2.0
    apart and shoulders 0.5 apart."""
    rot = ("Zrotation", "Xrotation", "Yrotation")
    root_ch = ("Xposition", "Yposition", "Zposition") + rot

    def j(name, parent, offset, children, end=None, channels=rot):
        return JointSpec(name=name, parent=parent, offset=offset, channels=channels,
                         children=tuple(children), end_site_offset=end)

    joints = (
        j("Hips", None, (0.0, 0.0, 0.0), (1, 11, 14), channels=root_ch),
        j("Chest", 0, (0.0, 0.30, 0.0), (2,)),
        j("Collar", 1, (0.0, 0.25, 0.0), (3, 5, 8)),
        j("Neck", 2, (0.0, 0.10, 0.0), (4,)),
        j("Head", 3, (0.0, 0.15, 0.0), (), end=(0.0, 0.15, 0.0)),
        j("LeftShoulder", 2, (0.25, 0.0, 0.0), (6,)),
        j("LeftElbow", 5, (0.35, 0.0, 0.0), (7,)),
        j("LeftWrist", 6, (0.40, 0.0, 0.0), (), end=(0.10, 0.0, 0.0)),
        j("RightShoulder", 2, (-0.25, 0.0, 0.0), (9,)),
        j("RightElbow", 8, (-0.35, 0.0, 0.0), (10,)),
        j("RightWrist", 9, (-0.40, 0.0, 0.0), (), end=(-0.10, 0.0, 0.0)),
        j("LeftHip", 0, (0.12, -0.05, 0.0), (12,)),
        j("LeftKnee", 11, (0.0, -0.45, 0.0), (13,)),
        j("LeftAnkle", 12, (0.0, -0.45, 0.0), (), end=(0.0, -0.05, 0.12)),
        j("RightHip", 0, (-0.12, -0.05, 0.0), (15,)),
        j("RightKnee", 14, (0.0, -0.45, 0.0), (16,)),
        j("RightAnkle", 15, (0.0, -0.45, 0.0), (), end=(0.0, -0.05, 0.12)),
    )
    return SkeletonHierarchy(joints=joints)


@dataclass(frozen=True)
class SynthClassProfile:
    """Motion dynamics of one affect class."""

    label: AffectLabel
    base_amplitude: float    # degrees of sinusoidal swing
    frequency: float         # cycles per window
    arm_raise_bias: float    # degrees added to shoulder carriage (+ raises arms)
    jitter: float            # per-frame noise, degrees

    def __post_init__(self):
        if self.base_amplitude < 0 or self.jitter < 0:
            raise ValueError("amplitude and jitter must be non-negative")


def default_profiles() -> dict[AffectLabel, SynthClassProfile]:
    """Separable defaults: triumphant is fast and arms-up, concentrating is
    near static, frustrated is jerky, defeated droops slowly."""
    return {
        AffectLabel.CONCENTRATING: SynthClassProfile(AffectLabel.CONCENTRATING, 1.5, 0.5, 0.0, 0.3),
        AffectLabel.TRIUMPHANT: SynthClassProfile(AffectLabel.TRIUMPHANT, 35.0, 2.0, 55.0, 2.0),
        AffectLabel.FRUSTRATED: SynthClassProfile(AffectLabel.FRUSTRATED, 20.0, 5.0, -10.0, 5.0),
        AffectLabel.DEFEATED: SynthClassProfile(AffectLabel.DEFEATED, 6.0, 1.0, -45.0, 1.0),
    }


def control_profiles() -> dict[AffectLabel, SynthClassProfile]:
    """Degenerate profiles: every class produces the identical frozen
    sequence, so any classifier can only reach chance accuracy.  Used to
    detect evaluation leaks."""
    return {lab: SynthClassProfile(lab, 0.0, 0.0, 0.0, 0.0) for lab in LABELS}


# how strongly each joint follows the class swing (arms most, spine least)
_JOINT_GAIN = {
    "Hips": 0.1, "Chest": 0.3, "Collar": 0.15, "Neck": 0.4, "Head": 0.4,
    "LeftShoulder": 1.0, "LeftElbow": 0.9, "LeftWrist": 0.7,
    "RightShoulder": 1.0, "RightElbow": 0.9, "RightWrist": 0.7,
    "LeftHip": 0.3, "LeftKnee": 0.35, "LeftAnkle": 0.2,
    "RightHip": 0.3, "RightKnee": 0.35, "RightAnkle": 0.2,
}


def generate_dataset(profiles: dict[AffectLabel, SynthClassProfile] | None = None,
                     samples_per_class: int = 30,
                     window_len: int = DEFAULT_WINDOW,
                     seed: int = 0,
                     frame_time: float = 1.0 / 60.0) -> list[MotionSample]:
    """Deterministic-by-seed sinusoidal trajectories on the canonical
    skeleton, one key frame at the window center per sample."""
    if profiles is None:
        profiles = default_profiles()
    missing = set(LABELS) - set(profiles)
    if missing:
        raise ValueError(f"profiles missing classes: {sorted(m.name for m in missing)}")

    hierarchy = canonical_hierarchy()
    ranges = JointRangeTable.default()
    slices = hierarchy.channel_slices()
    pos_cols = hierarchy.position_columns()
    T = window_len
    t = np.arange(T)
    samples = []
    for c, label in enumerate(LABELS):
        p = profiles[label]
        for i in range(samples_per_class):
            rng = np.random.default_rng([seed, c, i])
            frames = np.zeros((T, hierarchy.total_channels))
            frames[:, pos_cols["Y"]] = 0.95
            frames[:, pos_cols["X"]] = 0.02 * np.sin(2 * np.pi * t / T + rng.uniform(0, 2 * np.pi))
            for idx, joint in enumerate(hierarchy.joints):
                gain = _JOINT_GAIN[joint.name]
                cols, axes = hierarchy.rotation_columns(idx)
                for col, axis in zip(cols, axes):
                    amp = p.base_amplitude * gain * rng.uniform(0.7, 1.0)
                    phase = rng.uniform(0, 2 * np.pi)
                    wave = amp * np.sin(2 * np.pi * p.frequency * t / T + phase)
                    if p.jitter > 0:
                        wave = wave + rng.normal(0.0, p.jitter, size=T)
                    bias = 0.0
                    if axis == "Z" and joint.name == "LeftShoulder":
                        bias = p.arm_raise_bias
                    elif axis == "Z" and joint.name == "RightShoulder":
                        bias = -p.arm_raise_bias
                    lo, hi = ranges.lookup(joint.name, axis)
                    frames[:, col] = np.clip(bias + wave, lo, hi)
            motion = MotionSequence(frame_time=frame_time, frames=frames,
                                    hierarchy_ref=hierarchy.signature())
            samples.append(MotionSample(sample_id=f"{label.name.lower()}_{i:03d}",
                                        label=label, motion=motion, hierarchy=hierarchy,
                                        key_frame=T // 2))
    return samples
