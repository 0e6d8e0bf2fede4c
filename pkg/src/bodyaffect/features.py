"""Temporal feature extraction from skeleton motion windows.

Two feature families come out of a 101-frame window around a key pose:

* per-frame local vectors (fed to the recurrent branch): raw or
  range-normalized joint rotations plus a 33-entry movement block of
  posture descriptors, their frame-to-frame deltas, and limb angular
  speeds;
* one 132-entry global vector (fed to the dense branch): mean/std/min/max
  of the descriptor, angular-speed, and descriptor-delta series over the
  whole window.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import numpy as np

from .bvh import MotionSequence, SkeletonHierarchy, fk_sequence, window_around


class UnknownJointError(KeyError):
    """A schema names a joint the hierarchy does not contain."""


class DegenerateSkeletonError(ValueError):
    """Pose geometry makes a descriptor undefined (e.g. coincident shoulders)."""


class AffectLabel(Enum):
    CONCENTRATING = 0
    TRIUMPHANT = 1
    FRUSTRATED = 2
    DEFEATED = 3

    @classmethod
    def parse(cls, text: str) -> "AffectLabel":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown affect label {text!r}") from None


LABELS = tuple(AffectLabel)
NUM_CLASSES = len(LABELS)

# schema order of the posture descriptors; the last five extend the basic
# posture set (pose difference, pose symmetry, two directed arm symmetries,
# arms-shoulders openness)
POSTURE_DESCRIPTORS = (
    "hand_hand_distance",
    "left_hand_head_distance",
    "right_hand_head_distance",
    "left_hand_hip_distance",
    "right_hand_hip_distance",
    "torso_lean_angle",
    "body_openness",
    "pose_difference",
    "pose_symmetry",
    "directed_symmetry_left_arm",
    "directed_symmetry_right_arm",
    "arms_shoulders_openness",
)

STAT_TAGS = ("mean", "std", "min", "max")

DEFAULT_LANDMARKS = {
    "head": "Head",
    "neck": "Neck",
    "left_hand": "LeftWrist",
    "right_hand": "RightWrist",
    "left_shoulder": "LeftShoulder",
    "right_shoulder": "RightShoulder",
    "left_hip": "LeftHip",
    "right_hip": "RightHip",
}

DEFAULT_SYMMETRY_PAIRS = (
    ("LeftShoulder", "RightShoulder"),
    ("LeftElbow", "RightElbow"),
    ("LeftWrist", "RightWrist"),
    ("LeftHip", "RightHip"),
    ("LeftKnee", "RightKnee"),
    ("LeftAnkle", "RightAnkle"),
)

DEFAULT_LIMB_JOINTS = (
    "LeftShoulder", "LeftElbow", "LeftWrist",
    "RightShoulder", "RightElbow", "RightWrist",
    "LeftKnee", "RightKnee", "Neck",
)

DEFAULT_ROTATION_JOINTS = (
    "Hips", "Chest", "Collar", "Neck", "Head",
    "LeftShoulder", "LeftElbow", "LeftWrist",
    "RightShoulder", "RightElbow", "RightWrist",
    "LeftHip", "LeftKnee", "LeftAnkle",
    "RightHip", "RightKnee", "RightAnkle",
)


@dataclass(frozen=True)
class FeatureSchema:
    """Names everything the extractor reads from a skeleton.

    The default instance reproduces the 132-entry global layout:
    12 descriptors * 4 stats + 9 limb speeds * 4 + 12 deltas * 4.
    """

    posture_descriptors: tuple[str, ...] = POSTURE_DESCRIPTORS
    limb_joints: tuple[str, ...] = DEFAULT_LIMB_JOINTS
    stats: tuple[str, ...] = STAT_TAGS
    rotation_joints: tuple[str, ...] = DEFAULT_ROTATION_JOINTS
    landmarks: tuple[tuple[str, str], ...] = tuple(sorted(DEFAULT_LANDMARKS.items()))
    symmetry_pairs: tuple[tuple[str, str], ...] = DEFAULT_SYMMETRY_PAIRS
    up_axis: int = 1  # world Y

    def __post_init__(self):
        unknown = set(self.posture_descriptors) - set(POSTURE_DESCRIPTORS)
        if unknown:
            raise ValueError(f"unknown posture descriptors: {sorted(unknown)}")
        unknown_stats = set(self.stats) - set(STAT_TAGS)
        if unknown_stats:
            raise ValueError(f"unknown stats: {sorted(unknown_stats)}")

    @property
    def landmark(self) -> dict[str, str]:
        return dict(self.landmarks)

    @property
    def global_dim(self) -> int:
        return (2 * len(self.posture_descriptors) + len(self.limb_joints)) * len(self.stats)

    @property
    def movement_dim(self) -> int:
        return 2 * len(self.posture_descriptors) + len(self.limb_joints)

    @property
    def rotation_dim(self) -> int:
        return 3 * len(self.rotation_joints)

    def to_dict(self) -> dict:
        return {
            "posture_descriptors": list(self.posture_descriptors),
            "limb_joints": list(self.limb_joints),
            "stats": list(self.stats),
            "rotation_joints": list(self.rotation_joints),
            "landmarks": {k: v for k, v in self.landmarks},
            "symmetry_pairs": [list(p) for p in self.symmetry_pairs],
            "up_axis": self.up_axis,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(
            posture_descriptors=tuple(d["posture_descriptors"]),
            limb_joints=tuple(d["limb_joints"]),
            stats=tuple(d["stats"]),
            rotation_joints=tuple(d["rotation_joints"]),
            landmarks=tuple(sorted(d["landmarks"].items())),
            symmetry_pairs=tuple(tuple(p) for p in d["symmetry_pairs"]),
            up_axis=d.get("up_axis", 1),
        )

    def hash(self) -> str:
        """Short stable digest; stored in feature files and model checkpoints
        so mismatched pairings fail loudly."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class FeatureVariant:
    """Which feature blocks a run uses: rotations 'R0' (raw degrees) or 'R1'
    (range-normalized), the movement block 'M1', and the global block 'M0'."""

    rotations: str | None = "R1"       # "R0", "R1", or None
    include_movement: bool = True      # the M1 per-frame block
    include_global: bool = True        # the M0 window-statistics vector

    def __post_init__(self):
        if self.rotations not in (None, "R0", "R1"):
            raise ValueError(f"rotations must be 'R0', 'R1' or None, got {self.rotations!r}")
        if self.rotations is None and not self.include_movement and not self.include_global:
            raise ValueError("variant selects no features at all")

    @property
    def has_local(self) -> bool:
        return self.rotations is not None or self.include_movement

    def local_dim(self, schema: FeatureSchema) -> int:
        d = 0
        if self.rotations is not None:
            d += schema.rotation_dim
        if self.include_movement:
            d += schema.movement_dim
        return d

    @classmethod
    def parse(cls, text: str) -> "FeatureVariant":
        """Parse tags like 'R1+M1,M0', 'R0', 'M0', 'R1+M1'."""
        rotations = None
        movement = False
        global_ = False
        for part in text.replace(",", "+").split("+"):
            part = part.strip().upper()
            if not part:
                continue
            if part in ("R0", "R1"):
                if rotations is not None:
                    raise ValueError(f"variant {text!r} names two rotation sets")
                rotations = part
            elif part == "M1":
                movement = True
            elif part == "M0":
                global_ = True
            else:
                raise ValueError(f"unknown feature tag {part!r} in {text!r}")
        return cls(rotations=rotations, include_movement=movement, include_global=global_)

    def __str__(self) -> str:
        local = "+".join(p for p in (self.rotations, "M1" if self.include_movement else None) if p)
        parts = [p for p in (local, "M0" if self.include_global else None) if p]
        return ",".join(parts)


@dataclass(frozen=True)
class FeatureWindow:
    """Extracted features for one sample: per-frame local matrix and/or the
    global vector, plus the label."""

    local: np.ndarray | None          # (T, d_local) or None
    global_vec: np.ndarray | None     # (global_dim,) or None
    label: AffectLabel
    source_id: str
    feature_set_tag: str


class JointRangeTable:
    """Per joint, per rotation axis (min, max) in degrees; used to normalize
    R1 features and to clamp augmentation noise into plausible poses."""

    def __init__(self, ranges: dict[str, dict[str, tuple[float, float]]]):
        for joint, axes in ranges.items():
            for axis, (lo, hi) in axes.items():
                if not lo < hi:
                    raise ValueError(f"range for {joint}.{axis} must have min < max, got {lo}, {hi}")
        self.ranges = {j: {a: (float(lo), float(hi)) for a, (lo, hi) in axes.items()}
                       for j, axes in ranges.items()}

    def lookup(self, joint: str, axis: str) -> tuple[float, float]:
        try:
            return self.ranges[joint][axis]
        except KeyError:
            raise UnknownJointError(f"no range for joint {joint!r} axis {axis!r}") from None

    def to_dict(self) -> dict:
        return {j: {a: list(r) for a, r in axes.items()} for j, axes in self.ranges.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "JointRangeTable":
        return cls({j: {a: tuple(r) for a, r in axes.items()} for j, axes in d.items()})

    @classmethod
    def load(cls, path) -> "JointRangeTable":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @classmethod
    def default(cls) -> "JointRangeTable":
        """Coarse anatomical limits shipped with the package."""
        text = resources.files("bodyaffect.data").joinpath("joint_ranges.json").read_text()
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_motions(cls, hierarchy: SkeletonHierarchy,
                     motions: list[MotionSequence],
                     margin_deg: float = 1.0) -> "JointRangeTable":
        """Observed per-channel min/max over a set of sequences (use training
        data only, never test data), padded by ``margin_deg``."""
        stacked = np.concatenate([m.frames for m in motions], axis=0)
        ranges: dict[str, dict[str, tuple[float, float]]] = {}
        for idx, joint in enumerate(hierarchy.joints):
            cols, axes = hierarchy.rotation_columns(idx)
            ranges[joint.name] = {}
            for col, axis in zip(cols, axes):
                lo = float(stacked[:, col].min()) - margin_deg
                hi = float(stacked[:, col].max()) + margin_deg
                ranges[joint.name][axis] = (lo, hi)
        return cls(ranges)


# ---------------------------------------------------------------------------
# descriptors

def _landmark_indices(schema: FeatureSchema, hierarchy: SkeletonHierarchy) -> dict[str, int]:
    out = {}
    for role, joint in schema.landmark.items():
        try:
            out[role] = hierarchy.joint_index(joint)
        except KeyError:
            raise UnknownJointError(f"landmark {role!r} names missing joint {joint!r}") from None
    return out


def _joint_indices(names, hierarchy: SkeletonHierarchy) -> list[int]:
    out = []
    for n in names:
        try:
            out.append(hierarchy.joint_index(n))
        except KeyError:
            raise UnknownJointError(f"schema names missing joint {n!r}") from None
    return out


def _descriptor_series(positions: np.ndarray, neutral: np.ndarray,
                       schema: FeatureSchema, hierarchy: SkeletonHierarchy) -> np.ndarray:
    """Posture descriptors for every frame: (T, 12) given (T, J, 3) world
    positions and a (J, 3) neutral pose."""
    lm = _landmark_indices(schema, hierarchy)
    pairs = [(_joint_indices([a], hierarchy)[0], _joint_indices([b], hierarchy)[0])
             for a, b in schema.symmetry_pairs]

    T = positions.shape[0]
    lh, rh = positions[:, lm["left_hand"]], positions[:, lm["right_hand"]]
    head = positions[:, lm["head"]]
    neck = positions[:, lm["neck"]]
    lhip, rhip = positions[:, lm["left_hip"]], positions[:, lm["right_hip"]]
    lsh, rsh = positions[:, lm["left_shoulder"]], positions[:, lm["right_shoulder"]]

    hip_center = 0.5 * (lhip + rhip)
    lateral = lhip - rhip
    lat_norm = np.linalg.norm(lateral, axis=1, keepdims=True)
    if np.any(lat_norm < 1e-12):
        raise DegenerateSkeletonError("hip joints coincide; sagittal plane undefined")
    lateral = lateral / lat_norm

    def dist(a, b):
        return np.linalg.norm(a - b, axis=1)

    shoulder_dist = dist(lsh, rsh)
    if np.any(shoulder_dist < 1e-12):
        raise DegenerateSkeletonError("shoulder joints coincide; openness ratio undefined")

    up = np.zeros(3)
    up[schema.up_axis] = 1.0
    torso = neck - hip_center
    torso_len = np.linalg.norm(torso, axis=1)
    torso_len = np.where(torso_len < 1e-12, 1.0, torso_len)
    lean = np.degrees(np.arccos(np.clip(torso @ up / torso_len, -1.0, 1.0)))

    bbox = positions.max(axis=1) - positions.min(axis=1)
    openness = np.linalg.norm(bbox, axis=1)

    pose_diff = np.linalg.norm(positions - neutral[None], axis=2).mean(axis=1)

    def mirror(points):
        # reflect across the sagittal plane through the hip center
        rel = points - hip_center
        off = np.sum(rel * lateral, axis=1, keepdims=True)
        return points - 2.0 * off * lateral

    sym = np.zeros(T)
    for a, b in pairs:
        sym += dist(positions[:, a], mirror(positions[:, b]))
    sym /= len(pairs)

    directed_l = np.sum((lh - hip_center) * lateral, axis=1)
    directed_r = np.sum((rh - hip_center) * lateral, axis=1)

    values = {
        "hand_hand_distance": dist(lh, rh),
        "left_hand_head_distance": dist(lh, head),
        "right_hand_head_distance": dist(rh, head),
        "left_hand_hip_distance": dist(lh, lhip),
        "right_hand_hip_distance": dist(rh, rhip),
        "torso_lean_angle": lean,
        "body_openness": openness,
        "pose_difference": pose_diff,
        "pose_symmetry": sym,
        "directed_symmetry_left_arm": directed_l,
        "directed_symmetry_right_arm": directed_r,
        "arms_shoulders_openness": dist(lh, rh) / shoulder_dist,
    }
    return np.stack([values[tag] for tag in schema.posture_descriptors], axis=1)


def posture_descriptors(pose, neutral, schema: FeatureSchema,
                        hierarchy: SkeletonHierarchy) -> np.ndarray:
    """12 posture descriptors for a single pose (distances in skeleton length
    units, angles in degrees)."""
    return _descriptor_series(pose.positions[None], neutral.positions,
                              schema, hierarchy)[0]


def _angular_speed_series(rotations: np.ndarray, schema: FeatureSchema,
                          hierarchy: SkeletonHierarchy) -> np.ndarray:
    """(T, n_limb) absolute rotation change per frame, summed over the three
    axes; the final row repeats the last computable one so the matrix stays
    rectangular."""
    idx = _joint_indices(schema.limb_joints, hierarchy)
    limb = rotations[:, idx, :]                     # (T, n, 3)
    steps = np.abs(np.diff(limb, axis=0)).sum(axis=2)
    return np.vstack([steps, steps[-1:]])


def _pad_last(series: np.ndarray) -> np.ndarray:
    """Frame deltas with the final row copied from the previous one."""
    d = np.diff(series, axis=0)
    return np.vstack([d, d[-1:]])


def _movement_block(positions, rotations, schema, hierarchy) -> np.ndarray:
    D = _descriptor_series(positions, positions[0], schema, hierarchy)
    deltas = _pad_last(D)
    speeds = _angular_speed_series(rotations, schema, hierarchy)
    return np.concatenate([D, deltas, speeds], axis=1)


def _rotation_block(rotations: np.ndarray, schema: FeatureSchema,
                    hierarchy: SkeletonHierarchy,
                    ranges: JointRangeTable | None, normalized: bool) -> np.ndarray:
    idx = _joint_indices(schema.rotation_joints, hierarchy)
    T = rotations.shape[0]
    out = np.empty((T, 3 * len(idx)))
    for k, (name, j) in enumerate(zip(schema.rotation_joints, idx)):
        block = rotations[:, j, :].copy()
        if normalized:
            _, axes = hierarchy.rotation_columns(j)
            for a, axis in enumerate(axes):
                lo, hi = ranges.lookup(name, axis)
                block[:, a] = np.clip((block[:, a] - lo) / (hi - lo), 0.0, 1.0)
        out[:, 3 * k:3 * k + 3] = block
    return out


def local_features(window: MotionSequence, hierarchy: SkeletonHierarchy,
                   schema: FeatureSchema, ranges: JointRangeTable | None,
                   variant: FeatureVariant) -> np.ndarray:
    """Per-frame feature matrix (T, d_local) for the recurrent branch.

    Row layout: rotation block first (if the variant selects R0/R1), then the
    33-entry movement block (12 descriptors, 12 deltas, 9 angular speeds).
    """
    if window.num_frames < 2:
        raise ValueError("local features need at least two frames")
    if not variant.has_local:
        raise ValueError(f"variant {variant} has no local features")
    if variant.rotations == "R1" and ranges is None:
        raise ValueError("R1 normalization needs a JointRangeTable")
    positions, rotations = fk_sequence(hierarchy, window.frames)
    blocks = []
    if variant.rotations is not None:
        blocks.append(_rotation_block(rotations, schema, hierarchy, ranges,
                                      normalized=variant.rotations == "R1"))
    if variant.include_movement:
        blocks.append(_movement_block(positions, rotations, schema, hierarchy))
    return np.concatenate(blocks, axis=1)


def global_features(window: MotionSequence, hierarchy: SkeletonHierarchy,
                    schema: FeatureSchema) -> np.ndarray:
    """Window-level statistics vector (132 entries under the default schema).

    Concatenates, series-major, the (mean, std, min, max) of each posture
    descriptor, each limb angular speed, and each descriptor delta; std is
    the population standard deviation.
    """
    if window.num_frames < 2:
        raise ValueError("global features need at least two frames")
    positions, rotations = fk_sequence(hierarchy, window.frames)
    D = _descriptor_series(positions, positions[0], schema, hierarchy)
    speeds = _angular_speed_series(rotations, schema, hierarchy)
    deltas = _pad_last(D)

    stat_fns = {"mean": lambda s: s.mean(axis=0),
                "std": lambda s: s.std(axis=0),
                "min": lambda s: s.min(axis=0),
                "max": lambda s: s.max(axis=0)}
    out = []
    for block in (D, speeds, deltas):
        stats = np.stack([stat_fns[tag](block) for tag in schema.stats], axis=1)
        out.append(stats.reshape(-1))               # series-major: all stats per series
    return np.concatenate(out)


@dataclass(frozen=True)
class FeatureConfig:
    schema: FeatureSchema = field(default_factory=FeatureSchema)
    variant: FeatureVariant = field(default_factory=FeatureVariant)
    ranges: JointRangeTable | None = None
    window_radius: int = 50


def build_feature_window(motion: MotionSequence, hierarchy: SkeletonHierarchy,
                         key_frame: int, label: AffectLabel,
                         config: FeatureConfig, source_id: str = "") -> FeatureWindow:
    """Window the motion around the key pose and extract the variant's
    feature blocks."""
    w = window_around(motion, key_frame, config.window_radius)
    local = None
    if config.variant.has_local:
        local = local_features(w, hierarchy, config.schema, config.ranges, config.variant)
    global_vec = None
    if config.variant.include_global:
        global_vec = global_features(w, hierarchy, config.schema)
    return FeatureWindow(local=local, global_vec=global_vec, label=label,
                         source_id=source_id, feature_set_tag=str(config.variant))


# ---------------------------------------------------------------------------
# feature file format (one file per variant)
#
#   # bodyaffect-features 1
#   # schema_hash <hex16>
#   # variant <tag>
#   # window_len <T or 0>
#   # local_dim <d or 0>
#   # global_dim <d or 0>
#   # samples <n>
#   sample <id> <label> <origin_id or ->
#   L <d_local floats>      (window_len lines, whitespace separated)
#   G <global_dim floats>   (one line)

FEATURE_FORMAT_VERSION = 1


def write_feature_file(path, windows: list[FeatureWindow], schema: FeatureSchema,
                       origins: dict[str, str] | None = None) -> None:
    """Serialize a set of FeatureWindows (all the same variant) with the
    schema hash in the header; floats are written with repr so readback is
    exact."""
    if not windows:
        raise ValueError("no feature windows to write")
    tags = {w.feature_set_tag for w in windows}
    if len(tags) != 1:
        raise ValueError(f"one file holds one variant, got {sorted(tags)}")
    origins = origins or {}
    first = windows[0]
    T = first.local.shape[0] if first.local is not None else 0
    d_local = first.local.shape[1] if first.local is not None else 0
    d_global = first.global_vec.shape[0] if first.global_vec is not None else 0
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# bodyaffect-features {FEATURE_FORMAT_VERSION}\n")
        f.write(f"# schema_hash {schema.hash()}\n")
        f.write(f"# variant {first.feature_set_tag}\n")
        f.write(f"# window_len {T}\n")
        f.write(f"# local_dim {d_local}\n")
        f.write(f"# global_dim {d_global}\n")
        f.write(f"# samples {len(windows)}\n")
        for w in windows:
            origin = origins.get(w.source_id, "-")
            f.write(f"sample {w.source_id} {w.label.name.lower()} {origin}\n")
            if w.local is not None:
                for row in w.local:
                    f.write("L " + " ".join(repr(float(v)) for v in row) + "\n")
            if w.global_vec is not None:
                f.write("G " + " ".join(repr(float(v)) for v in w.global_vec) + "\n")


def read_feature_file(path) -> tuple[list[FeatureWindow], dict[str, str], dict[str, str]]:
    """Returns (windows, origins, header).  ``origins`` maps synthetic sample
    ids to their source sample id."""
    header: dict[str, str] = {}
    windows: list[FeatureWindow] = []
    origins: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    for ln in lines[:16]:
        if ln.startswith("# ") and len(ln.split()) >= 3:
            _, key, value = ln.split(maxsplit=2)
            header[key] = value
    if header.get("bodyaffect-features") != str(FEATURE_FORMAT_VERSION):
        raise ValueError(f"{path}: not a bodyaffect feature file (missing version header)")
    T = int(header["window_len"])
    d_local = int(header["local_dim"])
    d_global = int(header["global_dim"])
    tag = header["variant"]

    i = 0
    while i < len(lines):
        ln = lines[i]
        i += 1
        if not ln.startswith("sample "):
            continue
        _, sid, label, origin = ln.split()
        local = None
        if d_local:
            rows = []
            for _ in range(T):
                parts = lines[i].split()
                if parts[0] != "L" or len(parts) != d_local + 1:
                    raise ValueError(f"{path}: bad local row for sample {sid}")
                rows.append([float(v) for v in parts[1:]])
                i += 1
            local = np.array(rows)
        global_vec = None
        if d_global:
            parts = lines[i].split()
            if parts[0] != "G" or len(parts) != d_global + 1:
                raise ValueError(f"{path}: bad global row for sample {sid}")
            global_vec = np.array([float(v) for v in parts[1:]])
            i += 1
        if origin != "-":
            origins[sid] = origin
        windows.append(FeatureWindow(local=local, global_vec=global_vec,
                                     label=AffectLabel.parse(label),
                                     source_id=sid, feature_set_tag=tag))
    if len(windows) != int(header["samples"]):
        raise ValueError(f"{path}: header declares {header['samples']} samples, "
                         f"found {len(windows)}")
    return windows, origins, header
