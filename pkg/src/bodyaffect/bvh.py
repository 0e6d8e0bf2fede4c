"""BVH motion-capture I/O and forward kinematics.

Parses BioVision Hierarchy documents into a joint tree plus per-frame
channel values, serializes them back losslessly, and computes world-space
joint positions.  Angles stay in degrees everywhere; conversion to radians
happens only inside the trig kernels.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

POSITION_TAGS = ("Xposition", "Yposition", "Zposition")
ROTATION_TAGS = ("Xrotation", "Yrotation", "Zrotation")


class BvhError(ValueError):
    """Base class for malformed BVH input."""


class BvhSyntaxError(BvhError):
    """Malformed tokens, braces, or keywords."""


class MissingSectionError(BvhError):
    """HIERARCHY or MOTION section absent."""


class ChannelMismatchError(BvhError):
    """A motion line carries a different value count than the declared channels."""


class FrameCountError(BvhError):
    """Declared frame count disagrees with the number of motion lines."""


@dataclass(frozen=True)
class JointSpec:
    """One joint of the skeleton tree.

    ``channels`` keeps the exact declaration order from the file; for
    rotations that order defines the Euler composition.  End sites carry no
    channels and are stored on their parent as ``end_site_offset``.
    """

    name: str
    parent: int | None
    offset: tuple[float, float, float]
    channels: tuple[str, ...]
    children: tuple[int, ...] = ()
    end_site_offset: tuple[float, float, float] | None = None

    @property
    def rotation_order(self) -> tuple[str, ...]:
        return tuple(tag[0] for tag in self.channels if tag.endswith("rotation"))


@dataclass(frozen=True)
class SkeletonHierarchy:
    """Ordered joint list (parents before children) with channel layout."""

    joints: tuple[JointSpec, ...]
    root_index: int = 0

    def __post_init__(self):
        names = [j.name for j in self.joints]
        if len(set(names)) != len(names):
            raise BvhSyntaxError("duplicate joint names in hierarchy")
        roots = [i for i, j in enumerate(self.joints) if j.parent is None]
        if len(roots) != 1:
            raise BvhSyntaxError(f"expected exactly one root joint, found {len(roots)}")
        for i, j in enumerate(self.joints):
            if j.parent is not None and j.parent >= i:
                raise BvhSyntaxError("joint parents must precede children in declaration order")
            n_rot = sum(1 for t in j.channels if t.endswith("rotation"))
            n_pos = sum(1 for t in j.channels if t.endswith("position"))
            if n_rot != 3 or n_pos not in (0, 3) or n_rot + n_pos != len(j.channels):
                raise BvhSyntaxError(f"joint {j.name!r} must declare 3 rotation channels "
                                     f"(plus optionally 3 position channels), got {j.channels}")
            if n_pos and i != self.root_index:
                raise BvhSyntaxError(f"only the root may carry position channels, not {j.name!r}")

    @property
    def num_joints(self) -> int:
        return len(self.joints)

    @property
    def total_channels(self) -> int:
        return sum(len(j.channels) for j in self.joints)

    def channel_slices(self) -> list[tuple[int, int]]:
        """Per-joint (start, stop) into a frame row, in joint order."""
        out, at = [], 0
        for j in self.joints:
            out.append((at, at + len(j.channels)))
            at += len(j.channels)
        return out

    def joint_index(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(f"no joint named {name!r}")

    def rotation_columns(self, joint: int) -> tuple[list[int], tuple[str, ...]]:
        """Frame-column indices of a joint's rotation channels plus their axis letters."""
        start, _ = self.channel_slices()[joint]
        cols, axes = [], []
        for k, tag in enumerate(self.joints[joint].channels):
            if tag.endswith("rotation"):
                cols.append(start + k)
                axes.append(tag[0])
        return cols, tuple(axes)

    def position_columns(self) -> dict[str, int]:
        """Frame-column index per root position axis letter ('X','Y','Z')."""
        start, _ = self.channel_slices()[self.root_index]
        out = {}
        for k, tag in enumerate(self.joints[self.root_index].channels):
            if tag.endswith("position"):
                out[tag[0]] = start + k
        return out

    def signature(self) -> str:
        """Stable short hash of the structure (names, tree, offsets, channels)."""
        h = hashlib.sha256()
        for j in self.joints:
            h.update(repr((j.name, j.parent, j.offset, j.channels, j.end_site_offset)).encode())
        return h.hexdigest()[:16]


@dataclass
class MotionSequence:
    """Per-frame channel values for one skeleton.

    ``frames`` is (T, C) with C = the hierarchy's total channel count;
    rotations in degrees, positions in the file's length units.
    """

    frame_time: float
    frames: np.ndarray
    hierarchy_ref: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ChannelMismatchError("motion needs at least one frame of channel values")
        if self.frame_time <= 0:
            raise BvhError(f"frame time must be positive, got {self.frame_time}")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class PoseFrame:
    """World-space joint positions plus the raw per-joint Euler angles (degrees)."""

    positions: np.ndarray   # (J, 3)
    rotations: np.ndarray   # (J, 3), in each joint's declared channel order


# ---------------------------------------------------------------------------
# parsing

def parse_bvh(text: str) -> tuple[SkeletonHierarchy, MotionSequence]:
    """Parse a complete BVH document into hierarchy and motion.

    Raises MissingSectionError, BvhSyntaxError, ChannelMismatchError or
    FrameCountError on malformed input.
    """
    lines = text.splitlines()
    upper = [ln.strip() for ln in lines]
    try:
        motion_at = upper.index("MOTION")
    except ValueError:
        raise MissingSectionError("no MOTION section") from None
    if "HIERARCHY" not in upper[:motion_at]:
        raise MissingSectionError("no HIERARCHY section")

    tokens = "\n".join(lines[:motion_at]).split()
    hierarchy = _parse_hierarchy(tokens)
    motion = _parse_motion(lines[motion_at + 1:], hierarchy)
    return hierarchy, motion


class _TokenStream:
    def __init__(self, tokens):
        self.tokens = tokens
        self.at = 0

    def next(self) -> str:
        if self.at >= len(self.tokens):
            raise BvhSyntaxError("unexpected end of hierarchy section")
        tok = self.tokens[self.at]
        self.at += 1
        return tok

    def expect(self, want: str) -> None:
        got = self.next()
        if got != want:
            raise BvhSyntaxError(f"expected {want!r}, got {got!r}")

    def peek(self) -> str | None:
        return self.tokens[self.at] if self.at < len(self.tokens) else None

    def floats(self, n: int) -> tuple[float, ...]:
        out = []
        for _ in range(n):
            tok = self.next()
            try:
                out.append(float(tok))
            except ValueError:
                raise BvhSyntaxError(f"expected a number, got {tok!r}") from None
        return tuple(out)


def _parse_hierarchy(tokens: list[str]) -> SkeletonHierarchy:
    ts = _TokenStream(tokens)
    ts.expect("HIERARCHY")
    ts.expect("ROOT")
    joints: list[dict] = []
    _parse_joint(ts, joints, parent=None)
    if ts.peek() is not None:
        raise BvhSyntaxError(f"trailing tokens after hierarchy: {ts.peek()!r}")
    specs = []
    for j in joints:
        specs.append(JointSpec(name=j["name"], parent=j["parent"], offset=j["offset"],
                               channels=j["channels"], children=tuple(j["children"]),
                               end_site_offset=j["end_site"]))
    return SkeletonHierarchy(joints=tuple(specs))


def _parse_joint(ts: _TokenStream, joints: list[dict], parent: int | None) -> None:
    name = ts.next()
    if name in ("{", "}"):
        raise BvhSyntaxError("joint name missing")
    index = len(joints)
    joints.append({"name": name, "parent": parent, "offset": None, "channels": None,
                   "children": [], "end_site": None})
    if parent is not None:
        joints[parent]["children"].append(index)
    ts.expect("{")
    ts.expect("OFFSET")
    joints[index]["offset"] = ts.floats(3)
    ts.expect("CHANNELS")
    try:
        n = int(ts.next())
    except ValueError:
        raise BvhSyntaxError("CHANNELS must declare a count") from None
    tags = tuple(ts.next() for _ in range(n))
    for tag in tags:
        if tag not in POSITION_TAGS + ROTATION_TAGS:
            raise BvhSyntaxError(f"unknown channel tag {tag!r}")
    joints[index]["channels"] = tags
    while True:
        tok = ts.next()
        if tok == "}":
            return
        if tok == "JOINT":
            _parse_joint(ts, joints, parent=index)
        elif tok == "End":
            ts.expect("Site")
            ts.expect("{")
            ts.expect("OFFSET")
            joints[index]["end_site"] = ts.floats(3)
            ts.expect("}")
        else:
            raise BvhSyntaxError(f"unexpected token {tok!r} inside joint {name!r}")


def _parse_motion(lines: list[str], hierarchy: SkeletonHierarchy) -> MotionSequence:
    body = [ln.strip() for ln in lines if ln.strip()]
    if len(body) < 2 or not body[0].startswith("Frames:") or not body[1].startswith("Frame Time:"):
        raise MissingSectionError("MOTION must declare 'Frames:' and 'Frame Time:'")
    try:
        declared = int(body[0].split(":", 1)[1])
        frame_time = float(body[1].split(":", 1)[1])
    except ValueError:
        raise BvhSyntaxError("malformed Frames:/Frame Time: declaration") from None

    frame_lines = body[2:]
    if len(frame_lines) != declared:
        raise FrameCountError(f"declared {declared} frames, found {len(frame_lines)} motion lines")
    if declared < 1:
        raise FrameCountError("motion must contain at least one frame")

    C = hierarchy.total_channels
    frames = np.empty((declared, C))
    for t, ln in enumerate(frame_lines):
        vals = ln.split()
        if len(vals) != C:
            raise ChannelMismatchError(
                f"frame {t} has {len(vals)} values, hierarchy declares {C} channels")
        try:
            frames[t] = [float(v) for v in vals]
        except ValueError:
            raise BvhSyntaxError(f"non-numeric value in frame {t}") from None
    return MotionSequence(frame_time=frame_time, frames=frames,
                          hierarchy_ref=hierarchy.signature())


# ---------------------------------------------------------------------------
# serialization

def _fmt(x: float) -> str:
    # repr round-trips exactly through float(); %.6f would lose precision
    return repr(float(x))


def serialize_bvh(hierarchy: SkeletonHierarchy, motion: MotionSequence) -> str:
    """Render hierarchy + motion back to BVH text, losslessly."""
    out = ["HIERARCHY"]

    def emit(idx: int, depth: int) -> None:
        j = hierarchy.joints[idx]
        pad = "\t" * depth
        kw = "ROOT" if j.parent is None else "JOINT"
        out.append(f"{pad}{kw} {j.name}")
        out.append(f"{pad}{{")
        out.append(f"{pad}\tOFFSET {' '.join(_fmt(v) for v in j.offset)}")
        out.append(f"{pad}\tCHANNELS {len(j.channels)} {' '.join(j.channels)}")
        for child in j.children:
            emit(child, depth + 1)
        if j.end_site_offset is not None:
            out.append(f"{pad}\tEnd Site")
            out.append(f"{pad}\t{{")
            out.append(f"{pad}\t\tOFFSET {' '.join(_fmt(v) for v in j.end_site_offset)}")
            out.append(f"{pad}\t}}")
        out.append(f"{pad}}}")

    emit(hierarchy.root_index, 0)
    out.append("MOTION")
    out.append(f"Frames: {motion.num_frames}")
    out.append(f"Frame Time: {_fmt(motion.frame_time)}")
    for row in motion.frames:
        out.append(" ".join(_fmt(v) for v in row))
    return "\n".join(out) + "\n"


def load_bvh(path) -> tuple[SkeletonHierarchy, MotionSequence]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_bvh(f.read())


def save_bvh(path, hierarchy: SkeletonHierarchy, motion: MotionSequence) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_bvh(hierarchy, motion))


# ---------------------------------------------------------------------------
# forward kinematics

def _axis_rotations(axis: str, degrees: np.ndarray) -> np.ndarray:
    """Rotation matrices (..., 3, 3) about a principal axis, right-handed,
    column-vector convention."""
    rad = np.deg2rad(degrees)
    c, s = np.cos(rad), np.sin(rad)
    R = np.zeros(degrees.shape + (3, 3))
    if axis == "X":
        R[..., 0, 0] = 1
        R[..., 1, 1] = c
        R[..., 1, 2] = -s
        R[..., 2, 1] = s
        R[..., 2, 2] = c
    elif axis == "Y":
        R[..., 0, 0] = c
        R[..., 0, 2] = s
        R[..., 1, 1] = 1
        R[..., 2, 0] = -s
        R[..., 2, 2] = c
    elif axis == "Z":
        R[..., 0, 0] = c
        R[..., 0, 1] = -s
        R[..., 1, 0] = s
        R[..., 1, 1] = c
        R[..., 2, 2] = 1
    else:
        raise ValueError(f"unknown rotation axis {axis!r}")
    return R


def fk_sequence(hierarchy: SkeletonHierarchy, frames: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward kinematics over a whole (T, C) frame block.

    Returns (positions, rotations): (T, J, 3) world joint positions and the
    raw Euler angles per joint in declared channel order.  Rotations compose
    intrinsically in declaration order; world transform of a joint is its
    parent's cumulative rotation applied to the joint offset.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=float))
    if frames.shape[1] != hierarchy.total_channels:
        raise ChannelMismatchError(
            f"frame width {frames.shape[1]} != declared channels {hierarchy.total_channels}")
    T = frames.shape[0]
    J = hierarchy.num_joints
    positions = np.zeros((T, J, 3))
    rotations = np.zeros((T, J, 3))
    world_R = [None] * J

    pos_cols = hierarchy.position_columns()
    for idx, joint in enumerate(hierarchy.joints):
        cols, axes = hierarchy.rotation_columns(idx)
        angles = frames[:, cols]                       # (T, 3) in declared order
        rotations[:, idx, :] = angles
        local = _axis_rotations(axes[0], angles[:, 0])
        for k in range(1, len(axes)):
            local = local @ _axis_rotations(axes[k], angles[:, k])
        offset = np.asarray(joint.offset)
        if joint.parent is None:
            root_pos = np.zeros((T, 3))
            for a, axis in enumerate("XYZ"):
                if axis in pos_cols:
                    root_pos[:, a] = frames[:, pos_cols[axis]]
            positions[:, idx, :] = root_pos + offset
            world_R[idx] = local
        else:
            pR = world_R[joint.parent]
            positions[:, idx, :] = positions[:, joint.parent, :] + pR @ offset
            world_R[idx] = pR @ local
    return positions, rotations


def forward_kinematics(hierarchy: SkeletonHierarchy, frame: np.ndarray) -> PoseFrame:
    """World-space pose for a single channel row."""
    positions, rotations = fk_sequence(hierarchy, np.asarray(frame, dtype=float)[None, :])
    return PoseFrame(positions=positions[0], rotations=rotations[0])


def window_around(motion: MotionSequence, center: int, radius: int) -> MotionSequence:
    """Extract 2*radius+1 frames centered on ``center``, clamping at the
    sequence boundaries (edge frames repeat; zero frames would not be valid
    poses)."""
    T = motion.num_frames
    if not 0 <= center < T:
        raise IndexError(f"center {center} outside sequence of {T} frames")
    idx = np.clip(np.arange(center - radius, center + radius + 1), 0, T - 1)
    return replace(motion, frames=motion.frames[idx].copy())
