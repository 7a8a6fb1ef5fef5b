"""Domain model: surgeme classes, robots, frames, segments, datasets.

All types here are immutable after construction and safe to share across
concurrent workers.  Invariant checking is split off into
:func:`validate_dataset`, which reports violations as data instead of
raising, so that partially broken datasets can be inspected.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import UnknownClassError

HALF_PI = math.pi / 2.0


class SurgemeClass(enum.IntEnum):
    """The seven peg-transfer gestures, ids 0..6 in task order."""

    APPROACH_PEG = 0
    ALIGN_AND_GRASP = 1
    LIFT_PEG = 2
    GET_TOGETHER = 3
    EXCHANGE = 4
    APPROACH_POLE = 5
    ALIGN_AND_PLACE = 6

    @property
    def canonical_name(self) -> str:
        return _CANONICAL_NAMES[self]


_CANONICAL_NAMES = {
    SurgemeClass.APPROACH_PEG: "ApproachPeg",
    SurgemeClass.ALIGN_AND_GRASP: "AlignAndGrasp",
    SurgemeClass.LIFT_PEG: "LiftPeg",
    SurgemeClass.GET_TOGETHER: "GetTogether",
    SurgemeClass.EXCHANGE: "Exchange",
    SurgemeClass.APPROACH_POLE: "ApproachPole",
    SurgemeClass.ALIGN_AND_PLACE: "AlignAndPlace",
}

# Prose-style aliases seen in annotation files.
_EXTRA_ALIASES = {
    "approach peg": SurgemeClass.APPROACH_PEG,
    "align and grasp": SurgemeClass.ALIGN_AND_GRASP,
    "align & grasp": SurgemeClass.ALIGN_AND_GRASP,
    "grasp": SurgemeClass.ALIGN_AND_GRASP,
    "lift peg": SurgemeClass.LIFT_PEG,
    "lift": SurgemeClass.LIFT_PEG,
    "get together": SurgemeClass.GET_TOGETHER,
    "exchange peg": SurgemeClass.EXCHANGE,
    "approach pole": SurgemeClass.APPROACH_POLE,
    "align and place": SurgemeClass.ALIGN_AND_PLACE,
    "align & place": SurgemeClass.ALIGN_AND_PLACE,
}


def _normalize_name(name: str) -> str:
    return "".join(ch for ch in name.lower() if ch.isalnum())


_NAME_TABLE: dict[str, SurgemeClass] = {}
for _cls, _canon in _CANONICAL_NAMES.items():
    _NAME_TABLE[_normalize_name(_canon)] = _cls
    _NAME_TABLE[_normalize_name(_cls.name)] = _cls
for _alias, _cls in _EXTRA_ALIASES.items():
    _NAME_TABLE[_normalize_name(_alias)] = _cls


def class_from_name(name: str) -> SurgemeClass:
    """Resolve a canonical name or alias, case-insensitively.

    Raises UnknownClassError when the name matches none of the seven
    classes.
    """
    key = _normalize_name(name)
    try:
        return _NAME_TABLE[key]
    except KeyError:
        raise UnknownClassError(f"unknown surgeme name: {name!r}") from None


class Domain(enum.Enum):
    SIM = "sim"
    REAL = "real"

    @classmethod
    def from_text(cls, text: str) -> "Domain":
        return cls(text.strip().lower())


class Outcome(enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"

    @classmethod
    def from_text(cls, text: str) -> "Outcome":
        return cls(text.strip().capitalize())


class OrientationEncoding(enum.Enum):
    """How a raw stream encodes per-arm orientation."""

    ROTATION_MATRIX_9 = "rotmat9"
    QUATERNION_4 = "quat4"
    EULER_RPY_3 = "rpy3"

    @property
    def channel_count(self) -> int:
        return {"rotmat9": 9, "quat4": 4, "rpy3": 3}[self.value]

    @property
    def channel_labels(self) -> tuple[str, ...]:
        if self is OrientationEncoding.ROTATION_MATRIX_9:
            return tuple(f"r{i}{j}" for i in range(3) for j in range(3))
        if self is OrientationEncoding.QUATERNION_4:
            return ("qw", "qx", "qy", "qz")
        return ("roll", "pitch", "yaw")


@dataclass(frozen=True)
class ArmState:
    """One gripper's pose and state in the common feature space.

    position is in meters in the robot base frame; orientation is
    (roll, pitch, yaw) radians, intrinsic Z-Y-X; gripper is in [0, 1]
    with 0 fully closed.
    """

    position: tuple[float, float, float]
    orientation: tuple[float, float, float]
    gripper: float


@dataclass(frozen=True)
class KinFrame:
    """One timestamped bimanual sample; raw_joints kept when recorded."""

    timestamp: float
    left: ArmState
    right: ArmState
    raw_joints: tuple[float, ...] | None = None


@dataclass(frozen=True)
class RawFrame:
    """A parsed kinematics row: timestamp plus all raw channels, lossless."""

    timestamp: float
    channels: tuple[float, ...]


@dataclass(frozen=True)
class RobotProfile:
    """Declares a robot's raw channel layout and its mapping to the
    common feature space.

    Canonical per-arm channel order is position (3), orientation
    (encoding-dependent), gripper (1), then joint angles
    (joint_count / 2 per arm).  channels_per_arm must equal that total.
    """

    name: str
    orientation_encoding: OrientationEncoding
    channels_per_arm: int
    joint_count: int = 0
    workspace_scale: float = 1.0
    domain_default: Domain = Domain.REAL
    gripper_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self) -> None:
        if self.workspace_scale <= 0:
            raise ValueError(f"workspace_scale must be positive, got {self.workspace_scale}")
        if self.joint_count < 0 or self.joint_count % 2 != 0:
            raise ValueError(f"joint_count must be a nonnegative even total, got {self.joint_count}")
        expected = 3 + self.orientation_encoding.channel_count + 1 + self.joint_count // 2
        if self.channels_per_arm != expected:
            raise ValueError(
                f"profile {self.name!r}: channels_per_arm={self.channels_per_arm} "
                f"inconsistent with layout (expected {expected})"
            )
        lo, hi = self.gripper_range
        if not lo < hi:
            raise ValueError(f"gripper_range must satisfy lo < hi, got {self.gripper_range}")

    @property
    def joints_per_arm(self) -> int:
        return self.joint_count // 2

    @property
    def total_channels(self) -> int:
        return 2 * self.channels_per_arm

    def arm_channel_labels(self) -> tuple[str, ...]:
        labels = ("px", "py", "pz") + self.orientation_encoding.channel_labels + ("gripper",)
        labels += tuple(f"j{i}" for i in range(self.joints_per_arm))
        return labels

    def header_fields(self) -> list[str]:
        fields = ["timestamp"]
        for arm in ("left", "right"):
            fields.extend(f"{arm}_{label}" for label in self.arm_channel_labels())
        return fields


@dataclass(frozen=True)
class SurgemeSegment:
    """A labeled, contiguous run of frames from one trial.

    Failed and successful executions share labels; Pass/Fail is carried
    separately and never alters the class.
    """

    label: SurgemeClass
    frames: tuple[KinFrame, ...]
    outcome: Outcome
    domain: Domain
    trial_id: str
    robot: str

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def timestamps(self) -> tuple[float, ...]:
        return tuple(f.timestamp for f in self.frames)


@dataclass
class Dataset:
    """Segments plus the registry resolving each segment's robot name."""

    segments: list[SurgemeSegment]
    profiles: dict[str, RobotProfile] = field(default_factory=dict)

    def domains(self) -> set[Domain]:
        return {s.domain for s in self.segments}

    def by_domain(self, domain: Domain) -> list[SurgemeSegment]:
        return [s for s in self.segments if s.domain == domain]

    def class_counts(self) -> dict[SurgemeClass, int]:
        counts = {c: 0 for c in SurgemeClass}
        for seg in self.segments:
            counts[seg.label] += 1
        return counts


class ViolationKind(enum.Enum):
    UNKNOWN_PROFILE = "unknown-profile"
    NON_MONOTONE_TIMESTAMPS = "non-monotone-timestamps"
    TOO_FEW_FRAMES = "too-few-frames"
    GRIPPER_RANGE = "gripper-range"
    ORIENTATION_RANGE = "orientation-range"
    JOINT_COUNT = "joint-count"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    trial_id: str
    segment_index: int
    message: str


def _arm_states(frame: KinFrame) -> tuple[ArmState, ArmState]:
    return frame.left, frame.right


def validate_dataset(ds: Dataset) -> list[Violation]:
    """Return every invariant violation; empty iff the dataset is well-formed.

    At most one violation per (segment, kind) is reported, naming the
    first offending frame, so corrupting a single field yields exactly
    one violation of the matching kind.
    """
    violations: list[Violation] = []
    for idx, seg in enumerate(ds.segments):
        profile = ds.profiles.get(seg.robot)
        if profile is None:
            violations.append(Violation(
                ViolationKind.UNKNOWN_PROFILE, seg.trial_id, idx,
                f"robot {seg.robot!r} not in profile registry"))
        if seg.n_frames < 2:
            violations.append(Violation(
                ViolationKind.TOO_FEW_FRAMES, seg.trial_id, idx,
                f"segment has {seg.n_frames} frame(s); minimum is 2"))
        ts = seg.timestamps
        for i in range(1, len(ts)):
            if ts[i] <= ts[i - 1]:
                violations.append(Violation(
                    ViolationKind.NON_MONOTONE_TIMESTAMPS, seg.trial_id, idx,
                    f"timestamp {ts[i]!r} at frame {i} does not increase"))
                break
        grip_bad = orient_bad = joints_bad = False
        for i, frame in enumerate(seg.frames):
            for arm_name, arm in zip(("left", "right"), _arm_states(frame)):
                if not grip_bad and not 0.0 <= arm.gripper <= 1.0:
                    violations.append(Violation(
                        ViolationKind.GRIPPER_RANGE, seg.trial_id, idx,
                        f"{arm_name} gripper {arm.gripper!r} outside [0, 1] at frame {i}"))
                    grip_bad = True
                roll, pitch, yaw = arm.orientation
                if not orient_bad and not (
                    -math.pi <= roll <= math.pi
                    and -HALF_PI <= pitch <= HALF_PI
                    and -math.pi <= yaw <= math.pi
                ):
                    violations.append(Violation(
                        ViolationKind.ORIENTATION_RANGE, seg.trial_id, idx,
                        f"{arm_name} rpy {arm.orientation!r} out of range at frame {i}"))
                    orient_bad = True
            if (
                not joints_bad
                and profile is not None
                and frame.raw_joints is not None
                and len(frame.raw_joints) != profile.joint_count
            ):
                violations.append(Violation(
                    ViolationKind.JOINT_COUNT, seg.trial_id, idx,
                    f"frame {i} has {len(frame.raw_joints)} joints; "
                    f"profile declares {profile.joint_count}"))
                joints_bad = True
    return violations


def builtin_profiles() -> dict[str, RobotProfile]:
    """Best-effort default profiles for the published recording layouts.

    Column ordering of the published files is not standardized; these
    defaults assume the canonical layout documented in RobotProfile and
    should be overridden from config when a stream differs.
    """
    profiles = [
        RobotProfile("taurus", OrientationEncoding.ROTATION_MATRIX_9, 13,
                     domain_default=Domain.REAL),
        RobotProfile("taurus_sim", OrientationEncoding.ROTATION_MATRIX_9, 13,
                     domain_default=Domain.SIM),
        RobotProfile("yumi", OrientationEncoding.EULER_RPY_3, 7,
                     workspace_scale=2.0, domain_default=Domain.REAL),
        RobotProfile("dvrk", OrientationEncoding.QUATERNION_4, 14,
                     joint_count=12, domain_default=Domain.REAL,
                     gripper_range=(0.0, 1.2)),
    ]
    return {p.name: p for p in profiles}
