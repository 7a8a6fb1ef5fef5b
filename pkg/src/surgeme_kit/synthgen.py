"""Synthetic peg-transfer trials across configurable robot embodiments.

Each trial walks the seven-step grammar (approach peg ... align-and-place)
once per transferred object.  Motion is piecewise minimum-jerk between
board-parameterized waypoints, plus Gaussian sensor noise; board pose and
transfer direction are randomized per trial.  Differing noise, speed
jitter, orientation richness, and gripper lag between paired profiles
model the sim/real gap.  Gap magnitudes are engineering choices for a
testbed, not measurements of any recorded dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    ArmState,
    Dataset,
    Domain,
    KinFrame,
    Outcome,
    OrientationEncoding,
    RawFrame,
    RobotProfile,
    SurgemeClass,
    SurgemeSegment,
)
from .errors import InvalidParamsError
from .ingest import (
    AnnotationRecord,
    TrialManifestEntry,
    write_annotations,
    write_kinematics,
    write_manifest,
    write_profiles,
)
from .seeding import derive_rng, derive_seed

BASE_TIMESTAMP = 1_700_000_000.0
DEFAULT_SAMPLE_HZ = 20.0
FAIL_RATE = 0.06

_POSITION_COLS = (0, 1, 2, 7, 8, 9)

BASE_DURATIONS = {
    SurgemeClass.APPROACH_PEG: 1.2,
    SurgemeClass.ALIGN_AND_GRASP: 1.5,
    SurgemeClass.LIFT_PEG: 0.9,
    SurgemeClass.GET_TOGETHER: 1.3,
    SurgemeClass.EXCHANGE: 1.2,
    SurgemeClass.APPROACH_POLE: 1.3,
    SurgemeClass.ALIGN_AND_PLACE: 1.5,
}

GRIP_OPEN = 1.0
GRIP_CLOSED = 0.08
GRIP_RELEASED = 0.9


@dataclass(frozen=True)
class EmbodimentParams:
    """Knobs describing one robot embodiment / recording condition."""

    workspace_scale: float = 1.0
    sensor_noise_sd: float = 0.0
    orientation_richness: float = 1.0
    speed_jitter: float = 0.0
    gripper_lag: float = 0.0
    board_pose: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def validate(self) -> None:
        checks = [
            (self.workspace_scale > 0, f"workspace_scale {self.workspace_scale} must be > 0"),
            (0.0 <= self.sensor_noise_sd <= 0.05,
             f"sensor_noise_sd {self.sensor_noise_sd} outside [0, 0.05]"),
            (0.0 <= self.orientation_richness <= 1.0,
             f"orientation_richness {self.orientation_richness} outside [0, 1]"),
            (0.0 <= self.speed_jitter <= 0.5,
             f"speed_jitter {self.speed_jitter} outside [0, 0.5]"),
            (0.0 <= self.gripper_lag <= 0.2,
             f"gripper_lag {self.gripper_lag} outside [0, 0.2]"),
            (abs(self.board_pose[0]) <= 1.0 and abs(self.board_pose[1]) <= 1.0
             and abs(self.board_pose[2]) <= math.pi,
             f"board_pose {self.board_pose} outside declared ranges"),
        ]
        for ok, message in checks:
            if not ok:
                raise InvalidParamsError(message)


@dataclass(frozen=True)
class Waypoint:
    arm: str            # "pick" or "receive"
    fraction: float     # 0..1 within the segment
    pose: str           # named board-parameterized pose, "current", or "drift"
    gripper: float | None  # target state; None keeps the previous target


@dataclass(frozen=True)
class SurgemePrimitive:
    surgeme: SurgemeClass
    waypoints: tuple[Waypoint, ...]

    def arm_waypoints(self, arm: str) -> list[Waypoint]:
        return [w for w in self.waypoints if w.arm == arm]


PRIMITIVES: tuple[SurgemePrimitive, ...] = (
    SurgemePrimitive(SurgemeClass.APPROACH_PEG, (
        Waypoint("pick", 0.0, "current", GRIP_OPEN),
        Waypoint("pick", 1.0, "hover_src", GRIP_OPEN),
        Waypoint("receive", 0.0, "current", None),
        Waypoint("receive", 1.0, "drift", None),
    )),
    SurgemePrimitive(SurgemeClass.ALIGN_AND_GRASP, (
        Waypoint("pick", 0.0, "current", GRIP_OPEN),
        Waypoint("pick", 0.5, "grasp", GRIP_OPEN),
        Waypoint("pick", 0.85, "grasp", GRIP_CLOSED),
        Waypoint("pick", 1.0, "grasp", GRIP_CLOSED),
        Waypoint("receive", 0.0, "current", None),
        Waypoint("receive", 1.0, "drift", None),
    )),
    SurgemePrimitive(SurgemeClass.LIFT_PEG, (
        Waypoint("pick", 0.0, "current", GRIP_CLOSED),
        Waypoint("pick", 1.0, "lift", GRIP_CLOSED),
        Waypoint("receive", 0.0, "current", None),
        Waypoint("receive", 1.0, "drift", None),
    )),
    SurgemePrimitive(SurgemeClass.GET_TOGETHER, (
        Waypoint("pick", 0.0, "current", GRIP_CLOSED),
        Waypoint("pick", 1.0, "meet_pick", GRIP_CLOSED),
        Waypoint("receive", 0.0, "current", None),
        Waypoint("receive", 1.0, "meet_receive", GRIP_OPEN),
    )),
    SurgemePrimitive(SurgemeClass.EXCHANGE, (
        Waypoint("receive", 0.0, "current", GRIP_OPEN),
        Waypoint("receive", 0.2, "meet_receive_nudge", GRIP_OPEN),
        Waypoint("receive", 0.45, "meet_receive_nudge", GRIP_CLOSED),
        Waypoint("receive", 1.0, "meet_receive_nudge", GRIP_CLOSED),
        Waypoint("pick", 0.0, "current", GRIP_CLOSED),
        Waypoint("pick", 0.45, "meet_pick_nudge", GRIP_CLOSED),
        Waypoint("pick", 0.8, "meet_pick_nudge", GRIP_RELEASED),
        Waypoint("pick", 1.0, "meet_pick_nudge", GRIP_RELEASED),
    )),
    SurgemePrimitive(SurgemeClass.APPROACH_POLE, (
        Waypoint("receive", 0.0, "current", GRIP_CLOSED),
        Waypoint("receive", 1.0, "hover_dst", GRIP_CLOSED),
        Waypoint("pick", 0.0, "current", None),
        Waypoint("pick", 1.0, "home_pick", None),
    )),
    SurgemePrimitive(SurgemeClass.ALIGN_AND_PLACE, (
        Waypoint("receive", 0.0, "current", GRIP_CLOSED),
        Waypoint("receive", 0.45, "place", GRIP_CLOSED),
        Waypoint("receive", 0.8, "place", 0.95),
        Waypoint("receive", 1.0, "place", 0.95),
        Waypoint("pick", 0.0, "current", None),
        Waypoint("pick", 1.0, "drift", None),
    )),
)


def _min_jerk(u: np.ndarray) -> np.ndarray:
    return u ** 3 * (10.0 + u * (-15.0 + 6.0 * u))


def _rot2d(heading: float, x: float, y: float) -> tuple[float, float]:
    c, s = math.cos(heading), math.sin(heading)
    return c * x - s * y, s * x + c * y


@dataclass
class _ArmCursor:
    position: np.ndarray
    rpy: np.ndarray
    gripper: float


class _Board:
    """Randomized pegboard geometry in the unit workspace."""

    GROUP_OFFSET = 0.12
    PEG_ROWS = (-0.018, 0.018)
    PEG_COLS = (-0.035, 0.0, 0.035)

    def __init__(self, center_x: float, center_y: float, heading: float):
        self.center = (center_x, center_y)
        self.heading = heading

    def peg(self, side: int, index: int) -> np.ndarray:
        """side -1 = left group, +1 = right group; index 0..5."""
        row = self.PEG_ROWS[index // 3]
        col = self.PEG_COLS[index % 3]
        lx = side * self.GROUP_OFFSET + row
        ly = col
        wx, wy = _rot2d(self.heading, lx, ly)
        return np.array([self.center[0] + wx, self.center[1] + wy, 0.0])

    def meet_point(self) -> np.ndarray:
        return np.array([self.center[0], self.center[1], 0.13])


_HOME = {
    "left": np.array([-0.20, -0.06, 0.12]),
    "right": np.array([0.20, -0.06, 0.12]),
}
_BASE_RPY = {
    "left": np.array([0.0, -0.6, 0.3]),
    "right": np.array([0.0, -0.6, -0.3]),
}


def _segment_fractions(waypoints: list[Waypoint], jitter: float,
                       rng: np.random.Generator) -> list[float]:
    """Jitter interior waypoint timing; endpoints stay pinned."""
    fractions = [w.fraction for w in waypoints]
    out = [fractions[0]]
    for i in range(1, len(fractions) - 1):
        shift = 0.3 * jitter * rng.uniform(-1.0, 1.0)
        lo = out[-1] + 0.02
        hi = fractions[-1] - 0.02
        out.append(min(max(fractions[i] + shift, lo), hi))
    if len(fractions) > 1:
        out.append(fractions[-1])
    return out


def _eval_path(fractions, points, u: np.ndarray) -> np.ndarray:
    """Piecewise minimum-jerk through (fraction, point) waypoints."""
    out = np.empty((u.shape[0], points[0].shape[0]))
    for k, uk in enumerate(u):
        i = 0
        while i < len(fractions) - 2 and uk > fractions[i + 1]:
            i += 1
        span = fractions[i + 1] - fractions[i]
        local = 0.0 if span <= 0 else min(max((uk - fractions[i]) / span, 0.0), 1.0)
        s = float(_min_jerk(np.array([local]))[0])
        out[k] = points[i] + (points[i + 1] - points[i]) * s
    return out


def _eval_gripper(fractions, targets, u: np.ndarray, lag_frac: float) -> np.ndarray:
    """Smoothstep between gripper targets, shifted by actuation lag.

    Transitions are clamped to finish by 0.98 of the segment so grasp
    closure always completes before the window ends.
    """
    out = np.full(u.shape[0], targets[0])
    for i in range(len(fractions) - 1):
        g0, g1 = targets[i], targets[i + 1]
        if g0 == g1:
            continue
        start = fractions[i] + lag_frac
        end = min(fractions[i + 1] + lag_frac, 0.98)
        if start >= end:
            start = end - 0.02
        local = np.clip((u - start) / (end - start), 0.0, 1.0)
        step = g0 + (g1 - g0) * _min_jerk(local)
        out = np.where(u >= start, step, out)
        out = np.where(u > end, g1, out)
    return out


@dataclass
class _Recording:
    """One trial's full frame stream plus its annotated segment spans."""

    trial_id: str
    timestamps: np.ndarray
    channels: np.ndarray  # (n_frames, 14) robot-frame values
    spans: list[tuple[SurgemeClass, Outcome, int, int]]  # inclusive indices

    def annotations(self) -> list[AnnotationRecord]:
        return [
            AnnotationRecord(label.canonical_name,
                             float(self.timestamps[a]),
                             float(self.timestamps[b]), outcome)
            for label, outcome, a, b in self.spans
        ]

    def raw_frames(self) -> list[RawFrame]:
        return [RawFrame(float(t), tuple(float(v) for v in row))
                for t, row in zip(self.timestamps, self.channels)]

    def segments(self, domain: Domain, robot: str) -> list[SurgemeSegment]:
        out = []
        for label, outcome, a, b in self.spans:
            frames = []
            for j in range(a, b + 1):
                row = [float(v) for v in self.channels[j]]
                left = ArmState(tuple(row[0:3]), tuple(row[3:6]), row[6])
                right = ArmState(tuple(row[7:10]), tuple(row[10:13]), row[13])
                frames.append(KinFrame(float(self.timestamps[j]), left, right))
            out.append(SurgemeSegment(label, tuple(frames), outcome, domain,
                                      self.trial_id, robot))
        return out


def _resolve_pose(key, arm_side, cursors, board, ctx, rng, richness):
    """Concrete (position, rpy) for a named waypoint pose."""
    cur = cursors[arm_side]
    base_rpy = _BASE_RPY[arm_side]
    if key == "current":
        return cur.position.copy(), cur.rpy.copy()
    if key == "drift":
        pos = cur.position + rng.uniform(-0.004, 0.004, size=3)
        rpy = cur.rpy + rng.uniform(-0.01, 0.01, size=3)
        return pos, rpy
    if key == "hover_src":
        pos = ctx["src"] + np.array([0.0, 0.0, 0.07])
        rpy = base_rpy + richness * rng.uniform(-1.0, 1.0, 3) * np.array([0.2, 0.12, 0.3])
        return pos, rpy
    if key == "grasp":
        pos = ctx["src"] + np.array([0.0, 0.0, 0.015])
        rpy = base_rpy + richness * rng.uniform(-1.0, 1.0, 3) * np.array([0.35, 0.22, 0.5])
        return pos, rpy
    if key == "lift":
        return ctx["src"] + np.array([0.0, 0.0, 0.10]), cur.rpy.copy()
    if key in ("meet_pick", "meet_receive"):
        offset = -0.02 if key == "meet_pick" else 0.02
        side = 1.0 if arm_side == "right" else -1.0
        pos = board.meet_point() + np.array([side * abs(offset), 0.0, 0.0])
        rpy = base_rpy + richness * rng.uniform(-1.0, 1.0, 3) * np.array([0.3, 0.18, 0.4])
        return pos, rpy
    if key in ("meet_pick_nudge", "meet_receive_nudge"):
        pos = cur.position + rng.uniform(-0.003, 0.003, size=3)
        rpy = cur.rpy + richness * rng.uniform(-1.0, 1.0, 3) * np.array([0.06, 0.04, 0.08])
        return pos, rpy
    if key == "hover_dst":
        pos = ctx["dst"] + np.array([0.0, 0.0, 0.07])
        rpy = base_rpy + richness * rng.uniform(-1.0, 1.0, 3) * np.array([0.2, 0.12, 0.3])
        return pos, rpy
    if key == "place":
        pos = ctx["dst"] + np.array([0.0, 0.0, 0.02])
        rpy = base_rpy + richness * rng.uniform(-1.0, 1.0, 3) * np.array([0.35, 0.22, 0.5])
        return pos, rpy
    if key == "home_pick":
        return _HOME[arm_side].copy(), base_rpy.copy()
    raise ValueError(f"unknown waypoint pose {key!r}")


def _generate_recording(params: EmbodimentParams, seed: int, trial_id: str,
                        n_objects: int, sample_hz: float) -> _Recording:
    params.validate()
    if n_objects < 1:
        raise InvalidParamsError(f"n_objects must be >= 1, got {n_objects}")
    if sample_hz <= 0:
        raise InvalidParamsError(f"sample_hz must be positive, got {sample_hz}")
    rng = derive_rng(seed, "trial")
    dt = 1.0 / sample_hz

    bx = params.board_pose[0] + rng.uniform(-0.04, 0.04)
    by = params.board_pose[1] + rng.uniform(-0.04, 0.04)
    heading = params.board_pose[2] + rng.uniform(-0.4, 0.4)
    board = _Board(bx, by, heading)

    cursors = {
        "left": _ArmCursor(_HOME["left"].copy(), _BASE_RPY["left"].copy(), GRIP_OPEN),
        "right": _ArmCursor(_HOME["right"].copy(), _BASE_RPY["right"].copy(), GRIP_OPEN),
    }

    rows: list[np.ndarray] = []
    spans: list[tuple[SurgemeClass, Outcome, int, int]] = []

    for obj in range(n_objects):
        src_side = 1 if rng.integers(2) else -1  # +1: object starts on the right
        src = board.peg(src_side, int(rng.integers(6)))
        dst = board.peg(-src_side, int(rng.integers(6)))
        ctx = {"src": src, "dst": dst}
        pick_side = "right" if src_side == 1 else "left"
        recv_side = "left" if pick_side == "right" else "right"
        role_map = {"pick": pick_side, "receive": recv_side}

        for prim in PRIMITIVES:
            duration = BASE_DURATIONS[prim.surgeme] * (
                1.0 + params.speed_jitter * rng.uniform(-1.0, 1.0))
            n = max(3, int(round(duration / dt)) + 1)
            u = np.arange(n) / (n - 1)
            lag_frac = params.gripper_lag / ((n - 1) * dt)

            block = np.empty((n, 14))
            for role in ("pick", "receive"):
                side = role_map[role]
                cur = cursors[side]
                wps = prim.arm_waypoints(role)
                fractions = _segment_fractions(wps, params.speed_jitter, rng)
                points, rpys, grips = [], [], []
                g_prev = cur.gripper
                for wp in wps:
                    pos, rpy = _resolve_pose(wp.pose, side, cursors, board, ctx,
                                             rng, params.orientation_richness)
                    points.append(pos)
                    rpys.append(rpy)
                    g_prev = g_prev if wp.gripper is None else wp.gripper
                    grips.append(g_prev)
                pos_path = _eval_path(fractions, points, u)
                rpy_path = _eval_path(fractions, rpys, u)
                grip_path = _eval_gripper(fractions, grips, u, lag_frac)
                base = 0 if side == "left" else 7
                block[:, base:base + 3] = pos_path
                block[:, base + 3:base + 6] = rpy_path
                block[:, base + 6] = grip_path
                cur.position = pos_path[-1].copy()
                cur.rpy = rpy_path[-1].copy()
                cur.gripper = float(grip_path[-1])

            start = len(rows)
            rows.extend(block)
            outcome = Outcome.FAIL if rng.random() < FAIL_RATE else Outcome.PASS
            spans.append((prim.surgeme, outcome, start, start + n - 1))

            last = prim is PRIMITIVES[-1] and obj == n_objects - 1
            if not last:
                gap = int(rng.integers(2, 5))
                drift = {side: rng.uniform(-0.002, 0.002, size=3) for side in ("left", "right")}
                prev = rows[-1]
                for g in range(gap):
                    frac = (g + 1) / gap
                    row = prev.copy()
                    for side, base in (("left", 0), ("right", 7)):
                        row[base:base + 3] = cursors[side].position + drift[side] * frac
                    rows.append(row)
                for side in ("left", "right"):
                    cursors[side].position = cursors[side].position + drift[side]

    channels = np.vstack(rows)
    channels[:, list(_POSITION_COLS)] *= params.workspace_scale
    noise = rng.standard_normal(size=(channels.shape[0], len(_POSITION_COLS)))
    channels[:, list(_POSITION_COLS)] += params.sensor_noise_sd * noise
    timestamps = BASE_TIMESTAMP + np.arange(channels.shape[0]) * dt
    return _Recording(trial_id, timestamps, channels, spans)


def generate_trial(params: EmbodimentParams, seed: int, *,
                   trial_id: str = "trial-000", robot: str = "synth",
                   domain: Domain = Domain.SIM, n_objects: int = 1,
                   sample_hz: float = DEFAULT_SAMPLE_HZ) -> list[SurgemeSegment]:
    """Generate one labeled trial; positions are robot-frame (pre-projection)."""
    rec = _generate_recording(params, seed, trial_id, n_objects, sample_hz)
    return rec.segments(domain, robot)


@dataclass(frozen=True)
class ProfileSpec:
    params: EmbodimentParams
    domain: Domain


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    profiles: dict[str, ProfileSpec]
    trials_per_profile: int
    seed: int
    n_objects: int = 1
    sample_hz: float = DEFAULT_SAMPLE_HZ

    def validate(self) -> None:
        if not self.profiles:
            raise InvalidParamsError("benchmark needs at least one profile")
        if self.trials_per_profile < 1:
            raise InvalidParamsError(
                f"trials_per_profile must be >= 1, got {self.trials_per_profile}")
        for spec in self.profiles.values():
            spec.params.validate()


def desk_synth_v1(trials_per_profile: int = 12, seed: int = 7) -> BenchmarkSpec:
    """Default paired sim/real benchmark used by the acceptance suite."""
    return BenchmarkSpec(
        name="desk-synth-v1",
        profiles={
            "synth_sim": ProfileSpec(EmbodimentParams(
                workspace_scale=1.0, sensor_noise_sd=0.0008,
                orientation_richness=0.85, speed_jitter=0.08,
                gripper_lag=0.0), Domain.SIM),
            "synth_real": ProfileSpec(EmbodimentParams(
                workspace_scale=1.25, sensor_noise_sd=0.0025,
                orientation_richness=0.6, speed_jitter=0.22,
                gripper_lag=0.06), Domain.REAL),
        },
        trials_per_profile=trials_per_profile,
        seed=seed,
    )


def _robot_profile(name: str, spec: ProfileSpec) -> RobotProfile:
    return RobotProfile(
        name=name,
        orientation_encoding=OrientationEncoding.EULER_RPY_3,
        channels_per_arm=7,
        workspace_scale=spec.params.workspace_scale,
        domain_default=spec.domain,
    )


def _iter_recordings(spec: BenchmarkSpec):
    for name in sorted(spec.profiles):
        pspec = spec.profiles[name]
        for i in range(spec.trials_per_profile):
            trial_id = f"{name}-{i:03d}"
            trial_seed = derive_seed(spec.seed, spec.name, name, i)
            rec = _generate_recording(pspec.params, trial_seed, trial_id,
                                      spec.n_objects, spec.sample_hz)
            yield name, pspec, rec


def generate_benchmark(spec: BenchmarkSpec) -> Dataset:
    """Generate the in-memory Dataset: segments in the common feature space.

    Positions are divided by each profile's workspace scale — exactly what
    ingesting the written form of the same benchmark produces.
    """
    spec.validate()
    segments: list[SurgemeSegment] = []
    profiles: dict[str, RobotProfile] = {}
    for name, pspec, rec in _iter_recordings(spec):
        profiles.setdefault(name, _robot_profile(name, pspec))
        scale = pspec.params.workspace_scale
        for seg in rec.segments(pspec.domain, name):
            frames = tuple(
                KinFrame(f.timestamp,
                         ArmState(tuple(p / scale for p in f.left.position),
                                  f.left.orientation, f.left.gripper),
                         ArmState(tuple(p / scale for p in f.right.position),
                                  f.right.orientation, f.right.gripper))
                for f in seg.frames)
            segments.append(SurgemeSegment(seg.label, frames, seg.outcome,
                                           seg.domain, seg.trial_id, seg.robot))
    return Dataset(segments, profiles)


def write_benchmark(spec: BenchmarkSpec, out_dir: str | Path) -> dict:
    """Write the benchmark in the canonical ingest format.

    Returns a counts summary: trials, segments, and per-class totals.
    """
    spec.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trials_dir = out_dir / "trials"
    trials_dir.mkdir(exist_ok=True)
    entries: list[TrialManifestEntry] = []
    profiles: dict[str, RobotProfile] = {}
    class_counts = {c.canonical_name: 0 for c in SurgemeClass}
    n_segments = 0
    for name, pspec, rec in _iter_recordings(spec):
        profile = profiles.setdefault(name, _robot_profile(name, pspec))
        kin_path = trials_dir / f"{rec.trial_id}_kinematics.csv"
        ann_path = trials_dir / f"{rec.trial_id}_annotations.csv"
        write_kinematics(kin_path, rec.raw_frames(), profile)
        write_annotations(ann_path, rec.annotations())
        entries.append(TrialManifestEntry(
            rec.trial_id, name, pspec.domain,
            Path("trials") / kin_path.name, Path("trials") / ann_path.name))
        for label, _, _, _ in rec.spans:
            class_counts[label.canonical_name] += 1
            n_segments += 1
    write_manifest(out_dir / "manifest.csv", entries)
    write_profiles(out_dir / "profiles.json", profiles)
    return {
        "benchmark": spec.name,
        "trials": len(entries),
        "segments": n_segments,
        "class_counts": class_counts,
    }
