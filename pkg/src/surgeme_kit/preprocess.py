"""Projection into the 7-per-arm common feature space and 40-frame resampling.

Orientation convention is intrinsic Z-Y-X (yaw, then pitch, then roll):
R = Rz(yaw) @ Ry(pitch) @ Rx(roll).  At gimbal lock (|pitch| = pi/2) roll
is fixed to 0 and yaw absorbs the remaining rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ArmState, KinFrame, RawFrame, RobotProfile, SurgemeClass, Domain, Outcome
from .core import OrientationEncoding, SurgemeSegment
from .errors import (
    GripperRangeError,
    NotARotationError,
    TooShortError,
    ZeroQuaternionError,
)

DEFAULT_FRAMES = 40
N_COMMON_CHANNELS = 14

# Channel order within the common feature space (joints, when present,
# follow after index 13 and are never unwrapped).
COMMON_CHANNEL_NAMES = (
    "left_px", "left_py", "left_pz", "left_roll", "left_pitch", "left_yaw",
    "left_gripper",
    "right_px", "right_py", "right_pz", "right_roll", "right_pitch",
    "right_yaw", "right_gripper",
)
ANGLE_CHANNELS = (3, 4, 5, 10, 11, 12)

_ORTHO_HARD_LIMIT = 1e-3


def rpy_to_rotmat(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Compose Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def _nearest_rotation(m: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


def rotmat_to_rpy(r9) -> tuple[float, float, float]:
    """Extract (roll, pitch, yaw) from a row-major 3x3 rotation.

    Inputs within orthonormality residual 1e-3 are snapped to the
    nearest rotation before extraction; anything farther (or with
    negative determinant) raises NotARotationError.
    """
    m = np.asarray(r9, dtype=float).reshape(3, 3)
    residual = np.linalg.norm(m.T @ m - np.eye(3))
    if residual > _ORTHO_HARD_LIMIT or np.linalg.det(m) < 0:
        raise NotARotationError(
            f"orthonormality residual {residual:.3e} exceeds {_ORTHO_HARD_LIMIT}")
    if residual > 1e-12:
        m = _nearest_rotation(m)
    sp = -m[2, 0]
    sp = min(1.0, max(-1.0, sp))
    pitch = math.asin(sp)
    if abs(sp) > 1.0 - 1e-12:
        # Gimbal lock: only yaw -/+ roll is observable; pin roll to 0.
        roll = 0.0
        yaw = math.atan2(-m[0, 1], m[1, 1])
    else:
        roll = math.atan2(m[2, 1], m[2, 2])
        yaw = math.atan2(m[1, 0], m[0, 0])
    return roll, pitch, yaw


def quat_to_rotmat(q) -> np.ndarray:
    """Unit-normalize a (w, x, y, z) quaternion and return its matrix."""
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q)
    if norm < 1e-12:
        raise ZeroQuaternionError("quaternion has (near-)zero norm")
    w, x, y, z = q / norm
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_to_rpy(q) -> tuple[float, float, float]:
    """Same Euler convention as rotmat_to_rpy, via the matrix path."""
    return rotmat_to_rpy(quat_to_rotmat(q))


def _project_arm(channels: np.ndarray, profile: RobotProfile) -> tuple[ArmState, tuple[float, ...]]:
    enc = profile.orientation_encoding
    k = enc.channel_count
    position = tuple(float(v) / profile.workspace_scale for v in channels[:3])
    block = channels[3:3 + k]
    if enc is OrientationEncoding.ROTATION_MATRIX_9:
        orientation = rotmat_to_rpy(block)
    elif enc is OrientationEncoding.QUATERNION_4:
        orientation = quat_to_rpy(block)
    else:
        orientation = (float(block[0]), float(block[1]), float(block[2]))
    raw_grip = float(channels[3 + k])
    lo, hi = profile.gripper_range
    span = hi - lo
    if raw_grip < lo - 1e-9 * span or raw_grip > hi + 1e-9 * span:
        raise GripperRangeError(
            f"gripper value {raw_grip!r} outside declared range [{lo}, {hi}]")
    gripper = min(1.0, max(0.0, (raw_grip - lo) / span))
    joints = tuple(float(v) for v in channels[4 + k:])
    return ArmState(position, orientation, gripper), joints


def project_common_features(raw: RawFrame, profile: RobotProfile) -> KinFrame:
    """Convert one raw frame into the robot-agnostic common feature space.

    Positions are divided by the profile's workspace scale so all robots
    share a unit workspace; orientations become roll/pitch/yaw; the
    gripper channel is normalized to [0, 1] from its declared raw range.
    Raw joint angles are preserved when the profile declares them.
    """
    channels = np.asarray(raw.channels, dtype=float)
    if channels.shape[0] != profile.total_channels:
        raise ValueError(
            f"frame has {channels.shape[0]} channels; profile {profile.name!r} "
            f"declares {profile.total_channels}")
    n = profile.channels_per_arm
    left, left_joints = _project_arm(channels[:n], profile)
    right, right_joints = _project_arm(channels[n:], profile)
    joints = left_joints + right_joints if profile.joint_count else None
    return KinFrame(raw.timestamp, left, right, joints)


@dataclass(frozen=True)
class ResampledSegment:
    """A segment on a uniform 40-point grid over its time span.

    grid is (frames, channels) with the common 14 channels first and any
    joint channels after.  Angle channels are kept continuous (unwrapped,
    anchored at the first sample) so spectra see shape, not seam jumps;
    values may therefore leave [-pi, pi] when the motion wraps.
    """

    label: SurgemeClass
    grid: np.ndarray
    outcome: Outcome
    domain: Domain
    trial_id: str
    robot: str

    @property
    def n_grid(self) -> int:
        return self.grid.shape[0]

    @property
    def n_channels(self) -> int:
        return self.grid.shape[1]


def segment_channel_matrix(seg: SurgemeSegment) -> np.ndarray:
    """Stack a segment's frames into an (n_frames, channels) matrix."""
    rows = []
    for f in seg.frames:
        row = list(f.left.position) + list(f.left.orientation) + [f.left.gripper]
        row += list(f.right.position) + list(f.right.orientation) + [f.right.gripper]
        if f.raw_joints is not None:
            row += list(f.raw_joints)
        rows.append(row)
    return np.asarray(rows, dtype=float)


def resample_segment(seg: SurgemeSegment, frames: int = DEFAULT_FRAMES) -> ResampledSegment:
    """Linearly resample every channel onto a uniform grid of `frames` points.

    Angle channels are unwrapped first so interpolation follows the
    shortest arc; the first grid sample keeps the source value exactly
    and later samples stay continuous (no jump exceeds pi between
    adjacent grid points for physically sampled motion).
    """
    if seg.n_frames < 2:
        raise TooShortError(
            f"segment {seg.trial_id!r}/{seg.label.name} has {seg.n_frames} frame(s)")
    if frames < 2 or frames % 2 != 0:
        raise ValueError(f"frames must be an even integer >= 2, got {frames}")
    ts = np.asarray(seg.timestamps, dtype=float)
    if np.any(np.diff(ts) <= 0):
        raise ValueError(f"segment {seg.trial_id!r} timestamps are not strictly increasing")
    values = segment_channel_matrix(seg)
    grid_t = np.linspace(ts[0], ts[-1], frames)
    grid = np.empty((frames, values.shape[1]))
    for ch in range(values.shape[1]):
        col = values[:, ch]
        if ch in ANGLE_CHANNELS:
            col = np.unwrap(col)
        grid[:, ch] = np.interp(grid_t, ts, col)
    return ResampledSegment(seg.label, grid, seg.outcome, seg.domain,
                            seg.trial_id, seg.robot)
