"""Frame-wise and sequence-wise feature vectors, including spectral features.

Sequence vectors are channel-major: for each of the 14 common channels,
all grid samples in time order.  Spectral features drop the DC bin, keep
the positive-frequency magnitudes, and L2-normalize each channel block,
making them invariant to per-channel offsets and positive scaling.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Domain, Outcome, SurgemeClass, SurgemeSegment
from .errors import JointsUnavailableError
from .preprocess import N_COMMON_CHANNELS, ResampledSegment

_ZERO_BLOCK_NORM = 1e-15


@dataclass(frozen=True)
class SequenceVector:
    """Flattened resampled segment: frames x 14 values, channel-major."""

    values: np.ndarray
    label: SurgemeClass
    domain: Domain
    outcome: Outcome
    trial_id: str
    robot: str
    frames: int

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SpectralVector:
    """Per-channel positive-frequency magnitude blocks, each unit L2 norm."""

    values: np.ndarray
    label: SurgemeClass
    domain: Domain
    outcome: Outcome
    trial_id: str
    robot: str
    bins_per_channel: int

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class FrameVector:
    """One timestep's common features, optionally extended by joint angles."""

    values: np.ndarray
    label: SurgemeClass
    domain: Domain
    trial_id: str

    def __len__(self) -> int:
        return self.values.shape[0]


def flat_index(channel: int, t: int, frames: int) -> int:
    """Map (channel, time) to its position in a sequence vector."""
    if not 0 <= channel < N_COMMON_CHANNELS:
        raise ValueError(f"channel {channel} outside 0..{N_COMMON_CHANNELS - 1}")
    if not 0 <= t < frames:
        raise ValueError(f"time index {t} outside 0..{frames - 1}")
    return channel * frames + t


def build_sequence_vector(rs: ResampledSegment) -> SequenceVector:
    """Concatenate the 14 common channels of a resampled segment.

    Joint channels, when present on the grid, are not part of the
    sequence vector; they only feed frame-wise classification.
    """
    frames = rs.n_grid
    values = rs.grid[:, :N_COMMON_CHANNELS].T.reshape(-1).copy()
    return SequenceVector(values, rs.label, rs.domain, rs.outcome,
                          rs.trial_id, rs.robot, frames)


def spectral_features(sv: SequenceVector) -> SpectralVector:
    """Map a sequence vector onto translation/scale-invariant spectra.

    Per 40-sample channel block: real-input DFT, magnitudes of bins
    1..frames/2 (DC excluded, Nyquist included), then L2 normalization.
    All-zero blocks stay zero instead of dividing by nothing.
    """
    frames = sv.frames
    blocks = sv.values.reshape(N_COMMON_CHANNELS, frames)
    mags = np.abs(np.fft.rfft(blocks, axis=1))[:, 1:frames // 2 + 1]
    norms = np.linalg.norm(mags, axis=1, keepdims=True)
    scale = np.where(norms < _ZERO_BLOCK_NORM, 1.0, norms)
    mags = mags / scale
    return SpectralVector(mags.reshape(-1), sv.label, sv.domain, sv.outcome,
                          sv.trial_id, sv.robot, frames // 2)


def build_frame_vectors(seg: SurgemeSegment, include_joints: bool = False) -> list[FrameVector]:
    """One FrameVector per original (non-resampled) frame of a segment."""
    out = []
    for f in seg.frames:
        if include_joints and f.raw_joints is None:
            raise JointsUnavailableError(
                f"trial {seg.trial_id!r} ({seg.robot}) records no joint angles")
        row = list(f.left.position) + list(f.left.orientation) + [f.left.gripper]
        row += list(f.right.position) + list(f.right.orientation) + [f.right.gripper]
        if include_joints:
            row += list(f.raw_joints)
        out.append(FrameVector(np.asarray(row, dtype=float), seg.label,
                               seg.domain, seg.trial_id))
    return out


def export_matrix(vectors, path: str | Path) -> None:
    """Write vectors as delimited text, label id in the first column."""
    lines = []
    for v in vectors:
        lines.append(",".join([str(int(v.label))] + [repr(x) for x in v.values]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
