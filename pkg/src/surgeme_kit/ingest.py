"""Canonical on-disk trial format: kinematics + annotations + manifest.

All three files are comma-delimited UTF-8 text with a header row; comment
lines start with '#'; LF and CRLF are both accepted.  Kinematics rows are
one frame each: timestamp first, then left-arm channels, then right-arm
channels, layout declared by the robot profile.  Floats are written with
repr() so a parse/write round trip of canonical files is byte-identical.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .core import (
    Dataset,
    Domain,
    KinFrame,
    Outcome,
    RawFrame,
    RobotProfile,
    OrientationEncoding,
    SurgemeSegment,
    class_from_name,
)
from .errors import EmptyFileError, FormatError, OverlapError
from .preprocess import project_common_features

log = logging.getLogger("surgeme_kit.ingest")

ANNOTATION_HEADER = ["surgeme_name", "start_ts", "end_ts", "outcome"]
MANIFEST_HEADER = ["trial_id", "robot", "domain", "kinematics_path", "annotations_path"]


@dataclass(frozen=True)
class AnnotationRecord:
    """One labeled window: [start_ts, end_ts] inclusive, with Pass/Fail."""

    surgeme_name: str
    start_ts: float
    end_ts: float
    outcome: Outcome


@dataclass(frozen=True)
class TrialManifestEntry:
    trial_id: str
    robot: str
    domain: Domain
    kinematics_path: Path
    annotations_path: Path


def _data_lines(path: Path) -> list[tuple[int, str]]:
    """Return (1-based line number, stripped text) skipping comments/blanks."""
    text = path.read_text(encoding="utf-8")
    out = []
    for i, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line or line.startswith("#"):
            continue
        out.append((i, line))
    return out


def _parse_float(cell: str, path: Path, lineno: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: non-numeric cell {cell!r}") from None


def parse_kinematics(path: str | Path, profile: RobotProfile) -> list[RawFrame]:
    """Parse a kinematics stream, preserving raw channels losslessly.

    The header must match the profile's declared channel layout (same
    column count, 'timestamp' first).
    """
    path = Path(path)
    lines = _data_lines(path)
    if not lines:
        raise EmptyFileError(f"{path}: no header or data rows")
    expected_cols = 1 + profile.total_channels
    header_line, header_text = lines[0]
    header = header_text.split(",")
    if header[0].strip().lower() != "timestamp":
        raise FormatError(f"{path}:{header_line}: missing header (first column "
                          f"must be 'timestamp', got {header[0]!r})")
    if len(header) != expected_cols:
        raise FormatError(
            f"{path}:{header_line}: header has {len(header)} columns; profile "
            f"{profile.name!r} declares {expected_cols}")
    frames: list[RawFrame] = []
    for row_index, (lineno, line) in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != expected_cols:
            raise FormatError(
                f"{path}:{lineno}: row {row_index} has {len(cells)} columns, "
                f"expected {expected_cols}")
        values = [_parse_float(c, path, lineno) for c in cells]
        frames.append(RawFrame(values[0], tuple(values[1:])))
    if not frames:
        raise EmptyFileError(f"{path}: header only, no data rows")
    return frames


def write_kinematics(path: str | Path, frames: list[RawFrame], profile: RobotProfile) -> None:
    """Write frames in canonical form (repr floats, LF endings)."""
    path = Path(path)
    lines = [",".join(profile.header_fields())]
    for f in frames:
        lines.append(",".join([repr(f.timestamp)] + [repr(c) for c in f.channels]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_annotations(path: str | Path, overlap_tolerance: float = 0.0) -> list[AnnotationRecord]:
    """Parse annotation windows, sorted by start time.

    Names are left unresolved here; resolution happens in segment_trial.
    Raises OverlapError when two windows overlap by more than
    overlap_tolerance seconds.
    """
    path = Path(path)
    lines = _data_lines(path)
    if not lines:
        raise FormatError(f"{path}: empty annotations file")
    header_line, header_text = lines[0]
    header = [h.strip().lower() for h in header_text.split(",")]
    if header != ANNOTATION_HEADER:
        raise FormatError(f"{path}:{header_line}: expected header "
                          f"{','.join(ANNOTATION_HEADER)!r}")
    records: list[AnnotationRecord] = []
    for lineno, line in lines[1:]:
        cells = line.split(",")
        if len(cells) != 4:
            raise FormatError(f"{path}:{lineno}: expected 4 columns, got {len(cells)}")
        name = cells[0].strip()
        start = _parse_float(cells[1], path, lineno)
        end = _parse_float(cells[2], path, lineno)
        if not start < end:
            raise FormatError(f"{path}:{lineno}: end_ts {end!r} not after start_ts {start!r}")
        try:
            outcome = Outcome.from_text(cells[3])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: outcome must be Pass or Fail, "
                              f"got {cells[3]!r}") from None
        records.append(AnnotationRecord(name, start, end, outcome))
    records.sort(key=lambda r: (r.start_ts, r.end_ts))
    for prev, cur in zip(records, records[1:]):
        overlap = prev.end_ts - cur.start_ts
        if overlap > overlap_tolerance:
            raise OverlapError(
                f"{path}: windows [{prev.start_ts}, {prev.end_ts}] and "
                f"[{cur.start_ts}, {cur.end_ts}] overlap by {overlap:g} s")
    return records


def write_annotations(path: str | Path, records: list[AnnotationRecord]) -> None:
    path = Path(path)
    lines = [",".join(ANNOTATION_HEADER)]
    for r in records:
        lines.append(f"{r.surgeme_name},{r.start_ts!r},{r.end_ts!r},{r.outcome.value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def segment_trial(
    frames: list[RawFrame],
    annotations: list[AnnotationRecord],
    profile: RobotProfile,
    domain: Domain,
    trial_id: str,
) -> list[SurgemeSegment]:
    """Cut annotated windows out of a frame stream and project them.

    Membership is inclusive [start, end] by timestamp; a frame claimed
    by one window is not re-claimed by a later one, so windows touching
    at a boundary stay disjoint.  Windows capturing fewer than 2 frames
    are dropped with a warning.  Frames outside every window (idle
    motion) are discarded.
    """
    projected: dict[int, KinFrame] = {}
    segments: list[SurgemeSegment] = []
    next_free = 0  # frames before this index are already claimed
    for ann in annotations:
        label = class_from_name(ann.surgeme_name)
        selected: list[KinFrame] = []
        for i in range(next_free, len(frames)):
            t = frames[i].timestamp
            if t < ann.start_ts:
                continue
            if t > ann.end_ts:
                break
            if i not in projected:
                projected[i] = project_common_features(frames[i], profile)
            selected.append(projected[i])
            next_free = i + 1
        if len(selected) < 2:
            log.warning(
                "trial %s: window [%s, %s] (%s) captured %d frame(s); dropped",
                trial_id, ann.start_ts, ann.end_ts, ann.surgeme_name, len(selected))
            continue
        segments.append(SurgemeSegment(
            label, tuple(selected), ann.outcome, domain, trial_id, profile.name))
    return segments


def parse_manifest(path: str | Path) -> list[TrialManifestEntry]:
    """Parse the trial manifest; relative paths resolve against its directory."""
    path = Path(path)
    base = path.parent
    lines = _data_lines(path)
    if not lines:
        raise FormatError(f"{path}: empty manifest")
    header_line, header_text = lines[0]
    header = [h.strip().lower() for h in header_text.split(",")]
    if header != MANIFEST_HEADER:
        raise FormatError(f"{path}:{header_line}: expected header "
                          f"{','.join(MANIFEST_HEADER)!r}")
    entries = []
    for lineno, line in lines[1:]:
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 5:
            raise FormatError(f"{path}:{lineno}: expected 5 columns, got {len(cells)}")
        try:
            domain = Domain.from_text(cells[2])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: domain must be sim or real, "
                              f"got {cells[2]!r}") from None
        entries.append(TrialManifestEntry(
            cells[0], cells[1], domain,
            base / cells[3], base / cells[4]))
    return entries


def write_manifest(path: str | Path, entries: list[TrialManifestEntry]) -> None:
    path = Path(path)
    base = path.parent
    lines = [",".join(MANIFEST_HEADER)]
    for e in entries:
        kin = e.kinematics_path.relative_to(base) if e.kinematics_path.is_absolute() else e.kinematics_path
        ann = e.annotations_path.relative_to(base) if e.annotations_path.is_absolute() else e.annotations_path
        lines.append(f"{e.trial_id},{e.robot},{e.domain.value},{kin},{ann}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_profiles(path: str | Path, profiles: dict[str, RobotProfile]) -> None:
    """Persist a profile registry next to a manifest (profiles.json)."""
    payload = {
        name: {
            "orientation_encoding": p.orientation_encoding.value,
            "channels_per_arm": p.channels_per_arm,
            "joint_count": p.joint_count,
            "workspace_scale": p.workspace_scale,
            "domain_default": p.domain_default.value,
            "gripper_range": list(p.gripper_range),
        }
        for name, p in sorted(profiles.items())
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def profiles_from_dicts(raw: dict) -> dict[str, RobotProfile]:
    """Build a profile registry from plain dicts (profiles.json schema)."""
    profiles = {}
    for name, spec in raw.items():
        profiles[name] = RobotProfile(
            name=name,
            orientation_encoding=OrientationEncoding(spec["orientation_encoding"]),
            channels_per_arm=int(spec["channels_per_arm"]),
            joint_count=int(spec.get("joint_count", 0)),
            workspace_scale=float(spec.get("workspace_scale", 1.0)),
            domain_default=Domain(spec.get("domain_default", "real")),
            gripper_range=tuple(spec.get("gripper_range", (0.0, 1.0))),
        )
    return profiles


def read_profiles(path: str | Path) -> dict[str, RobotProfile]:
    return profiles_from_dicts(json.loads(Path(path).read_text(encoding="utf-8")))


def load_dataset(
    manifest_path: str | Path,
    profiles: dict[str, RobotProfile],
    overlap_tolerance: float = 0.0,
) -> Dataset:
    """Parse every trial in a manifest into a validated-ready Dataset.

    A profiles.json sitting next to the manifest extends (and overrides)
    the given registry, so generated datasets are self-contained.
    """
    manifest_path = Path(manifest_path)
    registry = dict(profiles)
    sidecar = manifest_path.parent / "profiles.json"
    if sidecar.exists():
        registry.update(read_profiles(sidecar))
    segments: list[SurgemeSegment] = []
    for entry in parse_manifest(manifest_path):
        if entry.robot not in registry:
            raise FormatError(f"manifest trial {entry.trial_id!r}: robot "
                              f"{entry.robot!r} has no registered profile")
        profile = registry[entry.robot]
        frames = parse_kinematics(entry.kinematics_path, profile)
        anns = parse_annotations(entry.annotations_path, overlap_tolerance)
        segments.extend(segment_trial(frames, anns, profile, entry.domain, entry.trial_id))
    return Dataset(segments, registry)
