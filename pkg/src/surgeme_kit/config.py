"""JSON config file handling for the CLI.

A config file mirrors the experiment settings plus dataset paths, profile
definitions, the synthetic benchmark spec, output directory, and the
master seed.  Unknown keys are rejected so typos fail loudly; every flag
overrides its config key.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .errors import ConfigError

DEFAULTS: dict = {
    "seed": 0,
    "jobs": 1,
    "output_dir": "surgeme-out",
    "dataset": {
        "manifest": None,
        "profiles": {},
        "overlap_tolerance": 0.0,
    },
    "synth": {
        "benchmark": "desk-synth-v1",
        "trials_per_profile": 12,
        "seed": 7,
        "n_objects": 1,
        "sample_hz": 20.0,
        "profiles": None,
    },
    "experiment": {
        "scenario": "no_transfer",
        "mode": "sequence_wise",
        "learners": ["rf"],
        "learner_params": {},
        "feature_kind": "spectral",
        "folds": 5,
        "seeds": [0, 1, 2],
        "ratio_grid": [0.0, 0.05, 0.1, 0.18, 0.28, 0.5, 1.0],
        "include_joints": False,
        "frames": 40,
        "domain": None,
        "holdout_fraction": 0.5,
        "train_ratio": 0.0,
    },
}

DOCS: dict[str, str] = {
    "seed": "master seed; every stochastic component derives from it",
    "jobs": "worker processes for experiment cells (1 = inline)",
    "output_dir": "default output directory (flag --out overrides)",
    "dataset.manifest": "path to a trial manifest; null means use the synthetic benchmark",
    "dataset.profiles": "extra robot profiles: name -> {orientation_encoding, channels_per_arm, joint_count, workspace_scale, domain_default, gripper_range}",
    "dataset.overlap_tolerance": "seconds of annotation overlap tolerated before OverlapError",
    "synth.benchmark": "benchmark name recorded in outputs",
    "synth.trials_per_profile": "trials generated per embodiment profile",
    "synth.seed": "benchmark generation seed (independent of the master seed)",
    "synth.n_objects": "objects transferred per trial (7 segments each)",
    "synth.sample_hz": "kinematics sampling rate",
    "synth.profiles": "null for the built-in sim/real pair, or name -> {domain, workspace_scale, sensor_noise_sd, orientation_richness, speed_jitter, gripper_lag, board_pose}",
    "experiment.scenario": "no_transfer or domain_transfer",
    "experiment.mode": "sequence_wise or frame_wise",
    "experiment.learners": "learner kinds to run: subset of [rf, svm, mlp]",
    "experiment.learner_params": "hyperparameter overrides for the chosen learners",
    "experiment.feature_kind": "spectral or raw (frame_wise requires raw)",
    "experiment.folds": "cross-validation folds (>= 2)",
    "experiment.seeds": "experiment seeds; cells = folds x seeds",
    "experiment.ratio_grid": "real:sim ratios for the transfer sweep",
    "experiment.include_joints": "append joint angles to frame-wise vectors",
    "experiment.frames": "resampling grid length (even)",
    "experiment.domain": "domain filter for no_transfer on mixed datasets (sim/real)",
    "experiment.holdout_fraction": "fraction of real trials held out as the transfer test set",
    "experiment.train_ratio": "real:sim ratio used by the train command in domain_transfer",
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        dotted = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key: {dotted}")
        if isinstance(base[key], dict) and key not in ("learner_params", "profiles"):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {dotted} must be an object")
            out[key] = _merge(base[key], value, dotted + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path | None) -> dict:
    """Defaults, deep-overridden by the given JSON file (if any)."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    path = Path(path)
    try:
        user = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return _merge(DEFAULTS, user)


def dump_reference(path: str | Path) -> None:
    """Write every config key with its default and one-line description."""
    def walk(tree: dict, prefix: str = "") -> dict:
        out = {}
        for key, value in tree.items():
            dotted = f"{prefix}{key}"
            if isinstance(value, dict) and dotted + "." in {
                    d[:len(dotted) + 1] for d in DOCS}:
                out[key] = walk(value, dotted + ".")
            else:
                out[key] = {"default": value, "doc": DOCS.get(dotted, "")}
        return out

    reference = walk(DEFAULTS)
    Path(path).write_text(json.dumps(reference, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
