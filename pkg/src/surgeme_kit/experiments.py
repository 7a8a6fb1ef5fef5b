"""Evaluation protocol: stratified trial-grouped splits, no-transfer and
domain-transfer scenarios, real:sim ratio sweeps, frame- and sequence-wise
modes.

Every (fold, seed, ratio) cell is seeded from the master seed plus the
cell key, and cells reduce in a fixed order, so reports are
byte-identical for any worker count.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .core import Dataset, Domain, SurgemeClass, SurgemeSegment
from .errors import InvalidParamsError, MissingDomainError, TooFewPerClassError
from .features import build_frame_vectors, build_sequence_vector, spectral_features
from .learners import LabeledMatrix, train as train_learner
from .preprocess import resample_segment
from .seeding import derive_rng, derive_seed

N_CLASSES = len(SurgemeClass)

SCENARIOS = ("no_transfer", "domain_transfer")
MODES = ("sequence_wise", "frame_wise")
FEATURE_KINDS = ("spectral", "raw")
DEFAULT_RATIO_GRID = (0.0, 0.05, 0.1, 0.18, 0.28, 0.5, 1.0)


@dataclass
class ExperimentConfig:
    scenario: str
    mode: str = "sequence_wise"
    learner: str = "rf"
    learner_params: dict = field(default_factory=dict)
    feature_kind: str = "spectral"
    folds: int = 5
    seeds: tuple[int, ...] = (0, 1, 2)
    ratio_grid: tuple[float, ...] = DEFAULT_RATIO_GRID
    include_joints: bool = False
    frames: int = 40
    domain: str | None = None
    holdout_fraction: float = 0.5
    master_seed: int = 0
    jobs: int = 1

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise InvalidParamsError(f"scenario must be one of {SCENARIOS}")
        if self.mode not in MODES:
            raise InvalidParamsError(f"mode must be one of {MODES}")
        if self.feature_kind not in FEATURE_KINDS:
            raise InvalidParamsError(f"feature_kind must be one of {FEATURE_KINDS}")
        if self.mode == "frame_wise" and self.feature_kind == "spectral":
            raise InvalidParamsError(
                "spectral features need sequences; frame_wise requires feature_kind=raw")
        if self.folds < 2:
            raise InvalidParamsError(f"folds must be >= 2, got {self.folds}")
        if not self.seeds:
            raise InvalidParamsError("at least one seed is required")
        if any(r < 0 for r in self.ratio_grid):
            raise InvalidParamsError("ratios must be nonnegative")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise InvalidParamsError("holdout_fraction must be in (0, 1)")


@dataclass
class CellResult:
    series: str            # "cv", "transfer", or "baseline"
    seed: int
    fold: int | None
    ratio: float | None
    accuracy: float
    confusion: list[list[int]]
    n_test: int
    n_train_sim: int
    n_train_real: int
    shortfall: bool = False


@dataclass
class ExperimentReport:
    scenario: str
    mode: str
    learner: str
    feature_kind: str
    config: dict
    config_hash: str
    seeds: list[int]
    cells: list[CellResult]

    def accuracies(self, series: str, ratio: float | None = None) -> list[float]:
        return [c.accuracy for c in self.cells
                if c.series == series and (ratio is None or c.ratio == ratio)]

    def summary_rows(self) -> list[dict]:
        """One row per (series, ratio): mean and population std."""
        groups: dict[tuple, list[float]] = {}
        for c in self.cells:
            groups.setdefault((c.series, c.ratio), []).append(c.accuracy)
        rows = []
        for (series, ratio) in sorted(groups, key=lambda k: (k[0], -1.0 if k[1] is None else k[1])):
            accs = groups[(series, ratio)]
            rows.append({
                "scenario": self.scenario,
                "series": series,
                "mode": self.mode,
                "learner": self.learner,
                "feature_kind": self.feature_kind,
                "ratio": ratio,
                "mean": float(np.mean(accs)),
                "std": float(np.std(accs)),
                "cells": len(accs),
            })
        return rows

    def curve(self) -> list[tuple[float, float, float]]:
        """(ratio, mean, std) points of the transfer sweep."""
        return [(r["ratio"], r["mean"], r["std"]) for r in self.summary_rows()
                if r["series"] == "transfer"]

    def aggregate_confusion(self, series: str, ratio: float | None = None) -> np.ndarray:
        total = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        for c in self.cells:
            if c.series == series and (ratio is None or c.ratio == ratio):
                total += np.asarray(c.confusion, dtype=np.int64)
        return total

    def to_json(self) -> str:
        payload = {
            "scenario": self.scenario,
            "mode": self.mode,
            "learner": self.learner,
            "feature_kind": self.feature_kind,
            "config": self.config,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "cells": [asdict(c) for c in self.cells],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        payload = json.loads(text)
        cells = [CellResult(**c) for c in payload["cells"]]
        return cls(payload["scenario"], payload["mode"], payload["learner"],
                   payload["feature_kind"], payload["config"],
                   payload["config_hash"], payload["seeds"], cells)


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Splitting


def _canonical_order(segments: list[SurgemeSegment]) -> list[int]:
    keys = [(s.trial_id, s.frames[0].timestamp, int(s.label), i)
            for i, s in enumerate(segments)]
    return [k[-1] for k in sorted(keys)]


def _group_by_trial(segments: list[SurgemeSegment]) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    for i in _canonical_order(segments):
        groups.setdefault(segments[i].trial_id, []).append(i)
    return groups


def stratified_folds(ds: Dataset, k: int, seed: int) -> list[tuple[list[int], list[int]]]:
    """Trial-grouped, class-stratified k-fold partition of segment indices.

    All segments of one trial land in the same fold (no leakage); across
    folds the per-class counts differ by at most one when trial grouping
    allows.  Raises TooFewPerClassError when a class present in the data
    has fewer than k segments.
    """
    segments = ds.segments
    counts: dict[int, int] = {}
    for s in segments:
        counts[int(s.label)] = counts.get(int(s.label), 0) + 1
    for cls, n in sorted(counts.items()):
        if n < k:
            raise TooFewPerClassError(
                f"class {SurgemeClass(cls).canonical_name} has {n} segments, "
                f"fewer than {k} folds")
    groups = _group_by_trial(segments)
    trial_ids = sorted(groups)
    rng = derive_rng(seed, "folds")
    order = rng.permutation(len(trial_ids))
    shuffled = [trial_ids[i] for i in order]
    # Biggest trials first, then greedily to the emptiest fold.
    shuffled.sort(key=lambda t: -len(groups[t]))
    fold_members: list[list[int]] = [[] for _ in range(k)]
    for trial in shuffled:
        target = min(range(k), key=lambda f: (len(fold_members[f]), f))
        fold_members[target].extend(groups[trial])
    folds = []
    for f in range(k):
        test = sorted(fold_members[f])
        train = sorted(i for g in range(k) if g != f for i in fold_members[g])
        folds.append((train, test))
    return folds


def grouped_holdout(segments: list[SurgemeSegment], fraction: float,
                    seed: int) -> tuple[list[int], list[int]]:
    """Trial-grouped (held_in, held_out) split; held_out gets ~fraction."""
    groups = _group_by_trial(segments)
    trial_ids = sorted(groups)
    rng = derive_rng(seed, "holdout")
    order = rng.permutation(len(trial_ids))
    shuffled = [trial_ids[i] for i in order]
    total = len(segments)
    held_out: list[int] = []
    for trial in shuffled:
        if len(held_out) < round(fraction * total):
            held_out.extend(groups[trial])
    held_out_set = set(held_out)
    held_in = [i for i in range(len(segments)) if i not in held_out_set]
    return sorted(held_in), sorted(held_out)


@dataclass
class MixResult:
    segments: list[int]      # indices into the real pool
    n_requested: int
    n_real: int
    shortfall: bool


def mix_training_data(sim: list[SurgemeSegment], real: list[SurgemeSegment],
                      ratio: float, seed: int) -> tuple[list[SurgemeSegment], MixResult]:
    """All sim segments plus a class-stratified sample of real segments.

    The sample size is round(ratio * |sim|): ratio 0 is sim-only and
    ratio 1 is a 50/50 mix.  When the real pool is smaller than the
    request, everything available is used and the result is flagged.
    """
    if ratio < 0:
        raise InvalidParamsError(f"ratio must be nonnegative, got {ratio}")
    wanted = int(np.floor(ratio * len(sim) + 0.5))
    by_class: dict[int, list[int]] = {}
    for i in _canonical_order(real):
        by_class.setdefault(int(real[i].label), []).append(i)
    n_pool = len(real)
    take = min(wanted, n_pool)
    shortfall = wanted > n_pool
    chosen: list[int] = []
    if take and n_pool:
        quotas: dict[int, int] = {}
        remainders: list[tuple[float, int]] = []
        assigned = 0
        for cls in sorted(by_class):
            exact = take * len(by_class[cls]) / n_pool
            quotas[cls] = int(np.floor(exact))
            assigned += quotas[cls]
            remainders.append((exact - quotas[cls], cls))
        remainders.sort(key=lambda t: (-t[0], t[1]))
        for _, cls in remainders:
            if assigned >= take:
                break
            if quotas[cls] < len(by_class[cls]):
                quotas[cls] += 1
                assigned += 1
        # Round-robin any remaining capacity (some classes may be full).
        while assigned < take:
            progressed = False
            for cls in sorted(by_class):
                if assigned >= take:
                    break
                if quotas[cls] < len(by_class[cls]):
                    quotas[cls] += 1
                    assigned += 1
                    progressed = True
            if not progressed:
                break
        for cls in sorted(by_class):
            pool = by_class[cls]
            rng = derive_rng(seed, "mix", cls)
            picked = rng.permutation(len(pool))[:quotas[cls]]
            chosen.extend(pool[i] for i in sorted(picked))
    mixed = [sim[i] for i in _canonical_order(sim)] + [real[i] for i in sorted(chosen)]
    return mixed, MixResult(sorted(chosen), wanted, len(chosen), shortfall)


# ---------------------------------------------------------------------------
# Feature preparation and cell execution


@dataclass
class _FeatureBank:
    """Precomputed per-segment design matrices shared by every cell."""

    seq_X: np.ndarray | None
    seq_y: np.ndarray | None
    frame_X: np.ndarray | None
    frame_y: np.ndarray | None
    frame_seg: np.ndarray | None  # segment index per frame row


def _build_bank(segments: list[SurgemeSegment], cfg: ExperimentConfig) -> _FeatureBank:
    if cfg.mode == "sequence_wise":
        rows, labels = [], []
        for seg in segments:
            sv = build_sequence_vector(resample_segment(seg, cfg.frames))
            vec = spectral_features(sv) if cfg.feature_kind == "spectral" else sv
            rows.append(vec.values)
            labels.append(int(seg.label))
        return _FeatureBank(np.stack(rows), np.asarray(labels, dtype=np.int64),
                            None, None, None)
    rows, labels, seg_idx = [], [], []
    for i, seg in enumerate(segments):
        for fv in build_frame_vectors(seg, cfg.include_joints):
            rows.append(fv.values)
            labels.append(int(fv.label))
            seg_idx.append(i)
    return _FeatureBank(None, None, np.stack(rows),
                        np.asarray(labels, dtype=np.int64),
                        np.asarray(seg_idx, dtype=np.int64))


def _design(bank: _FeatureBank, cfg: ExperimentConfig,
            seg_indices: list[int]) -> tuple[np.ndarray, np.ndarray]:
    if cfg.mode == "sequence_wise":
        idx = np.asarray(seg_indices, dtype=np.int64)
        return bank.seq_X[idx], bank.seq_y[idx]
    mask = np.isin(bank.frame_seg, np.asarray(seg_indices, dtype=np.int64))
    return bank.frame_X[mask], bank.frame_y[mask]


@dataclass
class _Cell:
    series: str
    seed: int
    fold: int | None
    ratio: float | None
    train_idx: list[int]
    test_idx: list[int]
    cell_seed: int
    n_train_sim: int
    n_train_real: int
    shortfall: bool = False


_CTX: dict = {}


def _init_ctx(bank: _FeatureBank, cfg: ExperimentConfig, factory) -> None:
    _CTX["bank"] = bank
    _CTX["cfg"] = cfg
    _CTX["factory"] = factory


def _run_cell(cell: _Cell) -> CellResult:
    bank: _FeatureBank = _CTX["bank"]
    cfg: ExperimentConfig = _CTX["cfg"]
    factory = _CTX["factory"]
    X_train, y_train = _design(bank, cfg, cell.train_idx)
    X_test, y_test = _design(bank, cfg, cell.test_idx)
    data = LabeledMatrix(X_train, y_train, n_classes=N_CLASSES)
    if factory is not None:
        model = factory(data, cfg.learner_params, cell.cell_seed)
    else:
        model = train_learner(cfg.learner, data, cfg.learner_params, cell.cell_seed)
    preds = model.predict(X_test)
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(confusion, (y_test, preds), 1)
    accuracy = float(np.mean(preds == y_test))
    return CellResult(cell.series, cell.seed, cell.fold, cell.ratio, accuracy,
                      confusion.tolist(), int(y_test.shape[0]),
                      cell.n_train_sim, cell.n_train_real, cell.shortfall)


def _execute(cells: list[_Cell], bank: _FeatureBank, cfg: ExperimentConfig,
             factory) -> list[CellResult]:
    if cfg.jobs <= 1:
        _init_ctx(bank, cfg, factory)
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=cfg.jobs, initializer=_init_ctx,
                             initargs=(bank, cfg, factory)) as pool:
        return list(pool.map(_run_cell, cells))


def _report(cfg: ExperimentConfig, cells: list[CellResult]) -> ExperimentReport:
    echo = asdict(cfg)
    echo["seeds"] = list(cfg.seeds)
    echo["ratio_grid"] = list(cfg.ratio_grid)
    return ExperimentReport(cfg.scenario, cfg.mode, cfg.learner, cfg.feature_kind,
                            echo, config_hash(cfg), list(cfg.seeds), cells)


def run_no_transfer(ds: Dataset, cfg: ExperimentConfig,
                    learner_factory=None) -> ExperimentReport:
    """k-fold cross-validation per seed on a single-domain dataset."""
    cfg.validate()
    if cfg.scenario != "no_transfer":
        raise InvalidParamsError("config scenario is not no_transfer")
    if cfg.domain is not None:
        segments = [s for s in ds.segments if s.domain == Domain(cfg.domain)]
    else:
        if len(ds.domains()) > 1:
            raise InvalidParamsError(
                "dataset has multiple domains; set cfg.domain to filter")
        segments = list(ds.segments)
    if not segments:
        raise InvalidParamsError("no segments to evaluate")
    sub = Dataset(segments, ds.profiles)
    bank = _build_bank(segments, cfg)
    cells: list[_Cell] = []
    for seed in cfg.seeds:
        folds = stratified_folds(sub, cfg.folds, derive_seed(cfg.master_seed, "cv", seed))
        for fold_id, (train_idx, test_idx) in enumerate(folds):
            cell_seed = derive_seed(cfg.master_seed, "no-transfer", cfg.learner,
                                    cfg.mode, cfg.feature_kind, seed, fold_id)
            cells.append(_Cell("cv", seed, fold_id, None, train_idx, test_idx,
                               cell_seed, 0, len(train_idx)))
    results = _execute(cells, bank, cfg, learner_factory)
    return _report(cfg, results)


def run_domain_transfer(ds: Dataset, cfg: ExperimentConfig,
                        learner_factory=None) -> ExperimentReport:
    """Ratio sweep: train on sim + a real fraction, test on held-out real.

    Held-out real trials are never eligible for mixing; the real-only
    baseline (train on the held-in real pool, test on the same holdout)
    is reported alongside for comparison.
    """
    cfg.validate()
    if cfg.scenario != "domain_transfer":
        raise InvalidParamsError("config scenario is not domain_transfer")
    segments = list(ds.segments)
    sim_idx = [i for i, s in enumerate(segments) if s.domain == Domain.SIM]
    real_idx = [i for i, s in enumerate(segments) if s.domain == Domain.REAL]
    if not sim_idx or not real_idx:
        raise MissingDomainError("domain transfer needs both sim and real segments")
    bank = _build_bank(segments, cfg)
    real_segments = [segments[i] for i in real_idx]
    cells: list[_Cell] = []
    for seed in cfg.seeds:
        held_in_local, held_out_local = grouped_holdout(
            real_segments, cfg.holdout_fraction,
            derive_seed(cfg.master_seed, "transfer-holdout", seed))
        held_in = [real_idx[i] for i in held_in_local]
        held_out = [real_idx[i] for i in held_out_local]
        pool = [segments[i] for i in held_in]
        sim_segments = [segments[i] for i in sim_idx]
        baseline_seed = derive_seed(cfg.master_seed, "baseline", cfg.learner,
                                    cfg.mode, cfg.feature_kind, seed)
        cells.append(_Cell("baseline", seed, None, None, sorted(held_in),
                           held_out, baseline_seed, 0, len(held_in)))
        for ratio in cfg.ratio_grid:
            _, info = mix_training_data(
                sim_segments, pool, ratio,
                derive_seed(cfg.master_seed, "mix", seed, ratio))
            train_idx = sorted(sim_idx) + sorted(held_in[i] for i in info.segments)
            cell_seed = derive_seed(cfg.master_seed, "transfer", cfg.learner,
                                    cfg.mode, cfg.feature_kind, seed, ratio)
            cells.append(_Cell("transfer", seed, None, float(ratio), train_idx,
                               held_out, cell_seed, len(sim_idx), info.n_real,
                               info.shortfall))
    results = _execute(cells, bank, cfg, learner_factory)
    return _report(cfg, results)
