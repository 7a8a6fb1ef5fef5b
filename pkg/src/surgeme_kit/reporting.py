"""Report emission: metrics tables, confusion matrices, ratio-sweep SVG.

All files are generated with fixed formatting and sorted iteration, so a
report emitted twice from the same inputs is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import SurgemeClass
from .experiments import ExperimentReport

SVG_WIDTH = 800
SVG_HEIGHT = 500
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 30, 40, 60
_SERIES_STYLE = {
    "transfer": "#1f77b4",
    "real-only baseline": "#ff7f0e",
}


def _fmt_ratio(ratio) -> str:
    return "" if ratio is None else repr(float(ratio))


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _metrics_csv(report: ExperimentReport) -> str:
    lines = ["scenario,mode,learner,feature_kind,ratio,fold,seed,accuracy"]
    for c in report.cells:
        scenario = report.scenario if c.series != "baseline" else "real_baseline"
        fold = "" if c.fold is None else str(c.fold)
        lines.append(",".join([
            scenario, report.mode, report.learner, report.feature_kind,
            _fmt_ratio(c.ratio), fold, str(c.seed), repr(c.accuracy)]))
    return "\n".join(lines) + "\n"


def _summary_csv(report: ExperimentReport) -> str:
    lines = ["scenario,series,mode,learner,feature_kind,ratio,mean,std,cells"]
    for row in report.summary_rows():
        lines.append(",".join([
            row["scenario"], row["series"], row["mode"], row["learner"],
            row["feature_kind"], _fmt_ratio(row["ratio"]),
            repr(row["mean"]), repr(row["std"]), str(row["cells"])]))
    return "\n".join(lines) + "\n"


def _confusion_csv(matrix: np.ndarray) -> str:
    names = [c.canonical_name for c in SurgemeClass]
    lines = ["true\\predicted," + ",".join(names)]
    for i, name in enumerate(names):
        lines.append(name + "," + ",".join(str(int(v)) for v in matrix[i]))
    return "\n".join(lines) + "\n"


def _ratio_token(ratio) -> str:
    if ratio is None:
        return "all"
    return repr(float(ratio)).replace(".", "p").replace("-", "m")


def _svg_plot(report: ExperimentReport) -> str:
    """Hand-rolled static SVG: accuracy vs real:sim ratio, two series."""
    curve = report.curve()
    baseline = [r for r in report.summary_rows() if r["series"] == "baseline"]
    x_max = max((r for r, _, _ in curve), default=1.0) or 1.0
    plot_w = SVG_WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = SVG_HEIGHT - _MARGIN_T - _MARGIN_B

    def px(ratio: float) -> float:
        return _MARGIN_L + plot_w * (ratio / x_max)

    def py(acc: float) -> float:
        return _MARGIN_T + plot_h * (1.0 - acc)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" '
        f'height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
    ]
    # axes and horizontal grid
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = py(frac)
        parts.append(f'<line x1="{_MARGIN_L}" y1="{y:.2f}" x2="{SVG_WIDTH - _MARGIN_R}" '
                     f'y2="{y:.2f}" stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{_MARGIN_L - 8}" y="{y + 4:.2f}" font-size="12" '
                     f'text-anchor="end" font-family="sans-serif">{frac:.2f}</text>')
    parts.append(f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" '
                 f'y2="{SVG_HEIGHT - _MARGIN_B}" stroke="black" stroke-width="1.5"/>')
    parts.append(f'<line x1="{_MARGIN_L}" y1="{SVG_HEIGHT - _MARGIN_B}" '
                 f'x2="{SVG_WIDTH - _MARGIN_R}" y2="{SVG_HEIGHT - _MARGIN_B}" '
                 f'stroke="black" stroke-width="1.5"/>')
    for ratio, _, _ in curve:
        x = px(ratio)
        parts.append(f'<line x1="{x:.2f}" y1="{SVG_HEIGHT - _MARGIN_B}" x2="{x:.2f}" '
                     f'y2="{SVG_HEIGHT - _MARGIN_B + 5}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{x:.2f}" y="{SVG_HEIGHT - _MARGIN_B + 20}" font-size="12" '
                     f'text-anchor="middle" font-family="sans-serif">{ratio:g}</text>')
    parts.append(f'<text x="{_MARGIN_L + plot_w / 2:.2f}" y="{SVG_HEIGHT - 15}" '
                 f'font-size="14" text-anchor="middle" font-family="sans-serif">'
                 f'real:sim ratio</text>')
    parts.append(f'<text x="20" y="{_MARGIN_T + plot_h / 2:.2f}" font-size="14" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'transform="rotate(-90 20 {_MARGIN_T + plot_h / 2:.2f})">accuracy</text>')

    series: list[tuple[str, list[tuple[float, float]]]] = []
    if curve:
        series.append(("transfer", [(r, m) for r, m, _ in curve]))
    if baseline and curve:
        mean = baseline[0]["mean"]
        series.append(("real-only baseline", [(r, mean) for r, _, _ in curve]))
    for name, points in series:
        color = _SERIES_STYLE[name]
        coords = " ".join(f"{px(r):.2f},{py(a):.2f}" for r, a in points)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="2"/>')
        for r, a in points:
            parts.append(f'<circle cx="{px(r):.2f}" cy="{py(a):.2f}" r="4" '
                         f'fill="{color}"/>')
    for i, (name, _) in enumerate(series):
        color = _SERIES_STYLE[name]
        y = _MARGIN_T + 10 + 20 * i
        x = SVG_WIDTH - _MARGIN_R - 190
        parts.append(f'<rect x="{x}" y="{y - 9}" width="12" height="12" fill="{color}"/>')
        parts.append(f'<text x="{x + 18}" y="{y + 2}" font-size="13" '
                     f'font-family="sans-serif">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """Write the full report file set; byte-stable for identical reports."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, text: str) -> None:
        path = out_dir / name
        _write_text(path, text)
        written.append(path)

    emit("metrics.csv", _metrics_csv(report))
    emit("summary.csv", _summary_csv(report))
    emit("config.json", json.dumps(report.config, indent=2, sort_keys=True) + "\n")
    emit("report.json", report.to_json() + "\n")
    groups = sorted({(c.series, c.ratio) for c in report.cells},
                    key=lambda k: (k[0], -1.0 if k[1] is None else k[1]))
    for series, ratio in groups:
        matrix = report.aggregate_confusion(series, ratio)
        emit(f"confusion_{series}_{_ratio_token(ratio)}.csv", _confusion_csv(matrix))
    if any(c.series == "transfer" for c in report.cells):
        emit("ratio_sweep.svg", _svg_plot(report))
    return written
