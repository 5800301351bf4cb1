"""Report emission: JSON, CSV tables, and dependency-free SVG charts.

SVG is written by hand so identical inputs produce byte-identical files
(plot libraries embed run-specific ids, which would break re-runnability).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from speechconf.evaluation import CvResult, CvSummary

CLASS_NAMES = ("low", "medium", "high")


def write_cv_json(result: CvResult, path: str | Path) -> None:
    doc = {
        "summaries": {arm: s.to_dict() for arm, s in sorted(result.summaries.items())},
        "audit": result.audit.to_dict(),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")


def write_fold_csv(result: CvResult, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["arm", "fold", "f1_low", "f1_medium", "f1_high", "macro_f1", "n_pseudo_used"])
        for arm in sorted(result.summaries):
            for r in result.summaries[arm].reports:
                w.writerow([
                    arm, r.fold,
                    repr(float(r.per_class_f1[0])), repr(float(r.per_class_f1[1])),
                    repr(float(r.per_class_f1[2])), repr(r.macro_f1), r.n_pseudo_used,
                ])


def write_summary_csv(result: CvResult, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([
            "arm", "macro_f1_mean", "macro_f1_std",
            "f1_low_mean", "f1_medium_mean", "f1_high_mean",
        ])
        for arm in sorted(result.summaries):
            s = result.summaries[arm]
            w.writerow([
                arm, repr(s.macro_f1_mean), repr(s.macro_f1_std),
                repr(float(s.per_class_mean[0])), repr(float(s.per_class_mean[1])),
                repr(float(s.per_class_mean[2])),
            ])


def _svg_header(width: int, height: int) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">'
    ]


def macro_f1_bar_svg(summaries: dict[str, CvSummary], path: str | Path) -> None:
    """Bar chart of mean macro-F1 per arm with +-1 std whiskers."""
    arms = sorted(summaries)
    width, height = 80 + 90 * len(arms), 320
    base, top = height - 40, 30
    scale = base - top
    parts = _svg_header(width, height)
    parts.append(f'<line x1="50" y1="{base}" x2="{width - 10}" y2="{base}" stroke="#333"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = base - frac * scale
        parts.append(f'<text x="12" y="{y + 4:.1f}" fill="#555">{frac:.2f}</text>')
        parts.append(f'<line x1="46" y1="{y:.1f}" x2="{width - 10}" y2="{y:.1f}" '
                     f'stroke="#ddd" stroke-dasharray="3,3"/>')
    for i, arm in enumerate(arms):
        s = summaries[arm]
        x = 70 + 90 * i
        h = s.macro_f1_mean * scale
        y = base - h
        parts.append(f'<rect x="{x}" y="{y:.1f}" width="50" height="{h:.1f}" fill="#5a60bf"/>')
        e_lo = base - max(s.macro_f1_mean - s.macro_f1_std, 0.0) * scale
        e_hi = base - min(s.macro_f1_mean + s.macro_f1_std, 1.0) * scale
        cx = x + 25
        parts.append(f'<line x1="{cx}" y1="{e_lo:.1f}" x2="{cx}" y2="{e_hi:.1f}" stroke="#222"/>')
        parts.append(f'<text x="{cx}" y="{base + 16}" text-anchor="middle">{arm}</text>')
        parts.append(f'<text x="{cx}" y="{y - 6:.1f}" text-anchor="middle">'
                     f'{s.macro_f1_mean:.3f}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def confusion_heatmap_svg(confusion: np.ndarray, path: str | Path, title: str = "") -> None:
    """Row-normalized 3x3 confusion heatmap."""
    cell, margin = 90, 70
    width = margin + 3 * cell + 20
    height = margin + 3 * cell + 30
    parts = _svg_header(width, height)
    if title:
        parts.append(f'<text x="{margin}" y="20" font-size="14">{title}</text>')
    for t in range(3):
        for p in range(3):
            v = float(confusion[t, p])
            # white -> indigo ramp
            r = int(255 - v * (255 - 90))
            g = int(255 - v * (255 - 96))
            b = int(255 - v * (255 - 191))
            x = margin + p * cell
            y = margin + t * cell - 30
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                         f'fill="rgb({r},{g},{b})" stroke="#999"/>')
            text_fill = "#fff" if v > 0.5 else "#000"
            parts.append(f'<text x="{x + cell / 2:.0f}" y="{y + cell / 2 + 4:.0f}" '
                         f'text-anchor="middle" fill="{text_fill}">{v:.2f}</text>')
    for i, name in enumerate(CLASS_NAMES):
        parts.append(f'<text x="{margin + i * cell + cell / 2:.0f}" y="{margin + 3 * cell - 12}" '
                     f'text-anchor="middle">{name}</text>')
        parts.append(f'<text x="{margin - 8}" y="{margin + i * cell + cell / 2 - 26:.0f}" '
                     f'text-anchor="end">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def write_reports(result: CvResult, out_dir: str | Path, svg: bool = True) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, fn in (
        ("cv_report.json", write_cv_json),
        ("fold_reports.csv", write_fold_csv),
        ("arm_summaries.csv", write_summary_csv),
    ):
        fn(result, out_dir / name)
        written.append(out_dir / name)
    if svg:
        macro_f1_bar_svg(result.summaries, out_dir / "macro_f1.svg")
        written.append(out_dir / "macro_f1.svg")
        for arm, s in sorted(result.summaries.items()):
            mean_conf = np.mean([r.confusion for r in s.reports], axis=0)
            p = out_dir / f"confusion_{arm}.svg"
            confusion_heatmap_svg(mean_conf, p, title=f"confusion: {arm}")
            written.append(p)
    return written
