"""Delimited run outputs and learning-curve figures.

Curve files are written with a fixed column order, sorted rows, repr
floats and ``\\n`` line endings, so identical runs produce identical
bytes.  Figures render through the Agg backend with the date metadata
stripped for the same reason.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .session import CurvePoint, SessionResult

CURVE_COLUMNS = ("arm", "round", "seen", "strong_labels", "weak_labels", "accuracy")
SUMMARY_COLUMNS = ("arm", "rounds", "strong_labels", "weak_labels", "final_accuracy")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_curve(path, points, arm: str = "session") -> None:
    """One arm's per-round curve as CSV."""
    write_curves(path, {arm: points})


def write_curves(path, arms: dict[str, list[CurvePoint]]) -> None:
    """Several arms' curves in one file, rows sorted by (arm, round)."""
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for arm in sorted(arms):
            for pt in sorted(arms[arm], key=lambda p: p.round_index):
                writer.writerow([arm, pt.round_index, _fmt(pt.seen),
                                 _fmt(pt.strong_total), _fmt(pt.weak_total),
                                 _fmt(pt.accuracy)])


def read_curves(path) -> dict[str, list[CurvePoint]]:
    path = Path(path)
    arms: dict[str, list[CurvePoint]] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CURVE_COLUMNS:
            raise ValueError(f"{path}: expected columns {CURVE_COLUMNS}")
        for row in reader:
            acc = row["accuracy"]
            arms.setdefault(row["arm"], []).append(CurvePoint(
                round_index=int(row["round"]), seen=int(row["seen"]),
                strong_total=int(row["strong_labels"]),
                weak_total=int(row["weak_labels"]),
                accuracy=float(acc) if acc else None))
    for points in arms.values():
        points.sort(key=lambda p: p.round_index)
    return arms


def write_summary(path, arms: dict[str, SessionResult]) -> None:
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for arm in sorted(arms):
            res = arms[arm]
            writer.writerow([arm, res.rounds, res.strong_total, res.weak_total,
                             _fmt(res.final_accuracy)])


def write_result(path, result: SessionResult, extra: dict | None = None) -> None:
    """Machine-readable final summary for one run."""
    payload = {
        "final_accuracy": result.final_accuracy,
        "rounds": result.rounds,
        "seen": result.seen,
        "strong_labels": result.strong_total,
        "weak_labels": result.weak_total,
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def render_curves(path, arms: dict[str, list[CurvePoint]],
                  title: str = "Learning curves") -> None:
    """Accuracy against manual-label count, one line per arm."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5), dpi=120)
    for arm in sorted(arms):
        xs = [pt.strong_total for pt in arms[arm] if pt.accuracy is not None]
        ys = [pt.accuracy for pt in arms[arm] if pt.accuracy is not None]
        if not xs:
            continue
        ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2, label=arm)
    ax.set_xlabel("manually labeled instances")
    ax.set_ylabel("test accuracy")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
