"""Writing and reading metric reports, curves and per-sequence breakdowns."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .metrics import PR_THRESHOLDS, SR_THRESHOLDS, MetricReport, aggregate, evaluate
from .tracking import TrackResult

REPORT_FILE = "report.json"
CURVES_FILE = "curves.csv"
PER_SEQUENCE_FILE = "per_sequence.csv"


def sequence_report(results: list[TrackResult], annotations) -> MetricReport:
    """Score tracked frames against the annotations indexed by ``frame_index``."""
    preds = [r.box for r in results]
    gts = [annotations[r.frame_index] for r in results]
    return evaluate(preds, gts)


def emit_report(report: MetricReport, out_dir: str | Path,
                per_sequence: Optional[dict[str, MetricReport]] = None, plots: bool = True) -> list[Path]:
    """Write ``report.json``, ``curves.csv``, optional per-sequence CSV and PNG plots."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / REPORT_FILE
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    written.append(path)

    path = out / CURVES_FILE
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["curve", "threshold", "value"])
        for t, v in zip(SR_THRESHOLDS, report.sr_curve):
            w.writerow(["success", repr(float(t)), repr(v)])
        for t, v in zip(PR_THRESHOLDS, report.pr_curve):
            w.writerow(["precision", repr(float(t)), repr(v)])
    written.append(path)

    if per_sequence:
        path = out / PER_SEQUENCE_FILE
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            keys = list(next(iter(per_sequence.values())).scalars())
            w.writerow(["sequence", *keys])
            for name, rep in per_sequence.items():
                sc = rep.scalars()
                w.writerow([name, *(repr(sc[k]) for k in keys)])
        written.append(path)

    if plots:
        written += _plot_curves(report, out)
    return written


def _plot_curves(report: MetricReport, out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    for name, xs, ys, xlabel, label in (
        ("success_plot.png", SR_THRESHOLDS, report.sr_curve, "overlap threshold", f"AUC {report.auc:.3f}"),
        ("precision_plot.png", PR_THRESHOLDS, report.pr_curve, "location error threshold (px)",
         f"PR@20 {report.pr_at_20:.3f}"),
    ):
        fig, ax = plt.subplots(figsize=(4, 3), dpi=100)
        ax.plot(xs, ys, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylim(0, 1.02)
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(out / name)
        plt.close(fig)
        paths.append(out / name)
    return paths


def load_report(path: str | Path) -> MetricReport:
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_FILE
    return MetricReport.from_dict(json.loads(path.read_text()))


def read_curves(path: str | Path) -> dict[str, np.ndarray]:
    rows = list(csv.DictReader(open(path, newline="")))
    return {kind: np.array([[float(r["threshold"]), float(r["value"])] for r in rows if r["curve"] == kind])
            for kind in ("success", "precision")}


def summarize(per_sequence: dict[str, MetricReport]) -> MetricReport:
    return aggregate(per_sequence[k] for k in per_sequence)
