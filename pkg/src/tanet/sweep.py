"""Grid sweeps of the switch thresholds over a set of sequences."""

from __future__ import annotations

import itertools
import math
from dataclasses import replace
from typing import Callable, Optional

from .metrics import reacquired, reacquisition_rate
from .report import sequence_report, summarize
from .tracking import AttentionModel, BaselineTracker, TrackerConfig, track_sequence

SWEEPABLE = ("beta1", "beta2", "k_local", "k_global", "tau")


def parse_grid(text: str) -> dict[str, list[float]]:
    """``"beta1=0.7,0.8;beta2=4,6"`` -> ``{"beta1": [0.7, 0.8], "beta2": [4.0, 6.0]}``."""
    grid: dict[str, list[float]] = {}
    for part in filter(None, (p.strip() for p in text.split(";"))):
        if "=" not in part:
            raise ValueError(f"grid entry {part!r} is not 'name=v1,v2,...'")
        name, values = (s.strip() for s in part.split("=", 1))
        if name not in SWEEPABLE:
            raise ValueError(f"cannot sweep {name!r}; choose from {', '.join(SWEEPABLE)}")
        vals = [float(v) for v in values.split(",") if v.strip()]
        if not vals:
            raise ValueError(f"grid entry {name!r} has no values")
        grid[name] = vals
    if not grid:
        raise ValueError("empty parameter grid")
    return grid


def grid_points(grid: dict[str, list[float]]) -> list[dict[str, float]]:
    names = list(grid)
    return [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]


def evaluate_tracking(sequences, baseline_factory: Callable[[], BaselineTracker],
                      attention: Optional[AttentionModel], cfg: TrackerConfig) -> dict:
    """Track and score every sequence; returns aggregate metrics plus the re-acquisition rate."""
    per_seq, outcomes = {}, []
    for seq in sequences:
        results = track_sequence(seq, seq.annotations[0], baseline_factory(), attention, cfg)
        per_seq[seq.name] = sequence_report(results, seq.annotations)
        preds = [None] + [r.box for r in results]
        outcomes.append(reacquired(preds, list(seq.annotations)))
    row = summarize(per_seq).scalars()
    valid = [o for o in outcomes if o is not None]
    row["reacquisition"] = reacquisition_rate(valid) if valid else math.nan
    return row


def sweep_parameters(sequences, grid: dict[str, list[float]], baseline_factory,
                     attention: Optional[AttentionModel], base: TrackerConfig = TrackerConfig()) -> list[dict]:
    """One row per grid point, in grid order: the parameters followed by the metrics."""
    sequences = list(sequences)
    if not sequences:
        raise ValueError("sweep needs at least one sequence")
    points = grid_points(grid)
    if not points:
        raise ValueError("empty parameter grid")
    rows = []
    for point in points:
        cfg = replace(base, **point)
        rows.append({**point, **evaluate_tracking(sequences, baseline_factory, attention, cfg)})
    return rows
