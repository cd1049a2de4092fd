import csv
import json

import numpy as np
import pytest

from tanet.geometry import BoundingBox
from tanet.metrics import f1_score, evaluate
from tanet.report import emit_report, load_report, read_curves, summarize


@pytest.fixture
def reports():
    rng = np.random.default_rng(11)
    out = {}
    for k in range(3):
        gts = [BoundingBox(*rng.uniform(0, 50, 2), 10, 10) for _ in range(15)]
        preds = [g.translate(*rng.normal(0, 3, 2)) for g in gts]
        out[f"seq{k}"] = evaluate(preds, gts)
    return out


def test_round_trip_and_files(reports, tmp_path):
    agg = summarize(reports)
    files = emit_report(agg, tmp_path, per_sequence=reports)
    assert {p.name for p in files} == {"report.json", "curves.csv", "per_sequence.csv",
                                        "success_plot.png", "precision_plot.png"}
    assert load_report(tmp_path) == agg
    curves = read_curves(tmp_path / "curves.csv")
    assert curves["success"].shape == (21, 2) and curves["precision"].shape == (51, 2)
    np.testing.assert_array_equal(curves["success"][:, 1], agg.sr_curve)
    rows = list(csv.DictReader(open(tmp_path / "per_sequence.csv")))
    assert [r["sequence"] for r in rows] == ["seq0", "seq1", "seq2"]
    assert float(rows[1]["auc"]) == reports["seq1"].auc


def test_f1_field_is_consistent(reports, tmp_path):
    emit_report(summarize(reports), tmp_path, plots=False)
    d = json.loads((tmp_path / "report.json").read_text())
    assert d["lt_f1"] == f1_score(d["lt_precision"], d["lt_recall"])
    assert not (tmp_path / "success_plot.png").exists()
