import math

import pytest

from tanet.report import sequence_report, summarize
from tanet.sweep import grid_points, parse_grid, sweep_parameters
from tanet.synthetic import SyntheticSceneConfig, synthetic_suite
from tanet.tracking import NCCTracker, TrackerConfig, track_sequence


def test_parse_grid():
    assert parse_grid("beta2=4,6,8") == {"beta2": [4.0, 6.0, 8.0]}
    assert len(grid_points(parse_grid("beta1=0.7,0.8; beta2=4,6"))) == 4
    for bad in ("", " ; ", "beta2", "gamma=1", "beta2="):
        with pytest.raises(ValueError):
            parse_grid(bad)


def test_rows_reproducible_in_isolation():
    seqs = synthetic_suite(SyntheticSceneConfig(num_frames=16, occlusion_windows=((5, 9),)), [1, 2])
    rows = sweep_parameters(seqs, parse_grid("k_local=1.5,2,3"), NCCTracker, None,
                            TrackerConfig(local_only=True))
    assert [r["k_local"] for r in rows] == [1.5, 2.0, 3.0]
    for row in rows:
        cfg = TrackerConfig(k_local=row["k_local"], local_only=True)
        reps = {s.name: sequence_report(track_sequence(s, None, NCCTracker(), None, cfg), s.annotations)
                for s in seqs}
        alone = summarize(reps).scalars()
        assert all(row[k] == v for k, v in alone.items())
        assert 0.0 <= row["reacquisition"] <= 1.0 or math.isnan(row["reacquisition"])
