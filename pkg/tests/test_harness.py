import csv
import json
import math

import pytest

from incompat import harness
from incompat.errors import ConfigInvalid, RankOutOfRange


def strip_clock(report):
    data = json.loads(report.to_json())
    data.pop("wall_clock")
    return json.dumps(data, sort_keys=True)


def small_moments(**kw):
    cfg = dict(experiment="moments", dims=[2, 4], trials=2, seed=19, params={"samples": 2000, "powers": [1, 2]})
    cfg.update(kw)
    return harness.ExperimentConfig.from_dict(cfg)


@pytest.mark.parametrize(
    "data",
    [
        {"experiment": "nope"},
        {"experiment": "moments", "trials": 0},
        {"experiment": "moments", "dims": []},
        {"experiment": "moments", "dims": [0]},
        {"experiment": "moments", "seed": -3},
        {"experiment": "moments", "colour": "red"},
        {"dims": [2]},
        {"experiment": "moments", "targets": [{"name": "x", "column": "z"}]},
        {"experiment": "moments", "targets": [{"name": "x", "column": "z", "reduce": "median", "op": "<=", "threshold": 1}]},
    ],
)
def test_config_validation(data):
    with pytest.raises(ConfigInvalid):
        harness.ExperimentConfig.from_dict(data)


def test_shipped_configs_load():
    for name in harness.EXPERIMENTS:
        cfg = harness.ExperimentConfig.load(name)
        assert cfg.experiment == name
        assert cfg.targets, "every shipped config declares targets"


def test_missing_config():
    with pytest.raises(ConfigInvalid):
        harness.ExperimentConfig.load("/nonexistent/thing.json")


def test_deterministic_across_runs_and_workers():
    a = harness.run_experiment(small_moments(), workers=1, write=False)
    b = harness.run_experiment(small_moments(), workers=1, write=False)
    c = harness.run_experiment(small_moments(), workers=4, write=False)
    assert strip_clock(a) == strip_clock(b) == strip_clock(c)


def test_seed_changes_output():
    a = harness.run_experiment(small_moments(), workers=1, write=False)
    b = harness.run_experiment(small_moments(seed=20), workers=1, write=False)
    assert strip_clock(a) != strip_clock(b)


def test_record_count():
    rep = harness.run_experiment(small_moments(), workers=1, write=False)
    # trials x dims x powers
    assert len(rep.records) == 2 * 2 * 2
    cfg = harness.ExperimentConfig.from_dict(
        dict(experiment="many_proj_witness", dims=[6], g=3, trials=3, seed=1, t_grid=[0.5, 0.9, 1.0])
    )
    assert len(harness.run_experiment(cfg, workers=1, write=False).records) == 3 * 1 * 3


def test_moment_example_d4():
    cfg = harness.ExperimentConfig.from_dict(
        dict(experiment="moments", dims=[4], trials=1, seed=19, params={"samples": 100_000, "powers": [2]})
    )
    (rec,) = harness.run_experiment(cfg, workers=1, write=False).records
    assert rec["exact"] == pytest.approx(1 / 5)
    assert abs(rec["estimate"] - 0.2) <= 3 * rec["stderr"]


def test_failed_jobs_are_excluded(monkeypatch):
    real = harness.EXPERIMENTS["moments"]

    def flaky(cfg, d, trial, rng):
        if trial % 2:
            raise RankOutOfRange("synthetic failure")
        return real(cfg, d, trial, rng)

    monkeypatch.setitem(harness.EXPERIMENTS, "moments", flaky)
    cfg = small_moments(
        trials=4, targets=[{"name": "z", "column": "z", "reduce": "abs_max", "op": "<=", "threshold": 10}]
    )
    rep = harness.run_experiment(cfg, workers=2, write=False)
    failed = [r for r in rep.records if r["status"] == "failed"]
    assert len(failed) == rep.excluded == 2 * 2
    assert all("RankOutOfRange" in r["error"] for r in failed)
    assert rep.targets[0]["n"] == 2 * 2 * 2
    assert rep.aggregates["d=2,p=1"]["estimate"]["n"] == 2


def test_targets_and_where_filter():
    recs = [{"t": 0.1, "ok": True, "x": 1.0}, {"t": 0.2, "ok": False, "x": -3.0}, {"t": 0.1 + 1e-17, "ok": True, "x": 2.0}]
    out = harness.evaluate_targets(
        recs,
        [
            {"name": "a", "column": "ok", "where": {"t": 0.1}, "reduce": "frac", "op": ">=", "threshold": 1.0},
            {"name": "b", "column": "x", "reduce": "abs_max", "op": "<=", "threshold": 2.5},
            {"name": "c", "column": "x", "where": {"t": 0.7}, "reduce": "max", "op": "<=", "threshold": 1},
        ],
    )
    assert [o["passed"] for o in out] == [True, False, False]
    assert out[0]["n"] == 2 and out[1]["value"] == 3.0 and out[2]["n"] == 0


def test_report_files(tmp_path):
    rep = harness.run_experiment(small_moments(output_path=str(tmp_path / "out" / "m")), workers=1)
    jpath, cpath = tmp_path / "out" / "m.json", tmp_path / "out" / "m.csv"
    data = json.loads(jpath.read_text())
    assert data["experiment"] == "moments" and len(data["records"]) == len(rep.records)
    assert set(data) >= {"aggregates", "targets", "passed", "excluded", "wall_clock", "config"}
    with open(cpath) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(rep.records)
    assert {"trial", "d", "p", "z", "status"} <= set(rows[0])


def test_worker_env(monkeypatch):
    monkeypatch.setenv(harness.WORKERS_ENV, "3")
    assert harness.default_workers() == 3
    monkeypatch.setenv(harness.WORKERS_ENV, "junk")
    assert harness.default_workers() == 1


def test_induced_curves_shape():
    cur = harness.induced_curves(2, [0.05, 0.1, 0.5])
    # at k = g = 2 the witness threshold is the vacuous c = 1
    assert [r["verdict"] for r in cur["grid"]] == ["compatible", "compatible", "unknown"]
    assert cur["thresholds"]["witness_c"] == pytest.approx(1)
    cur = harness.induced_curves(10, [0.9])
    assert cur["thresholds"]["witness_c"] == pytest.approx(72 / 136)
    assert cur["grid"][0]["verdict"] == "incompatible"


def test_kesten_mckay_experiment_example():
    rep = harness.run_experiment(harness.ExperimentConfig.load("kesten_mckay"), workers=2, write=False)
    assert rep.passed
    for r in rep.records:
        assert r["ks"] <= 0.05
        assert abs(r["lambda_max"] - 2 * math.sqrt(2)) <= 0.2
