import csv
import json

import numpy as np
import pytest

from predclust.cli import main
from predclust.milp import import_mps


@pytest.fixture
def synth_csv(tmp_path):
    path = tmp_path / "s.csv"
    assert main(["synth", "--n", "40", "--k-true", "2", "--seed", "3", "--out", str(path)]) == 0
    return path


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def strip_times(obj):
    if isinstance(obj, dict):
        return {k: strip_times(v) for k, v in obj.items() if k != "wall_time"}
    if isinstance(obj, list):
        return [strip_times(v) for v in obj]
    return obj


def test_synth_writes_rows_and_truth(synth_csv, tmp_path):
    rows = read_rows(synth_csv)
    assert len(rows) == 40
    assert set(rows[0]) == {"x1", "x2", "y", "true_cluster"}
    again = tmp_path / "again.csv"
    main(["synth", "--n", "40", "--k-true", "2", "--seed", "3", "--out", str(again)])
    assert again.read_bytes() == synth_csv.read_bytes()


def test_fit_greedy_outputs(synth_csv, tmp_path):
    out, asg = tmp_path / "r.json", tmp_path / "a.csv"
    code = main(["fit", str(synth_csv), "--k", "2", "--exclude", "true_cluster",
                 "--restarts", "3", "--out", str(out), "--assignments", str(asg)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["method"] == "greedy"
    assert len(report["clusters"]) == 2
    c0 = report["clusters"][0]
    assert set(c0["weights"]) == {"x1", "x2", "intercept"}
    assert set(c0["feature_means"]) == {"x1", "x2"}
    rows = read_rows(asg)
    assert list(rows[0]) == ["row_id", "cluster", "loss"]
    assert len(rows) == 40
    assert sum(float(r["loss"]) for r in rows) == pytest.approx(report["loss"], rel=1e-9)


def test_fit_is_reproducible(synth_csv, tmp_path):
    outs = []
    for name in ("one.json", "two.json"):
        path = tmp_path / name
        main(["fit", str(synth_csv), "--k", "2", "--exclude", "true_cluster", "--geometry", "bb",
              "--restarts", "2", "--out", str(path)])
        outs.append(strip_times(json.loads(path.read_text())))
    assert outs[0] == outs[1]


def test_seed_env_fallback(synth_csv, tmp_path, monkeypatch):
    monkeypatch.setenv("PREDCLUST_SEED", "17")
    out = tmp_path / "r.json"
    main(["fit", str(synth_csv), "--k", "2", "--exclude", "true_cluster", "--restarts", "1", "--out", str(out)])
    assert json.loads(out.read_text())["config"]["seed"] == 17


def test_fit_exact_small(synth_csv, tmp_path):
    out = tmp_path / "e.json"
    code = main(["fit", str(synth_csv), "--k", "2", "--exclude", "true_cluster", "--method", "exact",
                 "--geometry", "arbitrary", "--time-limit", "20", "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["method"] == "exact"
    assert report["big_m"]["M"] > 0
    assert report["metrics"]["train_r2"] > 0.9


def test_missing_file_exit_2(tmp_path, capsys):
    assert main(["fit", str(tmp_path / "nope.csv"), "--k", "2"]) == 2
    assert "not found" in capsys.readouterr().err


def test_exact_cap_refusal(synth_csv, capsys):
    code = main(["fit", str(synth_csv), "--k", "2", "--exclude", "true_cluster", "--method", "exact",
                 "--exact-cap", "10"])
    assert code == 2
    assert "--method greedy" in capsys.readouterr().err


def test_unknown_config_key(synth_csv, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"greedy": {"restarts": 2, "bogus": 1}}))
    assert main(["fit", str(synth_csv), "--k", "2", "--config", str(cfg)]) == 2
    assert "greedy.bogus" in capsys.readouterr().err
    cfg.write_text(json.dumps({"nosection": {}}))
    assert main(["fit", str(synth_csv), "--k", "2", "--config", str(cfg)]) == 2


def test_config_file_applies(synth_csv, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"data": {"exclude": ["true_cluster"]}, "greedy": {"restarts": 2}}))
    out = tmp_path / "r.json"
    assert main(["fit", str(synth_csv), "--k", "2", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert len(report["restart_losses"]) == 2


def test_no_incumbent_exit_3(synth_csv, tmp_path, monkeypatch):
    import predclust.milp as milp

    def stopped(model, cfg=None):
        return milp.SolveResult(milp.Status.TIME_LIMIT, None, np.inf, -np.inf, np.inf, 1, 0.0)

    monkeypatch.setattr(milp, "solve_milp", stopped)
    out = tmp_path / "e.json"
    code = main(["fit", str(synth_csv), "--k", "2", "--exclude", "true_cluster", "--method", "exact",
                 "--out", str(out)])
    assert code == 3
    assert json.loads(out.read_text())["status"] == "time_limit"


def test_export_round_trip_and_determinism(synth_csv, tmp_path):
    a, b = tmp_path / "a.mps", tmp_path / "b.mps"
    for p in (a, b):
        assert main(["export", str(synth_csv), "--k", "2", "--exclude", "true_cluster", "--mps", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    model = import_mps(a)
    assert model.metadata["geometry"] == "cc"
    assert model.metadata["N"] == 40


def test_export_refuses_arbitrary_hinge(tmp_path):
    path = tmp_path / "c.csv"
    main(["synth", "--task", "classification", "--n", "30", "--k-true", "2", "--out", str(path)])
    code = main(["export", str(path), "--task", "classification", "--k", "2", "--exclude", "true_cluster",
                 "--geometry", "arbitrary", "--mps", str(tmp_path / "m.mps")])
    assert code == 2


def test_evaluate_reports_per_k(synth_csv, tmp_path):
    out = tmp_path / "ev.json"
    code = main(["evaluate", str(synth_csv), "--exclude", "true_cluster", "--k-grid", "2..3",
                 "--restarts", "2", "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert len(report["per_fold"]) == 5
    assert set(report["mean_val_scores"]) == {"2", "3"}
    assert all(f["k"] in (2, 3) for f in report["per_fold"])
    assert report["mean"] == pytest.approx(np.mean([f["r2"] for f in report["per_fold"]]))


def test_benchmark_csv(tmp_path):
    out = tmp_path / "b.csv"
    code = main(["benchmark", "--grid", "12,30", "--geometries", "cc", "--milp-cap", "12",
                 "--milp-time-limit", "5", "--restarts", "2", "--out", str(out)])
    assert code == 0
    rows = read_rows(out)
    assert [(r["N"], r["method"]) for r in rows] == [("12", "greedy"), ("12", "milp"), ("30", "greedy")]
