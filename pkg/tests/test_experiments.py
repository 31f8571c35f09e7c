import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from surverify import GaussianLinearSpec, InputError
from surverify.experiments import (CsvSubgroup, ExperimentPlan, ROW_FIELDS, SyntheticSweep,
                                   loglog_slope, reconstruction_baseline, required_n,
                                   rows_to_csv, run_csv_subgroup, run_experiment,
                                   run_synthetic_sweep)
from surverify.plotting import Marker, line_chart


def small_sweep(**kw):
    fields = dict(d=5, survey_m=2000, mu_grid=(0.0, 0.5, 1.0), trials=4,
                  survey_size_policy="off")
    fields.update(kw)
    return ExperimentPlan(SyntheticSweep(**fields))


def csv_plan(path, **kw):
    fields = dict(path=str(path), response_column="y", split_column="group", split_value=0.0,
                  epsilon_grid=(0.02, 0.05, 0.2), trials=10, survey_size_policy="off")
    fields.update(kw)
    return ExperimentPlan(CsvSubgroup(**fields))


def test_synthetic_row_invariants():
    result = run_synthetic_sweep(small_sweep())
    assert [r.mu for r in result.rows] == [0.0, 0.5, 1.0]
    for r in result.rows:
        assert 0.0 <= r.acceptance_rate <= 1.0
        assert 1 <= r.avg_samples_used <= r.tau == 754
        assert r.early_rejection_ratio == pytest.approx(r.avg_samples_used / r.tau)
        assert r.fdd_squared >= r.fdd_estimate ** 2 - 1e-12 and r.trials == 4
    fdd = [r.fdd_estimate for r in result.rows]
    assert fdd == sorted(fdd)


def test_single_trial_at_zero_mu():
    result = run_synthetic_sweep(small_sweep(mu_grid=(0.0,), trials=1))
    (row,) = result.rows
    assert row.acceptance_rate in (0.0, 1.0) and row.trials == 1


def test_plan_roundtrip_and_validation():
    plan = ExperimentPlan.synthetic("desk", trials=3)
    assert ExperimentPlan.from_dict(json.loads(json.dumps(plan.to_dict()))) == plan
    with pytest.raises(InputError):
        ExperimentPlan.synthetic("huge")
    with pytest.raises(InputError):
        ExperimentPlan.from_dict({"mode": "synthetic", "plan": {"bogus": 1}})
    with pytest.raises(InputError):
        SyntheticSweep(mu_grid=())


def test_identical_subgroups_mostly_accept(same_csv):
    result = run_csv_subgroup(csv_plan(same_csv, epsilon_grid=(0.05, 0.2)))
    assert all(r.acceptance_rate >= 0.9 for r in result.rows)
    assert result.rows[0].fdd_estimate < 0.05
    assert result.meta["normalization_scope"] == "global"


def test_planted_gap_rejects_early(gap_csv):
    result = run_csv_subgroup(csv_plan(gap_csv, epsilon_grid=(0.01, 0.02)))
    for r in result.rows:
        assert r.acceptance_rate == 0.0 and r.early_rejection_ratio < 0.5
    assert result.rows[0].fdd_estimate > 0.3


def test_acceptance_grows_with_epsilon(gap_csv):
    rates = [r.acceptance_rate for r in run_csv_subgroup(
        csv_plan(gap_csv, epsilon_grid=(0.01, 0.5))).rows]
    assert rates[0] <= rates[-1]


def test_csv_split_errors(same_csv):
    with pytest.raises(InputError, match="leaves"):
        run_csv_subgroup(csv_plan(same_csv, split_value=7.0))
    with pytest.raises(InputError, match="not found"):
        run_csv_subgroup(csv_plan(same_csv, split_column="nope"))


def test_artifacts(tmp_path):
    out = tmp_path / "run"
    result = run_experiment(small_sweep(trials=2), output_dir=str(out), trace=True)
    with open(out / "rows.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == ROW_FIELDS and len(rows) == 3
    assert float(rows[1]["fdd_estimate"]) == result.rows[1].fdd_estimate
    plan = json.loads((out / "plan.json").read_text())
    assert plan["mode"] == "synthetic" and "l_hat_s" in plan["meta"]
    assert len(list(out.glob("report_*.json"))) == 6
    for name in ("acceptance.svg", "samples.svg"):
        root = ET.parse(out / name).getroot()
        markers = [e for e in root.iter() if e.get("class") == "marker"]
        assert len(markers) == 2


def test_csv_rows_are_bit_exact():
    result = run_synthetic_sweep(small_sweep(trials=2))
    text = rows_to_csv(result.rows)
    back = list(csv.DictReader(text.splitlines()))
    assert [float(r["fdd_squared"]) for r in back] == [r.fdd_squared for r in result.rows]
    assert back[0]["mu"] == "0.0"


def test_line_chart_is_well_formed():
    svg = line_chart([0.0, 1.0, 2.0], [0.1, 0.5, 0.9], [Marker(0.5, "a", "red")],
                     title="t <&>", xlabel="x", ylabel="y")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert any(e.get("class") == "series" for e in root.iter())


def test_baseline_consistency_and_slope():
    rng = np.random.default_rng(0)
    spec = GaussianLinearSpec(0.1 * rng.standard_normal(40), noise_sd=0.1)
    rows = reconstruction_baseline(spec, (10, 20, 40), trials=10)
    for d in (10, 20, 40):
        errs = [r.fdd_error for r in rows if r.d == d and not r.underdetermined]
        assert errs[0] > errs[-1]
    assert any(r.underdetermined for r in rows)
    slope = loglog_slope(required_n(rows, target=0.05))
    assert 0.8 <= slope <= 1.2
    with pytest.raises(InputError):
        loglog_slope({10: 5.0})
