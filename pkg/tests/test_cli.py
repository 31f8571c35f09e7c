import csv
import io
import json
import subprocess
import sys


from surverify.cli import main

from tests.conftest import subgroup_csv


def split_files(tmp_path, beta_a, beta_b, m=1500, seed=0):
    """Write the two groups of a subgroup CSV as separate survey / population files."""
    full = subgroup_csv(tmp_path / "full.csv", beta_a, beta_b, m=m, seed=seed)
    lines = full.read_text().splitlines()
    header, rows = lines[0], lines[1:]
    out = []
    for g, name in ((0.0, "survey.csv"), (1.0, "population.csv")):
        keep = [r for r in rows if float(r.split(",")[-2]) == g]
        path = tmp_path / name
        path.write_text("\n".join([header] + keep) + "\n")
        out.append(str(path))
    return out


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_samplesize_ridge(capsys):
    code, out, _ = run(["samplesize", "--class", "ridge", "--d", "50", "--epsilon", "0.05",
                        "--delta", "0.1"], capsys)
    payload = json.loads(out)
    assert code == 0 and payload["required_survey_size"] == 1_024_000_000
    assert payload["dominating_term"] == "ridge"


def test_samplesize_csv_format(capsys):
    code, out, _ = run(["samplesize", "--class", "lasso", "--d", "50", "--format", "csv"],
                       capsys)
    rec = next(csv.DictReader(io.StringIO(out)))
    assert code == 0 and int(rec["required_survey_size"]) == 94_313_886


def test_test_accepts_identical_groups(tmp_path, capsys):
    survey, population = split_files(tmp_path, [0.3, -0.2, 0.1], [0.3, -0.2, 0.1])
    code, out, _ = run(["test", "--survey", survey, "--population", population, "--response", "y",
                        "--epsilon", "0.1", "--survey-size-policy", "off", "--seed", "3"], capsys)
    report = json.loads(out)
    assert code == 0 and report["verdict"] == "accept" and report["seed"] == 3
    assert "gamma_trajectory" not in report


def test_test_rejects_planted_gap(tmp_path, capsys):
    survey, population = split_files(tmp_path, [0.3, -0.2, 0.1], [-0.4, 0.4, -0.3])
    code, out, _ = run(["test", "--survey", survey, "--population", population, "--response", "y",
                        "--survey-size-policy", "off", "--trace"], capsys)
    report = json.loads(out)
    assert code == 1 and report["rejected_early"]
    assert len(report["gamma_trajectory"]) == report["rounds_used"]


def test_exhausted_population_is_resource_error(tmp_path, capsys):
    survey, population = split_files(tmp_path, [0.3, -0.2, 0.1], [0.3, -0.2, 0.1], m=40)
    code, _, err = run(["test", "--survey", survey, "--population", population, "--response", "y",
                        "--survey-size-policy", "off", "--without-replacement"], capsys)
    assert code == 3 and "error" in err


def test_bad_input_exit_codes(tmp_path, capsys):
    assert run(["samplesize", "--d", "50", "--bogus"], capsys)[0] == 2
    assert run(["samplesize", "--d", "50", "--epsilon", "2"], capsys)[0] == 2
    code, _, err = run(["fit", "--data", str(tmp_path / "missing.csv"), "--response", "y"], capsys)
    assert code == 2 and "missing.csv" in err


def test_strict_survey_size_policy(tmp_path, capsys):
    survey, population = split_files(tmp_path, [0.3, -0.2, 0.1], [0.3, -0.2, 0.1])
    code, _, err = run(["test", "--survey", survey, "--population", population, "--response", "y",
                        "--survey-size-policy", "strict"], capsys)
    assert code == 2 and "survey" in err


def test_fit_fdd_and_diagnose(tmp_path, capsys):
    survey, population = split_files(tmp_path, [0.3, -0.2, 0.1], [-0.4, 0.4, -0.3])
    model_path = tmp_path / "model.json"
    code, out, _ = run(["fit", "--data", survey, "--response", "y", "--class", "lasso",
                        "--model-out", str(model_path)], capsys)
    assert code == 0 and json.loads(out)["model"]["converged"]
    assert len(json.loads(model_path.read_text())["representation"]["beta"]) == 4
    code, out, _ = run(["fdd", "--survey", survey, "--population", population, "--response", "y",
                        "--n", "20000"], capsys)
    assert code == 0 and json.loads(out)["fdd"] > 0.3
    code, out, _ = run(["diagnose", "--data", survey, "--response", "y"], capsys)
    payload = json.loads(out)
    assert code == 0 and payload["bounds_violations"] == 0 and not payload["survey_size_ok"]


def test_config_file_fills_options(tmp_path, capsys):
    config = tmp_path / "plan.toml"
    config.write_text("[plan]\nd = 4\nsurvey_m = 500\nmu_grid = [0.0, 1.0]\ntrials = 3\n"
                      "survey_size_policy = \"off\"\n[solver]\nmax_iters = 500\n")
    out_dir = tmp_path / "exp"
    code, out, _ = run(["experiment", "synth", "--config", str(config), "--trials", "2",
                        "--output-dir", str(out_dir)], capsys)
    payload = json.loads(out)
    assert code == 0 and [r["mu"] for r in payload["rows"]] == [0.0, 1.0]
    assert all(r["trials"] == 2 for r in payload["rows"])
    plan = json.loads((out_dir / "plan.json").read_text())
    assert plan["plan"]["d"] == 4 and plan["solver"]["max_iters"] == 500
    bad = tmp_path / "bad.toml"
    bad.write_text("nonsense_key = 1\n")
    assert run(["experiment", "synth", "--config", str(bad)], capsys)[0] == 2


def test_experiment_csv_and_baseline(tmp_path, capsys):
    data = subgroup_csv(tmp_path / "all.csv", [0.3, -0.2, 0.1], [0.3, -0.2, 0.1])
    code, out, _ = run(["experiment", "csv", "--path", str(data), "--response", "y",
                        "--split-column", "group", "--split-value", "0", "--epsilon-grid",
                        "0.05,0.2", "--trials", "5", "--survey-size-policy", "off",
                        "--output-dir", str(tmp_path / "csv"), "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [float(r["epsilon"]) for r in rows] == [0.05, 0.2]
    assert (tmp_path / "csv" / "acceptance.svg").exists()
    code, out, _ = run(["baseline", "recon", "--d-grid", "5,10", "--trials", "5",
                        "--output-dir", str(tmp_path / "bl")], capsys)
    assert code == 0 and json.loads(out)["loglog_slope"] is not None
    assert (tmp_path / "bl" / "baseline.csv").exists()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "surverify", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "surverify" in proc.stdout
