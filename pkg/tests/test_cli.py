import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from spillover_lab.checks import run_checks
from spillover_lab.cli import main
from spillover_lab.scenario import Scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
STAR = str(SCENARIOS / "undirected_star.json")


def run(capsys, *argv):
    # argparse failures leave through SystemExit, like a real process would
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


def test_estimand_command(capsys):
    code, out, _ = run(capsys, "estimand", "--scenario", STAR)
    assert code == 0
    js = json.loads(out)
    assert js["tau_out"] == pytest.approx(-0.6, abs=1e-12)
    assert js["tau_in"] == pytest.approx(0.6, abs=1e-12)


def test_labelled_estimands(capsys):
    code, out, _ = run(capsys, "estimand", "--scenario", str(SCENARIOS / "labelled_stars.json"))
    assert code == 0
    cond = json.loads(out)["conditional"]
    assert cond["F"]["tau_out"] == pytest.approx(cond["F"]["tau_in"], abs=1e-10)
    assert cond["F"]["conditions"]["cond5"] is True


def test_estimate_command_forms(capsys):
    code, out, _ = run(capsys, "estimate", "--scenario", STAR, "--seed", "3")
    assert code == 0
    a = json.loads(out)
    code, out, _ = run(capsys, "estimate", "--scenario", STAR, "--seed", "3", "--form", "sender")
    b = json.loads(out)
    assert a["z"] == b["z"]
    assert a["tau_hat_in"] == pytest.approx(b["tau_hat_in"], abs=1e-12)
    assert b["inward_form"] == "sender"
    assert a["ci_out"][0] <= a["tau_hat_out"] <= a["ci_out"][1]


def test_simulate_csv_to_directory(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--scenario", STAR, "--reps", "50", "--format", "csv", "--out", str(tmp_path))
    assert code == 0 and out == ""
    lines = (tmp_path / "simulate.csv").read_text().splitlines()
    assert lines[0].startswith("estimator,truth,mean")
    assert [ln.split(",")[0] for ln in lines[1:]] == ["ht_out", "ht_in", "hj_out", "hj_in"]


def test_oracle_check_passes(capsys):
    code, out, _ = run(capsys, "oracle-check", "--scenario", str(SCENARIOS / "labelled_stars.json"))
    js = json.loads(out)
    assert code == 0, [k for k, v in js["checks"].items() if not v["passed"]]
    assert js["all_passed"]
    assert "conditional_F" in js["checks"]


def test_reproduce_table_csv(tmp_path, capsys):
    code, _, _ = run(capsys, "reproduce-table", "T2", "t1", "--format", "csv", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "T1.csv").exists() and (tmp_path / "T2.csv").exists()
    assert "V_out - V_in" in (tmp_path / "T2.csv").read_text()


def test_usage_errors_exit_1(capsys, tmp_path):
    assert run(capsys, "estimand")[0] == 1
    assert run(capsys, "estimand", "--scenario", str(tmp_path / "missing.json"))[0] == 1
    assert run(capsys, "bogus")[0] == 1
    assert run(capsys, "reproduce-table", "T8")[0] == 1
    assert run(capsys, "estimand", "--scenario", STAR, "--format", "csv")[0] == 1
    assert run(capsys, "simulate", "--scenario", STAR, "--workers", "0")[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "estimand", "--scenario", str(bad))[0] == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1


def _scenario(tmp_path, **over):
    d = json.loads(Path(STAR).read_text())
    d.update(over)
    p = tmp_path / "s.json"
    p.write_text(json.dumps(d))
    return str(p)


def test_assumption_violations_exit_2(capsys, tmp_path):
    no_overlap = _scenario(tmp_path, beta={"type": "bernoulli", "p": 0.0})
    code, _, err = run(capsys, "estimate", "--scenario", no_overlap)
    assert code == 2 and "assumption" in err
    assert run(capsys, "simulate", "--scenario", no_overlap, "--reps", "3")[0] == 2
    empty = _scenario(tmp_path, graph={"clusters": [{"n": 3, "edges": [[1, 2]]}, {"n": 2, "edges": []}]})
    assert run(capsys, "estimand", "--scenario", empty)[0] == 2


def test_bad_realized_z(capsys, tmp_path):
    assert run(capsys, "estimate", "--scenario", _scenario(tmp_path, z=[1, 0]))[0] == 1
    code, out, _ = run(capsys, "estimate", "--scenario", _scenario(tmp_path, z=[1, 0, 0, 0, 0]))
    assert code == 0
    # center treated, leaves control: W = 1/P(z_1) = 2 for the center; each leaf has W = 2 and Ybar = Y_1 = 0
    assert json.loads(out)["tau_hat_out"] == pytest.approx(2 * 1.0 / 5)


def test_failed_check_exit_3(capsys, monkeypatch):
    import spillover_lab.cli as cli
    from spillover_lab.checks import CheckResult

    monkeypatch.setattr(cli, "run_checks", lambda *a, **k: [CheckResult("x", False, {})])
    assert run(capsys, "oracle-check", "--scenario", STAR)[0] == 3


def test_run_checks_names():
    ctx = Scenario.load(STAR).build()
    names = {r.name for r in run_checks(ctx)}
    assert {"unbiased_ht_out", "unbiased_ht_in", "conservative_out", "lower_bound_in", "decomposition_identity",
            "gap_identity", "inward_sender_order", "conditions_imply_equality", "inward_forms_agree",
            "closed_form_mean_outcomes"} <= names
    assert all(r.passed for r in run_checks(ctx))


@pytest.mark.skipif(shutil.which("spillover-lab") is None, reason="console script not on PATH")
def test_console_script():
    res = subprocess.run(["spillover-lab", "estimand", "--scenario", STAR], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["tau_in"] == pytest.approx(0.6)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "spillover_lab.cli", "reproduce-table", "T9"], capture_output=True, text=True)
    assert res.returncode == 1
