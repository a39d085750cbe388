import csv
import subprocess
import sys
from pathlib import Path

import pytest

from tikhonov_inertial.cli import ConfigError, main, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def _manifest(out):
    return (out / "MANIFEST").read_text()


# parsing ------------------------------------------------------------------------


def test_parse_values_and_comments(tmp_path):
    p = _write(tmp_path, "# header\nflow.alpha = 3.5  # trailing\n\ninit.x0 = 1, 2\ninit.v0 = zeros\nrun.K = 7\n")
    cfg = parse_config(p)
    assert cfg.get("flow.alpha") == 3.5
    assert list(cfg.get("init.x0")) == [1.0, 2.0]
    assert cfg.get("init.v0") == "zeros"
    assert cfg.get("run.K") == 7
    assert cfg.lines["run.K"] == 6


@pytest.mark.parametrize("text, line, fragment", [
    ("flow.alpha = 1\nflow.gamma = 2\n", 2, "unknown key"),
    ("flow.alpha = 1\nflow.alpha = 2\n", 2, "duplicate"),
    ("run.K = ten\n", 1, "bad value"),
    ("\n\nflow.alpha 3\n", 3, "expected"),
    ("colour.alpha = 1\n", 1, "unknown section"),
    ("alpha = 1\n", 1, "section prefix"),
])
def test_config_errors_carry_location(tmp_path, text, line, fragment):
    p = _write(tmp_path, text)
    with pytest.raises(ConfigError) as info:
        parse_config(p)
    msg = str(info.value)
    assert f"{p}:{line}" in msg
    assert fragment in msg


def test_config_error_exit_code(tmp_path, capsys):
    p = _write(tmp_path, "flow.alpha = 1\nflow.alpha = 2\n")
    assert main(["predict", "--config", str(p), "--out-dir", str(tmp_path / "o")]) == 2
    assert "exp.cfg:2" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["predict", "--config", str(tmp_path / "nope.cfg"), "--out-dir", str(tmp_path)]) == 2


# modes --------------------------------------------------------------------------


def test_predict_continuous(tmp_path):
    out = tmp_path / "o"
    assert main(["predict", "--config", str(CONFIGS / "predict_continuous.cfg"), "--out-dir", str(out)]) == 0
    text = (out / "regime.txt").read_text()
    assert "theorem_case = weak-ii" in text
    assert (out / "regime.csv").exists()
    assert "status = complete" in _manifest(out)


def test_predict_needs_a_parameter_section(tmp_path):
    p = _write(tmp_path, "problem.name = quadratic2d\n")
    assert main(["predict", "--config", str(p), "--out-dir", str(tmp_path / "o")]) == 2


def test_compare_flow_family(tmp_path):
    out = tmp_path / "o"
    assert main(["compare", "--config", str(CONFIGS / "quadratic_compare.cfg"), "--out-dir", str(out)]) == 0
    traj = sorted(p.name for p in out.glob("trajectory*.csv"))
    assert len(traj) == 3
    final = {r[0]: r for r in _rows(out / "final.csv")[1:]}
    dist = {k: float(v[2]) for k, v in final.items()}
    assert min(dist, key=dist.get).endswith("9")
    stats = _rows(out / "stats.csv")
    assert stats[0] == ["system", "wall_clock_s", "avg_step", "points"]
    assert len(stats) == 4


def test_check_appendix_writes_tables(tmp_path):
    out = tmp_path / "o"
    assert main(["check-appendix", "--config", str(CONFIGS / "check_appendix.cfg"), "--out-dir", str(out)]) == 0
    onsets = _rows(out / "appendix_onsets.csv")
    assert onsets[0] == ["condition", "onset_k", "k_max", "found"]
    assert all(r[3] == "true" for r in onsets[1:])
    limits = _rows(out / "appendix_limits.csv")
    assert all(float(r[4]) < 0.1 for r in limits[1:])  # convergence is slow at k = 1e6


def test_growth_audit_passes(tmp_path):
    out = tmp_path / "o"
    assert main(["audit", "--config", str(CONFIGS / "audit_growth.cfg"), "--out-dir", str(out)]) == 0
    rows = _rows(out / "audit.csv")
    assert rows[1][0] == "growth" and rows[1][-1] == "true"


def test_failed_audit_exit_code(tmp_path):
    # delta_k = k^5 grows faster than the allowed ratio 1 + c p / k when c p < 5
    p = _write(tmp_path, "ipga.h = 1\nipga.alpha = 15\nipga.a = 1\nipga.p = 1.9\nipga.q = 0.95\n"
                         "ipga.delta_theta = 5\ngrowth.c = 1\ngrowth.k_max = 1000\n")
    out = tmp_path / "o"
    assert main(["audit", "--config", str(p), "--out-dir", str(out)]) == 1
    assert "complete-audit-failed" in _manifest(out)


def test_seed_override_changes_problem(tmp_path):
    base = ("problem.name = l2reg\nproblem.m = 5\nproblem.n = 6\nipga.h = 1\nipga.alpha = 3\nipga.beta = 1\n"
            "ipga.a = 1\nipga.p = 1.5\nipga.q = 0.5\nipga.delta_theta = 1\nrun.K = 5\n")
    p = _write(tmp_path, base + "problem.seed = 1\n")
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["run-ipga", "--config", str(p), "--out-dir", str(a)]) == 0
    assert main(["run-ipga", "--config", str(p), "--out-dir", str(b), "--seed", "1"]) == 0
    assert main(["run-ipga", "--config", str(p), "--out-dir", str(c), "--seed", "2"]) == 0
    name = next(a.glob("iterates*.csv")).name
    assert (a / name).read_text() == (b / name).read_text()
    assert (a / name).read_text() != (c / name).read_text()


def test_module_entry_point(tmp_path):
    out = tmp_path / "o"
    res = subprocess.run([sys.executable, "-m", "tikhonov_inertial", "predict", "--config",
                          str(CONFIGS / "predict_discrete.cfg"), "--out-dir", str(out)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (out / "regime.txt").exists()


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["plot", "--config", "x"])
