import re

import pytest

from gaussex import cli
from gaussex.errors import NotPositiveDefinite

QUICK = """
[model]
kind = "chi"
n = 2
alpha = 1.0
a = 1.0
b = 1.0

[grid]
mesh = 0.05

[run]
u = [1.5, 2.0]
n_reps = 5000
seed = 3
out = "unused"
"""


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    with pytest.raises(SystemExit) as exc:
        cli.main(["constant", "--help"])
    assert exc.value.code == 0


def test_malformed_numeric_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["constant", "pickands", "--alpha", "one"])
    assert exc.value.code == 2


def test_missing_required_flag(capsys):
    code, out, err = run(["constant", "pickands", "--lambda", "5"], capsys)
    assert code == 2 and "--alpha" in err
    code, out, err = run(["formula", "chi", "--n", "2", "--alpha", "1", "--a", "1"], capsys)
    assert code == 2 and "--b" in err


def test_formula_chi(capsys):
    code, out, _ = run(["formula", "chi", "--n", "2", "--alpha", "1", "--a", "1", "--b", "1", "--p-const", "2.0"], capsys)
    assert code == 0
    assert "C = 5.013" in out and "exponent = 1" in out


def test_formula_perf_writes_json(tmp_path, capsys):
    code, out, _ = run(["formula", "perf", "--n", "2", "--alpha", "1.5", "--a", "1,0.5,1", "--u", "3,3.5",
                        "--out-dir", str(tmp_path)], capsys)
    assert code == 0 and (tmp_path / "formula.json").exists()


def test_model_error_exit_3(capsys):
    code, _, err = run(["formula", "chi", "--n", "2", "--alpha", "1", "--a", "3", "--b", "1"], capsys)
    assert code == 3 and "error" in err


def test_numeric_failure_exit_4(monkeypatch, capsys):
    def boom(*a, **k):
        raise NotPositiveDefinite(pivot=3, jitter=1e-8)

    monkeypatch.setattr(cli, "sample_paths", boom)
    code, _, err = run(["sample", "--alpha", "1", "--mesh", "0.5", "--reps", "2"], capsys)
    assert code == 4 and "pivot 3" in err


def test_constant_pickands_prints_delta(tmp_path, capsys):
    argv = ["constant", "pickands", "--alpha", "1", "--lambda", "4", "--mesh", "0.05", "--reps", "2000",
            "--seed", "7", "--out-dir", str(tmp_path)]
    code, out, _ = run(argv, capsys)
    assert code == 0
    assert re.search(r"\|value - known\| = \d", out)
    first = (tmp_path / "constant.csv").read_bytes()
    run(argv, capsys)
    assert (tmp_path / "constant.csv").read_bytes() == first


def test_constant_from_config_flags_win(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[constant]\nalpha = 1.0\nb = 1.0\nhorizon = 8.0\nmesh = 0.05\nreps = 500\nseed = 1\n')
    code, out, _ = run(["constant", "piterbarg", "--config", str(cfg)], capsys)
    assert code == 0 and "reps=500" in out
    code, out, _ = run(["constant", "piterbarg", "--config", str(cfg), "--reps", "300"], capsys)
    assert code == 0 and "reps=300" in out
    cfg.write_text("[constant]\nalpah = 1.0\n")
    code, _, err = run(["constant", "piterbarg", "--config", str(cfg)], capsys)
    assert code == 2 and "alpah" in err


def test_hw_constant(capsys):
    code, out, _ = run(["constant", "hw", "--n", "1", "--a", "1,1", "--lambda", "2", "--mesh", "0.1",
                        "--reps", "500"], capsys)
    assert code == 0 and "known value 1" in out


def test_expansion_check_table(tmp_path, capsys):
    code, out, _ = run(["expansion-check", "--n", "1", "--alpha", "0.5", "--a", "1,0.8", "--deltas", "0.1,0.01",
                        "--probes", "50", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    lines = (tmp_path / "expansion_check.csv").read_text().splitlines()
    assert lines[0] == "delta,expansion,max_rel_error" and len(lines) == 5


def test_sample_json_and_threads_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GAUSSEX_THREADS", "2")
    argv = ["sample", "--alpha", "0.7", "--mesh", "0.25", "--reps", "3000", "--seed", "5", "--out-dir", str(tmp_path)]
    assert run(argv, capsys)[0] == 0
    a = (tmp_path / "samples.csv").read_bytes()
    monkeypatch.setenv("GAUSSEX_THREADS", "1")
    assert run(argv, capsys)[0] == 0
    assert (tmp_path / "samples.csv").read_bytes() == a
    assert run(argv + ["--format", "json"], capsys)[0] == 0
    assert (tmp_path / "samples.json").exists()


def test_compare_and_tail(tmp_path, capsys):
    cfg = tmp_path / "quick.toml"
    cfg.write_text(QUICK)
    out = tmp_path / "out"
    code, stdout, _ = run(["compare", "--config", str(cfg), "--out-dir", str(out)], capsys)
    assert code == 0
    csv1 = (out / "ratios.csv").read_bytes()
    svg = (out / "ratios.svg").read_text()
    assert svg.startswith("<svg") and "stroke-dasharray" in svg
    assert (out / "record.json").exists()
    assert run(["compare", "--config", str(cfg), "--out-dir", str(out)], capsys)[0] == 0
    assert (out / "ratios.csv").read_bytes() == csv1
    assert run(["compare", "--config", str(cfg), "--out-dir", str(out), "--seed", "4"], capsys)[0] == 0
    assert (out / "ratios.csv").read_bytes() != csv1
    code, stdout, _ = run(["tail", "--config", str(cfg), "--out-dir", str(out)], capsys)
    assert code == 0 and "p_hat" in stdout and (out / "tail.csv").exists()


def test_compare_needs_config(capsys):
    code, _, err = run(["compare"], capsys)
    assert code == 2 and "--config" in err


def test_compare_bad_config_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(QUICK.replace("n_reps = 5000", "n_reps = 5000\ncolour = 1"))
    code, _, err = run(["compare", "--config", str(cfg)], capsys)
    assert code == 2 and "run.colour" in err and "line" in err


def test_compare_unresolvable_u(tmp_path, capsys):
    cfg = tmp_path / "q.toml"
    cfg.write_text(QUICK.replace("u = [1.5, 2.0]", "u = [1.5, 4.0]"))
    code, _, err = run(["compare", "--config", str(cfg), "--out-dir", str(tmp_path)], capsys)
    assert code == 2 and "largest feasible u" in err
