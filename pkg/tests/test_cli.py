"""Tests of the problem registry, run configuration and CLI subcommands."""

import json

import numpy as np
import pytest

from stochrelax.cli import ConfigError, RunConfig, main, run_command
from stochrelax.problems import registry_build
from stochrelax.walsh import synthesize

SNGD_INI = """
[problem]
name = onemax
n = 8

[algorithm]
kind = sngd
n_samples = 80
learning_rate = 0.2
max_iters = 12

[run]
replicates = 2
seed = 5
output = {out}
"""


def trap_value(state_bits, n, k):
    """Direct trap definition: per block, k for all-plus else k-1-#plus."""
    total = 0
    for start in range(0, n, k):
        plus = sum(1 for i in range(start, start + k) if not state_bits >> i & 1)
        total += k if plus == k else k - 1 - plus
    return total


# ---------------------------------------------------------------------------
# Registry


def test_onemax_instance():
    inst = registry_build("onemax", n=10)
    assert inst.known_optimum == 10.0
    assert inst.f.evaluate([1] * 10) == 10.0
    assert inst.verify_optimum()


def test_random_sparse_deterministic():
    a = registry_build("random-sparse", n=12, terms=15, seed=7)
    b = registry_build("random-sparse", n=12, terms=15, seed=7)
    assert a.f.terms == b.f.terms
    c = registry_build("random-sparse", n=12, terms=15, seed=8)
    assert c.f.terms != a.f.terms


def test_trap_k_matches_direct_definition():
    n, k = 12, 4
    inst = registry_build("trap-k", n=n, k=k)
    table = synthesize(inst.f)
    expected = np.array([trap_value(s, n, k) for s in range(1 << n)])
    assert np.max(np.abs(table - expected)) <= 1e-9
    assert inst.known_optimum == pytest.approx(expected.max())
    assert inst.verify_optimum()


def test_trap_k_requires_divisor():
    with pytest.raises(ValueError):
        registry_build("trap-k", n=10, k=4)
    with pytest.raises(ValueError):
        registry_build("trap-k", n=10)


def test_weighted_linear_optimum_attained():
    inst = registry_build("weighted-linear", n=9, seed=3)
    assert inst.verify_optimum()
    signs = [1 if inst.f.terms[1 << i] > 0 else -1 for i in range(9)]
    assert inst.f.evaluate(signs) == pytest.approx(inst.known_optimum)


def test_two_local_optimum_attained():
    inst = registry_build("two-local-ising", n=8, seed=1)
    assert inst.known_optimum is not None
    assert inst.verify_optimum()


def test_unknown_problem_rejected():
    with pytest.raises(ValueError, match="unknown problem"):
        registry_build("twomax", n=4)


def test_random_sparse_requires_terms():
    with pytest.raises(ValueError):
        registry_build("random-sparse", n=4)


# ---------------------------------------------------------------------------
# Config parsing


def test_config_round_trip(tmp_path):
    text = SNGD_INI.format(out=tmp_path / "runs")
    config = RunConfig.from_ini_text(text)
    again = RunConfig.from_ini_text(config.to_ini_text())
    assert again == config


def test_config_missing_section():
    with pytest.raises(ConfigError, match=r"\[run\]"):
        RunConfig.from_ini_text("[problem]\nname = onemax\nn = 4\n[algorithm]\nkind = exact\nlearning_rate = 0.5\n")


def test_config_missing_required_key():
    text = "[problem]\nname = onemax\nn = 4\n[algorithm]\nkind = sngd\nn_samples = 10\n[run]\n"
    with pytest.raises(ConfigError, match="learning_rate"):
        RunConfig.from_ini_text(text)


def test_config_bad_type_names_field():
    text = ("[problem]\nname = onemax\nn = four\n"
            "[algorithm]\nkind = exact\nlearning_rate = 0.5\n[run]\n")
    with pytest.raises(ConfigError, match=r"\[problem\] n"):
        RunConfig.from_ini_text(text)


def test_config_unknown_problem_and_algorithm():
    with pytest.raises(ConfigError, match="unknown problem"):
        RunConfig.from_ini_text("[problem]\nname = nope\nn = 4\n[algorithm]\nkind = exact\nlearning_rate = 1\n[run]\n")
    with pytest.raises(ConfigError, match="unknown algorithm"):
        RunConfig.from_ini_text("[problem]\nname = onemax\nn = 4\n[algorithm]\nkind = annealing\n[run]\n")


def test_config_ridge_auto_round_trips():
    text = ("[problem]\nname = onemax\nn = 4\n"
            "[algorithm]\nkind = sngd\nn_samples = 10\nlearning_rate = 0.5\nridge = auto\n[run]\n")
    config = RunConfig.from_ini_text(text)
    assert config.algorithm_params["ridge"] is None
    assert RunConfig.from_ini_text(config.to_ini_text()) == config


# ---------------------------------------------------------------------------
# run command


def test_run_command_writes_traces_and_summary(tmp_path, capsys):
    out = tmp_path / "runs"
    config = RunConfig.from_ini_text(SNGD_INI.format(out=out))
    assert run_command(config) == 0
    for r in range(2):
        csv_path = out / f"trace_{r:03d}.csv"
        jsonl_path = out / f"trace_{r:03d}.jsonl"
        assert csv_path.exists() and jsonl_path.exists()
        lines = csv_path.read_text().splitlines()
        header = next(ln for ln in lines if not ln.startswith("#"))
        cols = header.split(",")
        assert cols[:5] == ["iter", "E_f_est", "E_f_exact", "best_f", "grad_norm"]
        assert cols[5:] == [f"theta_{j}" for j in range(8)]
        data_rows = [ln for ln in lines if not ln.startswith("#")][1:]
        assert all(len(row.split(",")) == len(cols) for row in data_rows)
        meta = json.loads(jsonl_path.read_text().splitlines()[0])["meta"]
        assert meta["problem.name"] == "onemax"
        assert meta["replicate"] == r
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0] == "replicate,seed,status,iterations,best_f,final_E_f_est,wall_time_s"
    assert len(summary) == 3
    seeds = {row.split(",")[1] for row in summary[1:]}
    assert len(seeds) == 2


def test_run_command_reproducible_traces(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    run_command(RunConfig.from_ini_text(SNGD_INI.format(out=out_a)))
    run_command(RunConfig.from_ini_text(SNGD_INI.format(out=out_b)))
    for r in range(2):
        a = (out_a / f"trace_{r:03d}.csv").read_bytes()
        b = (out_b / f"trace_{r:03d}.csv").read_bytes()
        # traces embed the output path in the header; compare data rows
        a_rows = [ln for ln in a.decode().splitlines() if not ln.startswith("# run.output")]
        b_rows = [ln for ln in b.decode().splitlines() if not ln.startswith("# run.output")]
        assert a_rows == b_rows


def test_run_command_exact_and_eda(tmp_path):
    exact_ini = ("[problem]\nname = onemax\nn = 10\n"
                 "[algorithm]\nkind = exact\nlearning_rate = 0.5\nmax_iters = 200\n"
                 f"[run]\noutput = {tmp_path / 'exact'}\n")
    assert run_command(RunConfig.from_ini_text(exact_ini)) == 0
    summary = (tmp_path / "exact" / "summary.csv").read_text().splitlines()[1]
    assert float(summary.split(",")[4]) >= 9.99

    eda_ini = ("[problem]\nname = onemax\nn = 12\n"
               "[algorithm]\nkind = eda\nn_samples = 100\nselected = 50\nmax_iters = 30\n"
               f"[run]\nreplicates = 2\nseed = 9\noutput = {tmp_path / 'eda'}\n")
    assert run_command(RunConfig.from_ini_text(eda_ini)) == 0


def test_run_command_with_basis_file(tmp_path):
    basis_path = tmp_path / "basis.txt"
    basis_path.write_text("1\n2\n3\n4\n1 2\n")
    ini = ("[problem]\nname = onemax\nn = 4\n"
           "[algorithm]\nkind = sngd\nn_samples = 40\nlearning_rate = 0.2\n"
           f"max_iters = 5\nbasis = {basis_path}\n"
           f"[run]\noutput = {tmp_path / 'runs'}\n")
    assert run_command(RunConfig.from_ini_text(ini)) == 0
    header = next(ln for ln in (tmp_path / "runs" / "trace_000.csv").read_text().splitlines()
                  if not ln.startswith("#"))
    assert header.endswith("theta_4")


# ---------------------------------------------------------------------------
# main() exit codes and demos


def test_main_malformed_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[problem]\nname = onemax\nn = 4\n[algorithm]\nkind = sngd\n[run]\n")
    assert main(["run", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "n_samples" in err


def test_main_run_error_exits_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[problem]\nname = trap-k\nn = 10\nk = 4\n"
                   "[algorithm]\nkind = exact\nlearning_rate = 0.5\n"
                   f"[run]\noutput = {tmp_path / 'x'}\n")
    assert main(["run", str(bad)]) == 1
    assert "trap-k" in capsys.readouterr().err


def test_main_missing_config_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "absent.ini")]) == 1


def test_mgf_command_triangle(tmp_path, capsys):
    path = tmp_path / "f.txt"
    path.write_text("1.0: 1 2\n1.0: 2 3\n1.0: 1 3\n")
    assert main(["mgf", str(path), "--t", "1.0"]) == 0
    out = capsys.readouterr().out
    expected = np.cosh(1.0) ** 3 + np.sinh(1.0) ** 3
    printed = float(next(ln for ln in out.splitlines() if "closed form" in ln).split(":")[1])
    assert printed == pytest.approx(expected, rel=1e-12)


def test_mgf_command_parse_failure(tmp_path):
    path = tmp_path / "f.txt"
    path.write_text("garbage\n")
    assert main(["mgf", str(path), "--t", "1.0"]) == 1


def test_binomial_demo_exits_clean(capsys):
    assert main(["binomial-demo", "--n", "2"]) == 0
    out = capsys.readouterr().out
    assert "all identities ok" in out


def test_orlicz_demo_exits_clean(capsys):
    assert main(["orlicz-demo", "--a", "1.0"]) == 0
    out = capsys.readouterr().out
    first_row = next(ln for ln in out.splitlines() if "alpha=" in ln)
    assert first_row.strip().endswith("0.0")  # alpha = 0 row prints exactly 0
    assert "all checks ok" in out


def test_run_cli_end_to_end(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    out = tmp_path / "trace_out"
    ini.write_text(SNGD_INI.format(out=out))
    assert main(["run", str(ini)]) == 0
    assert (out / "summary.csv").exists()
