import json
import subprocess
import sys

import numpy as np
import pytest

from spherelift.cli import main
from spherelift.io import read_csv_table
from spherelift.oracle import grothendieck_prob

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@pytest.fixture
def half(tmp_path):
    p = tmp_path / "half.txt"
    p.write_text("# a = 1/2\n2\n0 0.5\n0.5 0\n")
    return str(p)


def test_solve_json(half, capsys):
    assert main(["solve", "--matrix", half, "--beta", "1"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["q_star"] == pytest.approx(0.3774280762200931, abs=1e-12)
    assert d["S_star"][0][1] == pytest.approx(GOLDEN, abs=1e-12)
    assert d["converged"] is True


def test_solve_csv_to_file(half, tmp_path):
    out = tmp_path / "r.csv"
    assert main(["solve", "--matrix", half, "--beta", "1", "--format", "csv", "--out", str(out)]) == 0
    _, rows = read_csv_table(out.read_text())
    assert float(rows[0]["S_star_1_2"]) == pytest.approx(GOLDEN, abs=1e-12)


def test_solve_nonconvergence_exit_2(tmp_path, capsys):
    p = tmp_path / "m.txt"
    p.write_text("3\n0 1 2\n1 0 -1\n2 -1 0\n")
    assert main(["solve", "--matrix", str(p), "--beta", "5", "--max-iter", "1"]) == 2
    d = json.loads(capsys.readouterr().out)
    assert d["converged"] is False


def test_sample_approx_reproduces_S_star(half, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sample", "--matrix", half, "--beta", "1", "--n", "30", "--samples", "5",
                 "--seed", "1", "--out", str(out)]) == 0
    header, rows = read_csv_table(out.read_text())
    assert header["sampler"] == "approx"
    assert len(rows) == 5
    for r in rows:
        assert float(r["s_1_2"]) == pytest.approx(GOLDEN, abs=1e-12)


def test_sample_exact_reproducible(half, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        args = ["sample", "--matrix", half, "--beta", "1", "--n", "20", "--samples", "10",
                "--seed", "7", "--sampler", "exact", "--burn-in", "20", "--out", str(out)]
        assert main(args) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    _, rows = read_csv_table(outs[0].decode())
    assert len({r["s_1_2"] for r in rows}) == 10


def test_sample_zero_samples_header_only(half, capsys):
    assert main(["sample", "--matrix", half, "--beta", "1", "--n", "5", "--samples", "0",
                 "--seed", "3"]) == 0
    header, rows = read_csv_table(capsys.readouterr().out)
    assert rows == []
    assert header["seed"] == "3"


def test_sample_jsonl(half, capsys):
    assert main(["sample", "--matrix", half, "--beta", "1", "--n", "5", "--samples", "2",
                 "--seed", "3", "--format", "json"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert json.loads(lines[0])["header"]["n"] == 5
    assert json.loads(lines[2])["sample"] == 1


def test_round_frequencies(half, tmp_path):
    out = tmp_path / "r.csv"
    m = 4000
    assert main(["round", "--matrix", half, "--beta", "1", "--n", "10", "--samples", str(m),
                 "--seed", "11", "--out", str(out)]) == 0
    _, rows = read_csv_table(out.read_text())
    agree = np.mean([r["sign_1"] == r["sign_2"] for r in rows])
    p = grothendieck_prob(GOLDEN)
    assert abs(agree - p) <= 4 * np.sqrt(p * (1 - p) / m)
    assert {r["sign_1"] for r in rows} == {"1", "-1"}


def test_free_energy_beta_zero(half, capsys):
    assert main(["free-energy", "--matrix", half, "--beta", "0", "--n-list", "8,16,32"]) == 0
    header, rows = read_csv_table(capsys.readouterr().out)
    assert [float(r["gap"]) for r in rows] == [0.0, 0.0, 0.0]
    assert header["check.gap_finite"] == "pass"


def test_beta_sweep(half, capsys):
    assert main(["beta-sweep", "--matrix", half, "--beta-list", "1,10,100"]) == 0
    header, rows = read_csv_table(capsys.readouterr().out)
    assert len(rows) == 3
    assert "beta" not in header


def test_beta_sweep_descending_is_invalid(half, capsys):
    assert main(["beta-sweep", "--matrix", half, "--beta-list", "10,1"]) == 1
    assert "ascending" in capsys.readouterr().err


def test_malformed_matrix_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("2\n0 0.5 9\n0.5 0\n")
    assert main(["solve", "--matrix", str(p), "--beta", "1"]) == 1
    assert "line 2" in capsys.readouterr().err


def test_asymmetric_matrix_invalid(tmp_path):
    p = tmp_path / "asym.txt"
    p.write_text("2\n0 1\n0.5 0\n")
    assert main(["solve", "--matrix", str(p), "--beta", "1"]) == 1


def test_missing_file(tmp_path):
    assert main(["solve", "--matrix", str(tmp_path / "none.txt"), "--beta", "1"]) == 1


def test_n_not_overparameterized(half):
    assert main(["sample", "--matrix", half, "--beta", "1", "--n", "2", "--samples", "1",
                 "--seed", "0"]) == 1


def test_unknown_flag_exit_1(half):
    with pytest.raises(SystemExit) as info:
        main(["solve", "--matrix", half, "--beta", "1", "--n", "5"])
    assert info.value.code == 1


def test_failed_check_exit_3(half, capsys):
    # one draw per n at n=4,5 gives a meaningless slope; seed 0 lands outside the window
    code = main(["concentration", "--matrix", half, "--beta", "1", "--n-list", "4,5",
                 "--samples", "1", "--seed", "0", "--burn-in", "0", "--thin", "1"])
    out = capsys.readouterr()
    assert code == 3
    header, rows = read_csv_table(out.out)
    assert header["check.slope_S_in_window"] == "FAIL"
    assert len(rows) == 2
    assert "check failed" in out.err


def test_validate_sampler(half, capsys):
    assert main(["validate-sampler", "--matrix", half, "--beta", "1", "--n", "20",
                 "--samples", "500", "--seed", "4", "--burn-in", "50"]) == 0
    _, rows = read_csv_table(capsys.readouterr().out)
    assert rows[0]["pass"] == "true"


def test_missing_seed_printed(half):
    proc = subprocess.run(
        [sys.executable, "-m", "spherelift", "sample", "--matrix", half, "--beta", "1",
         "--n", "5", "--samples", "1"],
        capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    seed_lines = [ln for ln in proc.stderr.splitlines() if ln.startswith("seed: ")]
    assert len(seed_lines) == 1
    seed = seed_lines[0].split(": ")[1]
    header, _ = read_csv_table(proc.stdout)
    assert header["seed"] == seed
