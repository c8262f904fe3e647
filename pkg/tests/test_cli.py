import json
import os
import subprocess
import sys

import pytest

from ponshare import parse_pon

from conftest import RELAY_CHAIN_FILE


def run_cli(*args, env_extra=None, check=True):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    proc = subprocess.run(
        [sys.executable, "-m", "ponshare.cli", *args],
        capture_output=True,
        text=True,
        env=env,
    )
    if check and proc.returncode != 0:
        raise AssertionError(f"cli failed ({proc.returncode}): {proc.stderr}")
    return proc


def parse_eval_output(stdout: str) -> dict:
    out = {}
    for line in stdout.splitlines():
        fields = line.split()
        if fields and fields[0] in ("N", "R", "p"):
            out[fields[0]] = float(fields[1])
    return out


class TestGenerate:
    def test_writes_parseable_file(self, tmp_path):
        out = tmp_path / "tiny.pon"
        run_cli("generate", "--g", "2", "--s", "0", "--seed", "7", "-o", str(out))
        pon = parse_pon(out.read_text())
        assert pon.num_onus == 2
        assert pon.num_rns == 1

    def test_byte_identical_for_same_seed(self, tmp_path):
        a, b = tmp_path / "a.pon", tmp_path / "b.pon"
        for path in (a, b):
            run_cli("generate", "--g", "8", "--s", "0.3", "--r", "0.2",
                    "--seed", "42", "-o", str(path))
        assert a.read_bytes() == b.read_bytes()


class TestEval:
    def test_no_sharing_half(self, tmp_path):
        pon_file = tmp_path / "plain.pon"
        run_cli("generate", "--g", "4", "--s", "0.3", "--seed", "5", "-o", str(pon_file))
        proc = run_cli("eval", "--pon", str(pon_file), "--l", "2", "--r-override", "none")
        values = parse_eval_output(proc.stdout)
        assert values["p"] == pytest.approx(0.5, abs=1e-9)

    def test_relay_chain_value(self):
        proc = run_cli("eval", "--pon", str(RELAY_CHAIN_FILE), "--l", "2")
        assert parse_eval_output(proc.stdout)["p"] == pytest.approx(0.625, abs=1e-9)

    def test_per_onu_lines(self):
        proc = run_cli("eval", "--pon", str(RELAY_CHAIN_FILE), "--l", "2", "--per-onu")
        onu_lines = [l for l in proc.stdout.splitlines() if l.startswith("onu ")]
        assert len(onu_lines) == 2

    def test_r_override_redraws(self, tmp_path):
        pon_file = tmp_path / "plain.pon"
        run_cli("generate", "--g", "4", "--s", "0.3", "--seed", "5", "-o", str(pon_file))
        proc = run_cli("eval", "--pon", str(pon_file), "--l", "2",
                       "--r-override", "1", "--seed", "3")
        assert parse_eval_output(proc.stdout)["p"] >= 0.5

    def test_missing_file_exits_1(self):
        proc = run_cli("eval", "--pon", "/nonexistent.pon", "--l", "2", check=False)
        assert proc.returncode == 1
        assert "error:" in proc.stderr


class TestScenarioOutput:
    def test_scenario2_zero_q_surface(self, tmp_path):
        out = tmp_path / "s2.dat"
        run_cli("scenario2", "--q-grid", "0", "--r-grid", "0,0.5", "--samples", "10",
                "--g", "8", "--seed", "4", "-o", str(out))
        rows = [l for l in out.read_text().splitlines() if l and not l.startswith("#")]
        assert len(rows) == 2
        for row in rows:
            assert float(row.split()[2]) == pytest.approx(0.5, abs=1e-9)

    def test_surface_table_shape(self, tmp_path):
        out = tmp_path / "s1.dat"
        run_cli("scenario1", "--r-grid", "0,0.1", "--l-grid", "1,1.5,2",
                "--samples", "5", "--g", "4", "--seed", "2", "-o", str(out))
        lines = out.read_text().splitlines()
        data = [l for l in lines if l and not l.startswith("#")]
        assert len(data) == 6  # |r| x |l|
        blanks = sum(1 for l in lines if not l.strip())
        assert blanks == 1  # one separator between the two constant-r blocks
        sidecar = json.loads((tmp_path / "s1.dat.report.json").read_text())
        assert sidecar["points"] == 6
        assert sidecar["scenario"] == 1
        assert "max_rse" in sidecar and "versions" in sidecar

    def test_baseline_block_appended(self, tmp_path):
        out = tmp_path / "s1b.dat"
        run_cli("scenario1", "--r-grid", "0,0.1", "--l-grid", "1,2", "--samples", "5",
                "--g", "4", "--seed", "2", "--baseline", "-o", str(out))
        text = out.read_text()
        assert "# no-sharing baseline" in text
        data = [l for l in text.splitlines() if l and not l.startswith("#")]
        assert len(data) == 8  # surface + baseline of equal size

    def test_csv_format(self, tmp_path):
        out = tmp_path / "s2.csv"
        run_cli("scenario2", "--q-grid", "0,1", "--r-grid", "0.2", "--samples", "5",
                "--g", "4", "--seed", "2", "--format", "csv", "-o", str(out))
        lines = out.read_text().splitlines()
        assert lines[0] == "r,q,p,stderr,rse,n"
        assert len(lines) == 3
        assert all(len(l.split(",")) == 6 for l in lines[1:])

    def test_thread_budget_yields_identical_bytes(self, tmp_path):
        files = []
        for threads in ("1", "8"):
            out = tmp_path / f"t{threads}.dat"
            run_cli("scenario1", "--r-grid", "0,0.2", "--l-grid", "1.5,2",
                    "--samples", "8", "--g", "8", "--seed", "31",
                    "--threads", threads, "-o", str(out))
            files.append(out.read_bytes())
        assert files[0] == files[1]

    def test_threads_env_var_honoured(self, tmp_path):
        out = tmp_path / "env.dat"
        run_cli("scenario2", "--q-grid", "0", "--r-grid", "0", "--samples", "4",
                "--g", "2", "--seed", "1", "-o", str(out),
                env_extra={"PONSHARE_THREADS": "3"})
        assert out.exists()

    def test_stdout_default(self):
        proc = run_cli("scenario2", "--q-grid", "0", "--r-grid", "0", "--samples", "4",
                       "--g", "2", "--seed", "1")
        assert "0 0 0.5" in proc.stdout


class TestExitCodes:
    def test_unknown_flag_exits_2(self):
        proc = run_cli("scenario1", "--bogus", check=False)
        assert proc.returncode == 2

    def test_bad_grid_exits_2(self):
        proc = run_cli("scenario1", "--r-grid", "a,b", check=False)
        assert proc.returncode == 2

    def test_oracle_check_subcommand(self):
        proc = run_cli("oracle-check", "--count", "20", "--seed", "3")
        assert "agree" in proc.stdout
