import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from specmult.cli import load_config, main, report

SMALL = "--grid=n=120,rmax=12"


def records(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


class TestExitCodes:
    def test_missing_subcommand(self, tmp_path, capsys):
        assert main([f"--out={tmp_path}"]) == 2
        assert "missing subcommand" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        assert main(["launch"]) == 2

    def test_malformed_option(self, tmp_path):
        assert main(["kato", "--grid", f"--out={tmp_path}"]) == 2

    def test_missing_potential_file(self, tmp_path, capsys):
        missing = tmp_path / "nope.csv"
        assert main(["kato", f"--potential=file:{missing}", f"--out={tmp_path}"]) == 2
        assert str(missing) in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["kato", f"--config={tmp_path / 'absent.ini'}"]) == 2

    def test_unknown_check(self, tmp_path):
        assert main(["verify", "everything", f"--out={tmp_path}"]) == 2

    def test_inadmissible_pair(self, tmp_path):
        assert main(["verify", "strichartz", "--q=4", "--r=4", SMALL, f"--out={tmp_path}"]) == 2

    def test_kato_passes(self, tmp_path):
        assert main(["kato", "--potential=well:depth=3,radius=1", SMALL, f"--out={tmp_path}"]) == 0
        rec = records(tmp_path / "kato.jsonl")[0]
        assert rec["check"] == "kato" and rec["k0"] and rec["thresholds"]["N1"] == 4.0
        assert rec["grid"]["n"] == 120 and rec["seed"] == 42

    def test_failing_check_exits_one(self, tmp_path):
        # the 2.47-deep well sits on the zero-energy resonance, where decay slows to t^{-1/2}
        code = main(["verify", "dispersive", "--potential=well:depth=2.47,radius=1", SMALL, f"--out={tmp_path}"])
        rec = records(tmp_path / "verify_dispersive.jsonl")[0]
        assert code == (0 if rec["pass"] else 1)
        assert code == 1


class TestConfig:
    def test_sections_and_precedence(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[run]\ncommand = kato\nseed = 7\npotential = zero\n\n[kato]\npotential = well:depth=3,radius=1\n", encoding="utf-8")
        opts = load_config(cfg, None)
        assert opts["potential"] == "well:depth=3,radius=1" and opts["seed"] == "7"
        out = tmp_path / "o"
        assert main([f"--config={cfg}", SMALL, f"--out={out}", "--seed=9"]) == 0
        rec = records(out / "kato.jsonl")[0]
        assert rec["params"]["potential"] == "well:depth=3,radius=1" and rec["seed"] == 9

    def test_output_directory_precedence(self, tmp_path, monkeypatch):
        cfg = tmp_path / "run.ini"
        cfg.write_text(f"[run]\nout = {tmp_path / 'from_config'}\n", encoding="utf-8")
        monkeypatch.setenv("SPECMULT_OUT", str(tmp_path / "from_env"))
        assert main(["kato", "--potential=zero", SMALL, f"--config={cfg}"]) == 0
        assert (tmp_path / "from_env" / "kato.jsonl").is_file()
        assert main(["kato", "--potential=zero", SMALL, f"--config={cfg}", f"--out={tmp_path / 'from_cli'}"]) == 0
        assert (tmp_path / "from_cli" / "kato.jsonl").is_file()
        monkeypatch.delenv("SPECMULT_OUT")
        assert main(["kato", "--potential=zero", SMALL, f"--config={cfg}"]) == 0
        assert (tmp_path / "from_config" / "kato.jsonl").is_file()


class TestOutputs:
    def test_multiplier_kernel_csv(self, tmp_path):
        code = main(["multiplier", "--symbol=heat:t=0.5", "--potential=zero", "--grid=n=60,rmax=6", f"--out={tmp_path}"])
        assert code == 0
        with open(tmp_path / "multiplier_kernel.csv", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["i", "j", "r_i", "r_j", "re", "im"] and len(rows) == 1 + 60 * 60
        rec = records(tmp_path / "multiplier.jsonl")[0]
        assert rec["check"] == "multiplier_oracle" and rec["constant"] <= 1e-2

    def test_nls_outputs(self, tmp_path):
        code = main(["nls", "--potential=well:depth=3,radius=1", "--grid=n=128,rmax=16", "--slices=64", f"--out={tmp_path}"])
        assert code == 0
        with open(tmp_path / "nls_slices.csv", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "mass", "h1", "L10"] and len(rows) == 66
        rec = records(tmp_path / "nls.jsonl")[0]
        assert rec["contraction"]["theta"] < 1 and rec["time_reversal"]["relative_error"] <= 1e-6

    def test_seventeen_digits(self, tmp_path):
        main(["nls", "--potential=zero", "--grid=n=64,rmax=8", "--slices=16", f"--out={tmp_path}"])
        t = open(tmp_path / "nls_slices.csv", encoding="utf-8").read().splitlines()[2].split(",")[0]
        assert float(t) == 1 / 16 and t == f"{1 / 16:.17g}"

    def test_reruns_are_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            main(["verify", "resolvent_bounds", "--potential=gaussian:depth=3,width=1", SMALL, f"--out={tmp_path / sub}"])
            main(["report", str(tmp_path / sub)])
        for name in ("verify_resolvent_bounds.jsonl", "summary.csv", "summary.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestReport:
    def test_empty_or_missing_directory(self, tmp_path):
        assert report(tmp_path) == 2
        assert report(tmp_path / "absent") == 2
        assert main(["report", str(tmp_path)]) == 2

    def test_rows_and_failures_first(self, tmp_path):
        lines = []
        for k in range(10):
            lines.append(json.dumps({"check": f"c{k}", "params": {"k": k}, "constant": k, "margin": 1, "pass": k % 3 != 1,
                                     "grid": {"n": 10, "r_max": 1.0}, "seed": 42}))
        (tmp_path / "made.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
        assert report(tmp_path) == 1
        with open(tmp_path / "summary.csv", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))[1:]
        assert len(rows) == 10
        assert [r[0] for r in rows[:3]] == ["c1", "c4", "c7"]
        assert all(r[4] == "True" for r in rows[3:])
        assert all(r[5] == "10" and r[7] == "42" for r in rows)
        assert open(tmp_path / "summary.txt", encoding="utf-8").read().startswith("FAIL")

    def test_all_pass_exits_zero(self, tmp_path):
        main(["verify", "lorentz", "--pairs=10", f"--out={tmp_path}"])
        assert report(tmp_path) == 0

    def test_dispersive_fit_csv(self, tmp_path):
        assert main(["verify", "dispersive", "--potential=zero", "--grid=n=200,rmax=10", f"--out={tmp_path}"]) == 0
        main(["report", str(tmp_path)])
        data = np.loadtxt(tmp_path / "dispersive_fit_0.csv", delimiter=",", skiprows=1)
        slope = np.polyfit(data[:, 0], data[:, 1], 1)[0]
        rec = records(tmp_path / "verify_dispersive.jsonl")[0]
        assert slope == pytest.approx(rec["slope"], rel=1e-12)
        with open(tmp_path / "dispersive_fits.csv", encoding="utf-8") as fh:
            row = list(csv.reader(fh))[1]
        assert float(row[2]) == pytest.approx(float(row[3]), rel=1e-12)

    def test_refinement_curve(self, tmp_path):
        main(["verify", "norm_equivalence", "--potential=well:depth=0.5,radius=1", "--grid=n=60,rmax=6", f"--out={tmp_path}"])
        report(tmp_path)
        with open(tmp_path / "refinement.csv", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["check", "params", "n", "constant"] and [r[2] for r in rows[1:]] == ["60", "120"]


def test_console_script(tmp_path):
    out = subprocess.run([sys.executable, "-m", "specmult.cli", "kato", "--potential=zero", SMALL, f"--out={tmp_path}"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "PASS kato" in out.stdout
