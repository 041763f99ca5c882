"""CLI surface: files, manifests, exit codes, determinism."""

import json
import math

import pytest

from sinailab.cli import main
from sinailab.serialize import sha256_file

LAM = (3.0 + math.sqrt(5.0)) / 2.0
LOG2 = math.log(2.0)


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


class TestLyapunovCommand:
    def test_cat_files_and_values(self, tmp_path):
        out = tmp_path / "run"
        code = main(["lyapunov", "--system", "cat", "--steps", "2e4",
                     "--seed", "7", "--out", str(out)])
        assert code == 0
        spec = read_json(out / "spectrum.json")
        assert spec["exponents"][0] == pytest.approx(math.log(LAM), abs=1e-5)
        assert (out / "spectrum.csv").exists()
        manifest = read_json(out / "manifest.json")
        assert manifest["outputs"]["spectrum.json"] == sha256_file(out / "spectrum.json")

    def test_mp_alpha_zero(self, tmp_path):
        out = tmp_path / "run"
        code = main(["lyapunov", "--system", "mp", "--param", "alpha=0",
                     "--steps", "2e4", "--out", str(out)])
        assert code == 0
        spec = read_json(out / "spectrum.json")
        assert spec["exponents"][0] == pytest.approx(LOG2, abs=1e-3)

    def test_missing_system_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["lyapunov", "--steps", "100"])
        assert exc.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_system_exit_two(self, tmp_path):
        code = main(["lyapunov", "--system", "lorenz", "--out", str(tmp_path / "x")])
        assert code == 2


class TestEntropyCommand:
    def test_cat_all_methods_consistent(self, tmp_path):
        # no --dimf: the expanding dimension comes from the spectrum
        out = tmp_path / "run"
        code = main(["entropy", "--system", "cat", "--method", "all",
                     "--length", "2e4", "--tol", "0.02", "--out", str(out)])
        assert code == 0
        rep = read_json(out / "entropy.json")
        assert rep["sinai_consistent"] is True

    def test_ls_nmax_one_closed_form(self, tmp_path):
        out = tmp_path / "run"
        code = main(["entropy", "--system", "cat", "--method", "ls",
                     "--length", "1e3", "--nmax", "1", "--out", str(out)])
        assert code == 0
        est = read_json(out / "entropy.json")
        assert est["value"] == pytest.approx(math.log(2.0 + LAM), abs=1e-9)

    def test_invalid_method_exit_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["entropy", "--system", "cat", "--method", "bogus"])
        assert exc.value.code == 2


class TestSweepCommand:
    def _write_config(self, path, body):
        path.write_text(body, encoding="utf-8")
        return str(path)

    def test_small_sweep_files(self, tmp_path):
        cfg = self._write_config(tmp_path / "sweep.ini", """
[sweep]
family = mp
grid = 0.0,0.2,0.4
estimators = pesin
seed = 11
burn_in = 200
length = 5000
""")
        out = tmp_path / "run"
        code = main(["sweep", "--config", cfg, "--svg", "--out", str(out)])
        assert code == 0
        payload = read_json(out / "sweep.json")
        assert len(payload["rows"]) == 3
        assert "usc_check" in payload
        assert (out / "sweep.svg").exists()
        lines = (out / "sweep.csv").read_bytes().split(b"\r\n")
        assert lines[0] == b"t,method,value,std_error,weak_star_prev,flags"

    def test_single_point_no_verdict(self, tmp_path):
        cfg = self._write_config(tmp_path / "one.ini", """
[sweep]
family = mp
grid = 0.3:0.3:1
estimators = pesin
burn_in = 100
length = 2000
""")
        out = tmp_path / "run"
        code = main(["sweep", "--config", cfg, "--out", str(out)])
        assert code == 0
        payload = read_json(out / "sweep.json")
        assert len(payload["rows"]) == 1
        assert "usc_check" not in payload

    def test_malformed_config_exit_two(self, tmp_path, capsys):
        cfg = self._write_config(tmp_path / "bad.ini", "grid = oops\nno section")
        code = main(["sweep", "--config", cfg, "--out", str(tmp_path / "x")])
        assert code == 2
        err = capsys.readouterr().err
        assert "line" in err or "config" in err

    def test_missing_config_exit_two(self, tmp_path):
        code = main(["sweep", "--config", str(tmp_path / "nope.ini"),
                     "--out", str(tmp_path / "x")])
        assert code == 2

    def test_failure_threshold_exit_four(self, tmp_path):
        # eps far outside the viana escape bound fails at 3 of 4 points
        cfg = self._write_config(tmp_path / "fail.ini", """
[sweep]
family = viana
grid = 0.0:0.05:4
estimators = pesin
burn_in = 50
length = 1000
""")
        import sinailab.sweep as sweep_mod
        from sinailab.systems import FamilyHandle, make_viana

        orig = sweep_mod.get_family
        sweep_mod.get_family = lambda fid: FamilyHandle(
            "viana", "eps", 0.0, 0.05,
            lambda e: make_viana(1.99, e, 16))
        try:
            code = main(["sweep", "--config", cfg, "--out", str(tmp_path / "x")])
        finally:
            sweep_mod.get_family = orig
        assert code == 4


class TestDiagnoseCommand:
    def test_mp_diagnostics(self, tmp_path):
        out = tmp_path / "run"
        code = main(["diagnose", "--system", "mp", "--param", "alpha=0",
                     "--length", "1e5", "--out", str(out)])
        assert code == 0
        rep = read_json(out / "diagnose.json")
        assert 0.9 <= rep["ls1"]["beta"] <= 1.1
        assert rep["ls2"]["forward"] == pytest.approx(LOG2, abs=1e-6)
        assert "neighborhood_split" in rep

    def test_cat_domination(self, tmp_path):
        out = tmp_path / "run"
        code = main(["diagnose", "--system", "cat", "--dimf", "1",
                     "--length", "1e4", "--out", str(out)])
        assert code == 0
        rep = read_json(out / "diagnose.json")
        assert rep["domination"]["verdict"] == "dominated"
        assert rep["domination"]["rho"] == pytest.approx(LAM ** -2, rel=0.05)

    def test_noninvertible_bundle_request_exit_three(self, tmp_path, capsys):
        code = main(["diagnose", "--system", "viana", "--dimf", "1",
                     "--length", "1e3", "--out", str(tmp_path / "x")])
        assert code == 3
        assert "invertible" in capsys.readouterr().err


class TestDeterminism:
    def test_identical_runs_identical_data_files(self, tmp_path):
        args = ["lyapunov", "--system", "cat", "--steps", "1e4", "--seed", "3"]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        for name in ("spectrum.json", "spectrum.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_env_workers_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SINAILAB_WORKERS", "1")
        cfg = tmp_path / "c.ini"
        cfg.write_text("[sweep]\nfamily = mp\ngrid = 0.0,0.2\n"
                       "estimators = pesin\nburn_in = 50\nlength = 2000\n",
                       encoding="utf-8")
        code = main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "x")])
        assert code == 0
