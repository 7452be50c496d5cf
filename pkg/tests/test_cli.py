import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from boreg import io as bio
from boreg.cli import EXIT_BLOWUP, EXIT_CONFIG, EXIT_FAILED, EXIT_OK, EXIT_SEAM, main
from boreg.config import parse, read_text, validate
from boreg.runner import fit_order, resolve_dt, simulate, sweep


def small(n=512, t_end=0.05, **changes) -> dict:
    data = parse(*read_text("preset:theorem1-forward"))
    data["grid"]["n"] = n
    data["solver"]["t_end"] = t_end
    data.update(changes)
    return data


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestSimulate:
    def test_outputs(self, tmp_path):
        out = tmp_path / "run"
        assert main(["simulate", "--config", write(tmp_path, small()), "--out", str(out), "--quiet"]) == EXIT_OK
        man = json.loads((out / "manifest.json").read_text())
        assert man["soliton_direction_sigma"] == 1 and man["hamiltonian_potential_sign"] == -1
        assert man["n_steps"] * man["dt"] == pytest.approx(0.05)
        assert len(man["config_hash"]) == 64
        diag = rows(out / "diagnostics.csv")
        assert {r["window"] for r in diag} == {"E2", "E1"}
        assert all(float(r["E_m"]) >= 0 for r in diag)
        inv = rows(out / "invariants.csv")
        assert float(inv[0]["t"]) == 0.0 and len(inv) == len(diag) // 2
        u, t = bio.read_field(out / "fields" / f"u_{len(inv) - 1:06d}.bin")
        assert t == pytest.approx(0.05) and u.grid.n == 512
        for name in ("E_m", "cum_F_half", "tail"):
            assert (out / "plots" / f"{name}.svg").exists()

    def test_backward_preset_shape(self, tmp_path):
        data = small(t_end=-0.05)
        out = tmp_path / "back"
        assert main(["simulate", "--config", write(tmp_path, data), "--out", str(out), "--quiet"]) == EXIT_OK
        times = [float(r["t"]) for r in rows(out / "diagnostics.csv")]
        assert times[-1] == pytest.approx(-0.05)
        cum = [float(r["cum_F_half"]) for r in rows(out / "diagnostics.csv") if r["window"] == "E2"]
        assert np.all(np.diff(cum) >= 0)

    def test_determinism(self, tmp_path):
        cfg = write(tmp_path, small())
        outs = []
        for i in range(2):
            out = tmp_path / f"r{i}"
            assert main(["simulate", "--config", cfg, "--out", str(out), "--seed", "3", "--quiet"]) == EXIT_OK
            outs.append([(out / f).read_bytes() for f in ("diagnostics.csv", "invariants.csv")])
        assert outs[0] == outs[1]

    def test_resolve_dt_divides_span(self):
        cfg = validate(small())
        from boreg.runner import prepare

        prep = prepare(cfg)
        dt = resolve_dt(-0.3, None, prep.grid, prep.u0, prep.spec, 0.25)
        assert dt < 0 and (-0.3 / dt) == pytest.approx(round(-0.3 / dt), abs=1e-9)
        assert resolve_dt(0.3, 0.07, prep.grid, prep.u0, prep.spec, 0.25) == pytest.approx(0.3 / 5)


class TestExitCodes:
    def test_config_error(self, tmp_path):
        data = small()
        data["solver"]["bogus"] = 1
        assert main(["simulate", "--config", write(tmp_path, data), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_CONFIG

    def test_b_below_five_eps(self, tmp_path, caplog):
        data = small()
        data["windows"][0]["b"] = 2.0
        assert main(["simulate", "--config", write(tmp_path, data), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
        assert "windows.0.b" in caplog.text

    def test_blow_up_writes_partial_outputs(self, tmp_path):
        data = small()
        data["solver"]["u_ceiling"] = 0.3
        out = tmp_path / "o"
        assert main(["simulate", "--config", write(tmp_path, data), "--out", str(out), "--quiet"]) == EXIT_BLOWUP
        man = json.loads((out / "manifest.json").read_text())
        assert "blow_up" in man and (out / "diagnostics.csv").exists()

    def test_seam_violation(self, tmp_path):
        data = small()
        data["datum"] = {"profile": {"kind": "gaussian", "amplitude": 1.0, "center": 45.0, "width": 1.0}}
        assert main(["simulate", "--config", write(tmp_path, data), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_SEAM

    def test_window_near_seam(self, tmp_path):
        data = small()
        data["windows"][0]["x0"] = 47.0
        assert main(["simulate", "--config", write(tmp_path, data), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_SEAM

    def test_missing_config_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.toml"), "--quiet"]) == EXIT_CONFIG

    def test_sweep_without_table(self, tmp_path):
        assert main(["sweep", "--config", write(tmp_path, small()), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_CONFIG

    def test_failed_check_exit_one(self, tmp_path, monkeypatch):
        from boreg import runner

        monkeypatch.setattr(runner, "verify_cutoffs", lambda cfg, out: {"all_passed": False})
        assert main(["verify-cutoff", "--config", write(tmp_path, small()), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_FAILED

    def test_unexpected_error_exit_one(self, tmp_path, monkeypatch):
        from boreg import runner

        def boom(cfg, out):
            raise RuntimeError("disk full")

        monkeypatch.setattr(runner, "simulate", boom)
        assert main(["simulate", "--config", write(tmp_path, small()), "--quiet"]) == EXIT_FAILED

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate"])
        assert info.value.code == 2

    def test_module_entry_point(self, tmp_path):
        r = subprocess.run([sys.executable, "-m", "boreg", "--help"], capture_output=True, text=True)
        assert r.returncode == 0 and "simulate" in r.stdout


class TestSweep:
    def test_invalid_point_reported(self, tmp_path):
        data = small(n=1024)
        data["windows"] = [data["windows"][0]]
        data["sweep"] = {"eps_b": [[0.1, 0.5], [0.2, 1.0], [0.3, 1.0], [0.5, 2.5]], "v": [1.0]}
        out = tmp_path / "sw"
        assert main(["sweep", "--config", write(tmp_path, data), "--out", str(out), "--workers", "2", "--quiet"]) == EXIT_OK
        table = rows(out / "sweep.csv")
        assert [int(r["index"]) for r in table] == [0, 1, 2, 3]
        status = [r["status"] for r in table]
        assert status.count("ok") == 3 and status[2].startswith("config_error") and "5*eps" in status[2]
        assert all(float(r["sup_E_m"]) > 0 for r in table if r["status"] == "ok")
        man = json.loads((out / "manifest.json").read_text())
        assert man["points"] == 4 and man["failed"] == 1

    def test_single_point_matches_simulate(self):
        data = small()
        data["sweep"] = {"v": [1.0]}
        cfg = validate(data)
        row = sweep(cfg, workers=1)[0]
        ref = simulate(validate({**data, "sweep": None})).manifest["summary"]["E2"]
        assert row["status"] == "ok" and row["window"] == "E2"
        for key, val in ref.items():
            assert row[key] == val


class TestChecks:
    def test_verify_cutoff(self, tmp_path):
        out = tmp_path / "cut"
        data = small()
        data["cutoff"] = {"params": [[0.1, 0.5]]}
        assert main(["verify-cutoff", "--config", write(tmp_path, data), "--out", str(out), "--quiet"]) == EXIT_OK
        rep = json.loads((out / "cutoff_report.json").read_text())
        assert rep["all_passed"]
        assert rows(out / "cutoff_profile.csv")

    def test_verify_inequalities(self, tmp_path):
        out = tmp_path / "ineq"
        data = small()
        data["inequalities"] = {"count": 6, "n": 128}
        assert main(["verify-inequalities", "--config", write(tmp_path, data), "--out", str(out), "--quiet"]) == EXIT_OK
        rep = json.loads((out / "inequality_report.json").read_text())
        assert rep["all_passed"]
        assert len(rows(out / "inequality_samples.csv")) > 0

    def test_convergence_energy_identity(self, tmp_path):
        out = tmp_path / "conv"
        assert main(["convergence", "--config", "preset:energy-identity", "--out", str(out), "--quiet"]) == EXIT_OK
        rep = json.loads((out / "convergence.json").read_text())
        assert rep["dt_ladder"]["energy_identity_order"] >= 1.9
        assert (out / "convergence.csv").exists()

    def test_fit_order(self):
        assert fit_order([1, 0.5, 0.25], [1, 0.25, 0.0625]) == pytest.approx(2.0)
        assert np.isnan(fit_order([1, 0.5], [1, 0]))
