import json
import os

import pytest

from llres import harness
from llres.harness import RunConfig, cli_main, preset_experiments


def _run(argv, monkeypatch=None):
    return cli_main(argv)


class TestRunConfig:
    def test_round_trip_bit_identical(self):
        cfg = RunConfig(pipeline="scan", potential="a2_gauss", seed=7,
                        params={"box": [-0.5, 0.5, -0.5, 0.02]})
        text = cfg.to_json()
        again = RunConfig.from_json(text)
        assert again.to_json() == text
        assert again.config_hash() == cfg.config_hash()

    def test_nonpositive_tolerance_rejected(self):
        from llres.model import ValidationFailure
        with pytest.raises(ValidationFailure):
            RunConfig(tolerances={"unwrap": 0.0})

    def test_presets_validate_and_cover_acceptance(self):
        presets = preset_experiments()
        assert "acc-counting-a1" in presets
        assert presets["acc-counting-a1"].potential == "a1_m4_plus"
        assert "acc-bw-lorentzian" in presets
        for cfg in presets.values():
            assert RunConfig.from_json(cfg.to_json()) == cfg


class TestCLI:
    def test_toeplitz_outputs(self, tmp_path):
        out = tmp_path / "t"
        rc = _run(["toeplitz", "--potential", "a2_gauss", "--basis", "32",
                   "--out", str(out), "--param", "window=[1e-6,1e-2]"])
        assert rc == 0
        names = sorted(os.listdir(out))
        assert names == ["counting.csv", "manifest.json", "phi.csv", "spectrum.csv"]
        lines = (out / "spectrum.csv").read_text().splitlines()
        assert lines[0] == "index,eigenvalue"
        assert float(lines[1].split(",")[1]) == pytest.approx(0.5, abs=1e-12)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config_hash"]
        assert "timestamp" in manifest

    def test_scan_zero_potential_empty(self, tmp_path):
        out = tmp_path / "z"
        rc = _run(["scan", "--potential", "zero", "--out", str(out),
                   "--n-lll", "4", "--q-max", "1",
                   "--param", "box=[0.05,0.4,-0.4,-0.02]"])
        assert rc == 0
        rows = (out / "resonances.csv").read_text().splitlines()
        assert rows == ["re_k,im_k,re_z,im_z,multiplicity,residual"]

    def test_scan_synthetic_rank_one(self, tmp_path):
        out = tmp_path / "s"
        rc = _run(["scan", "--potential", "synthetic", "--out", str(out),
                   "--param", "b_diag=[0.1]",
                   "--param", "box=[-0.2,0.2,-0.3,-0.02]"])
        assert rc == 0
        rows = (out / "resonances.csv").read_text().splitlines()
        assert len(rows) == 2
        _, im_k, _, _, mult, _ = rows[1].split(",")
        assert float(im_k) == pytest.approx(-0.1, abs=1e-9)
        assert int(mult) == 1

    def test_determinism_modulo_timestamp(self, tmp_path):
        outs = []
        for tag in ("r1", "r2"):
            out = tmp_path / tag
            rc = _run(["scan", "--potential", "synthetic", "--seed", "3",
                       "--out", str(out), "--param", "b_diag=[0.1,0.2]",
                       "--param", "box=[-0.3,0.3,-0.35,-0.02]"])
            assert rc == 0
            outs.append(out)
        a, b = outs
        assert (a / "resonances.csv").read_bytes() == (b / "resonances.csv").read_bytes()
        assert (a / "scan_report.json").read_bytes() == (b / "scan_report.json").read_bytes()
        ma = json.loads((a / "manifest.json").read_text())
        mb = json.loads((b / "manifest.json").read_text())
        for key in ("timestamp", "wall_time_s", "out_dir"):
            ma.pop(key), mb.pop(key)
        assert ma == mb

    def test_unknown_subcommand_exits_one(self, capsys):
        assert _run(["frobnicate"]) == 1

    def test_unknown_flag_exits_one(self, capsys):
        assert _run(["scan", "--frobnicate"]) == 1

    def test_validation_failure_exits_two(self, tmp_path, capsys):
        rc = _run(["singularity", "--potential", "indefinite_coupled",
                   "--out", str(tmp_path / "x")])
        assert rc == 2

    def test_numerical_nonconvergence_exits_three(self, tmp_path, capsys):
        # this coupling pins a determinant zero onto the positive real axis at
        # k = 1.5 (energy 2.25); the unwrap chain cannot settle across it
        rc = _run(["ssf", "--potential", "synthetic", "--out", str(tmp_path / "n"),
                   "--param", "b_diag=[0.3,0.3]",
                   "--param", "coupling=[[-1.0,0.2],[-0.2,-1.0]]",
                   "--param", "window=[1.5,3.0]",
                   "--param", "n_grid=9"])
        assert rc == 3

    def test_env_var_overrides_out_dir(self, tmp_path, monkeypatch):
        target = tmp_path / "env_out"
        monkeypatch.setenv("LLRES_OUT", str(target))
        rc = _run(["validate", "--potential", "a2_gauss", "--out",
                   str(tmp_path / "ignored")])
        assert rc == 0
        assert (target / "validation.json").exists()

    def test_validate_json_contents(self, tmp_path):
        out = tmp_path / "v"
        rc = _run(["validate", "--potential", "a1_m3_minus", "--out", str(out)])
        assert rc == 0
        payload = json.loads((out / "validation.json").read_text())
        assert payload["passed"] is True
        assert payload["definiteness_verdict"] == "minus"

    def test_ssf_csv_format(self, tmp_path):
        out = tmp_path / "ssf"
        rc = _run(["ssf", "--potential", "synthetic", "--out", str(out),
                   "--param", "b_diag=[0.3]", "--param", "j_sign=\"minus\"",
                   "--param", "window=[-0.5,-0.02]", "--param", "n_grid=12"])
        assert rc == 0
        lines = (out / "ssf.csv").read_text().splitlines()
        assert lines[0] == "lambda,xi2,xi_prime,xi"
        assert len(lines) == 13
        # one bound state at -0.09 sits inside the window
        last = [float(v) for v in lines[-1].split(",")]
        assert last[3] == -1.0

    def test_oracle_regen_writes_file(self, tmp_path):
        target = tmp_path / "refs.json"
        rc = _run(["oracle-regen", "--out", str(tmp_path / "o"),
                   "--param", f'path="{target}"'])
        assert rc == 0
        assert target.exists()
        payload = json.loads(target.read_text())
        assert "a2_gauss" in payload


class TestMatrixDump:
    def test_round_trip(self, tmp_path):
        import numpy as np
        from llres.birman_schwinger import dump_matrix, load_matrix

        mat = (np.arange(12, dtype=float).reshape(3, 4)
               + 1j * np.arange(12, dtype=float)[::-1].reshape(3, 4))
        path = tmp_path / "mat.bin"
        dump_matrix(str(path), mat)
        again = load_matrix(str(path))
        assert again.shape == (3, 4)
        assert np.array_equal(again, mat)

    def test_layout_little_endian_rowmajor(self, tmp_path):
        import numpy as np
        import struct
        from llres.birman_schwinger import dump_matrix

        mat = np.array([[1.0 + 2.0j, 3.0 - 1.0j]])
        path = tmp_path / "mat.bin"
        dump_matrix(str(path), mat)
        raw = path.read_bytes()
        rows, cols = struct.unpack("<QQ", raw[:16])
        assert (rows, cols) == (1, 2)
        vals = struct.unpack("<4d", raw[16:])
        assert vals == (1.0, 2.0, 3.0, -1.0)


class TestScripts:
    def test_counting_script_runs(self):
        import subprocess, sys
        r = subprocess.run(
            [sys.executable, "scripts/run_counting_experiment.py",
             "--basis", "80", "--r-min", "1e-3", "--r-max", "1e-2"],
            capture_output=True, text=True, cwd=".")
        assert r.returncode == 0, r.stderr
        assert "fitted exponent" in r.stdout

    def test_ssf_script_runs(self):
        import subprocess, sys
        r = subprocess.run(
            [sys.executable, "scripts/run_ssf_profile.py",
             "--lam-min", "0.05", "--lam-max", "0.3", "--n", "3"],
            capture_output=True, text=True, cwd=".")
        assert r.returncode == 0, r.stderr
        assert "xi2" in r.stdout
