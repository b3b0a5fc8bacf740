"""End-to-end CLI tests, run in-process through `chiralpb.cli.run`.

The contract under test: exit code 0 on success, 1 on usage errors
(bad flags, malformed configs, output collisions), 2 on numerical
failures; every file-writing run drops a JSON manifest next to its
first output; reruns with identical arguments and seeds reproduce
output files byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest

from conftest import make_spec
from chiralpb import __version__
from chiralpb.analytic import odd_resonant, pb_curve_single, survival_limit
from chiralpb.cli import run
from chiralpb.explore import CSV_HEADER, SweepGrid, disorder_ensemble, sweep
from chiralpb.model import CouplingKind, DriveFrame
from chiralpb.scatter import scatter_point


def read_csv(path):
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class TestTopLevel:
    def test_version(self, capsys):
        assert run(["--version"]) == 0
        assert __version__ in capsys.readouterr().out

    def test_no_subcommand_is_usage_error(self, capsys):
        assert run([]) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_subcommand(self, capsys):
        assert run(["frobnicate"]) == 1

    def test_unknown_flag(self, capsys):
        assert run(["point", "--N", "1", "--bogus"]) == 1
        assert "error" in capsys.readouterr().err


class TestPoint:
    ARGS = ["point", "--N", "1", "--g", "0.8", "--alpha", "0.05", "--delta", "0.3"]

    def reference(self):
        spec = make_spec(n_cells=1, alpha=0.05, g=0.8)
        return scatter_point(spec, DriveFrame.at_detuning(spec, 0.3))

    def test_stdout_row_matches_library(self, capsys, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert run(self.ARGS) == 0
        rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
        assert rows[0] == list(CSV_HEADER)
        assert len(rows) == 2
        res = self.reference()
        row = rows[1]
        assert float(row[0]) == 0.3
        # alpha is recomputed from the stored rates, so only rounding-exact
        assert float(row[1]) == pytest.approx(0.05, rel=1e-13)
        assert float(row[2]) == res.g2
        assert float(row[3]) == res.g3
        assert float(row[4]) == res.transmission
        assert float(row[5]) == res.reflection
        assert float(row[6]) == res.arg_p2
        assert row[7] == res.label.value
        # stdout mode leaves no files behind
        assert list(tmp_path.iterdir()) == []

    def test_file_output_with_manifest(self, tmp_path):
        out = tmp_path / "pt.csv"
        assert run(self.ARGS + ["--out", str(out)]) == 0
        header, rows = read_csv(out)
        assert header == list(CSV_HEADER)
        assert len(rows) == 1
        assert float(rows[0][2]) == self.reference().g2

        manifest = json.loads((tmp_path / "pt.manifest.json").read_text())
        assert manifest["subcommand"] == "point"
        assert manifest["version"] == __version__
        assert manifest["outputs"] == [str(out)]
        assert manifest["parameters"]["delta_over_kappa"] == 0.3
        assert manifest["spec"]["units"] == "rate"
        assert manifest["spec"]["n_cells"] == 1
        assert manifest["spec"]["kappa_r"] == pytest.approx(1.0 / 1.05)

    def test_collision_without_force(self, tmp_path, capsys):
        out = tmp_path / "pt.csv"
        assert run(self.ARGS + ["--out", str(out)]) == 0
        assert run(self.ARGS + ["--out", str(out)]) == 1
        assert "output exists" in capsys.readouterr().err
        assert run(self.ARGS + ["--out", str(out), "--force"]) == 0

    def test_singular_point_is_numerical_failure(self, capsys):
        argv = [
            "point", "--N", "2", "--kind", "bare", "--g", "0",
            "--alpha", "1", "--delta", "0",
        ]
        assert run(argv) == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_vanishing_channel_is_numerical_failure(self, capsys):
        argv = ["point", "--N", "1", "--kind", "direct", "--g", "0.8", "--delta", "0"]
        assert run(argv) == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_negative_alpha_rejected(self, capsys):
        assert run(["point", "--N", "1", "--alpha", "-0.5"]) == 1


class TestConfigResolution:
    def test_config_file_equivalent_to_inline(self, tmp_path, capsys):
        spec = make_spec(n_cells=1, alpha=0.05, g=0.8)
        cfg = tmp_path / "sys.json"
        cfg.write_text(spec.to_json())
        assert run(["point", "--config", str(cfg), "--delta", "0.3"]) == 0
        from_config = capsys.readouterr().out
        assert run(TestPoint.ARGS) == 0
        inline = capsys.readouterr().out
        assert from_config == inline

    def test_alpha_override_on_config(self, tmp_path, capsys):
        cfg = tmp_path / "sys.json"
        cfg.write_text(make_spec(n_cells=1, alpha=1.0, g=0.8).to_json())
        argv = ["point", "--config", str(cfg), "--alpha", "0.05", "--delta", "0.3"]
        assert run(argv) == 0
        overridden = capsys.readouterr().out
        assert run(TestPoint.ARGS) == 0
        assert overridden == capsys.readouterr().out

    def test_malformed_json(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{not json")
        assert run(["point", "--config", str(cfg)]) == 1
        assert "malformed config" in capsys.readouterr().err

    def test_non_object_json(self, tmp_path):
        cfg = tmp_path / "list.json"
        cfg.write_text("[1, 2, 3]")
        assert run(["point", "--config", str(cfg)]) == 1

    def test_missing_config_file(self, tmp_path):
        assert run(["point", "--config", str(tmp_path / "absent.json")]) == 1

    def test_config_with_bad_field(self, tmp_path):
        doc = make_spec().to_document()
        doc["n_cells"] = 0
        cfg = tmp_path / "zero.json"
        cfg.write_text(json.dumps(doc))
        assert run(["point", "--config", str(cfg)]) == 1

    def test_missing_system_entirely(self, capsys):
        assert run(["point", "--delta", "0.2"]) == 1
        assert "--config or an inline system" in capsys.readouterr().err


class TestSweepCommand:
    ARGS = [
        "sweep", "--N", "2", "--g", "0.6", "--gamma-e", "0.1",
        "--deltas", "-0.5", "0.5", "4", "--alphas", "0.2", "1.4", "3",
    ]

    def test_matches_library_bytes(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run(self.ARGS + ["--out", str(out)]) == 0
        spec = make_spec(n_cells=2, alpha=1.0, g=0.6, gamma_e=0.1)
        grid = SweepGrid(base=spec, delta_axis=(-0.5, 0.5, 4), alpha_axis=(0.2, 1.4, 3))
        assert out.read_text() == sweep(grid).to_csv()

    def test_rerun_is_byte_identical(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run(self.ARGS + ["--out", str(out)]) == 0
        first = out.read_bytes()
        assert run(self.ARGS + ["--out", str(out), "--force"]) == 0
        assert out.read_bytes() == first

    def test_quantities_selection(self, tmp_path):
        out = tmp_path / "sweep.csv"
        argv = self.ARGS + ["--quantities", "g2,g3", "--out", str(out)]
        assert run(argv) == 0
        header, rows = read_csv(out)
        assert header == list(CSV_HEADER)
        for row in rows:
            assert not math.isnan(float(row[2]))
            assert not math.isnan(float(row[3]))
            assert math.isnan(float(row[4]))  # T not requested

    def test_bogus_quantities(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        argv = self.ARGS + ["--quantities", "g2,conductance", "--out", str(out)]
        assert run(argv) == 1
        assert "--quantities" in capsys.readouterr().err
        assert not out.exists()

    @pytest.mark.parametrize(
        "deltas",
        [
            ["-0.5", "0.5", "1"],  # too few points
            ["0.5", "-0.5", "4"],  # reversed bounds
        ],
    )
    def test_bad_axis(self, tmp_path, deltas):
        argv = [
            "sweep", "--N", "1", "--deltas", *deltas,
            "--alphas", "0.2", "1.4", "3", "--out", str(tmp_path / "s.csv"),
        ]
        assert run(argv) == 1


class TestZerosCommand:
    ARGS = [
        "zeros", "--N", "1", "--g", "0.8",
        "--deltas", "-0.8", "0.8", "60", "--alphas", "0.001", "0.999", "60",
    ]

    def test_single_cell(self, tmp_path, capsys):
        out = tmp_path / "z.csv"
        assert run(self.ARGS + ["--out", str(out)]) == 0
        assert "found 1 perfect-blockade points" in capsys.readouterr().out
        header, rows = read_csv(out)
        assert header == list(CSV_HEADER) + ["residual", "winding"]
        assert len(rows) == 1
        row = rows[0]
        assert abs(float(row[0])) < 1e-8
        assert float(row[1]) == pytest.approx(0.059997880, abs=1e-6)
        assert float(row[2]) <= 1e-10  # g2 at the refined zero
        assert float(row[-2]) < 1e-10  # residual
        assert int(row[-1]) == -1

        manifest = json.loads((tmp_path / "z.manifest.json").read_text())
        assert manifest["subcommand"] == "zeros"
        assert manifest["parameters"]["n_zeros"] == 1

    def test_rerun_is_byte_identical(self, tmp_path):
        out = tmp_path / "z.csv"
        assert run(self.ARGS + ["--out", str(out)]) == 0
        first = out.read_bytes()
        assert run(self.ARGS + ["--out", str(out), "--force"]) == 0
        assert out.read_bytes() == first


class TestAlphaOptAndFit:
    def test_pipeline(self, tmp_path, capsys):
        ao = tmp_path / "ao.csv"
        argv = [
            "alpha-opt", "--N", "1", "2", "--g", "0.8",
            "--deltas", "-0.7", "0.7", "80", "--alphas", "0.01", "0.99", "80",
            "--out", str(ao),
        ]
        assert run(argv) == 0
        printed = capsys.readouterr().out
        assert "N=1" in printed and "N=2" in printed
        header, rows = read_csv(ao)
        assert header == ["n_cells", "alpha_opt", "delta_opt", "alpha_levels", "n_zeros"]
        assert [int(r[0]) for r in rows] == [1, 2]
        assert float(rows[0][1]) == pytest.approx(0.059997880, abs=1e-6)
        assert float(rows[1][1]) == pytest.approx(0.602753707, abs=1e-6)
        assert float(rows[1][2]) == pytest.approx(0.355206460, abs=1e-6)
        assert [int(r[4]) for r in rows] == [1, 2]

        fit_out = tmp_path / "fit.json"
        argv = [
            "fit", "--in", str(ao), "--form", "log-linear",
            "--x-col", "n_cells", "--y-col", "alpha_opt",
            "--y-transform", "one-minus", "--out", str(fit_out),
        ]
        assert run(argv) == 0
        report = json.loads(fit_out.read_text())
        assert report["form"] == "log_linear"
        assert len(report["params"]) == 2
        assert report["n_points"] == 2
        assert np.isfinite(report["params"]).all()
        assert (tmp_path / "fit.manifest.json").exists()

    def test_alpha_opt_empty_region_is_numerical_failure(self, tmp_path, capsys):
        argv = [
            "alpha-opt", "--N", "1", "--g", "0.8",
            "--deltas", "0.4", "0.8", "30", "--alphas", "0.4", "0.9", "30",
            "--out", str(tmp_path / "ao.csv"),
        ]
        assert run(argv) == 2
        assert "no perfect PB" in capsys.readouterr().err

    def test_alpha_opt_flag_validation(self, tmp_path):
        base = ["alpha-opt", "--out", str(tmp_path / "ao.csv")]
        assert run(base + ["--N", "0"]) == 1
        assert run(base + ["--N", "1", "--deltas", "-0.5", "0.5", "20"]) == 1  # missing --alphas

    def test_fit_missing_column(self, tmp_path, capsys):
        src = tmp_path / "data.csv"
        src.write_text("n_cells,alpha_opt\n1,0.06\n2,0.6\n")
        argv = [
            "fit", "--in", str(src), "--form", "log-linear",
            "--y-col", "nope", "--out", str(tmp_path / "f.json"),
        ]
        assert run(argv) == 1
        assert "no column" in capsys.readouterr().err

    def test_fit_too_few_points(self, tmp_path, capsys):
        src = tmp_path / "data.csv"
        src.write_text("n_cells,alpha_opt\n1,0.06\n")
        argv = ["fit", "--in", str(src), "--form", "log-linear",
                "--out", str(tmp_path / "f.json")]
        assert run(argv) == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_fit_non_numeric_cell(self, tmp_path):
        src = tmp_path / "data.csv"
        src.write_text("n_cells,alpha_opt\n1,abc\n2,0.6\n")
        argv = ["fit", "--in", str(src), "--form", "log-linear",
                "--out", str(tmp_path / "f.json")]
        assert run(argv) == 1


class TestDisorderCommand:
    ARGS = [
        "disorder", "--N", "2", "--g", "0.6", "--gamma-e", "0.05",
        "--W", "0.1", "--instances", "3", "--seed", "9",
        "--deltas", "-0.5", "0.5", "4", "--alphas", "0.2", "1.4", "3",
    ]

    def test_matches_library_and_reruns_identically(self, tmp_path):
        out = tmp_path / "dis.csv"
        assert run(self.ARGS + ["--out", str(out)]) == 0
        spec = make_spec(n_cells=2, alpha=1.0, g=0.6, gamma_e=0.05)
        grid = SweepGrid(base=spec, delta_axis=(-0.5, 0.5, 4), alpha_axis=(0.2, 1.4, 3))
        table = disorder_ensemble(spec, 0.1, n_instances=3, seed=9, grid=grid)
        assert out.read_text() == table.to_csv()

        first = out.read_bytes()
        assert run(self.ARGS + ["--out", str(out), "--force"]) == 0
        assert out.read_bytes() == first

        manifest = json.loads((tmp_path / "dis.manifest.json").read_text())
        assert manifest["seeds"] == {"ensemble_seed": 9}
        assert manifest["parameters"]["W_over_kappa"] == 0.1
        assert manifest["parameters"]["n_instances"] == 3

    def test_validation(self, tmp_path):
        out = str(tmp_path / "dis.csv")
        bad_w = [a if a != "0.1" else "-0.1" for a in self.ARGS]
        assert run(bad_w + ["--out", out]) == 1
        bad_n = [a if a != "3" else "0" for a in self.ARGS]
        assert run(bad_n + ["--out", out]) == 1


class TestValidateCommand:
    ARGS = [
        "validate", "--N", "1", "--g", "0.8", "--alpha", "0.05",
        "--deltas", "-0.5", "0.5", "3", "--omega-factors", "1",
    ]

    def test_passes_at_default_tolerance(self, tmp_path, capsys):
        out = tmp_path / "val.csv"
        assert run(self.ARGS + ["--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "PASS" in printed
        header, rows = read_csv(out)
        assert header == ["delta_over_kappa", "g2_scatter", "g2_me", "rel_dev"]
        assert len(rows) == 3
        for row in rows:
            assert float(row[3]) <= 0.02
        # single omega factor: no scaling table alongside
        assert not (tmp_path / "val_scaling.csv").exists()
        manifest = json.loads((tmp_path / "val.manifest.json").read_text())
        assert manifest["parameters"]["max_rel_dev"] <= 0.02
        assert manifest["parameters"]["scaling_slope"] is None

    def test_tiny_tolerance_fails_numerically(self, tmp_path, capsys):
        out = tmp_path / "val.csv"
        assert run(self.ARGS + ["--out", str(out), "--tol", "1e-12"]) == 2
        assert "FAIL" in capsys.readouterr().out

    def test_bad_omega_factors(self, tmp_path):
        argv = [
            "validate", "--N", "1", "--omega-factors", "-1",
            "--out", str(tmp_path / "val.csv"),
        ]
        assert run(argv) == 1


class TestCurveCommand:
    def test_values_match_closed_forms(self, tmp_path):
        out = tmp_path / "curve.csv"
        assert run(["curve", "--alphas", "0", "0.9", "10", "--out", str(out)]) == 0
        header, rows = read_csv(out)
        assert header == ["alpha", "g_pb_single", "g_pb_odd", "survival_limit"]
        assert len(rows) == 10
        for row in rows:
            a = float(row[0])
            assert float(row[1]) == pb_curve_single(a)
            assert float(row[2]) == odd_resonant(a, 0.0, 1.0)[2]
            assert float(row[3]) == survival_limit(a)
        assert float(rows[0][1]) == pytest.approx(math.sqrt(3) / 2, rel=1e-15)

    def test_blockade_curves_are_nan_past_unity(self, tmp_path):
        out = tmp_path / "curve.csv"
        assert run(["curve", "--alphas", "0.5", "1.5", "3", "--out", str(out)]) == 0
        _, rows = read_csv(out)
        assert not math.isnan(float(rows[0][1]))
        assert not math.isnan(float(rows[0][2]))
        for row in rows[1:]:  # alpha = 1.0 and 1.5: no blockade curve
            assert math.isnan(float(row[1]))
            assert math.isnan(float(row[2]))
            assert not math.isnan(float(row[3]))  # survival limit still defined

    def test_negative_alpha_rejected(self, tmp_path, capsys):
        argv = ["curve", "--alphas", "-0.2", "0.5", "5", "--out", str(tmp_path / "c.csv")]
        assert run(argv) == 1
        assert "nonnegative" in capsys.readouterr().err
