import json

import pytest

from dpgfem.cli import main


def run_cli(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


BV_CONFIG = {"bv": {"k_bv": 2.0, "F": 3.0, "R_gas": 2.0, "T": 6.0,
                    "c_smax": 5.0, "c_e": 4.0, "c_s": 1.0,
                    "phi_e": 0.5, "phi_open": 0.25}}


class TestBvCommand:
    def test_reference_cell_constants(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BV_CONFIG)
        code, out = run_cli(capsys, ["bv", "--config", cfg,
                                     "--outdir", str(tmp_path / "out")])
        assert code == 0
        report = json.loads(out)
        assert report == {"command": "bv", "I_c": 24.0, "beta": 6.0,
                          "R_load": -4.5}
        on_disk = json.loads((tmp_path / "out" / "report.json").read_text())
        assert on_disk == report

    def test_missing_key_is_config_error(self, tmp_path, capsys):
        broken = {"bv": dict(BV_CONFIG["bv"])}
        del broken["bv"]["c_smax"]
        cfg = write_config(tmp_path, broken)
        code, out = run_cli(capsys, ["bv", "--config", cfg,
                                     "--outdir", str(tmp_path / "out")])
        assert code == 1
        err = json.loads(out)["error"]
        assert err["code"] == "config"
        assert "c_smax" in err["message"]

    def test_non_numeric_value_rejected(self, tmp_path, capsys):
        broken = {"bv": dict(BV_CONFIG["bv"], T="hot")}
        cfg = write_config(tmp_path, broken)
        code, out = run_cli(capsys, ["bv", "--config", cfg,
                                     "--outdir", str(tmp_path / "out")])
        assert code == 1
        assert json.loads(out)["error"]["code"] == "config"


class TestSolveCommand:
    def test_manufactured_quadratic_potential(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "manufactured": "pot-poly2",
            "mesh": {"nx": 4, "ny": 4},
            "discretization": {"p": 2},
        })
        outdir = tmp_path / "out"
        code, out = run_cli(capsys, ["solve", "--config", cfg,
                                     "--outdir", str(outdir)])
        assert code == 0
        for name in ("fields.vtk", "indicators.csv", "report.json"):
            assert (outdir / name).exists()
        report = json.loads(out)
        assert report["command"] == "solve"
        assert report["problem"] == "potential"
        assert report["manufactured"] == "pot-poly2"
        assert report["errors"]["e_field"] <= 1e-9
        assert report["eta"] <= 1e-7
        assert report["dofs"]["total"] == (report["dofs"]["field"]
                                           + report["dofs"]["flux"]
                                           + report["dofs"]["trace"])

    def test_explicit_concentration_config(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "problem": "concentration",
            "mesh": {"nx": 2, "ny": 2},
            "discretization": {"p": 1},
            "coefficients": {"D": 0.5, "dt": 0.1,
                             "c_prev": "x*y", "J": "0"},
        })
        code, out = run_cli(capsys, ["solve", "--config", cfg,
                                     "--outdir", str(tmp_path / "out")])
        assert code == 0
        report = json.loads(out)
        assert report["problem"] == "concentration"
        assert "manufactured" not in report
        assert report["eta"] > 0.0

    def test_repeat_runs_bit_identical(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "manufactured": "conc-trig",
            "mesh": {"nx": 4, "ny": 4},
            "discretization": {"p": 1},
        })
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        code_a, stdout_a = run_cli(capsys, ["solve", "--config", cfg,
                                            "--outdir", str(out_a)])
        code_b, stdout_b = run_cli(capsys, ["solve", "--config", cfg,
                                            "--outdir", str(out_b)])
        assert code_a == code_b == 0
        assert stdout_a == stdout_b
        for name in ("fields.vtk", "indicators.csv", "report.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_nested_outdir_created(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "manufactured": "conc-poly2",
            "mesh": {"nx": 2, "ny": 2},
            "discretization": {"p": 2},
        })
        outdir = tmp_path / "deep" / "nested" / "dir"
        code, _ = run_cli(capsys, ["solve", "--config", cfg,
                                   "--outdir", str(outdir)])
        assert code == 0
        assert (outdir / "report.json").exists()


class TestConvergenceCommand:
    def test_quadratic_rate_on_trig_case(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "manufactured": "conc-trig",
            "discretization": {"p": 2},
            "levels": 2,
            "base_n": 4,
        })
        outdir = tmp_path / "out"
        code, out = run_cli(capsys, ["convergence", "--config", cfg,
                                     "--outdir", str(outdir)])
        assert code == 0
        report = json.loads(out)
        assert report["command"] == "convergence"
        assert report["case"] == "conc-trig"
        assert report["eoc_combined"][-1] >= 1.5
        csv_lines = (outdir / "eoc.csv").read_text().strip().split("\n")
        assert csv_lines[0].startswith("level,n,h,dofs")
        assert len(csv_lines) == 3

    def test_requires_manufactured_case(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"problem": "concentration"})
        code, out = run_cli(capsys, ["convergence", "--config", cfg,
                                     "--outdir", str(tmp_path / "out")])
        assert code == 1
        err = json.loads(out)["error"]
        assert err["code"] == "config"
        assert "manufactured" in err["message"]


class TestInfsupCommand:
    def test_concentration_levels(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "problem": "concentration",
            "coefficients": {"D": 0.5, "dt": 0.5},
            "discretization": {"p": 1},
            "levels": 2,
            "base_n": 1,
        })
        outdir = tmp_path / "out"
        code, out = run_cli(capsys, ["infsup", "--config", cfg,
                                     "--outdir", str(outdir)])
        assert code == 0
        report = json.loads(out)
        assert [lvl["n"] for lvl in report["levels"]] == [1, 2]
        assert all(lvl["alpha"] > 0.0 for lvl in report["levels"])
        assert len(report["ratios"]) == 1
        csv_lines = (outdir / "infsup.csv").read_text().strip().split("\n")
        assert csv_lines[0] == "level,n,dofs,alpha,ratio"
        assert len(csv_lines) == 3

    def test_size_cap_reported_as_config_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "problem": "concentration",
            "discretization": {"p": 2},
            "levels": 4,
            "base_n": 4,
        })
        code, out = run_cli(capsys, ["infsup", "--config", cfg,
                                     "--outdir", str(tmp_path / "out")])
        assert code == 1
        err = json.loads(out)["error"]
        assert err["code"] == "config"
        assert "size cap" in err["message"]


class TestErrorHandling:
    def test_no_arguments_is_usage_error(self, capsys):
        code, out = run_cli(capsys, [])
        assert code == 2
        assert json.loads(out)["error"]["code"] == "usage"

    def test_unknown_command_is_usage_error(self, capsys):
        code, out = run_cli(capsys, ["frobnicate"])
        assert code == 2
        assert json.loads(out)["error"]["code"] == "usage"

    def test_missing_config_flag_is_usage_error(self, capsys):
        code, out = run_cli(capsys, ["solve"])
        assert code == 2
        assert json.loads(out)["error"]["code"] == "usage"

    def test_unreadable_config(self, tmp_path, capsys):
        code, out = run_cli(capsys, ["solve", "--config",
                                     str(tmp_path / "missing.json"),
                                     "--outdir", str(tmp_path / "out")])
        assert code == 1
        err = json.loads(out)["error"]
        assert err["code"] == "config"
        assert "cannot read config" in err["message"]

    def test_malformed_json_reports_location(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"problem": "concentration",}')
        code, out = run_cli(capsys, ["solve", "--config", str(path),
                                     "--outdir", str(tmp_path / "out")])
        assert code == 1
        err = json.loads(out)["error"]
        assert err["code"] == "config"
        assert "line" in err["message"]

    def test_non_object_config_rejected(self, tmp_path, capsys):
        path = tmp_path / "list.json"
        path.write_text("[1, 2, 3]")
        code, out = run_cli(capsys, ["solve", "--config", str(path),
                                     "--outdir", str(tmp_path / "out")])
        assert code == 1
        assert json.loads(out)["error"]["code"] == "config"

    def test_invalid_partition_is_validation_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "problem": "potential",
            "boundary": {"left": "dirichlet", "right": "dirichlet",
                         "bottom": "dirichlet", "top": "dirichlet"},
        })
        code, out = run_cli(capsys, ["solve", "--config", cfg,
                                     "--outdir", str(tmp_path / "out")])
        assert code == 1
        err = json.loads(out)["error"]
        assert err["code"] == "validation"
        assert "invalid partition" in err["message"]

    def test_negative_diffusivity_is_validation_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "problem": "concentration",
            "mesh": {"nx": 2, "ny": 2},
            "coefficients": {"D": -1.0, "dt": 0.1},
        })
        code, out = run_cli(capsys, ["solve", "--config", cfg,
                                     "--outdir", str(tmp_path / "out")])
        assert code == 1
        err = json.loads(out)["error"]
        assert err["code"] == "validation"
        assert "D must be positive" in err["message"]

    def test_expression_syntax_error_reports_position(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "problem": "concentration",
            "mesh": {"nx": 2, "ny": 2},
            "coefficients": {"D": 0.5, "dt": 0.1, "c_prev": "x +"},
        })
        code, out = run_cli(capsys, ["solve", "--config", cfg,
                                     "--outdir", str(tmp_path / "out")])
        assert code == 1
        err = json.loads(out)["error"]
        assert err["code"] == "config"
        assert "position" in err["message"]

    def test_unknown_manufactured_case(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"manufactured": "conc-cubic"})
        code, out = run_cli(capsys, ["solve", "--config", cfg,
                                     "--outdir", str(tmp_path / "out")])
        assert code == 1
        err = json.loads(out)["error"]
        assert err["code"] == "config"
        assert "unknown manufactured case" in err["message"]

    def test_invalid_degree(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "manufactured": "conc-poly2",
            "discretization": {"p": 0},
        })
        code, out = run_cli(capsys, ["solve", "--config", cfg,
                                     "--outdir", str(tmp_path / "out")])
        assert code == 1
        assert json.loads(out)["error"]["code"] == "config"
