"""Front door: parsing and precedence, artifacts, exit codes, determinism."""

import json
import math
import shutil
import subprocess
import sys

import numpy as np
import pytest

from etabs import (
    MarketParams,
    build_H_BS,
    build_h_BS,
    centered_window,
    closed_form_call,
    closed_form_put,
    detailed_balance_metric,
    operator_from_dict,
    price_barrier_down_and_out,
    price_double_knock_out,
)
from etabs.cli import UsageError, main, parse_config

# the plain-window price path warns about payoff mass at the window edge by
# design; these runs accept that and check the numbers instead
pytestmark = pytest.mark.filterwarnings("ignore:price.*:UserWarning")

PRICE_ARGS = ["price", "--strike", "100", "--spot", "100", "--tau", "0.5"]


def _read_csv(path):
    """Split an artifact into comment lines and data rows."""
    comments, rows = [], []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            comments.append(line)
        elif line:
            rows.append(line)
    return comments, rows


def _comment_json(comments, tag):
    for line in comments:
        prefix = f"# {tag}: "
        if line.startswith(prefix):
            return json.loads(line[len(prefix):])
    raise AssertionError(f"no '{tag}' comment found")


class TestParseConfig:
    def test_defaults(self):
        config = parse_config(["spectrum"])
        assert config.command == "spectrum"
        assert config.options["sigma"] == 0.2
        assert config.options["rate"] == 0.05
        assert config.options["n"] == 500
        assert config.options["output"] is None
        assert config.options["no_timestamp"] is False

    def test_flags_override_defaults(self):
        config = parse_config(["spectrum", "--n", "64", "--sigma", "0.3"])
        assert config.options["n"] == 64
        assert config.options["sigma"] == 0.3

    def test_config_file_and_flag_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment line\n\nn = 64\nsigma = 0.25\nno_timestamp = yes\n")
        config = parse_config(
            ["spectrum", "--config", str(cfg), "--sigma", "0.4"]
        )
        assert config.options["n"] == 64
        assert config.options["sigma"] == 0.4
        assert config.options["no_timestamp"] is True

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("volatilty = 0.3\n")
        with pytest.raises(UsageError, match=r":1: unknown config key 'volatilty'"):
            parse_config(["spectrum", "--config", str(cfg)])

    def test_malformed_config_lines(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("sigma 0.3\n")
        with pytest.raises(UsageError, match="expected key = value"):
            parse_config(["spectrum", "--config", str(cfg)])
        cfg.write_text("n = abc\n")
        with pytest.raises(UsageError, match=r":1: key 'n'"):
            parse_config(["spectrum", "--config", str(cfg)])
        cfg.write_text("no_timestamp = maybe\n")
        with pytest.raises(UsageError, match="expected a boolean"):
            parse_config(["spectrum", "--config", str(cfg)])

    def test_missing_config_file(self):
        with pytest.raises(UsageError, match="config file not found"):
            parse_config(["spectrum", "--config", "/nonexistent/run.cfg"])

    def test_missing_command(self, capsys):
        with pytest.raises(UsageError, match="missing command"):
            parse_config([])
        capsys.readouterr()

    @pytest.mark.parametrize(
        "argv,message",
        [
            (["spectrum", "--sigma", "-0.1"], "--sigma must be positive and finite"),
            (["spectrum", "--rate", "-0.01"], "--rate must be nonnegative"),
            (["spectrum", "--n", "2"], "--n must be at least 3"),
            (["spectrum", "--x-min", "2", "--x-max", "-2"], "--x-min must be below"),
            (["price", "--strike", "100", "--spot", "100"], "missing required flag --tau"),
            (PRICE_ARGS + ["--payoff", "butterfly"], "--payoff must be one of"),
            (PRICE_ARGS + ["--barrier-high", "120"], "no up-and-out pricer"),
            (
                PRICE_ARGS + ["--payoff", "put", "--barrier-low", "90"],
                "only supported with --payoff call",
            ),
            (
                PRICE_ARGS + ["--barrier-low", "120", "--barrier-high", "90"],
                "--barrier-low must be below --barrier-high",
            ),
            (["verify", "--potential", "cubic:3"], "unknown spec"),
            (["verify", "--potential", "tanh:1"], "expected tanh:A,B"),
            (["verify", "--potential", "table:/nonexistent.txt"], "file not found"),
            (["susy", "--W", "quartic"], "unknown spec"),
            (["susy", "--window", "-4"], "--window must be positive"),
            (["dump", "--operator", "junk"], "--operator must be one of"),
            (["dump", "--operator", "generalized"], "requires --potential"),
        ],
    )
    def test_validation_messages(self, argv, message):
        with pytest.raises(UsageError, match=message):
            parse_config(argv)


class TestExitCodes:
    def test_usage_error_is_2(self, capsys):
        assert main(["price", "--strike", "100", "--spot", "100"]) == 2
        assert capsys.readouterr().err.startswith("usage error:")

    def test_argparse_errors_pass_through(self, capsys):
        assert main(["spectrum", "--bogus"]) == 2
        assert main(["--help"]) == 0
        capsys.readouterr()

    def test_runtime_error_is_1(self, capsys):
        # spot far outside the pricing window is only detectable at run time
        assert main(PRICE_ARGS[:1] + ["--strike", "100", "--spot", "1.0",
                                      "--tau", "0.5", "--n", "50"]) == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_table_length_mismatch_is_1(self, tmp_path, capsys):
        table = tmp_path / "v.txt"
        table.write_text("0.05\n0.05\n0.05\n")
        argv = ["spectrum", "--n", "50", "--potential", f"table:{table}",
                "--no-timestamp"]
        assert main(argv) == 1
        assert "expected 50 values" in capsys.readouterr().err

    def test_success_is_0(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["spectrum", "--n", "60", "--output", str(out),
                     "--no-timestamp"]) == 0
        assert out.exists()


class TestSpectrumArtifact:
    def test_contents_and_audit_header(self, tmp_path):
        out = tmp_path / "spectrum.csv"
        assert main(["spectrum", "--n", "120", "--output", str(out),
                     "--no-timestamp"]) == 0
        comments, rows = _read_csv(out)
        assert comments[0] == "# etabs spectrum"
        config = _comment_json(comments, "config")
        assert config["command"] == "spectrum" and config["n"] == 120
        residuals = _comment_json(comments, "residuals")
        assert residuals["pseudo_hermiticity"] < 1e-12
        assert residuals["degraded"] is False
        assert rows[0] == "index,eigenvalue,eta_norm_residual"
        data = np.array([r.split(",") for r in rows[1:]], dtype=float)
        assert data.shape == (120, 3)
        assert np.all(np.diff(data[:, 1]) >= 0)
        assert data[:, 2].max() < 1e-12

    def test_byte_determinism(self, tmp_path):
        # the audit header embeds the resolved config, output path included,
        # so determinism is per fixed config: rerun onto the same path
        out = tmp_path / "s.csv"
        argv = ["spectrum", "--n", "80", "--no-timestamp", "--output", str(out)]
        assert main(argv) == 0
        first = out.read_bytes()
        assert main(argv) == 0
        assert out.read_bytes() == first

    def test_timestamp_present_by_default(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["spectrum", "--n", "40", "--output", str(out)]) == 0
        comments, _ = _read_csv(out)
        assert any(c.startswith("# timestamp: ") and c.endswith("Z") for c in comments)


class TestKernelArtifact:
    def test_row_integrates_to_discount_factor(self, tmp_path):
        out = tmp_path / "kernel.csv"
        assert main(["kernel", "--n", "150", "--tau", "0.5", "--output", str(out),
                     "--no-timestamp"]) == 0
        comments, rows = _read_csv(out)
        extra_x = _comment_json(comments, "node_x")
        assert abs(extra_x) < 0.02
        assert isinstance(_comment_json(comments, "node_index"), int)
        assert rows[0] == "x_prime,density"
        data = np.array([r.split(",") for r in rows[1:]], dtype=float)
        assert data.shape == (150, 2)
        dx = 4.0 / 151
        total = data[:, 1].sum() * dx
        assert total == pytest.approx(math.exp(-0.05 * 0.5), rel=1e-2)


class TestPriceArtifacts:
    def test_json_price_against_closed_form(self, tmp_path):
        out = tmp_path / "price.json"
        assert main(PRICE_ARGS + ["--n", "200", "--output", str(out),
                                  "--no-timestamp"]) == 0
        doc = json.loads(out.read_text())
        oracle = closed_form_call(100.0, 100.0, MarketParams(sigma=0.2, r=0.05), 0.5)
        assert doc["price"] == pytest.approx(oracle, rel=1e-2)
        assert doc["params"]["payoff"] == "call"
        assert doc["residuals"]["pseudo_hermiticity"] < 1e-12
        assert doc["degraded"] is False
        assert doc["config"]["command"] == "price"
        assert "timestamp" not in doc

    def test_timestamp_key_by_default(self, tmp_path):
        out = tmp_path / "price.json"
        assert main(PRICE_ARGS + ["--n", "100", "--output", str(out)]) == 0
        assert "timestamp" in json.loads(out.read_text())

    @pytest.mark.parametrize("payoff,oracle", [
        ("put", closed_form_put(100.0, 100.0, MarketParams(sigma=0.2, r=0.05), 0.5)),
        ("digital", 0.52884718313163204),
    ])
    def test_other_payoffs(self, tmp_path, payoff, oracle):
        out = tmp_path / "price.json"
        assert main(PRICE_ARGS + ["--payoff", payoff, "--n", "300",
                                  "--output", str(out), "--no-timestamp"]) == 0
        assert json.loads(out.read_text())["price"] == pytest.approx(oracle, rel=2e-2)

    def test_surface_artifact(self, tmp_path):
        out = tmp_path / "price.json"
        surf = tmp_path / "surface.csv"
        assert main(PRICE_ARGS + ["--n", "200", "--output", str(out),
                                  "--surface", str(surf), "--no-timestamp"]) == 0
        comments, rows = _read_csv(surf)
        assert rows[0] == "x,S,C"
        data = np.array([r.split(",") for r in rows[1:]], dtype=float)
        assert data.shape == (200, 3)
        assert np.all(np.diff(data[:, 1]) > 0)
        near = np.argmin(np.abs(data[:, 1] - 100.0))
        oracle = closed_form_call(
            float(data[near, 1]), 100.0, MarketParams(sigma=0.2, r=0.05), 0.5
        )
        assert data[near, 2] == pytest.approx(oracle, rel=1e-2)

    def test_barrier_price_matches_library_pricer(self, tmp_path):
        params = MarketParams(sigma=0.2, r=0.05)
        window = centered_window(math.log(100.0), 0.2, 0.5, 6.0, 300)
        out = tmp_path / "price.json"
        assert main(PRICE_ARGS + ["--n", "300", "--barrier-low", "90",
                                  "--output", str(out), "--no-timestamp"]) == 0
        doc = json.loads(out.read_text())
        direct = price_barrier_down_and_out(params, 100.0, 90.0, 0.5, window)
        assert doc["price"] == pytest.approx(direct.value_at(100.0), rel=1e-12)
        assert doc["n"] == direct.lattice.n

    def test_double_barrier_matches_library_pricer(self, tmp_path):
        params = MarketParams(sigma=0.2, r=0.05)
        window = centered_window(math.log(100.0), 0.2, 0.5, 6.0, 300)
        out = tmp_path / "price.json"
        assert main(PRICE_ARGS + ["--n", "300", "--barrier-low", "90",
                                  "--barrier-high", "115", "--output", str(out),
                                  "--no-timestamp"]) == 0
        direct = price_double_knock_out(params, 100.0, 90.0, 115.0, 0.5, window)
        doc = json.loads(out.read_text())
        assert doc["price"] == pytest.approx(direct.value_at(100.0), rel=1e-12)


class TestSusyArtifacts:
    def test_stdout_layout(self, capsys):
        assert main(["susy", "--n", "120", "--no-timestamp"]) == 0
        out = capsys.readouterr().out
        json_part, csv_part = out.split("\n\n", 1)
        doc = json.loads(json_part)
        assert doc["classical_susy"] is False
        assert doc["pairing_max_diff"] < 1e-8
        assert doc["n"] == 120
        lines = csv_part.splitlines()
        assert lines[0] == "# etabs susy"
        header_at = next(i for i, l in enumerate(lines) if not l.startswith("#"))
        assert lines[header_at] == "index,eigenvalue_eff,eigenvalue_partner"
        assert len(lines) - header_at - 1 == 120

    def test_hermitian_rate_reports_classical(self, capsys):
        assert main(["susy", "--n", "80", "--rate", "0.02", "--no-timestamp"]) == 0
        doc = json.loads(capsys.readouterr().out.split("\n\n", 1)[0])
        assert doc["classical_susy"] is True

    def test_output_writes_sibling_spectra(self, tmp_path):
        out = tmp_path / "report.json"
        assert main(["susy", "--n", "60", "--output", str(out),
                     "--no-timestamp"]) == 0
        doc = json.loads(out.read_text())
        assert doc["config"]["command"] == "susy"
        sibling = tmp_path / "report-spectra.csv"
        comments, rows = _read_csv(sibling)
        assert rows[0] == "index,eigenvalue_eff,eigenvalue_partner"
        assert len(rows) - 1 == 60

    def test_explicit_spectra_path(self, tmp_path, capsys):
        spectra = tmp_path / "pairs.csv"
        assert main(["susy", "--n", "60", "--spectra", str(spectra),
                     "--no-timestamp"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert "pairing_max_diff" in doc
        assert spectra.exists()

    def test_linear_W_reports_zero_mode(self, capsys):
        assert main(["susy", "--n", "200", "--W", "linear:1", "--window", "6",
                     "--no-timestamp"]) == 0
        doc = json.loads(capsys.readouterr().out.split("\n\n", 1)[0])
        assert len(doc["near_zero_eff"]) == 1
        assert len(doc["near_zero_partner"]) == 1

    def test_W_table_file(self, tmp_path, capsys):
        n = 60
        lat_points = np.linspace(-12.0, 12.0, n + 2)[1:-1]
        table = tmp_path / "w.txt"
        np.savetxt(table, np.tanh(lat_points))
        assert main(["susy", "--n", str(n), "--W", f"table:{table}",
                     "--no-timestamp"]) == 0
        doc = json.loads(capsys.readouterr().out.split("\n\n", 1)[0])
        assert doc["derivative"] == "centered"

    def test_W_table_wrong_length_is_runtime_error(self, tmp_path, capsys):
        table = tmp_path / "w.txt"
        np.savetxt(table, np.ones(7))
        assert main(["susy", "--n", "60", "--W", f"table:{table}",
                     "--no-timestamp"]) == 1
        assert "expected 60 rows" in capsys.readouterr().err


class TestDumpArtifact:
    def test_round_trip_is_bitwise(self, tmp_path):
        out = tmp_path / "op.json"
        assert main(["dump", "--operator", "bs", "--n", "40",
                     "--output", str(out)]) == 0
        H = operator_from_dict(json.loads(out.read_text()))
        params = MarketParams(sigma=0.2, r=0.05)
        from etabs import make_lattice

        ref = build_H_BS(params, make_lattice(-2.0, 2.0, 40))
        np.testing.assert_array_equal(H.diag, ref.diag)
        np.testing.assert_array_equal(H.upper, ref.upper)
        np.testing.assert_array_equal(H.lower, ref.lower)

    def test_with_eta_matches_recurrence(self, tmp_path):
        out = tmp_path / "op.json"
        assert main(["dump", "--operator", "bs", "--n", "40", "--with-eta",
                     "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        H = operator_from_dict(doc)
        np.testing.assert_array_equal(
            np.array(doc["eta"]), detailed_balance_metric(H).eta
        )

    def test_symmetric_partner_dump(self, tmp_path):
        out = tmp_path / "op.json"
        assert main(["dump", "--operator", "h-bs", "--n", "30",
                     "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["upper"] == doc["lower"]

    def test_effective_requires_potential_else_runs(self, tmp_path):
        out = tmp_path / "op.json"
        assert main(["dump", "--operator", "effective", "--n", "30",
                     "--potential", "constant:0.03", "--output", str(out)]) == 0
        H = operator_from_dict(json.loads(out.read_text()))
        params = MarketParams(sigma=0.2, r=0.05)
        ref = build_H_BS(params, H.lattice)
        np.testing.assert_array_equal(H.diag, ref.diag + 0.03)


class TestVerifyOutput:
    def test_table_rows_and_no_color(self, capsys, monkeypatch):
        monkeypatch.setenv("ETABS_NO_COLOR", "1")
        assert main(["verify", "--n", "200"]) == 0
        out = capsys.readouterr().out
        assert "\x1b[" not in out
        lines = out.splitlines()
        assert lines[0].startswith("operator")
        body = "\n".join(lines[1:])
        assert "H_BS" in body and "recurrence" in body and "continuum" in body
        assert "h_BS" in body and "symmetry" in body
        recurrence_rows = [l for l in lines[1:] if "recurrence" in l]
        assert all(l.rstrip().endswith("ok") for l in recurrence_rows)
        continuum_rows = [l for l in lines[1:] if "continuum" in l]
        assert all(l.rstrip().endswith("-") for l in continuum_rows)

    def test_potential_adds_generalized_and_effective_rows(self, capsys, monkeypatch):
        monkeypatch.setenv("ETABS_NO_COLOR", "1")
        assert main(["verify", "--n", "150", "--potential", "constant:0.04"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 8
        assert any(l.startswith("H_gen") for l in lines)
        assert any(l.startswith("H_eff") for l in lines)

    def test_forced_color_emits_ansi(self, capsys, monkeypatch):
        import etabs.cli as cli

        monkeypatch.setattr(cli, "_use_color", lambda: True)
        assert main(["verify", "--n", "100"]) == 0
        assert "\x1b[" in capsys.readouterr().out


class TestConsoleScript:
    def test_installed_entry_point(self, tmp_path):
        exe = shutil.which("etabs")
        assert exe is not None, "console script not installed"
        out = tmp_path / "s.csv"
        result = subprocess.run(
            [exe, "spectrum", "--n", "50", "--no-timestamp", "--output", str(out)],
            capture_output=True, text=True, timeout=120,
        )
        assert result.returncode == 0, result.stderr
        assert out.read_text().startswith("# etabs spectrum")
