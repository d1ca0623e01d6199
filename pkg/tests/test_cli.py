"""
End-to-end tests of the gzk-lab commands on small grids.

Exit codes: 0 success, 1 failed assertion or blow-up, 2 configuration or usage error.
"""

import json

import pytest

from gzk_lab import integrator
from gzk_lab.cli import main
from gzk_lab.errors import BlowUpError
from gzk_lab.persistence import load_manifest, read_table, table_footer

SMALL_RUN = """
[grid]
n_x = 32
n_y = 32
L_x = 25.132741228718345
L_y = 25.132741228718345

[integrator]
dt = 0.001
t_end = 0.02
diag_stride = 5
checkpoint_stride = 10

[gevrey]
sigma_list = 0.01, 0.1

[initial_data]
kind = gaussian
amplitude = 0.5
width = 2.0
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(SMALL_RUN)
    return path


def _run(config_file, out, *args):
    return main([*args, "--config", str(config_file), "--out", str(out)])


class TestUsage:
    def test_missing_command(self):
        assert main([]) == 2

    def test_unknown_command(self):
        assert main(["integrate"]) == 2

    def test_unknown_probe(self):
        assert main(["probe", "quadrilinear"]) == 2

    def test_invalid_config(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[equation]\nk = 3\n")
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
        assert not (tmp_path / "o").exists()


class TestSimulate:
    def test_outputs_and_manifest(self, config_file, tmp_path):
        out = tmp_path / "sim"
        assert _run(config_file, out, "simulate") == 0
        manifest = load_manifest(out / "manifest.json")
        assert manifest.status == "complete"
        assert manifest.files[0] == "config.ini"
        assert manifest.files[-1] == "manifest.json"
        assert {
            "diagnostics.csv",
            "radius.csv",
            "summary.json",
            "checkpoints/u_t0.000000.csv",
            "checkpoints/u_t0.000000.json",
            "checkpoints/u_t0.020000.csv",
        } <= set(manifest.files)

        tag, diagnostics = read_table(out / "diagnostics.csv")
        assert tag == "gzk-lab/diagnostics/v1"
        assert list(diagnostics["t"]) == pytest.approx([0.0, 0.005, 0.01, 0.015, 0.02])
        assert "M_sigma@0.1" in diagnostics.columns
        assert "G@0.01/0" in diagnostics.columns

        summary = json.loads((out / "summary.json").read_text())
        assert summary["status"] == "complete"
        assert summary["steps"] == 20
        assert summary["mass_drift"] < 1e-6

    def test_existing_output_needs_force(self, config_file, tmp_path):
        out = tmp_path / "sim"
        assert _run(config_file, out, "simulate") == 0
        assert _run(config_file, out, "simulate") == 2
        assert _run(config_file, out, "simulate", "--force") == 0

    def test_config_copy_reproduces_run(self, config_file, tmp_path):
        out = tmp_path / "sim"
        assert _run(config_file, out, "simulate") == 0
        again = tmp_path / "again"
        assert _run(out / "config.ini", again, "simulate") == 0
        first = load_manifest(out / "manifest.json")
        second = load_manifest(again / "manifest.json")
        assert first.config_hash != second.config_hash  # output_dir differs
        _, a = read_table(out / "diagnostics.csv")
        _, b = read_table(again / "diagnostics.csv")
        assert a.equals(b)

    def test_dt_guard_is_a_usage_error(self, tmp_path):
        path = tmp_path / "fast.ini"
        path.write_text(SMALL_RUN.replace("dt = 0.001", "dt = 50.0").replace("0.02", "100"))
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_blow_up_keeps_partial_outputs(self, config_file, tmp_path, monkeypatch):
        real_step = integrator.step_ifrk4
        calls = []

        def failing_step(F, spec, dt):
            calls.append(F.time_tag)
            if len(calls) > 7:
                raise BlowUpError("non-finite stage", F.time_tag, F)
            return real_step(F, spec, dt)

        monkeypatch.setattr(integrator, "step_ifrk4", failing_step)
        out = tmp_path / "sim"
        assert _run(config_file, out, "simulate") == 1
        manifest = load_manifest(out / "manifest.json")
        assert manifest.status == "blow_up"
        assert manifest.notes
        _, diagnostics = read_table(out / "diagnostics.csv")
        assert list(diagnostics["t"]) == pytest.approx([0.0, 0.005])
        summary = json.loads((out / "summary.json").read_text())
        assert summary["status"] == "blow_up"

    def test_soliton_summary(self, tmp_path):
        path = tmp_path / "soliton.ini"
        path.write_text(
            "[equation]\nform = original\n"
            "[grid]\nn_x = 256\nn_y = 8\nL_x = 100.53096491487338\nL_y = 100.53096491487338\n"
            "[integrator]\ndt = 0.001\nt_end = 0.05\ndiag_stride = 25\n"
            "[gevrey]\ntrack_radius = false\n"
            "[initial_data]\nkind = soliton\nK = 0.5\n"
        )
        out = tmp_path / "sol"
        assert main(["simulate", "--config", str(path), "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["soliton_shape_error"] < 1e-5
        assert not (out / "radius.csv").exists()


class TestRadiusTrack:
    def test_outputs(self, tmp_path):
        config_file = tmp_path / "track.ini"
        config_file.write_text(SMALL_RUN + "\n[ledger]\nd = 2\n")
        out = tmp_path / "track"
        assert _run(config_file, out, "radius-track") == 0
        tag, table = read_table(out / "radius_track.csv")
        assert tag == "gzk-lab/radius-track/v1"
        assert list(table.columns) == [
            "T",
            "sigma_hat",
            "floor_hit",
            "bound_zk",
            "bound_mzk",
            "ledger_sigma_star",
            "ledger_sigma",
        ]
        assert list(table["T"]) == pytest.approx([0.005, 0.01, 0.015, 0.02])
        footer = table_footer(out / "radius_track.csv")
        assert footer[0].startswith("sigma0: ")
        assert footer[1].startswith("fit: ")
        ledger = json.loads((out / "ledger.json").read_text())
        assert ledger["kind"] == "zk"
        assert [T for T, _ in ledger["sigma_schedule"]] == [2.0, 4.0, 8.0, 16.0, 32.0]


class TestProbe:
    def test_scalar(self, tmp_path):
        path = tmp_path / "probe.ini"
        path.write_text("[probes]\nsamples = 5000\nsigma_list = 0.001, 0.1\n")
        out = tmp_path / "probe"
        assert main(["probe", "scalar", "--config", str(path), "--out", str(out)]) == 0
        report = json.loads((out / "probe_exp_minus_one_alpha0.75.json").read_text())
        assert report["violation_count"] == 0
        assert report["passed"] is True
        assert "ratios" not in report
        assert (out / "probe_min_exp_sigma0.1_ratios.csv").exists()
        assert load_manifest(out / "manifest.json").status == "complete"

    def test_kernel_with_seed(self, tmp_path):
        path = tmp_path / "probe.ini"
        path.write_text("[probes]\nsamples = 5000\n")
        out = tmp_path / "probe"
        code = main(
            ["probe", "kernel", "--config", str(path), "--out", str(out), "--seed", "11"]
        )
        assert code == 0
        report = json.loads((out / "probe_kernel.json").read_text())
        assert report["params"]["seed"] == 11

    def test_domain_error_before_output(self, tmp_path):
        out = tmp_path / "probe"
        assert main(["probe", "trilinear", "--out", str(out)]) == 2
        assert not out.exists()


class TestSweep:
    def test_inline_sweep(self, config_file, tmp_path):
        out = tmp_path / "sweep"
        code = _run(
            config_file,
            out,
            "sweep",
            "--axis",
            "integrator.dt",
            "--values",
            "0.001,0.002",
            "--workers",
            "1",
        )
        assert code == 0
        _, aggregate = read_table(out / "aggregate.csv")
        assert list(aggregate["integrator.dt"]) == pytest.approx([0.001, 0.002])
        assert set(aggregate["status"]) == {"complete"}
        assert "mass" in aggregate.columns
        for value in ("0.001", "0.002"):
            point = load_manifest(out / f"integrator.dt={value}" / "manifest.json")
            assert point.status == "complete"
        summary = json.loads((out / "sweep_summary.json").read_text())
        assert summary["completed"] == ["0.001", "0.002"]
        assert summary["failures"] == []

    def test_bad_value_is_recorded(self, config_file, tmp_path):
        out = tmp_path / "sweep"
        code = _run(
            config_file, out, "sweep", "--axis", "equation.k", "--values", "1,3", "--workers", "1"
        )
        assert code == 1
        summary = json.loads((out / "sweep_summary.json").read_text())
        assert summary["completed"] == ["1"]
        assert summary["failures"][0]["value"] == "3"
        assert summary["failures"][0]["exit_code"] == 2
        assert table_footer(out / "aggregate.csv")[0].startswith("failed: equation.k=3")

    def test_repeated_values_are_rejected(self, config_file, tmp_path):
        out = tmp_path / "sweep"
        code = _run(
            config_file,
            out,
            "sweep",
            "--axis",
            "integrator.dt",
            "--values",
            "0.001,0.002,0.001",
            "--workers",
            "1",
        )
        assert code == 2
        assert not out.exists()

    def test_unknown_axis(self, config_file, tmp_path):
        out = tmp_path / "sweep"
        assert _run(config_file, out, "sweep", "--axis", "grid.n_z", "--values", "1") == 2
        assert not out.exists()

    @pytest.mark.slow
    def test_process_pool(self, config_file, tmp_path):
        out = tmp_path / "sweep"
        code = _run(
            config_file,
            out,
            "sweep",
            "--axis",
            "initial_data.amplitude",
            "--values",
            "0.1,0.2,0.3",
            "--workers",
            "2",
        )
        assert code == 0
        _, aggregate = read_table(out / "aggregate.csv")
        assert len(aggregate) == 3
