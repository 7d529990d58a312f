"""End-to-end tests for the benchmark pipeline and its CLI."""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from beambench import __version__
from beambench.cli import main
from beambench.config import SetupConfig
from beambench.errors import MissingRun, ParseError, PipelineError
from beambench.forward import load_leadfield
from beambench.metrics import load_summary_csv
from beambench.pipeline import export_leadfield, report, run

SMALL = dict(
    sources=(2, 1, 3),
    n_electrodes=24,
    n_samples=600,
    n_realizations=2,
    order_interest=3,
    order_background=3,
    pdc_resolution=33,
    seed=777,
)

GOLDEN = Path(__file__).parent / "data" / "golden_report.txt"


def small_config(**overrides) -> SetupConfig:
    merged = {**SMALL, **overrides}
    return SetupConfig(**merged)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("bench") / "run"
    return run(small_config(), out_dir=out)


class TestRunOutputs:
    def test_expected_files_exist(self, run_dir):
        for name in ("geometry.csv", "results.csv", "summary.csv", "manifest.json"):
            assert (run_dir / name).exists()

    def test_results_csv_is_complete(self, run_dir):
        lines = (run_dir / "results.csv").read_text().splitlines()
        assert lines[0] == "filter,realization,measure,value"
        # 15 filters x 2 realizations x (2 scalar + 2 per-source + 3 model) measures
        assert len(lines) == 1 + 15 * 2 * 7

    def test_summary_covers_every_filter(self, run_dir):
        summary = load_summary_csv(run_dir / "summary.csv")
        assert len({row.filter_name for row in summary}) == 15

    def test_geometry_csv_lists_every_source(self, run_dir):
        lines = (run_dir / "geometry.csv").read_text().splitlines()
        assert len(lines) == 1 + 6  # header plus 2 + 1 + 3 sources

    def test_manifest_contents(self, run_dir):
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["tool"] == "beambench"
        assert manifest["version"] == __version__
        assert manifest["root_seed"] == 777
        assert manifest["config"]["SRCS"] == [2, 1, 3]
        assert manifest["config"]["K00"] == 2
        assert manifest["streams"]["geometry"]["spawn_key"] == [0]
        assert manifest["streams"]["realizations"]["children"] == [
            "signals",
            "perturbation",
            "noise",
            "filters",
        ]
        assert manifest["outputs"] == [
            "geometry.csv",
            "results.csv",
            "summary.csv",
            "manifest.json",
        ]
        assert manifest["unsupported_keys"] == sorted(manifest["unsupported_keys"])

    def test_report_renders_the_bank(self, run_dir):
        text = report(run_dir)
        assert text.splitlines()[0].startswith("filter")
        assert "LCMV_R" in text
        assert "RANDN" in text

    def test_beamformers_beat_the_random_baseline(self, run_dir):
        summary = load_summary_csv(run_dir / "summary.csv")

        def mean_corr(name):
            return next(
                row.mean
                for row in summary
                if row.filter_name == name and row.measure == "signal_corr"
            )

        assert mean_corr("LCMV_R") > mean_corr("RANDN") + 0.2


class TestDeterminism:
    def test_same_seed_same_bytes(self, run_dir, tmp_path):
        again = run(small_config(), out_dir=tmp_path / "again")
        for name in ("geometry.csv", "results.csv", "summary.csv"):
            assert (again / name).read_bytes() == (run_dir / name).read_bytes()

    def test_thread_count_does_not_change_bytes(self, run_dir, tmp_path):
        threaded = run(small_config(), out_dir=tmp_path / "threaded", jobs=3)
        for name in ("results.csv", "summary.csv"):
            assert (threaded / name).read_bytes() == (run_dir / name).read_bytes()

    def test_different_seed_changes_results(self, run_dir, tmp_path):
        other = run(small_config(seed=778), out_dir=tmp_path / "other")
        assert (
            other / "results.csv"
        ).read_bytes() != (run_dir / "results.csv").read_bytes()


class TestFilterSelectionAndDumps:
    def test_single_filter_run(self, tmp_path):
        out = run(
            small_config(filters=("ZF",), n_realizations=1),
            out_dir=tmp_path / "zf",
        )
        summary = load_summary_csv(out / "summary.csv")
        assert {row.filter_name for row in summary} == {"ZF"}

    def test_first_realization_weights_are_dumped(self, tmp_path):
        out = run(
            small_config(
                filters=("LCMV_R", "MVP_F_2"),
                mvp_rank=1,
                dump_filters=True,
                n_realizations=1,
            ),
            out_dir=tmp_path / "dump",
        )
        weights = load_leadfield(out / "filters" / "LCMV_R.csv")
        assert weights.shape == (2, 24)
        reduced = load_leadfield(out / "filters" / "MVP_F_2_r1.csv")
        assert np.linalg.matrix_rank(reduced, tol=1e-10) == 1

    def test_no_dump_directory_by_default(self, run_dir):
        assert not (run_dir / "filters").exists()


class TestGoldenReport:
    def test_report_matches_frozen_output(self, run_dir):
        assert report(run_dir) + "\n" == GOLDEN.read_text()


class TestExportLeadfield:
    def test_shape_and_determinism(self, tmp_path):
        config = small_config()
        first = export_leadfield(config, tmp_path / "lf.csv")
        matrix = load_leadfield(first)
        assert matrix.shape == (24, 6)
        second = export_leadfield(config, tmp_path / "lf2.csv")
        assert first.read_bytes() == second.read_bytes()

    def test_average_reference_holds(self, tmp_path):
        matrix = load_leadfield(export_leadfield(small_config(), tmp_path / "lf.csv"))
        assert np.max(np.abs(matrix.mean(axis=0))) <= 1e-12 * np.max(np.abs(matrix))


class TestFailureModes:
    def test_missing_run_directory(self, tmp_path):
        with pytest.raises(MissingRun, match="summary.csv"):
            report(tmp_path)

    def test_corrupted_summary(self, tmp_path):
        (tmp_path / "summary.csv").write_text("not,a,summary\n")
        with pytest.raises(ParseError):
            report(tmp_path)

    def test_stage_is_named_on_failure(self, tmp_path):
        hopeless = small_config(
            coeff_range=(0.89, 0.9), stab_limit=0.05, iter_limit=1
        )
        with pytest.raises(PipelineError, match="realization 1, stage signals"):
            run(hopeless, out_dir=tmp_path / "never")

    def test_bad_jobs_count(self, tmp_path):
        with pytest.raises(ValueError, match="jobs"):
            run(small_config(), out_dir=tmp_path / "never", jobs=0)


CLI_CONFIG = """\
SRCS = 2 1 2
M00 = 16
n00 = 400
K00 = 1
P00 = 3
R00 = 3
PDC_RES = 17
SEED = 11
FILTERS = ZF, RANDN
"""


@pytest.fixture()
def cli_config(tmp_path) -> Path:
    path = tmp_path / "setup.cfg"
    path.write_text(CLI_CONFIG)
    return path


class TestCli:
    def test_run_prints_location_and_table(self, cli_config, tmp_path, capsys):
        out = tmp_path / "cli_run"
        assert main(["run", "--config", str(cli_config), "--out", str(out)]) == 0
        captured = capsys.readouterr()
        assert f"run written to {out}" in captured.out
        assert "filter" in captured.out
        assert (out / "summary.csv").exists()

    def test_seed_override_lands_in_manifest(self, cli_config, tmp_path):
        out = tmp_path / "cli_seeded"
        assert (
            main(
                ["run", "--config", str(cli_config), "--out", str(out), "--seed", "42"]
            )
            == 0
        )
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["root_seed"] == 42

    def test_filter_override(self, cli_config, tmp_path):
        out = tmp_path / "cli_filtered"
        assert (
            main(
                [
                    "run",
                    "--config",
                    str(cli_config),
                    "--out",
                    str(out),
                    "--filters",
                    "RANDN",
                ]
            )
            == 0
        )
        summary = load_summary_csv(out / "summary.csv")
        assert {row.filter_name for row in summary} == {"RANDN"}

    def test_report_subcommand(self, cli_config, tmp_path, capsys):
        out = tmp_path / "cli_report"
        main(["run", "--config", str(cli_config), "--out", str(out)])
        capsys.readouterr()
        assert main(["report", str(out)]) == 0
        assert "ZF" in capsys.readouterr().out

    def test_export_leadfield_subcommand(self, cli_config, tmp_path, capsys):
        target = tmp_path / "lf.csv"
        assert (
            main(
                ["export-leadfield", "--config", str(cli_config), "--out", str(target)]
            )
            == 0
        )
        assert "lead-field written to" in capsys.readouterr().out
        assert load_leadfield(target).shape == (16, 5)

    def test_unknown_filter_fails_cleanly(self, tmp_path, capsys):
        assert main(["run", "--out", str(tmp_path / "x"), "--filters", "BOGUS"]) == 1
        assert "unknown filter" in capsys.readouterr().err

    def test_bad_jobs_fails_cleanly(self, tmp_path, capsys):
        assert main(["run", "--out", str(tmp_path / "x"), "--jobs", "0"]) == 1
        assert "--jobs" in capsys.readouterr().err

    def test_missing_run_dir_fails_cleanly(self, tmp_path, capsys):
        assert main(["report", str(tmp_path / "nowhere")]) == 1
        assert "error:" in capsys.readouterr().err
