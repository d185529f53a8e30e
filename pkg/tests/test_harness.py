"""Study configuration, report determinism, runners, and the CLI."""

import json

import numpy as np
import pytest

from gtlab.comparison import asymptotic_gap
from gtlab.harness import (
    ANCHORS,
    DEFAULT_TOLERANCES,
    KINDS,
    StudyConfig,
    main,
    report_payload,
    run_study,
)


class TestStudyConfig:
    def test_minimal_mapping(self):
        config = StudyConfig.from_mapping({"kind": "gap", "eps": [0.01, 0.005]})
        assert config.kind == "gap"
        assert config.eps == (0.01, 0.005)
        assert config.grid_ks() == (8, 8)
        assert config.tolerances == DEFAULT_TOLERANCES["gap"]

    def test_round_trip_through_mapping(self):
        config = StudyConfig.from_mapping(
            {
                "kind": "ch-disk",
                "eps": [0.08, 0.04],
                "grid_k": [4, 8],
                "radius": 0.3,
                "center": [0.4, 0.6],
                "mass": -0.5,
                "tolerances": {"ratio_last": 0.02},
            }
        )
        again = StudyConfig.from_mapping(config.to_mapping())
        assert again == config

    def test_unknown_keys_are_named(self):
        with pytest.raises(ValueError, match="espilon, wells"):
            StudyConfig.from_mapping(
                {"kind": "gap", "eps": [0.01], "wells": 2, "espilon": 0.1}
            )

    def test_required_keys(self):
        with pytest.raises(ValueError, match="kind"):
            StudyConfig.from_mapping({"eps": [0.01]})
        with pytest.raises(ValueError, match="eps"):
            StudyConfig.from_mapping({"kind": "gap"})

    def test_unknown_kind_lists_options(self):
        with pytest.raises(ValueError, match="profile"):
            StudyConfig(kind="torus", eps=(0.01,))

    def test_eps_validation(self):
        with pytest.raises(ValueError, match="empty"):
            StudyConfig(kind="gap", eps=())
        with pytest.raises(ValueError, match="positive"):
            StudyConfig(kind="gap", eps=(0.01, -0.005))
        with pytest.raises(ValueError, match="decreasing"):
            StudyConfig(kind="gap", eps=(0.005, 0.01))
        with pytest.raises(ValueError, match="decreasing"):
            StudyConfig(kind="gap", eps=(0.01, 0.01))

    def test_scalar_eps_in_mapping(self):
        config = StudyConfig.from_mapping({"kind": "gap", "eps": 0.01})
        assert config.eps == (0.01,)

    def test_grid_k_broadcast_and_per_eps(self):
        one = StudyConfig(kind="gap", eps=(0.01, 0.005), grid_k=16)
        assert one.grid_ks() == (16, 16)
        two = StudyConfig(kind="gap", eps=(0.01, 0.005), grid_k=(8, 16))
        assert two.grid_ks() == (8, 16)

    def test_grid_k_validation(self):
        with pytest.raises(ValueError, match="match the eps list"):
            StudyConfig(kind="gap", eps=(0.01,), grid_k=(8, 16))
        with pytest.raises(ValueError, match=">= 4"):
            StudyConfig(kind="gap", eps=(0.01,), grid_k=3)
        with pytest.raises(ValueError, match=">= 4"):
            StudyConfig(kind="gap", eps=(0.01, 0.005), grid_k=(8, 4.5))

    def test_geometry_validation(self):
        with pytest.raises(ValueError, match="radius"):
            StudyConfig(kind="ch-disk", eps=(0.04,), radius=0.0)
        with pytest.raises(ValueError, match="center"):
            StudyConfig(kind="ch-disk", eps=(0.04,), center=(0.5,))
        with pytest.raises(ValueError, match="well_scale"):
            StudyConfig(kind="gap", eps=(0.01,), well_scale=-1.0)
        with pytest.raises(ValueError, match="mass"):
            StudyConfig(kind="ch-disk", eps=(0.04,), mass=np.nan)

    def test_tolerance_merge_and_unknown_key(self):
        config = StudyConfig(
            kind="ch-disk", eps=(0.04,), tolerances={"ratio_last": 0.01}
        )
        assert config.tolerances["ratio_last"] == 0.01
        assert config.tolerances["ratio_first"] == 0.15
        with pytest.raises(ValueError, match="windw_low"):
            StudyConfig(kind="gap", eps=(0.01,), tolerances={"windw_low": 0.1})

    def test_every_kind_has_defaults(self):
        for kind in KINDS:
            assert kind in DEFAULT_TOLERANCES
            assert kind in ANCHORS


class TestGapStudy:
    def test_matches_direct_evaluation(self, well, profile_table):
        config = StudyConfig(kind="gap", eps=(0.01, 0.005))
        report = run_study(config)
        rows = asymptotic_gap(well, profile_table, 1.0, [0.01, 0.005])
        for row, (_, upper, lower) in zip(report.rows, rows):
            assert row.metrics["upper_gap"] == pytest.approx(upper, rel=1e-12)
            assert row.metrics["lower_gap"] == pytest.approx(lower, rel=1e-12)
        assert report.passed

    def test_orders_reported_not_asserted(self):
        report = run_study(StudyConfig(kind="gap", eps=(0.01, 0.005, 0.0025)))
        assert set(report.orders) == {"upper_gap_error", "lower_gap_error"}
        assert len(report.orders["upper_gap_error"]) == 2
        # the gap errors shrink roughly linearly in eps
        for order in report.orders["upper_gap_error"]:
            assert 0.5 < order < 1.5

    def test_window_failure_fails_study(self):
        report = run_study(StudyConfig(kind="gap", eps=(0.3, 0.2)))
        assert not report.passed
        assert not report.rows[0].checks["window_within"]


class TestProfileStudy:
    def test_all_checks_pass(self):
        report = run_study(StudyConfig(kind="profile", eps=(0.02,)))
        row = report.rows[0]
        assert report.passed
        assert row.metrics["sigma_error"] <= 1e-10
        assert row.metrics["profile_residual"] <= 1e-8
        assert row.metrics["tanh_gap"] <= 1e-7
        assert row.metrics["tail_error"] <= 1e-6
        assert row.metrics["equipartition"] <= 1e-8

    def test_writes_table_artifact(self, tmp_path):
        out = tmp_path / "profile"
        report = run_study(
            StudyConfig(kind="profile", eps=(0.02,), out_dir=str(out))
        )
        assert report.passed
        assert (out / "profile-table.dat").is_file()
        assert (out / "report.json").is_file()


class TestMultiplicityStudy:
    def test_counts_exact_at_coarse_eps(self):
        report = run_study(StudyConfig(kind="multiplicity", eps=(0.02,)))
        row = report.rows[0]
        assert report.passed
        assert round(row.metrics["est_1"]) == 1
        assert round(row.metrics["est_2"]) == 2
        assert round(row.metrics["est_3"]) == 3


class TestOneDimensionalSolves:
    def test_ch_planar_energy(self):
        report = run_study(StudyConfig(kind="ch-planar", eps=(0.02,)))
        row = report.rows[0]
        assert report.passed
        assert row.checks["solver_converged"]
        assert row.metrics["energy_error"] <= 1e-3
        assert abs(row.metrics["lambda"]) <= 1e-10

    def test_ok_lamellar_flat_balance(self):
        report = run_study(StudyConfig(kind="ok-lamellar", eps=(0.01,)))
        row = report.rows[0]
        assert report.passed
        assert row.metrics["n_crossings"] == 2
        assert row.metrics["flat_sup"] <= 1e-10


class TestFailureRecording:
    def test_bad_force_is_recorded_and_fails(self):
        config = StudyConfig(kind="subsolution", eps=(0.02,), grid_k=24, force=-1.0)
        report = run_study(config)
        row = report.rows[0]
        assert row.error is not None
        assert "positive" in row.error
        assert row.metrics == {}
        assert not report.passed

    def test_sweep_continues_past_failure(self):
        # margin 10*eps at eps=0.08 swallows the whole unit square, so the
        # bulk check cannot run there; the smaller eps still completes
        config = StudyConfig(kind="gt-check", eps=(0.08, 0.04), grid_k=4)
        report = run_study(config)
        assert report.rows[0].error is not None
        assert report.rows[1].error is None
        assert not report.passed


class TestReportPayload:
    def test_excludes_output_location(self, tmp_path):
        config = StudyConfig(
            kind="gap", eps=(0.01,), out_dir=str(tmp_path / "a")
        )
        payload = report_payload(run_study(config))
        assert "out_dir" not in json.dumps(payload)

    def test_anchor_strings_cover_metrics(self):
        for kind, eps in (("gap", (0.01,)), ("multiplicity", (0.02,))):
            report = run_study(StudyConfig(kind=kind, eps=eps))
            for name in ANCHORS[kind]:
                assert name in report.rows[0].metrics

    def test_rerun_is_byte_identical(self, tmp_path):
        texts = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            run_study(
                StudyConfig(
                    kind="gap", eps=(0.01, 0.005), out_dir=str(out)
                )
            )
            texts.append((out / "report.json").read_bytes())
        assert texts[0] == texts[1]

    def test_timings_sidecar(self, tmp_path):
        out = tmp_path / "t"
        report = run_study(
            StudyConfig(kind="gap", eps=(0.01, 0.005), out_dir=str(out))
        )
        timing = json.loads((out / "timings.json").read_text())
        assert len(timing["seconds_per_eps"]) == 2
        assert timing["total_seconds"] >= 0.0
        assert len(report.seconds) == 2


class TestCommandLine:
    def test_gap_defaults_pass(self, capsys):
        assert main(["gap"]) == 0
        text = capsys.readouterr().out
        assert "PASS" in text

    def test_eps_and_out_flags(self, tmp_path, capsys):
        out = tmp_path / "gap"
        rc = main(["gap", "--eps", "0.02,0.01", "--out", str(out)])
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert report["config"]["eps"] == [0.02, 0.01]

    def test_failing_window_returns_one(self, capsys):
        assert main(["gap", "--eps", "0.3,0.2"]) == 1

    def test_seed_geometry_switches_kind(self, tmp_path, capsys):
        out = tmp_path / "lam"
        rc = main(
            [
                "solve-ok",
                "--seed-geometry",
                "lamellar:0.2",
                "--eps",
                "0.01",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert report["config"]["kind"] == "ok-lamellar"
        assert report["config"]["radius"] == 0.2

    def test_missing_config_no_partial_outputs(self, tmp_path, capsys):
        out = tmp_path / "never"
        rc = main(
            ["study", "--config", str(tmp_path / "nope.json"), "--out", str(out)]
        )
        assert rc == 2
        assert "not found" in capsys.readouterr().err
        assert not out.exists()

    def test_study_requires_config(self, capsys):
        assert main(["study"]) == 2
        assert "--config" in capsys.readouterr().err

    def test_unknown_key_named_on_stderr(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"kind": "gap", "eps": [0.01], "wells": 2}))
        assert main(["study", "--config", str(path)]) == 2
        assert "wells" in capsys.readouterr().err

    def test_invalid_json_config(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{kind: gap")
        assert main(["study", "--config", str(path)]) == 2
        assert "JSON" in capsys.readouterr().err

    def test_kind_conflict_with_subcommand(self, tmp_path, capsys):
        path = tmp_path / "gap.json"
        path.write_text(json.dumps({"kind": "gap", "eps": [0.01]}))
        assert main(["multiplicity", "--config", str(path)]) == 2
        assert "conflicts" in capsys.readouterr().err

    def test_config_file_drives_study(self, tmp_path, capsys):
        out = tmp_path / "from-config"
        path = tmp_path / "study.json"
        path.write_text(
            json.dumps(
                {"kind": "gap", "eps": [0.01, 0.005], "out_dir": str(out)}
            )
        )
        assert main(["study", "--config", str(path)]) == 0
        assert (out / "report.json").is_file()

    def test_bad_geometry_name(self, capsys):
        assert main(["solve-ch", "--seed-geometry", "torus"]) == 2
        err = capsys.readouterr().err
        assert "disk" in err and "planar" in err
