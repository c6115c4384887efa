import json
from pathlib import Path

import pytest

from topopath.cli import (
    EXIT_CONFIG,
    EXIT_INGEST,
    EXIT_METRIC,
    EXIT_PERSIST,
    PipelineConfig,
    cluster_seed,
    main,
)

from conftest import write_square_loop_dataset

EXPECTED_ARTIFACTS = {
    "matrix.json", "clusters.json", "scores.json", "distances.tsv",
    "barcode.tsv", "barcode.svg", "cycle_0.json", "cycle_0.svg",
    "run_manifest.json",
}


@pytest.fixture
def dataset(tmp_path):
    config_path, config = write_square_loop_dataset(tmp_path)
    return config_path, config


def read_artifacts(out_dir, names):
    return {name: (out_dir / name).read_bytes() for name in names}


class TestRun:
    def test_smoke_run_writes_all_artifacts(self, dataset, capsys):
        config_path, config = dataset
        assert main(["run", "-c", str(config_path)]) == 0
        out = Path(config["output_dir"])
        assert {p.name for p in out.iterdir()} == EXPECTED_ARTIFACTS

    def test_missing_input_names_ingest_stage(self, dataset, capsys):
        config_path, config = dataset
        rc = main(["run", "-c", str(config_path), "--input", "/nonexistent.csv"])
        assert rc == EXIT_INGEST
        assert "ingest:" in capsys.readouterr().err

    def test_deterministic_artifacts(self, dataset):
        config_path, config = dataset
        out = Path(config["output_dir"])
        assert main(["run", "-c", str(config_path), "--seed", "42"]) == 0
        first = read_artifacts(out, ["scores.json", "barcode.tsv", "cycle_0.json"])
        assert main(["run", "-c", str(config_path), "--seed", "42"]) == 0
        second = read_artifacts(out, ["scores.json", "barcode.tsv", "cycle_0.json"])
        assert first == second

    def test_manifest_re_executes_identically(self, dataset, tmp_path):
        config_path, config = dataset
        assert main(["run", "-c", str(config_path)]) == 0
        out = Path(config["output_dir"])
        manifest = json.loads((out / "run_manifest.json").read_text())
        replay_dir = tmp_path / "replay"
        replay_cfg = dict(manifest["config"], output_dir=str(replay_dir))
        replay_path = tmp_path / "replay.json"
        replay_path.write_text(json.dumps(replay_cfg))
        assert main(["run", "-c", str(replay_path)]) == 0
        for name in EXPECTED_ARTIFACTS - {"run_manifest.json"}:
            assert (replay_dir / name).read_bytes() == (out / name).read_bytes()

    def test_no_patient_ids_flag(self, dataset):
        config_path, config = dataset
        assert main(["run", "-c", str(config_path), "--no-patient-ids"]) == 0
        payload = json.loads(
            (Path(config["output_dir"]) / "clusters.json").read_text()
        )
        assert all("patients" not in entry for entry in payload)


class TestStages:
    def test_staged_equals_full_run(self, dataset, tmp_path):
        config_path, config = dataset
        assert main(["run", "-c", str(config_path)]) == 0
        full = read_artifacts(
            Path(config["output_dir"]), EXPECTED_ARTIFACTS - {"run_manifest.json"}
        )

        staged_dir = tmp_path / "staged"
        staged_dir.mkdir()
        staged_path, staged_config = write_square_loop_dataset(staged_dir)
        for stage in ["ingest", "patterns", "score", "persist", "cycles", "report"]:
            assert main([stage, "-c", str(staged_path)]) == 0, stage
        staged = read_artifacts(
            Path(staged_config["output_dir"]), EXPECTED_ARTIFACTS - {"run_manifest.json"}
        )
        assert staged == full

    def test_persist_on_hand_written_distances(self, tmp_path, capsys):
        # a barcode computed with no clinical input at all
        out = tmp_path / "out"
        out.mkdir()
        (out / "distances.tsv").write_text(
            "p0\tp1\tp2\n0.2\n0.2\t0.2\n", encoding="utf-8"
        )
        rc = main([
            "persist",
            "--input", "unused.csv", "--code-table", "unused.json",
            "--output-dir", str(out),
        ])
        assert rc == 0
        barcode = (out / "barcode.tsv").read_text()
        assert "0\t0.0\tinf" in barcode

    def test_report_is_idempotent(self, dataset):
        config_path, config = dataset
        assert main(["run", "-c", str(config_path)]) == 0
        out = Path(config["output_dir"])
        first = read_artifacts(out, ["barcode.svg", "cycle_0.svg"])
        assert main(["report", "-c", str(config_path)]) == 0
        assert read_artifacts(out, ["barcode.svg", "cycle_0.svg"]) == first

    def test_persist_without_distances_fails_with_stage_code(self, dataset, capsys):
        config_path, config = dataset
        rc = main(["persist", "-c", str(config_path)])
        assert rc == EXIT_PERSIST
        assert "persist:" in capsys.readouterr().err

    def test_metric_failure_named(self, tmp_path, capsys):
        # min_support beyond the patient count leaves no clusters: the metric
        # stage cannot build a matrix and must say so
        config_path, config = write_square_loop_dataset(tmp_path)
        rc = main(["run", "-c", str(config_path), "--min-support", "57"])
        assert rc == EXIT_METRIC
        assert "metric:" in capsys.readouterr().err


class TestConfig:
    def test_missing_required_keys(self, capsys):
        assert main(["run"]) == EXIT_CONFIG
        assert "config:" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"input_path": "x", "code_table": "y",
                                    "bogus": 1}))
        assert main(["run", "-c", str(path)]) == EXIT_CONFIG

    def test_invalid_value_ranges(self, tmp_path):
        base = {"input_path": "x", "code_table": "y"}
        for bad in (
            {"max_dim": 9}, {"min_support_fraction": 2.0}, {"n_shuffles": 1},
            {"max_order": 0}, {"rips_threshold": 0.0}, {"input_format": "xml"},
        ):
            path = tmp_path / "cfg.json"
            path.write_text(json.dumps({**base, **bad}))
            assert main(["run", "-c", str(path)]) == EXIT_CONFIG, bad

    def test_toml_config(self, tmp_path, dataset):
        _, config = dataset
        toml = tmp_path / "cfg.toml"
        toml.write_text(
            "\n".join(
                f'{key} = "{val}"' if isinstance(val, str) else f"{key} = {val}"
                for key, val in config.items()
            ),
            encoding="utf-8",
        )
        assert main(["run", "-c", str(toml)]) == 0

    def test_defaults_match_documented_values(self):
        cfg = PipelineConfig(input_path="a", code_table="b")
        assert cfg.min_support_fraction == 0.003
        assert cfg.max_order == 4
        assert cfg.min_support == 5
        assert cfg.n_shuffles == 1000
        assert cfg.z_threshold == 3.0
        assert cfg.rips_threshold == 0.5
        assert cfg.max_dim == 2
        assert cfg.min_persistence == 0.0

    def test_threads_env_var(self, dataset, monkeypatch):
        config_path, config = dataset
        monkeypatch.setenv("TOPOPATH_THREADS", "not-a-number")
        assert main(["run", "-c", str(config_path)]) == EXIT_CONFIG
        monkeypatch.setenv("TOPOPATH_THREADS", "2")
        assert main(["run", "-c", str(config_path)]) == 0


def test_cluster_seed_is_deterministic_and_distinct():
    seeds = [cluster_seed(42, k) for k in range(10)]
    assert seeds == [cluster_seed(42, k) for k in range(10)]
    assert len(set(seeds)) == len(seeds)
    assert cluster_seed(43, 0) != cluster_seed(42, 0)
