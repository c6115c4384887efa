"""Command-line pipeline: ingest -> patterns -> score -> persist -> cycles -> report.

Each stage is individually runnable and consumes the previous stage's files,
so any intermediate artifact can be audited or hand-injected. A full ``run``
with the same config and seed produces byte-identical artifacts.

Exit codes: 0 ok, 2 config error, then one per stage in pipeline order:
10 ingest, 11 patterns, 12 score, 13 metric, 14 persist, 15 cycles, 16 report.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .cycles import annotate, loop_from_json, loop_to_json, representative
from .filtration import build_vr
from .ingest import (
    AssociationMatrix,
    build_matrix,
    load_code_table,
    load_lexicon,
    load_records,
    tag_lexicon,
)
from .metric import distance_matrix, distances_from_tsv, distances_to_tsv
from .patterns import (
    Cluster,
    ClusterSummary,
    Pattern,
    enumerate_clusters,
    read_clusters,
    write_clusters,
)
from .persistence import barcode, reduce
from .report import BarcodePlotSpec, barcode_from_tsv, render_barcode, render_cycle
from .significance import filter_significant, scores_to_json, shuffle_null

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INGEST = 10
EXIT_PATTERNS = 11
EXIT_SCORE = 12
EXIT_METRIC = 13
EXIT_PERSIST = 14
EXIT_CYCLES = 15
EXIT_REPORT = 16

# spawn key namespace for deriving per-cluster shuffle seeds from the run seed
_SCORE_STAGE_KEY = 2


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    input_path: str
    code_table: str
    input_format: str = "csv"
    lexicon: str | None = None
    min_support_fraction: float = 0.003
    max_order: int = 4
    min_support: int = 5
    n_shuffles: int = 1000
    z_threshold: float = 3.0
    rips_threshold: float = 0.5
    max_dim: int = 2
    min_persistence: float = 0.0
    seed: int = 0
    output_dir: str = "out"
    threads: int = 1
    include_patient_ids: bool = True

    def validate(self) -> None:
        if not self.input_path:
            raise ConfigError("input_path is required")
        if not self.code_table:
            raise ConfigError("code_table is required")
        if self.input_format not in ("csv", "json"):
            raise ConfigError(f"input_format must be csv or json, got {self.input_format!r}")
        if not 0.0 <= self.min_support_fraction <= 1.0:
            raise ConfigError("min_support_fraction must lie in [0, 1]")
        if not 1 <= self.max_order <= 4:
            raise ConfigError("max_order must be between 1 and 4")
        if self.min_support < 1:
            raise ConfigError("min_support must be >= 1")
        if self.n_shuffles < 2:
            raise ConfigError("n_shuffles must be >= 2")
        if self.rips_threshold <= 0:
            raise ConfigError("rips_threshold must be positive")
        if not 1 <= self.max_dim <= 3:
            raise ConfigError("max_dim must be between 1 and 3")
        if self.min_persistence < 0:
            raise ConfigError("min_persistence must be >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, payload: Mapping) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            cfg = cls(**payload)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(_read_config_payload(path))


def _read_config_payload(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix == ".toml":
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib  # type: ignore[no-redef]
        try:
            payload = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: config must be a table/object")
    return payload


def cluster_seed(run_seed: int, cluster_index: int) -> int:
    """Deterministic per-cluster shuffle seed fanned out from the run seed."""
    seq = np.random.SeedSequence(entropy=run_seed,
                                 spawn_key=(_SCORE_STAGE_KEY, cluster_index))
    return int(seq.generate_state(1)[0])


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def stage_ingest(cfg: PipelineConfig) -> AssociationMatrix:
    records = load_records(cfg.input_path, cfg.input_format)
    table = load_code_table(cfg.code_table)
    if cfg.lexicon:
        records = tag_lexicon(records, load_lexicon(cfg.lexicon, table))
    matrix = build_matrix(records, table, cfg.min_support_fraction)
    log.info(
        "ingest: %d patients x %d codes (%d dropped with no surviving codes)",
        matrix.n_patients, matrix.n_codes, matrix.n_dropped_patients,
    )
    _write_json(_out(cfg) / "matrix.json", matrix.to_dict())
    return matrix


def stage_patterns(cfg: PipelineConfig, matrix: AssociationMatrix) -> list[Cluster]:
    clusters = enumerate_clusters(matrix, cfg.max_order, cfg.min_support)
    log.info("patterns: %d clusters (order <= %d, support >= %d)",
             len(clusters), cfg.max_order, cfg.min_support)
    write_clusters(_out(cfg) / "clusters.json", clusters, matrix,
                   include_patients=cfg.include_patient_ids)
    return clusters


def stage_score(cfg: PipelineConfig, matrix: AssociationMatrix,
                clusters: Sequence[Cluster]) -> list[Cluster]:
    scores = {}
    ordered = []
    for k, cluster in enumerate(clusters):
        score = shuffle_null(matrix, cluster.pattern, cfg.n_shuffles,
                             cluster_seed(cfg.seed, k))
        scores[cluster.pattern] = score
        ordered.append(score)
    _write_json(_out(cfg) / "scores.json", scores_to_json(ordered))
    kept = filter_significant(list(clusters), scores, cfg.z_threshold)
    log.info("score: %d of %d clusters pass z >= %g", len(kept), len(clusters),
             cfg.z_threshold)
    return kept


def stage_metric(cfg: PipelineConfig, kept: Sequence[Cluster]):
    dm = distance_matrix(list(kept))
    (_out(cfg) / "distances.tsv").write_text(distances_to_tsv(dm), encoding="utf-8")
    return dm


def stage_persist(cfg: PipelineConfig, dm):
    filt = build_vr(dm, cfg.rips_threshold, cfg.max_dim)
    reduced, pairs = reduce(filt)
    bars = _pipeline_barcode(cfg, pairs)
    from .report import barcode_to_tsv

    (_out(cfg) / "barcode.tsv").write_text(barcode_to_tsv(bars), encoding="utf-8")
    log.info("persist: %d simplexes, %d bars", len(filt), len(bars.pairs))
    return filt, reduced, pairs, bars


def _pipeline_barcode(cfg: PipelineConfig, pairs):
    # homology at the truncation dimension is an artifact of the simplex cap
    # (nothing of dimension max_dim+1 exists to kill it), so pipeline
    # artifacts report dims strictly below max_dim
    return barcode(
        [p for p in pairs if p.dim < cfg.max_dim], cfg.min_persistence
    )


def stage_cycles(cfg: PipelineConfig, filt, reduced, bars,
                 summaries: Sequence, dm) -> list[Path]:
    written = []
    out = _out(cfg)
    finite_dim1 = [p for p in bars.pairs if p.dim == 1 and p.finite]
    for k, pair in enumerate(finite_dim1):
        cycle = representative(reduced, filt, pair)
        loop = annotate(cycle, summaries, dm)
        path = out / f"cycle_{k}.json"
        _write_json(path, loop_to_json(loop))
        written.append(path)
    log.info("cycles: %d representative cycles", len(written))
    return written


def stage_report(cfg: PipelineConfig) -> None:
    out = _out(cfg)
    bars = barcode_from_tsv((out / "barcode.tsv").read_text(encoding="utf-8"))
    spec = BarcodePlotSpec(
        x_range=(0.0, cfg.rips_threshold),
        threshold=cfg.rips_threshold,
        fmt="svg",
    )
    (out / "barcode.svg").write_bytes(render_barcode(bars, spec))
    for path in sorted(out.glob("cycle_*.json")):
        loop = loop_from_json(json.loads(path.read_text(encoding="utf-8")))
        (out / (path.stem + ".svg")).write_bytes(render_cycle(loop))


def _write_manifest(cfg: PipelineConfig) -> None:
    out = _out(cfg)
    artifacts = sorted(
        p.name for p in out.iterdir()
        if p.name.endswith((".json", ".tsv", ".svg")) and p.name != "run_manifest.json"
    )
    _write_json(out / "run_manifest.json", {
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "artifacts": artifacts,
    })


def run(cfg: PipelineConfig) -> int:
    """Execute the full pipeline; returns a process exit code."""
    stages = [
        (EXIT_INGEST, "ingest"),
        (EXIT_PATTERNS, "patterns"),
        (EXIT_SCORE, "score"),
        (EXIT_METRIC, "metric"),
        (EXIT_PERSIST, "persist"),
        (EXIT_CYCLES, "cycles"),
        (EXIT_REPORT, "report"),
    ]
    state: dict = {}

    def _ingest():
        state["matrix"] = stage_ingest(cfg)

    def _patterns():
        state["clusters"] = stage_patterns(cfg, state["matrix"])

    def _score():
        state["kept"] = stage_score(cfg, state["matrix"], state["clusters"])

    def _metric():
        state["dm"] = stage_metric(cfg, state["kept"])

    def _persist():
        state["filt"], state["reduced"], state["pairs"], state["bars"] = stage_persist(
            cfg, state["dm"]
        )

    def _cycles():
        stage_cycles(cfg, state["filt"], state["reduced"], state["bars"],
                     state["kept"], state["dm"])

    def _report():
        stage_report(cfg)

    steps = {"ingest": _ingest, "patterns": _patterns, "score": _score,
             "metric": _metric, "persist": _persist, "cycles": _cycles,
             "report": _report}
    for code, name in stages:
        try:
            steps[name]()
        except Exception as exc:
            print(f"{name}: {exc}", file=sys.stderr)
            return code
    _write_manifest(cfg)
    return EXIT_OK


def _load_matrix(cfg: PipelineConfig) -> AssociationMatrix:
    path = _out(cfg) / "matrix.json"
    return AssociationMatrix.from_dict(json.loads(path.read_text(encoding="utf-8")))


def _load_summaries(cfg: PipelineConfig, dm) -> list[ClusterSummary]:
    payload = json.loads((_out(cfg) / "clusters.json").read_text(encoding="utf-8"))
    support_by_pattern = {
        Pattern.of(entry["pattern"]): int(entry["support"]) for entry in payload
    }
    summaries = []
    for pattern in dm.labels or ():
        if pattern not in support_by_pattern:
            raise ValueError(
                f"distances.tsv pattern {pattern} missing from clusters.json "
                "(stale or mismatched stage files)"
            )
        summaries.append(ClusterSummary(pattern, support_by_pattern[pattern]))
    return summaries


def _cmd_stage(cfg: PipelineConfig, stage: str) -> int:
    try:
        if stage == "ingest":
            code = EXIT_INGEST
            stage_ingest(cfg)
        elif stage == "patterns":
            code = EXIT_PATTERNS
            stage_patterns(cfg, _load_matrix(cfg))
        elif stage == "score":
            code = EXIT_SCORE
            matrix = _load_matrix(cfg)
            clusters = read_clusters(_out(cfg) / "clusters.json", matrix)
            kept = stage_score(cfg, matrix, clusters)
            code = EXIT_METRIC
            stage_metric(cfg, kept)
        elif stage == "persist":
            code = EXIT_PERSIST
            dm = distances_from_tsv((_out(cfg) / "distances.tsv").read_text(encoding="utf-8"))
            stage_persist(cfg, dm)
        elif stage == "cycles":
            code = EXIT_CYCLES
            dm = distances_from_tsv((_out(cfg) / "distances.tsv").read_text(encoding="utf-8"))
            filt, reduced, pairs, bars = _recompute_persistence(cfg, dm)
            stage_cycles(cfg, filt, reduced, bars, _load_summaries(cfg, dm), dm)
        elif stage == "report":
            code = EXIT_REPORT
            stage_report(cfg)
        else:  # pragma: no cover
            raise ValueError(f"unknown stage {stage}")
    except Exception as exc:
        name = {EXIT_METRIC: "metric"}.get(code, stage)
        print(f"{name}: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


def _recompute_persistence(cfg: PipelineConfig, dm):
    filt = build_vr(dm, cfg.rips_threshold, cfg.max_dim)
    reduced, pairs = reduce(filt)
    return filt, reduced, pairs, _pipeline_barcode(cfg, pairs)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topopath",
        description="Mine candidate disease pathways from patient-condition data",
    )
    parser.add_argument("--version", action="version", version=f"topopath {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "ingest", "patterns", "score", "persist", "cycles", "report"):
        p = sub.add_parser(name, help=f"{name} stage" if name != "run" else "full pipeline")
        p.add_argument("-c", "--config", help="config file (.json or .toml)")
        p.add_argument("--input", dest="input_path")
        p.add_argument("--format", dest="input_format", choices=("csv", "json"))
        p.add_argument("--code-table", dest="code_table")
        p.add_argument("--lexicon", dest="lexicon")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--seed", dest="seed", type=int)
        p.add_argument("--threads", dest="threads", type=int)
        p.add_argument("--min-support-fraction", dest="min_support_fraction", type=float)
        p.add_argument("--max-order", dest="max_order", type=int)
        p.add_argument("--min-support", dest="min_support", type=int)
        p.add_argument("--n-shuffles", dest="n_shuffles", type=int)
        p.add_argument("--z-threshold", dest="z_threshold", type=float)
        p.add_argument("--rips-threshold", dest="rips_threshold", type=float)
        p.add_argument("--max-dim", dest="max_dim", type=int)
        p.add_argument("--min-persistence", dest="min_persistence", type=float)
        p.add_argument("--no-patient-ids", dest="include_patient_ids",
                       action="store_false", default=None,
                       help="suppress patient ids in clusters.json")
    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    payload: dict = {}
    if args.config:
        payload = _read_config_payload(args.config)
    overrides = {
        name: getattr(args, name)
        for name in (
            "input_path", "input_format", "code_table", "lexicon", "output_dir",
            "seed", "threads", "min_support_fraction", "max_order", "min_support",
            "n_shuffles", "z_threshold", "rips_threshold", "max_dim",
            "min_persistence", "include_patient_ids",
        )
        if getattr(args, name, None) is not None
    }
    payload.update(overrides)
    if "threads" not in payload and os.environ.get("TOPOPATH_THREADS"):
        try:
            payload["threads"] = int(os.environ["TOPOPATH_THREADS"])
        except ValueError as exc:
            raise ConfigError(f"TOPOPATH_THREADS: {exc}") from exc
    if "input_path" not in payload or "code_table" not in payload:
        raise ConfigError("input_path and code_table must be set (config file or flags)")
    return PipelineConfig.from_dict(payload)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        print(f"config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run":
        return run(cfg)
    return _cmd_stage(cfg, args.command)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
