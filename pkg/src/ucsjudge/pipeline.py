"""End-to-end run: criteria -> scores -> English model -> per-language reports."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, analysis, transfer
from .config import PipelineConfig, build_gateway, dump_config
from .criteria import generate_criteria, load_ucs, save_ucs
from .data import Dataset, SplitSpec, load_dataset, stratified_split, subsample_train
from .errors import UCSError
from .scoring import ScoringVariant, read_score_table, score_dataset, write_score_table

log = logging.getLogger(__name__)

# files inside a run directory, in stage order
ARTIFACTS = ("ucs.json", "scores.jsonl", "scores_audit.jsonl", "split.json", "model.json",
             "verdicts.jsonl", "report.json", "report.csv", "report.txt")


@dataclass
class RunResult:
    run_dir: Path
    report: analysis.EvalReport
    gateway_requests: int
    backend_calls: int
    manifest: dict = field(default_factory=dict)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return when.strftime("%Y%m%dT%H%M%SZ")


def load_all_datasets(cfg: PipelineConfig, task) -> Dataset:
    merged = None
    for lang in sorted(cfg.datasets):
        ds = load_dataset(cfg.path(cfg.datasets[lang]), task, languages=[lang])
        merged = ds if merged is None else merged.merge(ds)
    return merged


def latest_run_dir(out: Path, seed: int) -> Path | None:
    runs = sorted(p for p in out.glob(f"*_seed{seed}") if p.is_dir())
    return runs[-1] if runs else None


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def run_pipeline(cfg: PipelineConfig, seed: int | None = None, resume: bool = False,
                 out: str | Path | None = None, backend: str | None = None) -> RunResult:
    """Execute every stage for one seed; stages whose artifact exists are reused on ``resume``."""
    seed = cfg.seeds[0] if seed is None else seed
    out_root = Path(out) if out is not None else cfg.path(cfg.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    run_dir = latest_run_dir(out_root, seed) if resume else None
    if run_dir is None:
        run_dir = out_root / f"{_now()}_seed{seed}"
        n = 1
        while run_dir.exists():
            n += 1
            run_dir = out_root / f"{_now()}-{n}_seed{seed}"
        run_dir.mkdir(parents=True)
    task = cfg.load_task()
    cache_dir = cfg.path(cfg.gateway.cache_dir) if cfg.gateway.cache_dir else out_root / "cache"
    gateway = build_gateway(cfg, task, backend=backend, cache_dir=cache_dir)
    variant = ScoringVariant.parse(cfg.variant)
    manifest = {
        "package_version": __version__,
        "seed": seed,
        "variant": variant.label,
        "backend": backend or cfg.gateway.backend,
        "created": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "config": cfg.snapshot(),
    }
    (run_dir / "config.yaml").write_text(dump_config(cfg), encoding="utf-8")
    stage = "load"
    try:
        dataset = load_all_datasets(cfg, task)

        stage = "generate-criteria"
        ucs_path = run_dir / "ucs.json"
        if resume and ucs_path.exists():
            ucs = load_ucs(ucs_path)
        else:
            ucs = generate_criteria(task, gateway, variant.generation_mode, timestamp=None, seed=seed)
            save_ucs(ucs, ucs_path)

        stage = "score"
        scores_path = run_dir / "scores.jsonl"
        if resume and scores_path.exists():
            table = read_score_table(scores_path)
        else:
            table = score_dataset(dataset, ucs, task, variant, gateway)
            write_score_table(table, scores_path, run_dir / "scores_audit.jsonl")
        if table.failures:
            _write_json(run_dir / "scoring_failures.json", table.failures)

        stage = "train"
        split = SplitSpec(cfg.split.test_fraction, cfg.split.train_fraction_used, seed, cfg.split.stratified)
        train_ds, test_ds = stratified_split(dataset.for_language(cfg.train_language), split)
        train_ds = subsample_train(train_ds, split.train_fraction_used, seed)
        _write_json(run_dir / "split.json", {"train": sorted(train_ds.ids), "test": sorted(test_ds.ids),
                                              "train_language": cfg.train_language})
        model_path = run_dir / "model.json"
        if resume and model_path.exists():
            model = transfer.load_model(model_path)
        else:
            tr = table.select(ids=train_ds.ids)
            model = transfer.fit(cfg.model_variant, tr.S(), tr.labels(), seed=seed,
                                 ucs_checksum=ucs.checksum, sample_ids=tr.ids)
            model.training_metadata["train_language"] = cfg.train_language
            transfer.save_model(model, model_path)

        stage = "judge"
        tables = {cfg.train_language: table.select(ids=test_ds.ids)}
        for lang in sorted(set(cfg.datasets) - {cfg.train_language}):
            tables[lang] = table.select(language=lang)
        with open(run_dir / "verdicts.jsonl", "w", encoding="utf-8") as fh:
            for lang, t in tables.items():
                for v in transfer.predict_many(model, t.S(), t.ids, ucs.checksum):
                    fh.write(json.dumps({"sample_id": v.sample_id, "language": lang,
                                         "probability": v.probability, "predicted_label": v.predicted_label,
                                         "source": v.source}) + "\n")
        report = analysis.evaluate(model, tables, task.task_id, seed)

        stage = "report"
        analysis.save_report(report, run_dir / "report.json")
        analysis.write_tables(run_dir / "report", *analysis.report_rows(report))
    except UCSError as exc:
        manifest["failed_stage"] = stage
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        _finish_manifest(run_dir, manifest, gateway)
        log.error("stage %s failed: %s", stage, exc)
        exc.stage = stage
        raise
    manifest = _finish_manifest(run_dir, manifest, gateway)
    return RunResult(run_dir, report, gateway.stats.requests, gateway.stats.backend_calls, manifest)


def _finish_manifest(run_dir: Path, manifest: dict, gateway) -> dict:
    manifest["artifacts"] = {
        p.name: sha256_file(p) for p in sorted(run_dir.iterdir()) if p.is_file() and p.name != "manifest.json"
    }
    manifest["gateway"] = {"requests": gateway.stats.requests, "backend_calls": gateway.stats.backend_calls,
                           "cache_hits": gateway.stats.cache_hits}
    _write_json(run_dir / "manifest.json", manifest)
    return manifest


def run_all(cfg: PipelineConfig, seeds=None, resume: bool = False, out=None, backend=None) -> list[RunResult]:
    """One run per seed; with several seeds a mean +/- std summary is written next to the runs."""
    seeds = list(seeds) if seeds else list(cfg.seeds)
    results = [run_pipeline(cfg, s, resume, out, backend) for s in seeds]
    if len(results) > 1:
        rows = analysis.summarize_runs([r.report for r in results])
        out_root = results[0].run_dir.parent
        analysis.write_tables(out_root / f"summary_{_now()}", *analysis.summary_table(rows))
    return results
