"""Command-line entry point: ``ucsjudge <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from . import analysis, transfer
from .config import BACKENDS, GatewaySettings, PipelineConfig, build_gateway, validate_config
from .criteria import generate_criteria, load_ucs, save_ucs
from .data import PromptFamily, load_dataset, load_task_spec, task_spec_to_dict, write_dataset
from .errors import ConfigError, UCSError
from .scoring import ScoringVariant, read_labels, read_score_table, score_dataset, write_score_table

log = logging.getLogger("ucsjudge")


def _gateway_from_args(args, task):
    """Gateway from ``--config`` (if given) with ``--backend``/``--cache-dir`` overrides."""
    if args.config:
        cfg = validate_config(args.config)
    else:
        cfg = PipelineConfig(task="", datasets={}, gateway=GatewaySettings())
    return build_gateway(cfg, task, backend=args.backend,
                         cache_dir=args.cache_dir if args.cache_dir else None)


def _table(args):
    labels = read_labels(args.labels) if getattr(args, "labels", None) else None
    return read_score_table(args.scores, labels)


def cmd_generate_criteria(args):
    task = load_task_spec(args.task)
    gw = _gateway_from_args(args, task)
    mode = args.mode.replace("-", "_")
    ucs = generate_criteria(task, gw, mode, timestamp=None if args.no_timestamp else "now", seed=args.seed)
    save_ucs(ucs, args.out)
    print(f"wrote {args.out}: {ucs.m} concepts, {ucs.k} criteria, checksum {ucs.checksum[:12]}")


def cmd_score(args):
    task = load_task_spec(args.task)
    ds = load_dataset(args.dataset, task)
    ucs = load_ucs(args.ucs)
    gw = _gateway_from_args(args, task)
    table = score_dataset(ds, ucs, task, ScoringVariant.parse(args.variant), gw,
                          max_failure_fraction=args.max_failure_fraction)
    audit = Path(args.out).with_name(Path(args.out).stem + "_audit.jsonl")
    write_score_table(table, args.out, audit)
    for lang, counts in table.summary.items():
        print(f"{lang}: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    print(f"wrote {len(table.records)} records to {args.out} "
          f"({gw.stats.backend_calls} backend calls, {gw.stats.cache_hits} cache hits)")


def cmd_train(args):
    t = _table(args).select(language=args.lang)
    if not t.records:
        raise ConfigError(f"no {args.lang!r} records in {args.scores}")
    model = transfer.fit(args.model, t.S(), t.labels(), seed=args.seed, ucs_checksum=t.checksum,
                         sample_ids=t.ids)
    model.training_metadata["train_language"] = args.lang
    transfer.save_model(model, args.out)
    print(f"wrote {args.model} model trained on {len(t.records)} {args.lang} samples to {args.out}")


def cmd_judge(args):
    model = transfer.load_model(args.model)
    table = _table(args)
    langs = [args.lang] if args.lang else table.languages()
    report = analysis.evaluate(model, {l: table.select(language=l) for l in langs}, args.task_id, model.seed or 0)
    stem = Path(args.report)
    analysis.save_report(report, stem.with_suffix(".json"))
    header, rows = analysis.report_rows(report)
    analysis.write_tables(stem, header, rows)
    print(analysis.to_text(header, rows), end="")


def cmd_importance(args):
    table = _table(args)
    profiles = {l: analysis.importance_profile(table.select(language=l).Z(), table.select(language=l).labels(),
                                               seed=args.seed, language=l)
                for l in table.languages()}
    ref = profiles[args.reference]
    rho = analysis.alignment_table(profiles, ref)
    k = len(ref.importances)
    header = ["criterion"] + sorted(profiles)
    rows = [[i] + [float(profiles[l].importances[i]) for l in sorted(profiles)] for i in range(k)]
    analysis.write_tables(Path(args.out), header, rows)
    align_rows = [[l, rho[l]] for l in sorted(rho)]
    analysis.write_tables(Path(str(args.out) + "_alignment"), ["language", "spearman_vs_reference"], align_rows)
    print(analysis.to_text(["language", "spearman_vs_reference"], align_rows), end="")


def cmd_topk(args):
    table = _table(args)
    ref = table.select(language=args.reference)
    profile = analysis.importance_profile(ref.Z(), ref.labels(), seed=args.seed)
    scores = {l: (table.select(language=l).Z(), table.select(language=l).labels())
              for l in table.languages() if l != args.reference}
    res = analysis.topk_restriction_experiment(scores, profile.importances, args.k_top, args.model, args.seed)
    header = ["language", "ba_full", "ba_topk", "delta"]
    rows = [[l, r.ba_full, r.ba_topk, r.delta] for l, r in res.items()]
    analysis.write_tables(Path(args.out), header, rows)
    print(analysis.to_text(header, rows), end="")


def cmd_sweep(args):
    table = _table(args)
    en = table.select(language=args.train_lang)
    targets = {l: (table.select(language=l).S(), table.select(language=l).labels())
               for l in table.languages() if l != args.train_lang}
    fractions = [float(f) for f in args.fractions.split(",")]
    curve = analysis.sample_efficiency_sweep(en.S(), en.labels(), fractions, targets, args.model, args.seed,
                                             english_language=args.train_lang)
    header, rows = curve.to_rows()
    analysis.write_tables(Path(args.out), header, rows)
    if curve.metadata["skipped"]:
        print(f"skipped single-class fractions: {curve.metadata['skipped']}", file=sys.stderr)
    print(analysis.to_text(header, rows), end="")


def cmd_variants(args):
    from .pipeline import load_all_datasets

    cfg = validate_config(args.config)
    task = cfg.load_task()
    gw = build_gateway(cfg, task, backend=args.backend)
    curve = analysis.variant_comparison(load_all_datasets(cfg, task), task, gw, cfg.model_variant, args.seed,
                                        train_language=cfg.train_language)
    langs = [l for l in curve.y if l != "average"]
    header = ["variant"] + langs + ["average_target", "calls_per_sample", "m"]
    rows = [[v] + [curve.y[l][i] for l in langs]
            + [curve.metadata["average_target_ba"][i], curve.metadata["calls_per_sample"][i], curve.metadata["m"][i]]
            for i, v in enumerate(curve.x)]
    analysis.write_tables(Path(args.out), header, rows)
    print(analysis.to_text(header, rows), end="")


def cmd_summarize(args):
    reports = [analysis.load_report(p) for p in args.reports]
    header, rows = analysis.summary_table(analysis.summarize_runs(reports))
    if args.out:
        analysis.write_tables(Path(args.out), header, rows)
    print(analysis.to_text(header, rows), end="")


def cmd_run(args):
    from .pipeline import run_all

    cfg = validate_config(args.config)
    seeds = [args.seed] if args.seed is not None else None
    for r in run_all(cfg, seeds, resume=args.resume, out=args.out, backend=args.backend):
        print(f"{r.run_dir}: {r.backend_calls} backend calls, {r.gateway_requests} requests")
        print(analysis.to_text(*analysis.report_rows(r.report)), end="")


def cmd_make_planted(args):
    """Write a self-contained planted-signal task, datasets and mock config."""
    from .planted import PlantedWorld, make_planted_dataset

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    planted = {
        "signal": [args.signal] * 5,
        "languages": {"en": {"noise": 1.0}, "tgt": {"noise": 1.5, "bias": 1.0}},
        "joint_noise_factor": 2.0,
        "seed": args.seed,
    }
    world = PlantedWorld(family=PromptFamily(args.family), signal=tuple(planted["signal"]))
    task = world.task()
    (out / "task.yaml").write_text(yaml.safe_dump(task_spec_to_dict(task), sort_keys=True), encoding="utf-8")
    datasets = {}
    for i, lang in enumerate(("en", "tgt")):
        ds = make_planted_dataset(task, {lang: args.n}, seed=args.seed + i)
        write_dataset(ds, out / f"{lang}.jsonl")
        datasets[lang] = f"{lang}.jsonl"
    config = {
        "task": "task.yaml",
        "datasets": datasets,
        "gateway": {"backend": "mock", "model_id": "planted-mock", "planted": planted, "concurrency": 4},
        "model_variant": "mlp",
        "seeds": [42],
        "output_dir": "runs",
    }
    (out / "config.yaml").write_text(yaml.safe_dump(config, sort_keys=True), encoding="utf-8")
    print(f"wrote planted task, datasets and config to {out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ucsjudge", description="Criteria-based cross-lingual LLM judging.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def gw_flags(sp):
        sp.add_argument("--config", help="pipeline config whose gateway section is used")
        sp.add_argument("--backend", choices=BACKENDS)
        sp.add_argument("--cache-dir")

    sp = sub.add_parser("generate-criteria", help="generate and freeze a criteria set")
    sp.add_argument("--task", required=True)
    sp.add_argument("--mode", default="per-concept", choices=["per-concept", "joint"])
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--no-timestamp", action="store_true")
    sp.add_argument("--out", required=True)
    gw_flags(sp)
    sp.set_defaults(func=cmd_generate_criteria)

    sp = sub.add_parser("score", help="score a dataset against a criteria set")
    sp.add_argument("--task", required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--ucs", required=True)
    sp.add_argument("--variant", default="per-concept/per-concept")
    sp.add_argument("--max-failure-fraction", type=float, default=0.05)
    sp.add_argument("--out", required=True)
    gw_flags(sp)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("train", help="fit a transfer model on one language's concept vectors")
    sp.add_argument("--scores", required=True)
    sp.add_argument("--labels")
    sp.add_argument("--lang", default="en")
    sp.add_argument("--model", default="mlp", choices=transfer.VARIANTS)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("judge", help="apply a model and report balanced accuracy")
    sp.add_argument("--model", required=True)
    sp.add_argument("--scores", required=True)
    sp.add_argument("--labels")
    sp.add_argument("--lang")
    sp.add_argument("--task-id", default="task")
    sp.add_argument("--report", required=True, help="output stem for .json/.csv/.txt")
    sp.set_defaults(func=cmd_judge)

    sp = sub.add_parser("analyze", help="analysis harnesses")
    asub = sp.add_subparsers(dest="analysis", required=True)

    def table_flags(ap):
        ap.add_argument("--scores", required=True)
        ap.add_argument("--labels")
        ap.add_argument("--seed", type=int, default=42)
        ap.add_argument("--out", required=True, help="output stem for .csv/.txt")

    ap = asub.add_parser("importance", help="per-language Gini importance profiles and alignment")
    table_flags(ap)
    ap.add_argument("--reference", default="en")
    ap.set_defaults(func=cmd_importance)

    ap = asub.add_parser("topk", help="BA change when restricted to the English top-k criteria")
    table_flags(ap)
    ap.add_argument("--reference", default="en")
    ap.add_argument("--k-top", type=int, default=10)
    ap.add_argument("--model", default="logreg", choices=transfer.VARIANTS)
    ap.set_defaults(func=cmd_topk)

    ap = asub.add_parser("sweep", help="balanced accuracy vs English training fraction")
    table_flags(ap)
    ap.add_argument("--train-lang", default="en")
    ap.add_argument("--fractions", default="0.05,0.1,0.2,0.3,0.5,0.7,1.0")
    ap.add_argument("--model", default="mlp", choices=transfer.VARIANTS)
    ap.set_defaults(func=cmd_sweep)

    ap = asub.add_parser("variants", help="compare the four generation x scoring variants")
    ap.add_argument("--config", required=True)
    ap.add_argument("--backend", choices=BACKENDS)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", required=True)
    ap.set_defaults(func=cmd_variants)

    for parent, name in ((asub, "summarize"), (sub, "summarize")):
        ap = parent.add_parser(name, help="mean +/- std over run reports")
        ap.add_argument("--reports", nargs="+", required=True)
        ap.add_argument("--out")
        ap.set_defaults(func=cmd_summarize)

    sp = sub.add_parser("run", help="end-to-end pipeline")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--backend", choices=BACKENDS)
    sp.add_argument("--resume", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("make-planted", help="write a planted-signal demo task")
    sp.add_argument("--out", required=True)
    sp.add_argument("--family", default="summary_faithfulness", choices=[f.value for f in PromptFamily])
    sp.add_argument("--n", type=int, default=200, help="samples per language")
    sp.add_argument("--signal", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_make_planted)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UCSError as exc:
        stage = getattr(exc, "stage", None)
        prefix = f"[{stage}] " if stage else ""
        print(f"error: {prefix}{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
