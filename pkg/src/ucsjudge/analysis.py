"""Metrics and experiment harnesses over score tables."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from . import transfer
from .criteria import GENERATION_MODES, CriteriaSet, generate_criteria
from .data import (
    Dataset,
    SplitSpec,
    TaskSpec,
    nested_order_indices,
    stratified_split,
    stratified_test_indices,
    subsample_size,
)
from .errors import AlignmentError, MetricError
from .gateway import Gateway
from .scoring import ScoreTable, ScoringVariant, score_dataset
from .transfer.forest import ForestConfig

log = logging.getLogger(__name__)


# ---- metrics ---------------------------------------------------------------

def confusion_counts(labels, predictions) -> dict[str, int]:
    y = np.asarray(labels)
    p = np.asarray(predictions)
    if y.shape != p.shape or y.ndim != 1 or len(y) == 0:
        raise MetricError(f"labels {y.shape} and predictions {p.shape} must be equal-length 1-D")
    if not (np.isin(y, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise MetricError("labels and predictions must be 0/1")
    return {
        "tp": int(np.sum((y == 1) & (p == 1))),
        "fn": int(np.sum((y == 1) & (p == 0))),
        "tn": int(np.sum((y == 0) & (p == 0))),
        "fp": int(np.sum((y == 0) & (p == 1))),
    }


def balanced_accuracy(labels, predictions) -> float:
    """Mean of the two per-class recalls."""
    c = confusion_counts(labels, predictions)
    pos, neg = c["tp"] + c["fn"], c["tn"] + c["fp"]
    if pos == 0 or neg == 0:
        raise MetricError("balanced accuracy needs both classes present in the labels")
    # one integer division, so the result is the correctly rounded rational
    return (c["tp"] * neg + c["tn"] * pos) / (2 * pos * neg)


def spearman(a, b) -> float:
    """Pearson correlation of average ranks."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise MetricError(f"spearman needs equal-length inputs of size >= 2, got {a.shape}, {b.shape}")
    ra = rankdata(a) - (len(a) + 1) / 2.0
    rb = rankdata(b) - (len(b) + 1) / 2.0
    da, db = float(ra @ ra), float(rb @ rb)
    if da == 0.0 or db == 0.0:
        raise MetricError("spearman is undefined when an input has constant ranks")
    rho = float(ra @ rb) / np.sqrt(da * db)
    return float(min(1.0, max(-1.0, rho)))


# ---- importance ------------------------------------------------------------

@dataclass
class ImportanceProfile:
    language: str
    importances: np.ndarray
    seed: int
    feature_space: str = "criterion_level"

    def to_dict(self) -> dict:
        return {"language": self.language, "importances": [float(x) for x in self.importances],
                "seed": self.seed, "feature_space": self.feature_space}


def importance_profile(Z, labels, seed: int = 42, language: str = "",
                       config: ForestConfig = ForestConfig()) -> ImportanceProfile:
    """Gini importances of a forest fit on criterion-level scores."""
    model = transfer.fit_random_forest(Z, labels, config, seed=seed)
    return ImportanceProfile(language, transfer.feature_importances(model), seed)


def _imp(profile) -> np.ndarray:
    return np.asarray(profile.importances if isinstance(profile, ImportanceProfile) else profile,
                      dtype=np.float64)


def alignment_table(profiles: Mapping[str, ImportanceProfile], english) -> dict[str, float]:
    ref = _imp(english)
    out = {}
    for lang in sorted(profiles):
        imp = _imp(profiles[lang])
        if imp.shape != ref.shape:
            raise AlignmentError(f"{lang}: profile has {imp.shape[0]} features, English has {ref.shape[0]}")
        out[lang] = spearman(ref, imp)
    return out


# ---- experiments -------------------------------------------------------------

def _fit_eval(variant, X_tr, y_tr, X_te, y_te, seed) -> float:
    model = transfer.fit(variant, X_tr, y_tr, seed=seed)
    return balanced_accuracy(y_te, transfer.labels_from_proba(transfer.predict_proba(model, X_te)))


def top_k_indices(importances, k_top: int) -> np.ndarray:
    """Indices of the ``k_top`` largest importances (ties to the lower index), in ascending order."""
    imp = np.asarray(importances, dtype=np.float64)
    if not 1 <= k_top <= len(imp):
        raise MetricError(f"k_top must be in [1, {len(imp)}], got {k_top}")
    order = np.argsort(-imp, kind="stable")
    return np.sort(order[:k_top])


@dataclass(frozen=True)
class TopKResult:
    ba_full: float
    ba_topk: float
    delta: float


def topk_restriction_experiment(scores: Mapping[str, tuple], english_importances, k_top: int = 10,
                                model_variant: str = "logreg", seed: int = 42,
                                test_fraction: float = 0.3) -> dict[str, TopKResult]:
    """Per language: train/test on the full criteria and on the English top-k, report the BA change.

    ``scores`` maps language -> (Z, labels) with criterion-level Z.
    """
    keep = top_k_indices(_imp(english_importances), k_top)
    out = {}
    for lang in sorted(scores):
        Z, y = scores[lang]
        Z = np.asarray(Z, dtype=np.float64)
        y = np.asarray(y)
        test = stratified_test_indices(y, test_fraction, seed)
        train = np.setdiff1d(np.arange(len(y)), test)
        full = _fit_eval(model_variant, Z[train], y[train], Z[test], y[test], seed)
        top = _fit_eval(model_variant, Z[train][:, keep], y[train], Z[test][:, keep], y[test], seed)
        out[lang] = TopKResult(full, top, top - full)
    return out


@dataclass
class Curve:
    x: list
    y: dict[str, list[float]]
    seeds: list[int]
    metadata: dict = field(default_factory=dict)

    def to_rows(self) -> tuple[list[str], list[list]]:
        langs = list(self.y)
        header = ["x"] + langs
        rows = [[x] + [self.y[l][i] for l in langs] for i, x in enumerate(self.x)]
        return header, rows


def sample_efficiency_sweep(english_Z, english_labels, fractions: Sequence[float],
                            targets: Mapping[str, tuple], model_variant: str = "mlp", seed: int = 42,
                            test_fraction: float = 0.3, english_language: str = "en") -> Curve:
    """BA on a frozen English test split and on each target language, per training fraction.

    Training subsets are nested prefixes of one stratified ordering; rows
    inside a subset keep their original order, so fraction 1.0 is exactly
    the full-data fit.
    """
    fr = [float(f) for f in fractions]
    if not fr or any(not 0.0 < f <= 1.0 for f in fr) or any(b <= a for a, b in zip(fr, fr[1:])):
        raise MetricError(f"fractions must be strictly increasing within (0, 1], got {fr}")
    Z = np.asarray(english_Z, dtype=np.float64)
    y = np.asarray(english_labels)
    test = stratified_test_indices(y, test_fraction, seed)
    train = np.setdiff1d(np.arange(len(y)), test)
    order = nested_order_indices(y[train], seed)
    langs = [english_language] + sorted(targets)
    curve = Curve([], {l: [] for l in langs}, [seed], {"skipped": [], "n_train": []})
    for f in fr:
        rows = train[np.sort(order[: subsample_size(len(train), f)])]
        if len(np.unique(y[rows])) < 2:
            log.warning("fraction %.3f gives a single-class training set; skipped", f)
            curve.metadata["skipped"].append(f)
            continue
        model = transfer.fit(model_variant, Z[rows], y[rows], seed=seed)

        def ba(X, lab):
            return balanced_accuracy(lab, transfer.labels_from_proba(transfer.predict_proba(model, X)))

        curve.x.append(f)
        curve.metadata["n_train"].append(int(len(rows)))
        curve.y[english_language].append(ba(Z[test], y[test]))
        for lang in sorted(targets):
            tZ, ty = targets[lang]
            curve.y[lang].append(ba(np.asarray(tZ, dtype=np.float64), np.asarray(ty)))
    return curve


def variant_comparison(dataset: Dataset, task: TaskSpec, gateway: Gateway, model_variant: str = "mlp",
                       seed: int = 42, split: SplitSpec | None = None, train_language: str = "en",
                       pinned: Mapping[str, CriteriaSet] | None = None) -> Curve:
    """Run generation x scoring variants end to end and report BA and gateway call counts.

    Every variant uses the same seeded split. The criteria set is generated
    once per generation mode unless ``pinned`` supplies one.
    """
    split = split or SplitSpec(seed=seed)
    train, en_test = stratified_split(dataset.for_language(train_language), split)
    targets = sorted(dataset.languages - {train_language})
    eval_langs = targets or [train_language]
    curve = Curve([], {l: [] for l in [train_language] + targets}, [seed],
                  {"average_target_ba": [], "calls_per_sample": [], "scoring_calls": [],
                   "generation_calls": [], "m": [], "ucs_checksum": []})
    curve.y["average"] = curve.metadata["average_target_ba"]
    ucs_by_mode = {}
    for gen_mode in GENERATION_MODES:
        before = gateway.stats.requests
        if pinned and gen_mode in pinned:
            ucs_by_mode[gen_mode] = pinned[gen_mode]
        else:
            ucs_by_mode[gen_mode] = generate_criteria(task, gateway, gen_mode, timestamp=None, seed=seed)
        ucs_by_mode[gen_mode + "_calls"] = gateway.stats.requests - before
    scored = train.merge(en_test).merge(
        dataset.subset([s for s in dataset.samples if s.language != train_language]))
    for variant in (ScoringVariant(g, s) for g in GENERATION_MODES for s in GENERATION_MODES):
        ucs = ucs_by_mode[variant.generation_mode]
        before = gateway.stats.requests
        table = score_dataset(scored, ucs, task, variant, gateway)
        calls = gateway.stats.requests - before
        tr = table.select(ids=train.ids)
        model = transfer.fit(model_variant, tr.S(), tr.labels(), seed=seed, ucs_checksum=ucs.checksum)
        per_lang = {}
        for lang in [train_language] + targets:
            part = table.select(ids=en_test.ids) if lang == train_language else table.select(language=lang)
            pred = transfer.labels_from_proba(transfer.predict_proba(model, part.S(), ucs.checksum))
            per_lang[lang] = balanced_accuracy(part.labels(), pred)
            curve.y[lang].append(per_lang[lang])
        curve.x.append(variant.label)
        curve.metadata["average_target_ba"].append(float(np.mean([per_lang[l] for l in eval_langs])))
        curve.metadata["calls_per_sample"].append(calls / len(scored))
        curve.metadata["scoring_calls"].append(calls)
        curve.metadata["generation_calls"].append(ucs_by_mode[variant.generation_mode + "_calls"])
        curve.metadata["m"].append(ucs.m)
        curve.metadata["ucs_checksum"].append(ucs.checksum)
    return curve


# ---- reports -----------------------------------------------------------------

@dataclass
class EvalReport:
    task_id: str
    ucs_checksum: str
    balanced_accuracy: dict[str, float]
    confusion: dict[str, dict[str, int]]
    imputed_fraction: dict[str, float]
    run_seed: int
    model_variant: str = ""

    def __post_init__(self):
        for lang, ba in self.balanced_accuracy.items():
            if not 0.0 <= ba <= 1.0:
                raise MetricError(f"{lang}: balanced accuracy {ba} outside [0,1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalReport":
        return cls(**d)


def evaluate(model, tables: Mapping[str, ScoreTable], task_id: str, run_seed: int) -> EvalReport:
    """Apply one trained model to each language's score table."""
    bas, conf, imputed = {}, {}, {}
    checksum = None
    for lang in sorted(tables):
        t = tables[lang]
        checksum = t.checksum
        pred = transfer.labels_from_proba(transfer.predict_proba(model, t.S(), checksum))
        bas[lang] = balanced_accuracy(t.labels(), pred)
        conf[lang] = confusion_counts(t.labels(), pred)
        imputed[lang] = t.imputed_fraction().get(lang, 0.0)
    return EvalReport(task_id, checksum or "", bas, conf, imputed, run_seed, model.variant)


@dataclass(frozen=True)
class SummaryRow:
    language: str
    mean: float
    std: float
    n_runs: int
    single_run: bool


def summarize_runs(reports: Sequence[EvalReport]) -> list[SummaryRow]:
    """Per-language mean and sample standard deviation (n - 1) across runs."""
    if not reports:
        raise MetricError("no reports to summarize")
    langs = set(reports[0].balanced_accuracy)
    tasks = {r.task_id for r in reports}
    if len(tasks) != 1:
        raise MetricError(f"reports span several tasks: {sorted(tasks)}")
    for r in reports[1:]:
        if set(r.balanced_accuracy) != langs:
            raise MetricError(f"language sets differ: {sorted(langs)} vs {sorted(r.balanced_accuracy)}")
    n = len(reports)
    if n == 1:
        log.warning("single run: standard deviation reported as 0")
    rows = []
    for lang in sorted(langs):
        vals = np.array([r.balanced_accuracy[lang] for r in reports])
        std = float(vals.std(ddof=1)) if n > 1 else 0.0
        rows.append(SummaryRow(lang, float(vals.mean()), std, n, n == 1))
    return rows


def summary_table(rows: Sequence[SummaryRow]) -> tuple[list[str], list[list]]:
    return (["language", "mean", "std", "n_runs", "single_run"],
            [[r.language, r.mean, r.std, r.n_runs, r.single_run] for r in rows])


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def to_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def to_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [list(map(str, header))] + [[_cell(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_tables(stem, header, rows) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.txt``."""
    stem = Path(stem)
    csv_path, txt_path = stem.with_suffix(".csv"), stem.with_suffix(".txt")
    csv_path.write_text(to_csv(header, rows), encoding="utf-8")
    txt_path.write_text(to_text(header, rows), encoding="utf-8")
    return csv_path, txt_path


def report_rows(report: EvalReport) -> tuple[list[str], list[list]]:
    header = ["language", "balanced_accuracy", "tp", "fn", "tn", "fp", "imputed_fraction"]
    rows = []
    for lang in sorted(report.balanced_accuracy):
        c = report.confusion[lang]
        rows.append([lang, report.balanced_accuracy[lang], c["tp"], c["fn"], c["tn"], c["fp"],
                     report.imputed_fraction.get(lang, 0.0)])
    return header, rows


def save_report(report: EvalReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_report(path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
