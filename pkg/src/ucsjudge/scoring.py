"""Stage 2: score samples against a criteria set and aggregate to concept level."""

from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import prompts
from .criteria import CriteriaSet
from .data import Dataset, Sample, TaskSpec
from .errors import AlignmentError, FormatError, GatewayError, ParseError, ScoringError
from .gateway import Gateway
from .parsing import parse_score_block

log = logging.getLogger(__name__)

SCORE_MIN, SCORE_MAX, MIDPOINT = 0.0, 10.0, 5.0


class Status(str, Enum):
    PARSED = "parsed"
    CLAMPED = "clamped"
    IMPUTED = "imputed"


@dataclass(frozen=True)
class ScoringVariant:
    generation_mode: str = "per_concept"
    scoring_mode: str = "per_concept"

    def __post_init__(self):
        for mode in (self.generation_mode, self.scoring_mode):
            if mode not in ("per_concept", "joint"):
                raise ValueError(f"unknown mode {mode!r}")

    @classmethod
    def parse(cls, text: str) -> "ScoringVariant":
        """``per-concept/joint`` -> generation per_concept, scoring joint."""
        try:
            gen, sc = text.split("/")
        except ValueError:
            raise ValueError(f"variant must look like 'per-concept/joint', got {text!r}") from None
        return cls(gen.strip().replace("-", "_"), sc.strip().replace("-", "_"))

    @property
    def label(self) -> str:
        return f"{self.generation_mode.replace('_', '-')}/{self.scoring_mode.replace('_', '-')}"


ALL_VARIANTS = tuple(
    ScoringVariant(g, s) for g in ("joint", "per_concept") for s in ("joint", "per_concept")
)


@dataclass
class CriteriaResponseVector:
    sample_id: str
    ucs_checksum: str
    scores: np.ndarray
    status: list[Status]
    raw_texts: list[str] = field(default_factory=list)


@dataclass
class ConceptVector:
    sample_id: str
    ucs_checksum: str
    values: np.ndarray


def clamp_and_impute(partial: Mapping[str, float], ucs: CriteriaSet) -> tuple[np.ndarray, list[Status]]:
    """Clamp parsed scores into [0, 10]; fill missing ones.

    A missing score takes the mean of the parsed scores of the same
    concept, or 5.0 when the concept has none.
    """
    known = {q.id for q in ucs.criteria}
    unknown = set(partial) - known
    if unknown:
        raise AlignmentError(f"scores for unknown criteria {sorted(unknown)}")
    scores = np.empty(ucs.k)
    status: list[Status] = [Status.IMPUTED] * ucs.k
    for j, q in enumerate(ucs.criteria):
        if q.id in partial:
            v = float(partial[q.id])
            c = min(max(v, SCORE_MIN), SCORE_MAX)
            scores[j] = c
            status[j] = Status.PARSED if c == v else Status.CLAMPED
    for sl in ucs.concept_slices():
        got = [scores[j] for j in range(sl.start, sl.stop) if status[j] is not Status.IMPUTED]
        fill = float(np.mean(got)) if got else MIDPOINT
        for j in range(sl.start, sl.stop):
            if status[j] is Status.IMPUTED:
                scores[j] = fill
    return scores, status


def aggregate_concepts(vector: CriteriaResponseVector, ucs: CriteriaSet) -> ConceptVector:
    """Concept score = arithmetic mean of its criteria's scores."""
    if vector.ucs_checksum != ucs.checksum:
        raise AlignmentError("response vector was scored against a different criteria set")
    z = np.asarray(vector.scores, dtype=np.float64)
    if z.shape != (ucs.k,):
        raise AlignmentError(f"expected {ucs.k} criterion scores, got {z.shape}")
    return ConceptVector(vector.sample_id, vector.ucs_checksum, concept_means(z, ucs))


def concept_means(z: np.ndarray, ucs: CriteriaSet) -> np.ndarray:
    """Row-wise concept means for a (k,) or (n, k) score array."""
    slices = ucs.concept_slices()
    z = np.asarray(z, dtype=np.float64)
    return np.stack([z[..., sl].mean(axis=-1) for sl in slices], axis=-1)


def _sample_slots(sample: Sample, task: TaskSpec) -> tuple[str, str]:
    return task.slot_text(sample, "context"), task.slot_text(sample, "answer_segment")


def scoring_requests(sample: Sample, ucs: CriteriaSet, task: TaskSpec,
                     variant: ScoringVariant) -> list[tuple[prompts.Template, list[str]]]:
    """The prompts one sample needs, each with the criterion ids it covers."""
    context, answer = _sample_slots(sample, task)
    calls = []
    if variant.scoring_mode == "per_concept":
        for concept in ucs.concepts:
            members = ucs.members(concept.id)
            t = prompts.scoring_prompt(task.prompt_family, context, answer, concept.name,
                                       [q.question for q in members])
            calls.append((t, [q.id for q in members]))
    else:
        grouped = [(c.name, [q.question for q in ucs.members(c.id)]) for c in ucs.concepts]
        t = prompts.joint_scoring_prompt(task.prompt_family, context, answer, grouped)
        calls.append((t, [q.id for q in ucs.criteria]))
    return calls


def score_sample(sample: Sample, ucs: CriteriaSet, task: TaskSpec, variant: ScoringVariant,
                 gateway: Gateway) -> CriteriaResponseVector:
    partial: dict[str, float] = {}
    raws = []
    for template, ids in scoring_requests(sample, ucs, task, variant):
        result = gateway.ask(template.system, template.user)
        raws.append(result.text)
        try:
            parsed = parse_score_block(result.text, ids)
        except ParseError:
            retry = gateway.ask(template.system, template.user + prompts.REPAIR_SUFFIX)
            raws.append(retry.text)
            try:
                parsed = parse_score_block(retry.text, ids)
            except ParseError:
                log.warning("sample %s: unparseable score block after repair; imputing %d criteria",
                            sample.id, len(ids))
                continue
        partial.update(parsed.scores)
    scores, status = clamp_and_impute(partial, ucs)
    return CriteriaResponseVector(sample.id, ucs.checksum, scores, status, raws)


@dataclass
class ScoreRecord:
    sample_id: str
    language: str
    label: int | None
    ucs_checksum: str
    z: list[float]
    status: list[str]
    s: list[float]

    def to_json(self) -> str:
        return json.dumps(
            {
                "sample_id": self.sample_id,
                "language": self.language,
                "label": self.label,
                "ucs_checksum": self.ucs_checksum,
                "z": self.z,
                "status": self.status,
                "s": self.s,
            },
            ensure_ascii=False,
        )


@dataclass
class ScoreTable:
    records: list[ScoreRecord]
    summary: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    audit: dict = field(default_factory=dict)

    @property
    def checksum(self) -> str:
        sums = {r.ucs_checksum for r in self.records}
        if len(sums) != 1:
            raise AlignmentError(f"score table mixes {len(sums)} criteria sets")
        return sums.pop()

    def languages(self) -> list[str]:
        return sorted({r.language for r in self.records})

    def select(self, language: str | None = None, ids: Sequence[str] | None = None) -> "ScoreTable":
        recs = self.records
        if language is not None:
            recs = [r for r in recs if r.language == language]
        if ids is not None:
            wanted = set(ids)
            recs = [r for r in recs if r.sample_id in wanted]
        return ScoreTable(recs)

    def Z(self) -> np.ndarray:
        return np.array([r.z for r in self.records], dtype=np.float64)

    def S(self) -> np.ndarray:
        return np.array([r.s for r in self.records], dtype=np.float64)

    def labels(self) -> np.ndarray:
        if any(r.label is None for r in self.records):
            raise ScoringError("score table has unlabeled records")
        return np.array([r.label for r in self.records], dtype=np.int64)

    @property
    def ids(self) -> list[str]:
        return [r.sample_id for r in self.records]

    def imputed_fraction(self) -> dict[str, float]:
        out = {}
        for lang in self.languages():
            st = [x for r in self.records if r.language == lang for x in r.status]
            out[lang] = sum(x == Status.IMPUTED.value for x in st) / len(st) if st else 0.0
        return out


def score_dataset(dataset: Dataset, ucs: CriteriaSet, task: TaskSpec, variant: ScoringVariant,
                  gateway: Gateway, max_failure_fraction: float = 0.05) -> ScoreTable:
    """Score every sample; output is ordered by sample id regardless of completion order."""
    samples = sorted(dataset.samples, key=lambda s: s.id)

    def work(sample):
        try:
            return sample, score_sample(sample, ucs, task, variant, gateway), None
        except GatewayError as exc:
            return sample, None, exc

    if gateway.concurrency > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=gateway.concurrency) as pool:
            results = list(pool.map(work, samples))
    else:
        results = [work(s) for s in samples]

    records, failures, audit = [], {}, {}
    counts: dict[str, Counter] = defaultdict(Counter)
    for sample, vec, err in results:
        if err is not None:
            failures[sample.id] = str(err)
            continue
        s = aggregate_concepts(vec, ucs)
        records.append(ScoreRecord(
            sample.id, sample.language, sample.label, ucs.checksum,
            [float(x) for x in vec.scores], [st.value for st in vec.status],
            [float(x) for x in s.values],
        ))
        audit[sample.id] = vec.raw_texts
        counts[sample.language].update(st.value for st in vec.status)
    if samples and len(failures) / len(samples) > max_failure_fraction:
        raise ScoringError(
            f"{len(failures)}/{len(samples)} samples failed (threshold {max_failure_fraction:.0%}); "
            f"first: {next(iter(failures.items()))}"
        )
    summary = {lang: dict(sorted(c.items())) for lang, c in sorted(counts.items())}
    return ScoreTable(records, summary, failures, audit)


def write_score_table(table: ScoreTable, path, audit_path=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in table.records:
            fh.write(r.to_json() + "\n")
    if audit_path is not None:
        with open(audit_path, "w", encoding="utf-8") as fh:
            for sid in sorted(table.audit):
                fh.write(json.dumps({"sample_id": sid, "raw": table.audit[sid]}, ensure_ascii=False) + "\n")


def read_score_table(path, labels: Mapping[str, int] | None = None) -> ScoreTable:
    """Load score JSONL; ``labels`` (id -> label) overrides labels stored in the file."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                label = d.get("label")
                if labels is not None and d["sample_id"] in labels:
                    label = labels[d["sample_id"]]
                rec = ScoreRecord(d["sample_id"], d["language"], label, d["ucs_checksum"],
                                  list(d["z"]), list(d["status"]), list(d["s"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: bad score record: {exc!r}") from exc
            if len(rec.z) != len(rec.status):
                raise FormatError(f"{path}:{lineno}: z and status lengths differ")
            records.append(rec)
    table = ScoreTable(records)
    if records:
        table.checksum  # raises on mixed criteria sets
    return table


def read_labels(path) -> dict[str, int]:
    """Label file: JSONL of {"id": ..., "label": 0|1}."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            d = json.loads(line)
            out[d.get("id", d.get("sample_id"))] = int(d["label"])
    return out
