"""Sample/dataset schemas, JSONL ingestion and seeded splitting."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .errors import (
    ConfigError,
    DataError,
    DuplicateIdError,
    SchemaError,
    StratificationError,
)


class PromptFamily(str, Enum):
    EVIDENCE_SUPPORT = "evidence_support"
    SUMMARY_FAITHFULNESS = "summary_faithfulness"


# role names per family, and which role fills which prompt slot
FAMILY_DEFAULTS = {
    PromptFamily.EVIDENCE_SUPPORT: {
        "field_roles": ("context", "question", "answer"),
        "concept_count_range": (3, 5),
        "questions_per_concept": (4, 6),
        "slots": {"context": "context", "answer_segment": "answer"},
    },
    PromptFamily.SUMMARY_FAITHFULNESS: {
        "field_roles": ("article", "summary"),
        "concept_count_range": (3, 5),
        "questions_per_concept": (6, 6),
        "slots": {"context": "article", "answer_segment": "summary"},
    },
}


@dataclass(frozen=True)
class Sample:
    id: str
    language: str
    fields: Mapping[str, str]
    label: int | None = None

    def text(self, role: str) -> str:
        return self.fields[role]


@dataclass(frozen=True)
class Dataset:
    task_id: str
    samples: tuple[Sample, ...]
    languages: frozenset[str]

    def __post_init__(self):
        seen = set()
        for s in self.samples:
            if s.id in seen:
                raise DuplicateIdError(f"duplicate sample id {s.id!r}")
            seen.add(s.id)
            if s.language not in self.languages:
                raise DataError(f"sample {s.id!r} has undeclared language {s.language!r}")

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.samples]

    def labels(self) -> np.ndarray:
        missing = [s.id for s in self.samples if s.label is None]
        if missing:
            raise DataError(f"{len(missing)} unlabeled samples (first: {missing[0]!r}); labels required")
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def subset(self, samples: Iterable[Sample]) -> "Dataset":
        return Dataset(self.task_id, tuple(samples), self.languages)

    def for_language(self, language: str) -> "Dataset":
        return self.subset(s for s in self.samples if s.language == language)

    def merge(self, other: "Dataset") -> "Dataset":
        return Dataset(
            self.task_id, self.samples + other.samples, self.languages | other.languages
        )


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    description: str
    prompt_family: PromptFamily
    field_roles: tuple[str, ...]
    concept_count_range: tuple[int, int] = (3, 5)
    questions_per_concept: tuple[int, int] = (4, 6)
    slots: Mapping[str, str] = field(default_factory=dict)
    languages: frozenset[str] | None = None
    # prepend the description to the concept prompt; off keeps the prompt verbatim
    description_in_prompt: bool = False

    def __post_init__(self):
        lo, hi = self.concept_count_range
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad concept_count_range {self.concept_count_range}")
        lo, hi = self.questions_per_concept
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad questions_per_concept {self.questions_per_concept}")
        for slot, role in self.slots.items():
            if role not in self.field_roles:
                raise ConfigError(f"slot {slot!r} maps to unknown role {role!r}")

    @classmethod
    def for_family(cls, family, task_id=None, description="", **overrides) -> "TaskSpec":
        family = PromptFamily(family)
        defaults = dict(FAMILY_DEFAULTS[family])
        defaults.update(overrides)
        return cls(
            task_id=task_id or family.value,
            description=description,
            prompt_family=family,
            field_roles=tuple(defaults["field_roles"]),
            concept_count_range=tuple(defaults["concept_count_range"]),
            questions_per_concept=_as_range(defaults["questions_per_concept"]),
            slots=dict(defaults["slots"]),
            languages=frozenset(defaults["languages"]) if defaults.get("languages") else None,
            description_in_prompt=bool(defaults.get("description_in_prompt", False)),
        )

    def slot_text(self, sample: Sample, slot: str) -> str:
        return sample.fields[self.slots[slot]]


def _as_range(value) -> tuple[int, int]:
    if isinstance(value, int):
        return (value, value)
    lo, hi = value
    return (int(lo), int(hi))


_TASK_KEYS = {
    "task_id", "description", "prompt_family", "field_roles", "concept_count_range",
    "questions_per_concept", "slots", "languages", "description_in_prompt",
}


def load_task_spec(path) -> TaskSpec:
    """Read a YAML task file. Unspecified keys take the prompt family's defaults."""
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: task spec must be a mapping")
    unknown = sorted(set(raw) - _TASK_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown task keys {unknown}")
    if "prompt_family" not in raw:
        raise ConfigError(f"{path}: prompt_family is required")
    family = raw.pop("prompt_family")
    try:
        return TaskSpec.for_family(family, **raw)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def task_spec_to_dict(task: TaskSpec) -> dict:
    return {
        "task_id": task.task_id,
        "description": task.description,
        "prompt_family": task.prompt_family.value,
        "field_roles": list(task.field_roles),
        "concept_count_range": list(task.concept_count_range),
        "questions_per_concept": list(task.questions_per_concept),
        "slots": dict(task.slots),
        "languages": sorted(task.languages) if task.languages else None,
        "description_in_prompt": task.description_in_prompt,
    }


def parse_record(record: Mapping, task: TaskSpec, line: int | None = None) -> Sample:
    if not isinstance(record, Mapping):
        raise SchemaError("record is not an object", line=line)
    sid = record.get("id")
    if not isinstance(sid, str) or not sid:
        raise SchemaError("missing or empty 'id'", line=line, role="id")
    lang = record.get("language")
    if not isinstance(lang, str) or not lang:
        raise SchemaError("missing or empty 'language'", line=line, role="language")
    fields = {}
    for role in task.field_roles:
        value = record.get(role)
        if not isinstance(value, str) or not value.strip():
            raise SchemaError(f"missing required role {role!r}", line=line, role=role)
        fields[role] = value
    label = record.get("label")
    if label is not None:
        if isinstance(label, bool) or label not in (0, 1):
            raise SchemaError(f"label must be 0 or 1, got {label!r}", line=line, role="label")
        label = int(label)
    return Sample(id=sid, language=lang, fields=fields, label=label)


def load_dataset(path, task: TaskSpec, languages: Iterable[str] | None = None) -> Dataset:
    """Load a JSONL file, one sample per line; blank lines are skipped."""
    declared = frozenset(languages) if languages is not None else task.languages
    samples = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            sample = parse_record(record, task, line=lineno)
            if sample.id in seen:
                raise DuplicateIdError(
                    f"line {lineno}: duplicate id {sample.id!r} (first seen on line {seen[sample.id]})"
                )
            seen[sample.id] = lineno
            if declared is not None and sample.language not in declared:
                raise DataError(f"line {lineno}: unknown language {sample.language!r}")
            samples.append(sample)
    langs = declared if declared is not None else frozenset(s.language for s in samples)
    return Dataset(task.task_id, tuple(samples), frozenset(langs))


def write_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in dataset.samples:
            rec = {"id": s.id, "language": s.language}
            if s.label is not None:
                rec["label"] = s.label
            rec.update(s.fields)
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.30
    train_fraction_used: float = 1.0
    seed: int = 42
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0,1), got {self.test_fraction}")
        if not 0.0 < self.train_fraction_used <= 1.0:
            raise ConfigError(f"train_fraction_used must be in (0,1], got {self.train_fraction_used}")


def _sorted_by_id(dataset: Dataset) -> list[Sample]:
    return sorted(dataset.samples, key=lambda s: s.id)


def stratified_test_indices(labels, test_fraction: float, seed: int) -> np.ndarray:
    """Sorted test-row indices; per-class test counts are round(n_c * test_fraction), clamped to [1, n_c-1]."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    test_idx = []
    for cls in (0, 1):
        members = np.flatnonzero(labels == cls)
        if len(members) == 0:
            raise StratificationError(f"class {cls} has no samples; cannot stratify")
        if len(members) < 2:
            raise StratificationError(f"class {cls} has {len(members)} sample; need >= 2")
        n_c = len(members)
        n_test = min(max(int(math.floor(n_c * test_fraction + 0.5)), 1), n_c - 1)
        test_idx.extend(rng.permutation(members)[:n_test].tolist())
    return np.array(sorted(test_idx), dtype=np.int64)


def stratified_split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded train/test split over samples sorted by id."""
    ordered = _sorted_by_id(dataset)
    if not spec.stratified:
        rng = np.random.default_rng(spec.seed)
        perm = rng.permutation(len(ordered))
        n_test = min(max(int(math.floor(len(ordered) * spec.test_fraction + 0.5)), 1), len(ordered) - 1)
        test_idx = set(perm[:n_test].tolist())
    else:
        labels = Dataset(dataset.task_id, tuple(ordered), dataset.languages).labels()
        test_idx = set(stratified_test_indices(labels, spec.test_fraction, spec.seed).tolist())
    train = [s for i, s in enumerate(ordered) if i not in test_idx]
    test = [s for i, s in enumerate(ordered) if i in test_idx]
    return dataset.subset(train), dataset.subset(test)


def nested_order_indices(labels, seed: int) -> np.ndarray:
    """A seeded row ordering whose every prefix is (approximately) class-stratified.

    Each class is shuffled once; members are then interleaved by their
    fractional position within their class, so prefixes are nested.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    keyed = []
    for cls in (0, 1):
        perm = rng.permutation(np.flatnonzero(labels == cls))
        n_c = len(perm)
        for rank, idx in enumerate(perm):
            keyed.append(((rank + 0.5) / n_c, cls, int(idx)))
    keyed.sort()
    return np.array([i for _, _, i in keyed], dtype=np.int64)


def nested_order(dataset: Dataset, seed: int) -> list[Sample]:
    ordered = _sorted_by_id(dataset)
    labels = Dataset(dataset.task_id, tuple(ordered), dataset.languages).labels()
    return [ordered[i] for i in nested_order_indices(labels, seed)]


def subsample_size(n: int, fraction: float) -> int:
    if not 0.0 < fraction <= 1.0:
        raise DataError(f"fraction must be in (0,1], got {fraction}")
    return n if fraction == 1.0 else int(math.ceil(fraction * n - 1e-9))


def subsample_train(train: Dataset, fraction: float, seed: int) -> Dataset:
    """Return ceil(fraction * |train|) samples; smaller fractions give subsets of larger ones."""
    n = subsample_size(len(train), fraction)
    if fraction == 1.0:
        return train
    return train.subset(nested_order(train, seed)[:n])


def with_label(sample: Sample, label: int | None) -> Sample:
    return replace(sample, label=label)


def languages_of(samples: Sequence[Sample]) -> list[str]:
    return sorted({s.language for s in samples})
