"""Stage 1: concept and question generation, and the persisted criteria set.

Nothing here accepts a sample: the criteria depend only on the task.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import prompts
from .data import TaskSpec
from .errors import CountRangeError, FormatError, GenerationError, ParseError, VersionError
from .gateway import Gateway
from .parsing import parse_joint_questions, parse_tagged_list

log = logging.getLogger(__name__)

UCS_VERSION = 1
GENERATION_MODES = ("per_concept", "joint")


@dataclass(frozen=True)
class Concept:
    id: str
    name: str
    task_id: str


@dataclass(frozen=True)
class Criterion:
    id: str
    question: str
    concept_id: str
    index_within_concept: int


@dataclass(frozen=True)
class CriteriaSet:
    task_id: str
    concepts: tuple[Concept, ...]
    criteria: tuple[Criterion, ...]
    generation_metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        validate_ucs(self)

    @property
    def m(self) -> int:
        return len(self.concepts)

    @property
    def k(self) -> int:
        return len(self.criteria)

    @property
    def checksum(self) -> str:
        return ucs_checksum(self.concepts, self.criteria)

    def members(self, concept_id: str) -> list[Criterion]:
        return [c for c in self.criteria if c.concept_id == concept_id]

    def concept_slices(self) -> list[slice]:
        """Contiguous criterion ranges per concept, in concept order."""
        out, start = [], 0
        for concept in self.concepts:
            n = sum(1 for c in self.criteria if c.concept_id == concept.id)
            out.append(slice(start, start + n))
            start += n
        return out

    def concept_index(self) -> list[int]:
        pos = {c.id: j for j, c in enumerate(self.concepts)}
        return [pos[c.concept_id] for c in self.criteria]


def ucs_checksum(concepts, criteria) -> str:
    payload = {
        "concepts": [[c.id, c.name] for c in concepts],
        "criteria": [[q.id, q.concept_id, q.index_within_concept, q.question] for q in criteria],
    }
    blob = json.dumps(payload, ensure_ascii=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def validate_ucs(ucs: CriteriaSet) -> None:
    if not ucs.concepts:
        raise FormatError("criteria set has no concepts")
    names = set()
    ids = {}
    for j, c in enumerate(ucs.concepts):
        if not c.name.strip():
            raise FormatError(f"concept {c.id!r} has an empty name")
        if c.name.casefold() in names:
            raise FormatError(f"duplicate concept name {c.name!r}")
        if c.id in ids:
            raise FormatError(f"duplicate concept id {c.id!r}")
        names.add(c.name.casefold())
        ids[c.id] = j
    seen = set()
    last_concept, last_index = -1, 0
    for q in ucs.criteria:
        if q.concept_id not in ids:
            raise FormatError(f"criterion {q.id!r} references unknown concept {q.concept_id!r}")
        if q.id in seen:
            raise FormatError(f"duplicate criterion id {q.id!r}")
        if not q.question.strip():
            raise FormatError(f"criterion {q.id!r} has empty question text")
        seen.add(q.id)
        j = ids[q.concept_id]
        # canonical order: concept order, then index within concept
        if j < last_concept or (j == last_concept and q.index_within_concept != last_index + 1) or (
            j > last_concept and q.index_within_concept != 1
        ):
            raise FormatError(f"criterion {q.id!r} breaks canonical ordering")
        last_concept, last_index = j, q.index_within_concept
    for c in ucs.concepts:
        if not any(q.concept_id == c.id for q in ucs.criteria):
            raise FormatError(f"concept {c.name!r} has no criteria")


def _in_range(n, lo, hi):
    return lo <= n <= hi


def _dedupe(names: Sequence[str]) -> list[str]:
    out, seen = [], set()
    for n in names:
        key = n.casefold()
        if key not in seen:
            seen.add(key)
            out.append(n)
    return out


def _ask_list(gateway: Gateway, template: prompts.Template, prefix: str, wrapper: str,
              lo: int, hi: int, what: str, dedupe: bool = False) -> list[str]:
    """One request plus at most one repair request, for parse or count failures."""
    result = gateway.ask(template.system, template.user)
    try:
        items = parse_tagged_list(result.text, prefix, wrapper)
    except ParseError as exc:
        log.warning("unparseable %s reply; sending repair prompt", what)
        retry = gateway.ask(template.system, template.user + prompts.REPAIR_SUFFIX)
        try:
            items = parse_tagged_list(retry.text, prefix, wrapper)
        except ParseError as exc2:
            raise GenerationError(f"could not parse {what} after repair: {exc2}", raw=retry.text) from exc
    if dedupe:
        items = _dedupe(items)
    if not _in_range(len(items), lo, hi):
        log.warning("%d %s outside [%d, %d]; re-prompting", len(items), what, lo, hi)
        suffix = prompts.range_repair_suffix(len(items), lo, hi, what)
        retry = gateway.ask(template.system, template.user + suffix)
        try:
            items = parse_tagged_list(retry.text, prefix, wrapper)
        except ParseError as exc:
            raise GenerationError(f"could not parse {what} after re-prompt: {exc}", raw=retry.text) from exc
        if dedupe:
            items = _dedupe(items)
        if not _in_range(len(items), lo, hi):
            raise CountRangeError(f"{len(items)} {what} outside [{lo}, {hi}] after re-prompt", raw=retry.text)
    return items


def generate_concepts(task: TaskSpec, gateway: Gateway) -> list[Concept]:
    template = prompts.concept_prompt(
        task.prompt_family, task.description if task.description_in_prompt else ""
    )
    lo, hi = task.concept_count_range
    names = _ask_list(gateway, template, "concept", "concepts", lo, hi, "concepts", dedupe=True)
    return [Concept(id=f"c{j}", name=name, task_id=task.task_id) for j, name in enumerate(names, 1)]


def _validate_questions(questions: Sequence[str], concept: Concept) -> None:
    for i, q in enumerate(questions, 1):
        if not q.strip():
            raise GenerationError(f"concept {concept.name!r}: question {i} is empty")


def generate_questions(concept: Concept, task: TaskSpec, gateway: Gateway) -> list[Criterion]:
    template = prompts.question_prompt(task.prompt_family, concept.name)
    lo, hi = task.questions_per_concept
    questions = _ask_list(gateway, template, "question", "questions", lo, hi, "questions")
    _validate_questions(questions, concept)
    return _criteria_for(concept, questions)


def _criteria_for(concept: Concept, questions: Sequence[str]) -> list[Criterion]:
    return [
        Criterion(id=f"{concept.id}q{i}", question=q, concept_id=concept.id, index_within_concept=i)
        for i, q in enumerate(questions, 1)
    ]


def generate_questions_joint(concepts: Sequence[Concept], task: TaskSpec,
                             gateway: Gateway) -> list[list[Criterion]]:
    """All concepts' questions from one request (synthesized prompt)."""
    lo, hi = task.questions_per_concept
    template = prompts.joint_question_prompt(task.prompt_family, [c.name for c in concepts], lo, hi)

    def attempt(suffix=""):
        result = gateway.ask(template.system, template.user + suffix)
        return parse_joint_questions(result.text, len(concepts)), result.text

    try:
        groups, raw = attempt()
    except ParseError:
        try:
            groups, raw = attempt(prompts.REPAIR_SUFFIX)
        except ParseError as exc:
            raise GenerationError(f"could not parse joint questions after repair: {exc}", raw=exc.raw) from exc
    bad = [len(g) for g in groups if not _in_range(len(g), lo, hi)]
    if bad:
        groups, raw = attempt(prompts.range_repair_suffix(bad[0], lo, hi, "questions for a concept"))
        if any(not _in_range(len(g), lo, hi) for g in groups):
            raise CountRangeError("joint question counts out of range after re-prompt", raw=raw)
    out = []
    for concept, questions in zip(concepts, groups):
        _validate_questions(questions, concept)
        out.append(_criteria_for(concept, questions))
    return out


def build_ucs(task: TaskSpec, concepts: Sequence[Concept],
              per_concept_questions: Sequence[Sequence[Criterion]],
              metadata: dict | None = None) -> CriteriaSet:
    if not concepts:
        raise FormatError("cannot build a criteria set from zero concepts")
    if len(per_concept_questions) != len(concepts):
        raise FormatError("need exactly one question list per concept")
    criteria = []
    for concept, questions in zip(concepts, per_concept_questions):
        if not questions:
            raise FormatError(f"concept {concept.name!r} has no questions")
        for q in questions:
            if q.concept_id != concept.id:
                raise FormatError(f"criterion {q.id!r} does not belong to {concept.id!r}")
        criteria.extend(questions)
    return CriteriaSet(task.task_id, tuple(concepts), tuple(criteria), dict(metadata or {}))


def build_ucs_from_lists(task: TaskSpec, grouped: Sequence[tuple[str, Sequence[str]]],
                         metadata: dict | None = None) -> CriteriaSet:
    """Build a criteria set from (concept name, questions) pairs."""
    concepts = [Concept(f"c{j}", name, task.task_id) for j, (name, _) in enumerate(grouped, 1)]
    lists = [_criteria_for(c, qs) for c, (_, qs) in zip(concepts, grouped)]
    return build_ucs(task, concepts, lists, metadata)


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def generate_criteria(task: TaskSpec, gateway: Gateway, mode: str = "per_concept",
                      timestamp: str | None = "now", seed: int | None = None) -> CriteriaSet:
    """Concepts, then questions (per concept or jointly), then the frozen set.

    ``timestamp=None`` omits the wall-clock time so the file is reproducible.
    """
    if mode not in GENERATION_MODES:
        raise ValueError(f"generation mode must be one of {GENERATION_MODES}, got {mode!r}")
    concepts = generate_concepts(task, gateway)
    if mode == "per_concept":
        lists = [generate_questions(c, task, gateway) for c in concepts]
    else:
        lists = generate_questions_joint(concepts, task, gateway)
    meta = {
        "model_id": gateway.model_id,
        "prompt_family": task.prompt_family.value,
        "generation_mode": mode,
        "timestamp": _timestamp() if timestamp == "now" else timestamp,
        "seed": seed,
    }
    return build_ucs(task, concepts, lists, meta)


def ucs_to_dict(ucs: CriteriaSet) -> dict:
    return {
        "version": UCS_VERSION,
        "task_id": ucs.task_id,
        "checksum": ucs.checksum,
        "generation_metadata": ucs.generation_metadata,
        "concepts": [{"id": c.id, "name": c.name} for c in ucs.concepts],
        "criteria": [
            {"id": q.id, "concept_id": q.concept_id, "index": q.index_within_concept, "question": q.question}
            for q in ucs.criteria
        ],
    }


def save_ucs(ucs: CriteriaSet, path) -> None:
    Path(path).write_text(json.dumps(ucs_to_dict(ucs), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def ucs_from_dict(doc: dict) -> CriteriaSet:
    if not isinstance(doc, dict):
        raise FormatError("criteria file must hold a JSON object")
    version = doc.get("version")
    if version != UCS_VERSION:
        raise VersionError(f"unsupported criteria file version {version!r} (expected {UCS_VERSION})")
    try:
        task_id = doc["task_id"]
        concepts = tuple(Concept(c["id"], c["name"], task_id) for c in doc["concepts"])
        criteria = tuple(
            Criterion(q["id"], q["question"], q["concept_id"], int(q["index"])) for q in doc["criteria"]
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed criteria file: {exc!r}") from exc
    ucs = CriteriaSet(task_id, concepts, criteria, dict(doc.get("generation_metadata") or {}))
    if doc.get("checksum") != ucs.checksum:
        raise FormatError("criteria file checksum does not match its contents")
    return ucs


def load_ucs(path) -> CriteriaSet:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    return ucs_from_dict(doc)
