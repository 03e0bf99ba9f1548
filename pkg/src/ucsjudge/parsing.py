"""Parsers for the tagged completion formats."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ParseError

_LABEL = re.compile(r"^\s*(?:\*\*)?question\s*:\s*(?:\*\*)?\s*", re.IGNORECASE)
# a range placeholder such as "[0-10]" is not a score
_SCORE = re.compile(r"score\s*\**\s*:\s*\**\s*\[?\s*(-?\d+(?:\.\d+)?)(?!\s*[-–]\s*\d)", re.IGNORECASE)


def _block(text: str, tag: str) -> str:
    m = re.search(rf"<{tag}>(.*?)</{tag}>", text, re.DOTALL | re.IGNORECASE)
    if m is None:
        if re.search(rf"<{tag}>", text, re.IGNORECASE):
            raise ParseError(f"<{tag}> block is not closed", raw=text)
        raise ParseError(f"no <{tag}> block found", raw=text)
    return m.group(1)


def _items(block: str, prefix: str, raw: str) -> dict[int, str]:
    p = re.escape(prefix)
    found = {}
    for m in re.finditer(rf"<{p}(\d+)>(.*?)</{p}\1>", block, re.DOTALL | re.IGNORECASE):
        n = int(m.group(1))
        if n in found:
            raise ParseError(f"duplicate <{prefix}{n}> item", raw=raw)
        found[n] = m.group(2)
    opened = re.findall(rf"<{p}(\d+)>", block, re.IGNORECASE)
    if len(opened) != len(found):
        raise ParseError(f"unclosed <{prefix}N> item", raw=raw)
    return found


def _clean(item: str) -> str:
    return _LABEL.sub("", item.strip(), count=1).strip()


def parse_tagged_list(text: str, item_tag_prefix: str, wrapper_tag: str) -> list[str]:
    """Extract ``<prefixN>`` items, in ascending N, from the ``<wrapper>`` block.

    Indices must run 1..n without gaps. Surrounding whitespace and a
    leading ``Question:`` label are stripped. Text outside the wrapper is
    ignored.
    """
    block = _block(text, wrapper_tag)
    found = _items(block, item_tag_prefix, text)
    if not found:
        raise ParseError(f"no <{item_tag_prefix}N> items inside <{wrapper_tag}>", raw=text)
    if sorted(found) != list(range(1, len(found) + 1)):
        raise ParseError(
            f"non-contiguous <{item_tag_prefix}N> indices {sorted(found)}", raw=text
        )
    return [_clean(found[i]) for i in range(1, len(found) + 1)]


def parse_joint_questions(text: str, n_concepts: int) -> list[list[str]]:
    """Parse ``<questions><conceptJ><questionI>..`` into one list per concept."""
    block = _block(text, "questions")
    concepts = _items(block, "concept", text)
    if sorted(concepts) != list(range(1, n_concepts + 1)):
        raise ParseError(
            f"expected concept blocks 1..{n_concepts}, found {sorted(concepts)}", raw=text
        )
    out = []
    for j in range(1, n_concepts + 1):
        items = _items(concepts[j], "question", text)
        if not items:
            raise ParseError(f"concept {j} has no questions", raw=text)
        if sorted(items) != list(range(1, len(items) + 1)):
            raise ParseError(f"concept {j}: non-contiguous question indices", raw=text)
        out.append([_clean(items[i]) for i in range(1, len(items) + 1)])
    return out


@dataclass
class ScoreParse:
    scores: dict[str, float]
    missing: list[str]
    justifications: dict[str, str] = field(default_factory=dict)


def parse_score_block(text: str, expected_criterion_ids: Sequence[str]) -> ScoreParse:
    """Read one score per expected criterion from the ``<evaluation>`` block.

    Item ``<questionN>`` maps to the N-th expected id. Entries with no
    readable ``Score:`` are reported in ``missing`` for the caller to impute.
    """
    block = _block(text, "evaluation")
    items = _items(block, "question", text)
    scores, missing, notes = {}, [], {}
    for pos, cid in enumerate(expected_criterion_ids, start=1):
        body = items.get(pos)
        m = _SCORE.search(body) if body is not None else None
        if m is None:
            missing.append(cid)
            continue
        scores[cid] = float(m.group(1))
        just = re.search(r"justification\s*:\s*(.*)", body, re.IGNORECASE | re.DOTALL)
        if just:
            notes[cid] = just.group(1).strip()
    return ScoreParse(scores, missing, notes)


_POSITIVE = {"yes", "faithful", "supported", "correct", "true"}
_NEGATIVE = {"no", "unfaithful", "unsupported", "incorrect", "false", "not"}


def parse_judgment(text: str) -> int:
    """Binary verdict: 1 for yes/faithful, 0 for no/unfaithful.

    Reads the ``<judgment>`` tag when present, else the whole reply. Replies
    carrying both polarities or neither raise ``ParseError``.
    """
    m = re.search(r"<judgment>(.*?)</judgment>", text, re.DOTALL | re.IGNORECASE)
    body = m.group(1) if m else text
    tokens = re.findall(r"[a-z]+", body.lower())
    pos = neg = False
    i = 0
    while i < len(tokens):
        # "not supported" is one negative verdict, not two polarities
        if tokens[i] in ("not", "no") and i + 1 < len(tokens) and tokens[i + 1] in _POSITIVE:
            neg = True
            i += 2
            continue
        pos |= tokens[i] in _POSITIVE
        neg |= tokens[i] in _NEGATIVE
        i += 1
    if pos == neg:
        raise ParseError("ambiguous or missing judgment", raw=text)
    return 1 if pos else 0
