"""LLM-side verdicts: aggregation over criterion scores, and the zero-shot judge."""

from __future__ import annotations

from .. import prompts
from ..criteria import CriteriaSet
from ..data import Sample, TaskSpec
from ..errors import AggregationError, AlignmentError, ParseError
from ..gateway import Gateway
from ..parsing import parse_judgment
from .model import Verdict


def _judge(gateway: Gateway, template: prompts.Template) -> int:
    first = gateway.ask(template.system, template.user)
    try:
        return parse_judgment(first.text)
    except ParseError:
        retry = gateway.ask(template.system, template.user + prompts.REPAIR_SUFFIX)
        try:
            return parse_judgment(retry.text)
        except ParseError as exc:
            raise AggregationError("no usable yes/no judgment after repair", raw=retry.text) from exc


def llm_aggregate(sample: Sample, ucs: CriteriaSet, response_vector, task: TaskSpec,
                  gateway: Gateway, include_sample_text: bool = True) -> Verdict:
    """Ask the LLM for a final verdict given every criterion and its score.

    Criterion-level scores are rendered (all k of them), not concept means.
    """
    if response_vector.ucs_checksum != ucs.checksum:
        raise AlignmentError("response vector does not match the criteria set")
    scores = list(response_vector.scores)
    if len(scores) != ucs.k:
        raise AlignmentError(f"expected {ucs.k} scores, got {len(scores)}")
    context = answer = None
    if include_sample_text:
        context = task.slot_text(sample, "context")
        answer = task.slot_text(sample, "answer_segment")
    template = prompts.aggregation_prompt(
        task.prompt_family, context, answer,
        [(q.question, float(s)) for q, s in zip(ucs.criteria, scores)],
    )
    label = _judge(gateway, template)
    return Verdict(sample.id, None, label, "llm_aggregated")


def zero_shot_judge(sample: Sample, task: TaskSpec, gateway: Gateway) -> Verdict:
    template = prompts.zero_shot_prompt(
        task.prompt_family, task.slot_text(sample, "context"), task.slot_text(sample, "answer_segment")
    )
    label = _judge(gateway, template)
    return Verdict(sample.id, None, label, "zero_shot")
