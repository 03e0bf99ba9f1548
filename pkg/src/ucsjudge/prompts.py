"""Prompt templates.

The concept-generation, question-generation and question-application
templates for both prompt families are reproduced verbatim. Templates
marked SYNTHESIZED (joint generation, joint scoring, LLM aggregation,
zero-shot judging, repair suffixes) are authored for this package.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .data import PromptFamily


@dataclass(frozen=True)
class Template:
    system: str
    user: str


_PLACEHOLDER = re.compile(r"\{(context|answer_segment|concept|questions|questions_format_example)\}")


def render(template: str, **values: str) -> str:
    """Single-pass placeholder substitution; braces inside values are never re-expanded."""

    def sub(match):
        key = match.group(1)
        if key not in values:
            return match.group(0)
        return values[key]

    return _PLACEHOLDER.sub(sub, template)


CONCEPT_GENERATION = {
    PromptFamily.EVIDENCE_SUPPORT: Template(
        system=(
            "You are an evidence-grounding evaluator. Your goal is to identify key verification "
            "concepts for checking whether answers are supported by evidence."
        ),
        user=(
            "Generate 3–5 distinct verification concepts that are essential for evaluating whether "
            "an answer is supported by evidence passages.\n\nGuidelines:\n- Concepts should cover "
            "different aspects of evidence grounding (e.g., factual accuracy, completeness, "
            "specificity, consistency, source attribution).\n- Each concept should be general "
            "enough to apply across different topics and domains.\n- Concepts should target "
            "different failure modes where answers might not be properly supported.\n- Keep "
            "concepts concise (2–5 words each).\n\nReturn exactly this format:\n\n<concepts>\n"
            "<concept1>[Concept name]</concept1>\n<concept2>[Concept name]</concept2>\n...\n"
            "</concepts>"
        ),
    ),
    PromptFamily.SUMMARY_FAITHFULNESS: Template(
        system=(
            "You are an expert factual faithfulness evaluator. Your goal is to identify key "
            "faithfulness concepts for checking whether summaries are factually faithful to their "
            "source documents."
        ),
        user=(
            "Generate 3–5 distinct faithfulness concepts that are essential for evaluating whether "
            "a summary is factually faithful to its source document.\n\nGuidelines:\n- Concepts "
            "should cover different aspects of factual faithfulness (e.g., factual accuracy, "
            "contradiction detection, unsupported claims, misrepresentation, distorted certainty)."
            "\n- Each concept should be general enough to apply across different topics and "
            "domains.\n- Concepts should target different failure modes where summaries might not "
            "be properly supported by source documents.\n- Keep concepts concise (2–5 words each)."
            "\n\nReturn exactly this format:\n\n<concepts>\n<concept1>[Concept name]</concept1>\n"
            "<concept2>[Concept name]</concept2>\n...\n</concepts>"
        ),
    ),
}

QUESTION_GENERATION = {
    PromptFamily.EVIDENCE_SUPPORT: Template(
        system=(
            "You are an evidence-grounding evaluator. Your goal is to generate reusable "
            "verification questions for checking whether an answer is supported by retrieved "
            "evidence passages."
        ),
        user=(
            "**Verification Concept:** {concept}Generate 4–6 clear, diverse, and reusable "
            "evaluation questions for verifying whether an answer is supported by evidence with "
            "respect to the concept '{concept}'. These questions will later be scored on a **0–10 "
            "scale indicating degree of evidence support**.Guidelines:- Focus on whether an "
            "**answer is supported by evidence passages**.- Questions must be reusable across "
            "different topics and documents.- Cover different **evidence-grounding failure modes** "
            "(e.g., unsupported claims, contradictions, overgeneralization, specificity mismatch)."
            "- Each question should be written to support **graded (partial-to-full) scoring**, "
            "not just yes/no judgments.- Each question should target a distinct verification "
            "angle.- Wording should be concise and evaluative (e.g., \"To what extent is the claim "
            "supported by the evidence…\", \"How well do the passages justify…\").Return exactly "
            "this format:<questions><question1>Question: [Universal evaluation question]"
            "</question1>...</questions>"
        ),
    ),
    PromptFamily.SUMMARY_FAITHFULNESS: Template(
        system=(
            "You are an expert factual faithfulness evaluator. Your role is to construct "
            "high-quality, reusable evaluation questions that test whether summaries are factually "
            "faithful to their source documents."
        ),
        user=(
            "**Faithfulness Concept:** {concept}\n\nGenerate exactly 6 clear, diverse, and reusable "
            "evaluation questions for the faithfulness concept '{concept}'. Each question must "
            "require direct comparison between a summary and its source document to assess factual "
            "support, contradiction, or distortion under this concept.\n\nAnnotation Guidance to "
            "Apply While Writing Questions:\n- The question must be answerable ONLY by checking the "
            "source document.\n- The question should detect one of the following: unsupported "
            "claims, contradiction, misrepresentation, distorted certainty, or incorrect "
            "attribution.\n- The question must not depend on surface form (grammar, fluency, style, "
            "or verbosity).\n\nGuidelines:\n- Every question must explicitly or implicitly require "
            "verification against the source document.\n- Do NOT ask about readability, grammar, "
            "fluency, writing quality, or length.\n- Questions must be context-independent and "
            "reusable across domains.\n- All questions must stay strictly within the given "
            "faithfulness concept, but vary the factual scenario or common error pattern being "
            "tested.\n- Avoid redundancy: each question should target a distinct factual failure "
            "mode.\n- Wording must be concise, unambiguous, and evaluative (e.g., \"Does the "
            "summary…\" or \"To what extent does the summary…\").\n\nReturn exactly this format:"
            "\n\n<questions>\n<question1>\nQuestion: [Universal evaluation question]\n</question1>"
            "\n\n<question2>\nQuestion: [Universal evaluation question]\n</question2>\n\n"
            "<question3>\nQuestion: [Universal evaluation question]\n</question3>\n\n<question4>\n"
            "Question: [Universal evaluation question]\n</question4>\n\n<question5>\nQuestion: "
            "[Universal evaluation question]\n</question5>\n\n<question6>\nQuestion: [Universal "
            "evaluation question]\n</question6>\n</questions>"
        ),
    ),
}

QUESTION_APPLICATION = {
    PromptFamily.EVIDENCE_SUPPORT: Template(
        system=(
            "You are an evidence-grounding evaluator. Your task is to determine whether an answer "
            "is supported by the provided evidence passages."
        ),
        user=(
            "**Evidence Passages:**\n{context}\n\n**Answer:** {answer_segment}\n"
            "**Verification Concept:** {concept}\n\n**Evaluation Questions:**\n{questions}\n\n"
            "For each question, assign a score from **0--10** indicating how well the evidence "
            "supports the answer with respect to that question.\n\nBase all judgments strictly on "
            "the provided evidence passages. Do not assume any external knowledge.\n\nReturn "
            "exactly this format:\n\n<evaluation>\n{questions_format_example}\n</evaluation>"
        ),
    ),
    PromptFamily.SUMMARY_FAITHFULNESS: Template(
        system=(
            "You are an expert factual faithfulness evaluator. Your task is to score a summary "
            "against its source document using predefined faithfulness evaluation questions."
        ),
        user=(
            "**Source Document:**\n{context}\n\n**Summary:** {answer_segment}\n\n**Faithfulness "
            "Concept:** {concept}\n\n**Evaluation Questions:**\n{questions}\n\nFor each question, "
            "evaluate whether the summary is factually faithful to the source document under that "
            "question.\n\nWhile scoring, explicitly consider whether the summary:\n- Contains "
            "information not stated in or directly inferable from the source\n- Contradicts the "
            "source\n- Introduces unsupported details\n- Misrepresents entities, quantities, "
            "relationships, or certainty\n- Overgeneralizes, narrows, or distorts scope\n\nAssign a "
            "score from 0–10 for each question:\n- 0 = Completely unfaithful (clear contradiction, "
            "fabrication, or unsupported claim)\n- 10 = Completely faithful (fully supported, "
            "correctly represented, no distortion)\n\nRules:\n- Base every score strictly on "
            "evidence from the source document.\n- Ignore grammar, fluency, style, and summary "
            "length.\n- Penalize both direct hallucinations and subtle distortions of meaning or "
            "certainty.\n\nProvide a brief, evidence-based justification for each score.\n\n"
            "Return exactly this format:\n\n<evaluation>\n{questions_format_example}\n</evaluation>"
        ),
    ),
}

# ---- SYNTHESIZED templates -------------------------------------------------

_SLOT_LABELS = {
    PromptFamily.EVIDENCE_SUPPORT: ("**Evidence Passages:**", "**Answer:**", "answer", "evidence passages"),
    PromptFamily.SUMMARY_FAITHFULNESS: ("**Source Document:**", "**Summary:**", "summary", "source document"),
}

JOINT_SCORING_HEADER = "**Evaluation Questions (all concepts):**"
AGGREGATION_HEADER = "**Criteria and scores (0-10):**"

REPAIR_SUFFIX = (
    "\n\nYour previous reply could not be parsed. Reply with only the tagged block, in exactly "
    "the format requested above, and nothing else."
)


def range_repair_suffix(found: int, lo: int, hi: int, what: str) -> str:
    want = f"exactly {lo}" if lo == hi else f"between {lo} and {hi}"
    return (
        f"\n\nYour previous reply contained {found} {what}; {want} are required. Reply again with "
        "only the tagged block."
    )


def count_phrase(lo: int, hi: int) -> str:
    return f"exactly {lo}" if lo == hi else f"{lo}–{hi}"


def concept_prompt(family: PromptFamily, description: str = "") -> Template:
    t = CONCEPT_GENERATION[family]
    if description:
        return Template(t.system, f"**Task:** {description}\n\n{t.user}")
    return t


def question_prompt(family: PromptFamily, concept: str) -> Template:
    t = QUESTION_GENERATION[family]
    return Template(t.system, render(t.user, concept=concept))


def joint_question_prompt(family: PromptFamily, concepts: Sequence[str], lo: int, hi: int) -> Template:
    """SYNTHESIZED: all concepts' questions requested in one call."""
    t = QUESTION_GENERATION[family]
    _, _, unit, source = _SLOT_LABELS[family]
    listing = "\n".join(f"{i}. {name}" for i, name in enumerate(concepts, 1))
    blocks = "\n".join(
        f"<concept{i}>\n<question1>Question: [Universal evaluation question]</question1>\n...\n</concept{i}>"
        for i in range(1, len(concepts) + 1)
    )
    user = (
        f"**Concepts:**\n{listing}\n\n"
        f"For each concept above, generate {count_phrase(lo, hi)} clear, diverse, and reusable "
        f"evaluation questions for checking whether an {unit} is faithful to its {source} with "
        "respect to that concept. Questions must be reusable across topics, target distinct "
        "failure modes, and support graded 0–10 scoring.\n\n"
        f"Return exactly this format:\n\n<questions>\n{blocks}\n</questions>"
    )
    return Template(t.system, user)


def format_questions(questions: Sequence[str], start: int = 1) -> str:
    return "\n".join(f"{i}. {q}" for i, q in enumerate(questions, start))


def format_example(n: int) -> str:
    return "\n".join(
        f"<question{i}>\nScore: [0-10]\nJustification: [brief justification]\n</question{i}>"
        for i in range(1, n + 1)
    )


def scoring_prompt(family: PromptFamily, context: str, answer: str, concept: str,
                   questions: Sequence[str]) -> Template:
    t = QUESTION_APPLICATION[family]
    return Template(
        t.system,
        render(
            t.user,
            context=context,
            answer_segment=answer,
            concept=concept,
            questions=format_questions(questions),
            questions_format_example=format_example(len(questions)),
        ),
    )


def joint_scoring_prompt(family: PromptFamily, context: str, answer: str,
                         grouped: Sequence[tuple[str, Sequence[str]]]) -> Template:
    """SYNTHESIZED: every concept's questions scored in a single call, numbered globally."""
    t = QUESTION_APPLICATION[family]
    ctx_label, ans_label, unit, source = _SLOT_LABELS[family]
    sections = []
    n = 0
    for j, (concept, questions) in enumerate(grouped, 1):
        sections.append(f"Concept {j}: {concept}\n{format_questions(questions, start=n + 1)}")
        n += len(questions)
    user = (
        f"{ctx_label}\n{{context}}\n\n{ans_label} {{answer_segment}}\n\n"
        f"{JOINT_SCORING_HEADER}\n" + "\n\n".join(sections) + "\n\n"
        f"For each question, assign a score from 0–10 indicating how well the {source} supports "
        f"the {unit} with respect to that question (0 = clearly unsupported or contradicted, "
        "10 = fully supported).\n\nBase all judgments strictly on the provided text.\n\n"
        "Return exactly this format:\n\n<evaluation>\n{questions_format_example}\n</evaluation>"
    )
    return Template(t.system, render(user, context=context, answer_segment=answer,
                                     questions_format_example=format_example(n)))


def aggregation_prompt(family: PromptFamily, context: str | None, answer: str | None,
                       scored: Sequence[tuple[str, float]]) -> Template:
    """SYNTHESIZED: final verdict from the criteria and their scores."""
    ctx_label, ans_label, unit, source = _SLOT_LABELS[family]
    system = (
        f"You are an expert evaluator. Decide whether the {unit} is faithful to the {source}, "
        "using the evaluation criteria and the scores already assigned to them."
    )
    parts = []
    if context is not None:
        parts.append(f"{ctx_label}\n{context}\n\n{ans_label} {answer}\n")
    lines = [f"{i}. {q}\n   Score: {_fmt_score(s)}" for i, (q, s) in enumerate(scored, 1)]
    parts.append(AGGREGATION_HEADER + "\n" + "\n".join(lines))
    parts.append(
        f"Is the {unit} faithful to the {source}? Return exactly this format:\n\n"
        "<judgment>yes</judgment>\nor\n<judgment>no</judgment>"
    )
    return Template(system, "\n\n".join(parts))


def zero_shot_prompt(family: PromptFamily, context: str, answer: str) -> Template:
    """SYNTHESIZED: direct faithfulness question with no intermediate structure."""
    ctx_label, ans_label, unit, source = _SLOT_LABELS[family]
    system = f"You are an expert evaluator. Judge whether the {unit} is faithful to the {source}."
    user = (
        f"{ctx_label}\n{context}\n\n{ans_label} {answer}\n\n"
        f"Is the {unit} fully supported by the {source}, without contradictions or unsupported "
        "details? Return exactly this format:\n\n<judgment>yes</judgment>\nor\n<judgment>no</judgment>"
    )
    return Template(system, user)


def _fmt_score(value: float) -> str:
    return f"{value:g}"

