"""Planted-signal world: a mock LLM whose criterion scores follow a known model.

Score for criterion i of a sample with label y in language l::

    z_i = clamp(round(5 + a_i * (2y - 1) + b_l(i) + sigma_l * s_mode * eps), 0, 10)

where ``a_i`` is the signal amplitude of the criterion's concept, ``b_l(i)``
a fixed per-criterion bias drawn from U[-bias_l, bias_l], ``sigma_l`` the
language noise level and ``s_mode`` a multiplier for joint scoring calls.
``eps`` is a standard normal derived from a hash of (seed, sample id,
criterion), so every response is a pure function of the request text.

Samples carry their identity inside the text as
``[planted id=<id> lang=<lang> y=<0|1>]``.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm

from . import prompts
from .data import Dataset, PromptFamily, Sample, TaskSpec
from .errors import ConfigurationError
from .gateway import CompletionRequest
from .reference_criteria import REFERENCE

_MARKER = re.compile(r"\[planted ([^\]]*)\]")
_STD = NormalDist()


@dataclass(frozen=True)
class LanguageProfile:
    noise: float = 1.0
    bias: float = 0.0
    # per-concept amplitudes overriding the world's; None keeps the world's
    signal: tuple[float, ...] | None = None


def marker(sample_id: str, language: str, label: int) -> str:
    return f"[planted id={sample_id} lang={language} y={label}]"


def parse_marker(text: str) -> tuple[str, str, int]:
    m = _MARKER.search(text)
    if m is None:
        raise ConfigurationError("request carries no planted sample marker")
    fields = dict(part.split("=", 1) for part in m.group(1).split() if "=" in part)
    sid, lang, y = fields.get("id"), fields.get("lang"), fields.get("y")
    if not sid or not lang or y not in ("0", "1"):
        raise ConfigurationError(f"malformed planted marker {m.group(0)!r}")
    return sid, lang, int(y)


def _unit(key: str) -> float:
    h = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return (int.from_bytes(h, "big") + 0.5) / 2.0**64


def hashed_normal(*parts) -> float:
    return _STD.inv_cdf(_unit("|".join(map(str, parts))))


def discretize(x):
    """round-half-up then clamp to [0, 10]."""
    return np.clip(np.floor(np.asarray(x) + 0.5), 0.0, 10.0)


@dataclass
class PlantedWorld:
    family: PromptFamily = PromptFamily.SUMMARY_FAITHFULNESS
    signal: tuple[float, ...] = (3.0, 3.0, 3.0, 3.0, 3.0)
    languages: Mapping[str, LanguageProfile] = field(default_factory=lambda: {"en": LanguageProfile()})
    joint_noise_factor: float = 1.0
    # uninformative questions per concept emitted under joint generation
    joint_generic_questions: int = 0
    questions_per_concept: int = 6
    aggregator_threshold: float = 5.0
    zero_shot_accuracy: float = 0.75
    seed: int = 0

    def __post_init__(self):
        self.family = PromptFamily(self.family)
        ref = REFERENCE[self.family]
        if len(self.signal) > len(ref):
            raise ConfigurationError(f"at most {len(ref)} planted concepts")
        if not 0 <= self.joint_generic_questions <= self.questions_per_concept:
            raise ConfigurationError("joint_generic_questions out of range")
        self.concept_names = list(ref)[: len(self.signal)]
        self._pc_questions = {
            name: list(ref[name])[: self.questions_per_concept] for name in self.concept_names
        }
        self._joint_questions = {}
        unit = "answer" if self.family is PromptFamily.EVIDENCE_SUPPORT else "summary"
        keep = self.questions_per_concept - self.joint_generic_questions
        for name in self.concept_names:
            generic = [
                f"Overall, how acceptable is the {unit} with respect to {name.lower()} (aspect {i})?"
                for i in range(1, self.joint_generic_questions + 1)
            ]
            self._joint_questions[name] = self._pc_questions[name][:keep] + generic
        # (concept name, question) -> (concept index, informative?)
        self._lookup = {}
        for j, name in enumerate(self.concept_names):
            for q in self._pc_questions[name]:
                self._lookup[(name, q)] = (j, True)
            for q in self._joint_questions[name][keep:]:
                self._lookup[(name, q)] = (j, False)

    # ---- model ---------------------------------------------------------

    def profile(self, language: str) -> LanguageProfile:
        try:
            return self.languages[language]
        except KeyError:
            raise ConfigurationError(f"planted world has no profile for language {language!r}") from None

    def amplitude(self, language: str, concept: str, question: str) -> float:
        try:
            j, informative = self._lookup[(concept, question)]
        except KeyError:
            raise ConfigurationError(f"unknown planted criterion {concept!r}: {question[:60]!r}") from None
        if not informative:
            return 0.0
        sig = self.profile(language).signal or self.signal
        return float(sig[j])

    def bias(self, language: str, concept: str, question: str) -> float:
        b = self.profile(language).bias
        if b == 0:
            return 0.0
        return b * (2.0 * _unit(f"bias|{self.seed}|{language}|{concept}|{question}") - 1.0)

    def score(self, sample_id: str, language: str, label: int, concept: str, question: str,
              joint: bool) -> float:
        prof = self.profile(language)
        sigma = prof.noise * (self.joint_noise_factor if joint else 1.0)
        mu = 5.0 + self.amplitude(language, concept, question) * (2 * label - 1)
        mu += self.bias(language, concept, question)
        eps = hashed_normal("eps", self.seed, sample_id, concept, question)
        return float(discretize(mu + sigma * eps))

    def criterion_means(self, language: str, ucs) -> tuple[np.ndarray, np.ndarray]:
        """Per-criterion (mean offset from 5 at y=1, bias) aligned with ``ucs.criteria``."""
        names = {c.id: c.name for c in ucs.concepts}
        amp = np.array([self.amplitude(language, names[q.concept_id], q.question) for q in ucs.criteria])
        bias = np.array([self.bias(language, names[q.concept_id], q.question) for q in ucs.criteria])
        return amp, bias

    # ---- mock plan -----------------------------------------------------

    def __call__(self, request: CompletionRequest) -> str:
        user = request.user_prompt
        if prompts.AGGREGATION_HEADER in user:
            return self._aggregate(user)
        if "<evaluation>" in user:
            return self._score_block(user)
        if "**Concepts:**" in user and "<questions>" in user:
            return self._joint_questions_block(user)
        if "<questions>" in user:
            return self._questions_block(user)
        if "<concepts>" in user:
            body = "\n".join(f"<concept{i}>{n}</concept{i}>" for i, n in enumerate(self.concept_names, 1))
            return f"<concepts>\n{body}\n</concepts>"
        if "<judgment>" in user:
            return self._zero_shot(user)
        raise ConfigurationError("planted world cannot classify request")

    def _questions_block(self, user):
        m = re.search(r"concept '(.*?)'\. ", user)
        if m is None or m.group(1) not in self._pc_questions:
            raise ConfigurationError("question request for an unknown planted concept")
        qs = self._pc_questions[m.group(1)]
        body = "\n".join(f"<question{i}>\nQuestion: {q}\n</question{i}>" for i, q in enumerate(qs, 1))
        return f"<questions>\n{body}\n</questions>"

    def _joint_questions_block(self, user):
        listing = user.split("**Concepts:**\n", 1)[1].split("\n\n", 1)[0]
        names = [re.sub(r"^\d+\.\s*", "", line) for line in listing.splitlines()]
        blocks = []
        for j, name in enumerate(names, 1):
            if name not in self._joint_questions:
                raise ConfigurationError(f"unknown planted concept {name!r}")
            qs = "\n".join(
                f"<question{i}>Question: {q}</question{i}>" for i, q in enumerate(self._joint_questions[name], 1)
            )
            blocks.append(f"<concept{j}>\n{qs}\n</concept{j}>")
        return "<questions>\n" + "\n".join(blocks) + "\n</questions>"

    def _score_block(self, user):
        sid, lang, y = parse_marker(user)
        joint = prompts.JOINT_SCORING_HEADER in user
        items = []
        if joint:
            section = user.split(prompts.JOINT_SCORING_HEADER + "\n", 1)[1].split("\n\nFor each question", 1)[0]
            for chunk in section.split("\n\n"):
                head, *lines = chunk.splitlines()
                concept = re.sub(r"^Concept \d+:\s*", "", head)
                items.extend((concept, re.sub(r"^\d+\.\s", "", ln)) for ln in lines)
        else:
            concept = re.search(r"Concept:\*\* (.*)\n", user).group(1)
            section = user.split("**Evaluation Questions:**\n", 1)[1].split("\n\n", 1)[0]
            items = [(concept, re.sub(r"^\d+\.\s", "", ln)) for ln in section.splitlines()]
        out = []
        for i, (concept, q) in enumerate(items, 1):
            s = self.score(sid, lang, y, concept, q, joint)
            out.append(f"<question{i}>\nScore: {s:g}\nJustification: planted\n</question{i}>")
        return "<evaluation>\n" + "\n".join(out) + "\n</evaluation>"

    def _aggregate(self, user):
        section = user.split(prompts.AGGREGATION_HEADER, 1)[1]
        scores = [float(x) for x in re.findall(r"Score: (-?\d+(?:\.\d+)?)", section)]
        if not scores:
            raise ConfigurationError("aggregation request without scores")
        verdict = "yes" if float(np.mean(scores)) >= self.aggregator_threshold else "no"
        return f"<judgment>{verdict}</judgment>"

    def _zero_shot(self, user):
        sid, lang, y = parse_marker(user)
        correct = _unit(f"zs|{self.seed}|{sid}") < self.zero_shot_accuracy
        label = y if correct else 1 - y
        return f"<judgment>{'yes' if label else 'no'}</judgment>"

    # ---- helpers ---------------------------------------------------------

    def task(self, task_id: str | None = None) -> TaskSpec:
        n = self.questions_per_concept
        return TaskSpec.for_family(
            self.family, task_id=task_id or f"planted-{self.family.value}",
            concept_count_range=(1, max(5, len(self.signal))), questions_per_concept=(n, n),
        )

    def reference_ucs(self, task: TaskSpec | None = None, joint: bool = False):
        from .criteria import build_ucs_from_lists

        table = self._joint_questions if joint else self._pc_questions
        return build_ucs_from_lists(task or self.task(), [(n, table[n]) for n in self.concept_names])

    def bayes_balanced_accuracy(self, language: str, ucs, n: int = 20000, seed: int = 0,
                                joint: bool = False) -> float:
        """Balanced accuracy of the likelihood-ratio rule under the planted model (Monte Carlo).

        Uses the exact per-criterion pmf of the discretised normal, so the
        rule is the Bayes-optimal one for balanced accuracy.
        """
        amp, bias = self.criterion_means(language, ucs)
        prof = self.profile(language)
        sigma = prof.noise * (self.joint_noise_factor if joint else 1.0)
        rng = np.random.default_rng(seed)
        y = np.repeat([0, 1], n // 2)
        mu = 5.0 + amp[None, :] * (2 * y[:, None] - 1) + bias[None, :]
        z = discretize(mu + sigma * rng.standard_normal(mu.shape))
        llr = (_log_pmf(z, 5.0 + amp + bias, sigma) - _log_pmf(z, 5.0 - amp + bias, sigma)).sum(axis=1)
        pred = (llr >= 0).astype(int)
        tpr = pred[y == 1].mean()
        tnr = 1 - pred[y == 0].mean()
        return float((tpr + tnr) / 2)


def _log_pmf(z, mu, sigma):
    hi = np.where(z >= 10, np.inf, z + 0.5)
    lo = np.where(z <= 0, -np.inf, z - 0.5)
    p = norm.cdf((hi - mu) / sigma) - norm.cdf((lo - mu) / sigma)
    return np.log(np.maximum(p, 1e-300))


def make_planted_dataset(task: TaskSpec, counts: Mapping[str, int], seed: int = 0,
                         positive_rate: float = 0.5, prefix: str = "") -> Dataset:
    """Balanced synthetic samples whose text embeds their planted identity."""
    rng = np.random.default_rng(seed)
    samples = []
    for lang in sorted(counts):
        n = counts[lang]
        n_pos = int(round(n * positive_rate))
        labels = rng.permutation(np.array([1] * n_pos + [0] * (n - n_pos)))
        for i, y in enumerate(labels):
            sid = f"{prefix}{lang}-{i:05d}"
            fields = {}
            for role in task.field_roles:
                fields[role] = f"{role} text for {sid} ({lang})."
            ans = task.slots["answer_segment"]
            fields[ans] = f"{marker(sid, lang, int(y))} {fields[ans]}"
            samples.append(Sample(sid, lang, fields, int(y)))
    return Dataset(task.task_id, tuple(samples), frozenset(counts))


def planted_criterion_scores(labels: np.ndarray, amplitudes: Sequence[float], noise: float = 1.0,
                             bias: Sequence[float] | float = 0.0, rng=None) -> np.ndarray:
    """Vectorised draw of criterion-level scores from the same planted model (no gateway)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    labels = np.asarray(labels)
    amp = np.asarray(amplitudes, dtype=np.float64)
    mu = 5.0 + amp[None, :] * (2 * labels[:, None] - 1) + np.asarray(bias, dtype=np.float64)
    return discretize(mu + noise * rng.standard_normal(mu.shape))


def concept_amplitudes(per_concept: Sequence[float], questions_per_concept: int) -> np.ndarray:
    return np.repeat(np.asarray(per_concept, dtype=np.float64), questions_per_concept)


def bias_vector(k: int, max_bias: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-max_bias, max_bias, k)


def hashed_bias(key: str, max_bias: float) -> float:
    return max_bias * (2.0 * _unit(key) - 1.0)


__all__ = [
    "LanguageProfile", "PlantedWorld", "bias_vector", "concept_amplitudes", "discretize",
    "make_planted_dataset", "marker", "parse_marker", "planted_criterion_scores",
]

