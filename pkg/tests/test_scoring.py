import numpy as np
import pytest

from ucsjudge import prompts
from ucsjudge.criteria import build_ucs_from_lists
from ucsjudge.data import Dataset, Sample
from ucsjudge.errors import AlignmentError, FormatError, ScoringError
from ucsjudge.gateway import Gateway, GatewayError, mock_backend
from ucsjudge.planted import LanguageProfile, PlantedWorld, make_planted_dataset
from ucsjudge.scoring import (
    ALL_VARIANTS,
    CriteriaResponseVector,
    ScoringVariant,
    Status,
    aggregate_concepts,
    clamp_and_impute,
    read_score_table,
    score_dataset,
    score_sample,
    write_score_table,
)


@pytest.fixture
def ucs3(summary_task):
    return build_ucs_from_lists(summary_task, [("A", ["a1", "a2", "a3"]), ("B", ["b1", "b2"])])


def _vec(ucs, scores):
    return CriteriaResponseVector("s", ucs.checksum, np.array(scores, dtype=float), [Status.PARSED] * ucs.k)


def score_reply(values):
    return "<evaluation>" + "".join(
        f"<question{i}>Score: {v}\nJustification: x</question{i}>" for i, v in enumerate(values, 1)) + "</evaluation>"


def test_impute_concept_mean(ucs3):
    z, st = clamp_and_impute({"c1q1": 8, "c1q2": 6, "c2q1": 3, "c2q2": 4}, ucs3)
    assert z[2] == 7.0 and st[2] is Status.IMPUTED


def test_impute_midpoint_when_concept_empty(ucs3):
    z, st = clamp_and_impute({"c1q1": 1, "c1q2": 1, "c1q3": 1}, ucs3)
    assert list(z[3:]) == [5.0, 5.0] and st[3] is st[4] is Status.IMPUTED


def test_clamp(ucs3):
    z, st = clamp_and_impute({"c1q1": -1, "c1q2": 12, "c1q3": 4, "c2q1": 0, "c2q2": 10}, ucs3)
    assert list(z) == [0.0, 10.0, 4.0, 0.0, 10.0]
    assert [s.value for s in st] == ["clamped", "clamped", "parsed", "parsed", "parsed"]


def test_unknown_criterion_rejected(ucs3):
    with pytest.raises(AlignmentError):
        clamp_and_impute({"zz": 1}, ucs3)


def test_aggregate_examples(summary_task):
    ucs = build_ucs_from_lists(summary_task, [("A", ["1", "2", "3"])])
    assert list(aggregate_concepts(_vec(ucs, [2, 4, 6]), ucs).values) == [4.0]
    ucs2 = build_ucs_from_lists(summary_task, [("A", ["1", "2"]), ("B", ["3", "4", "5"])])
    assert list(aggregate_concepts(_vec(ucs2, [1, 3, 5, 5, 8]), ucs2).values) == [2.0, 6.0]
    assert list(aggregate_concepts(_vec(ucs2, [7] * 5), ucs2).values) == [7.0, 7.0]


def test_aggregate_checksum_mismatch(ucs3):
    v = _vec(ucs3, [1] * 5)
    v.ucs_checksum = "other"
    with pytest.raises(AlignmentError):
        aggregate_concepts(v, ucs3)


def test_call_counts_per_variant(script, summary_task, summary_sample):
    ucs = build_ucs_from_lists(summary_task, [(f"C{j}", ["q1", "q2"]) for j in range(5)])
    plan, gw = script(score_reply([7, 7]))
    score_sample(summary_sample, ucs, summary_task, ScoringVariant("per_concept", "per_concept"), gw)
    assert len(plan.requests) == 5
    plan, gw = script(score_reply([7] * 10))
    score_sample(summary_sample, ucs, summary_task, ScoringVariant("per_concept", "joint"), gw)
    assert len(plan.requests) == 1
    assert prompts.JOINT_SCORING_HEADER in plan.requests[0].user_prompt


def test_per_concept_prompt_interpolation(script, summary_task, summary_sample, ucs3):
    plan, gw = script(score_reply([5, 5, 5]))
    score_sample(summary_sample, ucs3, summary_task, ScoringVariant(), gw)
    user = plan.requests[0].user_prompt
    assert "The cat sat." in user and "A cat sat." in user
    assert "**Faithfulness Concept:** A" in user and "1. a1\n2. a2\n3. a3" in user
    assert "<question3>\nScore: [0-10]" in user


def test_score_12_clamped(script, summary_task, summary_sample, ucs3):
    _, gw = script(score_reply([12, 5, 5]), score_reply([5, 5]))
    vec = score_sample(summary_sample, ucs3, summary_task, ScoringVariant(), gw)
    assert vec.scores[0] == 10.0 and vec.status[0] is Status.CLAMPED


def test_unparseable_call_imputed_after_repair(script, summary_task, summary_sample, ucs3):
    plan, gw = script("junk", "junk again", score_reply([2, 4]))
    vec = score_sample(summary_sample, ucs3, summary_task, ScoringVariant(), gw)
    assert len(plan.requests) == 3
    assert list(vec.scores[:3]) == [5.0] * 3 and all(s is Status.IMPUTED for s in vec.status[:3])
    assert list(vec.scores[3:]) == [2.0, 4.0]


def test_variant_parse_and_labels():
    v = ScoringVariant.parse("per-concept/joint")
    assert (v.generation_mode, v.scoring_mode, v.label) == ("per_concept", "joint", "per-concept/joint")
    assert len(set(ALL_VARIANTS)) == 4
    with pytest.raises(ValueError):
        ScoringVariant.parse("both")


@pytest.fixture
def planted():
    world = PlantedWorld(languages={l: LanguageProfile(1.0) for l in ("en", "de", "fr", "ja", "zh")})
    task = world.task()
    return world, task, world.reference_ucs(task)


def test_score_dataset_five_languages_one_checksum(planted):
    world, task, ucs = planted
    ds = make_planted_dataset(task, {l: 4 for l in ("en", "de", "fr", "ja", "zh")})
    table = score_dataset(ds, ucs, task, ScoringVariant(), Gateway(mock_backend(world)))
    assert {r.ucs_checksum for r in table.records} == {ucs.checksum}
    assert table.languages() == ["de", "en", "fr", "ja", "zh"]
    assert table.ids == sorted(table.ids)
    assert set(table.summary) == set(table.languages())


def test_request_count_200_by_5(planted):
    world, task, ucs = planted
    ds = make_planted_dataset(task, {"en": 200})
    gw = Gateway(mock_backend(world))
    score_dataset(ds, ucs, task, ScoringVariant(), gw)
    assert gw.stats.requests == 1000


def test_cached_rerun_identical(planted, tmp_path):
    world, task, ucs = planted
    ds = make_planted_dataset(task, {"en": 10, "de": 10})
    paths = []
    for i in range(2):
        gw = Gateway(mock_backend(world), cache_dir=tmp_path / "cache")
        table = score_dataset(ds, ucs, task, ScoringVariant(), gw)
        write_score_table(table, tmp_path / f"{i}.jsonl")
        paths.append((tmp_path / f"{i}.jsonl").read_bytes())
    assert gw.stats.backend_calls == 0 and paths[0] == paths[1]


def test_score_table_round_trip(planted, tmp_path):
    world, task, ucs = planted
    table = score_dataset(make_planted_dataset(task, {"en": 6}), ucs, task, ScoringVariant(),
                          Gateway(mock_backend(world)))
    write_score_table(table, tmp_path / "s.jsonl")
    back = read_score_table(tmp_path / "s.jsonl")
    assert np.array_equal(back.Z(), table.Z()) and np.array_equal(back.S(), table.S())
    assert np.array_equal(back.labels(), table.labels())
    (tmp_path / "bad.jsonl").write_text('{"sample_id": 1}\n')
    with pytest.raises(FormatError):
        read_score_table(tmp_path / "bad.jsonl")


def test_failure_threshold(summary_task, ucs3):
    def plan_one_fails(req):
        if "s0." in req.user_prompt:
            raise GatewayError("boom")
        return score_reply([5, 5, 5])

    def plan_many_fail(req):
        if any(f"s{i}." in req.user_prompt for i in range(5)):
            raise GatewayError("boom")
        return score_reply([5, 5, 5])

    samples = tuple(Sample(f"s{i}", "en", {"article": f"s{i}.", "summary": "b"}, i % 2) for i in range(20))
    ds = Dataset("sum", samples, frozenset(["en"]))
    table = score_dataset(ds, ucs3, summary_task, ScoringVariant(),
                          Gateway(mock_backend(plan_one_fails), concurrency=1))
    assert list(table.failures) == ["s0"] and len(table.records) == 19
    with pytest.raises(ScoringError):
        score_dataset(ds, ucs3, summary_task, ScoringVariant(),
                      Gateway(mock_backend(plan_many_fail), concurrency=1))
    table = score_dataset(ds, ucs3, summary_task, ScoringVariant(),
                          Gateway(mock_backend(plan_many_fail), concurrency=1), max_failure_fraction=0.5)
    assert sorted(table.failures) == [f"s{i}" for i in range(5)]
    assert len(table.records) == 15
