"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line; the lines are
repeated in the terminal summary.
"""

import json
import re
import time
from fractions import Fraction

import numpy as np
import pytest

from ucsjudge import analysis, cli, prompts, transfer
from ucsjudge.analysis import balanced_accuracy, spearman
from ucsjudge.criteria import build_ucs_from_lists
from ucsjudge.data import PromptFamily, TaskSpec
from ucsjudge.errors import MetricError, ParseError
from ucsjudge.gateway import Gateway, mock_backend
from ucsjudge.parsing import parse_joint_questions, parse_score_block, parse_tagged_list
from ucsjudge.planted import (
    LanguageProfile,
    PlantedWorld,
    bias_vector,
    concept_amplitudes,
    make_planted_dataset,
    planted_criterion_scores,
)
from ucsjudge.scoring import (
    CriteriaResponseVector,
    ScoringVariant,
    Status,
    aggregate_concepts,
    score_dataset,
)
from ucsjudge.transfer import (
    ForestConfig,
    feature_importances,
    fit_knn,
    fit_logistic,
    fit_random_forest,
    llm_aggregate,
    predict_proba,
)

TASK = TaskSpec.for_family(PromptFamily.SUMMARY_FAITHFULNESS, task_id="acceptance")
TRANSFER_LANGS = {"en": LanguageProfile(1.0), "tgt": LanguageProfile(1.5, bias=1.0)}


def _ba(model, X, y):
    return balanced_accuracy(y, transfer.labels_from_proba(predict_proba(model, X)))


# ---- 1 ------------------------------------------------------------------

def test_criterion_01_aggregation_exact(verdict):
    rng = np.random.default_rng(1)
    cases = []
    for case in range(1000):
        sizes = rng.integers(1, 8, rng.integers(1, 7))
        ucs = build_ucs_from_lists(
            TASK, [(f"C{j}", [f"{case}.{j}.{i}?" for i in range(n)]) for j, n in enumerate(sizes)])
        z = rng.uniform(0, 10, ucs.k)
        if case % 3 == 0:
            z = np.round(z)
        cases.append((ucs, z, sizes))
    t0 = time.perf_counter()
    worst = 0.0
    for ucs, z, sizes in cases:
        vec = CriteriaResponseVector("x", ucs.checksum, z, [Status.PARSED] * ucs.k)
        s = aggregate_concepts(vec, ucs).values
        pos = 0
        for j, n in enumerate(sizes):
            vals = [float(v) for v in z[pos: pos + n]]
            pos += n
            worst = max(worst, abs(s[j] - sum(vals) / len(vals)))
    elapsed = time.perf_counter() - t0
    verdict(1, worst <= 1e-12 and elapsed < 1.0, f"max |err| {worst:.1e} over 1000 pairs, {elapsed:.2f}s")


# ---- 2 ------------------------------------------------------------------

def brute_ba(y, p):
    tp = fn = tn = fp = 0
    for a, b in zip(y, p):
        if a == 1 and b == 1:
            tp += 1
        elif a == 1:
            fn += 1
        elif b == 0:
            tn += 1
        else:
            fp += 1
    return Fraction(tp, tp + fn) / 2 + Fraction(tn, tn + fp) / 2


def test_criterion_02_balanced_accuracy_exact(verdict):
    rng = np.random.default_rng(2)
    mismatches = checked = rejected = 0
    for _ in range(10_000):
        n = int(rng.integers(2, 40))
        y = rng.integers(0, 2, n)
        p = rng.integers(0, 2, n)
        if y.min() == y.max():
            with pytest.raises(MetricError):
                balanced_accuracy(y, p)
            rejected += 1
            continue
        checked += 1
        ref = brute_ba(y.tolist(), p.tolist())
        got = balanced_accuracy(y, p)
        mismatches += got != float(ref)
    y = np.array([1] * 7 + [0] * 13)
    const = {balanced_accuracy(y, np.ones(20, int)), balanced_accuracy(y, np.zeros(20, int))}
    verdict(2, mismatches == 0 and const == {0.5},
            f"{checked} pairs exact ({rejected} single-class rejected), constant predictor {sorted(const)}")


# ---- 3 ------------------------------------------------------------------

def test_criterion_03_planted_transfer(verdict):
    t0 = time.perf_counter()
    rows = []
    for seed in (0, 1, 2):
        world = PlantedWorld(languages=TRANSFER_LANGS, seed=seed)
        ucs = world.reference_ucs(TASK)
        gw = Gateway(mock_backend(world))
        en = score_dataset(make_planted_dataset(TASK, {"en": 200}, seed=seed), ucs, TASK, ScoringVariant(), gw)
        tg = score_dataset(make_planted_dataset(TASK, {"tgt": 200}, seed=seed + 100), ucs, TASK,
                           ScoringVariant(), gw)
        model = transfer.fit("mlp", en.S(), en.labels(), seed=42, ucs_checksum=ucs.checksum)
        ba = _ba(model, tg.S(), tg.labels())
        bayes = world.bayes_balanced_accuracy("tgt", ucs)
        rows.append((ba, bayes))
    elapsed = time.perf_counter() - t0
    ok = all(ba >= 0.85 and ba >= bayes - 0.05 for ba, bayes in rows) and elapsed < 30
    detail = ", ".join(f"BA {ba:.3f}/Bayes {b:.3f}" for ba, b in rows)
    verdict(3, ok, f"tgt {detail} (3 seeds), {elapsed:.1f}s")


# ---- 4 ------------------------------------------------------------------

def _concept_means(Z):
    return Z.reshape(len(Z), 5, 6).mean(axis=2)


def test_criterion_04_sample_efficiency_plateau(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    amp = concept_amplitudes([0.15] * 5, 6)
    y_en = rng.permutation(np.repeat([0, 1], 715))
    y_tg = rng.permutation(np.repeat([0, 1], 300))
    Z_en = planted_criterion_scores(y_en, amp, 1.0, 0.0, rng)
    Z_tg = planted_criterion_scores(y_tg, amp, 1.5, bias_vector(30, 1.0, 100), rng)
    fractions = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0]
    curve = analysis.sample_efficiency_sweep(_concept_means(Z_en), y_en, fractions,
                                             {"tgt": (_concept_means(Z_tg), y_tg)}, model_variant="mlp")
    elapsed = time.perf_counter() - t0
    en, tg = np.array(curve.y["en"]), np.array(curve.y["tgt"])
    i30 = curve.x.index(0.3)
    rho = spearman(en, tg)
    ok = (curve.metadata["n_train"][-1] == 1000 and en[i30] >= en[-1] - 0.02 and tg[i30] >= tg[-1] - 0.02
          and rho > 0 and elapsed < 120)
    verdict(4, ok, f"en {en[i30]:.3f}@0.3 vs {en[-1]:.3f}@1.0, tgt {tg[i30]:.3f} vs {tg[-1]:.3f}, "
                   f"co-move rho {rho:.2f}, {elapsed:.1f}s")


# ---- 5 ------------------------------------------------------------------

def test_criterion_05_importance_recovery(verdict):
    rng = np.random.default_rng(5)
    y = rng.permutation(np.repeat([0, 1], 250))
    Z = planted_criterion_scores(y, concept_amplitudes([0.5, 0.5, 0, 0, 0], 6), 1.0, 0.0, rng)
    p1 = analysis.importance_profile(Z, y, seed=1)
    p2 = analysis.importance_profile(Z, y, seed=2)
    mass = min(p1.importances[:12].sum(), p2.importances[:12].sum())
    total_err = max(abs(p1.importances.sum() - 1), abs(p2.importances.sum() - 1))
    rho = spearman(p1.importances, p2.importances)
    verdict(5, mass >= 0.70 and total_err <= 1e-9 and rho >= 0.8,
            f"signal mass {mass:.3f}, |sum-1| {total_err:.1e}, seed rho {rho:.3f}")


# ---- 6 ------------------------------------------------------------------

def test_criterion_06_topk_direction(verdict):
    rng = np.random.default_rng(0)
    amp = np.r_[np.full(10, 0.6), np.zeros(20)]
    y_en = rng.permutation(np.repeat([0, 1], 250))
    english = analysis.importance_profile(planted_criterion_scores(y_en, amp, 1.0, 0.0, rng), y_en)
    scores = {}
    for name, a in (("aligned", amp), ("misaligned", amp[::-1].copy())):
        y = rng.permutation(np.repeat([0, 1], 1000))
        scores[name] = (planted_criterion_scores(y, a, 1.5, bias_vector(30, 1.0, 3), rng), y)
    res = analysis.topk_restriction_experiment(scores, english, k_top=10)
    al, mis = res["aligned"].delta, res["misaligned"].delta
    verdict(6, al >= -0.01 and mis <= -0.05, f"aligned delta {al:+.3f}, misaligned delta {mis:+.3f}")


# ---- 7 ------------------------------------------------------------------

def test_criterion_07_trained_beats_llm_aggregation(verdict):
    out = []
    for signal in ((1.0, 0, 0, 0, 0), (1.0,) * 5):
        world = PlantedWorld(signal=signal, languages=TRANSFER_LANGS, seed=7)
        ucs = world.reference_ucs(TASK)
        gw = Gateway(mock_backend(world))
        en = score_dataset(make_planted_dataset(TASK, {"en": 200}, seed=1), ucs, TASK, ScoringVariant(), gw)
        ds = make_planted_dataset(TASK, {"tgt": 200}, seed=2)
        tg = score_dataset(ds, ucs, TASK, ScoringVariant(), gw)
        mlp = _ba(transfer.fit("mlp", en.S(), en.labels(), seed=42), tg.S(), tg.labels())
        by_id = {s.id: s for s in ds.samples}
        agg = [llm_aggregate(by_id[r.sample_id], ucs,
                             CriteriaResponseVector(r.sample_id, ucs.checksum, np.array(r.z), r.status),
                             TASK, gw).predicted_label for r in tg.records]
        out.append((mlp, balanced_accuracy(tg.labels(), agg)))
    verdict(7, all(m >= a for m, a in out),
            "; ".join(f"MLP {m:.3f} vs aggregator {a:.3f}" for m, a in out) + " (concentrated, uniform signal)")


# ---- 8 ------------------------------------------------------------------

def test_criterion_08_variant_ordering(verdict):
    lines, ok = [], True
    for seed in (0, 1, 2):
        world = PlantedWorld(signal=(0.3,) * 5, languages={"en": LanguageProfile(1.0), "tgt": LanguageProfile(1.0)},
                             joint_noise_factor=2.0, joint_generic_questions=2, seed=seed)
        gw = Gateway(mock_backend(world))
        ds = make_planted_dataset(TASK, {"en": 400, "tgt": 400}, seed=seed)
        curve = analysis.variant_comparison(ds, TASK, gw, "mlp", seed=42)
        avg = curve.metadata["average_target_ba"]
        best = curve.x[int(np.argmax(avg))]
        m = curve.metadata["m"]
        expected_calls = [m[0], 1, m[2], 1]
        ok &= best == "per-concept/per-concept" and avg.count(max(avg)) == 1
        ok &= curve.metadata["calls_per_sample"] == expected_calls
        ok &= curve.metadata["scoring_calls"] == [c * len(ds) for c in expected_calls]
        lines.append("/".join(f"{a:.3f}" for a in avg))
    verdict(8, ok, f"avg BA per variant {curve.x}: {'; '.join(lines)}; calls/sample "
                   f"{curve.metadata['calls_per_sample']}")


# ---- 9 ------------------------------------------------------------------

def test_criterion_09_determinism(verdict, tmp_path):
    assert cli.main(["make-planted", "--out", str(tmp_path / "demo"), "--n", "100"]) == 0
    cfg = str(tmp_path / "demo" / "config.yaml")
    dirs = []
    for name in ("a", "b"):
        assert cli.main(["run", "--config", cfg, "--seed", "42", "--out", str(tmp_path / name)]) == 0
        dirs.append(next((tmp_path / name).glob("*_seed42")))
    names = [sorted(p.name for p in d.iterdir()) for d in dirs]
    diffs = []
    for fname in names[0]:
        a, b = ((d / fname).read_bytes() for d in dirs)
        if fname == "manifest.json":
            a, b = (json.dumps({k: v for k, v in json.loads(x).items() if k != "created"}).encode() for x in (a, b))
        if a != b:
            diffs.append(fname)
    verdict(9, names[0] == names[1] and not diffs,
            f"{len(names[0])} artifacts identical" if not diffs else f"differing: {diffs}")


# ---- 10 -----------------------------------------------------------------

def _format_block(user, wrapper):
    return re.search(rf"<{wrapper}>.*</{wrapper}>", user, re.DOTALL).group(0)


def test_criterion_10_parser_fixtures(verdict):
    fam = PromptFamily
    concept_ex = _format_block(prompts.CONCEPT_GENERATION[fam.EVIDENCE_SUPPORT].user, "concepts")
    question_ex = _format_block(prompts.QUESTION_GENERATION[fam.SUMMARY_FAITHFULNESS].user, "questions")
    compact_ex = _format_block(prompts.QUESTION_GENERATION[fam.EVIDENCE_SUPPORT].user, "questions")
    score_ex = "<evaluation>\n" + prompts.format_example(3) + "\n</evaluation>"
    filled = score_ex.replace("[0-10]", "7", 1).replace("[0-10]", "3", 1).replace("[0-10]", "10", 1)
    ids = ["c1q1", "c1q2", "c1q3"]

    good = [
        parse_tagged_list(concept_ex, "concept", "concepts") == ["[Concept name]"] * 2,
        parse_tagged_list(question_ex, "question", "questions") == ["[Universal evaluation question]"] * 6,
        parse_tagged_list(compact_ex, "question", "questions") == ["[Universal evaluation question]"],
        parse_score_block(filled, ids).scores == {"c1q1": 7.0, "c1q2": 3.0, "c1q3": 10.0},
        parse_score_block(filled, ids).justifications["c1q2"] == "[brief justification]",
        # the bare template carries placeholders, which are reported missing rather than read as 0
        parse_score_block(score_ex, ids).missing == ids,
    ]

    mutants = [
        (parse_tagged_list, concept_ex[: len(concept_ex) // 2], ("concept", "concepts")),
        (parse_tagged_list, concept_ex.replace("</concepts>", ""), ("concept", "concepts")),
        (parse_tagged_list, concept_ex.replace("<concepts>", "<concept_list>"), ("concept", "concepts")),
        (parse_tagged_list, concept_ex.replace("</concept2>", ""), ("concept", "concepts")),
        (parse_tagged_list, concept_ex.replace("concept2", "concept3"), ("concept", "concepts")),
        (parse_tagged_list, concept_ex.replace("concept2", "concept1"), ("concept", "concepts")),
        (parse_tagged_list, "<concepts>\n...\n</concepts>", ("concept", "concepts")),
        (parse_tagged_list, "", ("concept", "concepts")),
        (parse_tagged_list, question_ex[:-len("</questions>")], ("question", "questions")),
        (parse_tagged_list, question_ex.replace("<question4>", "<question 4>"), ("question", "questions")),
        (parse_tagged_list, question_ex.replace("question6", "question7"), ("question", "questions")),
        (parse_tagged_list, question_ex.replace("</question3>", "</question2>", 1), ("question", "questions")),
        (parse_tagged_list, question_ex[: question_ex.index("<question5>") + 20], ("question", "questions")),
        (parse_score_block, filled[: len(filled) // 2], (ids,)),
        (parse_score_block, filled.replace("<evaluation>", ""), (ids,)),
        (parse_score_block, filled.replace("</evaluation>", ""), (ids,)),
        (parse_score_block, filled.replace("</question2>", ""), (ids,)),
        (parse_score_block, filled.replace("question3", "question2"), (ids,)),
        (parse_joint_questions, "<questions><concept1><question1>A?</question1></concept1></questions>", (2,)),
        (parse_joint_questions, "<questions><concept1></concept1><concept2><question1>B?</question1>"
                                "</concept2></questions>", (2,)),
    ]
    escaped = []
    for i, (fn, text, args) in enumerate(mutants):
        try:
            fn(text, *args)
        except ParseError as exc:
            if exc.raw != text:
                escaped.append(i)
        else:
            escaped.append(i)
    verdict(10, all(good) and len(mutants) == 20 and not escaped,
            f"{sum(good)}/{len(good)} documented structures, {len(mutants) - len(escaped)}/20 mutants raise")


# ---- 11 -----------------------------------------------------------------

def _ref_gini_tree(X, y, rows, depth, max_depth, imp):
    """Textbook CART on exact rationals: decrease = N_t g_t - N_L g_L - N_R g_R."""

    def gini(r):
        n1 = sum(y[i] for i in r)
        return 1 - Fraction(n1, len(r)) ** 2 - Fraction(len(r) - n1, len(r)) ** 2

    if depth >= max_depth or len(set(y[i] for i in rows)) < 2:
        return []
    best = None
    for f in range(X.shape[1]):
        vals = sorted(set(X[i, f] for i in rows))
        for lo, hi in zip(vals, vals[1:]):
            t = (lo + hi) / 2
            left = [i for i in rows if X[i, f] <= t]
            right = [i for i in rows if X[i, f] > t]
            dec = len(rows) * gini(rows) - len(left) * gini(left) - len(right) * gini(right)
            if dec > 0 and (best is None or dec > best[0]):
                best = (dec, f, t, left, right)
    if best is None:
        return []
    dec, f, t, left, right = best
    imp[f] += dec
    return ([(f, t)] + _ref_gini_tree(X, y, left, depth + 1, max_depth, imp)
            + _ref_gini_tree(X, y, right, depth + 1, max_depth, imp))


def test_criterion_11_classifier_oracles(verdict):
    # logistic regression on separable planted data; the planted margin is a verified separator
    rng = np.random.default_rng(11)
    y = rng.permutation(np.repeat([0, 1], 100))
    Z = np.clip(5 + 3 * (2 * y[:, None] - 1) + rng.integers(-2, 3, (200, 6)), 0, 10).astype(float)
    separable = Z[y == 1].sum(1).min() > Z[y == 0].sum(1).max()
    lr = fit_logistic(Z, y)
    lr_acc = float(np.mean(transfer.labels_from_proba(predict_proba(lr, Z)) == y))

    # k-NN against brute force 5-NN with the lower-id tie rule
    X = rng.uniform(0, 10, (300, 4))
    lab = rng.integers(0, 2, 300)
    ids = [f"s{i:04d}" for i in rng.permutation(300)]
    knn = fit_knn(X, lab, sample_ids=ids)
    Q = rng.uniform(0, 10, (200, 4))
    Q[:10] = X[:10]
    ref = []
    for q in Q:
        order = sorted(range(300), key=lambda i: (sum((q[j] - X[i, j]) ** 2 for j in range(4)), ids[i]))
        ref.append(sum(lab[i] for i in order[:5]) / 5)
    knn_ok = np.array_equal(predict_proba(knn, Q), np.array(ref))

    # single unbagged tree on a 2-feature toy vs the rational reference
    Xt = np.array([[1, 2], [2, 7], [3, 4], [4, 8], [5, 1], [6, 6], [7, 9], [8, 3], [3, 6], [7, 5], [9, 2], [2, 3]],
                  float)
    yt = np.array([0, 1, 0, 1, 0, 1, 1, 1, 0, 1, 1, 0])
    cfg = ForestConfig(n_trees=1, max_depth=10, max_features=None, bootstrap=False, class_weight=None)
    rf = fit_random_forest(Xt, yt, cfg, seed=0)
    ref_imp = [Fraction(0), Fraction(0)]
    splits = _ref_gini_tree(Xt * 0.1, yt.tolist(), list(range(12)), 0, 10, ref_imp)
    ref_norm = [v / sum(ref_imp) for v in ref_imp]
    got = feature_importances(rf)
    got_exact = [Fraction(float(v)).limit_denominator(10**6) for v in got]
    internal = rf.params["feature"] >= 0
    tree_splits = list(zip(rf.params["feature"][internal].tolist(), rf.params["threshold"][internal].tolist()))
    rf_ok = got_exact == ref_norm and len(set(f for f, _ in splits)) == 2 and tree_splits == [(f, float(t)) for f, t in splits]

    verdict(11, separable and lr_acc == 1.0 and knn_ok and rf_ok,
            f"logreg train acc {lr_acc:.3f}, 5-NN exact on 200 queries: {knn_ok}, "
            f"tree importances {[str(v) for v in ref_norm]} matched: {rf_ok}")
