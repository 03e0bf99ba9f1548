import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from ucsjudge.analysis import balanced_accuracy, spearman
from ucsjudge.criteria import build_ucs_from_lists
from ucsjudge.data import PromptFamily, TaskSpec, nested_order_indices, stratified_test_indices, subsample_size
from ucsjudge.gateway import Gateway, mock_backend
from ucsjudge.scoring import CriteriaResponseVector, Status, aggregate_concepts
from ucsjudge.transfer import ForestConfig, feature_importances, fit_logistic, fit_random_forest, predict_proba

TASK = TaskSpec.for_family(PromptFamily.SUMMARY_FAITHFULNESS, task_id="prop")
labels_st = st.lists(st.integers(0, 1), min_size=4, max_size=80).filter(lambda y: 2 <= sum(y) <= len(y) - 2)


@given(labels_st, st.floats(0.1, 0.5), st.integers(0, 10_000))
def test_split_disjoint_and_stratified(y, frac, seed):
    y = np.array(y)
    test = stratified_test_indices(y, frac, seed)
    train = np.setdiff1d(np.arange(len(y)), test)
    assert len(np.intersect1d(test, train)) == 0 and len(test) + len(train) == len(y)
    for c in (0, 1):
        n_c = int((y == c).sum())
        want = min(max(int(np.floor(n_c * frac + 0.5)), 1), n_c - 1)
        assert int((y[test] == c).sum()) == want
    assert np.array_equal(test, stratified_test_indices(y, frac, seed))


@given(labels_st, st.integers(0, 1000), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_nested_subsets(y, seed, f1, f2):
    order = nested_order_indices(np.array(y), seed)
    assert sorted(order.tolist()) == list(range(len(y)))
    a, b = sorted((f1, f2))
    small = set(order[: subsample_size(len(y), a)].tolist())
    large = set(order[: subsample_size(len(y), b)].tolist())
    assert small <= large


sizes_st = st.lists(st.integers(1, 6), min_size=1, max_size=5)


@given(sizes_st, st.data())
def test_aggregate_bounds_and_permutation_invariance(sizes, data):
    ucs = build_ucs_from_lists(TASK, [(f"C{j}", [f"q{j}.{i}" for i in range(n)]) for j, n in enumerate(sizes)])
    z = np.array(data.draw(st.lists(st.integers(0, 10), min_size=ucs.k, max_size=ucs.k)), dtype=float)
    s = aggregate_concepts(CriteriaResponseVector("x", ucs.checksum, z, [Status.PARSED] * ucs.k), ucs).values
    perm_ucs = build_ucs_from_lists(
        TASK, [(f"C{j}", [f"q{j}.{i}" for i in reversed(range(n))]) for j, n in enumerate(sizes)])
    z_perm = np.concatenate([z[sl][::-1] for sl in ucs.concept_slices()])
    s_perm = aggregate_concepts(
        CriteriaResponseVector("x", perm_ucs.checksum, z_perm, [Status.PARSED] * ucs.k), perm_ucs).values
    assert np.allclose(s, s_perm, atol=1e-12)
    for j, sl in enumerate(ucs.concept_slices()):
        assert z[sl].min() - 1e-12 <= s[j] <= z[sl].max() + 1e-12


@given(labels_st, st.data())
def test_ba_label_swap_symmetry(y, data):
    p = data.draw(st.lists(st.integers(0, 1), min_size=len(y), max_size=len(y)))
    y, p = np.array(y), np.array(p)
    assert abs(balanced_accuracy(y, p) - balanced_accuracy(1 - y, 1 - p)) < 1e-12
    assert 0.0 <= balanced_accuracy(y, p) <= 1.0


@given(st.lists(st.integers(-50, 50), min_size=3, max_size=30).filter(lambda a: len(set(a)) > 1))
def test_spearman_invariant_to_monotone_maps(a):
    a = np.array(a, dtype=float)
    b = np.random.default_rng(len(a)).permutation(a)
    if len(set(b)) < 2:
        return
    rho = spearman(a, b)
    assert abs(spearman(np.exp(a / 10), b ** 3 + 2 * b) - rho) < 1e-9
    assert abs(spearman(a, a * 7 + 1) - 1.0) < 1e-12


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_forest_importances_form_distribution(seed, d):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 10, (60, d))
    y = np.arange(60) % 2
    imp = feature_importances(fit_random_forest(X, y, ForestConfig(n_trees=5), seed=seed))
    assert abs(imp.sum() - 1.0) < 1e-9 and (imp >= 0).all()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_logreg_positive_weight_is_monotone(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 10, (80, 2))
    y = (X[:, 0] > 5).astype(int)
    if y.min() == y.max():
        return
    m = fit_logistic(X, y)
    grid = np.column_stack([np.linspace(0, 10, 21), np.full(21, 5.0)])
    assert (np.diff(predict_proba(m, grid)) >= 0).all()


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(st.text(min_size=1, max_size=20), min_size=1, max_size=5))
def test_cache_is_transparent(tmp_path, prompts_):
    plan = lambda r: r.user_prompt[::-1]
    plain = Gateway(mock_backend(plan))
    cached = Gateway(mock_backend(plan), cache_dir=tmp_path / "c")
    for p in prompts_ + prompts_:
        assert cached.ask("s", p).text == plain.ask("s", p).text
