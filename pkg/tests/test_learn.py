import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fexkit.errors import DimensionMismatch, ModelFormatError, RankDeficient, SingleClass, SingleGroup, TooFewSamples
from fexkit.learn import (
    CvPlan,
    SplitMix64,
    TrainedModel,
    dumps_model,
    fit_pls,
    grid_search_cv,
    leave_one_group_out,
    load_model,
    model_from_dict,
    pls_predict,
    predict,
    predict_proba,
    save_model,
    stratified_folds,
    train,
    train_forest,
    train_logistic,
    train_svm,
)
from fexkit.learn import logistic, svm
from fexkit.learn.forest import build_tree, tree_predict


def blobs(rng, n=40, gap=3.0, d=2):
    X = np.vstack([rng.normal(-gap, 1.0, (n, d)), rng.normal(gap, 1.0, (n, d))])
    y = np.array([0] * n + [1] * n)
    return X, y


# --- SplitMix64 --------------------------------------------------------------


def test_splitmix_reference_output():
    # published reference value for seed 0
    assert SplitMix64(0).next_u64() == 0xE220A8397B1DCDAF


def test_splitmix_below_and_shuffle():
    r = SplitMix64(7)
    assert all(0 <= r.below(5) < 5 for _ in range(200))
    items = SplitMix64(1).shuffle(list(range(20)))
    assert sorted(items) == list(range(20))
    assert items == SplitMix64(1).shuffle(list(range(20)))


# --- logistic ----------------------------------------------------------------


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(100):
        n, d = rng.integers(2, 20), rng.integers(1, 6)
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, n).astype(float)
        w, b, l2 = rng.normal(size=d), rng.normal(), rng.uniform(0, 1)
        gw, gb = logistic.gradient(w, b, X, y, l2)
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            num = (logistic.objective(w + e, b, X, y, l2) - logistic.objective(w - e, b, X, y, l2)) / (2 * h)
            assert abs(num - gw[j]) <= 1e-6
        num_b = (logistic.objective(w, b + h, X, y, l2) - logistic.objective(w, b - h, X, y, l2)) / (2 * h)
        assert abs(num_b - gb) <= 1e-6


def test_logistic_symmetric_data_has_zero_bias(rng):
    x = rng.normal(size=(30, 3))
    X = np.vstack([x, -x])
    y = np.array([1] * 30 + [0] * 30)
    m = train_logistic(X, y, l2=1e-2, tol=1e-9)
    assert abs(m.params["bias"][0]) <= 1e-6


def test_logistic_separable_1d():
    X = np.array([[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]])
    y = [0, 0, 0, 1, 1, 1]
    m = train_logistic(X, y, l2=1e-4)
    assert predict(m, X) == y


@given(seed=st.integers(0, 10**6))
def test_logistic_loss_non_increasing(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(25, 4))
    y = (rng.random(25) < 0.5).astype(float)
    _, _, losses = logistic.fit_binary(X, y, l2=1e-3, max_iter=200)
    assert all(b <= a for a, b in zip(losses, losses[1:]))


def test_logistic_zero_weights_give_half(rng):
    m = TrainedModel("logistic", [0, 1], {"n_features": 3, "weights": np.zeros((1, 3)), "bias": np.zeros(1)})
    np.testing.assert_array_equal(predict_proba(m, rng.normal(size=(5, 3))), 0.5)


@given(seed=st.integers(0, 10**6))
def test_logistic_proba_monotone_and_normalised(seed):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(1, 3))
    m = TrainedModel("logistic", ["n", "p"], {"n_features": 3, "weights": w, "bias": rng.normal(size=1)})
    X = rng.normal(size=(20, 3))
    P = predict_proba(m, X)
    assert np.all((P >= 0) & (P <= 1))
    np.testing.assert_allclose(P.sum(axis=1), 1.0)
    order = np.argsort(X @ w[0])
    assert np.all(np.diff(P[order, 1]) >= 0)


def test_logistic_errors(rng):
    with pytest.raises(SingleClass):
        train_logistic(rng.normal(size=(4, 2)), [1, 1, 1, 1])
    X = rng.normal(size=(4, 2))
    X[0, 0] = np.nan
    with pytest.raises(Exception) as exc:
        train_logistic(X, [0, 1, 0, 1])
    assert type(exc.value).__name__ == "NonFinite"
    m = train_logistic(rng.normal(size=(6, 2)), [0, 1] * 3)
    with pytest.raises(DimensionMismatch):
        predict_proba(m, np.zeros((1, 3)))


# --- SVM ---------------------------------------------------------------------


def test_svm_separable(rng):
    X, y = blobs(rng)
    m = train_svm(X, y, l2=1e-2, epochs=30, seed=3)
    assert predict(m, X) == y.tolist()


def test_svm_label_flip_negates(rng):
    X, y = blobs(rng, gap=1.5)
    a = train_svm(X, y, l2=0.1, epochs=20, seed=5, labels=[0, 1])
    b = train_svm(X, 1 - y, l2=0.1, epochs=20, seed=5, labels=[0, 1])
    np.testing.assert_allclose(a.params["weights"], -b.params["weights"], atol=1e-3)
    np.testing.assert_allclose(a.params["bias"], -b.params["bias"], atol=1e-3)


def test_svm_objective_near_grid_oracle(rng):
    X, y = blobs(rng, n=30, gap=1.0)
    ys = np.where(y == 1, 1.0, -1.0)
    l2 = 0.1
    m = train_svm(X, y, l2=l2, epochs=200, seed=1, fit_intercept=False)
    got = svm.objective(m.params["weights"][0], X, ys, l2)
    grid = np.linspace(-3, 3, 301)
    W1, W2 = np.meshgrid(grid, grid)
    Wg = np.column_stack([W1.ravel(), W2.ravel()])
    hinge = np.maximum(0.0, 1.0 - ys[None, :] * (Wg @ X.T)).mean(axis=1)
    best = float(np.min(0.5 * l2 * (Wg * Wg).sum(axis=1) + hinge))
    assert got <= 1.05 * best


def test_svm_deterministic_and_scores(rng):
    X, y = blobs(rng)
    a, b = train_svm(X, y, seed=9), train_svm(X, y, seed=9)
    np.testing.assert_array_equal(a.params["weights"], b.params["weights"])
    P = predict_proba(a, X)
    assert np.all((P >= 0) & (P <= 1))
    with pytest.raises(ValueError):
        train_svm(X, y, l2=0.0)


def test_one_vs_rest_multiclass(rng):
    centres = np.array([[0, 5], [5, 0], [-5, -5]], dtype=float)
    X = np.vstack([rng.normal(c, 0.5, (15, 2)) for c in centres])
    y = ["a"] * 15 + ["b"] * 15 + ["c"] * 15
    for kind in ("logistic", "svm", "forest"):
        m = train(kind, X, y, seed=2)
        assert m.labels == ["a", "b", "c"]
        assert predict(m, X) == y


# --- forest ------------------------------------------------------------------


def test_forest_reproducible(rng):
    X, y = blobs(rng, gap=0.5)
    a = train_forest(X, y, n_trees=10, seed=4)
    b = train_forest(X, y, n_trees=10, seed=4, jobs=3)
    Xt = rng.normal(size=(50, 2))
    np.testing.assert_array_equal(predict_proba(a, Xt), predict_proba(b, Xt))
    for ta, tb in zip(a.params["trees"], b.params["trees"]):
        for key in ta:
            np.testing.assert_array_equal(ta[key], tb[key])


def test_forest_constant_labels(rng):
    m = train_forest(rng.normal(size=(10, 3)), ["x"] * 10, n_trees=5)
    np.testing.assert_array_equal(predict_proba(m, rng.normal(size=(4, 3))), 1.0)
    assert predict(m, rng.normal(size=(2, 3))) == ["x", "x"]


def test_forest_stump():
    X = np.arange(10, dtype=float)[:, None]
    y = [0] * 4 + [1] * 6
    m = train_forest(X, y, n_trees=1, max_depth=1, bootstrap=False)
    assert predict(m, X) == y
    assert m.params["trees"][0]["threshold"][0] == 3.5


def test_forest_vote_fraction():
    leaf = lambda v: {  # noqa: E731
        "feature": np.array([-1]),
        "threshold": np.array([0.0]),
        "left": np.array([-1]),
        "right": np.array([-1]),
        "value": np.array([v]),
    }
    m = TrainedModel("forest", [0, 1], {"n_features": 1, "trees": [leaf(1), leaf(1), leaf(1), leaf(0)]})
    np.testing.assert_array_equal(predict_proba(m, np.zeros((2, 1))), [[0.25, 0.75]] * 2)


def oracle_tree_1d(x, y, n_classes):
    """Exhaustive recursive CART on one feature: lowest weighted Gini, lowest threshold on ties."""
    counts = np.bincount(y, minlength=n_classes)
    if np.count_nonzero(counts) <= 1:
        return int(np.argmax(counts))
    xs = np.unique(x)
    best = None
    for a, b in zip(xs[:-1], xs[1:]):
        t = (a + b) / 2
        score = 0.0
        for side in (x <= t, x > t):
            c = np.bincount(y[side], minlength=n_classes)
            score += side.sum() - (c * c).sum() / side.sum()
        if best is None or score < best[0] - 1e-12:
            best = (score, t)
    if best is None:
        return int(np.argmax(counts))
    t = best[1]
    return (t, oracle_tree_1d(x[x <= t], y[x <= t], n_classes), oracle_tree_1d(x[x > t], y[x > t], n_classes))


def oracle_predict(node, v):
    while isinstance(node, tuple):
        node = node[1] if v <= node[0] else node[2]
    return node


@given(seed=st.integers(0, 10**6))
def test_single_tree_matches_exhaustive_oracle(seed):
    rng = np.random.default_rng(seed)
    x = rng.permutation(40).astype(float)[:25]
    y = rng.integers(0, 3, 25)
    tree = build_tree(x[:, None], y, 3, bootstrap=False, rng=SplitMix64(seed))
    oracle = oracle_tree_1d(x, y, 3)
    probe = np.linspace(-1, 41, 300)
    np.testing.assert_array_equal(tree_predict(tree, probe[:, None]), [oracle_predict(oracle, v) for v in probe])
    np.testing.assert_array_equal(tree_predict(tree, x[:, None]), y)


def test_single_deep_tree_fits_2d(rng):
    X = rng.normal(size=(60, 2))
    y = rng.integers(0, 2, 60)
    m = train_forest(X, y, n_trees=1, bootstrap=False, mtry=2, seed=0)
    assert predict(m, X) == y.tolist()


# --- PLS ---------------------------------------------------------------------


def r2(Y, P):
    return 1 - ((Y - P) ** 2).sum() / ((Y - Y.mean(axis=0)) ** 2).sum()


def test_pls_identity(rng):
    X = rng.normal(size=(20, 1))
    m = fit_pls(X, X, 1)
    np.testing.assert_allclose(pls_predict(m, X), X, atol=1e-8)


def test_pls_rank_two_generative(rng):
    T = rng.normal(size=(50, 2))
    X = T @ rng.normal(size=(2, 8))
    Y = X @ rng.normal(size=(8, 3))
    m = fit_pls(X, Y, 2)
    assert r2(Y, pls_predict(m, X)) >= 0.999


def test_pls_full_rank_matches_ols(rng):
    X = rng.normal(size=(12, 4))
    Y = rng.normal(size=(12, 2))
    m = fit_pls(X, Y, 4)
    A = np.column_stack([X, np.ones(12)])
    beta = np.linalg.solve(A.T @ A, A.T @ Y)
    np.testing.assert_allclose(pls_predict(m, X), A @ beta, atol=1e-6)


@given(seed=st.integers(0, 10**6))
def test_pls_r2_non_decreasing_in_k(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(15, 5))
    Y = X @ rng.normal(size=(5, 2)) + rng.normal(size=(15, 2))
    scores = [r2(Y, pls_predict(fit_pls(X, Y, k), X)) for k in range(1, 6)]
    assert all(b >= a - 1e-9 for a, b in zip(scores, scores[1:]))


def test_pls_errors(rng):
    X = np.column_stack([np.arange(6.0), 2 * np.arange(6.0)])
    with pytest.raises(RankDeficient):
        fit_pls(X, rng.normal(size=6), 2)
    with pytest.raises(ValueError):
        fit_pls(rng.normal(size=(3, 4)), rng.normal(size=3), 3)


# --- grid search / LOGO ------------------------------------------------------


def test_stratified_folds_balanced():
    y = [0] * 9 + [1] * 6
    f = stratified_folds(y, 3, seed=1)
    for label in (0, 1):
        counts = np.bincount(f[np.array(y) == label], minlength=3)
        assert counts.max() - counts.min() <= 1
    np.testing.assert_array_equal(f, stratified_folds(y, 3, seed=1))
    with pytest.raises(TooFewSamples):
        stratified_folds([0, 0, 1, 1], 3, seed=0)


def test_grid_single_and_duplicate_cells(rng):
    X, y = blobs(rng, n=12)
    best, cells = grid_search_cv(X, y, "logistic", CvPlan(grid={"l2": [0.1]}))
    assert best == {"l2": 0.1} and len(cells) == 1
    best, cells = grid_search_cv(X, y, "logistic", CvPlan(grid={"l2": [0.5, 0.5]}))
    assert cells[0][1] == cells[1][1] and best == {"l2": 0.5}


def test_grid_rejects_degenerate_cell(rng):
    # offset blobs: a heavily shrunk weight vector cannot separate them
    X, y = blobs(rng, n=12, gap=2.0)
    X = X + 10.0
    plan = CvPlan(grid={"l2": [1e6, 1e-2]}, seed=3)
    best, cells = grid_search_cv(X, y, "logistic", plan)
    assert best == {"l2": 1e-2}
    # direct recomputation of the winning cell's mean validation F1
    folds = stratified_folds(y, 3, 3)
    scores = []
    for f in range(3):
        m = train("logistic", X[folds != f], y[folds != f], {"l2": 1e-2}, seed=3)
        p = np.array(predict(m, X[folds == f]))
        t = y[folds == f]
        tp, fp, fn = np.sum((p == 1) & (t == 1)), np.sum((p == 1) & (t == 0)), np.sum((p == 0) & (t == 1))
        scores.append(2 * tp / (2 * tp + fp + fn))
    assert cells[1][1] == pytest.approx(np.mean(scores))
    assert cells[0][1] < cells[1][1]


def test_grid_parallel_matches_serial(rng):
    X, y = blobs(rng, n=12, gap=0.7)
    plan = CvPlan(grid={"l2": [1e-3, 1e-1, 1.0]})
    assert grid_search_cv(X, y, "svm", plan, jobs=3) == grid_search_cv(X, y, "svm", plan)


def test_logo_singletons_separable():
    X = np.array([[-2.0], [-1.5], [-1.0], [1.0], [1.5], [2.0]])
    y = [0, 0, 0, 1, 1, 1]
    pred, acc = leave_one_group_out(X, y, list(range(6)), "logistic", {"l2": 1e-3})
    assert acc == 1.0 and pred == y
    with pytest.raises(SingleGroup):
        leave_one_group_out(X, y, [0] * 6, "logistic")


def test_logo_random_labels_near_chance():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(200, 3))
    y = rng.integers(0, 2, 200)
    groups = np.repeat(np.arange(20), 10)
    _, acc = leave_one_group_out(X, y, groups, "logistic", {"l2": 1e-2})
    assert abs(acc - 0.5) <= 3 * np.sqrt(0.25 / 200)


# --- serialisation -----------------------------------------------------------


@pytest.mark.parametrize("kind", ["logistic", "svm", "forest"])
def test_model_roundtrip_predictions(kind, rng, tmp_path):
    X, y = blobs(rng, n=15, gap=0.8, d=4)
    m = train(kind, X, ["neg" if v == 0 else "pos" for v in y], seed=6)
    p = tmp_path / "m.json"
    save_model(m, p)
    back = load_model(p)
    Xt = rng.normal(size=(30, 4))
    np.testing.assert_array_equal(predict_proba(back, Xt), predict_proba(m, Xt))
    assert back.labels == m.labels
    assert dumps_model(back) == dumps_model(m)


def test_pls_roundtrip(rng, tmp_path):
    X, Y = rng.normal(size=(10, 3)), rng.normal(size=(10, 2))
    m = fit_pls(X, Y, 2)
    save_model(m, tmp_path / "p.json")
    np.testing.assert_array_equal(pls_predict(load_model(tmp_path / "p.json"), X), pls_predict(m, X))


def test_model_format_errors():
    with pytest.raises(ModelFormatError):
        model_from_dict({"version": 99, "kind": "logistic", "labels": [], "params": {}})
    with pytest.raises(ModelFormatError):
        model_from_dict({"version": 1, "kind": "tree", "labels": [], "params": {}})
