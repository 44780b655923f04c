"""The ten acceptance criteria, each timed against its budget.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import json
import math
import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fexkit.features import fit_pca, hog, pca_inverse_transform, pca_transform
from fexkit.geometry import FaceBox, neutral_template
from fexkit.learn import fit_pls, pls_predict, predict, predict_proba, train_forest, train_logistic, train_svm
from fexkit.learn import logistic
from fexkit.metrics import ConfusionCounts, average_precision, f1, landmark_nrmse, per_label_f1, precision, recall
from fexkit.pipeline import replicate_goodnews
from fexkit.render import au_to_landmarks, coefficient_faces, fit_visualization_model, neutral_face, plot_detections
from fexkit.render import render_face
from fexkit.stats import isc, regress, ttest_ind
from fexkit.synth import goodnews_table, viz_training_data

from test_cli import commands, run, run_all, snapshot
from test_features import hog_oracle
from test_metrics import ap_cutoff_oracle, random_boxes
from test_render import full_row


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f} s, budget {self.seconds} s"


@pytest.mark.acceptance(1, "metric exactness")
def test_criterion_01_metrics():
    with Budget(1.0):
        rng = np.random.default_rng(101)
        labels = ["a", "b", "c"]
        for _ in range(1000):
            n = int(rng.integers(1, 20))
            pred = [labels[i] for i in rng.integers(0, 3, n)]
            true = [labels[i] for i in rng.integers(0, 3, n)]
            scores, _ = per_label_f1(pred, true, labels)
            for lab in labels:
                tp = sum(p == lab and t == lab for p, t in zip(pred, true))
                fp = sum(p == lab and t != lab for p, t in zip(pred, true))
                fn = sum(p != lab and t == lab for p, t in zip(pred, true))
                c = ConfusionCounts(tp, fp, fn)
                p = tp / (tp + fp) if tp + fp else 0.0
                r = tp / (tp + fn) if tp + fn else 0.0
                assert precision(c) == p and recall(c) == r
                assert f1(c) == (2 * p * r / (p + r) if p + r else 0.0)
                assert scores[lab] == f1(c)
        assert abs(f1(ConfusionCounts(tp=3, fp=1, fn=2)) - 0.6667) <= 1e-4


@pytest.mark.acceptance(2, "HOG feature count and loop oracle")
def test_criterion_02_hog():
    with Budget(5.0):
        rng = np.random.default_rng(102)
        assert len(hog(rng.random((112, 112)))) == 5408
        img = rng.random((16, 16))
        np.testing.assert_allclose(hog(img).values, hog_oracle(img.tolist()), atol=1e-10, rtol=0)


@pytest.mark.acceptance(3, "PCA orthonormality, retention, reconstruction")
def test_criterion_03_pca():
    with Budget(10.0):
        rng = np.random.default_rng(103)
        for _ in range(50):
            n, d = int(rng.integers(10, 60)), int(rng.integers(2, 15))
            X = rng.normal(size=(n, d)) @ rng.normal(size=(d, d))
            m = fit_pca(X, 0.95)
            np.testing.assert_allclose(m.components @ m.components.T, np.eye(m.k), atol=1e-8)
            assert m.explained_variance_ratio.sum() >= 0.95
            full = fit_pca(X, 1.0)
            assert np.max(np.abs(pca_inverse_transform(full, pca_transform(full, X)) - X)) <= 1e-8


@pytest.mark.acceptance(4, "solver correctness")
def test_criterion_04_solvers():
    with Budget(60.0):
        rng = np.random.default_rng(104)
        h = 1e-6
        for _ in range(100):
            n, d = int(rng.integers(2, 20)), int(rng.integers(1, 6))
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
        X = np.vstack([rng.normal(-3, 1, (40, 2)), rng.normal(3, 1, (40, 2))])
        y = [0] * 40 + [1] * 40
        assert predict(train_logistic(X, y), X) == y
        assert predict(train_svm(X, y, epochs=30, seed=3), X) == y
        a, b = train_forest(X, y, n_trees=20, seed=9), train_forest(X, y, n_trees=20, seed=9)
        Xt = rng.normal(size=(100, 2))
        assert predict_proba(a, Xt).tobytes() == predict_proba(b, Xt).tobytes()
        for ta, tb in zip(a.params["trees"], b.params["trees"]):
            for key in ta:
                assert np.asarray(ta[key]).tobytes() == np.asarray(tb[key]).tobytes()


@pytest.mark.acceptance(5, "PLS rank-k fit and OLS oracle")
def test_criterion_05_pls():
    with Budget(10.0):
        rng = np.random.default_rng(105)
        for k in (1, 2, 3, 5):
            X = rng.normal(size=(60, k)) @ rng.normal(size=(k, 10))
            Y = X @ rng.normal(size=(10, 4))
            P = pls_predict(fit_pls(X, Y, k), X)
            assert 1 - ((Y - P) ** 2).sum() / ((Y - Y.mean(axis=0)) ** 2).sum() >= 0.999
        X, Y = rng.normal(size=(30, 6)), rng.normal(size=(30, 3))
        A = np.column_stack([X, np.ones(30)])
        beta = np.linalg.solve(A.T @ A, A.T @ Y)
        np.testing.assert_allclose(pls_predict(fit_pls(X, Y, 6), X), A @ beta, atol=1e-6, rtol=0)


@pytest.mark.acceptance(6, "statistics")
def test_criterion_06_stats():
    with Budget(5.0):
        r = ttest_ind([1, 2, 3], [4, 5, 6])
        assert abs(r.t - (-3.6742)) <= 1e-3 and r.df == 4
        rng = np.random.default_rng(106)
        for _ in range(50):
            X = np.column_stack([rng.normal(size=(25, 3)), np.ones(25)])
            fit = regress(X, rng.normal(size=(25, 2)))
            assert np.max(np.abs(X.T @ fit.residuals)) <= 1e-8
            m = isc([rng.normal(size=(20, 4)) for _ in range(int(rng.integers(2, 6)))])
            assert np.array_equal(m, m.T) and np.all(np.diag(m) == 1.0)


@pytest.mark.acceptance(7, "good/bad-news replication shape")
def test_criterion_07_replication():
    with Budget(60.0):
        table, conditions = goodnews_table(7)
        assert sorted(conditions.values()).count("good") == 10 and len(conditions) == 20
        report = replicate_goodnews(table, conditions).report
        tests = {t["feature"]: t for t in report["ttests"]}
        for au in ("AU12", "AU17"):
            assert tests[au]["df"] == 18 and tests[au]["p"] < 1e-3
        assert report["classification"]["accuracy"] == 1.0
        c = report["coefficients"]
        assert c["AU12"] > 0 and c["AU17"] > 0 and c["AU01"] < 0


@pytest.mark.acceptance(8, "average precision and NRMSE")
def test_criterion_08_ap_nrmse():
    with Budget(10.0):
        rng = np.random.default_rng(108)
        for _ in range(1500):
            preds = random_boxes(rng, int(rng.integers(1, 7)), True)
            truths = random_boxes(rng, int(rng.integers(1, 7)), False)
            for thr in (0.3, 0.5, 0.7):
                assert average_precision(preds, truths, thr) == ap_cutoff_oracle(preds, truths, thr)
        truth = neutral_template()
        iod = math.dist(truth[36], truth[45])
        for d in (0.5, 3.0, 17.25):
            assert abs(landmark_nrmse(truth + (d, 0.0), truth) - d / iod) <= 1e-12
        assert average_precision([FaceBox(0, 0, 10, 10, 0.9)], [FaceBox(0, 0, 10, 10)]) == 1.0


@pytest.mark.acceptance(9, "visualization model and SVG output")
def test_criterion_09_visualization():
    with Budget(30.0):
        viz = fit_visualization_model(*viz_training_data(seed=21, n=600))
        n = neutral_face(viz)
        assert np.array_equal(au_to_landmarks(viz, np.zeros(20)), n)
        rng = np.random.default_rng(109)
        a, b = rng.random(20) * 0.5, rng.random(20) * 0.5
        np.testing.assert_allclose(au_to_landmarks(viz, a) + au_to_landmarks(viz, b) - n,
                                   au_to_landmarks(viz, a + b), atol=1e-8)
        moved = au_to_landmarks(viz, {"AU12": 1.0})
        for i in (48, 54):
            assert moved[i, 1] < n[i, 1]  # image y grows downward
        table, conditions = goodnews_table(7)
        clf = replicate_goodnews(table, conditions).classifier

        def figures():
            faces = coefficient_faces(clf, viz)
            return [render_face(moved, vectors_from=n), render_face(moved, heat=np.hypot(*(moved - n).T)),
                    plot_detections(full_row()), faces.positive_svg, faces.negative_svg, faces.chart_svg]

        first, second = figures(), figures()
        for x, y in zip(first, second):
            ET.fromstring(x.encode())
            assert x == y


@pytest.mark.acceptance(10, "end-to-end CLI determinism and --jobs")
def test_criterion_10_cli(tmp_path):
    with Budget(120.0):
        d = tmp_path / "work"
        d.mkdir()
        assert run("synth", "faces", "--seed", 3, "--n", 16, "--size", 112, "--images-out", d / "img",
                   "--landmarks-out", d / "lm.csv", "--labels-out", d / "labels.csv") == 0
        assert run("synth", "goodnews", "--seed", 7, "--out", d / "gn.csv", "--conditions-out", d / "cond.csv") == 0
        assert run("extract", "--images", d / "img", "--landmarks", d / "lm.csv", "--pca", "fit",
                   "--pca-out", d / "pca.json", "--out", d / "X.csv") == 0
        assert run("train", "--task", "au", "--model", "logistic", "--features", d / "X.csv",
                   "--labels", d / "labels.csv", "--seed", 0, "--out", d / "model.json") == 0
        assert run("viz", "fit", "--seed", 3, "--samples", 300, "--out", d / "viz.json") == 0
        (d / "grid.json").write_text(json.dumps({"n_trees": [5], "max_depth": [3, 6]}))
        (d / "bands.json").write_text(json.dumps({"bands": [[0.5, 2.0], [2.0, 5.0]], "columns": ["AU12"]}))
        sessions = [line.split(",")[0] for line in (d / "cond.csv").read_text().splitlines()[1:]]
        (d / "design.csv").write_text("session,dose\n" + "".join(f"{s},{k % 5}\n" for k, s in enumerate(sessions)))
        from conftest import random_table
        from fexkit.fexdata import write_fex_csv

        rng = np.random.default_rng(4)
        write_fex_csv(random_table(rng, 30), d / "pred.fex.csv")
        write_fex_csv(random_table(rng, 30), d / "truth.fex.csv")

        first, second = run_all(d, tmp_path / "a"), run_all(d, tmp_path / "b")
        assert first == second
        for name in ("extract", "train", "replicate"):
            outs = []
            for jobs in (1, 4):
                o = tmp_path / f"{name}{jobs}"
                o.mkdir()
                assert run(*commands(d, o)[name], "--jobs", jobs) == 0
                outs.append(snapshot(o))
            assert outs[0] == outs[1]
