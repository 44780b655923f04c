import re
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fexkit.errors import DimensionMismatch, EmptyRow
from fexkit.fexdata import AU_NAMES, EMOTION_NAMES, FexTable
from fexkit.geometry import flatten_landmarks, neutral_template
from fexkit.learn import TrainedModel
from fexkit.render import (
    CHART_HEIGHT,
    FaceSketch,
    au_to_landmarks,
    coefficient_chart,
    coefficient_faces,
    fit_visualization_model,
    neutral_face,
    plot_detections,
    ramp_color,
    render_face,
)
from fexkit.synth import AU_DISPLACEMENTS, FACE_STROKES, viz_training_data

GOLDEN = Path(__file__).parent / "data" / "detections_golden.svg"
SVG = "{http://www.w3.org/2000/svg}"
AU12 = AU_NAMES.index("AU12")


@pytest.fixture(scope="module")
def viz():
    aus, shapes = viz_training_data(seed=21, n=600)
    return fit_visualization_model(aus, shapes)


def parse(svg):
    return ET.fromstring(svg.encode())


def full_row():
    lm = neutral_template() * 0.8 + 150.0
    cols = {"FaceRectX": [60.0], "FaceRectY": [70.0], "FaceRectWidth": [180.0], "FaceRectHeight": [190.0]}
    cols["FaceScore"] = [0.98]
    flat = flatten_landmarks(lm)
    for i in range(68):
        cols[f"x_{i}"] = [flat[i]]
        cols[f"y_{i}"] = [flat[68 + i]]
    for k, name in enumerate(AU_NAMES):
        cols[name] = [round(k / 19, 4)]
    for k, name in enumerate(EMOTION_NAMES):
        cols[name] = [[0.05, 0.05, 0.05, 0.7, 0.05, 0.05, 0.05][k]]
    return FexTable.from_columns(1, cols).row(0)


def test_stroke_topology():
    assert len(FACE_STROKES) == 8
    for _, parts in FACE_STROKES:
        for idx, _closed in parts:
            assert all(0 <= i <= 67 for i in idx)
    closed = {name for name, parts in FACE_STROKES if all(c for _, c in parts)}
    assert closed == {"eye_left", "eye_right", "lips_outer", "lips_inner"}


def test_neutral_face_has_eight_paths():
    svg = render_face(FaceSketch(neutral_template()))
    root = parse(svg)
    assert len(root.findall(f".//{SVG}path")) == 8
    assert svg == render_face(FaceSketch(neutral_template()))
    assert re.search(r"\d\.\d{5,}", svg) is None


def test_zero_displacement_has_no_arrows():
    t = neutral_template()
    root = parse(render_face(t, vectors_from=t))
    assert root.findall(f".//{SVG}line") == []
    assert root.findall(f".//{SVG}marker") == []


def test_vector_overlay_one_arrow_per_moved_point():
    t = neutral_template()
    moved = t + AU_DISPLACEMENTS[AU12]
    root = parse(render_face(moved, vectors_from=t))
    n_moved = int(np.count_nonzero(np.any(AU_DISPLACEMENTS[AU12] != 0, axis=1)))
    assert len(root.findall(f".//{SVG}line")) == n_moved == 8


def test_heat_overlay_ramp():
    heat = np.linspace(0, 2, 68)
    root = parse(render_face(neutral_template(), heat=heat))
    dots = root.findall(f".//{SVG}circle")
    assert len(dots) == 68
    assert dots[0].get("fill") == "#2c7bb6" and dots[-1].get("fill") == "#d7191c"
    assert ramp_color(0.5) == "#ffffbf"
    with pytest.raises(DimensionMismatch):
        render_face(neutral_template(), heat=np.ones(3))


def test_detections_facebox_only():
    row = FexTable.from_columns(
        1, {"FaceRectX": [10.0], "FaceRectY": [10.0], "FaceRectWidth": [50.0], "FaceRectHeight": [60.0]}
    ).row(0)
    root = parse(plot_detections(row))
    assert len(root.findall(f".//{SVG}rect")) == 1


def test_detections_au_anchor():
    row = FexTable.from_columns(1, {"AU01": [1.0], "AU02": [0.25]}).row(0)
    bars = [r for r in parse(plot_detections(row)).iter(f"{SVG}rect") if r.get("class") == "bar"]
    heights = [float(b.get("height")) for b in bars]
    assert heights[0] == CHART_HEIGHT == 200.0
    assert abs(heights[1] - 0.25 * CHART_HEIGHT) <= 0.5


@given(v=st.lists(st.floats(0, 1), min_size=20, max_size=20))
@settings(max_examples=30)
def test_bar_heights_proportional(v):
    row = FexTable.from_columns(1, {n: [x] for n, x in zip(AU_NAMES, v)}).row(0)
    bars = [r for r in parse(plot_detections(row)).iter(f"{SVG}rect") if r.get("class") == "bar"]
    for b, x in zip(bars, v):
        assert abs(float(b.get("height")) - x * CHART_HEIGHT) <= 0.5


def test_detections_empty_row():
    with pytest.raises(EmptyRow):
        plot_detections(FexTable.from_columns(1).row(0))


def test_detections_golden_file():
    svg = plot_detections(full_row())
    parse(svg)
    assert svg.encode() == GOLDEN.read_bytes()


def test_detections_with_image_parses(rng):
    root = parse(plot_detections(full_row(), image=rng.random((40, 30))))
    assert len(root.findall(f".//{SVG}image")) == 1


# --- visualisation model -----------------------------------------------------


def test_zero_aus_give_intercept(viz):
    np.testing.assert_array_equal(au_to_landmarks(viz, np.zeros(20)), neutral_face(viz))


def test_superposition(viz, rng):
    a, b = rng.random(20) * 0.5, rng.random(20) * 0.5
    n = neutral_face(viz)
    np.testing.assert_allclose(au_to_landmarks(viz, a) + au_to_landmarks(viz, b) - n, au_to_landmarks(viz, a + b), atol=1e-8)


def test_au12_moves_mouth_corners(viz):
    moved = au_to_landmarks(viz, {"AU12": 1.0}) - neutral_face(viz)
    for i in (48, 54):
        truth = AU_DISPLACEMENTS[AU12][i]
        assert np.linalg.norm(moved[i] - truth) <= 0.1 * np.linalg.norm(truth)


def test_viz_model_dimension_checks(viz):
    with pytest.raises(DimensionMismatch):
        au_to_landmarks(viz, np.zeros(5))
    with pytest.raises(DimensionMismatch):
        au_to_landmarks(viz, {"AU99": 1.0})


def linear(weights):
    return TrainedModel("logistic", ["bad", "good"], {"n_features": 20, "weights": np.atleast_2d(weights), "bias": np.zeros(1)})


def test_coefficient_faces_zero_and_single(viz):
    faces = coefficient_faces(linear(np.zeros(20)), viz)
    np.testing.assert_array_equal(faces.positive_landmarks, neutral_face(viz))
    np.testing.assert_array_equal(faces.negative_landmarks, neutral_face(viz))
    w = np.zeros(20)
    w[AU12] = 1.0
    faces = coefficient_faces(linear(w), viz, scale=1.0)
    np.testing.assert_array_equal(faces.positive_landmarks, au_to_landmarks(viz, {"AU12": 1.0}))
    for doc in (faces.positive_svg, faces.negative_svg, faces.chart_svg):
        parse(doc)
    with pytest.raises(DimensionMismatch):
        coefficient_faces(linear(np.zeros(5)), viz)


def test_coefficient_faces_goodnews_sign(viz):
    from fexkit.pipeline import replicate_goodnews
    from fexkit.synth import goodnews_table

    table, conditions = goodnews_table(7)
    rep = replicate_goodnews(table, conditions, positive="good")
    faces = coefficient_faces(rep.classifier, viz)
    for i in (48, 54):
        assert faces.positive_landmarks[i, 1] < faces.negative_landmarks[i, 1]


def test_coefficient_chart_colours():
    w = np.zeros(20)
    w[0], w[1] = 1.0, -0.5
    bars = [r for r in parse(coefficient_chart(w)).iter(f"{SVG}rect") if r.get("class") == "bar"]
    assert bars[0].get("fill") == "#d7191c" and bars[1].get("fill") == "#2c7bb6"
    assert float(bars[1].get("height")) == pytest.approx(float(bars[0].get("height")) / 2, abs=1e-3)
