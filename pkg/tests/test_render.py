import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from catamva.ca import fit_ca
from catamva.errors import DimensionOutOfRange, EmptyModel, RankZeroWarning
from catamva.ingest import ContingencyTable
from catamva.inference import bootstrap_means
from catamva.mds import MDSModel
from catamva.mfa import mfa_from_tables
from catamva.plsc import fit_plsc
from catamva.render import FigureSpec, convex_hull, render


def classes(svg, name):
    return len(re.findall(rf'class="{name}[" ]', svg))


@pytest.fixture
def ca(rng):
    N = rng.integers(1, 30, size=(8, 7)).astype(float)
    return fit_ca(ContingencyTable([f"e{i}" for i in range(8)], [f"l{j}" for j in range(7)], N))


def test_scree_markers(rng):
    N = rng.integers(1, 30, size=(6, 7)).astype(float)
    m = fit_ca(N)
    assert m.n_dims == 5
    svg = render(FigureSpec("scree", significant=[True, True, True, False, False]), m)
    assert classes(svg, "significance-marker") == 3
    assert classes(svg, "average-line") == 1
    assert classes(svg, "bar") == 5
    ET.fromstring(svg)


def test_factor_map_axis_labels(ca):
    svg = render(FigureSpec("factor-map", colors=[0, 1] * 4), ca)
    pattern = r"Dimension 1, λ = [0-9.e+-]+, τ = [0-9]+\.[0-9]{2}%"
    assert re.search(pattern, svg)
    assert re.search(pattern.replace("1", "2", 1), svg)
    assert classes(svg, "point") == 8
    ET.fromstring(svg)


def test_factor_map_supplementary(ca):
    svg = render(FigureSpec("factor-map", supplementary={"e99": ca.F[0]}), ca)
    assert classes(svg, "supplementary-point") == 1


def test_contribution_bars(ca):
    svg = render(FigureSpec("contribution-bars", dims=(2, 2), side="column"), ca)
    assert classes(svg, "contribution-bar") == 7
    assert classes(svg, "threshold-line") == 2


def test_mfa_partial_map(rng):
    rows = [f"r{i}" for i in range(5)]
    ts = [ContingencyTable(rows, list("abc"), rng.integers(1, 9, (5, 3))) for _ in range(2)]
    m = mfa_from_tables(ts, ["F", "U"])
    svg = render(FigureSpec("mfa-partial-map"), m)
    assert classes(svg, "compromise-point") == 5
    assert classes(svg, "partial-point") == 10
    assert classes(svg, "partial-segment") == 10


def test_mds_ellipse_map(rng):
    scores = rng.normal(size=(20, 2))
    m = MDSModel(scores, np.array([2.0, 1.0]), 0.0, tuple(str(i) for i in range(20)), ("F", "U") * 10)
    boot = bootstrap_means(scores, m.groups, B=50, seed=0)
    svg = render(FigureSpec("mds-ellipse-map", ellipses=boot.ellipses), m)
    assert classes(svg, "confidence-ellipse") == 2
    assert classes(svg, "group-mean") == 2


def test_latent_pair_map(rng):
    rows = [f"r{i}" for i in range(10)]
    p = fit_plsc(ContingencyTable(rows, list("abc"), rng.uniform(0, 5, (10, 3))),
                 ContingencyTable(rows, list("xy"), rng.uniform(0, 5, (10, 2))))
    svg = render(FigureSpec("latent-pair-map", dims=(1, 1), colors=[0] * 5 + [1] * 5), p)
    assert classes(svg, "tolerance-hull") == 2
    assert classes(svg, "point") == 10


def test_deterministic(ca):
    a = render(FigureSpec("factor-map"), ca)
    b = render(FigureSpec("factor-map"), ca)
    assert a == b


def test_empty_model():
    with pytest.warns(RankZeroWarning):
        m = fit_ca(np.ones((3, 3)))
    for kind in ("scree", "factor-map"):
        with pytest.raises(EmptyModel):
            render(FigureSpec(kind), m)


def test_dimension_out_of_range(ca):
    with pytest.raises(DimensionOutOfRange):
        render(FigureSpec("factor-map", dims=(1, 9)), ca)


def test_convex_hull():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]])
    hull = convex_hull(pts)
    assert len(hull) == 4 and [0.5, 0.5] not in hull.tolist()
