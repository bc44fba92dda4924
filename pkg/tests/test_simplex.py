from __future__ import annotations

import numpy as np
import pytest

from modexp.simplex import dirichlet_starts, multistart, project_simplex, projected_ascent, vertices


def test_project_simplex():
    assert np.allclose(project_simplex(np.array([0.2, 0.8])), [0.2, 0.8])
    assert np.allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])
    assert np.allclose(project_simplex(np.array([1.0, 1.0, 1.0])), [1 / 3] * 3)
    x = project_simplex(np.array([-1.0, 0.3, 5.0, 0.1]))
    assert x.min() >= 0 and x.sum() == pytest.approx(1.0)


def test_starts():
    assert [v.tolist() for v in vertices(2)] == [[1.0, 0.0], [0.0, 1.0]]
    starts = dirichlet_starts(3, 4, seed=1)
    assert len(starts) == 4
    assert np.allclose([s.sum() for s in starts], 1.0)
    assert dirichlet_starts(3, 0, seed=1) == []
    assert np.array_equal(starts[0], dirichlet_starts(3, 4, seed=1)[0])


def test_ascent_finds_interior_maximum():
    target = np.array([0.2, 0.5, 0.3])
    res = projected_ascent(lambda x: -float(np.sum((x - target) ** 2)), lambda x: -2 * (x - target), np.full(3, 1 / 3))
    assert res.converged
    assert np.allclose(res.x, target, atol=1e-5)


def test_ascent_stops_on_a_vertex():
    c = np.array([1.0, 3.0, 2.0])
    res = projected_ascent(lambda x: float(c @ x), lambda x: c, np.full(3, 1 / 3))
    assert res.x.argmax() == 1
    assert res.value == pytest.approx(3.0, abs=1e-9)


def test_multistart_keeps_best():
    # two local maxima at the vertices; the second is higher
    f = lambda x: float(x[0] ** 2 + 2 * x[1] ** 2)  # noqa: E731
    g = lambda x: np.array([2 * x[0], 4 * x[1]])  # noqa: E731
    best = multistart(f, g, [np.array([0.9, 0.1]), np.array([0.1, 0.9])])
    assert best is not None
    assert best.value == pytest.approx(2.0, abs=1e-9)
    assert multistart(f, g, []) is None
