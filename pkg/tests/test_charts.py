import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactlab.charts import (
    Box, LevelSet, PeriodicBox, Product, circle, constraint_values, frames, project, sample_grid, sphere3,
    tangent_frame, wrap_delta,
)
from contactlab.errors import DimensionMismatch, OffManifoldPoint, RankDeficient, UnparametrizedLevelSet

T3 = PeriodicBox(("x", "y", "theta"))


def test_periodic_grid_is_lexicographic():
    g = sample_grid(T3, [2, 3, 4])
    assert len(g) == 24
    assert tuple(g[0].index) == (0, 0, 0) and tuple(g[1].index) == (0, 0, 1)
    assert np.allclose(g.points[1], [0, 0, math.pi / 2])
    assert np.max(g.points) < 2 * math.pi


def test_resolution_errors():
    with pytest.raises(DimensionMismatch):
        sample_grid(T3, [2, 3])


def test_sphere_samples_are_on_the_sphere():
    S = sphere3()
    g = sample_grid(S, [5, 6, 7])
    assert len(g) == 5 * 6 * 7
    assert np.max(np.abs(constraint_values(S, g.points))) < 1e-12


def test_level_set_without_recipe():
    L = LevelSet(("a", "b", "c"), ("a^2 + b^2 + c^2 - 1",))
    with pytest.raises(UnparametrizedLevelSet):
        sample_grid(L, 4)


def test_frames_are_tangent_orthonormal_and_oriented():
    S = sphere3()
    pts = sample_grid(S, [4, 5, 5]).points
    F = frames(S, pts)
    assert F.shape == (len(pts), 4, 3)
    assert np.allclose(np.einsum("nDi,nD->ni", F, pts), 0, atol=1e-12)
    assert np.allclose(np.einsum("nDi,nDj->nij", F, F), np.eye(3), atol=1e-12)
    full = np.concatenate([pts[:, :, None], F], axis=2)
    assert np.all(np.linalg.det(full) > 0)


def test_frame_methods_span_the_same_space():
    S = sphere3()
    pts = sample_grid(S, [3, 4, 4]).points
    a, b = frames(S, pts, method="qr"), frames(S, pts, method="projection")
    Pa = a @ np.swapaxes(a, 1, 2)
    Pb = b @ np.swapaxes(b, 1, 2)
    assert np.allclose(Pa, Pb, atol=1e-12)


def test_off_manifold_and_rank_deficiency():
    S = sphere3()
    with pytest.raises(OffManifoldPoint):
        frames(S, np.array([[2.0, 0, 0, 0]]))
    cone = LevelSet(("a", "b"), ("a^2 - b^2",), "circle")
    with pytest.raises(RankDeficient):
        frames(cone, np.array([[0.0, 0.0]]))


def test_tangent_frame_single_point():
    tf = tangent_frame(circle(), [0.0, 1.0])
    assert tf.vectors.shape == (2, 1)
    with pytest.raises(DimensionMismatch):
        tangent_frame(circle(), [0.0, 1.0, 2.0])


def test_product_frames_are_block_diagonal():
    P = Product((sphere3(), PeriodicBox(("q1", "q2"))))
    g = sample_grid(P, [[2, 3, 3], [2, 2]])
    assert len(g) == 2 * 3 * 3 * 4
    F = frames(P, g.points)
    assert F.shape == (len(g), 6, 5)
    assert np.allclose(F[:, 4:, 3:], np.eye(2))
    assert np.allclose(F[:, :4, 3:], 0)


def test_disk_box():
    B = Box.disk(("u", "v"), 1.0)
    g = sample_grid(B, 9)
    assert np.all(np.sum(g.points**2, axis=1) <= 1 + 1e-12)
    assert len(g) > 0


@settings(max_examples=50)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_projection_lands_on_the_sphere(v):
    p = project(sphere3(), np.array([v]))
    assert abs(np.linalg.norm(p) - 1) < 1e-12


@given(st.floats(-100, 100), st.floats(-100, 100))
def test_wrap_delta_range_and_congruence(a, b):
    d = wrap_delta(T3, np.array([a, b, 0.0]))
    p = 2 * math.pi
    assert -p / 2 - 1e-12 <= d[0] < p / 2 + 1e-12
    assert abs(math.remainder(d[1] - b, p)) < 1e-9
    assert d[2] == 0.0
