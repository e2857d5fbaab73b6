import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactlab.calculus import (
    D, ExprForm, ExprMap, contact_hamiltonian_field, interior, lie_bracket, lie_derivative, on_frames, pair,
    pullback, reeb_vector_field, scalar, vector_field, wedge, wedge_power,
)
from contactlab.charts import PeriodicBox, frames, sample_grid, sphere3
from contactlab.errors import DegreeOverflow, DimensionMismatch, NotContact
from oracles import T3, random_field, random_one_form, random_trig

seeds = st.integers(0, 2**32 - 1)


def _pts(rng, n=5, dim=3):
    return rng.uniform(0, 2 * np.pi, (n, dim))


def _dense(f, pts):
    return f.jet(pts, 0).dense()


def _random_two_form(rng, coords=T3):
    keys = [f"{a},{b}" for i, a in enumerate(coords) for b in coords[i + 1:]]
    return ExprForm(coords, 2, {k: random_trig(rng, coords) for k in keys})


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_d_squared_vanishes(seed):
    rng = np.random.default_rng(seed)
    p = _pts(rng)
    f = scalar(T3, random_trig(rng))
    a = random_one_form(rng)
    assert np.max(np.abs(_dense(D(D(f)), p))) <= 1e-10
    assert np.max(np.abs(_dense(D(D(a)), p))) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_wedge_graded_commutativity_and_leibniz(seed):
    rng = np.random.default_rng(seed)
    p = _pts(rng)
    a, b = random_one_form(rng), random_one_form(rng)
    assert np.allclose(_dense(wedge(a, b), p), -_dense(wedge(b, a), p), atol=1e-12)
    w = _random_two_form(rng)
    assert np.allclose(_dense(wedge(a, w), p), _dense(wedge(w, a), p), atol=1e-12)
    lhs = _dense(D(wedge(a, b)), p)
    rhs = _dense(wedge(D(a), b) - wedge(a, D(b)), p)
    assert np.allclose(lhs, rhs, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_cartan_identities(seed):
    rng = np.random.default_rng(seed)
    p = _pts(rng)
    a = random_one_form(rng)
    X, Y = random_field(rng), random_field(rng)
    # i_[X,Y] a = L_X (i_Y a) - i_Y (L_X a)
    lhs = _dense(pair(a, lie_bracket(X, Y)), p)
    rhs = _dense(lie_derivative(X, pair(a, Y)) - interior(Y, lie_derivative(X, a)), p)
    assert np.allclose(lhs, rhs, atol=1e-9)
    # d commutes with L_X
    assert np.allclose(_dense(D(lie_derivative(X, a)), p), _dense(lie_derivative(X, D(a)), p), atol=1e-9)
    Bxy, Byx = lie_bracket(X, Y).values(p), lie_bracket(Y, X).values(p)
    assert np.allclose(Bxy, -Byx, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_pullback_commutes_with_d(seed):
    rng = np.random.default_rng(seed)
    p = _pts(rng)
    a = random_one_form(rng)
    F = ExprMap(T3, T3, [f"x + 0.3*sin(y)", f"y + 0.2*cos(theta + x)", "theta + 0.1*sin(x)*cos(y)"])
    assert np.allclose(_dense(pullback(F, D(a)), p), _dense(D(pullback(F, a)), p), atol=1e-10)


def test_wedge_power_and_degree_errors():
    w = ExprForm(T3, 2, {"x,y": "1"})
    assert wedge_power(w, 0).degree == 0
    with pytest.raises(DegreeOverflow):
        wedge(w, w)
    with pytest.raises(DegreeOverflow):
        D(ExprForm(T3, 3, {"x,y,theta": "1"})).jet(np.zeros((1, 3)), 0)
    with pytest.raises(DimensionMismatch):
        wedge(ExprForm(T3, 1, {"x": "1"}), ExprForm(("u", "v"), 1, {"u": "1"}))


def test_form_keys_are_antisymmetric():
    a = ExprForm(T3, 2, {"y,x": "1"})
    b = ExprForm(T3, 2, {"x,y": "-1"})
    p = np.zeros((1, 3))
    assert np.allclose(_dense(a, p), _dense(b, p))


def test_top_form_does_not_depend_on_frame_method():
    S = sphere3()
    alpha = ExprForm(S.coords, 1, {"y1": "x1", "x1": "-y1", "y2": "x2", "x2": "-y2"})
    top = wedge(alpha, D(alpha))
    pts = sample_grid(S, [4, 5, 5]).points
    v1 = on_frames(top, pts, frames(S, pts, method="qr"))
    v2 = on_frames(top, pts, frames(S, pts, method="projection"))
    assert np.allclose(v1, v2, atol=1e-12)
    assert np.allclose(v1, 2.0, atol=1e-12)


def test_reeb_fields():
    M = PeriodicBox(T3)
    a = ExprForm(T3, 1, {"x": "cos(theta)", "y": "-sin(theta)"})
    pts = sample_grid(M, 6).points
    R = reeb_vector_field(a, M).values(pts)
    th = pts[:, 2]
    assert np.allclose(R, np.stack([np.cos(th), -np.sin(th), 0 * th], axis=1), atol=1e-12)
    S = sphere3()
    s = ExprForm(S.coords, 1, {"y1": "x1", "x1": "-y1", "y2": "x2", "x2": "-y2"})
    p = sample_grid(S, [3, 4, 4]).points
    RS = reeb_vector_field(s, S).values(p)
    hopf = np.stack([-p[:, 1], p[:, 0], -p[:, 3], p[:, 2]], axis=1)
    assert np.allclose(RS, hopf, atol=1e-12)
    with pytest.raises(NotContact):
        reeb_vector_field(ExprForm(T3, 1, {"theta": "1"}), M).values(pts)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_contact_hamiltonian_field(seed):
    rng = np.random.default_rng(seed)
    M = PeriodicBox(T3)
    a = ExprForm(T3, 1, {"x": "cos(theta)", "y": "-sin(theta)"})
    H = scalar(T3, random_trig(rng))
    X = contact_hamiltonian_field(a, H, M)
    p = _pts(rng)
    assert np.allclose(_dense(pair(a, X), p)[:, 0], _dense(H, p)[:, 0], atol=1e-10)
    # L_X a = g a with g = (L_X a)(R)
    L = lie_derivative(X, a)
    R = reeb_vector_field(a, M)
    g = _dense(interior(R, L), p)[:, 0]
    assert np.allclose(_dense(L, p), g[:, None] * _dense(a, p), atol=1e-9)


def test_vector_field_rejects_unknown_components():
    with pytest.raises(DimensionMismatch):
        vector_field(T3, {"w": "1"})
