import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactlab.calculus import D, ExprForm
from contactlab.charts import PeriodicBox, sample_grid, sphere3
from contactlab.errors import EvenDimension, NotClosed, ZeroPolynomial
from contactlab.positivity import (
    contact_check, ray_minimum, ray_positive, refine_contact_check, weak_domination_check,
)
from oracles import T3, dense_ray_positive, random_poly

M = PeriodicBox(T3)
ALPHA1 = ExprForm(T3, 1, {"x": "cos(theta)", "y": "-sin(theta)"})
S3 = sphere3()
ALPHA_STD = ExprForm(S3.coords, 1, {"y1": "x1", "x1": "-y1", "y2": "x2", "x2": "-y2"})


def test_t3_margin_is_one():
    rep = contact_check(ALPHA1, M, 16)
    assert rep.passed and abs(rep.min_margin - 1) < 1e-12
    assert rep.count == 16**3
    assert set(rep.argmin) >= {"index", "grid_index", "point"}


def test_dtheta_is_not_contact():
    rep = contact_check(ExprForm(T3, 1, {"theta": "1"}), M, 8)
    assert not rep.passed and rep.min_margin == 0.0


def test_even_dimension_is_rejected():
    P = PeriodicBox(("a", "b"))
    with pytest.raises(EvenDimension):
        contact_check(ExprForm(P.coords, 1, {"a": "1"}), P, 4)


def test_negative_contact_form_fails():
    rep = contact_check(ExprForm(T3, 1, {"x": "cos(theta)", "y": "sin(theta)"}), M, 8)
    assert not rep.passed and rep.min_margin < 0


def test_refinement_keeps_history_and_margin_is_monotone():
    a = ExprForm(T3, 1, {"x": "cos(theta)", "y": "-sin(theta)", "theta": "0.3*sin(x)"})
    rep = refine_contact_check(a, M, [4, 8, 16])
    margins = [h["min_margin"] for h in rep.history]
    assert len(margins) == 3
    # nested grids: every coarse point is also a fine point
    assert margins[1] <= margins[0] + 1e-15 and margins[2] <= margins[1] + 1e-15


def test_sphere_weak_domination():
    omega = ExprForm(S3.coords, 2, {"x1,y1": "2", "x2,y2": "2"})
    rep = weak_domination_check(ALPHA_STD, omega, S3, [4, 6, 6])
    assert rep.passed
    assert rep.details["exponent"] == 1
    assert abs(rep.min_margin - 2.0) < 1e-12


def test_weak_domination_needs_closed_omega():
    omega = ExprForm(S3.coords, 2, {"x1,y1": "x2"})
    with pytest.raises(NotClosed):
        weak_domination_check(ALPHA_STD, omega, S3, [3, 4, 4])


def test_ray_positive_examples():
    assert ray_positive([1, 2, 3]).positive
    assert ray_positive([1, -2, 1.5]).positive
    r = ray_positive([1, -2, 1])  # (1 - tau)^2 touches zero at tau = 1
    assert not r.positive and abs(r.witness - 1) < 1e-6
    assert not ray_positive([1, 0, -1]).positive
    assert not ray_positive([0, 1]).positive
    assert ray_positive([2]).positive
    with pytest.raises(ZeroPolynomial):
        ray_positive([0, 0])


def test_negligible_middle_coefficient_is_dominated():
    r = ray_positive([7.545553868338346e-71, -2.563256570871091e-298, 1.0])
    assert r.positive and r.method == "am-gm"
    assert not ray_positive([1, -2.0000001, 1]).positive


def test_subnormal_coefficients():
    assert ray_positive([5e-324, 2.0]).positive
    r = ray_positive([1.0, -2.2250738585072014e-308])
    assert not r.positive and (r.witness is None or 1.0 - 2.2250738585072014e-308 * r.witness < 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ray_positive_agrees_with_dense_oracle(seed):
    c = random_poly(np.random.default_rng(seed))
    assert ray_positive(c).positive == dense_ray_positive(c)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6))
def test_negative_witness_is_genuine(c):
    if not np.any(c):
        return
    r = ray_positive(c)
    if not r.positive and r.witness is not None:
        # evaluate tau^-deg p(tau) to stay finite for huge witnesses
        w, d = r.witness, len(c) - 1
        terms = [ck * w ** (k - d) if w > 0 else (ck if k == 0 else 0.0) for k, ck in enumerate(c)]
        assert sum(terms) <= 1e-9 * sum(abs(t) for t in terms)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=5).filter(lambda c: c[-1] > 0.1))
def test_ray_minimum_is_a_lower_bound_on_samples(c):
    m = ray_minimum(c)
    taus = np.linspace(0, 20, 2001)
    assert m <= np.min(np.polyval(np.asarray(c)[::-1], taus)) + 1e-9
