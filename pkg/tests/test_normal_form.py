import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactlab.errors import ProfileViolation
from contactlab.normal_form import binding_normal_form, compare_prediction, radial_coefficients


def test_standard_profile():
    nf = binding_normal_form(2, "2 - r^2", "r^2", 1.0)
    assert all(v["passed"] for v in nf.conditions.values())
    assert abs(nf.radial["lambda"][0] - 0.5) < 1e-15
    assert nf.product.dim == 5


@pytest.mark.parametrize("h1,h2,cond", [("-1 - r^2", "r^2", "i"), ("2 + r^2", "r^2", "iv"),
                                        ("2 - r^2", "-r^2", "ii")])
def test_profile_violations(h1, h2, cond):
    with pytest.raises(ProfileViolation) as ei:
        binding_normal_form(2, h1, h2)
    assert ei.value.witness["condition"] == cond
    nf = binding_normal_form(2, h1, h2, raise_on_violation=False)
    assert not nf.conditions[cond]["passed"]


def test_prediction_matches_on_a_small_grid():
    nf = binding_normal_form(2, "2 - r^2", "r^2", 1.0)
    out = compare_prediction(nf, [8, 9, 9, 2, 2])
    assert out["passed"] and out["max_difference"] <= 1e-6
    assert out["binding_torus_max"] <= 1e-6


@settings(max_examples=10, deadline=None)
@given(st.floats(1.5, 4.0), st.floats(0.2, 1.0))
def test_binding_coefficient_is_reciprocal_of_h1(c, a):
    nf = binding_normal_form(2, f"{c} - {a}*r^2", "r^2", 1.0)
    lam, mu, _ = radial_coefficients(nf, np.array([0.0]))
    assert abs(lam[0] - 1 / c) < 1e-12
    assert abs(mu[0]) < 1e-12
