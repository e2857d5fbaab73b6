import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactlab.calculus import D
from contactlab.charts import sample_grid
from contactlab.cover import (
    binding_margin_audit, boundary_filling_form, contactize, cyclic_cover_s3, deck_invariance_check, epsilon_search,
    local_model, local_model_alpha, pullback_branched, s3_alpha,
)
from contactlab.positivity import contact_check


@pytest.fixture(scope="module", params=[2, 3, 5])
def model(request):
    c = local_model(request.param)
    ahat, rep = pullback_branched(c, local_model_alpha(c.target))
    return c, ahat, rep


def test_pullback_is_adjusted(model):
    c, ahat, rep = model
    assert rep.passed
    assert contact_check(ahat, c.source, c.source_res).min_margin == 0.0


def test_deck_maps_generate_the_cyclic_group(model):
    c, _, _ = model
    assert len(c.deck) == c.k - 1
    pts = sample_grid(c.source, c.source_res).points
    # k-fold composition of the generator is the identity
    y = pts
    for _ in range(c.k):
        y = c.deck[0].values(y)
    assert np.allclose(y, pts, atol=1e-12)
    assert np.allclose(c.map.values(c.deck[0].values(pts)), c.map.values(pts), atol=1e-12)


def test_epsilon_search_and_binding_audit(model):
    c, ahat, _ = model
    es = epsilon_search(ahat, c)
    assert es.eps > 0
    assert contactize(ahat, c, es.eps, 0.0) is ahat
    audit = binding_margin_audit(ahat, c, es.eps)
    assert audit["passed"]
    assert audit["margin_at_s0"] == 0.0
    assert audit["linearity_error"] <= 1e-8


@settings(max_examples=10, deadline=None)
@given(st.floats(1e-3, 2.0), st.floats(0.0, 1.0))
def test_contactized_forms_are_deck_invariant(eps, s):
    c = local_model(3)
    ahat, _ = pullback_branched(c, local_model_alpha(c.target))
    out = deck_invariance_check(contactize(ahat, c, eps, s), c, [5, 5, 4])
    assert out["max_residual"] <= 1e-12


def test_s3_cover():
    c = cyclic_cover_s3(2)
    ahat, rep = pullback_branched(c, s3_alpha(c.target))
    assert rep.passed
    es = epsilon_search(ahat, c)
    assert es.eps > 0
    assert deck_invariance_check(es.alpha, c)["passed"]


def test_boundary_filling_on_the_local_model():
    c = local_model(2)
    alpha = local_model_alpha(c.target)
    ff = boundary_filling_form(D(alpha), alpha, c, 1.0)
    assert ff.downstairs.passed and ff.upstairs.passed
    assert ff.eps > 0
