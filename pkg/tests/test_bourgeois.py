import numpy as np
import pytest

from contactlab.bourgeois import (
    BourgeoisData, average_potential, bourgeois_alpha, bourgeois_criterion, bourgeois_form,
    bourgeois_weak_filling_check, domain_condition, explicit_potential, potential_of, scaling_audit, twisted_alpha,
)
from contactlab.calculus import ExprForm, ScalarExpr
from contactlab.charts import sample_grid, sphere3
from contactlab.positivity import contact_check
from contactlab.scene import load_scene

S3 = sphere3()
ALPHA = ExprForm(S3.coords, 1, {"y1": "x1", "x1": "-y1", "y2": "x2", "x2": "-y2"})
PGRID = [4, 4, 4, 3, 3]


def _data(eps=1.0):
    return BourgeoisData(S3, ALPHA, ScalarExpr(S3.coords, "x2"), ScalarExpr(S3.coords, "y2"), eps)


def test_product_coordinates():
    alpha, P = bourgeois_alpha(_data())
    assert P.coords[-2:] == ("q1", "q2")
    assert P.dim == 5 and alpha.degree == 1


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.25])
def test_contact_margin_scales_with_eps_squared(eps):
    res = bourgeois_form(_data(eps), [4, 4, 4], PGRID)
    assert res.contact.passed and res.domain.passed
    assert abs(res.contact.min_margin - 2 * eps**2) < 1e-12


def test_domain_condition_holds_for_the_disk_open_book():
    assert domain_condition(_data(), [4, 4, 4]).passed


def test_plain_potential_is_flat_and_criterion_passes():
    data = _data()
    alpha, P = bourgeois_alpha(data)
    pg = sample_grid(P, PGRID)
    pot = potential_of(alpha, P, data.torus, data.beta, pg)
    crit = bourgeois_criterion(pot, data.beta, pg)
    assert crit.passed


def test_scaling_with_twist():
    sc = load_scene("s3_bourgeois")
    data = _data()
    P = data.product()
    tw = sc.data["bourgeois"]["twist"]
    tau = (ScalarExpr(P.coords, tw["tau1"]), ScalarExpr(P.coords, tw["tau2"]))
    out = scaling_audit(data, [1.0, 0.5, 0.25], [3, 3, 3, 3, 3], tau)
    assert out["curl_nonzero"] and out["passed"]
    assert out["max_curl_ratio_error"] <= 0.01 and out["max_bracket_ratio_error"] <= 0.01
    a, _ = twisted_alpha(data, 0.5, tau)
    assert contact_check(a, P, [3, 3, 3, 3, 3]).count == 3**5


def test_averaging_identity_for_the_oscillatory_potential():
    sc = load_scene("s3_bourgeois")
    cfg = sc.data["bourgeois"]["potential"]
    P = _data().product()
    pot = explicit_potential(P, S3, ("q1", "q2"), cfg["A1"], cfg["A2"], sc.params)
    av = average_potential(pot, [4, 4, 4], 32)
    assert av.report.passed
    assert av.report.details["max_identity_residual"] <= 1e-8


def test_weak_filling_on_the_sphere():
    omega = ExprForm(S3.coords, 2, {"x1,y1": "2", "x2,y2": "2"})
    res = bourgeois_weak_filling_check(_data(), omega, [4, 4, 4], PGRID, 1.0)
    assert res.report.passed and res.base.passed
    assert res.eps >= 2.0**-20
    assert res.report.details["exponent"] == 2
