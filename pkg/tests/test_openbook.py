import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactlab.calculus import ExprForm
from contactlab.charts import PeriodicBox, sample_grid, sphere3
from contactlab.errors import TransversalityFailure
from contactlab.openbook import (
    choose_rescaling_radius, direction_error, fields_from_obd, obd_check, obd_from_fields, open_book, rescaled_map,
)
from contactlab.positivity import submanifold

S3 = sphere3()
ALPHA = ExprForm(S3.coords, 1, {"y1": "x1", "x1": "-y1", "y2": "x2", "x2": "-y2"})
BINDING = submanifold(PeriodicBox(("w",)), S3, ["cos(w)", "sin(w)", "0", "0"], "sqrt(x2^2 + y2^2)", [32])
GRID = [6, 6, 6]


def _ob(p1="x2", p2="y2"):
    return open_book(S3.coords, p1, p2, 0.1, BINDING)


@pytest.fixture(scope="module")
def pair():
    return fields_from_obd(_ob(), ALPHA, S3, GRID)


def test_disk_open_book_supports_alpha():
    rep = obd_check(_ob(), ALPHA, S3, GRID)
    assert rep.passed
    assert rep.checks["binding"].min_margin > 0 and rep.checks["page"].min_margin > 0


def test_reversed_orientation_fails():
    rep = obd_check(_ob("x2", "-y2"), ALPHA, S3, GRID)
    assert not rep.passed


def test_non_transverse_map_is_rejected():
    with pytest.raises(TransversalityFailure):
        obd_check(_ob("x2*x2", "y2"), ALPHA, S3, GRID)


def test_rescaled_map_is_unit_outside_eps():
    ob = _ob()
    r1, r2 = rescaled_map(ob, 0.5)
    pts = sample_grid(S3, GRID).points
    phi = ob.values(pts)
    nrm = np.linalg.norm(phi, axis=1)
    v = np.stack([r1.jet(pts, 0).scalar().val, r2.jet(pts, 0).scalar().val], axis=1)
    far, near = nrm >= 0.5, nrm <= 0.25
    assert np.allclose(np.linalg.norm(v[far], axis=1), 1.0)
    assert np.allclose(v[near], phi[near])
    assert 0 < choose_rescaling_radius(ob, ALPHA, S3, sample_grid(S3, GRID)) <= 0.5


def test_bracket_is_negative(pair):
    fp, rep = pair
    assert rep.checks["bracket"].passed and rep.checks["bracket"].min_margin > 0


def test_roundtrip_recovers_direction(pair):
    fp, _ = pair
    ob, rep = obd_from_fields(fp, GRID)
    assert rep.passed
    assert rep.details["direction_error"] <= 1e-8
    assert rep.details["binding_offset"] <= 1e-4
    pts = sample_grid(S3, GRID).points
    assert direction_error(fp.phi, (ob.phi1, ob.phi2), pts, 0.1) <= 1e-8


@settings(max_examples=5, deadline=None)
@given(st.floats(0, 2 * math.pi))
def test_angle_identity_at_any_angle(pair, theta):
    fp, _ = pair
    _, rep = obd_from_fields(fp, GRID, thetas=(theta,))
    ident = list(rep.details["identity"].values())[0]
    assert ident["samples"] > 0
    assert ident["max_error"] <= 1e-7
