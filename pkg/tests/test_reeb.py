import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactlab.calculus import ExprField, ExprForm, reeb_vector_field
from contactlab.charts import Box, PeriodicBox, constraint_values, sample_grid, sphere3
from contactlab.errors import LeftDomain, StepCollapse
from contactlab.reeb import (
    closed_orbit_search, contractible_orbit_audit, energy_audit, integrate_flow, integrate_flows, orbit_table,
    reeb_field, reeb_on_frames,
)
from oracles import T3

S3 = sphere3()
ALPHA_STD = ExprForm(S3.coords, 1, {"y1": "x1", "x1": "-y1", "y2": "x2", "x2": "-y2"})
TORUS = PeriodicBox(T3)
ALPHA1 = ExprForm(T3, 1, {"x": "cos(theta)", "y": "-sin(theta)"})


def test_reeb_field_residuals_on_the_sphere():
    rf = reeb_field(ALPHA_STD, S3, [4, 5, 5])
    assert rf.report["passed"]
    assert rf.report["alpha_R_minus_1"] <= 1e-12 and rf.report["iota_R_dalpha"] <= 1e-12
    pts = rf.grid.points
    assert np.allclose(rf.values(pts), rf.table)
    assert np.allclose(np.einsum("nD,nD->n", rf.table, pts), 0, atol=1e-12)


def test_frame_solve_agrees_with_bordered_solve():
    a = ExprForm(S3.coords, 1, {"y1": "x1", "x1": "-y1", "y2": "2*x2", "x2": "-2*y2"})
    pts = sample_grid(S3, [3, 4, 4]).points
    R1 = reeb_vector_field(a, S3).values(pts)
    R2 = reeb_on_frames(a, S3, pts)
    assert np.allclose(R1, R2, atol=1e-10)


def test_hopf_flow_returns_after_two_pi():
    R = reeb_vector_field(ALPHA_STD, S3)
    seed = np.array([math.cos(0.4), 0.0, math.sin(0.4), 0.0])
    tr = integrate_flow(R, S3, seed, 2 * math.pi)
    assert tr.status == "complete"
    assert abs(tr.times[-1] - 2 * math.pi) < 1e-12
    assert np.linalg.norm(tr.end - seed) < 1e-8
    assert np.max(np.abs(constraint_values(S3, tr.points))) < 1e-12
    audit = energy_audit(ALPHA_STD, R, S3, tr)
    assert abs(audit["alpha_X_start"] - 1) < 1e-12 and audit["drift_per_unit_time"] < 1e-10


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_t3_flow_is_a_straight_line(x, y, th):
    R = reeb_vector_field(ALPHA1, TORUS)
    tr = integrate_flow(R, TORUS, [x, y, th], 20.0)
    t = tr.times[-1]
    exact = np.array([x + t * math.cos(th), y - t * math.sin(th), th])
    assert np.linalg.norm(tr.end - exact) < 1e-8


def test_batched_flows_match_single_flows():
    R = reeb_vector_field(ALPHA1, TORUS)
    seeds = sample_grid(TORUS, [1, 2, 5]).points
    batch = integrate_flows(R, TORUS, seeds, 5.0)
    for s, tb in zip(seeds, batch):
        t1 = integrate_flow(R, TORUS, s, 5.0)
        assert np.array_equal(t1.points, tb.points)


def test_left_domain_and_step_collapse():
    B = Box.disk(("u", "v"), 1.0)
    X = ExprField(B.coords, {"u": "1"})
    tr = integrate_flow(X, B, [0.0, 0.0], 5.0)
    assert tr.status == "left-domain" and tr.times[-1] < 1.5
    with pytest.raises(LeftDomain):
        integrate_flow(X, B, [0.0, 0.0], 5.0, strict=True)
    line = Box(("u",), (-1e150,), (1e150,))
    with pytest.raises(StepCollapse):
        integrate_flow(ExprField(("u",), {"u": "u^3"}), line, [1.0], 2.0)


def test_hopf_orbits_are_closed_with_period_two_pi():
    R = reeb_vector_field(ALPHA_STD, S3)
    seeds = sample_grid(S3, [2, 2, 1]).points
    recs = closed_orbit_search(R, S3, seeds, 8.0)
    covered = {i for r in recs if r.closed for i in [r.index, *r.duplicates]}
    assert covered == set(range(len(seeds)))
    for r in recs:
        assert abs(r.period - 2 * math.pi) < 1e-7 and r.residual <= 1e-6
    json.dumps(orbit_table(recs))


def test_period_is_stable_under_tolerance_halving():
    R = reeb_vector_field(ALPHA_STD, S3)
    seed = [[math.cos(1.0), 0.0, math.sin(1.0), 0.0]]
    p1 = closed_orbit_search(R, S3, seed, 8.0, integrator_tol=1e-10)[0].period
    p2 = closed_orbit_search(R, S3, seed, 8.0, integrator_tol=5e-11)[0].period
    assert abs(p1 - p2) <= 1e-7


def test_t3_windings():
    R = reeb_vector_field(ALPHA1, TORUS)
    seeds = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, math.pi / 4], [0.0, 0.0, 0.3]])
    recs = closed_orbit_search(R, TORUS, seeds, 10.0, torus=("x", "y"))
    by_seed = {r.index: r for r in recs}
    assert by_seed[0].closed and by_seed[0].winding == {"x": 1, "y": 0}
    assert abs(by_seed[0].period - 2 * math.pi) < 1e-8
    assert by_seed[1].closed and by_seed[1].winding == {"x": 1, "y": -1}
    assert abs(by_seed[1].period - 2 * math.sqrt(2) * math.pi) < 1e-8
    assert 2 not in by_seed or not by_seed[2].closed
    audit = contractible_orbit_audit(recs, TORUS, lambda p: np.full(len(p), np.inf), ("x", "y"))
    assert audit["passed"] and audit["vacuous"]


def test_audit_flags_a_zero_winding_orbit_off_the_binding():
    R = reeb_vector_field(ALPHA_STD, S3)
    recs = closed_orbit_search(R, S3, [[1.0, 0.0, 0.0, 0.0]], 8.0)
    far = contractible_orbit_audit(recs, S3, lambda p: np.ones(len(p)), ())
    assert not far["passed"] and far["zero_winding_closed"] == 1
    near = contractible_orbit_audit(recs, S3, lambda p: np.sqrt(p[:, 2] ** 2 + p[:, 3] ** 2), ())
    assert near["passed"]
