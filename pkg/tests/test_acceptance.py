"""Acceptance criteria, each with its own tolerance and time budget."""

import time

import numpy as np
import pytest

from contactlab import parallel
from contactlab.bourgeois import BourgeoisData, average_potential, explicit_potential
from contactlab.calculus import D, ExprForm, lie_derivative
from contactlab.charts import PeriodicBox, sample_grid
from contactlab.cli import Settings, dumps_report, main, run_scene, strip_wall_clock
from contactlab.cover import contactize, local_model, local_model_alpha, pullback_branched
from contactlab.positivity import contact_check, ray_positive
from contactlab.reeb import reeb_field
from contactlab.scene import BUILTIN_SCENES, load_scene, scalar
from oracles import T3, dense_ray_positive, flow_lie_derivative, random_field, random_one_form, random_poly


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f} s, budget {self.seconds} s"


def _results(scene, command, **kw):
    rep, code = run_scene(scene, command, Settings(**kw))
    assert rep["error"] is None, rep["error"]
    return rep["results"], code


@pytest.mark.criterion(1, "calculus soundness on random T^3 inputs")
def test_calculus_soundness():
    rng = np.random.default_rng(20240101)
    with Budget(10):
        d2 = cartan = ad = 0.0
        for _ in range(1000):
            a, X = random_one_form(rng), random_field(rng)
            p = rng.uniform(0, 2 * np.pi, (1, 3))
            d2 = max(d2, float(np.max(np.abs(D(D(a)).jet(p, 0).dense()))))
            L = lie_derivative(X, a).jet(p, 0).dense()
            cartan = max(cartan, float(np.max(np.abs(L - flow_lie_derivative(a, X, p)))))
            h = 1e-5
            probe = np.concatenate([p, p + h * np.eye(3), p - h * np.eye(3)])
            fj = a.jet(probe, 1)
            for key, j in fj.comps.items():
                fd = (j.val[1:4] - j.val[4:7]) / (2 * h)
                ad = max(ad, float(np.max(np.abs(j.grad[0] - fd))))
    assert d2 <= 1e-10
    assert cartan <= 1e-5
    assert ad <= 1e-6


@pytest.mark.criterion(2, "T^3 margins 1 and n on 64^3, Reeb field of alpha_1")
def test_t3_anchors():
    M = PeriodicBox(T3)
    n = 3
    a1 = ExprForm(T3, 1, {"x": "cos(theta)", "y": "-sin(theta)"})
    an = ExprForm(T3, 1, {"x": "cos(3*theta)", "y": "-sin(3*theta)"})
    with Budget(30):
        g = sample_grid(M, 64)
        r1 = contact_check(a1, M, g)
        rn = contact_check(an, M, g)
        rf = reeb_field(a1, M, g)
        th = g.points[:, 2]
        expected = np.stack([np.cos(th), -np.sin(th), np.zeros_like(th)], axis=1)
        dev = float(np.max(np.abs(rf.table - expected)))
    assert len(g) == 64**3
    assert abs(r1.min_margin - 1.0) <= 1e-9
    assert abs(rn.min_margin - n) <= 1e-9
    assert dev <= 1e-8


@pytest.mark.criterion(3, "S^3 open book duality and the angle identity")
def test_s3_open_book_duality():
    with Budget(120):
        res, code = _results("s3_disk_obd", "obd-roundtrip")
    ff, fo = res["fields_from_obd"], res["obd_from_fields"]
    assert code == 0
    assert ff["details"]["grid"]["resolution"] == [8, 8, 8]
    assert ff["checks"]["bracket"]["count"] >= 8**3
    assert ff["checks"]["bracket"]["min_margin"] > 0
    assert fo["details"]["direction_error"] <= 1e-8
    ident = fo["details"]["identity"]
    assert len(ident) == 3
    for v in ident.values():
        assert v["samples"] > 0
        assert v["max_error"] <= 1e-7


@pytest.mark.criterion(4, "Bourgeois form contact on 8^3 x 6^2 and epsilon scaling")
def test_bourgeois_contact_and_scaling():
    with Budget(300):
        res, code = _results("s3_bourgeois", "bourgeois")
    assert sorted(float(e) for e in res["contact"]) == [0.25, 0.5, 1.0]
    for rep in res["contact"].values():
        assert rep["passed"]
        assert rep["details"]["grid"]["resolution"] == [8, 8, 8, 6, 6]
    sc = res["scaling"]
    assert sc["curl_nonzero"]
    assert sc["max_curl_ratio_error"] <= 0.01
    assert sc["max_bracket_ratio_error"] <= 0.01
    assert code == 0


@pytest.mark.criterion(5, "averaging identity with Q = 32")
def test_averaging_identity():
    sc = load_scene("s3_bourgeois")
    cfg = sc.data["bourgeois"]["potential"]
    data = BourgeoisData(sc.manifold, sc.form("alpha"), scalar(sc, "x2", "phi1"), scalar(sc, "y2", "phi2"))
    P = data.product()
    with Budget(30):
        pot = explicit_potential(P, sc.manifold, data.torus, cfg["A1"], cfg["A2"], sc.params)
        av = average_potential(pot, [6, 6, 6], 32)
    det = av.report.details
    assert det["Q"] == 32
    assert av.report.checks["identity"].count > 0
    assert det["max_identity_residual"] <= 1e-8
    assert av.report.passed


@pytest.mark.criterion(6, "weak filling on S^3 and ray positivity against the dense oracle")
def test_weak_filling_and_ray_positive():
    with Budget(300):
        res, code = _results("s3_bourgeois", "bourgeois-fill")
        rng = np.random.default_rng(7)
        disagree = []
        for _ in range(1000):
            c = random_poly(rng)
            if ray_positive(c).positive != dense_ray_positive(c):
                disagree.append(c.tolist())
    assert code == 0
    assert res["eps"] >= 2.0**-20
    assert res["filling"]["passed"] and res["filling"]["details"]["failure"] is None
    assert res["filling"]["min_margin"] > 0
    assert not disagree, disagree[:3]


@pytest.mark.criterion(7, "branched covers k = 2 and k = 5")
@pytest.mark.parametrize("scene,k", [("cover_local_k2", 2), ("cover_local_k5", 5)])
def test_branched_cover(scene, k):
    with Budget(120):
        res, code = _results(scene, "cover-contactize")
        c = local_model(k)
        ahat, _ = pullback_branched(c, local_model_alpha(c.target))
        same = contactize(ahat, c, res["eps"], 0.0) is ahat
    assert code == 0
    assert res["k"] == k
    assert res["eps"] > 0
    assert same
    bm = res["binding_margins"]
    assert bm["margin_at_s0"] == 0.0
    assert bm["linearity_error"] <= 1e-8
    assert res["deck_invariance"]["max_residual"] <= 1e-12
    assert len(res["deck_invariance"]["per_map"]) == k - 1


@pytest.mark.criterion(8, "Reeb normal form prediction on the tube")
def test_reeb_normal_form():
    with Budget(120):
        res, code = _results("tube_bourgeois", "reeb")
    pred = res["prediction"]
    assert code == 0
    assert pred["max_difference"] <= 1e-6
    assert pred["binding_torus_max"] <= 1e-6
    assert pred["outer_count"] > 0
    assert pred["outer_torus_deviation"] <= 1e-6


@pytest.mark.criterion(9, "orbit audit on the tube and on T^3")
def test_orbit_audit():
    with Budget(300):
        tube, c1 = _results("tube_bourgeois", "orbits")
        t3, c2 = _results("t3_alpha1", "orbits")
    a = tube["audit"]
    assert c1 == 0 and a["passed"]
    assert a["zero_winding_closed"] > 0
    for row in a["orbits"]:
        assert row["binding_distance"] <= 1e-4
        assert row["torus_spread"] <= 1e-6
    assert c2 == 0
    assert t3["tmax"] == 100.0 and t3["seed_count"] == 64
    assert t3["audit"]["zero_winding_closed"] == 0


def _default_command(name):
    return load_scene(name).data["default_command"]


RUNS = [(s, _default_command(s)) for s in BUILTIN_SCENES] + [
    ("t3_alpha1", "reeb"), ("t3_alpha1", "orbits"), ("s3_std", "orbits"), ("s3_bourgeois", "bourgeois-fill"),
    ("tube_bourgeois", "reeb"), ("tube_bourgeois", "orbits"), ("cover_s3_k2", "cover-fill"),
]


@pytest.mark.criterion(10, "byte-identical reports with 1 and 8 workers")
@pytest.mark.parametrize("scene,command", RUNS)
def test_determinism(scene, command, tmp_path):
    texts = []
    for i, threads in enumerate((1, 8, 1)):
        out = tmp_path / f"r{i}.json"
        code = main([command, scene, "--threads", str(threads), "--report", str(out)])
        assert code in (0, 1)
        texts.append(strip_wall_clock(out.read_text()))
    parallel.set_threads(1)
    assert texts[0] == texts[1] == texts[2]
    rep, _ = run_scene(scene, command)
    assert strip_wall_clock(dumps_report(rep)) == texts[0]
