"""Radial normal form near a binding and the tube model S^1 x D^2 x T^2.

Profiles h1(r), h2(r) are given as expressions in ``r`` and rewritten in
s = r^2 so that everything is smooth on the binding.  The tube form is

    beta = h1 dt + K (u dv - v du),   K = h2 / r^2,

with binding {u = v = 0}, and the open book map is phi = (rho/r)(u, v) for a
profile rho equal to r near the binding and 1 near the boundary of the tube.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .bourgeois import TORUS, BourgeoisData, bourgeois_alpha
from .calculus import ExprForm, Field, FieldFromJets, Form, ScalarExpr
from .charts import Box, PeriodicBox, Product
from .errors import PredictionMismatch, ProfileViolation, _plain
from .expr import BinOp, Expr, Jet, Num, Var, as_expr, evaluate, pretty, substitute
from .expr.radial import NotEven, divide_by, to_square

TUBE = ("t", "u", "v")


def _s_profile(src, name: str) -> Expr:
    e = as_expr(src, {"r"})
    try:
        return to_square(e)
    except NotEven as exc:
        raise ProfileViolation(f"{name} must be a function of r^2", {"condition": "parity", "profile": name}) from exc


def _eval_s(e: Expr, s: np.ndarray, order: int) -> Jet:
    sj = Jet.coordinate(np.asarray(s, dtype=float), 0, 1, order)
    return evaluate(e, {"s": sj}, s.shape[0], 1, order)


@dataclass
class TubeNormalForm:
    n: int
    delta: float
    G1: Expr            # h1 as a function of s
    K: Expr             # h2 / s as a function of s
    manifold: Product   # S^1 x D^2_delta
    beta: Form
    phi: tuple[Form, Form]
    product: Product
    alpha: Form
    conditions: dict[str, Any] = field(default_factory=dict)
    radial: dict[str, list[float]] = field(default_factory=dict)

    @property
    def rho_bounds(self) -> tuple[float, float]:
        return self.delta / 3.0, 2.0 * self.delta / 3.0

    def to_dict(self) -> dict[str, Any]:
        return _plain({"n": self.n, "delta": self.delta, "h1_s": pretty(self.G1), "K_s": pretty(self.K),
                       "conditions": self.conditions})


def _in_uv(e: Expr) -> Expr:
    return substitute(e, {"s": BinOp("+", BinOp("^", Var("u"), Num(2.0)), BinOp("^", Var("v"), Num(2.0)))})


def binding_normal_form(n: int, h1, h2, delta: float = 1.0, samples: int = 201,
                        raise_on_violation: bool = True) -> TubeNormalForm:
    G1 = _s_profile(h1, "h1")
    G2 = _s_profile(h2, "h2")
    K = divide_by(G2)
    r = np.linspace(0.0, delta, samples)
    s = r * r
    conditions: dict[str, Any] = {}

    def violation(cond: str, radius: float, value: float, msg: str):
        conditions[cond] = {"passed": False, "witness_radius": radius, "value": value}
        if raise_on_violation:
            raise ProfileViolation(f"({cond}) {msg}", {"condition": cond, "radius": radius, "value": value})

    g1 = _eval_s(G1, s, 1)
    g2 = _eval_s(G2, s, 1)
    v = float(g1.val[0])
    conditions["i"] = {"passed": v > 0, "value": v}
    if v <= 0:
        violation("i", 0.0, v, "h1(0) must be positive")
    if K is None:
        violation("ii", 0.0, float(g2.val[0]), "h2 must vanish to second order at r = 0")
        K = Num(1.0)
    else:
        kv = float(_eval_s(K, np.zeros(1), 0).val[0])
        conditions["ii"] = {"passed": kv > 0, "value": kv}
        if kv <= 0:
            violation("ii", 0.0, kv, "h2 / r^2 must be positive at r = 0")
    G1v, G1d = g1.val, g1.grad[:, 0]
    G2v, G2d = g2.val, g2.grad[:, 0]
    H_over_r = 2.0 * G1v ** (n - 1) * (G1v * G2d - G2v * G1d)
    i3 = int(np.argmin(H_over_r))
    conditions["iii"] = {"passed": bool(np.all(H_over_r > 0)), "min": float(H_over_r[i3]),
                         "at_radius": float(r[i3]), "value_at_0": float(H_over_r[0])}
    if not np.all(H_over_r > 0):
        violation("iii", float(r[i3]), float(H_over_r[i3]), "the contact condition fails")
    pos = r > 0
    i4 = int(np.argmax(np.where(pos, G1d, -np.inf)))
    conditions["iv"] = {"passed": bool(np.all(G1d[pos] < 0)), "max_dh1_ds": float(G1d[i4]), "at_radius": float(r[i4])}
    if not np.all(G1d[pos] < 0):
        violation("iv", float(r[i4]), float(G1d[i4]), "h1 must be strictly decreasing")

    tube = Product((PeriodicBox(("t",)), Box.disk(("u", "v"), delta)))
    c = tube.coords
    beta = ExprForm(c, 1, {"t": _in_uv(G1), "v": BinOp("*", _in_uv(K), Var("u")),
                           "u": BinOp("*", Num(-1.0), BinOp("*", _in_uv(K), Var("v")))})
    a, b = delta / 3.0, 2.0 * delta / 3.0
    prm = {"ra": a, "rb": b}
    phi1 = ScalarExpr(c, "radprof(ra, rb, u^2 + v^2) * u", params=prm)
    phi2 = ScalarExpr(c, "radprof(ra, rb, u^2 + v^2) * v", params=prm)
    data = BourgeoisData(tube, beta, phi1, phi2, 1.0, TORUS)
    alpha, P = bourgeois_alpha(data)
    nf = TubeNormalForm(n, delta, G1, K, tube, beta, (phi1, phi2), P, alpha, conditions)
    lam, mu, _ = radial_coefficients(nf, s)
    nf.radial = {"r": r.tolist(), "lambda": lam.tolist(), "mu": mu.tolist(), "H_over_r": H_over_r.tolist()}
    return nf


def _q_jet(nf: TubeNormalForm, s: np.ndarray) -> Jet:
    a, b = nf.rho_bounds
    e = as_expr("radprof(ra, rb, s)", {"s", "ra", "rb"})
    sj = Jet.coordinate(np.asarray(s, dtype=float), 0, 1, 1)
    return evaluate(e, {"s": sj, "ra": a, "rb": b}, s.shape[0], 1, 1)


def radial_coefficients(nf: TubeNormalForm, s: np.ndarray):
    """lambda(s), mu(s) and mu / r as arrays; mu / r stays finite on the binding."""
    q = _q_jet(nf, s)
    g1 = _eval_s(nf.G1, s, 1)
    qv, qd = q.val, q.grad[:, 0]
    G, Gd = g1.val, g1.grad[:, 0]
    rho_prime = qv + 2.0 * s * qd
    Dn = rho_prime * G - 2.0 * s * qv * Gd
    lam = rho_prime / Dn
    mu_over_r = -2.0 * Gd / Dn
    mu = mu_over_r * np.sqrt(s)
    return lam, mu, mu_over_r


def predicted_reeb(nf: TubeNormalForm) -> Field:
    """lambda R_B + mu cos(phi) d/dq1 - mu sin(phi) d/dq2 with R_B = d/dt (values only)."""
    coords = nf.product.coords
    iu, iv, it = coords.index("u"), coords.index("v"), coords.index("t")
    i1, i2 = coords.index(TORUS[0]), coords.index(TORUS[1])

    def fn(pts, order):
        if order > 0:
            from .errors import DepthExceeded

            raise DepthExceeded("the predicted field is available as values only")
        u, v = pts[:, iu], pts[:, iv]
        lam, _, mu_r = radial_coefficients(nf, u * u + v * v)
        comps = [np.zeros(pts.shape[0]) for _ in coords]
        comps[it] = lam
        comps[i1] = mu_r * u
        comps[i2] = -mu_r * v
        return [Jet(c) for c in comps]

    return FieldFromJets(coords, fn)


def compare_prediction(nf: TubeNormalForm, grid, tol: float = 1e-6) -> dict[str, Any]:
    from .calculus import reeb_vector_field
    from .charts import SampleGrid, sample_grid
    from . import parallel

    P = nf.product
    if not isinstance(grid, SampleGrid):
        grid = sample_grid(P, grid)
    R = reeb_vector_field(nf.alpha, P)
    pred = predicted_reeb(nf)
    diff = parallel.map_concat(lambda c: np.linalg.norm(R.values(c) - pred.values(c), axis=1), grid.points)
    i = int(np.argmax(diff))
    out = {"max_difference": float(diff[i]), "at": grid.points[i].tolist(), "count": len(grid)}
    # binding samples r = 0
    tb = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    bp = np.zeros((tb.size, P.ambient_dim))
    bp[:, P.coords.index("t")] = tb
    bp[:, P.coords.index(TORUS[0])] = np.linspace(0, 2 * np.pi, tb.size, endpoint=False)
    bp[:, P.coords.index(TORUS[1])] = np.linspace(0, 2 * np.pi, tb.size, endpoint=False)[::-1]
    Rb = R.values(bp)
    ti = [P.coords.index(t) for t in TORUS]
    out["binding_torus_max"] = float(np.max(np.abs(Rb[:, ti])))
    lam0 = float(radial_coefficients(nf, np.zeros(1))[0][0])
    out["lambda0"] = lam0
    out["binding_period"] = float(2 * np.pi / lam0)
    out["binding_difference"] = float(np.max(np.linalg.norm(Rb - pred.values(bp), axis=1)))
    out["passed"] = bool(out["max_difference"] <= tol and out["binding_difference"] <= tol)
    if not out["passed"]:
        raise PredictionMismatch("predicted Reeb field differs from the pointwise solve", _plain(out))
    return out
