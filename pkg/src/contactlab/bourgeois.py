"""Contact forms on M x T^2 from open books, their potentials and torus averages."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import parallel
from .calculus import (
    D, ExprField, Field, FieldFromJets, Form, ScalarMul, coordinate_1form, horizontal_correction,
    lie_bracket, lift, pair, wedge,
)
from .calculus.algebra import on_vectors
from .charts import Manifold, PeriodicBox, Product, SampleGrid, frames, sample_grid
from .config import DEFAULT_TOL, EPS_MIN, QUAD_POINTS, Tolerances
from .errors import (
    BaseNotDominated, DimensionMismatch, DomainConditionFailure, EpsilonExhausted, FiberMismatch, NotClosedPotential,
    NotContact, NotContactResult, SingularSplitting,
)
from .expr import Jet
from .positivity import (
    CheckReport, PositivityReport, contact_check, margin_report, odd_half, top_values,
    weak_domination_check,
)

TORUS = ("q1", "q2")


@dataclass
class BourgeoisData:
    manifold: Manifold
    beta: Form
    phi1: Form
    phi2: Form
    eps: float = 1.0
    torus: tuple[str, str] = TORUS

    def product(self) -> Product:
        return Product((self.manifold, PeriodicBox(self.torus)))


def bourgeois_alpha(data: BourgeoisData, eps: float | None = None) -> tuple[Form, Product]:
    """beta + eps (phi1 dq1 - phi2 dq2) on M x T^2."""
    eps = data.eps if eps is None else eps
    P = data.product()
    c = P.coords
    b = lift(data.beta, c)
    t1 = ScalarMul(lift(data.phi1, c), coordinate_1form(c, data.torus[0]))
    t2 = ScalarMul(lift(data.phi2, c), coordinate_1form(c, data.torus[1]))
    return b + eps * t1 - eps * t2, P


def domain_condition(data: BourgeoisData, grid, tol: Tolerances = DEFAULT_TOL) -> PositivityReport:
    """beta ^ (d beta)^(n-2) ^ dphi1 ^ dphi2 >= 0 on M."""
    M = data.manifold
    n = odd_half(M)
    if not isinstance(grid, SampleGrid):
        grid = sample_grid(M, grid, tol)
    f = wedge(D(data.phi1), D(data.phi2))
    if n >= 3:
        from .calculus import wedge_power

        f = wedge(wedge_power(D(data.beta), n - 2), f)
    vals = top_values(wedge(data.beta, f), M, grid.points, tol)
    return margin_report("domain-condition", grid, vals, tol, threshold=-tol.pos)


@dataclass
class BourgeoisResult:
    alpha: Form
    manifold: Product
    contact: PositivityReport
    domain: PositivityReport


def bourgeois_form(data: BourgeoisData, m_grid, product_grid, tol: Tolerances = DEFAULT_TOL,
                   raise_on_failure: bool = True) -> BourgeoisResult:
    dom = domain_condition(data, m_grid, tol)
    if not dom.passed and raise_on_failure:
        raise DomainConditionFailure("beta ^ (d beta)^(n-2) ^ dphi1 ^ dphi2 is negative somewhere",
                                     {"point": dom.argmin.get("point"), "value": dom.min_margin})
    alpha, P = bourgeois_alpha(data)
    rep = contact_check(alpha, P, product_grid, tol)
    if not rep.passed and raise_on_failure:
        raise NotContactResult("the Bourgeois form is not contact on the sample grid",
                               {"point": rep.argmin.get("point"), "value": rep.min_margin})
    return BourgeoisResult(alpha, P, rep, dom)


# potentials
@dataclass
class Potential:
    """Fiberwise fields (A_1, A_2) on M x T^2 for the torus directions."""

    A: tuple[Field, Field]
    manifold: Product
    fiber: Manifold
    torus: tuple[str, str]

    @property
    def coords(self):
        return self.manifold.coords


def fiber_of(manifold: Product, torus: Sequence[str]) -> Manifold:
    """The factor(s) of M x T^2 away from the torus coordinates."""
    parts = [p for p in manifold.factors() if not set(p.coords) & set(torus)]
    if not parts or any(set(p.coords) & set(torus) and not set(p.coords) <= set(torus) for p in manifold.factors()):
        raise DimensionMismatch("expected a product of a fibre with the torus")
    return parts[0] if len(parts) == 1 else Product(tuple(parts))


def potential_of(alpha: Form, manifold: Product, torus: Sequence[str] = TORUS, beta: Form | None = None,
                 grid=None, tol: Tolerances = DEFAULT_TOL) -> Potential:
    """A_i = (horizontal lift of d/dq_i) - d/dq_i, from the splitting given by alpha."""
    torus = tuple(torus)
    fiber = fiber_of(manifold, torus)
    A = tuple(horizontal_correction(alpha, manifold, t, fiber, tol) for t in torus)
    pot = Potential(A, manifold, fiber, torus)  # type: ignore[arg-type]
    if grid is not None:
        g = grid if isinstance(grid, SampleGrid) else sample_grid(manifold, grid, tol)
        if beta is not None:
            fiber_mismatch_check(alpha, lift(beta, manifold.coords), manifold, fiber, g, tol)
        try:
            parallel.map_chunks(lambda c: [a.jet(c, 0) for a in A], g.points)
        except NotContact as exc:
            raise SingularSplitting("alpha does not split M x T^2 into fibres and a horizontal part",
                                    exc.witness) from exc
    return pot


def fiber_mismatch_check(alpha: Form, beta_lift: Form, manifold: Product, fiber: Manifold,
                         grid: SampleGrid, tol: Tolerances = DEFAULT_TOL) -> float:
    """alpha restricted to the fibres must be a positive multiple of beta."""
    sl = [manifold.coords.index(c) for c in fiber.coords]

    def work(chunk):
        F = frames(fiber, chunk[:, sl], tol)
        full = np.zeros((chunk.shape[0], manifold.ambient_dim, fiber.dim))
        full[:, sl, :] = F
        a = np.stack([on_vectors(alpha.jet(chunk, 0), full[:, :, [k]]) for k in range(fiber.dim)], axis=1)
        b = np.stack([on_vectors(beta_lift.jet(chunk, 0), full[:, :, [k]]) for k in range(fiber.dim)], axis=1)
        bb = np.sum(b * b, axis=1)
        lam = np.sum(a * b, axis=1) / np.where(bb > 0, bb, 1.0)
        res = np.linalg.norm(a - lam[:, None] * b, axis=1)
        return np.stack([res, lam], axis=1)

    out = parallel.map_concat(work, grid.points)
    bad = (out[:, 0] > 1e-10 * np.maximum(1.0, np.abs(out[:, 1]))) | (out[:, 1] <= 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise FiberMismatch("alpha on the fibres is not a positive multiple of beta",
                            {"index": i, "point": grid.points[i], "residual": float(out[i, 0])})
    return float(np.max(out[:, 0]))


def explicit_potential(manifold: Product, fiber: Manifold, torus: Sequence[str], A1: dict, A2: dict,
                       params: dict | None = None) -> Potential:
    c = manifold.coords
    return Potential((ExprField(c, A1, params), ExprField(c, A2, params)), manifold, fiber, tuple(torus))


def covariant_curl(pot: Potential) -> Field:
    """d_nabla A (d/dq1, d/dq2) = d/dq1 A_2 - d/dq2 A_1 (fiberwise)."""
    i1 = pot.coords.index(pot.torus[0])
    i2 = pot.coords.index(pot.torus[1])
    A1, A2 = pot.A

    def fn(pts, order):
        j1 = A1.jet(pts, order + 1)
        j2 = A2.jet(pts, order + 1)
        return [b.deriv(i1) - a.deriv(i2) for a, b in zip(j1, j2)]

    return FieldFromJets(pot.coords, fn)


def curvature_terms(pot: Potential) -> tuple[Field, Field]:
    return covariant_curl(pot), lie_bracket(*pot.A)


def _field_norms(X: Field, pts: np.ndarray) -> np.ndarray:
    return parallel.map_concat(lambda c: np.linalg.norm(X.values(c), axis=1), pts)


def bourgeois_criterion(pot: Potential, beta: Form, grid, tol: Tolerances = DEFAULT_TOL) -> CheckReport:
    """Bourgeois (flat with beta([A1, A2]) < 0) and Lerman (beta(curl + bracket) < 0) criteria."""
    P = pot.manifold
    if not isinstance(grid, SampleGrid):
        grid = sample_grid(P, grid, tol)
    b = lift(beta, P.coords)
    curl, br = curvature_terms(pot)
    pts = grid.points
    curl_norm = _field_norms(curl, pts)
    br_pair = parallel.map_concat(lambda c: pair(b, br).jet(c, 0).scalar().val, pts)
    sum_pair = parallel.map_concat(lambda c: pair(b, curl + br).jet(c, 0).scalar().val, pts)
    checks = {
        "flat": margin_report("flatness", grid, -curl_norm, tol, threshold=-tol.flat),
        "bracket_negative": margin_report("bracket-negative", grid, -br_pair, tol),
        "lerman": margin_report("lerman-negative", grid, -sum_pair, tol),
    }
    bourgeois = checks["flat"].passed and checks["bracket_negative"].passed
    lerman = checks["lerman"].passed
    return CheckReport("bourgeois-criterion", bourgeois or lerman, checks, [],
                       {"bourgeois": bourgeois, "lerman_contact": lerman,
                        "max_curl": float(np.max(curl_norm)) if curl_norm.size else 0.0,
                        "grid": grid.describe()})


# torus averaging
def torus_nodes(Q: int, periods=(2 * math.pi, 2 * math.pi)) -> np.ndarray:
    a = periods[0] * np.arange(Q) / Q
    b = periods[1] * np.arange(Q) / Q
    A, B = np.meshgrid(a, b, indexing="ij")
    return np.stack([A.ravel(), B.ravel()], axis=1)


class AveragedField(Field):
    """Trapezoidal torus average of a field; the result does not depend on the torus point."""

    def __init__(self, X: Field, torus_idx: Sequence[int], Q: int = QUAD_POINTS):
        self.coords = X.coords
        self.X = X
        self.tidx = list(torus_idx)
        self.Q = Q
        self.nodes = torus_nodes(Q)

    def _compute(self, pts, order):
        n, Dm = pts.shape
        q = self.nodes.shape[0]
        tiled = np.repeat(pts, q, axis=0)
        tiled[:, self.tidx] = np.tile(self.nodes, (n, 1))
        comps = self.X.jet(tiled, order)
        out = []
        for c in comps:
            val = c.val.reshape(n, q).mean(axis=1)
            grad = hess = None
            if order >= 1:
                grad = c.grad.reshape(n, q, Dm).mean(axis=1)
                grad[:, self.tidx] = 0.0
            if order >= 2:
                hess = c.hess.reshape(n, q, Dm, Dm).mean(axis=1)
                hess[:, self.tidx, :] = 0.0
                hess[:, :, self.tidx] = 0.0
            out.append(Jet(val, grad, hess))
        return out


@dataclass
class AveragedPotential:
    potential: Potential
    averaged: Potential
    report: CheckReport


def average_potential(pot: Potential, fiber_grid, Q: int = QUAD_POINTS, beta: Form | None = None,
                      tol: Tolerances = DEFAULT_TOL) -> AveragedPotential:
    """Average a flat potential over the torus and verify avg([A1, A2]) = [avg A1, avg A2]."""
    P = pot.manifold
    F = pot.fiber
    if not isinstance(fiber_grid, SampleGrid):
        fiber_grid = sample_grid(F, fiber_grid, tol)
    tidx = [P.coords.index(t) for t in pot.torus]
    fidx = [P.coords.index(c) for c in F.coords]
    base = np.zeros((len(fiber_grid), P.ambient_dim))
    base[:, fidx] = fiber_grid.points
    nodes = torus_nodes(Q)
    n, q = base.shape[0], nodes.shape[0]
    quad = np.repeat(base, q, axis=0)
    quad[:, tidx] = np.tile(nodes, (n, 1))
    curl = covariant_curl(pot)
    cn = _field_norms(curl, quad)
    if cn.size and np.max(cn) > tol.flat:
        i = int(np.argmax(cn))
        raise NotClosedPotential("the potential is not flat on the quadrature grid",
                                 {"point": quad[i], "value": float(cn[i])})
    Abar = tuple(AveragedField(a, tidx, Q) for a in pot.A)
    avg_pot = Potential(Abar, P, F, pot.torus)  # type: ignore[arg-type]
    lhs = AveragedField(lie_bracket(*pot.A), tidx, Q)
    rhs = lie_bracket(*Abar)
    diff = parallel.map_concat(lambda c: np.linalg.norm(lhs.values(c) - rhs.values(c), axis=1), base, chunk=256)
    grid = SampleGrid(P, fiber_grid.resolution, base, fiber_grid.indices)
    checks = {"identity": margin_report("averaging-identity", grid, -diff, tol, threshold=-tol.quad)}
    details: dict[str, Any] = {"Q": Q, "max_identity_residual": float(np.max(diff)) if diff.size else 0.0,
                               "max_curl": float(np.max(cn)) if cn.size else 0.0}
    if beta is not None:
        b = lift(beta, P.coords)
        bv = parallel.map_concat(lambda c: pair(b, rhs).jet(c, 0).scalar().val, base, chunk=256)
        checks["averaged_bracket_negative"] = margin_report("averaged-bracket-negative", grid, -bv, tol)
    rep = CheckReport("average-potential", all(c.passed for c in checks.values()), checks, [], details)
    return AveragedPotential(pot, avg_pot, rep)


# weak fillings
@dataclass
class FillingResult:
    eps: float
    omega: Form
    alpha: Form
    report: PositivityReport
    base: PositivityReport
    history: list[dict[str, Any]] = field(default_factory=list)


def bourgeois_weak_filling_check(data: BourgeoisData, omega_M: Form, m_grid, product_grid,
                                 eps_start: float | None = None, eps_min: float = EPS_MIN,
                                 tol: Tolerances = DEFAULT_TOL) -> FillingResult:
    M = data.manifold
    base = weak_domination_check(data.beta, omega_M, M, m_grid, tol)
    if not base.passed:
        raise BaseNotDominated("the base form is not weakly dominated by omega",
                               {"point": base.argmin.get("point"), "value": base.min_margin})
    P = data.product()
    c = P.coords
    omega = lift(omega_M, c) + wedge(coordinate_1form(c, data.torus[0]), coordinate_1form(c, data.torus[1]))
    if not isinstance(product_grid, SampleGrid):
        product_grid = sample_grid(P, product_grid, tol)
    eps = data.eps if eps_start is None else eps_start
    history = []
    while eps >= eps_min:
        alpha, _ = bourgeois_alpha(data, eps)
        rep = weak_domination_check(alpha, omega, P, product_grid, tol)
        history.append({"eps": eps, "min_margin": rep.min_margin, "passed": rep.passed})
        if rep.passed:
            rep.history = history
            return FillingResult(eps, omega, alpha, rep, base, history)
        eps *= 0.5
    raise EpsilonExhausted("no eps above the floor gives a weak domination", {"history": history})


# epsilon scaling of the curvature terms
def twisted_alpha(data: BourgeoisData, eps: float, tau: tuple[Form, Form] | None = None) -> tuple[Form, Product]:
    """beta + eps ((phi1 + tau1) dq1 - (phi2 + tau2) dq2) with tau_i functions on M x T^2."""
    alpha, P = bourgeois_alpha(data, eps)
    if tau is None:
        return alpha, P
    c = P.coords
    t1 = ScalarMul(tau[0], coordinate_1form(c, data.torus[0]))
    t2 = ScalarMul(tau[1], coordinate_1form(c, data.torus[1]))
    return alpha + eps * t1 - eps * t2, P


def scaling_audit(data: BourgeoisData, epsilons: Sequence[float], grid, tau: tuple[Form, Form] | None = None,
                  tol: Tolerances = DEFAULT_TOL) -> dict[str, Any]:
    """Measured sizes of d_nabla A and [A, A] for the potential of each eps-form.

    Ratios are taken against the first eps; exact scaling gives curl ~ eps
    and bracket ~ eps^2.  ``tau`` adds a torus-dependent term so that the
    curl is not identically zero.
    """
    P = data.product()
    if not isinstance(grid, SampleGrid):
        grid = sample_grid(P, grid, tol)
    rows = []
    for eps in epsilons:
        alpha, _ = twisted_alpha(data, eps, tau)
        pot = potential_of(alpha, P, data.torus, tol=tol)
        curl, br = curvature_terms(pot)
        rows.append({"eps": float(eps),
                     "curl": float(np.max(_field_norms(curl, grid.points))),
                     "bracket": float(np.max(_field_norms(br, grid.points)))})
    e0, c0, b0 = rows[0]["eps"], rows[0]["curl"], rows[0]["bracket"]
    worst_c = worst_b = 0.0
    for r in rows:
        k = r["eps"] / e0
        r["curl_ratio_error"] = abs(r["curl"] / (k * c0) - 1.0) if c0 > 0 else (0.0 if r["curl"] == 0 else math.inf)
        r["bracket_ratio_error"] = abs(r["bracket"] / (k * k * b0) - 1.0) if b0 > 0 else \
            (0.0 if r["bracket"] == 0 else math.inf)
        worst_c = max(worst_c, r["curl_ratio_error"])
        worst_b = max(worst_b, r["bracket_ratio_error"])
    return {"rows": rows, "max_curl_ratio_error": worst_c, "max_bracket_ratio_error": worst_b,
            "curl_nonzero": bool(c0 > 0), "passed": bool(worst_c <= 0.01 and worst_b <= 0.01),
            "count": len(grid)}
