"""Open books and pairs of contact vector fields.

An open book is a map phi = (phi1, phi2): M -> R^2 whose zero set is the
binding and whose angle fibres the complement.  A contact form is adapted
when its restriction to the binding is contact and d(angle) ^ (d alpha)^(n-1)
is positive off the binding.  The two directions convert between adapted
open books and pairs of contact fields X, Y with alpha([X, Y]) < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import parallel
from .calculus import (
    D, Field, Form, ScalarExpr, ScalarMul, contact_hamiltonian_field, interior, lie_bracket,
    lie_derivative, pair, reeb_vector_field, wedge, wedge_power,
)
from .calculus.algebra import on_vectors
from .charts import Manifold, SampleGrid, frames, grid_from_points, project, sample_grid
from .config import DEFAULT_TOL, K_MAX, Tolerances
from .errors import (
    DimensionMismatch, HypothesisFailure, KSearchExhausted, NotAdapted, NotContactFields,
    NotTransverse, TransversalityFailure, TransversalityNotNegative,
)
from .positivity import (
    CheckReport, Submanifold, margin_report, max_on_frame_subsets, odd_half, top_values,
)


@dataclass
class OpenBook:
    phi1: Form
    phi2: Form
    r_bind: float
    binding: Submanifold | None = None

    def __post_init__(self):
        if self.phi1.degree != 0 or self.phi2.degree != 0:
            raise DimensionMismatch("open book components must be functions")

    @property
    def coords(self):
        return self.phi1.coords

    def values(self, pts: np.ndarray) -> np.ndarray:
        return np.stack([self.phi1.jet(pts, 0).scalar().val, self.phi2.jet(pts, 0).scalar().val], axis=1)

    def angle_form(self) -> Form:
        """d(angle) = (phi1 dphi2 - phi2 dphi1) / |phi|^2, defined off the binding."""
        c = self.coords
        inv = ScalarExpr(c, "1/(p^2 + q^2)", {"p": self.phi1, "q": self.phi2})
        num = ScalarMul(self.phi1, D(self.phi2)) - ScalarMul(self.phi2, D(self.phi1))
        return ScalarMul(inv, num)


def open_book(coords, phi1, phi2, r_bind: float, binding: Submanifold | None = None,
              params: dict | None = None) -> OpenBook:
    return OpenBook(ScalarExpr(coords, phi1, params=params), ScalarExpr(coords, phi2, params=params),
                    r_bind, binding)


def binding_form(alpha: Form, ob: OpenBook, n: int) -> Form:
    """alpha ^ (d alpha)^(n-2) ^ dphi1 ^ dphi2; positive where the fibres of phi are positive contact."""
    f = wedge(D(ob.phi1), D(ob.phi2))
    if n >= 3:
        f = wedge(wedge_power(D(alpha), n - 2), f)
    return wedge(alpha, f)


def page_form(alpha: Form, ob: OpenBook, n: int) -> Form:
    return wedge(ob.angle_form(), wedge_power(D(alpha), n - 1))


def transversality(ob: OpenBook, manifold: Manifold, pts: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Area of dphi on the best tangent 2-plane (square root of the Gram determinant)."""

    def work(chunk):
        F = frames(manifold, chunk, tol)
        g1 = ob.phi1.jet(chunk, 1).scalar().grad
        g2 = ob.phi2.jet(chunk, 1).scalar().grad
        J = np.stack([np.einsum("nd,ndk->nk", g1, F), np.einsum("nd,ndk->nk", g2, F)], axis=1)
        G = J @ np.swapaxes(J, 1, 2)
        return np.sqrt(np.maximum(np.linalg.det(G), 0.0))

    return parallel.map_concat(work, pts)


def _binding_points(ob: OpenBook, tol: Tolerances) -> np.ndarray:
    if ob.binding is None:
        return np.zeros((0, len(ob.coords)))
    return ob.binding.points(tol)


def _concat_grid(manifold: Manifold, a: np.ndarray, b: np.ndarray) -> SampleGrid:
    return grid_from_points(manifold, np.concatenate([a, b], axis=0)) if a.size + b.size else \
        grid_from_points(manifold, np.zeros((0, manifold.ambient_dim)))


def obd_check(ob: OpenBook, alpha: Form, manifold: Manifold, grid, tol: Tolerances = DEFAULT_TOL,
              raise_on_transversality: bool = True) -> CheckReport:
    n = odd_half(manifold)
    if n < 2:
        raise DimensionMismatch("open books need dimension at least 3")
    if not isinstance(grid, SampleGrid):
        grid = sample_grid(manifold, grid, tol)
    pts = grid.points
    phi = ob.values(pts)
    s = np.sum(phi**2, axis=1)
    near = s < ob.r_bind**2
    bpts = _binding_points(ob, tol)
    warnings: list[str] = []
    near_pts = pts[near]
    if near_pts.shape[0] == 0 and bpts.shape[0] == 0:
        warnings.append("EmptyBinding: no sample lies near the zero set of phi")
    bgrid = _concat_grid(manifold, bpts, near_pts)

    checks = {}
    if len(bgrid):
        tr = transversality(ob, manifold, bgrid.points, tol)
        trep = margin_report("transversality", bgrid, tr, tol)
        trep.passed = bool(trep.min_margin >= tol.trans)
        checks["transversality"] = trep
        if not trep.passed and raise_on_transversality:
            raise TransversalityFailure("phi is not transverse to zero at the binding",
                                        {"point": trep.argmin.get("point"), "value": trep.min_margin})
        bv = top_values(binding_form(alpha, ob, n), manifold, bgrid.points, tol)
        checks["binding"] = margin_report("binding-contact", bgrid, bv, tol)
    page_mask = ~near
    ppts = pts[page_mask]
    pgrid = SampleGrid(manifold, grid.resolution, ppts, grid.indices[page_mask])
    pv = top_values(page_form(alpha, ob, n), manifold, ppts, tol) if len(pgrid) else np.zeros(0)
    checks["page"] = margin_report("page-symplectic", pgrid, pv, tol)
    passed = all(c.passed for c in checks.values()) and not warnings
    return CheckReport("obd", passed, checks, warnings,
                       {"grid": grid.describe(), "r_bind": ob.r_bind, "n": n,
                        "binding_samples": int(bpts.shape[0]), "near_binding_samples": int(near_pts.shape[0])})


@dataclass
class FieldPair:
    X: Field
    Y: Field
    alpha: Form
    manifold: Manifold
    phi: tuple[Form, Form] | None = None
    eps: float | None = None
    binding: Submanifold | None = None
    r_bind: float = 0.1


def rescaled_map(ob: OpenBook, eps: float) -> tuple[Form, Form]:
    """phi * f(|phi|) with f = 1 near the binding and f = 1/|phi| for |phi| >= eps."""
    c = ob.coords
    params = {"a": eps / 2, "b": eps}
    b = {"p": ob.phi1, "q": ob.phi2}
    r1 = ScalarExpr(c, "radprof(a, b, p^2 + q^2) * p", b, params)
    r2 = ScalarExpr(c, "radprof(a, b, p^2 + q^2) * q", b, params)
    return r1, r2


def choose_rescaling_radius(ob: OpenBook, alpha: Form, manifold: Manifold, grid: SampleGrid,
                            tol: Tolerances = DEFAULT_TOL) -> float:
    """Largest eps = 2^-j max|phi|, j >= 1, with the binding condition positive on |phi| < eps."""
    n = odd_half(manifold)
    phi = ob.values(grid.points)
    r = np.sqrt(np.sum(phi**2, axis=1))
    bv = top_values(binding_form(alpha, ob, n), manifold, grid.points, tol)
    eps = 0.5 * float(np.max(r))
    while eps > 1e-6:
        inside = r < eps
        if not np.any(inside) or np.min(bv[inside]) > tol.pos:
            return eps
        eps *= 0.5
    raise NotAdapted("no rescaling radius keeps the fibres of phi contact", {"eps": eps})


def fields_from_obd(ob: OpenBook, alpha: Form, manifold: Manifold, grid, eps: float | None = None,
                    tol: Tolerances = DEFAULT_TOL) -> tuple[FieldPair, CheckReport]:
    if not isinstance(grid, SampleGrid):
        grid = sample_grid(manifold, grid, tol)
    rep = obd_check(ob, alpha, manifold, grid, tol)
    if not rep.passed:
        raise NotAdapted("alpha is not adapted to the open book", {"report": rep.to_dict()})
    if eps is None:
        eps = choose_rescaling_radius(ob, alpha, manifold, grid, tol)
    p1, p2 = rescaled_map(ob, eps)
    X = contact_hamiltonian_field(alpha, p1, manifold, tol=tol)
    Y = contact_hamiltonian_field(alpha, -p2, manifold, tol=tol)
    bpts = _binding_points(ob, tol)
    tgrid = _concat_grid(manifold, grid.points, bpts)
    tv = bracket_pairing(alpha, X, Y, tgrid.points)
    trep = margin_report("transversality-negative", tgrid, -tv, tol)
    rep.checks["bracket"] = trep
    rep.details["eps"] = eps
    if not trep.passed:
        raise TransversalityNotNegative("alpha([X, Y]) is not negative everywhere",
                                        {"point": trep.argmin.get("point"), "value": -trep.min_margin})
    return FieldPair(X, Y, alpha, manifold, (p1, p2), eps, ob.binding, ob.r_bind), rep


def bracket_pairing(alpha: Form, X: Field, Y: Field, pts: np.ndarray) -> np.ndarray:
    f = pair(alpha, lie_bracket(X, Y))
    return parallel.map_concat(lambda c: f.jet(c, 0).scalar().val, pts)


def contact_field_residual(alpha: Form, X: Field, manifold: Manifold, pts: np.ndarray,
                           tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """|L_X alpha - g alpha| on frame vectors, with g = (L_X alpha)(R)."""
    L = lie_derivative(X, alpha)
    R = reeb_vector_field(alpha, manifold, tol=tol)
    g = interior(R, L)
    res = L - ScalarMul(g, alpha)
    return max_on_frame_subsets(res, manifold, pts, tol)


def _newton_to_zero(h: Form, V: Field, manifold: Manifold, pts: np.ndarray, iters: int = 30) -> np.ndarray:
    """Move points along V onto {h = 0}, re-projecting onto the manifold after each step."""
    dh = interior(V, D(h))
    x = pts.copy()
    for _ in range(iters):
        hv = h.jet(x, 0).scalar().val
        if np.max(np.abs(hv)) < 1e-14:
            break
        slope = dh.jet(x, 0).scalar().val
        Vx = V.values(x)
        x = project(manifold, x - (hv / slope)[:, None] * Vx)
    return x


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape[0] == 0 or b.shape[0] == 0:
        return math.inf
    d = np.sqrt(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2))
    return float(max(np.max(np.min(d, axis=1)), np.max(np.min(d, axis=0))))


def _project_to_binding(h1: Form, h2: Form, manifold: Manifold, pts: np.ndarray, iters: int = 40) -> np.ndarray:
    x = pts.copy()
    for _ in range(iters):
        j1, j2 = h1.jet(x, 1).scalar(), h2.jet(x, 1).scalar()
        c = np.stack([j1.val, j2.val], axis=1)
        if np.max(np.abs(c)) < 1e-14:
            break
        J = np.stack([j1.grad, j2.grad], axis=1)
        step = np.swapaxes(J, 1, 2) @ np.linalg.solve(J @ np.swapaxes(J, 1, 2), c[:, :, None])
        x = project(manifold, x - step[:, :, 0])
    return x


def obd_from_fields(fp: FieldPair, grid, thetas=(0.0, math.pi / 4, math.pi / 2), zero_band: float = 0.1,
                    tol: Tolerances = DEFAULT_TOL) -> tuple[OpenBook, CheckReport]:
    alpha, M, X, Y = fp.alpha, fp.manifold, fp.X, fp.Y
    if not isinstance(grid, SampleGrid):
        grid = sample_grid(M, grid, tol)
    pts = grid.points
    checks = {}
    for name, V in (("X", X), ("Y", Y)):
        res = contact_field_residual(alpha, V, M, pts, tol)
        r = margin_report(f"contact-field-{name}", grid, -res, tol, threshold=-1e-8)
        checks[f"contact_field_{name}"] = r
        if not r.passed:
            raise NotContactFields(f"{name} does not preserve ker alpha",
                                   {"point": r.argmin.get("point"), "residual": -r.min_margin})
    tv = bracket_pairing(alpha, X, Y, pts)
    trep = margin_report("transversality-negative", grid, -tv, tol)
    checks["bracket"] = trep
    if not trep.passed:
        raise NotTransverse("alpha([X, Y]) is not negative everywhere",
                            {"point": trep.argmin.get("point"), "value": -trep.min_margin})
    c = M.coords
    h1 = pair(alpha, X)
    h2 = -pair(alpha, Y)
    ob = OpenBook(h1, h2, fp.r_bind, fp.binding)
    orep = obd_check(ob, alpha, M, grid, tol)
    checks.update({f"obd_{k}": v for k, v in orep.checks.items()})

    details: dict[str, Any] = {"grid": grid.describe(), "identity": {}}
    aXY = pair(alpha, lie_bracket(X, Y))
    hX = pair(alpha, X)
    hY = pair(alpha, Y)
    ident_max = 0.0
    zero_sets = []
    for th in thetas:
        ct, st = math.cos(th), math.sin(th)
        h_th = ScalarExpr(c, "ct*p + st*q", {"p": hX, "q": hY}, {"ct": ct, "st": st})
        Y_th = (-st) * X + ct * Y
        hv = h_th.jet(pts, 0).scalar().val
        scale = float(np.max(np.abs(hv))) or 1.0
        sel = np.abs(hv) < zero_band * scale
        if not np.any(sel):
            details["identity"][f"{th:.6f}"] = {"samples": 0}
            continue
        zp = _newton_to_zero(h_th, Y_th, M, pts[sel])
        zero_sets.append(zp)
        lhs = interior(Y_th, D(h_th)).jet(zp, 0).scalar().val
        rhs = -aXY.jet(zp, 0).scalar().val
        err = float(np.max(np.abs(lhs - rhs)))
        ident_max = max(ident_max, err)
        details["identity"][f"{th:.6f}"] = {"samples": int(zp.shape[0]), "max_error": err,
                                           "min_derivative": float(np.min(np.abs(lhs)))}
    details["identity_max_error"] = ident_max

    # recovered binding versus the one the open book was built from
    phi_new = ob.values(pts)
    near = np.sum(phi_new**2, axis=1) < (2 * fp.r_bind) ** 2
    if fp.binding is not None and np.any(near):
        rec = _project_to_binding(h1, h2, M, pts[near])
        # one-sided offset is exact; the symmetric distance is limited by sampling density
        details["binding_offset"] = float(np.max(np.abs(fp.binding.distance_values(M.coords, rec))))
        details["binding_hausdorff"] = _hausdorff(rec, fp.binding.points(tol))
    if fp.phi is not None:
        details["direction_error"] = direction_error(fp.phi, (h1, h2), pts, fp.r_bind)
    passed = (all(v.passed for v in checks.values()) and ident_max <= 1e-7
              and details.get("binding_offset", 0.0) <= tol.bind)
    return ob, CheckReport("obd-from-fields", passed, checks, orep.warnings, details)


def direction_error(phi_a, phi_b, pts: np.ndarray, r_min: float) -> float:
    """Largest distance between the unit directions of two maps where both have norm >= r_min."""
    a = np.stack([phi_a[0].jet(pts, 0).scalar().val, phi_a[1].jet(pts, 0).scalar().val], axis=1)
    b = np.stack([phi_b[0].jet(pts, 0).scalar().val, phi_b[1].jet(pts, 0).scalar().val], axis=1)
    na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
    sel = (na >= r_min) & (nb >= r_min)
    if not np.any(sel):
        return 0.0
    ua, ub = a[sel] / na[sel, None], b[sel] / nb[sel, None]
    return float(np.max(np.linalg.norm(ua - ub, axis=1)))


@dataclass
class AdaptedForm:
    alpha: Form
    k: int
    report: CheckReport


def adapt_rescaling(alpha: Form, ob: OpenBook, manifold: Manifold, grid, eps: float,
                    tol: Tolerances = DEFAULT_TOL, k_max: int = K_MAX) -> AdaptedForm:
    """Multiply alpha by f(|phi|^2) = 1 + exp(-k s)(1 - w(s)) to make the pages symplectic.

    The tube is {|phi| < 1}; w rises from 0 at (1 - eps)^2 to 1 at (1 - eps/2)^2.
    """
    n = odd_half(manifold)
    if not isinstance(grid, SampleGrid):
        grid = sample_grid(manifold, grid, tol)
    pts = grid.points
    phi = ob.values(pts)
    s = np.sum(phi**2, axis=1)
    checks = {}
    inside = s < 1.0
    bv = top_values(binding_form(alpha, ob, n), manifold, pts, tol)
    checks["ii"] = margin_report("fibres-contact-in-tube", grid, bv, tol, mask=inside)
    if np.any(inside) and not checks["ii"].passed:
        raise HypothesisFailure("(ii) fibres of phi are not contact inside the tube",
                                {"condition": "ii", "point": checks["ii"].argmin.get("point")})
    outer = s >= (1.0 - eps) ** 2
    pv_all = np.full(pts.shape[0], np.inf)
    off = s >= ob.r_bind**2
    pv_all[off] = top_values(page_form(alpha, ob, n), manifold, pts[off], tol)
    checks["iii"] = margin_report("pages-symplectic-outside-tube", grid, pv_all, tol, mask=outer)
    if not checks["iii"].passed:
        raise HypothesisFailure("(iii) pages are not symplectic outside the tube",
                                {"condition": "iii", "point": checks["iii"].argmin.get("point"),
                                 "value": checks["iii"].min_margin})
    c = ob.coords
    history = []
    k = 1
    while k <= k_max:
        f = ScalarExpr(c, "1 + exp(-k*(p^2 + q^2)) * (1 - smoothstep(a, b, p^2 + q^2))",
                       {"p": ob.phi1, "q": ob.phi2}, {"k": float(k), "a": (1 - eps) ** 2, "b": (1 - eps / 2) ** 2})
        new = ScalarMul(f, alpha)
        vals = top_values(page_form(new, ob, n), manifold, pts[off], tol)
        mn = float(np.min(vals)) if vals.size else math.inf
        history.append({"k": k, "min_margin": mn})
        if mn > tol.pos:
            rep = obd_check(ob, new, manifold, grid, tol)
            rep.checks.update(checks)
            rep.details["k_history"] = history
            return AdaptedForm(new, k, rep)
        k *= 2
    raise KSearchExhausted("no k up to the limit makes the pages symplectic", {"history": history})
