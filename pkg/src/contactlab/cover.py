"""Cyclic branched covers: pulled-back forms, contactization and fillings.

The pull-back of a contact form along a k-fold cover branched along a
codimension-2 locus fails to be contact exactly on the branch locus.  Adding
s * eps * g(r) (u dv - v du) with a cutoff g supported in a tube around the
locus repairs this for every s in (0, 1] once eps is small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import parallel
from .calculus import D, ExprForm, ExprMap, Form, LinComb, ScalarExpr, ScalarMul, pullback
from .charts import Box, LevelSet, Manifold, PeriodicBox, Product, SampleGrid, sample_grid
from .config import DEFAULT_TOL, EPS_MIN, Tolerances
from .errors import BranchRestrictionNotContact, DownstairsNotDominated, EpsilonExhausted, NotContact
from .positivity import (
    CheckReport, PositivityReport, Submanifold, adjusted_check, contact_check, margin_report,
    max_on_frame_subsets, submanifold, weak_domination_check,
)


@dataclass
class BranchedCover:
    source: Manifold
    target: Manifold
    map: ExprMap
    k: int
    upstairs: Submanifold
    downstairs: Submanifold
    tube: tuple[str, str]
    delta: float
    deck: list[ExprMap]
    source_res: Any
    target_res: Any
    r_excl: float
    name: str = ""


def _binomial_parts(k: int, u: str, v: str) -> tuple[str, str]:
    """Real and imaginary parts of (u + i v)^k as polynomials."""
    re, im = [], []
    for j in range(k + 1):
        c = math.comb(k, j)
        mono = "*".join(filter(None, [f"{u}^{k - j}" if k - j else "", f"{v}^{j}" if j else ""])) or "1"
        sign = (-1) ** (j // 2)
        term = f"{sign * c}*{mono}"
        (re if j % 2 == 0 else im).append(term)
    return " + ".join(re) or "0", " + ".join(im) or "0"


def _rotation(coords: Sequence[str], u: str, v: str, k: int, j: int = 1) -> ExprMap:
    a = 2 * math.pi * j / k
    ca, sa = repr(math.cos(a)), repr(math.sin(a))
    comps = []
    for c in coords:
        if c == u:
            comps.append(f"{ca}*{u} - {sa}*{v}")
        elif c == v:
            comps.append(f"{sa}*{u} + {ca}*{v}")
        else:
            comps.append(c)
    return ExprMap(coords, coords, comps)


def local_model(k: int, delta: float = 1.0) -> BranchedCover:
    """(theta, z) -> (theta, z^k) on S^1 x D^2_delta."""
    src = Product((PeriodicBox(("theta",)), Box.disk(("u", "v"), delta)))
    tgt = Product((PeriodicBox(("th",)), Box.disk(("x", "y"), delta**k)))
    re, im = _binomial_parts(k, "u", "v")
    F = ExprMap(src.coords, tgt.coords, ["theta", re, im])
    S1 = PeriodicBox(("w",))
    up = submanifold(S1, src, ["w", "0", "0"], "sqrt(u^2 + v^2)", [32])
    down = submanifold(S1, tgt, ["w", "0", "0"], "sqrt(x^2 + y^2)", [32])
    deck = [_rotation(src.coords, "u", "v", k, j) for j in range(1, k)]
    res = 17  # odd, so the branch locus r = 0 is a grid point
    return BranchedCover(src, tgt, F, k, up, down, ("u", "v"), delta, deck,
                         [16, res, res], [16, res, res], delta / 4, f"local-k{k}")


def local_model_alpha(target: Manifold) -> ExprForm:
    return ExprForm(target.coords, 1, {"th": "1", "y": "x", "x": "-y"})


def sphere(coords: Sequence[str]) -> LevelSet:
    a, b, c, d = coords
    return LevelSet(tuple(coords), (f"{a}^2 + {b}^2 + {c}^2 + {d}^2 - 1",), "hopf")


def cyclic_cover_s3(k: int, delta: float = 0.5) -> BranchedCover:
    """(z1, z2) -> (z1, z2^k) / |(z1, z2^k)| on S^3, branched along {z2 = 0}."""
    src = sphere(("x1", "y1", "x2", "y2"))
    tgt = sphere(("X1", "Y1", "X2", "Y2"))
    re, im = _binomial_parts(k, "x2", "y2")
    norm = f"sqrt(x1^2 + y1^2 + (x2^2 + y2^2)^{k})"
    F = ExprMap(src.coords, tgt.coords, [f"x1/{norm}", f"y1/{norm}", f"({re})/{norm}", f"({im})/{norm}"])
    S1 = PeriodicBox(("w",))
    up = submanifold(S1, src, ["cos(w)", "sin(w)", "0", "0"], "sqrt(x2^2 + y2^2)", [32])
    down = submanifold(S1, tgt, ["cos(w)", "sin(w)", "0", "0"], "sqrt(X2^2 + Y2^2)", [32])
    deck = [_rotation(src.coords, "x2", "y2", k, j) for j in range(1, k)]
    return BranchedCover(src, tgt, F, k, up, down, ("x2", "y2"), delta, deck,
                         [9, 12, 12], [9, 12, 12], delta / 4, f"s3-k{k}")


def s3_alpha(target: Manifold) -> ExprForm:
    a, b, c, d = target.coords
    return ExprForm(target.coords, 1, {b: a, a: f"-{b}", d: c, c: f"-{d}"})


def _grid(m: Manifold, g, tol: Tolerances) -> SampleGrid:
    return g if isinstance(g, SampleGrid) else sample_grid(m, g, tol)


def pullback_branched(cover: BranchedCover, alpha: Form, tol: Tolerances = DEFAULT_TOL,
                      source_grid=None) -> tuple[Form, CheckReport]:
    down = contact_check(alpha, cover.target, cover.target_res, tol)
    if not down.passed:
        raise NotContact("downstairs form is not contact", {"point": down.argmin.get("point"),
                                                           "value": down.min_margin})
    rest = contact_check(pullback(cover.downstairs.embedding, alpha), cover.downstairs.manifold,
                         cover.downstairs.resolution, tol)
    if not rest.passed:
        raise BranchRestrictionNotContact("restriction to the branch locus is not contact",
                                          {"point": rest.argmin.get("point"), "value": rest.min_margin})
    ahat = pullback(cover.map, alpha)
    g = _grid(cover.source, source_grid if source_grid is not None else cover.source_res, tol)
    adj = adjusted_check(ahat, cover.source, g, cover.upstairs, cover.r_excl, tol)
    return ahat, CheckReport("pullback-branched", adj.passed,
                             {"downstairs": down, "branch_restriction": rest, "adjusted": adj})


def cutoff(cover: BranchedCover) -> ScalarExpr:
    """g = 1 for r <= delta/2 and 0 for r >= delta, in r^2 = u^2 + v^2."""
    u, v = cover.tube
    return ScalarExpr(cover.source.coords, f"bump01((({u}^2 + {v}^2)/dl2 - 0.25)/0.75)",
                      params={"dl2": cover.delta**2})


def rotation_form(cover: BranchedCover) -> ExprForm:
    u, v = cover.tube
    return ExprForm(cover.source.coords, 1, {v: u, u: f"-{v}"})


def contactize(ahat: Form, cover: BranchedCover, eps: float, s: float = 1.0) -> Form:
    if s * eps == 0.0:
        return ahat
    return ahat + (s * eps) * ScalarMul(cutoff(cover), rotation_form(cover))


@dataclass
class EpsilonSearch:
    eps: float
    alpha: Form
    table: list[dict[str, Any]]
    reports: dict[str, PositivityReport] = field(default_factory=dict)


def epsilon_search(ahat: Form, cover: BranchedCover, s_grid: Sequence[float] = (0.25, 0.5, 0.75, 1.0),
                   grid=None, eps_start: float = 1.0, eps_min: float = EPS_MIN,
                   tol: Tolerances = DEFAULT_TOL) -> EpsilonSearch:
    g = _grid(cover.source, grid if grid is not None else cover.source_res, tol)
    eps = eps_start
    table = []
    while eps >= eps_min:
        ok = True
        reps = {}
        for s in s_grid:
            rep = contact_check(contactize(ahat, cover, eps, s), cover.source, g, tol)
            table.append({"eps": eps, "s": s, "min_margin": rep.min_margin, "passed": rep.passed})
            reps[f"s={s}"] = rep
            ok = ok and rep.passed
        if ok:
            return EpsilonSearch(eps, contactize(ahat, cover, eps, 1.0), table, reps)
        eps *= 0.5
    raise EpsilonExhausted("no eps above the floor contactizes the pull-back", {"table": table})


def deck_invariance_check(form: Form, cover: BranchedCover, grid=None, tol: Tolerances = DEFAULT_TOL) -> dict[str, Any]:
    """Largest |psi^* form - form| on frame vectors over all deck maps."""
    g = _grid(cover.source, grid if grid is not None else cover.source_res, tol)
    worst = 0.0
    per = []
    for psi in cover.deck:
        diff = LinComb(((1.0, pullback(psi, form)), (-1.0, form)))
        vals = max_on_frame_subsets(diff, cover.source, g.points, tol) if form.degree else \
            np.abs(diff.values(g.points).scalar().val)
        m = float(np.max(vals)) if vals.size else 0.0
        per.append(m)
        worst = max(worst, m)
    return {"max_residual": worst, "per_map": per, "passed": worst <= 1e-12, "count": len(g)}


@dataclass
class FillingForm:
    omega: Form
    alpha: Form
    eps: float
    downstairs: PositivityReport
    upstairs: PositivityReport


def boundary_filling_form(omega_V: Form, alpha: Form, cover: BranchedCover, eps: float,
                          eps_min: float = EPS_MIN, grid=None, tol: Tolerances = DEFAULT_TOL) -> FillingForm:
    """omega_hat = F^* omega_V + eps d(g (u dv - v du)) and the matching contact form upstairs."""
    down = weak_domination_check(alpha, omega_V, cover.target, cover.target_res, tol)
    if not down.passed:
        raise DownstairsNotDominated("downstairs form is not weakly dominated by omega_V",
                                     {"point": down.argmin.get("point"), "value": down.min_margin})
    ahat0 = pullback(cover.map, alpha)
    g = _grid(cover.source, grid if grid is not None else cover.source_res, tol)
    pulled = pullback(cover.map, omega_V)
    corr = D(ScalarMul(cutoff(cover), rotation_form(cover)))
    while eps >= eps_min:
        omega_hat = pulled + eps * corr
        ahat = contactize(ahat0, cover, eps, 1.0)
        up = weak_domination_check(ahat, omega_hat, cover.source, g, tol)
        if up.passed:
            return FillingForm(omega_hat, ahat, eps, down, up)
        eps *= 0.5
    raise EpsilonExhausted("no eps gives a weakly dominating form upstairs", {"eps": eps})


def contactize_path(alphas: Sequence[Form], ts: Sequence[float], cover: BranchedCover, eps: float,
                    tol: Tolerances = DEFAULT_TOL) -> list[Form]:
    """Contactize a path of downstairs forms with weight t k(t), k(t) the sampled downstairs minimum margin."""
    out = []
    for a, t in zip(alphas, ts):
        kt = max(contact_check(a, cover.target, cover.target_res, tol).min_margin, 0.0)
        out.append(contactize(pullback(cover.map, a), cover, eps, t * kt))
    return out


def binding_margin_audit(ahat: Form, cover: BranchedCover, eps: float,
                         s_values: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
                         tol: Tolerances = DEFAULT_TOL) -> dict[str, Any]:
    """Contact margins on the upstairs branch locus along the path s -> contactize(ahat, s).

    The pull-back is degenerate on the locus, so the margin there is exactly 0
    at s = 0 and, since only the linear term of the correction survives, it is
    linear in s.
    """
    from .positivity import contact_top_form, odd_half, top_values

    pts = cover.upstairs.points(tol)
    n = odd_half(cover.source)
    rows = []
    for s in s_values:
        vals = top_values(contact_top_form(contactize(ahat, cover, eps, s), n), cover.source, pts, tol)
        rows.append({"s": float(s), "min": float(np.min(vals)), "max": float(np.max(vals)),
                     "max_abs": float(np.max(np.abs(vals)))})
    ref = next((r for r in rows if r["s"] == 1.0), rows[-1])
    lin = 0.0
    for r in rows:
        if r["s"] > 0:
            pred = ref["min"] * r["s"] / ref["s"]
            lin = max(lin, abs(r["min"] - pred) / abs(pred), abs(r["max"] - ref["max"] * r["s"] / ref["s"]) / abs(pred))
    zero = next((r["max_abs"] for r in rows if r["s"] == 0.0), None)
    return {"rows": rows, "eps": eps, "margin_at_s0": zero, "linearity_error": lin, "samples": int(pts.shape[0]),
            "passed": bool((zero is None or zero == 0.0) and lin <= 1e-8)}
