"""Positivity checks on sample grids.

All checks evaluate top-degree forms on oriented tangent frames, report the
smallest margin with its location, and never stop at the first failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any

import numpy as np

from . import parallel
from .calculus import D, ExprMap, Form, pullback, wedge, wedge_power
from .calculus.algebra import on_vectors
from .charts import Manifold, SampleGrid, frames, sample_grid
from .config import DEFAULT_TOL, STURM_CHEB_POINTS, TAU_CAP, Tolerances
from .errors import EvenDimension, NotClosed, NumericallyIndeterminate, ZeroPolynomial, _plain
from .expr import Expr, as_expr, eval_values


@dataclass
class PositivityReport:
    condition: str
    min_margin: float
    argmin: dict[str, Any]
    passed: bool
    count: int
    warnings: list[str] = field(default_factory=list)
    history: list[dict[str, Any]] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)
    margins: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict[str, Any]:
        return _plain({
            "condition": self.condition,
            "min_margin": self.min_margin,
            "argmin": self.argmin,
            "passed": self.passed,
            "count": self.count,
            "warnings": self.warnings,
            "history": self.history,
            "details": self.details,
        })


def odd_half(manifold: Manifold) -> int:
    dim = manifold.dim
    if dim % 2 == 0:
        raise EvenDimension(f"contact conditions need odd dimension, got {dim}", {"dim": dim})
    return (dim + 1) // 2


def contact_top_form(alpha: Form, n: int) -> Form:
    """alpha ^ (d alpha)^(n-1)."""
    if n == 1:
        return alpha
    return wedge(alpha, wedge_power(D(alpha), n - 1))


def top_values(form: Form, manifold: Manifold, pts: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Values of a top-degree form on oriented frames, chunked over the points."""
    if form.degree != manifold.dim:
        raise ValueError(f"form of degree {form.degree} is not top-degree on a {manifold.dim}-manifold")

    def work(chunk):
        F = frames(manifold, chunk, tol)
        return on_vectors(form.jet(chunk, 0), F)

    return parallel.map_concat(work, pts)


def max_on_frame_subsets(form: Form, manifold: Manifold, pts: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Largest absolute value of a k-form over k-subsets of the frame vectors."""
    k = form.degree
    subsets = [list(c) for c in combinations(range(manifold.dim), k)]

    def work(chunk):
        F = frames(manifold, chunk, tol)
        fj = form.jet(chunk, 0)
        if not subsets:
            return np.zeros(chunk.shape[0])
        vals = [np.abs(on_vectors(fj, F[:, :, s])) for s in subsets]
        return np.max(np.stack(vals, axis=1), axis=1)

    return parallel.map_concat(work, pts)


def _argmin_info(grid: SampleGrid, values: np.ndarray, mask: np.ndarray | None = None) -> tuple[float, dict]:
    if mask is not None:
        idx_all = np.flatnonzero(mask)
        if idx_all.size == 0:
            return math.inf, {}
        i = int(idx_all[np.argmin(values[idx_all])])
    else:
        if values.size == 0:
            return math.inf, {}
        i = int(np.argmin(values))
    return float(values[i]), {"index": i, "grid_index": [int(v) for v in grid.indices[i]],
                              "point": [float(v) for v in grid.points[i]]}


def _report(condition: str, grid: SampleGrid, values: np.ndarray, tol: Tolerances,
            mask: np.ndarray | None = None, **details) -> PositivityReport:
    mn, arg = _argmin_info(grid, values, mask)
    count = int(values.size if mask is None else np.count_nonzero(mask))
    warnings = []
    if 0 < mn <= tol.pos:
        warnings.append(f"minimum margin {mn:.3e} is positive but below the tolerance {tol.pos:.1e}")
    if count == 0:
        warnings.append("no samples were checked")
    return PositivityReport(condition, mn, arg, bool(mn > tol.pos), count, warnings,
                            details=dict(details), margins=values)


def contact_check(alpha: Form, manifold: Manifold, grid: SampleGrid | Any,
                  tol: Tolerances = DEFAULT_TOL) -> PositivityReport:
    """Positive contact condition alpha ^ (d alpha)^(n-1) > 0 on every sample."""
    n = odd_half(manifold)
    if not isinstance(grid, SampleGrid):
        grid = sample_grid(manifold, grid, tol)
    top = contact_top_form(alpha, n)
    vals = top_values(top, manifold, grid.points, tol)
    rep = _report("contact", grid, vals, tol, n=n)
    rep.details["grid"] = grid.describe()
    return rep


def refine_contact_check(alpha: Form, manifold: Manifold, resolutions: list, tol: Tolerances = DEFAULT_TOL) -> PositivityReport:
    """Run the contact check on a sequence of grids and keep the history."""
    history = []
    last = None
    for res in resolutions:
        last = contact_check(alpha, manifold, res, tol)
        history.append({"resolution": list(last.details["grid"]["resolution"]),
                        "min_margin": last.min_margin, "argmin": last.argmin})
    last.history = history
    return last


@dataclass(frozen=True)
class Submanifold:
    """Embedded submanifold given by its own chart, an embedding and a distance function."""

    manifold: Manifold
    embedding: ExprMap
    distance: Expr
    resolution: Any

    def points(self, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
        g = sample_grid(self.manifold, self.resolution, tol)
        return self.embedding.values(g.points)

    def distance_values(self, coords, pts: np.ndarray) -> np.ndarray:
        env = {c: pts[:, i] for i, c in enumerate(coords)}
        return eval_values(self.distance, env, pts.shape[0])


def submanifold(manifold: Manifold, target: Manifold, embedding, distance, resolution) -> Submanifold:
    emb = ExprMap(manifold.coords, target.coords, embedding)
    return Submanifold(manifold, emb, as_expr(distance, target.coords), resolution)


def adjusted_check(alpha: Form, manifold: Manifold, grid, Z: Submanifold, r_excl: float,
                   tol: Tolerances = DEFAULT_TOL) -> PositivityReport:
    """Contact away from Z together with a contact restriction to Z."""
    odd_half(manifold)
    if not isinstance(grid, SampleGrid):
        grid = sample_grid(manifold, grid, tol)
    n = (manifold.dim + 1) // 2
    top = contact_top_form(alpha, n)
    vals = top_values(top, manifold, grid.points, tol)
    dist = Z.distance_values(manifold.coords, grid.points)
    away = dist >= r_excl
    off = _report("contact-off-Z", grid, vals, tol, mask=away)

    restricted = pullback(Z.embedding, alpha)
    zrep = contact_check(restricted, Z.manifold, Z.resolution, tol)
    passed = off.passed and zrep.passed
    mn = min(off.min_margin, zrep.min_margin)
    rep = PositivityReport("adjusted", mn, off.argmin if off.min_margin <= zrep.min_margin else zrep.argmin,
                           passed, off.count + zrep.count, off.warnings + zrep.warnings,
                           details={"off_Z_margin": off.min_margin, "off_Z_argmin": off.argmin,
                                    "Z_margin": zrep.min_margin, "Z_argmin": zrep.argmin,
                                    "r_excl": r_excl, "grid": grid.describe()},
                           margins=vals)
    return rep


# positivity of polynomials on the ray [0, inf)
@dataclass(frozen=True)
class RayResult:
    positive: bool
    witness: float | None
    method: str
    degree: int


def _trim(c: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(c != 0.0)
    if nz.size == 0:
        raise ZeroPolynomial("polynomial is identically zero")
    return c[: nz[-1] + 1]


def _sturm_sequence(desc: np.ndarray) -> list[np.ndarray]:
    """Sturm chain of a polynomial given highest-degree first, each member scaled to unit max-norm."""
    p0 = desc / np.max(np.abs(desc))
    p1 = np.polyder(p0)
    if p1.size == 0 or not np.any(p1):
        return [p0]
    p1 = p1 / np.max(np.abs(p1))
    seq = [p0, p1]
    while True:
        a, b = seq[-2], seq[-1]
        if b.size <= 1:
            break
        _, r = np.polydiv(a, b)
        scale = max(np.max(np.abs(a)), np.max(np.abs(b)))
        r = np.where(np.abs(r) <= 1e-12 * scale, 0.0, r)
        nz = np.flatnonzero(r)
        if nz.size == 0:
            break
        r = -r[nz[0]:]
        seq.append(r / np.max(np.abs(r)))
    return seq


def _variations(values: np.ndarray) -> int:
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _var_at(seq: list[np.ndarray], x: float) -> int:
    return _variations(np.array([np.polyval(p, x) for p in seq]))


def _var_inf(seq: list[np.ndarray]) -> int:
    return _variations(np.array([p[0] for p in seq]))


def _cauchy_bound(asc: np.ndarray) -> float:
    if asc.size <= 1:
        return 1.0
    with np.errstate(over="ignore"):
        return 1.0 + float(np.max(np.abs(asc[:-1] / asc[-1])))


def _amgm_dominated(c: np.ndarray) -> bool:
    """Each negative middle term is beaten by its share of c_0 + c_d tau^d (weighted AM-GM)."""
    d = c.size - 1
    neg = [k for k in range(1, d) if c[k] < 0.0]
    share = np.log(c[0] / len(neg)), np.log(c[d] / len(neg))
    for k in neg:
        w = k / d
        # c0 + cd tau^d >= c0^(1-w) cd^w tau^k / ((1-w)^(1-w) w^w)
        bound = (1 - w) * share[0] + w * share[1] - (1 - w) * np.log(1 - w) - w * np.log(w)
        if np.log(-c[k]) >= bound - 1e-12:
            return False
    return True


def _cheb_samples(cap: float, k: int) -> np.ndarray:
    j = np.arange(k)
    return 0.5 * cap * (1.0 - np.cos(np.pi * j / (k - 1)))


def ray_positive(coeffs, tol: Tolerances = DEFAULT_TOL) -> RayResult:
    """Decide whether sum_k c_k tau^k > 0 for all tau >= 0 (coefficients in ascending order)."""
    c = _trim(np.asarray(coeffs, dtype=float))
    scale = np.max(np.abs(c))
    scaled = c / scale
    # keep raw coefficients when scaling would flush a subnormal to zero
    if not np.any((scaled == 0.0) & (c != 0.0)):
        c, scale = scaled, 1.0
    deg = c.size - 1
    if c[0] <= 0.0:
        return RayResult(False, 0.0, "constant-term", deg)
    if deg == 0 or np.all(c >= 0.0):
        return RayResult(True, None, "coefficients", deg)
    if c[-1] < 0.0:
        with np.errstate(over="ignore"):
            w = 2.0 * _cauchy_bound(c)
        # past float range when the leading coefficient is subnormal
        return RayResult(False, w if np.isfinite(w) else None, "leading-coefficient", deg)
    desc = c[::-1]
    # a sampled non-positive value certifies failure whatever the Sturm chain says
    taus = np.concatenate([_cheb_samples(1.0, STURM_CHEB_POINTS), _cheb_samples(TAU_CAP, STURM_CHEB_POINTS)])
    vals = np.polyval(desc, taus)
    if np.any(vals <= 0):
        i = int(np.argmin(vals))
        return RayResult(False, float(taus[i]), "sampling", deg)
    # a negligible non-negative top tail only raises the polynomial on the ray
    tail = np.abs(c) <= 1e-13 * scale
    top = c.size
    while top > 1 and tail[top - 1]:
        top -= 1
    if top < c.size and top > 1 and ray_positive(c[:top], tol).positive:
        return RayResult(True, None, "dominated-truncation", deg)
    if _amgm_dominated(c):
        return RayResult(True, None, "am-gm", deg)
    seq = _sturm_sequence(desc)
    count = _var_at(seq, 0.0) - _var_inf(seq)
    if count <= 0:
        return RayResult(True, None, "sturm", deg)
    # isolate the smallest positive root by bisection on Sturm counts
    lo, hi = 0.0, min(_cauchy_bound(c), 1e300)
    v_lo = _var_at(seq, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if v_lo - _var_at(seq, mid) >= 1:
            hi = mid
        else:
            lo, v_lo = mid, _var_at(seq, mid)
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    cands = np.array([lo, 0.5 * (lo + hi), hi])
    vals = np.polyval(desc, cands)
    j = int(np.argmin(vals))
    if vals[j] <= 0.0:
        return RayResult(False, float(cands[j]), "sturm", deg)
    # even-multiplicity root hidden by rounding: search the neighbourhood densely
    grid = np.linspace(max(0.0, lo - 1e-6 * max(1.0, lo)), hi + 1e-6 * max(1.0, hi), 2001)
    gv = np.polyval(desc, grid)
    if np.any(gv <= 0.0):
        k = int(np.argmin(gv))
        return RayResult(False, float(grid[k]), "sturm", deg)
    raise NumericallyIndeterminate("Sturm sequence reports a root but no non-positive value was found",
                                   {"interval": [lo, hi], "min_value": float(np.min(gv)),
                                    "coefficients": list(map(float, c))})


def ray_minimum(coeffs) -> float:
    """min over tau >= 0 when finite, else min over [0, TAU_CAP]."""
    c = np.asarray(coeffs, dtype=float)
    nz = np.flatnonzero(c != 0.0)
    if nz.size == 0:
        return 0.0
    c = c[: nz[-1] + 1]
    if c.size == 1:
        return float(c[0])
    if np.all(c >= 0):
        return float(c[0])
    desc = c[::-1]
    cands = [0.0]
    crit = np.roots(np.polyder(desc))
    for z in np.atleast_1d(crit):
        if abs(z.imag) <= 1e-9 * max(1.0, abs(z.real)) and z.real > 0:
            cands.append(float(z.real))
    if c[-1] < 0:
        cands.extend(_cheb_samples(TAU_CAP, STURM_CHEB_POINTS).tolist())
        cands = [t for t in cands if t <= TAU_CAP]
    return float(np.min(np.polyval(desc, np.array(cands))))


def weak_domination_check(alpha: Form, omega: Form, manifold: Manifold, grid,
                          tol: Tolerances = DEFAULT_TOL) -> PositivityReport:
    """alpha ^ (omega + tau d alpha)^m > 0 for all tau >= 0, m = (dim - 1) / 2."""
    n = odd_half(manifold)
    m = n - 1
    if not isinstance(grid, SampleGrid):
        grid = sample_grid(manifold, grid, tol)
    if omega.degree != 2:
        raise ValueError("omega must be a 2-form")
    if manifold.dim >= 3:
        dw = max_on_frame_subsets(D(omega), manifold, grid.points, tol)
        if dw.size and np.max(dw) > tol.closed:
            i = int(np.argmax(dw))
            raise NotClosed("omega is not closed on the manifold",
                            {"index": i, "point": grid.points[i], "value": float(dw[i])})
    da = D(alpha)
    coeff_vals = []
    for k in range(m + 1):
        parts = [alpha]
        if m - k > 0:
            parts.append(wedge_power(omega, m - k))
        if k > 0:
            parts.append(wedge_power(da, k))
        f = parts[0]
        for p in parts[1:]:
            f = wedge(f, p)
        coeff_vals.append(math.comb(m, k) * top_values(f, manifold, grid.points, tol))
    C = np.stack(coeff_vals, axis=1)  # (N, m + 1), ascending powers of tau
    margins = np.empty(C.shape[0])
    positive = np.ones(C.shape[0], dtype=bool)
    quick = np.all(C > 0, axis=1)
    margins[quick] = C[quick, 0]
    witness: dict[str, Any] = {}
    for i in np.flatnonzero(~quick):
        row = C[i]
        if not np.any(row):
            positive[i] = False
            margins[i] = 0.0
            continue
        res = ray_positive(row, tol)
        positive[i] = res.positive
        margins[i] = ray_minimum(row)
        if not res.positive and not witness:
            witness = {"index": int(i), "tau": res.witness, "coefficients": row.tolist()}
    rep = _report("weak-domination", grid, margins, tol)
    if not np.all(positive):
        rep.passed = False
    drop = int(np.count_nonzero((np.abs(C[:, -1]) <= tol.pos) & np.all(C[:, :-1] > 0, axis=1))) if m > 0 else 0
    if drop:
        rep.warnings.append(f"top coefficient vanishes at {drop} samples with positive lower coefficients")
    i0 = rep.argmin.get("index")
    rep.details.update({
        "exponent": m,
        "grid": grid.describe(),
        "polynomial_at_argmin": None if i0 is None else [float(v) for v in C[i0]],
        "failure": witness or None,
        "degree_drop_samples": drop,
    })
    return rep


@dataclass
class CheckReport:
    """Several named sub-checks with an overall verdict."""

    name: str
    passed: bool
    checks: dict[str, PositivityReport] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return _plain({
            "name": self.name,
            "passed": self.passed,
            "checks": {k: v.to_dict() for k, v in self.checks.items()},
            "warnings": self.warnings,
            "details": self.details,
        })


def margin_report(condition: str, grid: SampleGrid, values: np.ndarray, tol: Tolerances = DEFAULT_TOL,
                  mask: np.ndarray | None = None, threshold: float | None = None, **details) -> PositivityReport:
    """Report for precomputed margins; ``threshold`` overrides the positivity tolerance."""
    rep = _report(condition, grid, values, tol, mask, **details)
    if threshold is not None:
        rep.passed = bool(rep.min_margin > threshold)
    return rep
