"""Reeb fields, their flows and closed-orbit detection.

Flows use classic RK4 with step doubling, one step size per seed, so a batch
of seeds is integrated as a single array.  Periodic coordinates are never
wrapped in the state, which keeps winding numbers available.  Closed orbits
are found by watching the signed return g(t) = (y(t) - y0) . X(y0) across
the section through the seed and refining each near-return by a secant
(regula falsi) iteration on g.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import parallel
from .calculus import D, Field, Form, pair, reeb_vector_field
from .charts import Box, Manifold, Product, SampleGrid, frames, project, sample_grid, wrap_delta
from .config import DEFAULT_TOL, Tolerances
from .errors import LeftDomain, StepCollapse, _plain

H_MIN = 1e-12
H_MAX = 0.25
SEED_CHUNK = 16
SAMPLE_POINTS = 256


def _grid(m: Manifold, g, tol: Tolerances) -> SampleGrid:
    return g if isinstance(g, SampleGrid) else sample_grid(m, g, tol)


# -- Reeb fields ------------------------------------------------------------


def _da_matrix(alpha: Form, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values of alpha as (n, D) and of d alpha as antisymmetric (n, D, D)."""
    a = alpha.jet(pts, 0)
    n, dim = pts.shape
    av = np.zeros((n, dim))
    for (i,), j in a.comps.items():
        av[:, i] = j.val
    w = D(alpha).jet(pts, 0)
    W = np.zeros((n, dim, dim))
    for (i, k), j in w.comps.items():
        W[:, i, k] = j.val
        W[:, k, i] = -j.val
    return av, W


def reeb_on_frames(alpha: Form, manifold: Manifold, pts: np.ndarray, tol: Tolerances = DEFAULT_TOL,
                   method: str = "qr") -> np.ndarray:
    """Reeb field from an intrinsic solve in a tangent frame; an independent check of the bordered solve."""
    F = frames(manifold, pts, tol, method)
    av, W = _da_matrix(alpha, pts)
    A = np.einsum("nDi,nDE,nEj->nij", F, W, F)
    a = np.einsum("nD,nDi->ni", av, F)
    M = np.concatenate([A, a[:, None, :]], axis=1)
    rhs = np.zeros(M.shape[:2])
    rhs[:, -1] = 1.0
    c = np.stack([np.linalg.lstsq(M[i], rhs[i], rcond=None)[0] for i in range(len(pts))]) if len(pts) else \
        np.zeros((0, F.shape[2]))
    return np.einsum("nDi,ni->nD", F, c)


@dataclass
class ReebField:
    alpha: Form
    manifold: Manifold
    field: Field
    grid: SampleGrid
    table: np.ndarray
    report: dict[str, Any]

    def values(self, pts: np.ndarray) -> np.ndarray:
        # the table is a cache; off-grid points go straight to the pointwise solver
        return self.field.values(np.asarray(pts, dtype=float))

    def to_dict(self) -> dict[str, Any]:
        return _plain(self.report)


def reeb_residuals(alpha: Form, manifold: Manifold, R: np.ndarray, pts: np.ndarray,
                   tol: Tolerances = DEFAULT_TOL) -> dict[str, float]:
    av, W = _da_matrix(alpha, pts)
    F = frames(manifold, pts, tol)
    norm = np.abs(np.einsum("nD,nD->n", av, R) - 1.0)
    inner = np.einsum("nD,nDE,nEi->ni", R, W, F)
    return {"alpha_R_minus_1": float(np.max(norm, initial=0.0)),
            "iota_R_dalpha": float(np.max(np.abs(inner), initial=0.0))}


def reeb_field(alpha: Form, manifold: Manifold, grid, tol: Tolerances = DEFAULT_TOL) -> ReebField:
    """Tabulate the Reeb field on a grid with residual and frame-independence audits."""
    g = _grid(manifold, grid, tol)
    R = reeb_vector_field(alpha, manifold, tol=tol)
    table = parallel.map_concat(R.values, g.points)
    res = parallel.map_chunks(lambda p: reeb_residuals(alpha, manifold, R.values(p), p, tol), g.points)
    a1 = max((r["alpha_R_minus_1"] for r in res), default=0.0)
    a2 = max((r["iota_R_dalpha"] for r in res), default=0.0)
    alt = parallel.map_concat(lambda p: reeb_on_frames(alpha, manifold, p, tol, "projection"), g.points)
    frame_dev = float(np.max(np.linalg.norm(alt - table, axis=1), initial=0.0))
    report = {"count": len(g), "alpha_R_minus_1": a1, "iota_R_dalpha": a2, "frame_deviation": frame_dev,
              "passed": bool(max(a1, a2) <= 1e-9 and frame_dev <= 1e-9)}
    return ReebField(alpha, manifold, R, g, table, report)


# -- flows ----------------------------------------------------------------------


def _wrap_points(m: Manifold, pts: np.ndarray) -> np.ndarray:
    out = pts.copy()
    for name, p in m.periods().items():
        i = m.index(name)
        out[:, i] = np.mod(out[:, i], p)
    return out


def _disk_factors(m: Manifold) -> list[tuple[Box, slice]]:
    if isinstance(m, Product):
        return [(p, s) for p, s in zip(m.parts, m.slices()) if isinstance(p, Box)]
    return [(m, slice(0, m.ambient_dim))] if isinstance(m, Box) else []


def _inside(m: Manifold, pts: np.ndarray) -> np.ndarray:
    ok = np.ones(pts.shape[0], dtype=bool)
    for box, sl in _disk_factors(m):
        ok &= box.inside(pts[:, sl])
    return ok


class _Flow:
    def __init__(self, X: Field, manifold: Manifold):
        self.X = X
        self.m = manifold
        self.evals = 0

    def f(self, y: np.ndarray) -> np.ndarray:
        self.evals += 1
        if y.shape[0] == 0:
            return np.zeros_like(y)
        return self.X.values(_wrap_points(self.m, y))

    def rk4(self, y: np.ndarray, h: np.ndarray, k1: np.ndarray | None = None) -> np.ndarray:
        h = h[:, None]
        k1 = self.f(y) if k1 is None else k1
        k2 = self.f(y + 0.5 * h * k1)
        k3 = self.f(y + 0.5 * h * k2)
        k4 = self.f(y + h * k3)
        return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def step(self, y: np.ndarray, h: np.ndarray, k1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Classic RK4 with step doubling; returns the two-half-step result and its error estimate."""
        full = self.rk4(y, h, k1)
        half = self.rk4(y, 0.5 * h, k1)
        two = self.rk4(half, 0.5 * h)
        err = np.linalg.norm(two - full, axis=1) / 15.0
        return project(self.m, two), err

    def advance(self, y: np.ndarray, tau: np.ndarray) -> np.ndarray:
        """Fixed-size advance by tau (<= an accepted step), used for refinement."""
        half = self.rk4(y, 0.5 * tau)
        return project(self.m, self.rk4(half, 0.5 * tau))


@dataclass
class Trajectory:
    seed: np.ndarray
    times: np.ndarray
    points: np.ndarray   # unwrapped
    status: str          # complete | stopped | left-domain | step-collapse
    steps: int
    rejected: int
    audit: dict[str, Any] = field(default_factory=dict)

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]


def _integrate_batch(X: Field, m: Manifold, seeds: np.ndarray, T_max: float, tol: float, h0: float,
                     h_max: float, on_step: Callable | None = None) -> list[Trajectory]:
    flow = _Flow(X, m)
    n = seeds.shape[0]
    y = project(m, seeds.astype(float).copy())
    t = np.zeros(n)
    h = np.full(n, min(h0, h_max, T_max) if T_max > 0 else 0.0)
    status = np.array(["running"] * n, dtype=object)
    if T_max <= 0:
        status[:] = "complete"
    times = [[0.0] for _ in range(n)]
    pts = [[y[i].copy()] for i in range(n)]
    steps = np.zeros(n, dtype=int)
    rejected = np.zeros(n, dtype=int)
    k1 = flow.f(y)
    while True:
        act = np.flatnonzero(status == "running")
        if act.size == 0:
            break
        ha = np.minimum(h[act], T_max - t[act])
        ya, ka = y[act], k1[act]
        ynew, err = flow.step(ya, ha, ka)
        ok = err <= tol * ha
        fac = np.where(err > 0, 0.9 * (tol * ha / np.maximum(err, 1e-300)) ** 0.25, 4.0)
        fac = np.clip(fac, 0.2, 4.0)
        inside = _inside(m, ynew)
        acc = act[ok]
        for j, i in enumerate(act):
            if not ok[j]:
                rejected[i] += 1
                h[i] = ha[j] * fac[j]
                if h[i] < H_MIN:
                    status[i] = "step-collapse"
                continue
            if not inside[j]:
                status[i] = "left-domain"
                continue
            stop = on_step is not None and on_step(i, t[i], y[i], ynew[j], ha[j])
            t[i] += ha[j]
            y[i] = ynew[j]
            steps[i] += 1
            times[i].append(t[i])
            pts[i].append(ynew[j].copy())
            h[i] = min(ha[j] * fac[j], h_max)
            if stop:
                status[i] = "stopped"
            elif T_max - t[i] <= 1e-12 * max(1.0, T_max):
                status[i] = "complete"
        moved = acc[status[acc] == "running"]
        if moved.size:
            k1[moved] = flow.f(y[moved])
    return [Trajectory(seeds[i].copy(), np.array(times[i]), np.array(pts[i]), str(status[i]),
                       int(steps[i]), int(rejected[i])) for i in range(n)]


def integrate_flows(X: Field, manifold: Manifold, seeds, T_max: float, tol: float = 1e-10,
                    h0: float = 1e-2, h_max: float = H_MAX, alpha: Form | None = None) -> list[Trajectory]:
    """Integrate every seed independently up to T_max; seeds are processed in fixed-size chunks."""
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.size == 0:
        return []

    def run(chunk: np.ndarray) -> list[Trajectory]:
        return _integrate_batch(X, manifold, chunk, T_max, tol, h0, h_max)

    trajs = [tr for part in parallel.map_chunks(run, seeds, SEED_CHUNK) for tr in part]
    if alpha is not None:
        for tr in trajs:
            tr.audit.update(energy_audit(alpha, X, manifold, tr))
    return trajs


def integrate_flow(X: Field, manifold: Manifold, seed, T_max: float, tol: float = 1e-10,
                   h0: float = 1e-2, h_max: float = H_MAX, alpha: Form | None = None,
                   strict: bool = False) -> Trajectory:
    """Single trajectory.  StepCollapse is raised; leaving a disk factor truncates and flags,
    or raises LeftDomain when ``strict``."""
    tr = integrate_flows(X, manifold, [seed], T_max, tol, h0, h_max, alpha)[0]
    if tr.status == "step-collapse":
        raise StepCollapse("step size fell below 1e-12",
                           {"time": float(tr.times[-1]), "point": tr.points[-1]})
    if strict and tr.status == "left-domain":
        raise LeftDomain("trajectory left the domain", {"time": float(tr.times[-1]), "point": tr.points[-1]})
    return tr


def energy_audit(alpha: Form, X: Field, manifold: Manifold, tr: Trajectory) -> dict[str, float]:
    """Drift of alpha(X) along the trajectory, per unit time."""
    p = _wrap_points(manifold, tr.points)
    val = pair(alpha, X).values(p).scalar().val
    T = float(tr.times[-1])
    drift = float(np.max(np.abs(val - val[0]))) if val.size else 0.0
    return {"alpha_X_start": float(val[0]), "alpha_X_drift": drift,
            "drift_per_unit_time": drift / max(T, 1.0)}


# -- closed orbits ----------------------------------------------------------


@dataclass
class OrbitRecord:
    seed: np.ndarray
    period: float
    residual: float
    winding: dict[str, int]
    trajectory: np.ndarray
    status: str          # raw | newton-refined
    closed: bool
    index: int = 0
    truncated: bool = False
    duplicates: list[int] = field(default_factory=list)

    @property
    def winding_vector(self) -> list[int]:
        return list(self.winding.values())

    def to_dict(self) -> dict[str, Any]:
        return _plain({"index": self.index, "seed": self.seed, "period": self.period,
                       "residual": self.residual, "winding": self.winding, "status": self.status,
                       "closed": self.closed, "truncated": self.truncated, "duplicates": self.duplicates,
                       "trajectory_samples": len(self.trajectory)})


def _secant_crossing(flow: _Flow, m: Manifold, y0: np.ndarray, h: float, seed: np.ndarray,
                     n: np.ndarray, g0: float, g1: float, iters: int = 60):
    """Illinois regula falsi for g(tau) = wrap(y(tau) - seed) . n on [0, h]."""
    def g(tau: float) -> tuple[float, np.ndarray]:
        if tau <= 0.0:
            return g0, y0
        y = flow.advance(y0[None, :], np.array([tau]))[0]
        return float(wrap_delta(m, y - seed) @ n), y

    a, b, ga, gb = 0.0, h, g0, g1
    side = 0
    y = None
    tau = h
    for _ in range(iters):
        tau = (a * gb - b * ga) / (gb - ga) if gb != ga else 0.5 * (a + b)
        gt, y = g(tau)
        if abs(gt) <= 1e-15 or (b - a) <= 1e-15 * max(1.0, h):
            return tau, y, True
        if (gt < 0) == (ga < 0):
            a, ga = tau, gt
            if side == -1:
                gb *= 0.5
            side = -1
        else:
            b, gb = tau, gt
            if side == 1:
                ga *= 0.5
            side = 1
    return tau, y, False


def _subsample(points: np.ndarray, k: int = SAMPLE_POINTS) -> np.ndarray:
    if len(points) <= k:
        return points.copy()
    idx = np.unique(np.linspace(0, len(points) - 1, k).round().astype(int))
    return points[idx]


class _SeedSearch:
    """Near-return bookkeeping for one seed; fed by the batch integrator."""

    def __init__(self, flow: _Flow, m: Manifold, y0: np.ndarray, x0: np.ndarray, tol: Tolerances,
                 torus: Sequence[str]):
        self.flow, self.m, self.y0, self.tol, self.torus = flow, m, y0, tol, torus
        self.speed = float(np.linalg.norm(x0))
        self.nrm = x0 / self.speed if self.speed > 0 else x0
        self.points: list[np.ndarray] = [y0]
        self.found: OrbitRecord | None = None
        self.best: OrbitRecord | None = None

    def record(self, T: float, y: np.ndarray, converged: bool) -> OrbitRecord:
        m, y0 = self.m, self.y0
        res = float(np.linalg.norm(wrap_delta(m, y - y0)))
        per = m.periods()
        wind = {c: int(np.rint((y - y0)[m.index(c)] / per[c])) for c in self.torus}
        traj = np.vstack([_subsample(np.array(self.points)), y[None, :]])
        return OrbitRecord(y0.copy(), float(T), res, wind, traj,
                           "newton-refined" if converged else "raw", res <= self.tol.orbit)

    def step(self, t: float, ya: np.ndarray, yb: np.ndarray, h: float) -> bool:
        if self.speed == 0.0 or t == 0.0:
            self.points.append(yb.copy())
            return False
        m, y0, nrm = self.m, self.y0, self.nrm
        da, db = wrap_delta(m, ya - y0), wrap_delta(m, yb - y0)
        ga, gb = float(da @ nrm), float(db @ nrm)
        stop = False
        if ga < 0.0 <= gb:
            dc = da + ga / (ga - gb) * (db - da)
            # linear interpolation error bound from the step's curvature
            catch = self.tol.catch + float(np.linalg.norm(db - da - h * self.flow.f(ya[None, :])[0]))
            if np.linalg.norm(dc) < catch:
                tau, y, conv = _secant_crossing(self.flow, m, ya, h, y0, nrm, ga, gb)
                rec = self.record(t + tau, y, conv)
                if rec.closed:
                    self.found = rec
                    stop = True
                elif self.best is None or rec.residual < self.best.residual:
                    self.best = rec
        self.points.append(yb.copy())
        return stop


def _search_batch(X: Field, m: Manifold, seeds: np.ndarray, T_max: float, tol: Tolerances,
                  torus: Sequence[str], itol: float, h_max: float) -> list[OrbitRecord | None]:
    flow = _Flow(X, m)
    y0 = project(m, seeds.astype(float).copy())
    x0 = flow.f(y0)
    searches = [_SeedSearch(flow, m, y0[i], x0[i], tol, torus) for i in range(len(y0))]
    trajs = _integrate_batch(X, m, y0, T_max, itol, 1e-2, h_max,
                             lambda i, t, ya, yb, h: searches[i].step(t, ya, yb, h))
    out: list[OrbitRecord | None] = []
    for s, tr in zip(searches, trajs):
        rec = s.found or s.best
        if rec is not None and s.found is None:
            rec.truncated = tr.status == "left-domain"
        out.append(rec)
    return out


def _distance_to_orbit(flow: _Flow, m: Manifold, rec: OrbitRecord, p: np.ndarray) -> float:
    """Distance from p to the orbit of rec, refined on the section through p."""
    traj = rec.trajectory
    d = np.linalg.norm(wrap_delta(m, traj - p), axis=1)
    i = int(np.argmin(d))
    if d[i] <= 1e-15:
        return 0.0
    if len(traj) > 1:
        gap = float(np.max(np.linalg.norm(wrap_delta(m, np.diff(traj, axis=0)), axis=1)))
        if d[i] > 2.0 * gap:
            # the orbit stays within about one sample gap of its samples
            return float(d[i])
    xp = flow.f(p[None, :])[0]
    sp = float(np.linalg.norm(xp))
    if sp == 0.0:
        return float(d[i])
    nrm = xp / sp
    j = max(i - 1, 0)
    y = traj[j]
    span = float(np.linalg.norm(wrap_delta(m, traj[min(i + 1, len(traj) - 1)] - y))) / sp
    steps = max(4, int(np.ceil(span / H_MAX)) * 4)
    tau = span / steps if span > 0 else 0.0
    prev, gp = y, float(wrap_delta(m, y - p) @ nrm)
    for _ in range(steps):
        nxt = flow.advance(prev[None, :], np.array([tau]))[0]
        gn = float(wrap_delta(m, nxt - p) @ nrm)
        if gp < 0.0 <= gn:
            _, yc, _ = _secant_crossing(flow, m, prev, tau, p, nrm, gp, gn)
            return float(np.linalg.norm(wrap_delta(m, yc - p)))
        prev, gp = nxt, gn
    return float(d[i])


def closed_orbit_search(X: Field, manifold: Manifold, seeds, T_max: float, tol: Tolerances = DEFAULT_TOL,
                        torus: Sequence[str] | None = None, integrator_tol: float = 1e-10,
                        h_max: float = H_MAX) -> list[OrbitRecord]:
    """Closed-orbit candidates per seed, deduplicated in seed order.

    ``torus`` names the coordinates whose windings are reported (all
    periodic coordinates by default).
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.size == 0:
        return []
    torus = tuple(manifold.periods()) if torus is None else tuple(torus)

    def run(chunk: np.ndarray) -> list[OrbitRecord | None]:
        return _search_batch(X, manifold, chunk, T_max, tol, torus, integrator_tol, h_max)

    recs = [r for part in parallel.map_chunks(run, seeds, SEED_CHUNK) for r in part]
    flow = _Flow(X, manifold)
    kept: list[OrbitRecord] = []
    for idx, rec in enumerate(recs):
        if rec is None:
            continue
        rec.index = idx
        if rec.closed:
            dup = None
            for k in kept:
                if not k.closed or abs(k.period - rec.period) > 1e-6 * max(1.0, k.period):
                    continue
                if _distance_to_orbit(flow, manifold, k, rec.seed) <= tol.orbit:
                    dup = k
                    break
            if dup is not None:
                dup.duplicates.append(idx)
                continue
        kept.append(rec)
    return kept


def orbit_table(records: Sequence[OrbitRecord]) -> list[dict[str, Any]]:
    return [r.to_dict() for r in records]


def contractible_orbit_audit(records: Sequence[OrbitRecord], manifold: Manifold, binding_distance,
                             torus: Sequence[str], tol: Tolerances = DEFAULT_TOL) -> dict[str, Any]:
    """Zero-winding closed orbits must sit on the binding with constant torus coordinates.

    ``binding_distance`` maps an (n, D) array of points to distances from
    the binding locus.
    """
    ti = [manifold.index(c) for c in torus]
    rows = []
    ok = True
    for r in records:
        if not r.closed or any(r.winding.get(c, 0) != 0 for c in torus):
            continue
        pts = r.trajectory
        dist = float(np.max(binding_distance(_wrap_points(manifold, pts))))
        spread = float(np.max(np.ptp(pts[:, ti], axis=0))) if ti else 0.0
        good = dist <= tol.bind and spread <= tol.orbit
        ok &= good
        rows.append({"index": r.index, "period": r.period, "binding_distance": dist,
                     "torus_spread": spread, "passed": good})
    return _plain({"passed": bool(ok), "zero_winding_closed": len(rows), "records": len(records),
                   "orbits": rows, "vacuous": not rows})


# -- normal form predictions -------------------------------------------------


def predicted_reeb_bourgeois(nf, grid, tol: float = 1e-6) -> dict[str, Any]:
    """Compare the normal-form prediction with the pointwise solve and audit its structure."""
    from .normal_form import TORUS, compare_prediction

    report = compare_prediction(nf, grid, tol)
    P = nf.product
    g = _grid(P, grid, DEFAULT_TOL)
    R = reeb_vector_field(nf.alpha, P)
    iu, iv, it = P.index("u"), P.index("v"), P.index("t")
    ti = [P.index(c) for c in TORUS]
    r = np.hypot(g.points[:, iu], g.points[:, iv])
    outer = r >= nf.rho_bounds[1]
    if np.any(outer):
        p = g.points[outer]
        Rv = R.values(p)
        ro = r[outer]
        target = np.stack([p[:, iu] / ro, -p[:, iv] / ro], axis=1)
        report["outer_lambda_max"] = float(np.max(np.abs(Rv[:, it])))
        report["outer_torus_deviation"] = float(np.max(np.linalg.norm(Rv[:, ti] - target, axis=1)))
        report["outer_count"] = int(outer.sum())
    else:
        report["outer_lambda_max"] = report["outer_torus_deviation"] = 0.0
        report["outer_count"] = 0
    report["passed"] = bool(report["passed"] and report["binding_torus_max"] <= tol
                            and report["outer_lambda_max"] <= tol and report["outer_torus_deviation"] <= tol)
    return _plain(report)
