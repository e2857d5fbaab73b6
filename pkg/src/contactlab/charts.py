"""Charted manifolds, sample grids and oriented tangent frames.

Manifolds live in an ambient coordinate space with named coordinates.
Four kinds are supported: periodic boxes (tori), planar boxes optionally
cut to a disk, level sets with a named parametrization recipe, and
products of these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import DimensionMismatch, OffManifoldPoint, RankDeficient, UnparametrizedLevelSet
from .expr import Expr, Jet, as_expr, evaluate

TWO_PI = 2.0 * math.pi


def coordinate_env(coords: Sequence[str], pts: np.ndarray, order: int) -> dict[str, Jet]:
    d = len(coords)
    return {c: Jet.coordinate(pts[:, i], i, d, order) for i, c in enumerate(coords)}


class Manifold:
    """Common interface; see the concrete kinds below."""

    coords: tuple[str, ...]

    @property
    def ambient_dim(self) -> int:
        return len(self.coords)

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def periods(self) -> dict[str, float]:
        return {}

    def constraints(self) -> list[Expr]:
        return []

    def axes(self) -> int:
        raise NotImplementedError

    def factors(self) -> list["Manifold"]:
        return [self]

    def index(self, name: str) -> int:
        return self.coords.index(name)

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PeriodicBox(Manifold):
    coords: tuple[str, ...]
    periods_: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        if not self.periods_:
            object.__setattr__(self, "periods_", tuple(TWO_PI for _ in self.coords))
        object.__setattr__(self, "periods_", tuple(float(p) for p in self.periods_))
        if len(self.periods_) != len(self.coords):
            raise DimensionMismatch("one period per coordinate is required")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def periods(self) -> dict[str, float]:
        return dict(zip(self.coords, self.periods_))

    def axes(self) -> int:
        return len(self.coords)

    def describe(self) -> dict:
        return {"kind": "periodic_box", "coords": list(self.coords), "periods": list(self.periods_)}


@dataclass(frozen=True)
class Box(Manifold):
    """Open planar box ``lower < x < upper`` (closed for sampling), optionally cut to ``|x| < radius``."""

    coords: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    radius: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "lower", tuple(float(x) for x in self.lower))
        object.__setattr__(self, "upper", tuple(float(x) for x in self.upper))
        if not (len(self.lower) == len(self.upper) == len(self.coords)):
            raise DimensionMismatch("box bounds must match the coordinates")

    @staticmethod
    def disk(coords: Sequence[str], radius: float) -> "Box":
        return Box(tuple(coords), tuple(-radius for _ in coords), tuple(radius for _ in coords), radius)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def axes(self) -> int:
        return len(self.coords)

    def inside(self, pts: np.ndarray) -> np.ndarray:
        ok = np.ones(pts.shape[0], dtype=bool)
        if self.radius is not None:
            ok &= np.sum(pts**2, axis=1) < self.radius**2
        lo, hi = np.array(self.lower), np.array(self.upper)
        ok &= np.all((pts >= lo) & (pts <= hi), axis=1)
        return ok

    def describe(self) -> dict:
        return {"kind": "box", "coords": list(self.coords), "lower": list(self.lower),
                "upper": list(self.upper), "radius": self.radius}


@dataclass(frozen=True)
class LevelSet(Manifold):
    coords: tuple[str, ...]
    constraint_src: tuple[str, ...]
    recipe: str | None = None
    _exprs: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "constraint_src", tuple(str(c) for c in self.constraint_src))
        object.__setattr__(self, "_exprs", tuple(as_expr(c, self.coords) for c in self.constraint_src))

    @property
    def dim(self) -> int:
        return len(self.coords) - len(self.constraint_src)

    def constraints(self) -> list[Expr]:
        return list(self._exprs)

    def axes(self) -> int:
        if self.recipe not in RECIPES:
            raise UnparametrizedLevelSet(f"level set has no known sampling recipe ({self.recipe!r})",
                                         {"recipe": self.recipe})
        return RECIPES[self.recipe].axes

    def describe(self) -> dict:
        return {"kind": "level_set", "coords": list(self.coords), "constraints": list(self.constraint_src),
                "recipe": self.recipe}


@dataclass(frozen=True)
class Product(Manifold):
    parts: tuple[Manifold, ...]

    def __post_init__(self):
        flat: list[Manifold] = []
        for p in self.parts:
            flat.extend(p.factors())
        object.__setattr__(self, "parts", tuple(flat))
        names = [c for p in flat for c in p.coords]
        if len(set(names)) != len(names):
            raise DimensionMismatch("product factors must use distinct coordinate names",
                                    {"coords": names})

    @property
    def coords(self) -> tuple[str, ...]:  # type: ignore[override]
        return tuple(c for p in self.parts for c in p.coords)

    @property
    def dim(self) -> int:
        return sum(p.dim for p in self.parts)

    def periods(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for p in self.parts:
            out.update(p.periods())
        return out

    def constraints(self) -> list[Expr]:
        return [c for p in self.parts for c in p.constraints()]

    def axes(self) -> int:
        return sum(p.axes() for p in self.parts)

    def factors(self) -> list[Manifold]:
        return list(self.parts)

    def slices(self) -> list[slice]:
        out, start = [], 0
        for p in self.parts:
            out.append(slice(start, start + p.ambient_dim))
            start += p.ambient_dim
        return out

    def describe(self) -> dict:
        return {"kind": "product", "factors": [p.describe() for p in self.parts]}


def sphere3() -> LevelSet:
    return LevelSet(("x1", "y1", "x2", "y2"), ("x1^2 + y1^2 + x2^2 + y2^2 - 1",), "hopf")


def circle(coords: Sequence[str] = ("cx", "cy")) -> LevelSet:
    a, b = coords
    return LevelSet(tuple(coords), (f"{a}^2 + {b}^2 - 1",), "circle")


# sampling recipes for level sets
@dataclass(frozen=True)
class Recipe:
    axes: int
    closed_axes: tuple[bool, ...]  # True when both endpoints are included
    bounds: tuple[tuple[float, float], ...]

    def params(self, resolution: Sequence[int]) -> list[np.ndarray]:
        out = []
        for n, closed, (a, b) in zip(resolution, self.closed_axes, self.bounds):
            if closed:
                out.append(np.linspace(a, b, n) if n > 1 else np.array([a]))
            else:
                out.append(a + (b - a) * np.arange(n) / n)
        return out


def _hopf_map(p: np.ndarray) -> np.ndarray:
    eta, f1, f2 = p[:, 0], p[:, 1], p[:, 2]
    return np.stack([np.cos(eta) * np.cos(f1), np.cos(eta) * np.sin(f1),
                     np.sin(eta) * np.cos(f2), np.sin(eta) * np.sin(f2)], axis=1)


def _circle_map(p: np.ndarray) -> np.ndarray:
    return np.stack([np.cos(p[:, 0]), np.sin(p[:, 0])], axis=1)


RECIPES = {
    "hopf": Recipe(3, (True, False, False), ((0.0, math.pi / 2), (0.0, TWO_PI), (0.0, TWO_PI))),
    "circle": Recipe(1, (False,), ((0.0, TWO_PI),)),
}
_RECIPE_MAPS = {"hopf": _hopf_map, "circle": _circle_map}


@dataclass(frozen=True)
class SamplePoint:
    index: tuple[int, ...]
    coords: np.ndarray


@dataclass
class SampleGrid(Sequence):
    manifold: Manifold
    resolution: tuple[int, ...]
    points: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]

    def __getitem__(self, i):  # type: ignore[override]
        return SamplePoint(tuple(int(v) for v in self.indices[i]), self.points[i])

    def __iter__(self) -> Iterator[SamplePoint]:
        for i in range(len(self)):
            yield self[i]

    def describe(self) -> dict:
        return {"resolution": list(self.resolution), "count": len(self)}


def _flatten_resolution(m: Manifold, resolution) -> tuple[int, ...]:
    axes = m.axes()
    if isinstance(resolution, (int, np.integer)):
        return tuple(int(resolution) for _ in range(axes))
    res = list(resolution)
    if res and all(isinstance(r, (list, tuple)) for r in res):
        if len(res) != len(m.factors()):
            raise DimensionMismatch("nested resolution must have one entry per factor")
        flat = []
        for part, r in zip(m.factors(), res):
            flat.extend(_flatten_resolution(part, r))
        return tuple(flat)
    if len(res) != axes:
        raise DimensionMismatch(f"resolution needs {axes} entries, got {len(res)}",
                                {"expected": axes, "got": len(res)})
    return tuple(int(r) for r in res)


def _sample_factor(m: Manifold, res: tuple[int, ...], tol: Tolerances):
    if isinstance(m, PeriodicBox):
        axes = [p * np.arange(n) / n for n, p in zip(res, m.periods_)]
        mesh = np.meshgrid(*axes, indexing="ij")
        idx = np.meshgrid(*[np.arange(n) for n in res], indexing="ij")
        return (np.stack([a.ravel() for a in mesh], axis=1),
                np.stack([a.ravel() for a in idx], axis=1))
    if isinstance(m, Box):
        axes = [np.linspace(lo, hi, n) if n > 1 else np.array([(lo + hi) / 2])
                for n, lo, hi in zip(res, m.lower, m.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        idx = np.meshgrid(*[np.arange(n) for n in res], indexing="ij")
        pts = np.stack([a.ravel() for a in mesh], axis=1)
        ids = np.stack([a.ravel() for a in idx], axis=1)
        keep = m.inside(pts)
        return pts[keep], ids[keep]
    if isinstance(m, LevelSet):
        m.axes()
        recipe = RECIPES[m.recipe]
        params = recipe.params(res)
        mesh = np.meshgrid(*params, indexing="ij")
        idx = np.meshgrid(*[np.arange(n) for n in res], indexing="ij")
        p = np.stack([a.ravel() for a in mesh], axis=1)
        pts = _RECIPE_MAPS[m.recipe](p)
        resid = constraint_values(m, pts)
        if resid.size and np.max(np.abs(resid)) > tol.level:
            raise OffManifoldPoint("recipe produced points off the level set",
                                   {"residual": float(np.max(np.abs(resid)))})
        return pts, np.stack([a.ravel() for a in idx], axis=1)
    raise TypeError(f"cannot sample {m!r}")


def sample_grid(m: Manifold, resolution, tol: Tolerances = DEFAULT_TOL) -> SampleGrid:
    """Deterministic lattice of sample points in lexicographic grid order."""
    res = _flatten_resolution(m, resolution)
    parts = []
    start = 0
    for f in m.factors():
        k = f.axes()
        parts.append(_sample_factor(f, res[start:start + k], tol))
        start += k
    pts, ids = parts[0]
    for p2, i2 in parts[1:]:
        n1, n2 = pts.shape[0], p2.shape[0]
        pts = np.concatenate([np.repeat(pts, n2, axis=0), np.tile(p2, (n1, 1))], axis=1)
        ids = np.concatenate([np.repeat(ids, n2, axis=0), np.tile(i2, (n1, 1))], axis=1)
    return SampleGrid(m, res, pts, ids)


def grid_from_points(m: Manifold, pts: np.ndarray) -> SampleGrid:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n = pts.shape[0]
    return SampleGrid(m, (n,), pts, np.arange(n)[:, None])


# constraints, frames, projection
def constraint_jets(m: Manifold, pts: np.ndarray, order: int) -> list[Jet]:
    cons = m.constraints()
    if not cons:
        return []
    env = coordinate_env(m.coords, pts, order)
    return [evaluate(c, env, pts.shape[0], m.ambient_dim, order) for c in cons]


def constraint_values(m: Manifold, pts: np.ndarray) -> np.ndarray:
    js = constraint_jets(m, pts, 0)
    if not js:
        return np.zeros((pts.shape[0], 0))
    return np.stack([j.val for j in js], axis=1)


def _orient(frames: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Flip the last frame vector where (normals, frame) is negatively oriented."""
    full = np.concatenate([normals, frames], axis=2)
    sign = np.sign(np.linalg.det(full))
    frames = frames.copy()
    frames[:, :, -1] *= np.where(sign < 0, -1.0, 1.0)[:, None]
    return frames


def _level_frames(m: LevelSet, pts: np.ndarray, tol: Tolerances, method: str) -> np.ndarray:
    js = constraint_jets(m, pts, 1)
    n, D = pts.shape
    k = len(js)
    vals = np.stack([j.val for j in js], axis=1)
    off = np.max(np.abs(vals), axis=1)
    if np.any(off > tol.level):
        i = int(np.argmax(off > tol.level))
        raise OffManifoldPoint("point does not satisfy the constraints",
                               {"index": i, "point": pts[i], "residual": float(off[i])})
    J = np.stack([j.grad for j in js], axis=1)  # (n, k, D)
    sv = np.linalg.svd(J, compute_uv=False)
    ratio = sv[:, -1] / np.maximum(sv[:, 0], 1e-300)
    bad = (ratio < tol.rank) | (sv[:, 0] == 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise RankDeficient("constraint gradients are not of full rank",
                            {"index": i, "point": pts[i], "ratio": float(ratio[i])})
    JT = np.swapaxes(J, 1, 2)
    if method == "qr":
        Q, _ = np.linalg.qr(JT, mode="complete")
        F = Q[:, :, k:]
    elif method == "projection":
        G = J @ JT
        P = np.eye(D)[None] - JT @ np.linalg.solve(G, J)
        U, _, _ = np.linalg.svd(P)
        F = U[:, :, : D - k]
    else:
        raise ValueError(f"unknown frame method {method!r}")
    return _orient(F, JT)


def frames(m: Manifold, pts: np.ndarray, tol: Tolerances = DEFAULT_TOL, method: str = "qr") -> np.ndarray:
    """Oriented orthonormal tangent frames, shape (N, ambient_dim, dim)."""
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[0]
    if isinstance(m, (PeriodicBox, Box)):
        return np.broadcast_to(np.eye(m.ambient_dim), (n, m.ambient_dim, m.ambient_dim)).copy()
    if isinstance(m, LevelSet):
        return _level_frames(m, pts, tol, method)
    if isinstance(m, Product):
        out = np.zeros((n, m.ambient_dim, m.dim))
        col = 0
        for part, sl in zip(m.parts, m.slices()):
            f = frames(part, pts[:, sl], tol, method)
            out[:, sl, col:col + part.dim] = f
            col += part.dim
        return out
    raise TypeError(f"no frames for {m!r}")


@dataclass(frozen=True)
class TangentFrame:
    vectors: np.ndarray  # (ambient_dim, dim), columns
    orientation: int


def tangent_frame(m: Manifold, point, tol: Tolerances = DEFAULT_TOL, method: str = "qr") -> TangentFrame:
    p = np.asarray(point, dtype=float)[None, :]
    if p.shape[1] != m.ambient_dim:
        raise DimensionMismatch("point has the wrong ambient dimension")
    f = frames(m, p, tol, method)[0]
    return TangentFrame(f, +1)


def project(m: Manifold, pts: np.ndarray, iters: int = 20) -> np.ndarray:
    """Newton projection onto the constraint set (identity on boxes)."""
    if not m.constraints():
        return pts
    if isinstance(m, Product):
        out = pts.copy()
        for part, sl in zip(m.parts, m.slices()):
            out[:, sl] = project(part, pts[:, sl], iters)
        return out
    x = pts.copy()
    for _ in range(iters):
        js = constraint_jets(m, x, 1)
        c = np.stack([j.val for j in js], axis=1)
        if np.max(np.abs(c)) < 1e-15:
            break
        J = np.stack([j.grad for j in js], axis=1)
        G = J @ np.swapaxes(J, 1, 2)
        step = np.swapaxes(J, 1, 2) @ np.linalg.solve(G, c[:, :, None])
        x = x - step[:, :, 0]
    return x


def wrap_delta(m: Manifold, delta: np.ndarray) -> np.ndarray:
    """Reduce coordinate differences modulo the periods into [-p/2, p/2)."""
    out = np.array(delta, dtype=float, copy=True)
    for name, p in m.periods().items():
        i = m.index(name)
        out[..., i] = (out[..., i] + p / 2) % p - p / 2
    return out
