"""Lazy differential-geometric objects.

Every node lives on a tuple of ambient coordinate names and is evaluated on
a batch of ambient points through ``jet(points, order)``.  Form nodes
return :class:`FormJet`; vector-field nodes return a list of component
jets.  Operations build new nodes and request one extra derivative order
from their children where needed (``d`` and Lie brackets).
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .. import parallel
from ..charts import coordinate_env
from ..errors import DegreeOverflow, DegreeUnderflow, DepthExceeded, DimensionMismatch
from ..expr import Expr, Jet, as_expr, evaluate
from ..expr.jet import check_order
from . import algebra as alg
from .algebra import FormJet


class Node:
    coords: tuple[str, ...]

    @property
    def dim(self) -> int:
        return len(self.coords)

    def jet(self, pts: np.ndarray, order: int):
        if order < 0:
            raise DepthExceeded("negative derivative order requested")
        store = parallel.cache()
        if store is None:
            return self._compute(pts, order)
        for o in range(order, 3):
            hit = store.get((id(self), id(pts), o))
            if hit is not None and hit[0] is self and hit[1] is pts:
                res = hit[2]
                return res if o == order else _truncate(res, order)
        res = self._compute(pts, order)
        store[(id(self), id(pts), order)] = (self, pts, res)
        return res

    def _compute(self, pts: np.ndarray, order: int):
        raise NotImplementedError


def _truncate(res, order):
    if isinstance(res, FormJet):
        return res.truncate(order)
    return [c.truncate(order) for c in res]


def _check_coords(*nodes: Node) -> tuple[str, ...]:
    c = nodes[0].coords
    for n in nodes[1:]:
        if n.coords != c:
            raise DimensionMismatch("operands live on different coordinate spaces",
                                    {"left": list(c), "right": list(n.coords)})
    return c


# forms
class Form(Node):
    degree: int

    def values(self, pts: np.ndarray) -> FormJet:
        return self.jet(pts, 0)

    def __add__(self, other: "Form") -> "Form":
        return LinComb(((1.0, self), (1.0, other)))

    def __sub__(self, other: "Form") -> "Form":
        return LinComb(((1.0, self), (-1.0, other)))

    def __neg__(self) -> "Form":
        return LinComb(((-1.0, self),))

    def __mul__(self, c) -> "Form":
        if isinstance(c, Form):
            return ScalarMul(c, self) if c.degree == 0 else Wedge(self, c)
        return LinComb(((float(c), self),))

    __rmul__ = __mul__


def _parse_key(key, coords: tuple[str, ...]) -> tuple[tuple[int, ...], int]:
    if isinstance(key, str):
        names = [k.strip() for k in key.replace("^", ",").split(",") if k.strip()]
    else:
        names = list(key)
    try:
        idx = [coords.index(nm) if isinstance(nm, str) else int(nm) for nm in names]
    except ValueError as exc:
        raise DimensionMismatch(f"unknown coordinate in form key {key!r}") from exc
    if len(set(idx)) != len(idx):
        return tuple(sorted(idx)), 0
    return tuple(sorted(idx)), alg.perm_sign(tuple(idx))


class ExprForm(Form):
    """Form with expression coefficients in the ambient coordinates."""

    def __init__(self, coords: Sequence[str], degree: int, coeffs: Mapping, params: Mapping | None = None):
        self.coords = tuple(coords)
        self.degree = int(degree)
        if self.degree > len(self.coords):
            raise DegreeOverflow("form degree exceeds the dimension")
        self.params = dict(params or {})
        allowed = set(self.coords) | set(self.params)
        self.coeffs: dict[tuple[int, ...], Expr] = {}
        self.signs: dict[tuple[int, ...], list[tuple[int, Expr]]] = {}
        for key, src in coeffs.items():
            if self.degree == 0:
                idx, sign = (), 1
            else:
                idx, sign = _parse_key(key, self.coords)
                if len(idx) != self.degree:
                    raise DimensionMismatch(f"key {key!r} does not match degree {self.degree}")
            e = as_expr(src, allowed)
            if sign == 0:
                continue
            self.signs.setdefault(idx, []).append((sign, e))

    def _compute(self, pts, order):
        check_order(order)
        n = pts.shape[0]
        env: dict = coordinate_env(self.coords, pts, order)
        env.update(self.params)
        out = FormJet(self.degree, n, self.dim, order, {})
        for idx, terms in self.signs.items():
            for sign, e in terms:
                j = evaluate(e, env, n, self.dim, order)
                out.add_to(idx, j if sign > 0 else -j)
        return out


def form(coords: Sequence[str], coeffs: Mapping, degree: int | None = None, params: Mapping | None = None) -> ExprForm:
    """Convenience constructor; the degree is inferred from the first key when omitted."""
    coords = tuple(coords)
    if degree is None:
        if not coeffs:
            raise ValueError("cannot infer the degree of an empty form")
        k0 = next(iter(coeffs))
        degree = 0 if k0 in ((), "") else len(_parse_key(k0, coords)[0])
    return ExprForm(coords, degree, coeffs, params)


def zero_form(coords: Sequence[str], degree: int) -> ExprForm:
    return ExprForm(coords, degree, {})


class ScalarExpr(Form):
    """A function given by an expression whose names bind coordinates, parameters or other functions."""

    degree = 0

    def __init__(self, coords: Sequence[str], expr, bindings: Mapping[str, Form] | None = None,
                 params: Mapping | None = None):
        self.coords = tuple(coords)
        self.bindings = dict(bindings or {})
        for name, node in self.bindings.items():
            if node.degree != 0:
                raise DimensionMismatch(f"binding {name!r} is not a function")
            _check_coords(self, node)
        self.params = dict(params or {})
        self.expr = as_expr(expr, set(self.coords) | set(self.bindings) | set(self.params))

    def _compute(self, pts, order):
        check_order(order)
        n = pts.shape[0]
        env: dict = coordinate_env(self.coords, pts, order)
        env.update(self.params)
        for name, node in self.bindings.items():
            env[name] = node.jet(pts, order).scalar()
        return alg.scalar_form(evaluate(self.expr, env, n, self.dim, order), self.dim)


def scalar(coords: Sequence[str], expr, params: Mapping | None = None, **bindings: Form) -> ScalarExpr:
    return ScalarExpr(coords, expr, bindings, params)


class LinComb(Form):
    def __init__(self, terms: Sequence[tuple[float, Form]]):
        flat: list[tuple[float, Form]] = []
        for c, f in terms:
            if isinstance(f, LinComb):
                flat.extend((c * c2, f2) for c2, f2 in f.terms)
            else:
                flat.append((c, f))
        self.terms = tuple(flat)
        self.coords = _check_coords(*[f for _, f in flat])
        degs = {f.degree for _, f in flat}
        if len(degs) != 1:
            raise DimensionMismatch("cannot add forms of different degrees")
        self.degree = degs.pop()

    def _compute(self, pts, order):
        out = None
        for c, f in self.terms:
            j = f.jet(pts, order)
            if c != 1.0:
                j = alg.scale(j, c)
            out = j if out is None else alg.add(out, j)
        return out


class ScalarMul(Form):
    def __init__(self, f: Form, a: Form):
        if f.degree != 0:
            raise DimensionMismatch("scalar factor must be a function")
        self.coords = _check_coords(f, a)
        self.f, self.a = f, a
        self.degree = a.degree

    def _compute(self, pts, order):
        return alg.scale(self.a.jet(pts, order), self.f.jet(pts, order).scalar())


class Wedge(Form):
    def __init__(self, a: Form, b: Form):
        self.coords = _check_coords(a, b)
        self.degree = a.degree + b.degree
        if self.degree > len(self.coords):
            raise DegreeOverflow(f"wedge degree {self.degree} exceeds dimension {len(self.coords)}",
                                 {"degree": self.degree, "dim": len(self.coords)})
        self.a, self.b = a, b

    def _compute(self, pts, order):
        return alg.wedge(self.a.jet(pts, order), self.b.jet(pts, order))


class D(Form):
    def __init__(self, a: Form):
        if a.degree + 1 > len(a.coords):
            raise DegreeOverflow("d of a top-degree form", {"degree": a.degree + 1, "dim": len(a.coords)})
        self.coords = a.coords
        self.degree = a.degree + 1
        self.a = a

    def _compute(self, pts, order):
        check_order(order + 1)
        return alg.exterior_d(self.a.jet(pts, order + 1))


class Interior(Form):
    def __init__(self, X: "Field", a: Form):
        if a.degree == 0:
            raise DegreeUnderflow("interior product with a function")
        self.coords = _check_coords(X, a)
        self.degree = a.degree - 1
        self.X, self.a = X, a

    def _compute(self, pts, order):
        return alg.interior(self.X.jet(pts, order), self.a.jet(pts, order))


class ExprMap(Node):
    """Smooth map between coordinate spaces given by target-coordinate expressions."""

    def __init__(self, source: Sequence[str], target: Sequence[str], comps: Sequence, params: Mapping | None = None):
        self.coords = tuple(source)
        self.target = tuple(target)
        if len(comps) != len(self.target):
            raise DimensionMismatch("map needs one component per target coordinate",
                                    {"components": len(comps), "target": len(self.target)})
        self.params = dict(params or {})
        self.comps = tuple(as_expr(c, set(self.coords) | set(self.params)) for c in comps)

    def _compute(self, pts, order):
        check_order(order)
        n = pts.shape[0]
        env: dict = coordinate_env(self.coords, pts, order)
        env.update(self.params)
        return [evaluate(c, env, n, self.dim, order) for c in self.comps]

    def values(self, pts: np.ndarray) -> np.ndarray:
        return np.stack([j.val for j in self.jet(pts, 0)], axis=1)


class Pullback(Form):
    def __init__(self, F: ExprMap, a: Form):
        if F.target != a.coords:
            raise DimensionMismatch("map target does not match the form's coordinates",
                                    {"target": list(F.target), "form": list(a.coords)})
        self.coords = F.coords
        self.degree = a.degree
        self.F, self.a = F, a

    def _compute(self, pts, order):
        need = order + 1 if self.degree > 0 else order
        check_order(need)
        Fj = self.F.jet(pts, need)
        y = np.stack([f.val for f in Fj], axis=1)
        aj = self.a.jet(y, order)
        return alg.pullback_jets(aj, Fj, self.dim, order)


class LiftForm(Form):
    """A form on a coordinate subset regarded as a form on a bigger space."""

    def __init__(self, a: Form, coords: Sequence[str]):
        self.coords = tuple(coords)
        try:
            self.idx = [self.coords.index(c) for c in a.coords]
        except ValueError as exc:
            raise DimensionMismatch("lift target must contain every coordinate") from exc
        self.a = a
        self.degree = a.degree

    def _compute(self, pts, order):
        sub = np.ascontiguousarray(pts[:, self.idx])
        return alg.embed(self.a.jet(sub, order), self.idx, self.dim)


# vector fields
class Field(Node):
    def values(self, pts: np.ndarray) -> np.ndarray:
        return np.stack([c.val for c in self.jet(pts, 0)], axis=1)

    def __add__(self, other: "Field") -> "Field":
        return FieldComb(((1.0, None, self), (1.0, None, other)))

    def __sub__(self, other: "Field") -> "Field":
        return FieldComb(((1.0, None, self), (-1.0, None, other)))

    def __neg__(self) -> "Field":
        return FieldComb(((-1.0, None, self),))

    def __mul__(self, c) -> "Field":
        if isinstance(c, Form):
            return FieldComb(((1.0, c, self),))
        return FieldComb(((float(c), None, self),))

    __rmul__ = __mul__


class ExprField(Field):
    def __init__(self, coords: Sequence[str], comps: Mapping[str, object], params: Mapping | None = None):
        self.coords = tuple(coords)
        self.params = dict(params or {})
        allowed = set(self.coords) | set(self.params)
        unknown = set(comps) - set(self.coords)
        if unknown:
            raise DimensionMismatch(f"components for unknown coordinates {sorted(unknown)}")
        self.comps = {self.coords.index(k): as_expr(v, allowed) for k, v in comps.items()}

    def _compute(self, pts, order):
        check_order(order)
        n = pts.shape[0]
        env: dict = coordinate_env(self.coords, pts, order)
        env.update(self.params)
        out = []
        for i in range(self.dim):
            e = self.comps.get(i)
            out.append(Jet.zeros(n, self.dim, order) if e is None else evaluate(e, env, n, self.dim, order))
        return out


def vector_field(coords: Sequence[str], comps: Mapping[str, object], params: Mapping | None = None) -> ExprField:
    return ExprField(coords, comps, params)


class FieldComb(Field):
    """Sum of fields with constant and optional function coefficients."""

    def __init__(self, terms: Sequence[tuple[float, Form | None, Field]]):
        flat = []
        for c, f, X in terms:
            if isinstance(X, FieldComb) and f is None:
                flat.extend((c * c2, f2, X2) for c2, f2, X2 in X.terms)
            else:
                flat.append((c, f, X))
        self.terms = tuple(flat)
        self.coords = _check_coords(*[X for _, _, X in flat],
                                    *[f for _, f, _ in flat if f is not None])

    def _compute(self, pts, order):
        out = None
        for c, f, X in self.terms:
            comps = X.jet(pts, order)
            if f is not None:
                fj = f.jet(pts, order).scalar()
                comps = [fj * x for x in comps]
            if c != 1.0:
                comps = [x * c for x in comps]
            out = comps if out is None else [a + b for a, b in zip(out, comps)]
        return out


class Bracket(Field):
    def __init__(self, X: Field, Y: Field):
        self.coords = _check_coords(X, Y)
        self.X, self.Y = X, Y

    def _compute(self, pts, order):
        check_order(order + 1)
        X = self.X.jet(pts, order + 1)
        Y = self.Y.jet(pts, order + 1)
        D = self.dim
        out = []
        Xt = [x.truncate(order) for x in X]
        Yt = [y.truncate(order) for y in Y]
        for i in range(D):
            acc = None
            for j in range(D):
                term = Xt[j] * Y[i].deriv(j) - Yt[j] * X[i].deriv(j)
                acc = term if acc is None else acc + term
            out.append(acc)
        return out


class LiftField(Field):
    def __init__(self, X: Field, coords: Sequence[str]):
        self.coords = tuple(coords)
        try:
            self.idx = [self.coords.index(c) for c in X.coords]
        except ValueError as exc:
            raise DimensionMismatch("lift target must contain every coordinate") from exc
        self.X = X

    def _compute(self, pts, order):
        sub = np.ascontiguousarray(pts[:, self.idx])
        comps = self.X.jet(sub, order)
        n = pts.shape[0]
        out = [Jet.zeros(n, self.dim, order) for _ in range(self.dim)]
        for k, i in enumerate(self.idx):
            out[i] = alg.embed_jet(comps[k], self.idx, self.dim)
        return out


class FieldFromJets(Field):
    """Field defined by a callable returning component jets (used by derived constructions)."""

    def __init__(self, coords: Sequence[str], fn):
        self.coords = tuple(coords)
        self.fn = fn

    def _compute(self, pts, order):
        return self.fn(pts, order)


# operations
def wedge(a: Form, b: Form) -> Form:
    return Wedge(a, b)


def wedge_power(a: Form, k: int, coords: Sequence[str] | None = None) -> Form:
    if k < 0:
        raise ValueError("negative exterior power")
    if k == 0:
        return ExprForm(coords or a.coords, 0, {(): "1"})
    out = a
    for _ in range(k - 1):
        out = Wedge(out, a)
    return out


def d(a: Form) -> Form:
    return D(a)


def interior(X: Field, a: Form) -> Form:
    return Interior(X, a)


def pair(a: Form, X: Field) -> Form:
    if a.degree != 1:
        raise DimensionMismatch("pairing needs a 1-form")
    return Interior(X, a)


def pullback(F: ExprMap, a: Form) -> Form:
    return Pullback(F, a)


def lie_bracket(X: Field, Y: Field) -> Field:
    return Bracket(X, Y)


def lie_derivative(X: Field, a: Form) -> Form:
    """Cartan formula: i_X da + d(i_X a)."""
    if a.degree == 0:
        return Interior(X, D(a))
    if a.degree == a.dim:
        return D(Interior(X, a))
    return Interior(X, D(a)) + D(Interior(X, a))


def lift(obj, coords: Sequence[str]):
    if isinstance(obj, Form):
        if tuple(obj.coords) == tuple(coords):
            return obj
        return LiftForm(obj, coords)
    if isinstance(obj, Field):
        if tuple(obj.coords) == tuple(coords):
            return obj
        return LiftField(obj, coords)
    raise TypeError("can only lift forms and fields")


def coordinate_1form(coords: Sequence[str], name: str) -> ExprForm:
    return ExprForm(coords, 1, {name: "1"})


def on_frames(a: Form, pts: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Evaluate a top form on frames F of shape (n, ambient_dim, degree)."""
    return alg.on_vectors(a.jet(pts, 0), F)
