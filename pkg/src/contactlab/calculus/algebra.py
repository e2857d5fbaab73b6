"""Exterior algebra on batched jets.

A :class:`FormJet` stores the coefficients of a k-form in the ambient
coordinate basis, keyed by strictly increasing index tuples; missing keys
are zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np

from ..errors import DegreeOverflow, DegreeUnderflow, DimensionMismatch
from ..expr.jet import Jet


def merge_sign(a: tuple[int, ...], b: tuple[int, ...]) -> int:
    """Sign of the permutation sorting the concatenation ``a + b``; 0 when they overlap."""
    if set(a) & set(b):
        return 0
    inv = sum(1 for i in a for j in b if i > j)
    return -1 if inv % 2 else 1


def perm_sign(seq: tuple[int, ...]) -> int:
    inv = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return -1 if inv % 2 else 1


@dataclass
class FormJet:
    degree: int
    n: int
    dim: int
    order: int
    comps: dict[tuple[int, ...], Jet] = field(default_factory=dict)

    def zero_jet(self) -> Jet:
        return Jet.zeros(self.n, self.dim, self.order)

    def get(self, key: tuple[int, ...]) -> Jet:
        j = self.comps.get(key)
        return self.zero_jet() if j is None else j

    def add_to(self, key: tuple[int, ...], j: Jet) -> None:
        cur = self.comps.get(key)
        self.comps[key] = j if cur is None else cur + j

    def truncate(self, order: int) -> "FormJet":
        if order >= self.order:
            return self
        return FormJet(self.degree, self.n, self.dim, order,
                       {k: v.truncate(order) for k, v in self.comps.items()})

    def take(self, idx) -> "FormJet":
        sub = {k: v.take(idx) for k, v in self.comps.items()}
        n = len(np.arange(self.n)[idx])
        return FormJet(self.degree, n, self.dim, self.order, sub)

    def scalar(self) -> Jet:
        if self.degree != 0:
            raise DimensionMismatch("not a function")
        return self.get(())

    def dense(self) -> np.ndarray:
        """Values as an (n, C(dim, degree)) array in lexicographic key order."""
        keys = list(combinations(range(self.dim), self.degree))
        out = np.zeros((self.n, len(keys)))
        for c, k in enumerate(keys):
            j = self.comps.get(k)
            if j is not None:
                out[:, c] = j.val
        return out


def scalar_form(j: Jet, dim: int) -> FormJet:
    return FormJet(0, j.n, dim, j.order, {(): j})


def add(a: FormJet, b: FormJet, cb: float = 1.0) -> FormJet:
    if a.degree != b.degree:
        raise DimensionMismatch("cannot add forms of different degrees")
    o = min(a.order, b.order)
    out = FormJet(a.degree, a.n, a.dim, o, {k: v.truncate(o) for k, v in a.comps.items()})
    for k, v in b.comps.items():
        out.add_to(k, v.truncate(o) * cb if cb != 1.0 else v.truncate(o))
    return out


def scale(a: FormJet, f) -> FormJet:
    """Multiply by a scalar jet or a number."""
    o = a.order if not isinstance(f, Jet) else min(a.order, f.order)
    return FormJet(a.degree, a.n, a.dim, o, {k: v.truncate(o) * f for k, v in a.comps.items()})


def wedge(a: FormJet, b: FormJet) -> FormJet:
    deg = a.degree + b.degree
    if deg > a.dim:
        raise DegreeOverflow(f"wedge of degrees {a.degree} and {b.degree} exceeds dimension {a.dim}",
                             {"degree": deg, "dim": a.dim})
    o = min(a.order, b.order)
    out = FormJet(deg, a.n, a.dim, o, {})
    for I, ja in a.comps.items():
        for J, jb in b.comps.items():
            s = merge_sign(I, J)
            if s == 0:
                continue
            K = tuple(sorted(I + J))
            prod = ja.truncate(o) * jb.truncate(o)
            out.add_to(K, prod if s > 0 else -prod)
    return out


def exterior_d(a: FormJet) -> FormJet:
    if a.degree + 1 > a.dim:
        raise DegreeOverflow("d of a top-degree form", {"degree": a.degree + 1, "dim": a.dim})
    out = FormJet(a.degree + 1, a.n, a.dim, a.order - 1, {})
    for I, c in a.comps.items():
        for j in range(a.dim):
            if j in I:
                continue
            pos = sum(1 for i in I if i < j)
            K = tuple(sorted(I + (j,)))
            dj = c.deriv(j)
            out.add_to(K, dj if pos % 2 == 0 else -dj)
    return out


def interior(X: list[Jet], a: FormJet) -> FormJet:
    if a.degree == 0:
        raise DegreeUnderflow("interior product of a function")
    if len(X) != a.dim:
        raise DimensionMismatch("vector field and form live in different dimensions")
    o = min(a.order, min(x.order for x in X))
    out = FormJet(a.degree - 1, a.n, a.dim, o, {})
    for I, c in a.comps.items():
        for pos, i in enumerate(I):
            rest = I[:pos] + I[pos + 1:]
            term = X[i].truncate(o) * c.truncate(o)
            out.add_to(rest, term if pos % 2 == 0 else -term)
    return out


def jet_det(M: list[list[Jet]]) -> Jet:
    k = len(M)
    total = None
    for p in permutations(range(k)):
        term = M[0][p[0]]
        for r in range(1, k):
            term = term * M[r][p[r]]
        if perm_sign(p) < 0:
            term = -term
        total = term if total is None else total + term
    return total


def on_vectors(a: FormJet, V: np.ndarray) -> np.ndarray:
    """Values of the form on vectors V of shape (n, dim, degree)."""
    k = a.degree
    if V.shape[2] != k:
        raise DimensionMismatch("number of vectors must equal the form degree")
    out = np.zeros(a.n)
    if k == 0:
        return a.get(()).val.copy()
    for I, c in a.comps.items():
        sub = V[:, list(I), :]
        out = out + c.val * np.linalg.det(sub)
    return out


def compose(aj: Jet, F: list[Jet], order: int) -> Jet:
    """Chain rule: ``aj`` is a jet in target coordinates, F the target coordinates as source jets."""
    val = aj.val
    if order == 0:
        return Jet(val.copy())
    Jac = np.stack([f.grad for f in F], axis=1)  # (n, Dt, Ds)
    grad = np.einsum("ni,nij->nj", aj.grad, Jac)
    hess = None
    if order >= 2:
        H = np.stack([f.hess for f in F], axis=1)  # (n, Dt, Ds, Ds)
        hess = np.einsum("nia,nij,njb->nab", Jac, aj.hess, Jac) + np.einsum("ni,niab->nab", aj.grad, H)
    return Jet(val.copy(), grad, hess)


def pullback_jets(a: FormJet, F: list[Jet], src_dim: int, order: int) -> FormJet:
    """Pull back a form jet (already evaluated at the image points) along a map with jets F."""
    k = a.degree
    n = a.n
    out = FormJet(k, n, src_dim, order, {})
    comp = {I: compose(c, F, order) for I, c in a.comps.items()}
    if k == 0:
        out.comps = comp
        return out
    if order + 1 > min(f.order for f in F):
        raise ValueError("map jets must exceed the requested order by one")
    dF = [[f.deriv(j).truncate(order) for j in range(src_dim)] for f in F]
    for I, c in comp.items():
        for J in combinations(range(src_dim), k):
            minor = jet_det([[dF[i][j] for j in J] for i in I])
            out.add_to(J, c * minor)
    return out


def embed(a: FormJet, idx: list[int], big_dim: int) -> FormJet:
    """Re-express a form jet computed in a coordinate subset inside a bigger space."""
    out = FormJet(a.degree, a.n, big_dim, a.order, {})
    for I, c in a.comps.items():
        K = tuple(idx[i] for i in I)
        s = perm_sign(K)
        out.add_to(tuple(sorted(K)), embed_jet(c, idx, big_dim) if s > 0 else -embed_jet(c, idx, big_dim))
    return out


def embed_jet(j: Jet, idx: list[int], big_dim: int) -> Jet:
    grad = hess = None
    if j.order >= 1:
        grad = np.zeros((j.n, big_dim))
        grad[:, idx] = j.grad
    if j.order >= 2:
        hess = np.zeros((j.n, big_dim, big_dim))
        hess[np.ix_(np.arange(j.n), idx, idx)] = j.hess
    return Jet(j.val, grad, hess)
