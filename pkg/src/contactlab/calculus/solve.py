"""Contact vector fields from a single bordered linear system.

For a contact form a on a manifold cut out by constraints c_k = 0 we solve,
pointwise and in ambient coordinates restricted to a block of unknowns,

    (i_X da)_j - sum_k lam_k dc_k_j - mu a_j = -g_j      (j in block)
    dc_k(X) = 0
    a(X) = h

With g = dH and h = H this gives the contact Hamiltonian field of H (the
Reeb field for H = 1).  With g = i_S da and h = -a(S) for a coordinate field
S it gives the correction V making S + V a horizontal lift.  Jets of the
solution come from differentiating K x = b.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..charts import Manifold, coordinate_env
from ..config import DEFAULT_TOL, Tolerances
from ..errors import DimensionMismatch, NotContact
from ..expr import Jet, evaluate
from ..expr.jet import check_order
from .algebra import FormJet
from .nodes import Field, Form


def _stack(entries: list[list[Jet | None]], n: int, D: int, order: int):
    rows, cols = len(entries), len(entries[0])
    val = np.zeros((n, rows, cols))
    grad = np.zeros((n, rows, cols, D)) if order >= 1 else None
    hess = np.zeros((n, rows, cols, D, D)) if order >= 2 else None
    for r in range(rows):
        for c in range(cols):
            j = entries[r][c]
            if j is None:
                continue
            val[:, r, c] = j.val
            if order >= 1:
                grad[:, r, c] = j.grad
            if order >= 2:
                hess[:, r, c] = j.hess
    return val, grad, hess


def solve_jets(K, b, order: int):
    """Jets of x with K x = b; K given as (val, grad, hess) with shapes (n,S,S[,D[,D]])."""
    Kv, Kg, Kh = K
    bv, bg, bh = b
    xv = np.linalg.solve(Kv, bv[:, :, None])[:, :, 0]
    xg = xh = None
    if order >= 1:
        rg = bg - np.einsum("nijd,nj->nid", Kg, xv)
        xg = np.linalg.solve(Kv, rg)
    if order >= 2:
        n, S, D = xg.shape
        rh = (bh - np.einsum("nijde,nj->nide", Kh, xv)
              - np.einsum("nijd,nje->nide", Kg, xg)
              - np.einsum("nije,njd->nide", Kg, xg))
        xh = np.linalg.solve(Kv, rh.reshape(n, S, D * D)).reshape(n, S, D, D)
    return xv, xg, xh


class ContactSolve(Field):
    """Solution field of the bordered system; see the module docstring."""

    def __init__(self, alpha: Form, manifold: Manifold, hamiltonian: Form | None = None,
                 source: str | None = None, block: Manifold | None = None,
                 tol: Tolerances = DEFAULT_TOL):
        if alpha.degree != 1:
            raise DimensionMismatch("contact form must be a 1-form")
        if tuple(alpha.coords) != tuple(manifold.coords):
            raise DimensionMismatch("form and manifold use different coordinates",
                                    {"form": list(alpha.coords), "manifold": list(manifold.coords)})
        if (hamiltonian is None) == (source is None):
            raise ValueError("give exactly one of a Hamiltonian or a source coordinate")
        if hamiltonian is not None and hamiltonian.degree != 0:
            raise DimensionMismatch("Hamiltonian must be a function")
        self.coords = tuple(manifold.coords)
        self.alpha = alpha
        self.manifold = manifold
        self.H = hamiltonian
        self.source = None if source is None else self.coords.index(source)
        blk = manifold if block is None else block
        self.block = [self.coords.index(c) for c in blk.coords]
        self.constraints = blk.constraints()
        self.tol = tol

    def _compute(self, pts, order):
        check_order(order + 1)
        n, D = pts.shape
        A: FormJet = self.alpha.jet(pts, order + 1)
        a = [A.get((i,)) for i in range(D)]
        blk = self.block
        nb = len(blk)
        env = coordinate_env(self.coords, pts, order + 1)
        cons = [evaluate(c, env, n, D, order + 1) for c in self.constraints]
        m = len(cons)
        S = nb + m + 1

        def da(i: int, j: int) -> Jet:
            return a[j].deriv(i) - a[i].deriv(j)

        K: list[list[Jet | None]] = [[None] * S for _ in range(S)]
        for r, j in enumerate(blk):
            for c, i in enumerate(blk):
                if i != j:
                    K[r][c] = da(i, j)
            for k, ck in enumerate(cons):
                K[r][nb + k] = -ck.deriv(j)
            K[r][nb + m] = -a[j].truncate(order)
        for k, ck in enumerate(cons):
            for c, i in enumerate(blk):
                K[nb + k][c] = ck.deriv(i)
        for c, i in enumerate(blk):
            K[nb + m][c] = a[i].truncate(order)

        rhs: list[list[Jet | None]] = [[None] for _ in range(S)]
        if self.H is not None:
            Hj = self.H.jet(pts, order + 1).scalar()
            for r, j in enumerate(blk):
                rhs[r][0] = -Hj.deriv(j)
            rhs[nb + m][0] = Hj.truncate(order)
        else:
            s = self.source
            for r, j in enumerate(blk):
                if j != s:
                    rhs[r][0] = -da(s, j)
            rhs[nb + m][0] = -a[s].truncate(order)

        Kv, Kg, Kh = _stack(K, n, D, order)
        bv, bg, bh = _stack(rhs, n, D, order)
        self._check(Kv, pts)
        xv, xg, xh = solve_jets((Kv, Kg, Kh),
                                (bv[:, :, 0], None if bg is None else bg[:, :, 0],
                                 None if bh is None else bh[:, :, 0]), order)
        out = [Jet.zeros(n, D, order) for _ in range(D)]
        for c, i in enumerate(blk):
            out[i] = Jet(xv[:, c].copy(),
                         None if xg is None else xg[:, c].copy(),
                         None if xh is None else xh[:, c].copy())
        return out

    def _check(self, Kv: np.ndarray, pts: np.ndarray) -> None:
        if Kv.shape[0] == 0:
            return
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(Kv)
        bad = ~np.isfinite(cond) | (cond > self.tol.solve_cond)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise NotContact("contact system is singular (the form is not contact here)",
                             {"index": i, "point": pts[i], "condition": float(cond[i])})


def contact_hamiltonian_field(alpha: Form, H: Form, manifold: Manifold, block: Manifold | None = None,
                              tol: Tolerances = DEFAULT_TOL) -> ContactSolve:
    """Field X with alpha(X) = H and i_X d alpha = dH(R) alpha - dH on the manifold."""
    return ContactSolve(alpha, manifold, hamiltonian=H, block=block, tol=tol)


def reeb_vector_field(alpha: Form, manifold: Manifold, block: Manifold | None = None,
                      tol: Tolerances = DEFAULT_TOL) -> ContactSolve:
    from .nodes import ExprForm

    one = ExprForm(alpha.coords, 0, {(): "1"})
    return ContactSolve(alpha, manifold, hamiltonian=one, block=block, tol=tol)


def horizontal_correction(alpha: Form, manifold: Manifold, source: str, block: Manifold,
                          tol: Tolerances = DEFAULT_TOL) -> ContactSolve:
    """V tangent to the block with d/d(source) + V in the symplectic complement of the fiber."""
    return ContactSolve(alpha, manifold, source=source, block=block, tol=tol)


def block_of(manifold: Manifold, names: Sequence[str]) -> list[int]:
    return [manifold.coords.index(c) for c in names]
