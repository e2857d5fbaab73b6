"""Independent reference computations used by the tests."""

from __future__ import annotations

import numpy as np

from contactlab.calculus import ExprField, ExprForm

T3 = ("x", "y", "theta")
WAVES = ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (0, 1, -1), (1, 0, 2))


def random_trig(rng: np.random.Generator, coords=T3, terms: int = 3) -> str:
    """A random trigonometric polynomial on the torus, as an expression string."""
    parts = [f"{rng.normal():.6f}"]
    for _ in range(terms):
        w = WAVES[rng.integers(len(WAVES))]
        arg = " + ".join(f"{k}*{c}" for k, c in zip(w, coords) if k)
        fn = "sin" if rng.random() < 0.5 else "cos"
        parts.append(f"{rng.normal():.6f}*{fn}({arg})")
    return " + ".join(parts)


def random_one_form(rng, coords=T3) -> ExprForm:
    return ExprForm(coords, 1, {c: random_trig(rng, coords) for c in coords})


def random_field(rng, coords=T3) -> ExprField:
    return ExprField(coords, {c: random_trig(rng, coords, 2) for c in coords})


def flow_with_jacobian(X: ExprField, p: np.ndarray, t, steps: int = 1):
    """RK4 flow of X with its variational equation: returns (phi_t(p), D phi_t(p)).

    ``t`` may be a scalar or one time per point.
    """
    n, D = p.shape

    def rhs(y, J):
        comps = X.jet(y, 1)
        f = np.stack([c.val for c in comps], axis=1)
        A = np.stack([c.grad for c in comps], axis=1)
        return f, A @ J

    y, J = p.copy(), np.broadcast_to(np.eye(D), (n, D, D)).copy()
    h = np.broadcast_to(np.asarray(t, dtype=float) / steps, (n,))
    hy, hJ = h[:, None], h[:, None, None]
    for _ in range(steps):
        k1 = rhs(y, J)
        k2 = rhs(y + 0.5 * hy * k1[0], J + 0.5 * hJ * k1[1])
        k3 = rhs(y + 0.5 * hy * k2[0], J + 0.5 * hJ * k2[1])
        k4 = rhs(y + hy * k3[0], J + hJ * k3[1])
        y = y + hy / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        J = J + hJ / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return y, J


def one_form_dense(alpha: ExprForm, pts: np.ndarray) -> np.ndarray:
    return alpha.jet(pts, 0).dense()


def flow_lie_derivative(alpha: ExprForm, X: ExprField, p: np.ndarray, t: float = 1e-5) -> np.ndarray:
    """(phi_t^* alpha - phi_-t^* alpha) / 2t on coordinate vectors, for a 1-form."""
    n = p.shape[0]
    times = np.concatenate([np.full(n, t), np.full(n, -t)])
    y, J = flow_with_jacobian(X, np.concatenate([p, p]), times)
    pulled = np.einsum("ni,nij->nj", one_form_dense(alpha, y), J)
    return (pulled[:n] - pulled[n:]) / (2 * t)


def fd_gradient(f, p: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of a batched scalar function."""
    n, D = p.shape
    g = np.empty((n, D))
    for i in range(D):
        e = np.zeros(D)
        e[i] = h
        g[:, i] = (f(p + e) - f(p - e)) / (2 * h)
    return g


def dense_ray_positive(coeffs, cap: float = 1e6, samples: int = 40001) -> bool:
    """Brute-force oracle: positive at tau = 0, at dense tau samples, and at infinity."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if c.size == 0 or c[0] <= 0:
        return False
    if c[-1] < 0:
        return False
    taus = np.concatenate([np.linspace(0, 10, samples), np.geomspace(10, cap, 4001)])
    return bool(np.all(np.polyval(c[::-1], taus) > 0))


def random_poly(rng: np.random.Generator) -> np.ndarray:
    """Ascending coefficients from a mix of generic, sign-patterned and near-double-root families."""
    kind = int(rng.integers(4))
    deg = int(rng.integers(1, 7))
    if kind == 0:
        return rng.normal(size=deg + 1)
    if kind == 1:
        return np.abs(rng.normal(size=deg + 1)) * np.where(rng.random(deg + 1) < 0.3, -1, 1)
    p = np.array([1.0])
    for r in rng.uniform(0.1, 5, size=rng.integers(1, 3)):
        p = np.convolve(p, [r * r, -2 * r, 1.0])
    shift = rng.uniform(0.05, 1.0) * (1 if kind == 2 else -1)
    p[0] += 0.1 * shift * np.max(np.abs(p))
    return p
