"""Elementary and cutoff functions acting on jets."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, NonSmoothPoint
from .jet import Jet, chain2, is_constant


def _fail(cls, message: str, mask: np.ndarray, values: np.ndarray):
    i = int(np.flatnonzero(mask)[0])
    raise cls(message, {"index": i, "value": float(values[i])})


def sin(x: Jet) -> Jet:
    s, c = np.sin(x.val), np.cos(x.val)
    return x.chain(s, c, -s)


def cos(x: Jet) -> Jet:
    s, c = np.sin(x.val), np.cos(x.val)
    return x.chain(c, -s, -c)


def tan(x: Jet) -> Jet:
    c = np.cos(x.val)
    bad = np.abs(c) < 1e-300
    if np.any(bad):
        _fail(DomainError, "tan pole", bad, x.val)
    t = np.tan(x.val)
    sec2 = 1.0 + t * t
    return x.chain(t, sec2, 2.0 * t * sec2)


def exp(x: Jet) -> Jet:
    e = np.exp(x.val)
    return x.chain(e, e, e)


def log(x: Jet) -> Jet:
    bad = x.val <= 0.0
    if np.any(bad):
        _fail(DomainError, "log of a non-positive number", bad, x.val)
    inv = 1.0 / x.val
    return x.chain(np.log(x.val), inv, -inv * inv)


def sqrt(x: Jet) -> Jet:
    bad = x.val < 0.0
    if np.any(bad):
        _fail(DomainError, "sqrt of a negative number", bad, x.val)
    if x.order >= 1:
        zero = x.val == 0.0
        if np.any(zero):
            _fail(NonSmoothPoint, "sqrt is not differentiable at 0", zero, x.val)
    r = np.sqrt(x.val)
    with np.errstate(divide="ignore", invalid="ignore"):
        f1 = 0.5 / r
        f2 = -0.25 / (r * r * r)
    return x.chain(r, f1, f2)


def atan2(y: Jet, x: Jet) -> Jet:
    r2 = x.val * x.val + y.val * y.val
    if min(x.order, y.order) >= 1:
        zero = r2 == 0.0
        if np.any(zero):
            _fail(NonSmoothPoint, "atan2 is not differentiable at the origin", zero, r2)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / r2
        inv2 = inv * inv
    xv, yv = x.val, y.val
    f = np.arctan2(yv, xv)
    fy = xv * inv
    fx = -yv * inv
    fyy = -2.0 * xv * yv * inv2
    fxx = 2.0 * xv * yv * inv2
    fxy = (yv * yv - xv * xv) * inv2
    return chain2(y, x, f, fy, fx, fyy, fxy, fxx)


def power(x: Jet, p) -> Jet:
    """``x ** p`` for a jet base and a jet or numeric exponent."""
    if isinstance(p, Jet) and not is_constant(p):
        return exp(log(x) * p)
    pv = p.val if isinstance(p, Jet) else np.asarray(p, dtype=float)
    pv = np.broadcast_to(pv, x.val.shape)
    integral = np.all(pv == np.round(pv))
    v = x.val
    if integral:
        if np.any((v == 0.0) & (pv < 0)):
            _fail(DomainError, "zero raised to a negative power", (v == 0.0) & (pv < 0), v)
    else:
        if np.any(v < 0.0):
            _fail(DomainError, "negative base with non-integer exponent", v < 0.0, v)
        if x.order >= 1 and np.any((v == 0.0) & (pv < 2)):
            _fail(NonSmoothPoint, "fractional power not differentiable at 0", (v == 0.0) & (pv < 2), v)
    if integral and np.all(pv == pv.flat[0]) and pv.flat[0] >= 0:
        k = int(pv.flat[0])
        f0 = v ** k
        f1 = k * v ** (k - 1) if k >= 1 else np.zeros_like(v)
        f2 = k * (k - 1) * v ** (k - 2) if k >= 2 else np.zeros_like(v)
        return x.chain(f0, f1, f2)
    with np.errstate(divide="ignore", invalid="ignore"):
        f0 = v ** pv
        f1 = pv * v ** (pv - 1)
        f2 = pv * (pv - 1) * v ** (pv - 2)
    f1 = np.where(pv == 0, 0.0, f1)
    f2 = np.where((pv == 0) | (pv == 1), 0.0, f2)
    return x.chain(f0, f1, f2)


# cutoffs
_PSI_FLOOR = 1.0 / 700.0


def _psi(x: np.ndarray):
    """psi(x) = exp(-1/x) for x > 0, and 0 otherwise, with two derivatives."""
    pos = x > _PSI_FLOOR
    xs = np.where(pos, x, 1.0)
    e = np.where(pos, np.exp(-1.0 / xs), 0.0)
    d1 = e / xs**2
    d2 = e * (1.0 - 2.0 * xs) / xs**4
    return e, np.where(pos, d1, 0.0), np.where(pos, d2, 0.0)


def step_up(t: np.ndarray):
    """Smooth increasing step: 0 for t <= 0, 1 for t >= 1, derivatives included."""
    a, a1, a2 = _psi(t)
    b, b1, b2 = _psi(1.0 - t)
    b1 = -b1
    s = a + b
    num = a1 * b - a * b1
    num1 = a2 * b - a * b2
    s1 = a1 + b1
    h = a / s
    h1 = num / s**2
    h2 = (num1 * s - 2.0 * num * s1) / s**3
    return h, h1, h2


def bump01(t: Jet) -> Jet:
    """Smooth cutoff equal to 1 for t <= 0 and 0 for t >= 1."""
    h, h1, h2 = step_up(t.val)
    return t.chain(1.0 - h, -h1, -h2)


def _ab(a: Jet, b: Jet, name: str):
    if not (is_constant(a) and is_constant(b)):
        raise DomainError(f"{name} endpoints must be constants")
    av, bv = a.val, b.val
    if np.any(av >= bv):
        _fail(DomainError, f"{name} requires a < b", av >= bv, av)
    return av, bv


def smoothstep(a: Jet, b: Jet, t: Jet) -> Jet:
    """Smooth increasing step from 0 at t <= a to 1 at t >= b."""
    av, bv = _ab(a, b, "smoothstep")
    w = bv - av
    h, h1, h2 = step_up((t.val - av) / w)
    return t.chain(h, h1 / w, h2 / w**2)


def radprof(a: Jet, b: Jet, s: Jet) -> Jet:
    """rho(r)/r as a smooth function of s = r^2.

    rho(r) = (1 - w) r + w with w the smooth step from a to b in r, so the
    result is 1 for r <= a and 1/r for r >= b.
    """
    av, bv = _ab(a, b, "radprof")
    if np.any(av <= 0):
        _fail(DomainError, "radprof requires a > 0", av <= 0, av)
    if np.any(s.val < 0):
        _fail(DomainError, "radprof of a negative square", s.val < 0, s.val)
    r = np.sqrt(s.val)
    flat = r <= av
    rs = np.where(flat, 1.0, r)
    wd = bv - av
    w, w1, w2 = step_up((rs - av) / wd)
    w1 = w1 / wd
    w2 = w2 / wd**2
    F = 1.0 - w + w / rs
    F1 = -w1 + w1 / rs - w / rs**2
    F2 = -w2 + w2 / rs - 2.0 * w1 / rs**2 + 2.0 * w / rs**3
    f0 = np.where(flat, 1.0, F)
    f1 = np.where(flat, 0.0, F1 / (2.0 * rs))
    f2 = np.where(flat, 0.0, (F2 - F1 / rs) / (4.0 * rs**2))
    return s.chain(f0, f1, f2)


UNARY = {
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "bump01": bump01,
}

# name -> (arity, implementation)
FUNCTIONS = {name: (1, fn) for name, fn in UNARY.items()}
FUNCTIONS.update({
    "atan2": (2, atan2),
    "smoothstep": (3, smoothstep),
    "radprof": (3, radprof),
})
