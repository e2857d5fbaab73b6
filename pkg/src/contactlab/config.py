"""Numerical tolerances and search limits."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    level: float = 1e-10      # level-set residual for sample points
    rank: float = 1e-8        # relative singular value for constraint rank
    tan: float = 1e-10        # frame vectors annihilated by constraint gradients
    pos: float = 1e-9         # strict positivity margin
    trans: float = 1e-6       # transversality of the open book map at the binding
    orbit: float = 1e-6       # closed-orbit return residual
    catch: float = 1e-3       # near-return candidate threshold
    bind: float = 1e-4        # distance to a binding
    flat: float = 1e-8        # flatness of a potential
    quad: float = 1e-8        # torus averaging identity
    closed: float = 1e-9      # closedness of a 2-form on frames
    solve_cond: float = 1e12  # condition number above which a solve is singular

    def with_overrides(self, **kw: float) -> "Tolerances":
        known = {f.name for f in fields(self)}
        bad = set(kw) - known
        if bad:
            raise KeyError(f"unknown tolerance(s): {sorted(bad)}")
        return replace(self, **kw)


DEFAULT_TOL = Tolerances()

EPS_MIN = 2.0 ** -30
K_MAX = 2 ** 20
STURM_CHEB_POINTS = 256
TAU_CAP = 1e4
QUAD_POINTS = 32
