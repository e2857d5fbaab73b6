"""Scene files: TOML documents describing manifolds, forms and constructions.

Layout (all sections optional except one way of building a manifold)::

    format = 1
    name = "..."
    [params]            named constants visible in every expression
    [manifold]          kind = periodic_box | box | disk | level_set | product
    [forms.NAME]        degree and coeffs (keys "x" or "x,y"), expression strings
    [fields.NAME]       components keyed by coordinate
    [grid]              resolution for the main check, product / fiber / base grids
    [tolerances]        overrides of Tolerances fields
    [open_book]         phi1, phi2, r_bind, optional [open_book.binding]
    [bourgeois]         beta, phi1, phi2, omega, eps list, twist, explicit potential
    [cover]             model = local | s3, k, delta, optional deck maps
    [normal_form]       n, h1, h2, delta; provides the tube manifold and "alpha"
    [reeb]              form, expected components
    [orbits]            tmax, seeds, seed_grid, torus, binding_distance

Flags override scene values, which override defaults.
"""

from __future__ import annotations

import hashlib
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .calculus import ExprField, ExprForm, ExprMap, Form, ScalarExpr
from .charts import Box, LevelSet, Manifold, PeriodicBox, Product
from .config import DEFAULT_TOL, Tolerances
from .errors import ContactLabError, ExprError, SceneParseError
from .positivity import Submanifold, submanifold

FORMAT_VERSION = 1
BUILTIN_SCENES = ("t3_alpha1", "t3_alpha_n", "t3_dtheta", "s3_std", "s3_disk_obd", "s3_bourgeois",
                  "tube_bourgeois", "cover_local_k2", "cover_local_k5", "cover_s3_k2")


@dataclass
class Scene:
    name: str
    source: str
    data: dict[str, Any]
    path: str = ""
    manifold: Manifold | None = None
    forms: dict[str, Form] = field(default_factory=dict)
    fields: dict[str, ExprField] = field(default_factory=dict)
    params: dict[str, float] = field(default_factory=dict)
    tol: Tolerances = DEFAULT_TOL
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.source.encode("utf-8")).hexdigest()

    def section(self, name: str) -> dict[str, Any]:
        return dict(self.data.get(name, {}))

    def form(self, name: str) -> Form:
        if name not in self.forms:
            raise SceneParseError(f"unknown form {name!r}", {"name": name, "known": sorted(self.forms)})
        return self.forms[name]


def _fail(msg: str, where: str, exc: Exception | None = None) -> SceneParseError:
    w: dict[str, Any] = {"at": where}
    if isinstance(exc, ContactLabError):
        w["cause"] = exc.to_dict()
        if "offset" in exc.witness:
            w["offset"] = exc.witness["offset"]
    return SceneParseError(f"{where}: {msg}", w)


def _toml_offset(text: str, exc: Exception) -> int | None:
    m = re.search(r"line (\d+), column (\d+)", str(exc))
    if not m:
        return None
    line, col = int(m.group(1)), int(m.group(2))
    lines = text.splitlines(keepends=True)
    return sum(len(s) for s in lines[: line - 1]) + col - 1


def builtin_path(name: str) -> Path | None:
    stem = name[:-6] if name.endswith(".scene") else name
    if stem not in BUILTIN_SCENES:
        return None
    return Path(str(resources.files("contactlab") / "scenes" / f"{stem}.scene"))


def _resolution(v: Any, where: str):
    if isinstance(v, int) and not isinstance(v, bool) and v > 0:
        return v
    if isinstance(v, list) and v and all(isinstance(x, (int, list)) for x in v):
        return v
    raise _fail("a resolution must be a positive integer or a list", where)


def _manifold(cfg: dict[str, Any], where: str) -> Manifold:
    kind = cfg.get("kind")
    try:
        if kind == "periodic_box":
            periods = tuple(float(p) for p in cfg.get("periods", ()))
            return PeriodicBox(tuple(cfg["coords"]), periods)
        if kind == "box":
            return Box(tuple(cfg["coords"]), tuple(cfg["lower"]), tuple(cfg["upper"]), cfg.get("radius"))
        if kind == "disk":
            return Box.disk(tuple(cfg["coords"]), float(cfg["radius"]))
        if kind == "level_set":
            return LevelSet(tuple(cfg["coords"]), tuple(cfg["constraints"]), cfg.get("recipe"))
        if kind == "product":
            return Product(tuple(_manifold(f, f"{where}.factors[{i}]") for i, f in enumerate(cfg["factors"])))
    except KeyError as exc:
        raise _fail(f"missing key {exc.args[0]!r}", where) from exc
    except ContactLabError as exc:
        raise _fail(exc.message, where, exc) from exc
    raise _fail(f"unknown manifold kind {kind!r}", where)


def submanifold_from(cfg: dict[str, Any], target: Manifold, params: dict, where: str) -> Submanifold:
    chart = _manifold(cfg["chart"], f"{where}.chart")
    emb = [_subst_params(e, params) for e in cfg["embedding"]]
    return submanifold(chart, target, emb, _subst_params(cfg["distance"], params),
                       _resolution(cfg.get("resolution", 32), f"{where}.resolution"))


def _subst_params(src: str, params: dict) -> str:
    # embeddings and distances are plain expressions over chart coordinates; inline constants
    if not params:
        return src
    pat = re.compile(r"\b(" + "|".join(re.escape(k) for k in sorted(params, key=len, reverse=True)) + r")\b")
    return pat.sub(lambda m: f"({params[m.group(1)]!r})", src)


def parse_scene(text: str, name: str = "", path: str = "") -> Scene:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SceneParseError(f"invalid scene syntax: {exc}", {"offset": _toml_offset(text, exc)}) from exc
    fmt = data.get("format", FORMAT_VERSION)
    if fmt != FORMAT_VERSION:
        raise SceneParseError(f"unsupported scene format {fmt!r}", {"format": fmt})
    sc = Scene(str(data.get("name", name)), text, data, path)
    sc.params = {str(k): float(v) for k, v in data.get("params", {}).items()}
    tol = data.get("tolerances", {})
    try:
        sc.tol = DEFAULT_TOL.with_overrides(**{k: float(v) for k, v in tol.items()})
    except KeyError as exc:
        raise _fail(str(exc.args[0]), "tolerances") from exc

    if "manifold" in data:
        sc.manifold = _manifold(data["manifold"], "manifold")
    if "normal_form" in data:
        from .normal_form import binding_normal_form

        nf = data["normal_form"]
        try:
            tube = binding_normal_form(int(nf.get("n", 2)), nf["h1"], nf["h2"], float(nf.get("delta", 1.0)),
                                       raise_on_violation=False)
        except ExprError as exc:
            raise _fail(exc.message, "normal_form", exc) from exc
        sc.extras["normal_form"] = tube
        if sc.manifold is None:
            sc.manifold = tube.product
            sc.forms["alpha"] = tube.alpha
    if "cover" in data and sc.manifold is None:
        sc.manifold = cover_from(sc).source

    names: set[str] = set()
    for kind in ("forms", "fields"):
        for nm, cfg in data.get(kind, {}).items():
            if nm in names or nm in sc.forms:
                raise _fail(f"duplicate name {nm!r}", f"{kind}.{nm}")
            names.add(nm)
            if sc.manifold is None:
                raise _fail("a manifold block is required", f"{kind}.{nm}")
            coords = sc.manifold.coords
            try:
                if kind == "forms":
                    sc.forms[nm] = ExprForm(coords, int(cfg["degree"]), cfg.get("coeffs", {}),
                                            sc.params)
                else:
                    sc.fields[nm] = ExprField(coords, cfg.get("components", {}), sc.params)
            except ContactLabError as exc:
                raise _fail(exc.message, f"{kind}.{nm}", exc) from exc
            except KeyError as exc:
                raise _fail(f"missing key {exc.args[0]!r}", f"{kind}.{nm}") from exc
    if sc.manifold is None:
        raise SceneParseError("the scene defines no manifold", {})
    _validate_refs(sc)
    return sc


def _validate_refs(sc: Scene) -> None:
    for sec, keys in (("check", ("form", "omega")), ("bourgeois", ("beta", "omega")), ("reeb", ("form",)),
                      ("open_book", ("form",)), ("adjusted", ("form",))):
        block = sc.data.get(sec, {})
        for k in keys:
            if k in block and block[k] not in sc.forms:
                raise _fail(f"{k} refers to unknown form {block[k]!r}", f"{sec}.{k}")


def load_scene(ref: str) -> Scene:
    """Load a scene by path or by built-in name."""
    p = Path(ref)
    if not p.exists():
        bp = builtin_path(ref)
        if bp is None:
            raise SceneParseError(f"no scene file or built-in scene named {ref!r}", {"scene": ref})
        p = bp
    text = p.read_text(encoding="utf-8")
    return parse_scene(text, p.stem, str(p))


def scalar(sc: Scene, src: Any, where: str, coords=None) -> ScalarExpr:
    try:
        return ScalarExpr(coords or sc.manifold.coords, str(src), params=sc.params)
    except ContactLabError as exc:
        raise _fail(exc.message, where, exc) from exc


def cover_from(sc: Scene, k: int | None = None, delta: float | None = None):
    from . import cover as cv

    cfg = sc.data["cover"]
    k = int(cfg.get("k", 2)) if k is None else int(k)
    model = cfg.get("model", "local")
    if model == "local":
        c = cv.local_model(k, float(cfg.get("delta", 1.0)) if delta is None else delta)
    elif model == "s3":
        c = cv.cyclic_cover_s3(k, float(cfg.get("delta", 0.5)) if delta is None else delta)
    else:
        raise _fail(f"unknown cover model {model!r}", "cover.model")
    if "deck" in cfg:
        try:
            c.deck = [ExprMap(c.source.coords, c.source.coords, comps) for comps in cfg["deck"]]
        except ContactLabError as exc:
            raise _fail(exc.message, "cover.deck", exc) from exc
    if "source_grid" in cfg:
        c.source_res = _resolution(cfg["source_grid"], "cover.source_grid")
    if "target_grid" in cfg:
        c.target_res = _resolution(cfg["target_grid"], "cover.target_grid")
    return c


def cover_alpha(sc: Scene, c):
    from . import cover as cv

    return cv.local_model_alpha(c.target) if sc.data["cover"].get("model", "local") == "local" else \
        cv.s3_alpha(c.target)


def grid_of(sc: Scene, key: str = "resolution", default: Any = 16):
    g = sc.data.get("grid", {})
    return _resolution(g.get(key, default), f"grid.{key}")
