"""Command line entry point: run one command on one scene and write a JSON report.

Exit codes: 0 pass, 1 checked and failed, 2 input error, 3 numerically
indeterminate.  Precedence of settings is flags > scene > defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__, parallel
from .calculus import D, ExprField, reeb_vector_field
from .charts import sample_grid
from .config import EPS_MIN
from .errors import (
    ChartError, ContactLabError, DegreeOverflow, DimensionMismatch, EvenDimension, ExprError,
    NumericallyIndeterminate, PredictionMismatch, SceneParseError, SelectorNotFound, UnknownCommand, _plain,
)
from .scene import Scene, cover_alpha, cover_from, grid_of, load_scene, scalar, submanifold_from

REPORT_FORMAT = 1
INPUT_ERRORS = (SceneParseError, UnknownCommand, SelectorNotFound, ExprError, DimensionMismatch,
                EvenDimension, DegreeOverflow, ChartError)


@dataclass
class Settings:
    grid: Any = None
    tol: dict[str, float] = field(default_factory=dict)
    eps: float | None = None
    eps_min: float | None = None
    k: int | None = None
    delta: float | None = None
    tmax: float | None = None
    seeds: int | None = None
    margins: bool = False

    def describe(self) -> dict[str, Any]:
        return {k: v for k, v in {"grid": self.grid, "tol": self.tol or None, "eps": self.eps,
                                  "eps_min": self.eps_min, "k": self.k, "delta": self.delta,
                                  "tmax": self.tmax, "seeds": self.seeds}.items() if v is not None}


@dataclass
class Outcome:
    passed: bool
    results: dict[str, Any]
    tables: dict[str, dict[str, Any]] = field(default_factory=dict)


def _table(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> dict[str, Any]:
    return {"columns": list(columns), "rows": [list(r) for r in rows]}


def _margins_table(grid, values: np.ndarray | None) -> dict[str, Any]:
    if values is None:
        return _table(["index"], [])
    coords = list(grid.manifold.coords)
    rows = [[i, *[float(x) for x in grid.points[i]], float(values[i])] for i in range(len(values))]
    return _table(["index", *coords, "margin"], rows)


def _grid(sc: Scene, st: Settings, key: str = "resolution", default: Any = 16, main: bool = True):
    if main and st.grid is not None:
        return st.grid
    return grid_of(sc, key, default)


def _form_name(sc: Scene, section: str = "check", key: str = "form", default: str = "alpha") -> str:
    return sc.data.get(section, {}).get(key, default)


# -- commands -------------------------------------------------------------------


def cmd_check_contact(sc: Scene, st: Settings) -> Outcome:
    from .positivity import contact_check

    alpha = sc.form(_form_name(sc))
    g = sample_grid(sc.manifold, _grid(sc, st), sc.tol)
    rep = contact_check(alpha, sc.manifold, g, sc.tol)
    out = Outcome(rep.passed, {"contact": rep.to_dict()})
    if st.margins:
        out.tables["margins"] = _margins_table(g, rep.margins)
    return out


def cmd_check_adjusted(sc: Scene, st: Settings) -> Outcome:
    from .cover import pullback_branched
    from .positivity import adjusted_check

    if "cover" in sc.data:
        c = cover_from(sc, st.k, st.delta)
        g = sample_grid(c.source, st.grid if st.grid is not None else c.source_res, sc.tol)
        _, rep = pullback_branched(c, cover_alpha(sc, c), sc.tol, g)
        out = Outcome(rep.passed, {"pullback": rep.to_dict(), "k": c.k, "delta": c.delta})
        if st.margins:
            out.tables["margins"] = _margins_table(g, rep.checks["adjusted"].margins)
        return out
    cfg = sc.data.get("adjusted")
    if cfg is None:
        raise SceneParseError("check-adjusted needs an [adjusted] or [cover] block", {})
    Z = submanifold_from(cfg["locus"], sc.manifold, sc.params, "adjusted.locus")
    g = sample_grid(sc.manifold, _grid(sc, st), sc.tol)
    rep = adjusted_check(sc.form(_form_name(sc, "adjusted")), sc.manifold, g, Z, float(cfg["r_excl"]), sc.tol)
    out = Outcome(rep.passed, {"adjusted": rep.to_dict()})
    if st.margins:
        out.tables["margins"] = _margins_table(g, rep.margins)
    return out


def cmd_check_weak(sc: Scene, st: Settings) -> Outcome:
    from .positivity import weak_domination_check

    alpha = sc.form(_form_name(sc))
    omega = sc.form(_form_name(sc, "check", "omega", "omega"))
    g = sample_grid(sc.manifold, _grid(sc, st), sc.tol)
    rep = weak_domination_check(alpha, omega, sc.manifold, g, sc.tol)
    out = Outcome(rep.passed, {"weak_domination": rep.to_dict()})
    if st.margins:
        out.tables["margins"] = _margins_table(g, rep.margins)
    return out


def _open_book(sc: Scene):
    from .openbook import open_book

    cfg = sc.data.get("open_book")
    if cfg is None:
        raise SceneParseError("this command needs an [open_book] block", {})
    Z = submanifold_from(cfg["binding"], sc.manifold, sc.params, "open_book.binding") if "binding" in cfg else None
    try:
        return open_book(sc.manifold.coords, cfg["phi1"], cfg["phi2"], float(cfg.get("r_bind", 0.1)), Z, sc.params)
    except ExprError as exc:
        raise SceneParseError(f"open_book: {exc.message}", {"cause": exc.to_dict()}) from exc


def cmd_obd_check(sc: Scene, st: Settings) -> Outcome:
    from .openbook import obd_check

    ob = _open_book(sc)
    alpha = sc.form(_form_name(sc, "open_book"))
    rep = obd_check(ob, alpha, sc.manifold, sample_grid(sc.manifold, _grid(sc, st), sc.tol), sc.tol)
    return Outcome(rep.passed, {"obd": rep.to_dict()})


def cmd_obd_roundtrip(sc: Scene, st: Settings) -> Outcome:
    from .openbook import fields_from_obd, obd_from_fields

    ob = _open_book(sc)
    alpha = sc.form(_form_name(sc, "open_book"))
    g = sample_grid(sc.manifold, _grid(sc, st), sc.tol)
    eps = st.eps if st.eps is not None else sc.data["open_book"].get("eps")
    fp, rep1 = fields_from_obd(ob, alpha, sc.manifold, g, eps, sc.tol)
    _, rep2 = obd_from_fields(fp, g, tol=sc.tol)
    derr = rep2.details.get("direction_error", 0.0)
    passed = rep1.passed and rep2.passed and derr <= 1e-8
    return Outcome(passed, {"fields_from_obd": rep1.to_dict(), "obd_from_fields": rep2.to_dict(),
                            "eps": fp.eps, "direction_error": derr})


def _bourgeois_data(sc: Scene):
    from .bourgeois import BourgeoisData

    nf = sc.extras.get("normal_form")
    if nf is not None and "bourgeois" not in sc.data:
        return BourgeoisData(nf.manifold, nf.beta, nf.phi[0], nf.phi[1]), nf
    cfg = sc.data.get("bourgeois")
    if cfg is None:
        raise SceneParseError("this command needs a [bourgeois] or [normal_form] block", {})
    beta = sc.form(cfg.get("beta", "alpha"))
    return BourgeoisData(sc.manifold, beta, scalar(sc, cfg["phi1"], "bourgeois.phi1"),
                         scalar(sc, cfg["phi2"], "bourgeois.phi2")), None


def cmd_bourgeois(sc: Scene, st: Settings) -> Outcome:
    from .bourgeois import (
        average_potential, bourgeois_alpha, bourgeois_criterion, bourgeois_form, explicit_potential,
        potential_of, scaling_audit,
    )

    data, _ = _bourgeois_data(sc)
    cfg = sc.data.get("bourgeois", {})
    m_grid = grid_of(sc, "base", 8)
    p_grid = _grid(sc, st, "product", [8, 8, 8, 6, 6])
    P = data.product()
    pg = sample_grid(P, p_grid, sc.tol)
    epsilons = [st.eps] if st.eps is not None else [float(e) for e in cfg.get("eps", [1.0, 0.5, 0.25])]
    results: dict[str, Any] = {"contact": {}}
    eps_rows = []
    ok = True
    for e in epsilons:
        data.eps = e
        res = bourgeois_form(data, m_grid, pg, sc.tol, raise_on_failure=False)
        results["contact"][repr(e)] = res.contact.to_dict()
        results["domain_condition"] = res.domain.to_dict()
        eps_rows.append([e, res.contact.min_margin, res.contact.passed])
        ok &= res.contact.passed and res.domain.passed
    data.eps = 1.0
    alpha, _ = bourgeois_alpha(data)
    pot = potential_of(alpha, P, data.torus, data.beta, pg, sc.tol)
    crit = bourgeois_criterion(pot, data.beta, pg, sc.tol)
    results["criterion"] = crit.to_dict()
    ok &= crit.passed
    tw = cfg.get("twist")
    tau = None
    if tw is not None:
        tau = (scalar(sc, tw["tau1"], "bourgeois.twist.tau1", P.coords),
               scalar(sc, tw["tau2"], "bourgeois.twist.tau2", P.coords))
    sgrid = grid_of(sc, "scaling", p_grid)
    scale = scaling_audit(data, epsilons if len(epsilons) > 1 else [1.0, 0.5, 0.25], sgrid, tau, sc.tol)
    results["scaling"] = scale
    ok &= scale["passed"] and (tau is None or scale["curl_nonzero"])
    if "potential" in cfg:
        ps = cfg["potential"]
        expl = explicit_potential(P, data.manifold, data.torus, ps["A1"], ps["A2"], sc.params)
        av = average_potential(expl, grid_of(sc, "fiber", m_grid), int(ps.get("Q", 32)), None, sc.tol)
        results["averaging"] = av.report.to_dict()
        ok &= av.report.passed
    tables = {"eps_history": _table(["eps", "min_margin", "passed"], eps_rows),
              "scaling": _table(["eps", "curl", "bracket"], [[r["eps"], r["curl"], r["bracket"]]
                                                              for r in scale["rows"]])}
    return Outcome(bool(ok), results, tables)


def cmd_bourgeois_fill(sc: Scene, st: Settings) -> Outcome:
    from .bourgeois import bourgeois_weak_filling_check

    data, _ = _bourgeois_data(sc)
    cfg = sc.data.get("bourgeois", {})
    omega = sc.form(cfg.get("omega", "omega"))
    res = bourgeois_weak_filling_check(data, omega, grid_of(sc, "base", 8),
                                       _grid(sc, st, "product", [8, 8, 8, 6, 6]),
                                       st.eps if st.eps is not None else float(cfg.get("eps_start", 1.0)),
                                       st.eps_min if st.eps_min is not None else EPS_MIN, sc.tol)
    rows = [[h["eps"], h["min_margin"], h["passed"]] for h in res.history]
    return Outcome(res.report.passed, {"eps": res.eps, "base": res.base.to_dict(), "filling": res.report.to_dict()},
                   {"eps_history": _table(["eps", "min_margin", "passed"], rows)})


def cmd_cover_contactize(sc: Scene, st: Settings) -> Outcome:
    from .cover import binding_margin_audit, deck_invariance_check, epsilon_search, pullback_branched

    c = cover_from(sc, st.k, st.delta)
    g = sample_grid(c.source, st.grid if st.grid is not None else c.source_res, sc.tol)
    ahat, pb = pullback_branched(c, cover_alpha(sc, c), sc.tol, g)
    es = epsilon_search(ahat, c, grid=g, eps_start=st.eps if st.eps is not None else 1.0,
                        eps_min=st.eps_min if st.eps_min is not None else EPS_MIN, tol=sc.tol)
    deck = deck_invariance_check(es.alpha, c, g, sc.tol)
    audit = binding_margin_audit(ahat, c, es.eps, tol=sc.tol)
    passed = pb.passed and deck["passed"] and audit["passed"]
    rows = [[r["eps"], r["s"], r["min_margin"], r["passed"]] for r in es.table]
    out = Outcome(passed, {"k": c.k, "delta": c.delta, "eps": es.eps, "pullback": pb.to_dict(),
                           "search": {k: v.to_dict() for k, v in es.reports.items()},
                           "deck_invariance": deck, "binding_margins": audit},
                  {"eps_history": _table(["eps", "s", "min_margin", "passed"], rows)})
    if st.margins:
        out.tables["margins"] = _margins_table(g, es.reports["s=1.0"].margins)
    return out


def cmd_cover_fill(sc: Scene, st: Settings) -> Outcome:
    from .cover import boundary_filling_form

    c = cover_from(sc, st.k, st.delta)
    alpha = cover_alpha(sc, c)
    ff = boundary_filling_form(D(alpha), alpha, c, st.eps if st.eps is not None else 1.0,
                               st.eps_min if st.eps_min is not None else EPS_MIN, tol=sc.tol)
    return Outcome(ff.upstairs.passed, {"k": c.k, "delta": c.delta, "eps": ff.eps,
                                        "downstairs": ff.downstairs.to_dict(), "upstairs": ff.upstairs.to_dict()})


def cmd_reeb(sc: Scene, st: Settings) -> Outcome:
    from .reeb import predicted_reeb_bourgeois, reeb_field

    alpha = sc.form(_form_name(sc, "reeb"))
    g = sample_grid(sc.manifold, _grid(sc, st), sc.tol)
    rf = reeb_field(alpha, sc.manifold, g, sc.tol)
    results: dict[str, Any] = {"reeb": rf.to_dict()}
    ok = rf.report["passed"]
    exp = sc.data.get("reeb", {}).get("expected")
    if exp is not None:
        E = ExprField(sc.manifold.coords, exp, sc.params)
        dev = parallel.map_concat(lambda p: np.linalg.norm(E.values(p) - rf.field.values(p), axis=1), g.points)
        d = float(np.max(dev)) if dev.size else 0.0
        results["expected_deviation"] = d
        ok &= d <= 1e-8
    nf = sc.extras.get("normal_form")
    if nf is not None:
        try:
            results["prediction"] = predicted_reeb_bourgeois(nf, grid_of(sc, "prediction", [16, 16, 16, 4, 4]))
        except PredictionMismatch as exc:
            results["prediction"] = exc.to_dict()
            ok = False
        ok &= bool(results["prediction"].get("passed", False))
    return Outcome(bool(ok), results)


def _seeds(sc: Scene, st: Settings) -> np.ndarray:
    cfg = sc.data.get("orbits", {})
    explicit = np.array(cfg.get("seeds", []), dtype=float).reshape(-1, sc.manifold.ambient_dim)
    pool = np.zeros((0, sc.manifold.ambient_dim))
    if "seed_grid" in cfg:
        pool = sample_grid(sc.manifold, cfg["seed_grid"], sc.tol).points
    seeds = np.concatenate([explicit, pool], axis=0)
    if st.seeds is not None and st.seeds < len(seeds):
        idx = np.unique(np.linspace(0, len(seeds) - 1, st.seeds).round().astype(int)) if st.seeds > 0 else []
        seeds = seeds[idx]
    return seeds


def cmd_orbits(sc: Scene, st: Settings) -> Outcome:
    from .reeb import closed_orbit_search, contractible_orbit_audit

    cfg = sc.data.get("orbits", {})
    M = sc.manifold
    alpha = sc.form(_form_name(sc, "reeb"))
    R = reeb_vector_field(alpha, M, tol=sc.tol)
    torus = tuple(cfg.get("torus", list(M.periods())))
    tmax = st.tmax if st.tmax is not None else float(cfg.get("tmax", 100.0))
    seeds = _seeds(sc, st)
    recs = closed_orbit_search(R, M, seeds, tmax, sc.tol, torus)
    bd = cfg.get("binding_distance")
    if bd is not None:
        dist_f = scalar(sc, bd, "orbits.binding_distance")
        dist: Callable = lambda p: dist_f.values(p).scalar().val
    else:
        dist = lambda p: np.full(p.shape[0], math.inf)
    audit = contractible_orbit_audit(recs, M, dist, torus, sc.tol)
    if cfg.get("expect") == "all-closed":
        covered = {i for r in recs if r.closed for i in [r.index, *r.duplicates]}
        audit = {"expect": "all-closed", "closed_seeds": len(covered), "seeds": int(len(seeds)),
                 "passed": len(covered) == len(seeds), "contractible": audit}
    rows = [[r.index, *[float(x) for x in r.seed], r.period, r.residual, *r.winding_vector, r.closed, r.status]
            for r in recs]
    cols = ["seed_index", *[f"seed_{c}" for c in M.coords], "period", "residual",
            *[f"winding_{c}" for c in torus], "closed", "status"]
    return Outcome(audit["passed"], {"tmax": tmax, "seed_count": int(len(seeds)), "torus": list(torus),
                                     "orbits": [r.to_dict() for r in recs], "audit": audit},
                   {"orbits": _table(cols, rows)})


def cmd_normal_form(sc: Scene, st: Settings) -> Outcome:
    from .normal_form import binding_normal_form
    from .reeb import predicted_reeb_bourgeois

    cfg = sc.data.get("normal_form")
    if cfg is None:
        raise SceneParseError("normal-form needs a [normal_form] block", {})
    delta = st.delta if st.delta is not None else float(cfg.get("delta", 1.0))
    nf = binding_normal_form(int(cfg.get("n", 2)), cfg["h1"], cfg["h2"], delta)
    pred = predicted_reeb_bourgeois(nf, _grid(sc, st, "prediction", [16, 16, 16, 4, 4]))
    rad = nf.radial
    rows = [[a, b, c] for a, b, c in zip(rad["r"], rad["lambda"], rad["mu"])]
    return Outcome(bool(pred["passed"] and all(v.get("passed", False) for v in nf.conditions.values())),
                   {"normal_form": nf.to_dict(), "prediction": pred},
                   {"radial_profile": _table(["r", "lambda", "mu"], rows)})


COMMANDS: dict[str, Callable[[Scene, Settings], Outcome]] = {
    "check-contact": cmd_check_contact,
    "check-adjusted": cmd_check_adjusted,
    "check-weak": cmd_check_weak,
    "obd-check": cmd_obd_check,
    "obd-roundtrip": cmd_obd_roundtrip,
    "bourgeois": cmd_bourgeois,
    "bourgeois-fill": cmd_bourgeois_fill,
    "cover-contactize": cmd_cover_contactize,
    "cover-fill": cmd_cover_fill,
    "reeb": cmd_reeb,
    "orbits": cmd_orbits,
    "normal-form": cmd_normal_form,
}


# -- reports -------------------------------------------------------------------


def _finite(obj: Any) -> Any:
    """Replace non-finite floats with strings so the report is strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def run_scene(scene_ref: str | Scene, command: str, settings: Settings | None = None) -> tuple[dict[str, Any], int]:
    """Execute one command and return the report with its exit code."""
    st = settings or Settings()
    t0 = time.perf_counter()
    report: dict[str, Any] = {"tool": "contactlab", "version": __version__, "format": REPORT_FORMAT,
                              "command": command, "settings": st.describe(), "scene": None, "scene_hash": None,
                              "results": {}, "tables": {}, "error": None}
    code = 0
    try:
        sc = scene_ref if isinstance(scene_ref, Scene) else load_scene(scene_ref)
        report["scene"], report["scene_hash"] = sc.name, sc.hash
        if st.tol:
            sc.tol = sc.tol.with_overrides(**st.tol)
        if command not in COMMANDS:
            raise UnknownCommand(f"unknown command {command!r}", {"command": command, "known": sorted(COMMANDS)})
        out = COMMANDS[command](sc, st)
        report["results"], report["tables"] = out.results, out.tables
        code = 0 if out.passed else 1
    except INPUT_ERRORS as exc:
        report["error"], code = exc.to_dict(), 2
    except NumericallyIndeterminate as exc:
        report["error"], code = exc.to_dict(), 3
    except ContactLabError as exc:
        report["error"], code = exc.to_dict(), 1
    except KeyError as exc:
        report["error"], code = {"name": "SceneParseError", "message": f"missing key {exc.args[0]!r}",
                                 "witness": {}}, 2
    except (ValueError, TypeError) as exc:
        report["error"], code = {"name": "InputError", "message": str(exc), "witness": {}}, 2
    report["passed"] = code == 0
    report["exit_code"] = code
    report["status"] = {0: "pass", 1: "fail", 2: "input-error", 3: "indeterminate"}[code]
    report["wall_clock"] = round(time.perf_counter() - t0, 6)
    return _finite(_plain(report)), code


def dumps_report(report: dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def strip_wall_clock(text: str) -> str:
    d = json.loads(text)
    d.pop("wall_clock", None)
    return json.dumps(d, sort_keys=True, indent=2)


def emit_plot_data(report: dict[str, Any], selector: str) -> str:
    """CSV text with a header row for one table of a report."""
    tables = report.get("tables", {})
    if selector not in tables:
        raise SelectorNotFound(f"report has no table {selector!r}", {"selector": selector, "known": sorted(tables)})
    t = tables[selector]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(t["columns"])
    for row in t["rows"]:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _parse_grid(s: str):
    parts = [int(p) for p in s.replace("x", ",").split(",") if p.strip()]
    return parts[0] if len(parts) == 1 else parts


def _parse_tol(s: str) -> dict[str, float]:
    if "=" not in s:
        return {"pos": float(s)}
    out = {}
    for item in s.split(","):
        k, v = item.split("=", 1)
        out[k.strip()] = float(v)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contactlab", description="Verify contact-geometric constructions on sample grids.")
    p.add_argument("command", help="one of: " + ", ".join(COMMANDS))
    p.add_argument("scene", help="scene file or built-in scene name")
    p.add_argument("--grid", type=_parse_grid, help="resolution N or N1,N2,... for the main grid")
    p.add_argument("--tol", type=_parse_tol, action="append", default=[],
                   help="tolerance overrides NAME=VALUE[,...]; a bare number sets pos")
    p.add_argument("--eps", type=float)
    p.add_argument("--eps-min", type=float, dest="eps_min")
    p.add_argument("--k", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--seeds", type=int, help="number of orbit seeds taken evenly from the scene's seed list")
    p.add_argument("--report", help="write the JSON report here (default: stdout)")
    p.add_argument("--csv", action="append", default=[], metavar="SELECTOR=PATH",
                   help="write a report table as CSV: margins, eps_history, orbits, radial_profile, scaling")
    p.add_argument("--threads", type=int, default=1)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    parallel.set_threads(args.threads)
    tol: dict[str, float] = {}
    for t in args.tol:
        tol.update(t)
    csv_targets = []
    for item in args.csv:
        if "=" not in item:
            print(f"--csv expects SELECTOR=PATH, got {item!r}", file=sys.stderr)
            return 2
        csv_targets.append(tuple(item.split("=", 1)))
    st = Settings(args.grid, tol, args.eps, args.eps_min, args.k, args.delta, args.tmax, args.seeds,
                  margins=any(s == "margins" for s, _ in csv_targets))
    report, code = run_scene(args.scene, args.command, st)
    text = dumps_report(report)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for sel, path in csv_targets:
        try:
            data = emit_plot_data(report, sel)
        except SelectorNotFound as exc:
            print(f"{exc.name}: {exc.message}", file=sys.stderr)
            return 2
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(data)
    if report["error"] is not None:
        print(f"{report['error']['name']}: {report['error']['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
