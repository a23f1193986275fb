"""Command line front door.

Subcommands: ``zoo list``, ``degree``, ``escan``, ``fscan``, ``bmo``,
``vmodegree``, ``cov``, ``energy``, ``scan``.  Every output file embeds the
configuration echo and the tool version.  Exit codes: 0 success, 1
inconclusive or a computational failure (recorded), 2 usage, 3 I/O.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from . import __version__
from .errors import BrouwerkitError, ConfigurationError

__all__ = ["RunConfig", "UsageError", "parse_config", "run", "main", "build_map", "build_domain"]

COMMANDS = ("zoo", "degree", "escan", "fscan", "bmo", "vmodegree", "cov", "energy", "scan")


class UsageError(ConfigurationError):
    """Bad flags or values on the command line."""


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run."""

    command: str
    map: str | None = None
    domain: str | None = None
    params: dict = dc_field(default_factory=dict)
    res: int = 128
    bres: int = 256
    seed: int = 0
    jobs: int = 1
    out: str | None = None

    def to_dict(self):
        d = asdict(self)
        d["params"] = dict(sorted(self.params.items()))
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return _validated(cls(**{k: d[k] for k in d if k in cls.__dataclass_fields__}))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(s):
    try:
        return [float(v) for v in s.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected comma-separated numbers, got %r" % s) from exc


def _build_parser():
    p = _Parser(prog="brouwerkit", description="Degree, oscillation and BMO/VMO diagnostics.")
    p.add_argument("--version", action="version", version="brouwerkit " + __version__)
    sub = p.add_subparsers(dest="command")

    def common(sp, needs_map=True):
        sp.add_argument("--config", help="JSON run configuration (flags override it)")
        if needs_map:
            sp.add_argument("--map", help="zoo spec (zpow:2), grid:PATH, tilde-SURFACE:D or surface:NAME")
            sp.add_argument("--domain", help="disk:R[@cx,cy], ball:R, box:lo...,hi...")
        sp.add_argument("--res", type=int, help="cells per axis (>= 8)")
        sp.add_argument("--bres", type=int, help="boundary resolution (>= 16)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--out", help="output path prefix")

    z = sub.add_parser("zoo")
    z.add_argument("action", choices=["list"])
    common(z, needs_map=False)
    d = sub.add_parser("degree")
    common(d)
    d.add_argument("--y", type=_floats)
    d.add_argument("--method", choices=["counting", "integral", "boundary", "winding", "all"])
    d.add_argument("--bump", type=float)
    e = sub.add_parser("escan")
    common(e)
    e.add_argument("--yres", type=int)
    e.add_argument("--window", type=_floats)
    f = sub.add_parser("fscan")
    common(f)
    f.add_argument("--a", type=_floats)
    f.add_argument("--radii", type=_floats)
    f.add_argument("--yres", type=int)
    b = sub.add_parser("bmo")
    common(b)
    b.add_argument("--eps", type=_floats)
    v = sub.add_parser("vmodegree")
    common(v)
    v.add_argument("--p", type=_floats)
    v.add_argument("--eps", type=_floats)
    c = sub.add_parser("cov")
    common(c)
    c.add_argument("--p", type=_floats)
    c.add_argument("--bump", type=float)
    en = sub.add_parser("energy")
    common(en)
    en.add_argument("--theta", choices=["log", "none"])
    s = sub.add_parser("scan")
    common(s)
    s.add_argument("--points", type=int)
    s.add_argument("--radii", type=_floats)
    return p


_DEFAULTS = {
    "zoo": {"action": "list"},
    "degree": {"method": "all", "bump": 0.1},
    "escan": {"yres": 128, "window": None},
    "fscan": {"a": [0.0, 0.0], "radii": [0.4, 0.2, 0.1, 0.05], "yres": 128},
    "bmo": {"eps": None},
    "vmodegree": {"eps": None},
    "cov": {"bump": 0.1},
    "energy": {"theta": "none"},
    "scan": {"points": 16, "radii": [0.2, 0.1, 0.05, 0.025]},
}
_REQUIRED = {"degree": ("y",), "vmodegree": ("p",), "cov": ("p",)}
_TOP = ("map", "domain", "res", "bres", "seed", "jobs", "out")


def _validated(cfg):
    if cfg.command not in COMMANDS:
        raise UsageError("unknown command %r" % cfg.command)
    if cfg.res < 8:
        raise UsageError("--res must be >= 8")
    if cfg.bres < 16:
        raise UsageError("--bres must be >= 16")
    if cfg.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if cfg.command != "zoo" and (not cfg.map or not cfg.domain):
        raise UsageError("--map and --domain are required")
    for k in _REQUIRED.get(cfg.command, ()):
        if cfg.params.get(k) is None:
            raise UsageError("--%s is required for %s" % (k, cfg.command))
    return cfg


def parse_config(argv):
    """Parse a command line (optionally seeded from ``--config``) into a RunConfig."""
    ns = _build_parser().parse_args(list(argv))
    if ns.command is None:
        raise UsageError("a subcommand is required")
    base = {}
    if getattr(ns, "config", None):
        try:
            with open(ns.config, encoding="utf-8") as fh:
                base = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError("cannot read config %r: %s" % (ns.config, exc)) from exc
        if base.get("command", ns.command) != ns.command:
            raise UsageError("config file is for %r, not %r" % (base.get("command"), ns.command))
    params = dict(_DEFAULTS[ns.command])
    params.update(base.get("params", {}))
    vals = vars(ns)
    for k in params:
        if vals.get(k) is not None:
            params[k] = vals[k]
    for k in _REQUIRED.get(ns.command, ()):
        if vals.get(k) is not None:
            params[k] = vals[k]
    top = {"res": 128, "bres": 256, "seed": 0, "jobs": 1, "map": None, "domain": None, "out": None}
    top.update({k: base[k] for k in _TOP if k in base})
    top.update({k: vals[k] for k in _TOP if vals.get(k) is not None})
    params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in params.items()}
    return _validated(RunConfig(ns.command, params=params, **top))


# -- builders ---------------------------------------------------------------------
def build_domain(spec, res):
    from .domain import make_domain

    kind, _, arg = spec.partition(":")
    try:
        if kind == "disk":
            r, _, c = arg.partition("@")
            center = [float(v) for v in c.split(",")] if c else [0.0, 0.0]
            return make_domain("ball", (center, float(r)), res)
        if kind == "ball":
            r, _, c = arg.partition("@")
            center = [float(v) for v in c.split(",")] if c else [0.0, 0.0, 0.0]
            return make_domain("ball", (center, float(r)), res)
        if kind == "box":
            v = [float(x) for x in arg.split(",")]
            if len(v) % 2:
                raise UsageError("box needs 2n numbers")
            return make_domain("box", (v[: len(v) // 2], v[len(v) // 2:]), res)
    except ValueError as exc:
        raise UsageError("bad domain %r" % spec) from exc
    raise UsageError("unknown domain kind %r" % kind)


def build_map(spec):
    """Return ``(field, entry_or_surface)`` for a map spec."""
    from .fields import read_grid
    from .mapzoo import parse_map_spec, surface, tilde_F

    if spec.startswith("grid:"):
        g = read_grid(spec[5:])
        return g, None
    if spec.startswith("tilde-"):
        name, _, d = spec[6:].partition(":")
        surf = surface(name)
        return tilde_F(surf, float(d) if d else 0.5), surf
    if spec.startswith("surface:"):
        parts = spec[8:].split(":")
        kw = {"lam": float(parts[1])} if parts[0] == "stretched" and len(parts) > 1 else {}
        surf = surface(parts[0], **kw)
        return surf.field, surf
    entry = parse_map_spec(spec)
    return entry.field, entry


# -- output -----------------------------------------------------------------------
def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


class _Writer:
    """Collects records and table rows; one writer per run."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.records = []
        self.header = None
        self.rows = []
        self.pgm = None

    def echo(self):
        return {"kind": "header", "tool": "brouwerkit", "version": __version__, "config": self.cfg.to_dict()}

    def flush(self):
        if not self.cfg.out:
            return
        with open(self.cfg.out + ".json", "w", encoding="utf-8") as fh:
            for r in [self.echo()] + self.records:
                fh.write(json.dumps(_clean(r), sort_keys=True) + "\n")
        if self.header is not None:
            buf = io.StringIO()
            buf.write("# brouwerkit %s\n# config: %s\n" % (__version__, self.cfg.to_json()))
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(self.header)
            for row in self.rows:
                w.writerow([_fmt(v) for v in row])
            with open(self.cfg.out + ".csv", "w", encoding="utf-8") as fh:
                fh.write(buf.getvalue())
        if self.pgm is not None:
            self.pgm.to_pgm(self.cfg.out + ".pgm",
                            ["brouwerkit %s" % __version__, "config: %s" % self.cfg.to_json()])


# -- commands ---------------------------------------------------------------------
def _cmd_zoo(cfg, out):
    from .mapzoo import CATALOGUE, preset

    for name in sorted(CATALOGUE):
        rec = preset(name).record()
        out.records.append(rec)
        print(json.dumps(_clean(rec), sort_keys=True))
    return 0


def _cmd_degree(cfg, out):
    from .degree import degree

    field, _ = build_map(cfg.map)
    dom = build_domain(cfg.domain, cfg.res)
    y = np.asarray(cfg.params["y"], dtype=float)
    method = cfg.params["method"]
    methods = ["counting", "integral", "boundary"] if method == "all" else [method]
    kw = {"counting": {"bres": cfg.bres}, "winding": {"bres": cfg.bres},
          "integral": {"bres": cfg.bres, "bump_radius": cfg.params["bump"]},
          "boundary": {"bres": cfg.bres, "bump_radius": cfg.params["bump"]}}

    def one(m):
        try:
            return degree(field, dom, y, m, **kw[m]).record()
        except BrouwerkitError as exc:
            return {"method": m, "y": y.tolist(), "error": type(exc).__name__, "message": str(exc)}

    with ThreadPoolExecutor(max_workers=cfg.jobs) as ex:
        recs = list(ex.map(one, methods))
    out.header = ["method", "value", "raw", "residual", "inconclusive"]
    code = 0
    for r in recs:
        out.records.append(r)
        if "error" in r:
            code = 1
            print("degree %-9s y=%s error=%s" % (r["method"], r["y"], r["error"]))
            out.rows.append([r["method"], "", "", "", "error"])
            continue
        code = max(code, 1 if r["inconclusive"] else 0)
        print("degree %-9s y=%s value=%s raw=%.6f" % (r["method"], r["y"], r["value"], r["raw"]))
        out.rows.append([r["method"], r["value"], r["raw"], r["residual"], r["inconclusive"]])
    return code


def _cmd_escan(cfg, out):
    from .regularity import degree_region

    field, _ = build_map(cfg.map)
    dom = build_domain(cfg.domain, cfg.res)
    win = cfg.params.get("window")
    window = None
    if win:
        k = len(win) // 2
        window = (win[:k], win[k:])
    r = degree_region(field, dom, window, cfg.params["yres"], cfg.bres)
    out.header = ["y%d" % i for i in range(r.n)] + ["degree", "boundary"]
    out.rows = [list(row[:-2]) + [int(row[-2]), int(row[-1])] for row in r.rows()]
    if r.n == 2:
        out.pgm = r
    rec = {"kind": "eset", "lo": r.lo, "hi": r.hi, "resolution": r.resolution,
           "degrees": sorted(set(int(v) for v in np.unique(r.degree))), "cells_in_E": int(r.mask.sum()),
           "diameter": r.diameter}
    out.records.append(rec)
    print("escan cells_in_E=%d degrees=%s diameter=%.6f" % (rec["cells_in_E"], rec["degrees"], rec["diameter"]))
    return 0


def _cmd_fscan(cfg, out):
    from .regularity import f_set

    field, _ = build_map(cfg.map)
    dom = build_domain(cfg.domain, cfg.res)
    rep = f_set(field, cfg.params["a"], cfg.params["radii"], cfg.params["yres"], dom)
    out.header = ["radius", "osc_sphere", "mask_diameter"]
    out.rows = [[r, o, m] for r, o, m in zip(rep.radii, rep.osc, rep.mask_diameters)]
    out.records.append({"kind": "fset", "a": rep.a, "radii": rep.radii, "diameter": rep.diameter,
                        "osc": rep.osc, "mask_diameters": rep.mask_diameters, "empty": rep.empty})
    print("fscan a=%s diam_F=%.6f empty=%s" % (np.asarray(rep.a).tolist(), rep.diameter, rep.empty))
    return 1 if rep.empty else 0


def _cmd_bmo(cfg, out):
    from .bmo import bmo_seminorm, make_plan

    field, _ = build_map(cfg.map)
    dom = build_domain(cfg.domain, cfg.res)
    plan = make_plan(dom, cfg.params.get("eps"), seed=cfg.seed)
    prof = bmo_seminorm(field, dom, plan)
    out.header = ["eps", "omega", "balls"]
    out.rows = [[s, prof.table[s], len(c)] for s, c in zip(plan.scales, plan.centers)]
    out.records.append({"kind": "bmo", **prof.record()})
    print("bmo estimate=%.6f balls=%d" % (prof.estimate, plan.size))
    return 0


def _cmd_vmodegree(cfg, out):
    from .bmo import vmo_degree

    field, _ = build_map(cfg.map)
    dom = build_domain(cfg.domain, cfg.res)
    rep = vmo_degree(field, dom, cfg.params["p"], cfg.params.get("eps"), cfg.bres)
    out.header = ["eps", "degree"]
    out.rows = [[e, d] for e, d in zip(rep.schedule, rep.degrees)]
    out.records.append({"kind": "vmodegree", **rep.record()})
    print("vmodegree p=%s degrees=%s stabilized=%s d0=%.6f" % (np.asarray(rep.p).tolist(), rep.degrees, rep.stabilized, rep.d0))
    return 0 if rep.stabilized is not None else 1


def _cmd_cov(cfg, out):
    from .bmo import vmo_change_of_variables_check

    field, _ = build_map(cfg.map)
    dom = build_domain(cfg.domain, cfg.res)
    res = vmo_change_of_variables_check(field, dom, cfg.params["p"], cfg.params["bump"], bres=cfg.bres)
    out.header = ["lhs", "rhs", "residual"]
    out.rows = [[res.lhs, res.rhs, res.residual]]
    out.records.append({"kind": "cov", **res.record()})
    print("cov lhs=%.8g rhs=%.8g residual=%.3g" % (res.lhs, res.rhs, res.residual))
    return 0


def _cmd_energy(cfg, out):
    from .mapzoo import EnergySpec, SurfaceMap, elastic_energy, immersion_energy

    field, obj = build_map(cfg.map)
    dom = build_domain(cfg.domain, cfg.res)
    if isinstance(obj, SurfaceMap) and field.m == field.n + 1:
        r = immersion_energy(obj, dom)
        rec = {"kind": "immersion", "stretch": r.stretch, "bending": r.bending, "total": r.total}
        out.header = ["stretch", "bending", "total"]
        out.rows = [[r.stretch, r.bending, r.total]]
        print("energy stretch=%.8g bending=%.8g" % (r.stretch, r.bending))
    else:
        r = elastic_energy(field, dom, EnergySpec(cfg.params["theta"]))
        rec = {"kind": "elastic", **r.record()}
        out.header = ["value", "infinite", "dist_term", "theta_term"]
        out.rows = [[r.value, r.infinite, r.dist_term, r.theta_term]]
        print("energy value=%s infinite=%s" % ("inf" if r.infinite else "%.8g" % r.value, r.infinite))
    out.records.append(rec)
    return 0


def _cmd_scan(cfg, out):
    from .regularity import continuity_scan

    field, _ = build_map(cfg.map)
    dom = build_domain(cfg.domain, cfg.res)
    rng = np.random.default_rng(cfg.seed)
    lo, hi = dom.bbox
    pts = []
    while len(pts) < cfg.params["points"]:
        x = rng.uniform(lo, hi)
        if dom.contains(x, margin=0.1 * dom.min_feature):
            pts.append(x)
    radii = cfg.params["radii"]
    with ThreadPoolExecutor(max_workers=cfg.jobs) as ex:
        profs = list(ex.map(lambda x: continuity_scan(field, dom, [x], radii), pts))
    out.header = ["point", *["x%d" % i for i in range(dom.n)], "radius", "osc", "eosc", "energy",
                  "diam_F", "classification"]
    rows = []
    for i, p in enumerate(profs):
        for row in p.rows():
            rows.append([i] + row[1:])
    out.rows = rows
    susp = sum(len(p.suspect) for p in profs)
    out.records.append({"kind": "scan", "thresholds": profs[0].thresholds,
                        "records": [p.records[0] for p in profs]})
    print("scan points=%d suspect=%d" % (len(pts), susp))
    return 0


_DISPATCH = {"zoo": _cmd_zoo, "degree": _cmd_degree, "escan": _cmd_escan, "fscan": _cmd_fscan,
             "bmo": _cmd_bmo, "vmodegree": _cmd_vmodegree, "cov": _cmd_cov, "energy": _cmd_energy,
             "scan": _cmd_scan}


def run(cfg):
    """Execute a parsed configuration; returns the exit code."""
    out = _Writer(cfg)
    try:
        code = _DISPATCH[cfg.command](cfg, out)
    except ConfigurationError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return 2
    except BrouwerkitError as exc:
        out.records.append({"kind": "error", "error": type(exc).__name__, "message": str(exc)})
        print("%s: %s" % (type(exc).__name__, exc))
        code = 1
    except OSError as exc:
        print("I/O error: %s" % exc, file=sys.stderr)
        return 3
    try:
        out.flush()
    except OSError as exc:
        print("I/O error: %s" % exc, file=sys.stderr)
        return 3
    return code


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except ConfigurationError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
