"""Command line entry point ``holonomy-lab``.

Subcommands read JSON configs and print or write results; the exit status
is 0 when every pass flag is true, 1 when some check fails and 2 for usage
or config errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bundles import BundlePoint, curve_points, manifold_from_descriptor, sasaki_distance
from .errors import DomainError, MalformedInputError, ToleranceError
from .experiments import SCENARIOS, ScenarioConfig, run_scenario
from .holonomic import (
    HolonomicSequence, HolonomicSpace, holonomic_distance, wane_group_closure, wane_set_estimate,
)
from .io import dump_json, load_json, write_text
from .metric_core import Correspondence, SemiMetricSample, correspondence_distortion
from .quotients import group_from_descriptor, quotient_sample

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _vector(values, name):
    if values is None:
        raise MalformedInputError(f"missing vector {name}")
    return np.asarray(values, dtype=float)


def _emit(result: dict, out: str | None, filename: str):
    text = dump_json(result)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_text(Path(out) / filename, text)
    print(text, end="")


def cmd_holonomic_dist(args) -> int:
    cfg = load_json(args.config)
    space = HolonomicSpace.from_dict(cfg["space"] if "space" in cfg else cfg)
    u = _vector(args.u if args.u is not None else cfg.get("u"), "u")
    v = _vector(args.v if args.v is not None else cfg.get("v"), "v")
    d = holonomic_distance(space, u, v)
    _emit({"distance": d.value, "element": d.element, "norm_value": d.norm_value}, args.out,
          "holonomic_dist.json")
    return EXIT_OK


def _bundle_point(d, name) -> BundlePoint:
    try:
        return BundlePoint(np.asarray(d["base"], dtype=float), np.asarray(d["fiber"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise MalformedInputError(f"bundle point {name} needs base and fiber: {exc}") from None


def cmd_sasaki_dist(args) -> int:
    cfg = load_json(args.config)
    if "manifold" not in cfg:
        raise MalformedInputError("config needs a manifold descriptor")
    M = manifold_from_descriptor(cfg["manifold"])
    u, v = _bundle_point(cfg.get("u", {}), "u"), _bundle_point(cfg.get("v", {}), "v")
    r = sasaki_distance(M, u, v)
    result = {"distance": r.value, "exact": r.exact, "lower_bound": r.lower, "family": r.family}
    if args.out:
        geo = M.geodesic(u.base, v.base)
        pts = curve_points(M, geo)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_text(Path(args.out) / "curves.csv",
                   "\n".join(",".join(repr(float(x)) for x in row) for row in pts) + "\n")
    _emit(result, args.out, "sasaki_dist.json")
    return EXIT_OK


def cmd_gh_bound(args) -> int:
    X = SemiMetricSample.from_dict(load_json(args.x))
    Y = SemiMetricSample.from_dict(load_json(args.y))
    if args.correspondence in (None, "identity"):
        if X.n != Y.n:
            raise MalformedInputError("identity correspondence needs equal sizes")
        R = Correspondence.identity(X.n)
    else:
        pairs = load_json(args.correspondence)
        R = Correspondence(frozenset(tuple(p) for p in pairs.get("pairs", pairs)), X.n, Y.n)
    b = correspondence_distortion(X, Y, R)
    _emit({"distortion": b.distortion, "gh_upper": b.gh_upper}, args.out, "gh_bound.json")
    return EXIT_OK


def cmd_quotient(args) -> int:
    cfg = load_json(args.config)
    G = group_from_descriptor(cfg["group"])
    n = int(args.samples or cfg.get("n", 8))
    q = quotient_sample(G, float(cfg.get("R", 1.0)), n, kind=cfg.get("kind"))
    result = {"group": G.name, "n_classes": q.space.n, "classes": q.classes, "sample": q.space.to_dict()}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_text(Path(args.out) / "quotient.csv", q.space.to_csv())
    _emit(result, args.out, "quotient.json")
    return EXIT_OK


def cmd_wane(args) -> int:
    cfg = load_json(args.config)
    space = HolonomicSpace.from_dict(cfg["space"])
    kind = cfg.get("sequence", "rescaled")
    if kind == "rescaled":
        seq = HolonomicSequence.rescaled(space)
    elif kind == "constant":
        seq = HolonomicSequence.constant(space)
    else:
        raise MalformedInputError(f"unknown sequence kind {kind!r}")
    i_max = int(args.i_max or cfg.get("i_max", 200))
    est = wane_set_estimate(seq, float(cfg.get("threshold", 0.05)), i_max)
    c = wane_group_closure(est, tol=float(args.tol or cfg.get("tol", 1e-3)))
    result = {"label": c.label, "residual": c.residual, "unclassified": c.unclassified,
              "n_wane_elements": len(est), "n_closed_elements": len(c.elements),
              "note": "wane set approximated by min over i <= i_max of L_i <= threshold"}
    if c.unclassified:
        result["generators"] = c.elements
    _emit(result, args.out, "wane.json")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = load_json(args.config) if args.config else {}
    cfg = dict(cfg)
    cfg["name"] = args.name
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.i_max is not None:
        cfg["i_max"] = args.i_max
    if args.samples is not None:
        cfg["n_fiber"] = args.samples
    if args.tol is not None:
        cfg["tol"] = args.tol
    result = run_scenario(ScenarioConfig.from_dict(cfg))
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_text(out / "rows.csv", result.csv())
    dump_json({"passed": result.passed, **result.report}, out / "report.json")
    print(result.csv(), end="")
    print(f"{args.name}: {'pass' if result.passed else 'FAIL'}")
    return EXIT_OK if result.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="holonomy-lab", description="holonomic metrics and collapsing bundles")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None, help="seed for all random draws")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--i-max", dest="i_max", type=int, default=None)
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)

    sp = sub.add_parser("holonomic-dist", help="holonomic distance d_L(u, v)")
    common(sp)
    sp.add_argument("--u", type=float, nargs="+")
    sp.add_argument("--v", type=float, nargs="+")
    sp.set_defaults(func=cmd_holonomic_dist)

    sp = sub.add_parser("sasaki-dist", help="Sasaki-type distance between bundle points")
    common(sp)
    sp.set_defaults(func=cmd_sasaki_dist)

    sp = sub.add_parser("gh-bound", help="GH upper bound of a correspondence between two samples")
    sp.add_argument("x")
    sp.add_argument("y")
    sp.add_argument("--correspondence", default=None, help="'identity' or JSON with a pair list")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_gh_bound)

    sp = sub.add_parser("quotient", help="orbit-space sample R^k / G")
    common(sp)
    sp.set_defaults(func=cmd_quotient)

    sp = sub.add_parser("wane", help="wane-set estimate and group classification")
    common(sp)
    sp.set_defaults(func=cmd_wane)

    sp = sub.add_parser("experiment", help="run a scenario and write rows.csv and report.json")
    sp.add_argument("name", choices=SCENARIOS)
    common(sp, config_required=False)
    sp.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MalformedInputError, KeyError) as exc:
        print(f"holonomy-lab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ToleranceError) as exc:
        print(f"holonomy-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
