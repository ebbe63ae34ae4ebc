"""Command-line interface.

Subcommands mirror the two workflows: `pendulum ...` drives the forced
pendulum (orbits, Newton cycles, rotation numbers, band charts) and
`annulus ...` drives the twist-map machinery (hypothesis checks, invariant
curves, fixed points, witness paths, the excision audit). Reports go to
stdout as schema-validated JSON; bulk data and figures are written to the
output directory.

Exit codes: 0 success, 2 hypotheses not satisfied / witness produced,
1 internal error.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .cycles import (PendulumParams, band_seed_grid, build_annulus_chart,
                     find_band_cycles, find_center, rotation_number)
from .errors import TheoremViolationWitness, TwistfpError
from .fixedpoints import audit_with_shrinking, find_all_fixed_points
from .maps import check_hypotheses, make_map
from .paths import criticals_for, find_closed_loop, measure_verdict
from .pendulum import iterate_orbit
from .reports import (dumps_report, write_chart_csv, write_components_csv,
                      write_orbit_csv)
from .svg import SvgScene, emit_svg, scene_invariant_curves
from .zeroset import extract_components, sample_F, t_conjugate

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_HYPOTHESES = 2


def _outdir(args):
    d = args.out or os.environ.get("TWISTFP_OUT", ".")
    os.makedirs(d, exist_ok=True)
    return d


def _parse_point(text):
    x, y = (float(t) for t in text.split(","))
    return (x, y)


def _emit(kind, payload):
    sys.stdout.write(dumps_report(kind, payload))


# ---------------------------------------------------------------------------
# pendulum subcommands
# ---------------------------------------------------------------------------

def cmd_pendulum_orbits(args):
    params = PendulumParams(a=args.a)
    out = _outdir(args)
    seeds = [_parse_point(s) for s in args.seeds.split(";")]
    window = (-np.pi, np.pi, -2.4, 2.4)
    scene = SvgScene(window=window)
    paths = []
    for i, seed in enumerate(seeds):
        orbit = iterate_orbit(seed, args.iters, params, tol=args.tol)
        path = os.path.join(out, f"orbit_{i}.csv")
        write_orbit_csv(orbit, path)
        paths.append(path)
        pts = [seed] + orbit.iterates
        scene.add_polyline(pts, "aux")
        scene.add_points(pts, "point", radius=2.5)
    svg_path = os.path.join(out, "orbits.svg")
    emit_svg(scene, svg_path)
    _emit("orbit", {"a": args.a, "iters": args.iters,
                    "seeds": [[s[0], s[1]] for s in seeds],
                    "csv": paths, "svg": svg_path})
    return EXIT_OK


def cmd_pendulum_newton(args):
    params = PendulumParams(a=args.a)
    n_theta, n_radial = (int(t) for t in args.grid.split("x"))
    chart = build_annulus_chart(_parse_point(args.inner),
                                _parse_point(args.outer), params,
                                n_iter=args.chart_iters, tol=args.tol)
    seeds = band_seed_grid(chart, n_theta, n_radial)
    cycles = find_band_cycles(seeds, args.period, params, tol=args.tol)
    _emit("cycles", {"a": args.a, "period": args.period,
                     "n_seeds": len(seeds),
                     "cycles": [c.to_dict() for c in cycles]})
    return EXIT_OK


def cmd_pendulum_rotation(args):
    params = PendulumParams(a=args.a)
    if args.center:
        center = _parse_point(args.center)
    else:
        center = find_center(params, tol=args.tol).points[0]
    est = rotation_number(_parse_point(args.seed), center, args.iters, params,
                          tol=args.tol)
    _emit("rotation", {"a": args.a, "seed": list(_parse_point(args.seed)),
                       "value": est.value, "iterates_used": est.iterates_used,
                       "center": [est.center[0], est.center[1]],
                       "uncertainty": est.uncertainty})
    return EXIT_OK


def cmd_pendulum_chart(args):
    params = PendulumParams(a=args.a)
    chart = build_annulus_chart(_parse_point(args.inner),
                                _parse_point(args.outer), params,
                                m=args.samples, n_iter=args.iters,
                                tol=args.tol)
    out = _outdir(args)
    path = os.path.join(out, "chart.csv")
    write_chart_csv(chart, path)
    _emit("chart", {"a": args.a, "center": [chart.center[0], chart.center[1]],
                    "samples": args.samples, "csv": path})
    return EXIT_OK


# ---------------------------------------------------------------------------
# annulus subcommands
# ---------------------------------------------------------------------------

def cmd_annulus_check(args):
    m = make_map(args.map)
    rep = check_hypotheses(m, n_samples=args.samples)
    _emit("hypotheses", rep.to_dict())
    return EXIT_OK if (rep.twist_ok and rep.measure_ok) else EXIT_HYPOTHESES


def cmd_annulus_curves(args):
    m = make_map(args.map)
    nx, ny = (int(t) for t in args.grid.split("x"))
    inv = extract_components(sample_F(m, args.phi, nx, ny))
    out = _outdir(args)
    csv_path = os.path.join(out, "components.csv")
    write_components_csv(inv, csv_path)
    svg_path = os.path.join(out, "invariant_curves.svg")
    emit_svg(scene_invariant_curves(inv, m), svg_path)
    payload = inv.summary()
    payload.update({"csv": csv_path, "svg": svg_path, "map": m.spec()})
    _emit("invariant-set", payload)
    return EXIT_OK


def cmd_annulus_fixed_points(args):
    m = make_map(args.map)
    nx, ny = (int(t) for t in args.grid.split("x"))
    try:
        res = find_all_fixed_points(m, phi=args.phi, resolution=(nx, ny))
    except TheoremViolationWitness as exc:
        _emit("witness", {"map": m.spec(),
                          "difference": exc.verdict.difference,
                          "winding": exc.loop.winding,
                          "area_inside_C": exc.verdict.area_inside_C,
                          "area_inside_fC": exc.verdict.area_inside_fC})
        return EXIT_HYPOTHESES
    payload = res.to_dict()
    payload["map"] = m.spec()
    _emit("fixed-points", payload)
    return EXIT_OK


def cmd_annulus_path(args):
    m = make_map(args.map)
    nx, ny = (int(t) for t in args.grid.split("x"))
    g = t_conjugate(m, args.phi)
    inv = extract_components(sample_F(g, args.phi, nx, ny, mode="fiber"))
    crits, bare = criticals_for(inv)
    loop = find_closed_loop(inv, crits, bare)
    verdict = measure_verdict(loop, g)
    out = _outdir(args)
    scene = scene_invariant_curves(inv, g)
    poly = loop.polyline()
    scene.add_polyline([(x % 1.0, y) for x, y in poly], "path")
    img = [g.eval(x % 1.0, y) for x, y in poly[:: max(1, len(poly) // 512)]]
    scene.add_polyline(img, "path-image")
    svg_path = os.path.join(out, "path.svg")
    emit_svg(scene, svg_path)
    payload = loop.to_dict()
    payload.update({"map": m.spec(), "svg": svg_path,
                    "measure_difference": verdict.difference})
    _emit("path", payload)
    return EXIT_OK if abs(verdict.difference) <= 1e-9 else EXIT_HYPOTHESES


def cmd_annulus_audit(args):
    m = make_map(args.map)
    center = _parse_point(args.center)
    audits = audit_with_shrinking(m, args.phi, center, args.epsilon,
                                  max_halvings=args.max_halvings)
    final = audits[-1]
    payload = final.to_dict()
    payload["map"] = m.spec()
    payload["halvings_used"] = len(audits) - 1
    payload["trajectory"] = [a.to_dict() for a in audits]
    _emit("audit", payload)
    return EXIT_OK if final.verdict else EXIT_HYPOTHESES


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="twistfp",
                                description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"twistfp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    pend = sub.add_parser("pendulum", help="forced pendulum workflows")
    psub = pend.add_subparsers(dest="subcommand", required=True)

    sp = psub.add_parser("orbits", help="iterate seeds under the period map")
    sp.add_argument("--a", type=float, default=0.1)
    sp.add_argument("--seeds", default="1,0;1.3,0")
    sp.add_argument("--iters", type=int, default=6)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_pendulum_orbits)

    sp = psub.add_parser("newton", help="hunt period-n cycles in the band")
    sp.add_argument("--a", type=float, default=0.1)
    sp.add_argument("--period", type=int, default=6)
    sp.add_argument("--grid", default="40x10")
    sp.add_argument("--inner", default="1,0")
    sp.add_argument("--outer", default="1.3,0")
    sp.add_argument("--chart-iters", type=int, default=600)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.set_defaults(func=cmd_pendulum_newton)

    sp = psub.add_parser("rotation", help="rotation number about the center")
    sp.add_argument("--a", type=float, default=0.1)
    sp.add_argument("--seed", default="1,0")
    sp.add_argument("--iters", type=int, default=600)
    sp.add_argument("--center", default=None)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.set_defaults(func=cmd_pendulum_rotation)

    sp = psub.add_parser("chart", help="band chart radius profiles")
    sp.add_argument("--a", type=float, default=0.1)
    sp.add_argument("--inner", default="1,0")
    sp.add_argument("--outer", default="1.3,0")
    sp.add_argument("--samples", type=int, default=512)
    sp.add_argument("--iters", type=int, default=600)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_pendulum_chart)

    ann = sub.add_parser("annulus", help="twist-map workflows")
    asub = ann.add_subparsers(dest="subcommand", required=True)

    sp = asub.add_parser("check", help="twist + integral-invariant checks")
    sp.add_argument("--map", required=True, help='JSON, e.g. {"name":"shear"}')
    sp.add_argument("--samples", type=int, default=64)
    sp.set_defaults(func=cmd_annulus_check)

    sp = asub.add_parser("invariant-curves", help="extract the zero set")
    sp.add_argument("--map", required=True)
    sp.add_argument("--phi", type=float, default=1.0)
    sp.add_argument("--grid", default="256x128")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_annulus_curves)

    sp = asub.add_parser("fixed-points", help="full fixed-point pipeline")
    sp.add_argument("--map", required=True)
    sp.add_argument("--phi", type=float, default=1.0)
    sp.add_argument("--grid", default="256x128")
    sp.set_defaults(func=cmd_annulus_fixed_points)

    sp = asub.add_parser("path", help="witness loop and measure verdict")
    sp.add_argument("--map", required=True)
    sp.add_argument("--phi", type=float, default=1.0)
    sp.add_argument("--grid", default="512x128")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_annulus_path)

    sp = asub.add_parser("audit", help="ball-excision second-fixed-point audit")
    sp.add_argument("--map", required=True)
    sp.add_argument("--phi", type=float, default=1.0)
    sp.add_argument("--center", required=True, help="x,y of the known fixed point")
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--max-halvings", type=int, default=6)
    sp.set_defaults(func=cmd_annulus_audit)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TwistfpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESES if isinstance(exc, TheoremViolationWitness) \
            else EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
