"""Command-line front end.

Exit codes: 0 success, 1 a checked assertion failed, 2 usage error, 3 a solver did
not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from . import experiments as ex
from .harmonic import ConvergenceError, DirichletProblem, SolverConfig, solve, write_csv, write_pgm
from .lattice import (
    ORIGIN,
    Box,
    DomainError,
    FramePolicy,
    Rect,
    Torus,
    build_diagonal,
    build_interval,
    parse_vertex,
)
from .lerw import AlphaPathSampler, chi_square_compare, exact_alpha1_distribution, path_counts, sample_lerw
from .probability import (
    HitQuery,
    avoidance_probability,
    certify_first_step,
    certify_ratio,
    hit_prob_bracket,
    hit_prob_exact,
)
from .render import scaling_figure, sweep_figure, trajectory_figure, trajectory_svg, write_svg
from .walk import format_alpha, make_rng, parse_alpha, run_walk

log = logging.getLogger("lapwalk")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def default_seed() -> int:
    env = os.environ.get("LW_SEED")
    if env is None or env == "":
        return ex.DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"LW_SEED must be an integer, got {env!r}")


def parse_domain(text: str):
    """``box:R``, ``box:R:free|zero|one`` or ``torus:n``."""
    parts = text.split(":")
    try:
        if parts[0] == "box" and len(parts) in (2, 3):
            frame = parts[2] if len(parts) == 3 else FramePolicy.ZERO
            return Box(ORIGIN, int(parts[1]), frame)
        if parts[0] == "torus" and len(parts) == 2:
            return Torus(int(parts[1]))
    except ValueError as err:
        raise UsageError(f"bad domain {text!r}: {err}")
    raise UsageError(f"bad domain {text!r}; expected box:R[:frame] or torus:n")


def parse_forbid(text: str):
    """``interval:x``, ``diag:R``, ``none`` or ``points:a,b;c,d``."""
    kind, _, arg = text.partition(":")
    try:
        if kind == "interval":
            return build_interval(int(arg))
        if kind == "diag":
            return build_diagonal(int(arg))
        if kind == "none":
            return frozenset()
        if kind == "points":
            return frozenset(parse_vertex(p) for p in arg.split(";") if p)
    except ValueError as err:
        raise UsageError(f"bad forbidden set {text!r}: {err}")
    raise UsageError(f"bad forbidden set {text!r}")


def _vertex(text: str):
    try:
        return parse_vertex(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err))


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def dump(obj) -> str:
    # json writes floats with repr, the shortest string that round-trips exactly.
    return json.dumps(obj)


def _emit(args, text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_walk_run(args) -> int:
    d = parse_domain(args.domain)
    cfg = SolverConfig(method=args.method)
    alpha = parse_alpha(args.alpha)
    traj = run_walk(args.start, args.target, d, alpha, cfg=cfg, seed=args.seed, horizon=args.horizon)
    record = traj.to_dict()
    text = dump(record)
    _emit(args, text)
    out = _out_dir(args)
    if out is not None:
        stamp = ex.timestamp()
        base = out / f"walk-{args.seed}-{stamp}"
        Path(f"{base}.json").write_text(text + "\n")
        field = ex.field_for(traj, d, d.canonical(args.target)) if args.heatmap else None
        svg = trajectory_svg(traj.vertices, d, d.canonical(args.target), field=field,
                             title=f"alpha={format_alpha(alpha)} seed={args.seed}")
        write_svg(svg, f"{base}.svg")
        Path(f"{base}.meta.json").write_text(dump({"timestamp": stamp}) + "\n")
        log.info("wrote %s.{json,svg}", base)
    return EXIT_OK


def cmd_prob_hit(args) -> int:
    forbidden = parse_forbid(args.forbid)
    q = HitQuery(args.start, args.target, forbidden, args.radius)
    bracket = hit_prob_bracket(q)
    record = {
        "query": {"start": list(q.start), "target": list(q.target), "forbid": args.forbid},
        "bracket": bracket.to_dict(),
        "R": args.radius,
        "tolerance": SolverConfig().rel_tolerance,
        "seed": args.seed,
    }
    if args.exact:
        record["plane"] = hit_prob_exact(q.start, q.target, forbidden)
    _emit(args, dump(record))
    return EXIT_OK


def cmd_prob_first_step(args) -> int:
    result = certify_first_step(args.target, args.radius)
    _emit(args, dump(result))
    return EXIT_OK if result["verdict"] == "certified" else EXIT_FAILED


def cmd_prob_ratio(args) -> int:
    result = certify_ratio(args.target, args.x, args.radius)
    _emit(args, dump(result))
    return EXIT_OK if result["certified"] else EXIT_FAILED


def cmd_prob_scaling(args) -> int:
    which = ["slit", "diag"] if args.which == "both" else [args.which]
    report = ex.scaling_report(which, args.r, args.tolerance)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["series", "r", "value"])
    for case in report.cases:
        for r, v in case["points"]:
            writer.writerow([case["series"], r, repr(float(v))])
    _emit(args, buf.getvalue())
    for case in report.cases:
        print(f"# {case['series']}: slope {case['slope']:.4f} (rms {case['rms']:.2e})", file=sys.stderr)
    out = _out_dir(args)
    if out is not None:
        stamp = ex.timestamp()
        echo = dump({"seed": report.seed, "config": report.config})
        (out / f"scaling-{report.seed}-{stamp}.csv").write_text(f"# {echo}\n" + buf.getvalue())
        scaling_figure(
            {c["series"]: c["points"] for c in report.cases},
            {c["series"]: (c["slope"], c["intercept"]) for c in report.cases},
            out / f"scaling-{report.seed}-{stamp}.png",
        )
        report.write(out, stamp)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_prob_avoid(args) -> int:
    p1 = avoidance_probability((1, 0), args.t, args.x)
    pi = avoidance_probability((0, 1), args.t, args.x)
    record = {"t": args.t, "x": args.x, "p_1": p1, "p_i": pi, "relative_gap": p1 / pi - 1.0}
    if args.exact:
        e1 = avoidance_probability((1, 0), args.t, args.x, exact=True)
        ei = avoidance_probability((0, 1), args.t, args.x, exact=True)
        record["exact"] = {"p_1": str(e1), "p_i": str(ei)}
    _emit(args, dump(record))
    return EXIT_OK if p1 > pi else EXIT_FAILED


def cmd_lerw_test(args) -> int:
    n = args.grid
    d = Rect.grid(n)
    s, w = (0, 0), (n - 1, n - 1)
    exact = exact_alpha1_distribution(s, w, d)
    rng = make_rng(args.seed, 1)
    observed = path_counts(sample_lerw(s, w, d, rng) for _ in range(args.samples))
    stat, p = chi_square_compare(observed, exact)
    control = AlphaPathSampler(s, w, d, 0.0)
    rng0 = make_rng(args.seed, 2)
    control_counts = path_counts(control.sample(rng0) for _ in range(args.samples))
    cstat, cp = chi_square_compare(control_counts, exact)
    passed = p > args.level and cp < args.level
    record = {
        "grid": n,
        "samples": args.samples,
        "seed": args.seed,
        "paths": len(exact.support),
        "deficit": exact.deficit,
        "lerw": {"statistic": stat, "p_value": p},
        "alpha0_control": {"statistic": cstat, "p_value": cp},
        "level": args.level,
        "passed": passed,
    }
    _emit(args, dump(record))
    out = _out_dir(args)
    if out is not None:
        exact.write_json(out / f"lerw-exact-{n}x{n}.json")
    return EXIT_OK if passed else EXIT_FAILED


def cmd_exp_theorem1(args) -> int:
    progress = (lambda msg: log.info(msg)) if args.verbose else None
    report = ex.theorem1_sweep(args.amax, args.bmin, args.rfactor, args.seed, args.threads, args.draws, progress)
    summary = {
        "empirical_C": report.config["empirical_C"],
        "thresholds": report.config["thresholds"],
        "assertions": report.assertions,
        "passed": report.passed,
    }
    _emit(args, dump(summary))
    out = _out_dir(args)
    if out is not None:
        stamp = ex.timestamp()
        report.write(out, stamp)
        rows = [c for c in report.cases if "straight" in c]
        with open(out / f"theorem1-{args.seed}-{stamp}.csv", "w", newline="") as fh:
            fh.write(f"# {dump({'seed': report.seed, 'config': report.config})}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["a", "b", "straight", "first_deviation", "termination"])
            for c in rows:
                writer.writerow([c["a"], c["b"], int(c["straight"]), c["first_deviation"] or "", c["termination"]])
        sweep_figure(rows, out / f"theorem1-{args.seed}-{stamp}.png")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_exp_torus(args) -> int:
    cfg = SolverConfig(method=args.method)
    traj, report = ex.torus_run(args.n, args.target, args.seed, cfg, args.out, cold_every=args.cold_every)
    case = dict(report.cases[0])
    case.pop("vertices")
    _emit(args, dump({"n": args.n, **case, "assertions": report.assertions, "passed": report.passed}))
    if args.out is not None:
        trajectory_figure(traj.vertices, args.n, Path(args.out) / f"torus-{args.seed}-{ex.timestamp()}.png")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_render_field(args) -> int:
    d = parse_domain(args.domain)
    forbidden = parse_forbid(args.forbid)
    p = DirichletProblem.hitting(d, args.target, [v for v in forbidden if v in d])
    f = solve(p, SolverConfig(method=args.method))
    out = _out_dir(args) or Path(".")
    stamp = ex.timestamp()
    echo = dump({"seed": args.seed, "target": list(p.domain.canonical(args.target)), "domain": args.domain,
                 "forbid": args.forbid, "solver": f.method})
    pgm = write_pgm(f, out / f"field-{args.seed}-{stamp}.pgm", echo)
    table = write_csv(f, out / f"field-{args.seed}-{stamp}.csv", echo)
    _emit(args, dump({"pgm": str(pgm), "csv": str(table), "residual": f.residual, "method": f.method}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default: $LW_SEED or a fixed constant)")
    common.add_argument("--out", default=None, help="output directory for files")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    common.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")

    parser = _Parser(prog="lapwalk", description="Laplacian random walks on Z^2 domains")
    sub = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    walk = sub.add_parser("walk").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = walk.add_parser("run", parents=[common], help="run one walk and write JSON + SVG")
    p.add_argument("--alpha", default="inf")
    p.add_argument("--start", type=_vertex, default=ORIGIN)
    p.add_argument("--target", type=_vertex, required=True)
    p.add_argument("--domain", default="box:60")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--method", choices=["auto", "direct", "iterative"], default="auto")
    p.add_argument("--heatmap", action="store_true", help="underlay the final field in the SVG")
    p.set_defaults(func=cmd_walk_run)

    prob = sub.add_parser("prob").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = prob.add_parser("hit", parents=[common], help="truncation bracket for a hitting probability")
    p.add_argument("--start", type=_vertex, required=True)
    p.add_argument("--target", type=_vertex, required=True)
    p.add_argument("--forbid", default="none")
    p.add_argument("--radius", type=int, default=64)
    p.add_argument("--exact", action="store_true", help="also report the exact plane value")
    p.set_defaults(func=cmd_prob_hit)

    p = prob.add_parser("first-step", parents=[common], help="certify the argmax first step towards a target")
    p.add_argument("--target", type=_vertex, required=True)
    p.add_argument("--radius", type=int, default=None, help="fixed radius (default: escalate up to 256)")
    p.set_defaults(func=cmd_prob_first_step)

    p = prob.add_parser("ratio", parents=[common], help="certify the 1 versus i hitting ratio against a slit")
    p.add_argument("--target", type=_vertex, required=True)
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--radius", type=int, default=None)
    p.set_defaults(func=cmd_prob_ratio)

    p = prob.add_parser("scaling", parents=[common], help="escape probabilities and log-log slopes")
    p.add_argument("--which", choices=["slit", "diag", "both"], default="both")
    p.add_argument("--r", type=_int_list, default=[8, 16, 32, 64, 128])
    p.add_argument("--tolerance", type=float, default=0.1)
    p.set_defaults(func=cmd_prob_scaling)

    p = prob.add_parser("avoid", parents=[common], help="exact slit-avoidance probabilities from 1 and i")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--exact", action="store_true", help="also run the rational recursion")
    p.set_defaults(func=cmd_prob_avoid)

    lerw = sub.add_parser("lerw").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = lerw.add_parser("test", parents=[common], help="LERW versus exact alpha=1 law on a grid")
    p.add_argument("--grid", type=int, default=3)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--level", type=float, default=1e-3)
    p.set_defaults(func=cmd_lerw_test)

    exp = sub.add_parser("exp").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = exp.add_parser("theorem1", parents=[common], help="straight-path sweep")
    p.add_argument("--amax", type=int, default=25)
    p.add_argument("--bmin", type=int, default=3)
    p.add_argument("--rfactor", type=int, default=4)
    p.add_argument("--draws", type=int, default=10_000)
    p.set_defaults(func=cmd_exp_theorem1)

    p = exp.add_parser("torus", parents=[common], help="infinity-path on a torus")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--target", type=_vertex, default=None, help="default: the antipode")
    p.add_argument("--method", choices=["auto", "direct", "iterative"], default="auto")
    p.add_argument("--cold-every", type=int, default=0, help="compare against cold solves every k steps")
    p.set_defaults(func=cmd_exp_torus)

    render = sub.add_parser("render").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = render.add_parser("field", parents=[common], help="write a hitting field as PGM + CSV")
    p.add_argument("--target", type=_vertex, required=True)
    p.add_argument("--domain", default="box:32")
    p.add_argument("--forbid", default="interval:4")
    p.add_argument("--method", choices=["auto", "direct", "iterative"], default="auto")
    p.set_defaults(func=cmd_render_field)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.seed is None:
            args.seed = default_seed()
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                            format="%(message)s")
        return args.func(args)
    except UsageError as err:
        print(f"lapwalk: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as err:
        print(f"lapwalk: solver did not converge: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, DomainError) as err:
        print(f"lapwalk: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
