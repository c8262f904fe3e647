"""Command-line front end: generate, eval, scenario runs, oracle check.

Surface files come in two formats. ``surface-table`` is the
plot-tool mesh style: whitespace-separated ``r l p`` (or ``r q p``)
columns, rows grouped into blocks of constant r with one blank line
between blocks, floats rendered with 6 significant digits. ``csv`` adds
the sampling columns: ``r,l,p,stderr,rse,n``. With ``--baseline`` the
no-sharing reference surface is appended as a separate section.

Exit codes: 0 success, 1 runtime failure (bad file, impossible
parameters), 2 flag errors. The thread budget comes from --threads,
else the PONSHARE_THREADS environment variable, else 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, _kernels
from .allocation import CapacityConfig, calculate_performance
from .experiment import (
    DEFAULT_L_GRID,
    DEFAULT_Q_GRID,
    DEFAULT_R_GRID,
    ScenarioConfig,
    ScenarioResult,
    run_scenario,
    summarize,
)
from .topology import (
    FixedStages,
    GenParams,
    RandomActive,
    generate_pon,
    parse_pon,
    reassign_ic,
    serialize_pon,
)
from .verification import oracle_check

_THREADS_ENV = "PONSHARE_THREADS"


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _grid(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}")
    if not values:
        raise argparse.ArgumentTypeError("grid must contain at least one value")
    return values


def _r_override(text: str):
    if text.strip().lower() == "none":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'none' or a probability")
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("override probability must lie in [0, 1]")
    return value


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get(_THREADS_ENV, "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{_THREADS_ENV} must be an integer, got {env!r}")
    return 1


def _capacities(args) -> CapacityConfig:
    return CapacityConfig(c_down=args.c_down, c_up=args.c_up, c_ic=args.c_ic)


def _add_capacity_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c-down", type=float, default=10.0, help="downstream Gb/s per fiber")
    p.add_argument("--c-up", type=float, default=2.5, help="upstream Gb/s per fiber")
    p.add_argument("--c-ic", type=float, default=2.5, help="external ingress Gb/s per IC ONU")


def _format_surface_table(result: ScenarioResult, baseline: bool) -> str:
    label = result.config.second_label
    lines = [f"# columns: r {label} p"]
    last_r = None
    for p in result.points:
        if last_r is not None and p.r != last_r:
            lines.append("")
        last_r = p.r
        lines.append(f"{_fmt(p.r)} {_fmt(p.second)} {_fmt(p.stats.mean)}")
    if baseline:
        lines.append("")
        lines.append("")
        lines.append("# no-sharing baseline")
        last_r = None
        for p in result.baseline:
            if last_r is not None and p.r != last_r:
                lines.append("")
            last_r = p.r
            lines.append(f"{_fmt(p.r)} {_fmt(p.second)} {_fmt(p.stats.mean)}")
    return "\n".join(lines) + "\n"


def _format_csv(result: ScenarioResult, baseline: bool) -> str:
    label = result.config.second_label
    lines = [f"r,{label},p,stderr,rse,n"]
    rows = list(result.points) + (list(result.baseline) if baseline else [])
    for p in rows:
        lines.append(
            f"{_fmt(p.r)},{_fmt(p.second)},{_fmt(p.stats.mean)},"
            f"{_fmt(p.stats.stderr)},{_fmt(p.stats.rse)},{p.stats.n}"
        )
    return "\n".join(lines) + "\n"


def _write_output(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_generate(args) -> int:
    if args.policy == "fixed":
        policy = FixedStages(frozenset(int(s) for s in args.active_stages.split(",")))
    else:
        policy = RandomActive(q=args.q)
    pon = generate_pon(
        GenParams(g=args.g, s=args.s, rn_policy=policy, ic_prob=args.r, seed=args.seed)
    )
    _write_output(serialize_pon(pon), args.out)
    print(
        f"generated PON: {pon.n_nodes} nodes, {pon.num_onus} ONUs, {pon.num_rns} RNs",
        file=sys.stderr,
    )
    return 0


def _cmd_eval(args) -> int:
    with open(args.pon, "r", encoding="utf-8") as fh:
        pon = parse_pon(fh.read())
    if args.r_override is not None:
        pon = reassign_ic(pon, args.r_override, args.seed)
    report = calculate_performance(
        pon, args.l, _capacities(args), include_ic=not args.no_sharing
    )
    print(f"N {pon.num_onus}")
    print(f"R {pon.num_rns}")
    print(f"p {report.performance:.12g}")
    if args.per_onu:
        for onu_id, ratio in zip(report.onu_ids, report.ratios):
            print(f"onu {int(onu_id)} {float(ratio):.12g}")
    return 0


def _scenario_config(args, scenario: int) -> ScenarioConfig:
    kwargs = dict(
        scenario=scenario,
        g=args.g,
        s=args.s,
        capacities=_capacities(args),
        r_values=args.r_grid,
        sample_size=args.samples,
        rse_target=args.rse_target,
        master_seed=args.seed,
        threads=_resolve_threads(args),
        adaptive=args.adaptive,
        max_samples=args.max_samples,
    )
    if scenario == 1:
        kwargs["l_values"] = args.l_grid
    else:
        kwargs["q_values"] = args.q_grid
        kwargs["load"] = args.l
    return ScenarioConfig(**kwargs)


def _run_scenario_cmd(args, scenario: int) -> int:
    config = _scenario_config(args, scenario)
    result = run_scenario(config)
    text = (
        _format_csv(result, args.baseline)
        if args.format == "csv"
        else _format_surface_table(result, args.baseline)
    )
    _write_output(text, args.out)
    report = summarize(result)
    if args.out and args.out != "-":
        sidecar = {
            "scenario": scenario,
            "seed": config.master_seed,
            "samples_per_point": config.sample_size,
            "points": report.n_points,
            "total_samples": report.total_samples,
            "max_rse": report.max_rse,
            "rse_target": config.rse_target,
            "flagged_points": [list(f) for f in report.flagged],
            "regenerated": report.regenerated,
            "wall_time_s": report.wall_time_s,
            "threads": config.threads,
            "backend": _kernels.BACKEND,
            "baseline_included": bool(args.baseline),
            "format": args.format,
            "versions": {
                "ponshare": __version__,
                "numpy": np.__version__,
                "python": sys.version.split()[0],
            },
        }
        with open(args.out + ".report.json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2)
            fh.write("\n")
    print(
        f"scenario {scenario}: {report.n_points} points, max rse {report.max_rse:.4g}, "
        f"{len(report.flagged)} above target, {report.wall_time_s:.1f}s",
        file=sys.stderr,
    )
    return 0


def _cmd_oracle_check(args) -> int:
    t0 = time.perf_counter()
    report = oracle_check(instances=args.count, seed=args.seed)
    dt = time.perf_counter() - t0
    if report.ok:
        print(f"oracle check: {report.instances} instances agree ({dt:.1f}s)")
        return 0
    print(
        f"oracle check FAILED: {len(report.mismatches)} mismatches", file=sys.stderr
    )
    for line in report.mismatches[:10]:
        print(f"  {line}", file=sys.stderr)
    return 1


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ponshare",
        description="PON sharing performance simulator",
    )
    parser.add_argument("--version", action="version", version=f"ponshare {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate one random PON file")
    gen.add_argument("--g", type=int, default=32, help="splitter fan-out")
    gen.add_argument("--s", type=float, default=0.3, help="branch probability per output")
    gen.add_argument("--r", type=float, default=0.0, help="probability an ONU has the IC feed")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--policy", choices=("fixed", "random"), default="fixed")
    gen.add_argument("--active-stages", default="2", help="stages with active RNs (fixed policy)")
    gen.add_argument("--q", type=float, default=0.0, help="active probability (random policy)")
    gen.add_argument("-o", "--out", default=None, help="output file (default stdout)")
    gen.set_defaults(func=_cmd_generate)

    ev = sub.add_parser("eval", help="evaluate the performance of a PON file")
    ev.add_argument("--pon", required=True, help="PON file to evaluate")
    ev.add_argument("--l", type=float, required=True, help="offered load (1 = full load)")
    ev.add_argument(
        "--r-override",
        type=_r_override,
        default=None,
        metavar="none|PROB",
        help="redraw each ONU's IC feed with this probability ('none' keeps the file)",
    )
    ev.add_argument("--seed", type=int, default=0, help="seed for --r-override redraws")
    ev.add_argument("--per-onu", action="store_true", help="also print per-ONU ratios")
    ev.add_argument("--no-sharing", action="store_true", help="ignore IC alternatives")
    _add_capacity_flags(ev)
    ev.set_defaults(func=_cmd_eval)

    for scenario in (1, 2):
        sc = sub.add_parser(
            f"scenario{scenario}",
            help=(
                "sweep IC probability x load"
                if scenario == 1
                else "sweep IC probability x active-RN probability at fixed load"
            ),
        )
        sc.add_argument("--g", type=int, default=32)
        sc.add_argument("--s", type=float, default=0.3)
        sc.add_argument("--samples", type=int, default=300, help="PONs per population")
        sc.add_argument("--seed", type=int, default=0)
        sc.add_argument("--threads", type=int, default=None)
        sc.add_argument("--r-grid", type=_grid, default=DEFAULT_R_GRID)
        if scenario == 1:
            sc.add_argument("--l-grid", type=_grid, default=DEFAULT_L_GRID)
        else:
            sc.add_argument("--q-grid", type=_grid, default=DEFAULT_Q_GRID)
            sc.add_argument("--l", type=float, default=2.0, help="offered load")
        sc.add_argument("--rse-target", type=float, default=0.01)
        sc.add_argument("--adaptive", action="store_true", help="sample until the rse target")
        sc.add_argument("--max-samples", type=int, default=None)
        sc.add_argument("--baseline", action="store_true", help="append the no-sharing surface")
        sc.add_argument("--format", choices=("surface-table", "csv"), default="surface-table")
        sc.add_argument("-o", "--out", default=None, help="output file (default stdout)")
        _add_capacity_flags(sc)
        sc.set_defaults(func=lambda a, n=scenario: _run_scenario_cmd(a, n))

    oc = sub.add_parser("oracle-check", help="certify against the brute-force oracles")
    oc.add_argument("--count", type=int, default=1000, help="random small instances")
    oc.add_argument("--seed", type=int, default=0)
    oc.set_defaults(func=_cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # runtime failures exit 1 with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
