"""Command-line front end.

    maist analyze CONFIG          refinement loop, JSON report + table
    maist simulate CONFIG         sampled trajectories as CSV
    maist abstract CONFIG -l L    dump S_L as JSON
    maist verify-cycle CONFIG -c 1,2,2
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .abstraction import AbstractionError, build
from .config import ConfigError, load
from .cycles import max_mean_cycle, min_mean_cycle
from .driver import DriverOptions, MaistReport, Status, run
from .feasibility import SolverError
from .petc_model import ModelError
from .sim_oracle import empirical_aist, pattern_detect, simulate, write_trace
from .verifier import certify_cycle

log = logging.getLogger("maist")

EXIT_OK = 0
EXIT_REFUSED = 1
EXIT_ERROR = 2


def format_table(rows: list) -> str:
    """Fixed-width table with one line per trigger."""
    head = f"{'trigger':<14}{'l':>5}  {'MAIST / bounds':<26}{'status':<12}{'wall [s]':>9}"
    lines = [head, "-" * len(head)]
    for tid, rep in rows:
        if rep.status is Status.CERTIFIED:
            val = f"{rep.maist:.6g} ({rep.mean}h)"
        else:
            val = f"[{rep.lower_bound:.4f}, {rep.upper_bound:.4f}]"
        lines.append(f"{tid:<14}{rep.final_l:>5}  {val:<26}{rep.status.value:<12}{rep.wall_time:>9.2f}")
    return "\n".join(lines)


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text)


def _options(cfg, args) -> DriverOptions:
    import dataclasses

    opts = cfg.driver_options()
    if getattr(args, "l_max", None):
        opts = dataclasses.replace(opts, l_max=args.l_max)
    if getattr(args, "backend", None):
        opts = dataclasses.replace(opts, check=dataclasses.replace(opts.check, backend=args.backend))
    return opts


def cmd_analyze(args) -> int:
    cfg = load(args.config)
    opts = _options(cfg, args)
    systems = cfg.systems if args.trigger is None else [cfg.select(args.trigger)]
    rows = []
    for tid, system in systems:
        log.info("analyzing %s", tid)
        rows.append((tid, run(system, opts)))
    settings = copy.deepcopy(cfg.settings())
    settings["analysis"]["l_max"] = opts.l_max
    settings["feasibility"]["backend"] = str(getattr(opts.check.backend, "value", opts.check.backend))
    report = {"name": cfg.name, "settings": settings,
              "runs": [{"trigger": tid, "report": rep.to_dict()} for tid, rep in rows]}
    report_path = args.report or cfg.raw["output"]["report"]
    if report_path:
        Path(report_path).write_text(json.dumps(report, indent=2))
    table = format_table(rows)
    print(table)
    if cfg.raw["output"]["table"]:
        Path(cfg.raw["output"]["table"]).write_text(table + "\n")
    if args.json:
        print(json.dumps(report, indent=2))
    return EXIT_OK


def _parse_vector(text: str, n: int) -> np.ndarray:
    vals = [float(v) for v in text.replace(" ", "").split(",") if v]
    if len(vals) != n:
        raise ConfigError(f"expected {n} comma-separated entries, got {text!r}")
    return np.array(vals)


def cmd_simulate(args) -> int:
    cfg = load(args.config)
    tid, system = cfg.select(args.trigger)
    x0 = _parse_vector(args.x0, system.n_x)
    traj = simulate(system, x0, args.steps)
    out = args.csv or cfg.raw["output"]["trace_csv"]
    if out in (None, "-"):
        write_trace(system, traj, sys.stdout)
    else:
        with open(out, "w", newline="") as fh:
            write_trace(system, traj, fh)
    pat = pattern_detect(traj) if args.steps >= 4 else None
    print(f"# {tid}: empirical AIST {empirical_aist(system, x0, args.steps):.6g}, "
          f"pattern {pat if pat else 'none'}", file=sys.stderr)
    return EXIT_OK


def cmd_abstract(args) -> int:
    cfg = load(args.config)
    tid, system = cfg.select(args.trigger)
    opts = _options(cfg, args)
    model = build(system, args.l, opts.check, opts.budget)
    out = args.out or cfg.raw["output"]["abstraction"]
    _write(out if out else "-", model.dumps())
    lo, hi = min_mean_cycle(model), max_mean_cycle(model)
    print(f"# {tid}: l={model.l} states={len(model.states)} edges={len(model.edges)} "
          f"min mean {lo.mean} {lo.symbols} max mean {hi.mean}", file=sys.stderr)
    return EXIT_OK


def cmd_verify_cycle(args) -> int:
    cfg = load(args.config)
    tid, system = cfg.select(args.trigger)
    opts = cfg.driver_options()
    cycle = tuple(int(v) for v in args.cycle.replace(" ", "").split(",") if v)
    if not cycle:
        raise ConfigError("cycle: empty")
    for k in cycle:
        system.check_symbol(k)
    out = certify_cycle(system, cycle, opts.psd_tol, opts.eig_tol)
    if out.certificate is not None:
        c = out.certificate
        print(json.dumps({"trigger": tid, "result": "certified", "cycle": list(c.cycle),
                          "basis": c.subspace.basis.tolist(),
                          "stage_margins": list(c.stage_margins)}, indent=2))
        return EXIT_OK
    print(json.dumps({"trigger": tid, "result": "refused", "cycle": list(cycle),
                      "assumption_violated": out.assumption_violated,
                      "reasons": sorted({r.reason for r in out.refusals})}, indent=2))
    return EXIT_REFUSED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maist", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="YAML/JSON configuration file")
        sp.add_argument("--trigger", help="trigger id (e.g. 0.5 or sigma=0.5, Q, raw)")

    a = sub.add_parser("analyze", help="compute or bracket the MAIST")
    common(a)
    a.add_argument("--report", help="report JSON path")
    a.add_argument("--l-max", type=int, dest="l_max")
    a.add_argument("--backend", choices=["auto", "angle_sweep", "sphere_sampling", "smtlib"])
    a.add_argument("--json", action="store_true", help="also print the report JSON")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="simulate sampled trajectories")
    common(s)
    s.add_argument("--x0", required=True, help="initial state, comma separated")
    s.add_argument("--steps", type=int, default=1000)
    s.add_argument("--csv", help="CSV output path (default stdout)")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("abstract", help="build and dump S_l")
    common(b)
    b.add_argument("-l", type=int, required=True)
    b.add_argument("--out", help="JSON output path (default stdout)")
    b.add_argument("--backend", choices=["auto", "angle_sweep", "sphere_sampling", "smtlib"])
    b.set_defaults(func=cmd_abstract)

    v = sub.add_parser("verify-cycle", help="certify a given cycle")
    common(v)
    v.add_argument("-c", "--cycle", required=True, help="inter-sample pattern, e.g. 1,2,2")
    v.set_defaults(func=cmd_verify_cycle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ModelError, AbstractionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
