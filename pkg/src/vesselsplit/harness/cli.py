"""Command line interface.

Subcommands write CSV files into ``--out``; with ``--figures`` the matching
PNG plots are rendered next to them (requires matplotlib).
"""

import argparse
import logging
import sys
import time
from pathlib import Path

from .. import __version__
from ..integrators import METHODS
from . import experiments as ex
from . import output
from .config import ConfigError, config_keys, load_config

log = logging.getLogger("vesselsplit")


def _methods(text):
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in METHODS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    return names


def _floats(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("step sizes must be positive")
    return vals


def _config_help():
    lines = ["configuration keys (flat 'key = value' under [section] headers):"]
    for sec, keys in config_keys().items():
        lines.append(f"  [{sec}] " + ", ".join(keys))
    return "\n".join(lines)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment configuration file")
    common.add_argument("--out", metavar="DIR", default=None,
                        help="output directory (default: run.output_path of the config)")
    common.add_argument("--scale", type=float, default=1.0, metavar="N",
                        help="divide the final time of the long table runs by N")
    common.add_argument("--methods", type=_methods, metavar="LIST", help="comma-separated method names")
    common.add_argument("--seed", type=int, default=None,
                        help="accepted for interface symmetry; the experiments are deterministic")
    common.add_argument("--figures", action="store_true", help="also render PNG figures (matplotlib)")
    common.add_argument("--workers", type=int, default=1, help="processes for independent table cells")
    common.add_argument("--no-cache", action="store_true", help="do not read or write cached runs")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="vesselsplit", description="Splitting integrators for a PID-controlled vessel model.",
        epilog=_config_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="integrate the configured scenario")
    p.add_argument("--h", type=_floats, dest="h_list", metavar="LIST", help="step size(s), overrides run.h_list")
    p.add_argument("--t-end", type=float, help="final time, overrides run.t_end")

    p = sub.add_parser("order-study", parents=[common], help="endpoint errors for h = 2^-k")
    p.add_argument("--kmax", type=int, default=9)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--h-ref", type=float, default=1e-4)
    p.add_argument("--t-on", type=float, default=0.0,
                   help="controller switch-on time for this study (default 0; 'inf' for none)")

    for name, hs, t_end, h_ref, what in (
            ("energy-table", ex.ENERGY_TABLE_H, 50000.0, 0.005, "relative energy errors at the final time"),
            ("global-error-table", ex.GLOBAL_TABLE_H, 780.0, 1e-4, "relative global errors at the final time")):
        p = sub.add_parser(name, parents=[common], help=what)
        p.add_argument("--h", type=_floats, dest="h_list", metavar="LIST", default=list(hs))
        p.add_argument("--t-end", type=float, default=t_end)
        p.add_argument("--h-ref", type=float, default=h_ref)
        if name == "global-error-table":
            p.add_argument("--norm", choices=sorted(ex.GLOBAL_NORM_SLICES), default="mechanical",
                           help="state blocks in the error norm (default: omega, q, v, x)")

    for name, t_end, what in (("control-norms", 110.0, "scaled control norms per step"),
                              ("energy-evolution", 150.0, "scaled energy H_n/H_0 per step")):
        p = sub.add_parser(name, parents=[common], help=what)
        p.add_argument("--h", type=float, default=1.95)
        p.add_argument("--t-end", type=float, default=t_end)
        p.add_argument("--h-ref", type=float, default=0.005)
    return parser


def _meta(cfg, args, **extra):
    meta = {"generator": f"vesselsplit {__version__}", "command": args.command,
            "config_hash": cfg.digest(), "activation": cfg.activation}
    meta.update(extra)
    return meta


def _figures(args, fn, *fargs):
    if not args.figures:
        return
    from . import plotting

    path = getattr(plotting, fn)(*fargs)
    log.info("wrote %s", path)
    print(path)


def cmd_simulate(cfg, args, out):
    t_end = args.t_end if args.t_end is not None else cfg.t_span[1]
    cfg.t_span = (cfg.t_span[0], t_end)
    methods = args.methods or cfg.methods
    status = 0
    for m in methods:
        for h in args.h_list or cfg.h_list:
            traj = ex.run_simulation(cfg, m, h, use_cache=not args.no_cache)
            path = output.write_trajectory(out / f"simulation_{m}_h{h:g}.csv", traj,
                                           _meta(cfg, args, method=m, h=output.fmt(h)))
            print(path)
            if traj.verdict.value != "completed":
                print(traj.message, file=sys.stderr)
                status = 3
            _figures(args, "plot_positions", traj, out / f"simulation_{m}_h{h:g}.png", cfg.ctrl)
    return status


def cmd_order_study(cfg, args, out):
    study = ex.order_study(cfg, methods=args.methods or ex.ORDER_METHODS, ks=range(args.kmax + 1),
                           t_end=args.t_end, h_ref=args.h_ref, workers=args.workers,
                           use_cache=not args.no_cache, t_on=args.t_on)
    meta = _meta(cfg, args, t_end=args.t_end, reference_h=args.h_ref, t_on=output.fmt(args.t_on))
    for p in output.write_order_study(out, study, meta):
        print(p)
    for (m, comp), (slope, n) in sorted(study.slopes.items()):
        print(f"{m:4s} {comp:6s} slope {slope:6.2f} ({n} points)")
    _figures(args, "plot_order_study", study, out / "order_study.png")
    return 0


def cmd_table(cfg, args, out):
    fn = ex.energy_table if args.command == "energy-table" else ex.global_error_table
    default = ex.ENERGY_TABLE_METHODS if args.command == "energy-table" else ex.GLOBAL_TABLE_METHODS
    extra = {"norm": args.norm} if args.command == "global-error-table" else {}
    table = fn(cfg, hs=tuple(args.h_list), methods=tuple(args.methods or default), t_end=args.t_end,
               h_ref=args.h_ref, scale=args.scale, workers=args.workers, use_cache=not args.no_cache,
               **extra)
    stem = args.command.replace("-", "_")
    for p in output.write_error_table(out, table, stem, _meta(cfg, args, scale=output.fmt(args.scale))):
        print(p)
    print(output.format_table(table))
    return 0


def cmd_series(cfg, args, out):
    fn = ex.control_norm_study if args.command == "control-norms" else ex.energy_evolution
    ts = fn(cfg, h=args.h, methods=tuple(args.methods or ("SP4", "RK4")), t_end=args.t_end,
            h_ref=args.h_ref, use_cache=not args.no_cache)
    stem = f"{args.command.replace('-', '_')}_h{args.h:g}"
    print(output.write_time_series(out / f"{stem}.csv", ts, _meta(cfg, args, h=output.fmt(args.h))))
    for label in ts.series:
        if label != "reference":
            print(f"{label}: max deviation from reference {ex.max_deviation(ts, label):.3e}")
    _figures(args, "plot_time_series", ts, out / f"{stem}.png")
    return 0


COMMANDS = {"simulate": cmd_simulate, "order-study": cmd_order_study, "energy-table": cmd_table,
            "global-error-table": cmd_table, "control-norms": cmd_series, "energy-evolution": cmd_series}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.scale <= 0:
        print("error: --scale must be positive", file=sys.stderr)
        return 2
    out = Path(args.out or cfg.output_path)
    out.mkdir(parents=True, exist_ok=True)
    t = time.perf_counter()
    try:
        status = COMMANDS[args.command](cfg, args, out)
    except ImportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    log.info("%s finished in %.1f s", args.command, time.perf_counter() - t)
    return status


if __name__ == "__main__":
    sys.exit(main())
