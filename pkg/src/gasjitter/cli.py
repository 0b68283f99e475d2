"""Command-line entry point: ``gasjitter steady|dispatch|jitter|simulate|scenario``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import csvio
from .dispatch import METHODS, dispatch
from .errors import GasJitterError
from .jitter import FluctuationStrength, diffusion_coefficient, fluctuation_strength
from .netfile import read_network
from .network import require_tree
from .scenario import StageError, _stage, parse_probe, read_scenario, run_scenario
from .sim import simulate, variance_growth
from .steady import DEFAULT_SAMPLES, solve_steady
from .units import P0, T0, parse_quantity

log = logging.getLogger("gasjitter")


def _quantity(dimension):
    def conv(text):
        try:
            return parse_quantity(text, dimension)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    conv.__name__ = dimension
    return conv


def _exceedance(text):
    out = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep or key.strip() not in ("t", "margin"):
            raise argparse.ArgumentTypeError("expected t=<time>[,margin=<pressure>]")
        dim = "time" if key.strip() == "t" else "pressure"
        out[key.strip()] = _quantity(dim)(value.strip())
    if "t" not in out:
        raise argparse.ArgumentTypeError("exceedance needs t=<time>")
    return out


def build_parser():
    ap = argparse.ArgumentParser(prog="gasjitter", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log defaults and progress")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, network=True):
        if network:
            p.add_argument("--network", required=True, type=Path, help="network document")
        p.add_argument("--out-dir", type=Path, help="write CSV files here (default: stdout)")
        p.add_argument("--format", choices=["csv"], default="csv")

    p = sub.add_parser("steady", help="stationary flows and pressures")
    common(p)
    p.add_argument("--method", choices=("none",) + METHODS, default="none",
                   help="dispatch used to set the ratios (none: every ratio 1)")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)

    p = sub.add_parser("dispatch", help="compression ratios")
    common(p)
    p.add_argument("--method", choices=METHODS, default="gp")
    p.add_argument("--diagnostics", action="store_true", help="also write solver traces")

    p = sub.add_parser("jitter", help="diffusion coefficient profile")
    common(p)
    p.add_argument("--method", choices=METHODS, default="gp")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--p0", type=_quantity("pressure"), default=P0)
    p.add_argument("--t0", type=_quantity("time"), default=T0)
    p.add_argument("--tau-eff", type=_quantity("time"), default=None)
    p.add_argument("--exceedance", type=_exceedance, default=None,
                   help="t=<time>[,margin=<pressure>]: per-node exceedance probabilities")

    p = sub.add_parser("simulate", help="Monte-Carlo transient ensemble")
    common(p)
    p.add_argument("--method", choices=METHODS, default="gp")
    p.add_argument("--horizon", type=_quantity("time"), default=100 * T0)
    p.add_argument("--dt", type=_quantity("time"), default=None)
    p.add_argument("--dx", type=_quantity("length"), default=5e3)
    p.add_argument("--trajectories", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--probe", action="append", default=[], metavar="PIPE:X",
                   help="probe location, repeatable (default: every pipe midpoint)")

    p = sub.add_parser("scenario", help="run a scenario document")
    common(p, network=False)
    p.add_argument("--scenario", required=True, type=Path)
    p.add_argument("--seed", type=int, default=None, help="override the simulation seed")
    return ap


def _emit(out_dir, fname, table, meta, stream):
    if out_dir is None:
        stream.write(csvio.render_csv(table[0], table[1], meta))
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    csvio.write_csv(out_dir / fname, table[0], table[1], meta)


def _load(args):
    net = _stage("load", read_network, args.network)
    _stage("validate", require_tree, net)
    return net


def _dispatched(net, method):
    if method == "none":
        return _stage("steady", solve_steady, net)
    return _stage(f"dispatch {method}", dispatch, net, method).steady


def cmd_steady(args, out):
    net = _load(args)
    ss = _dispatched(net, args.method)
    meta = {"network": net.name, "ratios": args.method}
    if args.out_dir is None:
        _emit(None, "", csvio.steady_profile_rows(ss, args.samples), meta, out)
        return
    _emit(args.out_dir, "steady_nodes.csv", csvio.steady_node_rows(ss), meta, out)
    _emit(args.out_dir, "steady_profiles.csv", csvio.steady_profile_rows(ss, args.samples), meta, out)


def cmd_dispatch(args, out):
    net = _load(args)
    res = _stage(f"dispatch {args.method}", dispatch, net, args.method)
    meta = {"network": net.name, "method": args.method}
    _emit(args.out_dir, f"dispatch_{args.method}.csv", csvio.dispatch_rows(res), meta, out)
    if args.diagnostics:
        _emit(args.out_dir, f"dispatch_{args.method}_trace.csv", csvio.dispatch_trace_rows(res),
              meta, out)


def cmd_jitter(args, out):
    net = _load(args)
    res = _stage(f"dispatch {args.method}", dispatch, net, args.method)
    strength = fluctuation_strength(net)
    if args.tau_eff is not None:
        strength = FluctuationStrength(strength.S, args.tau_eff)
    jp = _stage("jitter", diffusion_coefficient, res.steady, strength=strength, n=args.samples)
    meta = {"network": net.name, "method": args.method, "p0_Pa": args.p0, "t0_s": args.t0,
            "S_kg2_s2": strength.S, "tau_eff_s": strength.tau_eff}
    _emit(args.out_dir, f"jitter_{args.method}.csv", csvio.jitter_rows(jp, args.p0, args.t0), meta, out)
    if args.exceedance:
        t = args.exceedance["t"]
        table = csvio.exceedance_rows(jp, t, args.exceedance.get("margin"))
        _emit(args.out_dir, f"exceedance_{args.method}.csv", table, {**meta, "t_s": t}, out)


def cmd_simulate(args, out):
    net = _load(args)
    res = _stage(f"dispatch {args.method}", dispatch, net, args.method)
    try:
        probes = [parse_probe(p) for p in args.probe] or None
    except GasJitterError as exc:
        raise StageError("arguments", exc) from exc
    ens = _stage("simulate", simulate, net, res.ratios, args.horizon, args.dt, args.dx,
                 args.trajectories, args.seed, args.stride, probes, res.steady)
    jp = _stage("jitter", diffusion_coefficient, res.steady)
    meta = {"network": net.name, "method": args.method, "seed": args.seed,
            "trajectories": args.trajectories, "dt_s": ens.dt}
    header = ["time_s", "trajectory"] + [f"dp_{pid}@{x!r}" for pid, x in ens.probes]
    rows = []
    for k in range(ens.n_trajectories):
        for j, t in enumerate(ens.times):
            rows.append([t, k, *ens.probe_dp[k, j]])
    _emit(args.out_dir, "trajectories.csv", (header, rows), meta, out)
    summary = []
    for i, (pid, x) in enumerate(ens.probes):
        try:
            fit = variance_growth(ens, i)
        except GasJitterError as exc:
            log.warning("no variance fit for %s@%s: %s", pid, x, exc)
            continue
        D = float(jp.at(pid, x))
        summary.append([pid, x, fit.slope, fit.stderr, fit.r2, D,
                        fit.slope / D if D > 0 else float("nan"), fit.t_min, fit.t_max])
    _emit(args.out_dir, "variance_growth.csv",
          (["pipe_id", "x_m", "slope_Pa2_per_s", "stderr", "r2", "D_Pa2_per_s", "slope_over_D",
            "t_min_s", "t_max_s"], summary), meta, out)


def cmd_scenario(args, out):
    sc = _stage("load", read_scenario, args.scenario)
    report = run_scenario(sc, args.out_dir or Path("."), seed=args.seed)
    for key, path in report.files.items():
        out.write(f"{key}: {path}\n")


COMMANDS = {"steady": cmd_steady, "dispatch": cmd_dispatch, "jitter": cmd_jitter,
            "simulate": cmd_simulate, "scenario": cmd_scenario}


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=stderr)
    try:
        COMMANDS[args.command](args, stdout)
    except StageError as exc:
        stderr.write(f"gasjitter {args.command}: error {exc}\n")
        return 1
    except GasJitterError as exc:
        stderr.write(f"gasjitter {args.command}: error [{args.command}] {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
