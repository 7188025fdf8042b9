"""Command-line front end: ``rlncsim <capacity|simulate|rate|fluid|exponent>``.

Exit codes: 0 success, 1 invalid input (nothing written), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys

import numpy as np

from . import __version__, exponents, flows
from .config import ConfigError, Experiment, load_experiment, parse_grid
from .fluidqueue import PathQueueSystem, check_fluid_convergence
from .network import NetworkError, format_rate
from .simulator import FIXED, RATELESS, run_trials, OutcomeSummary
from .traffic import TrafficError

log = logging.getLogger("rlncsim")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _write(out_dir: str, name: str, text: str) -> None:
    with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _manifest(args, exp: Experiment) -> str:
    return (f"manifest,command={args.command},config_sha256={exp.text_hash},"
            f"seed={exp.seed},version={__version__}\n")


def _apply_overrides(args, exp: Experiment) -> None:
    if args.seed is not None:
        exp.seed = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be at least 1")
        exp.trials = args.trials
    if args.delta_grid is not None:
        exp.deltas = parse_grid(args.delta_grid)


def cmd_capacity(args, exp: Experiment) -> dict:
    net = exp.network
    src, sinks = exp.default_terminals()
    lab = net.labels
    rows = [{"metric": "capacity", "value": format_rate(flows.multicast_capacity(net, src, sinks))}]
    path_rows = []
    for t in sinks:
        cut = flows.min_cut(net, src, t)
        rows.append({"metric": f"min_cut[{lab[t]}]", "value": format_rate(cut.capacity)})
        rows.append({"metric": f"cut_set[{lab[t]}]", "value": " ".join(lab[v] for v in sorted(cut.source_side))})
        if net.is_wireless:
            continue
        dec = flows.unicast_decomposition(net, src, t)
        for i, (path, r) in enumerate(zip(dec.paths, dec.rates), start=1):
            rows.append({"metric": f"path[{lab[t]}]#{i}", "value": f"{' '.join(lab[v] for v in path)} @ {format_rate(r)}"})
            path_rows.append({"sink": lab[t], "path": i, "rate": format_rate(r), "nodes": " ".join(lab[v] for v in path)})
    text = _csv_text(["metric", "value"], rows)
    sys.stdout.write(text)
    files = {"capacity.csv": text}
    if path_rows:
        files["paths.csv"] = _csv_text(["sink", "path", "rate", "nodes"], path_rows)
    return files


def _trial_files(args, exp: Experiment, cfg, prefix: str) -> tuple:
    summary = OutcomeSummary(len(cfg.sinks), len(cfg.network.links()))
    rows = []
    for o in run_trials(cfg, exp.trials, args.threads):
        summary.add(o, cfg.K)
        rows.append(o.row())
    trial_csv = _csv_text(list(rows[0].keys()), rows)
    lab = cfg.network.labels
    srows = []
    for i, t in enumerate(cfg.sinks):
        lo, hi = summary.success_interval(i)
        srows.append({"sink": lab[t], "trials": summary.trials, "successes": summary.sink_successes[i],
                      "frequency": repr(summary.success_frequency(i)), "wilson_lo": repr(lo),
                      "wilson_hi": repr(hi), "mean_rank": repr(summary.mean_ranks()[i])})
    lo, hi = summary.success_interval()
    srows.append({"sink": "*", "trials": summary.trials, "successes": summary.all_successes,
                  "frequency": repr(summary.success_frequency()), "wilson_lo": repr(lo), "wilson_hi": repr(hi),
                  "mean_rank": ""})
    summary_csv = _csv_text(list(srows[0].keys()), srows)
    return summary, {f"{prefix}_trials.csv": trial_csv, f"{prefix}_summary.csv": summary_csv}


def cmd_simulate(args, exp: Experiment) -> dict:
    cfg = exp.sim_config()
    summary, files = _trial_files(args, exp, cfg, "simulate")
    sys.stdout.write(files["simulate_summary.csv"])
    if summary.decode_errors or summary.inconsistent_packets:
        raise RuntimeError("decoder output or packet headers were inconsistent")
    return files


def cmd_rate(args, exp: Experiment) -> dict:
    cfg = exp.sim_config(mode=RATELESS)
    summary, files = _trial_files(args, exp, cfg, "rate")
    if summary.completions == 0:
        raise RuntimeError("every trial hit the rateless time cap")
    rate = summary.rate_sum / summary.completions
    text = _csv_text(["metric", "value"], [
        {"metric": "achieved_rate", "value": repr(rate)},
        {"metric": "capacity", "value": repr(cfg.capacity)},
        {"metric": "completed", "value": summary.completions},
        {"metric": "timeouts", "value": summary.timeouts},
    ])
    sys.stdout.write(text)
    files["rate.csv"] = text
    return files


def cmd_fluid(args, exp: Experiment) -> dict:
    net = exp.network
    if net.is_wireless:
        raise ConfigError("fluid analysis needs a wireline network")
    src, sinks = exp.default_terminals()
    rng = np.random.default_rng(exp.seed)
    rows = []
    z = {(a.head, a.tail): float(a.z) for a in net.arcs}
    for t in sinks:
        dec = flows.unicast_decomposition(net, src, t)
        for p, (path, r) in enumerate(zip(dec.paths, dec.rates), start=1):
            rates = tuple(z[a] for a in zip(path, path[1:]))
            sys_ = PathQueueSystem(tuple(path), float(r), rates, 1 << exp.m, 0)
            report = check_fluid_convergence(sys_, exp.jobs, None, exp.trials, rng)
            for n, mean in zip(report.jobs, report.mean_levels):
                for station in range(sys_.stations):
                    for k, tau in enumerate(report.grid):
                        rows.append({"sink": net.labels[t], "path": p, "N": n, "tau": repr(float(tau)),
                                     "station": station + 1, "scaled_level": repr(float(mean[station, k])),
                                     "fluid_level": repr(float(report.fluid_levels[station, k]))})
    text = _csv_text(["sink", "path", "N", "tau", "station", "scaled_level", "fluid_level"], rows)
    return {"fluid.csv": text}


def cmd_exponent(args, exp: Experiment) -> dict:
    if exp.rate is None:
        raise ConfigError("exponent runs need a 'rate R' statement")
    if not exp.deltas:
        raise ConfigError("exponent runs need a delay grid ('deltas' or --delta-grid)")
    cfg = exp.sim_config(mode=FIXED, delta=exp.deltas[0])
    est = exponents.estimate_empirical_exponent(cfg, exp.rate, exp.deltas, exp.trials, args.threads)
    header = ["delta", "trials", "failures", "p_e", "wilson_lo", "wilson_hi", "lower_bound_pe",
              "analytic_exponent", "fitted_slope"]
    rows = [{k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()} for r in est.rows()]
    text = _csv_text(header, rows)
    sys.stdout.write(text)
    return {"exponent.csv": text}


COMMANDS = {
    "capacity": cmd_capacity,
    "simulate": cmd_simulate,
    "rate": cmd_rate,
    "fluid": cmd_fluid,
    "exponent": cmd_exponent,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rlncsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment or network file")
        p.add_argument("--out", default=None, help="directory for CSV outputs")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--delta-grid", default=None, help="a:b:step")
        p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        exp = load_experiment(args.config)
        _apply_overrides(args, exp)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.command in ("simulate", "rate", "exponent"):
            exp.processes()
            exp.sim_config(mode=RATELESS)  # validates terminals and parameters up front
    except (ConfigError, NetworkError, TrafficError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    try:
        files = COMMANDS[args.command](args, exp)
    except (ConfigError, NetworkError, TrafficError) as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.error("run failed: %s", exc)
        return 2
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for name, text in files.items():
            _write(args.out, name, text)
        _write(args.out, "manifest.txt", _manifest(args, exp))
    return 0


if __name__ == "__main__":
    sys.exit(main())
