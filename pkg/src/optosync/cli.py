"""Command-line front end: ``optosync simulate | sweep | threshold``.

Every command writes plot-ready CSV (or a JSON report) into ``--out``
together with a manifest holding the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .classical import check_sampling, phase_difference
from .config import ConfigError, RunConfig, load_config, to_text, parse_config
from .correlations import gaussian_discord, log_negativity, reduce
from .errors import (MaxIterations, NoSignChange, OptosyncError,
                     ParameterError, PhaseUndefined)
from .model import validate
from .quantum import phase_variance_series
from .sweep import (QUANTUM_OUTPUTS, evaluate, find_threshold,
                    not_synchronized, phase_beyond, run_sweep, validate_spec)

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_NO_THRESHOLD = 4

TRAJECTORY_COLUMNS = ("t", "q1", "p1", "q2", "p2", "|a|^2", "dphi")
QUANTUM_COLUMNS = ("phase_var", "E", "discord_A", "discord_B")
SWEEP_COLUMNS = ("value", "status", "phi_stat", "phi_amp", "drift",
                 "var_avg", "discord_a_avg", "discord_b_avg", "e_max",
                 "t_end", "extended", "n_accepted", "n_rejected",
                 "physicality_margin", "error")


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _atomic_write(path: str, write) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header, rows) -> None:
    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    _atomic_write(path, write)


def write_manifest(path: str, cfg: RunConfig, command: str, outputs,
                   wall_time: float, summary=None) -> None:
    manifest = {
        "tool": "optosync",
        "version": __version__,
        "command": command,
        "outputs": list(outputs),
        "wall_time_s": wall_time,
        "config": to_text(cfg),
    }
    if summary is not None:
        manifest["summary"] = summary

    def write(fh):
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _atomic_write(path, write)


def read_config(path):
    """Load an INI config, or the resolved config embedded in a manifest."""
    if path is not None and path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            return parse_config(json.load(fh)["config"])
    return load_config(path)


def _num(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def _metrics_dict(metrics):
    return {k: _num(v) if not isinstance(v, tuple) else list(v)
            for k, v in dataclasses.asdict(metrics).items()}


def _with_quantum(cfg: RunConfig, quantum):
    outputs = tuple(cfg.sweep.outputs)
    if quantum == "on":
        outputs = tuple(dict.fromkeys(
            outputs + ("variance", "discord", "negativity")))
    elif quantum == "off":
        outputs = tuple(o for o in outputs if o not in QUANTUM_OUTPUTS)
    if "phase" not in outputs:
        outputs = ("phase",) + outputs
    return dataclasses.replace(cfg, sweep=cfg.sweep.replace(outputs=outputs))


def cmd_simulate(cfg: RunConfig, out_dir: str, quantum=None):
    """Single trajectory CSV plus metrics summary; returns the summary."""
    cfg = _with_quantum(cfg, quantum)
    spec = cfg.spec()
    start = time.perf_counter()
    fields, traj = evaluate(cfg.system, spec)
    s = traj.states
    try:
        dphi = phase_difference(traj, spec.n_min).dphi
    except PhaseUndefined:
        dphi = np.full(len(traj), np.nan)
    columns = [traj.t, s[:, 0], s[:, 1], s[:, 2], s[:, 3], traj.photon_number,
               dphi]
    header = list(TRAJECTORY_COLUMNS)
    if spec.quantum:
        r = reduce(traj.cov)
        columns += [phase_variance_series(traj, spec.n_min).var,
                    log_negativity(r)[0],
                    gaussian_discord(r, "A", spec.log_base),
                    gaussian_discord(r, "B", spec.log_base)]
        header += list(QUANTUM_COLUMNS)
    csv_path = os.path.join(out_dir, "trajectory.csv")
    write_csv(csv_path, header, zip(*columns))
    summary = {"status": fields["status"],
               "metrics": _metrics_dict(fields["metrics"]),
               "n_accepted": fields["n_accepted"],
               "n_rejected": fields["n_rejected"],
               "physicality_margin": _num(fields["physicality_margin"])}
    write_manifest(os.path.join(out_dir, "trajectory.manifest.json"), cfg,
                   "simulate", [csv_path], time.perf_counter() - start,
                   summary)
    return summary


def _sweep_row(row):
    m = row.metrics
    get = (lambda k: getattr(m, k)) if m else (lambda k: float("nan"))
    return [row.value, row.status, get("phi_stat"), get("phi_amp"),
            get("drift"), get("var_avg"), get("discord_a_avg"),
            get("discord_b_avg"), get("e_max"), row.t_end, row.extended,
            row.n_accepted, row.n_rejected, row.physicality_margin, row.error]


def cmd_sweep(cfg: RunConfig, out_dir: str, quantum=None):
    cfg = _with_quantum(cfg, quantum)
    start = time.perf_counter()
    result = run_sweep(cfg.spec(), workers=cfg.workers)
    csv_path = os.path.join(out_dir, "sweep.csv")
    write_csv(csv_path, SWEEP_COLUMNS, (_sweep_row(r) for r in result.rows))
    write_manifest(os.path.join(out_dir, "sweep.manifest.json"), cfg, "sweep",
                   [csv_path], time.perf_counter() - start)
    return result


def make_predicate(name: str):
    """``not_synchronized`` or ``phase_beyond:<radians>``."""
    if name == "not_synchronized":
        return not_synchronized
    if name.startswith("phase_beyond:"):
        try:
            level = float(name.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad predicate level in {name!r}")
        return phase_beyond(level)
    raise ConfigError(f"unknown predicate {name!r}")


def cmd_threshold(cfg: RunConfig, out_dir: str, quantum=None):
    cfg = _with_quantum(cfg, quantum)
    predicate = make_predicate(cfg.predicate)
    start = time.perf_counter()
    th = find_threshold(cfg.spec(), predicate, cfg.tolerance)
    report = {"axis": cfg.sweep.axis, "predicate": cfg.predicate,
              "value": th.value, "bracket": list(th.bracket),
              "iterations": th.iterations,
              "evaluated": [[r.value, r.status] for r in th.rows]}
    path = os.path.join(out_dir, "threshold.json")

    def write(fh):
        json.dump(report, fh, indent=2)
        fh.write("\n")
    _atomic_write(path, write)
    write_manifest(os.path.join(out_dir, "threshold.manifest.json"), cfg,
                   "threshold", [path], time.perf_counter() - start, report)
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optosync",
        description="Synchronisation of two membranes in a driven cavity.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "integrate one trajectory"),
                        ("sweep", "scan one parameter axis"),
                        ("threshold", "bisect a synchronisation threshold")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="INI config or manifest JSON")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--quantum", choices=("on", "off"), default=None,
                       help="co-propagate the covariance matrix")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved; the pipeline is deterministic")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = read_config(args.config)
        validate(cfg.system)
        check_sampling(cfg.system, cfg.integrator.sample_dt)
        validate_spec(cfg.spec())
    except (ConfigError, ParameterError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        if args.command == "simulate":
            summary = cmd_simulate(cfg, args.out, args.quantum)
            print(json.dumps(summary, indent=2))
        elif args.command == "sweep":
            result = cmd_sweep(cfg, args.out, args.quantum)
            for row in result.rows:
                phi = row.metrics.phi_stat if row.metrics else float("nan")
                print(f"{row.value:.8g}\t{row.status}\tphi_stat={phi:.6g}")
        else:
            report = cmd_threshold(cfg, args.out, args.quantum)
            lo, hi = report["bracket"]
            print(f"critical {report['axis']} = {report['value']:.8g} "
                  f"(bracket [{lo:.8g}, {hi:.8g}], "
                  f"{report['iterations']} iterations)")
    except (NoSignChange, MaxIterations) as exc:
        print(f"threshold not found: {exc}", file=sys.stderr)
        return EXIT_NO_THRESHOLD
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OptosyncError as exc:
        print(f"simulation error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
