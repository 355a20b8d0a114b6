"""Command-line front end.

Every command writes one record per evaluated point as CSV (default) or
JSON. Each record carries the seed and configuration needed to reproduce it.
Values may also come from a JSON file given with ``--config``; command-line
flags take precedence over the file.

Exit status: 0 on success, 2 on configuration errors, 3 on numerical errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import bound, pgf
from .bound import CodeConfig, FblParams
from .channel import ChannelConfig, PilotMode
from .errors import ConfigError, NumericalError
from .queue_sim import ArrivalGranularity, SimConfig, empirical_violation, run_sim

DEFAULTS = {
    "m_t": 1,
    "m_r": 1,
    "ell": 2,
    "n_c": 50,
    "n_p": None,
    "k": 30,
    "snr_db": None,
    "snr_range": None,
    "alpha": None,
    "alpha_grid": None,
    "np_min": None,
    "np_max": None,
    "fixed_np": False,
    "pilot_mode": "equivalent",
    "n_samples": 10**6,
    "seed": 0,
    "workers": 1,
    "target": None,
    "lam": None,
    "n": 100,
    "eps": None,
    "a": None,
    "simulate": False,
    "n_deliveries": 10**6,
    "granularity": "frame",
    "antennas": ["1x1", "1x2", "2x1", "2x2"],
    "scenarios": ["2x50", "5x20", "20x5"],
    "targets": [1.46e-1, 3.2e-3],
    "output": None,
    "format": "csv",
}

COLUMNS = {
    "epsilon": ["m_t", "m_r", "ell", "n_c", "n_p", "rho_db", "alpha", "eps_mean", "std_err", "n_samples", "seed"],
    "min-snr": [
        "m_t", "m_r", "ell", "n_c", "target", "status", "rho_db", "n_p", "alpha",
        "eps_mean", "std_err", "n_samples", "seed",
    ],
    "aoi": ["lambda", "n", "eps", "a", "p_av_analytic", "p_av_limit"],
    "aoi-sim": [
        "lambda", "n", "eps", "a", "p_av_analytic", "p_av_limit",
        "p_av_sim", "p_av_sim_se", "n_deliveries", "seed",
    ],
    "limit": ["eps", "n", "a", "p_av_limit"],
    "simulate": [
        "lambda", "n", "eps", "a", "granularity", "p_av_sim", "p_av_sim_se", "p_av_analytic",
        "delivered", "preempted", "preemption_fraction", "no_preemption_p", "frames", "seed",
    ],
}
COLUMNS["optimize"] = COLUMNS["epsilon"]
COLUMNS["tables"] = COLUMNS["min-snr"]


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.9g}"
    if value is None:
        return ""
    return value


def write_records(records, columns, fmt, stream):
    if fmt == "json":
        rows = [
            {c: (float(_fmt(r[c])) if isinstance(r[c], float) else r[c]) for c in columns} for r in records
        ]
        json.dump(rows, stream, indent=1)
        stream.write("\n")
        return
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([_fmt(r[c]) for c in columns])


def _channel_args(p, need_np=True):
    p.add_argument("--m-t", dest="m_t", type=int, help="transmit antennas (1..4)")
    p.add_argument("--m-r", dest="m_r", type=int, help="receive antennas")
    p.add_argument("--ell", type=int, help="coherence blocks per packet")
    p.add_argument("--n-c", dest="n_c", type=int, help="coherence block length")
    p.add_argument("--n-p", dest="n_p", type=int, help="pilot symbols per block" + ("" if need_np else " (optional)"))
    p.add_argument("--k", type=int, help="information bits per packet")
    p.add_argument("--pilot-mode", dest="pilot_mode", choices=[m.value for m in PilotMode])
    p.add_argument("--n-samples", dest="n_samples", type=int, help="Monte Carlo samples")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--alpha-grid", dest="alpha_grid", type=float, nargs="+",
                   help="explicit alpha grid; default is coarse 0.1..3.0 plus refinement")
    p.add_argument("--np-min", dest="np_min", type=int)
    p.add_argument("--np-max", dest="np_max", type=int)


def _snr_args(p):
    p.add_argument("--snr-db", dest="snr_db", type=float, nargs="+", help="SNR values in dB")
    p.add_argument("--snr-range", dest="snr_range", type=float, nargs=3, metavar=("START", "STOP", "STEP"),
                   help="inclusive dB grid, e.g. -6 3 0.25")


def _output_args(p):
    p.add_argument("--config", help="JSON file with default values for any option")
    p.add_argument("--output", "-o", help="output path (default stdout)")
    p.add_argument("--format", choices=["csv", "json"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paoi",
        description="Finite-blocklength error bounds and peak-age violation probabilities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("epsilon", help="RCUs bound estimate at given SNRs")
    _channel_args(p)
    _snr_args(p)
    p.add_argument("--alpha", type=float, help="fixed alpha; omit to optimise alpha")
    _output_args(p)

    p = sub.add_parser("optimize", help="bound estimate optimised over pilots and alpha")
    _channel_args(p, need_np=False)
    _snr_args(p)
    p.add_argument("--fixed-np", dest="fixed_np", action="store_true", default=None,
                   help="keep --n-p and optimise alpha only")
    _output_args(p)

    p = sub.add_parser("min-snr", help="smallest grid SNR meeting an error target")
    _channel_args(p, need_np=False)
    _snr_args(p)
    p.add_argument("--target", type=float, help="target error probability")
    p.add_argument("--fixed-np", dest="fixed_np", action="store_true", default=None)
    _output_args(p)

    p = sub.add_parser("aoi", help="analytic peak-age violation probability")
    p.add_argument("--lambda", dest="lam", type=float, nargs="+", help="arrival probabilities per channel use")
    p.add_argument("--n", type=int, help="frame length in channel uses")
    p.add_argument("--eps", type=float)
    p.add_argument("--a", type=float, help="peak-age threshold in channel uses")
    _output_args(p)

    p = sub.add_parser("aoi-sweep", help="violation probability over a lambda grid")
    p.add_argument("--lambda", dest="lam", type=float, nargs="+", help="lambda grid")
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--simulate", action="store_true", default=None, help="append simulated values")
    p.add_argument("--n-deliveries", dest="n_deliveries", type=int)
    p.add_argument("--seed", type=int)
    _output_args(p)

    p = sub.add_parser("limit", help="violation probability in the lambda -> 1 limit")
    p.add_argument("--eps", type=float, nargs="+")
    p.add_argument("--n", type=int)
    p.add_argument("--a", type=float)
    _output_args(p)

    p = sub.add_parser("simulate", help="simulate the queue and report the empirical violation probability")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--n-deliveries", dest="n_deliveries", type=int)
    p.add_argument("--granularity", choices=[g.value for g in ArrivalGranularity])
    p.add_argument("--seed", type=int)
    _output_args(p)

    p = sub.add_parser("tables", help="minimum SNR per diversity scenario and antenna configuration")
    _channel_args(p, need_np=False)
    _snr_args(p)
    p.add_argument("--antennas", nargs="*", help="antenna configurations like 1x2 (m_t x m_r)")
    p.add_argument("--scenarios", nargs="*", help="diversity scenarios like 2x50 (ell x n_c)")
    p.add_argument("--targets", type=float, nargs="+", help="error targets")
    _output_args(p)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over the config file over built-in defaults."""
    file_values = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ConfigError("config file must hold a JSON object")
    opts = dict(DEFAULTS)
    for key, value in file_values.items():
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        opts[key] = value
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "command"):
            opts[key] = value
    opts["command"] = args.command
    return opts


def _require(opts, *keys):
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        raise ConfigError(f"{opts['command']}: missing required option(s): {', '.join(missing)}")


def _as_list(value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _snr_list(opts):
    if opts["snr_range"] is not None:
        start, stop, step = _as_list(opts["snr_range"])
        return bound.snr_grid(float(start), float(stop), float(step))
    if opts["snr_db"] is not None:
        return sorted(float(x) for x in _as_list(opts["snr_db"]))
    raise ConfigError(f"{opts['command']}: give --snr-db or --snr-range")


def _channel(opts, rho_db, n_p=None, m_t=None, m_r=None, ell=None, n_c=None):
    m_t = opts["m_t"] if m_t is None else m_t
    n_p = n_p if n_p is not None else opts["n_p"]
    if n_p is None:
        n_p = m_t
    return ChannelConfig.from_db(
        m_t,
        opts["m_r"] if m_r is None else m_r,
        opts["ell"] if ell is None else ell,
        opts["n_c"] if n_c is None else n_c,
        n_p,
        rho_db,
        opts["pilot_mode"],
    )


def _params(opts, alpha=1.0):
    return FblParams(alpha=alpha, n_samples=int(opts["n_samples"]), seed=int(opts["seed"]), workers=int(opts["workers"]))


def _np_range(opts):
    if opts["np_min"] is None and opts["np_max"] is None:
        return None
    return (opts["np_min"] if opts["np_min"] is not None else 1, opts["np_max"] if opts["np_max"] is not None else 10**9)


def _alpha_grid(opts):
    return None if opts["alpha_grid"] is None else [float(a) for a in _as_list(opts["alpha_grid"])]


def _eps_record(ch, est, opts):
    return {
        "m_t": ch.m_t, "m_r": ch.m_r, "ell": ch.ell, "n_c": ch.n_c, "n_p": est.n_p,
        "rho_db": float(round(est.rho_db, 10)), "alpha": est.alpha, "eps_mean": est.eps_mean,
        "std_err": est.std_err, "n_samples": est.n_samples, "seed": int(opts["seed"]),
    }


def cmd_epsilon(opts):
    _require(opts, "n_p")
    records = []
    for rho_db in _snr_list(opts):
        ch = _channel(opts, rho_db)
        code = CodeConfig(opts["k"], ch.n)
        if opts["alpha"] is not None:
            est = bound.rcus_estimate(ch, code, _params(opts, float(opts["alpha"])))
        elif opts["alpha_grid"] is not None:
            est = bound.optimize_alpha(ch, code, _params(opts), _alpha_grid(opts))
        else:
            est = bound.search_alpha(ch, code, _params(opts))
        records.append(_eps_record(ch, est, opts))
    return records


def cmd_optimize(opts):
    records = []
    for rho_db in _snr_list(opts):
        ch = _channel(opts, rho_db)
        code = CodeConfig(opts["k"], ch.n)
        est = bound.optimized_point(ch, code, _params(opts), _alpha_grid(opts), _np_range(opts), bool(opts["fixed_np"]))
        records.append(_eps_record(ch, est, opts))
    return records


def _min_snr_record(ch, target, rho, est, opts):
    achieved = rho is not None
    return {
        "m_t": ch.m_t, "m_r": ch.m_r, "ell": ch.ell, "n_c": ch.n_c, "target": float(target),
        "status": "achieved" if achieved else "not achievable on grid",
        "rho_db": float(round(est.rho_db, 10)) if achieved else None,
        "n_p": est.n_p, "alpha": est.alpha, "eps_mean": est.eps_mean, "std_err": est.std_err,
        "n_samples": est.n_samples, "seed": int(opts["seed"]),
    }


def cmd_min_snr(opts):
    _require(opts, "target")
    grid = _snr_list(opts)
    ch = _channel(opts, grid[0])
    code = CodeConfig(opts["k"], ch.n)
    rho, est = bound.min_snr_for_target(
        ch, code, _params(opts), float(opts["target"]), grid, _alpha_grid(opts), _np_range(opts), bool(opts["fixed_np"])
    )
    return [_min_snr_record(ch, opts["target"], rho, est, opts)]


def _pair(text, what):
    try:
        a, b = (int(x) for x in str(text).lower().split("x"))
    except ValueError:
        raise ConfigError(f"malformed {what} {text!r}, expected AxB") from None
    return a, b


def cmd_tables(opts):
    antennas = [_pair(a, "antenna configuration") for a in _as_list(opts["antennas"] or [])]
    scenarios = [_pair(s, "scenario") for s in _as_list(opts["scenarios"] or [])]
    targets = [float(t) for t in _as_list(opts["targets"] or [])]
    if not antennas:
        raise ConfigError("tables: antenna configuration list is empty")
    if not scenarios:
        raise ConfigError("tables: scenario list is empty")
    if not targets:
        raise ConfigError("tables: target list is empty")
    grid = _snr_list(opts) if (opts["snr_db"] is not None or opts["snr_range"] is not None) else bound.snr_grid(-6.0, 6.0)
    records = []
    for target in sorted(targets, reverse=True):
        for ell, n_c in scenarios:
            for m_t, m_r in antennas:
                ch = _channel(opts, grid[0], n_p=m_t, m_t=m_t, m_r=m_r, ell=ell, n_c=n_c)
                code = CodeConfig(opts["k"], ch.n)
                rho, est = bound.min_snr_for_target(ch, code, _params(opts), target, grid, _alpha_grid(opts), _np_range(opts))
                records.append(_min_snr_record(ch, target, rho, est, opts))
    return records


def _aoi_record(lam, opts):
    qp = pgf.QueueParams(float(lam), int(opts["n"]), float(opts["eps"]))
    return {
        "lambda": float(lam), "n": qp.n, "eps": qp.eps, "a": float(opts["a"]),
        "p_av_analytic": pgf.violation_probability(qp, float(opts["a"])),
        "p_av_limit": pgf.limiting_violation(qp.eps, qp.n, float(opts["a"])),
    }


def cmd_aoi(opts):
    _require(opts, "lam", "eps", "a")
    return [_aoi_record(lam, opts) for lam in sorted(_as_list(opts["lam"]))]


def cmd_aoi_sweep(opts):
    records = cmd_aoi(opts)
    if opts["simulate"]:
        for rec in records:
            qp = pgf.QueueParams(rec["lambda"], rec["n"], rec["eps"])
            res = run_sim(SimConfig(qp, int(opts["n_deliveries"]), int(opts["seed"])))
            rec["p_av_sim"], rec["p_av_sim_se"] = empirical_violation(res, rec["a"], rec["n"])
            rec["n_deliveries"] = res.delivered
            rec["seed"] = int(opts["seed"])
    return records


def cmd_limit(opts):
    _require(opts, "eps", "a")
    return [
        {"eps": float(e), "n": int(opts["n"]), "a": float(opts["a"]),
         "p_av_limit": pgf.limiting_violation(float(e), int(opts["n"]), float(opts["a"]))}
        for e in sorted(_as_list(opts["eps"]))
    ]


def cmd_simulate(opts):
    _require(opts, "lam", "eps", "a")
    qp = pgf.QueueParams(float(opts["lam"]), int(opts["n"]), float(opts["eps"]))
    cfg = SimConfig(qp, int(opts["n_deliveries"]), int(opts["seed"]), opts["granularity"])
    res = run_sim(cfg)
    p_sim, se = empirical_violation(res, float(opts["a"]), qp.n)
    return [{
        "lambda": qp.lam, "n": qp.n, "eps": qp.eps, "a": float(opts["a"]),
        "granularity": cfg.arrival_granularity.value, "p_av_sim": p_sim, "p_av_sim_se": se,
        "p_av_analytic": pgf.violation_probability(qp, float(opts["a"])),
        "delivered": res.delivered, "preempted": res.preempted,
        "preemption_fraction": res.preemption_fraction(),
        "no_preemption_p": qp.no_preemption_probability,
        "frames": res.frames_elapsed, "seed": int(opts["seed"]),
    }]


COMMANDS = {
    "epsilon": cmd_epsilon,
    "optimize": cmd_optimize,
    "min-snr": cmd_min_snr,
    "aoi": cmd_aoi,
    "aoi-sweep": cmd_aoi_sweep,
    "limit": cmd_limit,
    "simulate": cmd_simulate,
    "tables": cmd_tables,
}


def run(argv=None) -> tuple[list[dict], list[str], dict]:
    args = build_parser().parse_args(argv)
    opts = resolve(args)
    records = COMMANDS[opts["command"]](opts)
    key = opts["command"]
    if key == "aoi-sweep":
        key = "aoi-sim" if opts["simulate"] else "aoi"
    return records, COLUMNS[key], opts


def main(argv=None) -> int:
    try:
        records, columns, opts = run(argv)
        buf = io.StringIO()
        write_records(records, columns, opts["format"], buf)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    if opts["output"]:
        with open(opts["output"], "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


if __name__ == "__main__":
    sys.exit(main())
