"""Command-line entry point: ``outcap <command> [options]``.

Every command also reads ``--config FILE`` holding ``key = value`` lines whose
keys are the long option names (dashes or underscores); explicit flags win.
SNRs are given in dB here and converted to linear before reaching the library.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import enum
import sys
from typing import Optional, Sequence

from outcap import mimo_bounds, montecarlo, outage, snr_models
from outcap.errors import OutcapError
from outcap.experiments import (
    ALL_QUANTITIES,
    SweepSpec,
    db_to_linear,
    format_number,
    linear_to_db,
    parse_key_values,
    run_sweep,
    run_validation,
)
from outcap.snr_models import ChannelConfig, DiversityScheme

SCHEMES = [s.value for s in DiversityScheme]
QUANTITIES = ("all", "outage_capacity", "gap_branch", "gap_combiner", "ratio_combiner",
              "approx_high_snr", "approx_low_snr", "bounds", "asymptotic")


def _add_channel_args(p: argparse.ArgumentParser):
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--m", type=int, default=1, help="receive antennas")
    p.add_argument("--n", type=int, default=1, help="transmit antennas")
    p.add_argument("--eps", type=float, help="outage probability")
    snr = p.add_mutually_exclusive_group()
    snr.add_argument("--branch-snr-db", type=float, help="fix the per-branch average SNR")
    snr.add_argument("--combiner-snr-db", type=float, help="fix the mean combiner SNR")
    snr.add_argument("--link-snr-db", type=float, help="fix the unit-gain link SNR (mimo-opt)")
    p.add_argument("--format", choices=("text", "csv"), default="text")


def _add_mc_args(p: argparse.ArgumentParser, samples: int):
    p.add_argument("--samples", type=int, default=samples)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--chunks", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outcap",
        description="Outage capacity of Rayleigh-fading diversity channels.",
    )
    parser.add_argument("--config", help="key = value file supplying defaults for the command")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantile", help="SNR outage threshold F^-1(eps)")
    _add_channel_args(p)
    p.add_argument("--method", choices=("exact", "gaussian_approx"), default="exact")

    p = sub.add_parser("capacity", help="outage capacity and benchmark comparisons")
    _add_channel_args(p)
    p.add_argument("--method", choices=("exact", "gaussian_approx"), default="exact")
    p.add_argument("--quantity", choices=QUANTITIES, default="all")
    p.add_argument("--edge-constant", choices=[e.value for e in mimo_bounds.EdgeConstant],
                   help="add the large-array benchmark to bounds output")

    p = sub.add_parser("mimo-bounds", help="outage-capacity bounds for optimal MIMO beamforming")
    _add_channel_args(p)
    p.add_argument("--edge-constant", choices=[e.value for e in mimo_bounds.EdgeConstant])
    p.add_argument("--integer-order", action="store_true",
                   help="round the asymptotic diversity order up to whole branches")

    p = sub.add_parser("mc", help="Monte Carlo estimate of the SNR quantile and outage capacity")
    _add_channel_args(p)
    _add_mc_args(p, 100_000)

    p = sub.add_parser("sweep", help="parameter sweep to CSV")
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--variable", choices=("m", "n", "snr_db"))
    p.add_argument("--grid", help="explicit comma-separated grid")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--spacing", choices=("linear", "log"))
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--snr-ref", choices=("branch", "combiner", "link"))
    p.add_argument("--eps", help="comma-separated outage probabilities")
    p.add_argument("--outputs", help=f"comma-separated subset of {','.join(ALL_QUANTITIES)}")
    p.add_argument("--edge-constant", choices=[e.value for e in mimo_bounds.EdgeConstant])
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--dump-config", action="store_true", help="print the resolved spec and exit")

    p = sub.add_parser("validate", help="run the analytic and Monte Carlo cross-checks")
    _add_mc_args(p, 100_000)
    p.add_argument("--report", help="TSV report path (default stdout)")
    p.add_argument("--inject-mismatch", action="store_true",
                   help="negative control: compare samples against the wrong CDF")
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if command in action.choices:
            return action.choices[command]
    raise KeyError(command)


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            values = parse_key_values(fh.read())
        sub = _subparser(parser, args.command)
        dests = {a.dest for a in sub._actions}
        unknown = set(values) - dests
        if unknown:
            parser.error(f"unknown config keys for {args.command}: {sorted(unknown)}")
        typed = {}
        for action in sub._actions:
            if action.dest in values:
                raw = values[action.dest]
                if action.const is True:
                    typed[action.dest] = raw.lower() in ("1", "true", "yes", "on")
                else:
                    typed[action.dest] = action.type(raw) if action.type else raw
        sub.set_defaults(**typed)
        args = parser.parse_args(argv)
    return args


def _channel_config(args) -> ChannelConfig:
    if args.scheme is None:
        raise OutcapError("--scheme is required")
    scheme = DiversityScheme(args.scheme)
    m, n = args.m, args.n
    if args.combiner_snr_db is not None:
        if scheme is DiversityScheme.MIMO_OPTIMAL:
            raise OutcapError("mimo-opt takes --link-snr-db")
        return snr_models.config_for_combiner_snr(scheme, m, n, db_to_linear(args.combiner_snr_db))
    if args.link_snr_db is not None:
        if scheme is not DiversityScheme.MIMO_OPTIMAL:
            raise OutcapError("--link-snr-db applies to mimo-opt; use --branch-snr-db")
        return ChannelConfig(scheme, m, n, db_to_linear(args.link_snr_db))
    snr_db = args.branch_snr_db if args.branch_snr_db is not None else 0.0
    return ChannelConfig(scheme, m, n, db_to_linear(snr_db))


def _require_eps(args) -> float:
    if args.eps is None:
        raise OutcapError("--eps is required")
    return args.eps


def _flatten(obj, prefix="") -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        if dataclasses.is_dataclass(value):
            out.update(_flatten(value, f"{prefix}{f.name}."))
        elif isinstance(value, tuple) and value and dataclasses.is_dataclass(value[0]):
            for item in value:
                out[f"{prefix}{item.name}"] = f"{format_number(item.value)} ({'held' if item.held else 'violated'})"
        elif isinstance(value, enum.Enum):
            out[prefix + f.name] = value.value
        elif isinstance(value, float):
            out[prefix + f.name] = format_number(value)
        elif isinstance(value, dict):
            for k, v in value.items():
                key = k.value if isinstance(k, enum.Enum) else k
                out[f"{prefix}{f.name}.{key}"] = format_number(v)
        else:
            out[prefix + f.name] = "" if value is None else str(value)
    return out


def emit(record: dict, fmt: str, out=None):
    out = out or sys.stdout
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(record.keys())
        writer.writerow(record.values())
        return
    width = max(len(k) for k in record)
    for key, value in record.items():
        out.write(f"{key.ljust(width)}  {value}\n")


def _channel_header(cfg: ChannelConfig, eps: float) -> dict:
    return {
        "scheme": cfg.scheme.value,
        "m": str(cfg.m),
        "n": str(cfg.n),
        "eps": format_number(eps),
        "branch_snr_db": format_number(linear_to_db(cfg.branch_snr)),
    }


def single_query(args) -> dict:
    """Evaluate one quantity for one channel and return the printable record."""
    cfg = _channel_config(args)
    eps = _require_eps(args)
    record = _channel_header(cfg, eps)
    command = args.command
    quantity = getattr(args, "quantity", "all")

    if command == "quantile":
        q = (snr_models.ga_quantile(cfg, eps) if args.method == "gaussian_approx"
             else snr_models.combiner_quantile(cfg, eps))
        record.update(_flatten(q))
        record["gamma0_db"] = format_number(linear_to_db(q.gamma0)) if q.gamma0 > 0 else "-inf"
        return record

    if command == "mimo-bounds" or quantity in ("bounds", "asymptotic"):
        edge = getattr(args, "edge_constant", None)
        if quantity == "asymptotic":
            record["asymptotic_benchmark"] = format_number(
                mimo_bounds.asymptotic_benchmark(cfg, eps, edge or "doubled"))
            return record
        rep = mimo_bounds.outage_capacity_bounds(
            cfg, eps, edge, getattr(args, "integer_order", False))
        record.update(_flatten(rep))
        return record

    if command == "mc":
        settings = montecarlo.McSettings(samples=args.samples, seed=args.seed, chunks=args.chunks)
        stats = montecarlo.SampleStats()
        samples = montecarlo.sample_combiner_snr(cfg, settings, stats)
        cdf = None
        if cfg.scheme is not DiversityScheme.MIMO_OPTIMAL:
            cdf = lambda x: snr_models.combiner_cdf(cfg, x)
        est = montecarlo.empirical_quantile(samples, eps, seed=args.seed, cdf=cdf)
        record.update(_flatten(est))
        cap = montecarlo.capacity_from_estimate(est)
        record.update({f"capacity.{k}": v for k, v in _flatten(cap).items()})
        record["power_iter_fallbacks"] = str(stats.power_iter_fallbacks)
        return record

    if quantity in ("approx_high_snr", "approx_low_snr"):
        rep = outage.asymptotic_gap(cfg, eps, quantity.replace("approx_", ""))
        record.update(_flatten(rep))
        return record
    rep = outage.outage_capacity(cfg, eps, args.method)
    full = _flatten(rep)
    if quantity == "all":
        record.update(full)
    else:
        key = {"gap_branch": "gap_vs_branch", "gap_combiner": "gap_vs_combiner",
               "ratio_combiner": "ratio_vs_combiner"}.get(quantity, quantity)
        record["method"] = full["method"]
        record[quantity] = full[key]
    return record


def _sweep_spec(args) -> SweepSpec:
    keys = ("scheme", "variable", "grid", "start", "stop", "points", "spacing", "m", "n",
            "snr_db", "snr_ref", "eps", "outputs", "edge_constant")
    return SweepSpec.from_mapping({k: getattr(args, k) for k in keys})


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
        if args.command == "sweep":
            spec = _sweep_spec(args)
            if args.dump_config:
                sys.stdout.write(spec.to_config())
                return 0
            if args.out:
                with open(args.out, "w", encoding="utf-8", newline="") as fh:
                    rows = run_sweep(spec, fh)
                print(f"wrote {rows} rows to {args.out}", file=sys.stderr)
            else:
                run_sweep(spec, sys.stdout)
            return 0
        if args.command == "validate":
            settings = montecarlo.McSettings(samples=args.samples, seed=args.seed,
                                             chunks=args.chunks)
            summary = run_validation(settings, args.report or sys.stdout,
                                     inject_mismatch=args.inject_mismatch)
            failed = [c.name for c in summary.checks if c.verdict == "fail"]
            print(f"{len(summary.checks)} checks, {len(failed)} failed", file=sys.stderr)
            return 0 if summary.passed else 1
        emit(single_query(args), args.format)
        return 0
    except OutcapError as exc:
        print(f"outcap: error [{exc.code}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
