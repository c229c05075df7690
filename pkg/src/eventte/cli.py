"""Command-line driver: ingest, run, network, synth, selftest.

Exit codes: 0 success, 1 selftest failure, 2 unreadable or malformed
input, 3 invalid configuration, 4 no computable pairs.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__, analysis, synth
from .config import ConfigError, RunConfig
from .ingest import MalformedLineError, read_paths, to_returns, write_ticks

log = logging.getLogger("eventte")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_CONFIG, EXIT_NO_PAIRS = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _load_days(config: RunConfig):
    try:
        parsed = read_paths(config.input, config.session, config.on_bad_line)
    except MalformedLineError as exc:
        raise CliError(EXIT_INPUT, f"malformed input: {exc}") from None
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read input: {exc}") from None
    days: Dict = {}
    for (inst, day), ticks in parsed.series.items():
        days.setdefault(day, {})[inst] = to_returns(ticks)
    return parsed, days


def run(config: RunConfig) -> dict:
    """Full pipeline for one configuration; returns the manifest it wrote."""
    config.validate()
    parsed, days = _load_days(config)
    acfg = config.analysis()
    out = Path(config.out)
    files: List[str] = []
    aggregates: Dict[str, List[analysis.DailyAggregate]] = {}
    entropy_rows = ["day,instrument,n_events,entropy"]
    defined = 0
    missing = 0
    instruments = set()

    def emit(rel: str, text: str) -> None:
        _write(out / rel, text)
        files.append(rel)

    for day in sorted(days):
        data = {k: v for k, v in days[day].items() if len(v) > 0}
        for inst in sorted(days[day]):
            rs = days[day][inst]
            h = analysis.daily_entropy(rs, acfg.alphabet)
            entropy_rows.append(f"{day},{inst},{len(rs)},{analysis._fmt(h)}")
        if len(data) < 2:
            continue
        instruments.update(data)
        log.info("%s: %d instruments", day, len(data))
        mats = analysis.pair_matrices(data, acfg, day=day)
        for kind, m in mats.items():
            cands = m.candidates()
            defined += len(cands)
            n = len(m.instruments)
            missing += (n * (n - 1) // (1 if m.directed else 2)) - len(cands)
            emit(f"matrices/{day}/{kind}.csv", analysis.matrix_to_csv(m))
            if m.directed:
                for extra in ("shuffle_mean", "shuffle_std"):
                    em = analysis.PairMatrix(day, m.instruments, f"{kind}_{extra}",
                                             getattr(m, extra), m.counts)
                    emit(f"matrices/{day}/{kind}_{extra}.csv", analysis.matrix_to_csv(em))
                aggregates.setdefault(kind, []).append(analysis.aggregates(m))
            if kind == "mi" or not cands:
                continue
            net = analysis.extract_network(m, config.rule_for(kind))
            emit(f"networks/{day}/{kind}_edges.csv", analysis.edges_to_csv(net))
            emit(f"networks/{day}/{kind}_nodes.csv", analysis.nodes_to_csv(net))
            emit(f"networks/{day}/{kind}.json", net.to_json() + "\n")

    if defined == 0:
        raise CliError(EXIT_NO_PAIRS, "no computable pairs")
    for kind in sorted(aggregates):
        emit(f"aggregates_{kind}.csv", analysis.aggregates_to_csv(aggregates[kind]))
    emit("entropy.csv", "\n".join(entropy_rows) + "\n")
    emit("config.txt", config.to_text(include_out=False))
    manifest = {
        "tool": "eventte",
        "version": __version__,
        "config": config.to_dict(include_out=False),
        "counts": {
            "days": len(days),
            "instruments": len(instruments),
            "series": len(parsed.series),
            "dropped_records": parsed.dropped,
            "skipped_records": parsed.skipped,
            "defined_entries": defined,
            "missing_entries": missing,
        },
        "files": sorted(files),
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# subcommands ------------------------------------------------------------------

def _overrides(args, keys: Sequence[str]) -> dict:
    return {k: getattr(args, k, None) for k in keys}


RUN_KEYS = ("input", "session_open", "session_close", "on_bad_line", "delta_t", "alphabet",
            "lag", "te_mode", "shuffles", "significance", "min_records", "network_rule",
            "pearson_threshold", "te_threshold", "top_quantile", "seed", "threads", "out")


def _config(args) -> RunConfig:
    try:
        return RunConfig.resolve(args.config, _overrides(args, RUN_KEYS))
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"invalid config: {exc}") from None
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"cannot read config: {exc}") from None


def cmd_run(args) -> int:
    config = _config(args)
    manifest = run(config)
    c = manifest["counts"]
    print(f"{c['days']} days, {c['instruments']} instruments, "
          f"{c['defined_entries']} entries ({c['missing_entries']} missing), "
          f"{c['dropped_records']} records dropped -> {config.out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    config = _config(args)
    parsed, days = _load_days(config)
    out = Path(config.out)
    lines = ["day,instrument,time,value"]
    for day in sorted(days):
        for inst in sorted(days[day]):
            rs = days[day][inst]
            lines.extend(f"{day},{inst},{t!r},{v!r}" for t, v in zip(rs.times.tolist(),
                                                                rs.values.tolist()))
    _write(out / "returns.csv", "\n".join(lines) + "\n")
    summary = {"series": len(parsed.series), "days": len(days),
               "dropped_records": parsed.dropped, "skipped_records": parsed.skipped}
    _write(out / "ingest_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"{summary['series']} series over {summary['days']} days; "
          f"{parsed.dropped} out-of-session, {parsed.skipped} skipped")
    return EXIT_OK


def _parse_rule(text: str) -> analysis.ThresholdRule:
    kind, _, value = text.partition(":")
    try:
        if kind == "absolute":
            return analysis.ThresholdRule.absolute(float(value))
        if kind in ("top_quantile", "top-quantile"):
            return analysis.ThresholdRule.top_quantile(float(value))
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"invalid rule {text!r}: {exc}") from None
    raise CliError(EXIT_CONFIG, f"rule must be absolute:THETA or top_quantile:Q, got {text!r}")


def cmd_network(args) -> int:
    rule = _parse_rule(args.rule)
    try:
        with open(args.matrix, encoding="utf-8") as fh:
            m = analysis.matrix_from_csv(fh.read())
    except (OSError, ValueError, IndexError) as exc:
        raise CliError(EXIT_INPUT, f"cannot read matrix: {exc}") from None
    if not m.candidates():
        raise CliError(EXIT_NO_PAIRS, "no computable pairs")
    net = analysis.extract_network(m, rule)
    out = Path(args.out or "out")
    stem = Path(args.matrix).stem
    _write(out / f"{stem}_edges.csv", analysis.edges_to_csv(net))
    _write(out / f"{stem}_nodes.csv", analysis.nodes_to_csv(net))
    _write(out / f"{stem}.json", net.to_json() + "\n")
    print(f"{len(net.edges)} edges -> {out}")
    return EXIT_OK


def _read_spec(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_CONFIG, f"cannot read spec: {exc}") from None


def _markov_spec(doc: dict) -> synth.MarkovSpec:
    preset = doc.get("preset", None if "kernel" in doc else "copy")
    if preset == "copy":
        return synth.copy_kernel(float(doc.get("eps", 0.0)), int(doc.get("states", 2)))
    if preset == "independent":
        s = int(doc.get("states", 2))
        u = np.full((s, s), 1.0 / s)
        return synth.independent_kernel(u, u)
    if preset is not None:
        raise synth.InvalidSpecError(f"unknown preset {preset!r}")
    return synth.MarkovSpec.from_dict(doc)


def cmd_synth(args) -> int:
    doc = _read_spec(args.spec)
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    try:
        if args.model == "markov":
            spec = _markov_spec(doc)
            ticks = synth.markov_ticks(spec, args.n or 10000, seed=seed)
        elif args.model == "events":
            fields = {k: v for k, v in doc.items() if k != "day"}
            fields["seed"] = seed
            if args.n:
                fields["rate_target"] = args.n / fields.get("session_length", synth.SESSION_LENGTH)
            ticks = list(synth.gen_event_ticks(synth.EventStreamSpec(**fields)))
        else:
            fields = dict(doc)
            fields["seed"] = seed
            if "start_day" in fields:
                fields["start_day"] = dt.date.fromisoformat(fields["start_day"])
            if args.n:
                fields["n_days"] = args.n
                fields.setdefault("change_day", args.n // 2)
            ticks = synth.gen_regime_ticks(synth.RegimeSpec(**fields))
    except (TypeError, ValueError, KeyError) as exc:
        raise CliError(EXIT_CONFIG, f"invalid spec: {exc}") from None
    target = Path(args.out or "synth.csv")
    if target.suffix != ".csv":
        target = target / f"{args.model}.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="") as fh:
        write_ticks(ticks, fh)
    print(f"{sum(len(t) for t in ticks)} ticks -> {target}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest
    return run_selftest(seed=args.seed or 0)


# parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (key = value) or a run manifest")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads, 0 = auto")
    common.add_argument("-v", "--verbose", action="store_true")

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--input", nargs="+", metavar="PATH")
    inputs.add_argument("--session-open", dest="session_open", metavar="HH:MM")
    inputs.add_argument("--session-close", dest="session_close", metavar="HH:MM")
    inputs.add_argument("--on-bad-line", dest="on_bad_line", choices=("abort", "skip"))

    p = argparse.ArgumentParser(prog="eventte", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", parents=[common, inputs], help="parse ticks into returns")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("run", parents=[common, inputs], help="full per-day pipeline")
    sp.add_argument("--delta-t", dest="delta_t", type=float, metavar="SECONDS")
    sp.add_argument("--alphabet", help="sign or quantile:Q")
    sp.add_argument("--lag", type=int, metavar="K")
    sp.add_argument("--te-mode", dest="te_mode", choices=("event", "binned", "both"))
    sp.add_argument("--shuffles", type=int, metavar="M")
    sp.add_argument("--significance", type=float)
    sp.add_argument("--min-records", dest="min_records", type=int)
    sp.add_argument("--network-rule", dest="network_rule", choices=("absolute", "top_quantile"))
    sp.add_argument("--pearson-threshold", dest="pearson_threshold", type=float)
    sp.add_argument("--te-threshold", dest="te_threshold", type=float)
    sp.add_argument("--top-quantile", dest="top_quantile", type=float)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("network", parents=[common], help="threshold a matrix CSV")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--rule", default="absolute:0.05", help="absolute:THETA or top_quantile:Q")
    sp.set_defaults(func=cmd_network)

    sp = sub.add_parser("synth", parents=[common], help="write synthetic tick-CSV")
    sp.add_argument("model", choices=("markov", "events", "regime"))
    sp.add_argument("--spec", help="JSON spec file")
    sp.add_argument("--n", type=int, help="steps (markov), target events (events), days (regime)")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("selftest", parents=[common], help="oracle and invariant suite")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"eventte: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
