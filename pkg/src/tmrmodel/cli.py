"""Command-line entry point: ``tmrmodel {analyze,sweep,export-prism,simulate,check,calibrate}``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import engine
from .builder import CompositionError, build_system, export_prism
from .ingest import (
    AnalysisConfig, IngestError, parse_config, parse_dfg, parse_duration, parse_library,
    parse_rate, partition_rates, plan_partitions,
)
from .model import PartitionPlan
from .properties import (
    PropertySyntaxError, UnsupportedPropertyError, evaluate_property, format_property,
    parse_property,
)
from .simulator import simulate
from .sweep import (
    DesignPoint, DesignPointError, calibrate_lambda_bit, calibrated, design_chain, effective_params,
    emit_csv, evaluate, run_sweep, _fmt,
)

log = logging.getLogger("tmrmodel")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_VIOLATED = 0, 1, 2, 3
LIBRARY_ENV = "TMRMODEL_LIBRARY"


def _bundled(name: str) -> str:
    return resources.files("tmrmodel").joinpath("data", name).read_text(encoding="utf-8")


def _read(path: str | None, fallback: str) -> str:
    if path is None:
        return _bundled(fallback)
    return Path(path).read_text(encoding="utf-8")


def _load(args):
    lib_path = args.library or os.environ.get(LIBRARY_ENV)
    library = parse_library(_read(lib_path, "library.csv"))
    dfg = parse_dfg(_read(args.dfg, "fir64.json"), library)
    config = parse_config(Path(args.config).read_text(encoding="utf-8")) if args.config else AnalysisConfig()
    overrides = {}
    if args.model:
        overrides["model_kinds"] = tuple("scu_only" if m == "scu" else m for m in args.model)
    if args.partitions:
        overrides["partitions"] = tuple(args.partitions)
        overrides["cuts"] = None
    if args.scrub:
        overrides["scrub_intervals"] = tuple(parse_duration(s) for s in args.scrub)
    params = config.params
    if args.mission_time:
        params = replace(params, mission_time=parse_duration(args.mission_time))
    if args.lambda_voter is not None:
        params = replace(params, lambda_voter=parse_rate(args.lambda_voter))
    if args.lambda_bit is not None:
        params = replace(params, lambda_bit=parse_rate(args.lambda_bit))
    config = replace(config, params=params, **overrides)
    problems = config.violations()
    if problems:
        raise IngestError("; ".join(problems))
    return dfg, library, config


def _split(text: str) -> list[str]:
    return [t for t in text.split(",") if t]


def _write(args, text: str):
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _single_point(config: AnalysisConfig) -> DesignPoint:
    if len(config.model_kinds) != 1 or len(config.scrub_intervals) != 1 or len(config.partitions) != 1:
        raise IngestError("this command needs exactly one model, partition count and scrub interval")
    return DesignPoint(config.model_kinds[0], config.partitions[0], config.scrub_intervals[0])


def _point_chain(dfg, library, config, point):
    return design_chain(dfg, library, config.params, point.model_kind, point.partitions,
                        point.scrub_interval,
                        terminal_voter=config.include_terminal_voter_partition, cuts=config.cuts)


def cmd_analyze(args) -> int:
    dfg, library, config = _load(args)
    config = calibrated(config, dfg, library)
    point = _single_point(config)
    chain = _point_chain(dfg, library, config, point)
    row = evaluate(chain, point, config.params.mission_time, config.outputs, config.eps,
                   config.reliability_label)
    _write(args, emit_csv([row]))
    status = EXIT_OK
    for text in args.property or ():
        q = parse_property(text)
        value = evaluate_property(q, chain, config.eps)
        if isinstance(value, bool):
            print(f"{format_property(q)}\t{str(value).lower()}")
            if not value:
                status = EXIT_VIOLATED
        else:
            print(f"{format_property(q)}\t{_fmt(value)}")
    return status


def cmd_sweep(args) -> int:
    dfg, library, config = _load(args)
    if args.trials is not None:
        config = replace(config, simulate_trials=args.trials)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    rows = run_sweep(config, dfg, library, jobs=args.jobs)
    _write(args, emit_csv(rows))
    return EXIT_OK


def cmd_export(args) -> int:
    dfg, library, config = _load(args)
    config = calibrated(config, dfg, library)
    point = _single_point(config)
    p = effective_params(config.params, point.model_kind, point.scrub_interval)
    if config.cuts is not None:
        plan = PartitionPlan(config.cuts, config.include_terminal_voter_partition)
    else:
        plan = plan_partitions(dfg, point.partitions, config.include_terminal_voter_partition)
    modules, sync = build_system(partition_rates(dfg, library, plan, p), p.mu, point.model_kind)
    _write(args, export_prism(modules, sync))
    return EXIT_OK


def cmd_simulate(args) -> int:
    dfg, library, config = _load(args)
    config = calibrated(config, dfg, library)
    point = _single_point(config)
    chain = _point_chain(dfg, library, config, point)
    T = config.params.mission_time
    trials = args.trials or config.simulate_trials or 10_000
    seed = config.seed if args.seed is None else args.seed
    rel, av = simulate(chain, T, trials, seed, label=config.reliability_label, workers=args.jobs)
    analytic = {"reliability": engine.reliability(chain, T, config.eps, config.reliability_label),
                "availability": engine.availability(chain, T, config.eps)}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "estimate", "half_width", "lower", "upper", "trials", "seed", "analytic", "covered"])
    for est in (rel, av):
        a = analytic[est.metric]
        w.writerow([est.metric, _fmt(est.estimate), _fmt(est.half_width), _fmt(est.lower),
                    _fmt(est.upper), est.trials, est.seed, _fmt(a), str(est.covers(a)).lower()])
    _write(args, buf.getvalue())
    return EXIT_OK


def cmd_check(args) -> int:
    dfg, library, config = _load(args)
    point = _single_point(config)
    chain = _point_chain(dfg, library, config, point)
    ok = engine.check_scrub_recoverability(chain)
    print(f"{format_property(parse_property('forall next operational'))}\t{str(ok).lower()}")
    return EXIT_OK if ok else EXIT_VIOLATED


def cmd_calibrate(args) -> int:
    dfg, library, config = _load(args)
    lb = calibrate_lambda_bit(dfg, library, replace(config.params, lambda_voter=0.0),
                              target=args.target, tau=parse_duration(args.at_scrub),
                              partitions=args.at_partitions, eps=config.eps)
    print(f"lambda_bit\t{lb!r}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors, not argparse's default status 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tmrmodel", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    common = _Parser(add_help=False)
    common.add_argument("--dfg", help="DFG JSON file (default: bundled 64-tap FIR)")
    common.add_argument("--library", help=f"kind,critical_bits CSV (default: ${LIBRARY_ENV} or bundled sample)")
    common.add_argument("--config", help="YAML analysis config")
    common.add_argument("--model", type=_split, help="scu, combined, or both comma-separated")
    common.add_argument("--partitions", type=lambda s: [int(x) for x in _split(s)],
                        help="partition count(s), comma-separated")
    common.add_argument("--scrub", type=_split, help="scrub interval(s), e.g. 15min,1h")
    common.add_argument("--mission-time", help="mission time, e.g. 730h")
    common.add_argument("--lambda-voter", help="voter failure rate, e.g. 5e-3/h")
    common.add_argument("--lambda-bit", help="upset rate per bit, e.g. 7.31e-12/s")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("analyze", parents=[common], help="evaluate one design point")
    p.add_argument("--property", action="append", help="query such as 'P=?[G[0,730h] up]'")
    p.set_defaults(func=cmd_analyze)
    p = sub.add_parser("sweep", parents=[common], help="evaluate the partition x scrub grid")
    p.add_argument("--trials", type=int, help="add simulated rows with this many trials")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("export-prism", parents=[common], help="write the PRISM model of one design point")
    p.set_defaults(func=cmd_export)
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo cross-check of one design point")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("check", parents=[common], help="scrub-recoverability correctness property")
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("calibrate", parents=[common], help="fit lambda_bit to a target reliability")
    p.add_argument("--target", type=float, default=0.65)
    p.add_argument("--at-scrub", default="15min")
    p.add_argument("--at-partitions", type=int, default=1)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DesignPointError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC if isinstance(exc.cause, engine.NumericalError) else EXIT_INPUT
    except (IngestError, PropertySyntaxError, UnsupportedPropertyError, CompositionError,
            OSError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except (engine.NumericalError, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
