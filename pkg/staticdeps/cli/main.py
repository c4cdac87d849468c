#!/usr/bin/env python3
"""
Main CLI entry point for staticdeps.

Machine-readable output (JSON, CSV) goes to stdout; diagnostics and logs go
to stderr. Every failure maps to a documented exit code.
"""
import sys
import json
import argparse
import logging
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from rich.console import Console
from rich.table import Table

from staticdeps import __version__
from staticdeps.core.asmmodel import parse_kernel
from staticdeps.core.depcore import UARCH_ROB_SIZES, DepConfig, analyze_amplified
from staticdeps.core.errors import EmptyKernelError, StaticDepsError, UndefinedCoverageError
from staticdeps.core.liftstats import (
    RELEVANCE_THRESHOLD, all_tool_stats, format_lifted, format_stats, lift_all, read_baselines,
    read_predictions, relevant_blocks,
)
from staticdeps.core.oracle import (
    OracleConfig, RegInit, aggregate_coverage, coverage_sweep, lifetime_label, run_concrete,
)
from staticdeps.models.benchmarks import DISCARDED_MARKER, STATS_FIELDS, BenchmarkRecord
from staticdeps.models.kernel import Kernel
from staticdeps.models.reports import CoverageReport, DepReport, DynamicTrace
from staticdeps.utils.config import Config, parse_hex, parse_lifetime, parse_seeds
from staticdeps.utils.logger import log_duration, setup_logger

logger = logging.getLogger("staticdeps.cli")

FORMATS = ("json", "text", "csv")


def _positive_int(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: '{text}'") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {value}")
    return value


def _add_analysis_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('static analysis')
    group.add_argument('--rob-size', type=_positive_int, help='Reorder buffer size in instructions (default 224)')
    group.add_argument('--uarch', choices=sorted(UARCH_ROB_SIZES), help='Take the ROB size from a microarchitecture preset')
    group.add_argument('--seeds', type=str, help='Comma-separated seeds (default 1,2,3 or $STATICDEPS_SEEDS)')
    group.add_argument('--spurious-threshold', type=float, help='Minimum hit fraction of a dependency (default 0.80)')
    group.add_argument('--base-address', type=str, help='Synthetic address of instruction 0, hex (default 0x400000)')


def _add_relevance_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--relevant-only', nargs='?', type=float, const=RELEVANCE_THRESHOLD, metavar='FRACTION',
        help=f'Ignore blocks hit less than FRACTION times as often as the hottest block of their '
             f'benchmark (default {RELEVANCE_THRESHOLD:.2f} when given without a value)')


def _add_oracle_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group('oracle')
    group.add_argument('--iterations', type=_positive_int, help='Kernel iterations to execute (default 64)')
    group.add_argument('--reg-init', type=str, help='uniform:HEX or distinct:SEED (default distinct:42)')
    group.add_argument('--mem-fill', type=str, help='Value of never-written memory, hex (default 0x2324000)')
    group.add_argument('--lifetime', type=str, help='Maximum write-to-read distance in instructions (default unbounded)')


def create_parser() -> argparse.ArgumentParser:
    """Create CLI argument parser."""
    parser = argparse.ArgumentParser(
        prog='staticdeps',
        description="staticdeps - memory-carried dependencies of assembly basic blocks",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s deps kernel.s --seeds 1,2,3          # Static dependencies as JSON
  %(prog)s oracle kernel.s --reg-init uniform:0x2324000
  %(prog)s cov kernels/*.s --lifetimes inf,1024,512
  %(prog)s lift predictions.csv                 # Lifted cycles per benchmark and tool
  %(prog)s stats predictions.csv baselines.csv --best
        """
    )

    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--debug', action='store_true', help='Enable debug logging')
    parser.add_argument('--config', type=str, help='Path to configuration file')

    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True

    deps = subparsers.add_parser('deps', help='Extract static dependencies of a kernel')
    deps.add_argument('kernel', help='Assembly file, or - for stdin')
    _add_analysis_flags(deps)
    deps.add_argument('--format', choices=FORMATS)

    oracle = subparsers.add_parser('oracle', help='Run the concrete-execution oracle on a kernel')
    oracle.add_argument('kernel', help='Assembly file, or - for stdin')
    _add_oracle_flags(oracle)
    oracle.add_argument('--base-address', type=str, help='Synthetic address of instruction 0, hex')
    oracle.add_argument('--format', choices=FORMATS)

    cov = subparsers.add_parser('cov', help='Coverage of the oracle dependencies by the static analysis')
    cov.add_argument('kernels', nargs='+', help='Assembly files')
    _add_analysis_flags(cov)
    _add_oracle_flags(cov)
    cov.add_argument('--lifetimes', type=str, help='Comma-separated lifetimes to sweep, e.g. inf,1024,512')
    cov.add_argument('--format', choices=FORMATS)

    lift_cmd = subparsers.add_parser('lift', help='Lift block predictions to benchmark predictions')
    lift_cmd.add_argument('predictions', help='benchmark,block,occurrences,tool,pred_cycles CSV')
    _add_relevance_flag(lift_cmd)
    lift_cmd.add_argument('--format', choices=FORMATS)

    stats = subparsers.add_parser('stats', help='Error statistics of lifted predictions against baselines')
    stats.add_argument('predictions', help='benchmark,block,occurrences,tool,pred_cycles CSV')
    stats.add_argument('baselines', help='benchmark,baseline_cycles CSV')
    _add_relevance_flag(stats)
    stats.add_argument('--best', action='store_true', help='Add a row with the best prediction per benchmark')
    stats.add_argument('--format', choices=FORMATS)

    return parser


# --- configuration --------------------------------------------------------

def build_dep_config(args: argparse.Namespace, config: Config) -> DepConfig:
    """Configured analysis settings with command-line overrides applied."""
    if args.uarch:
        config.analysis.uarch = args.uarch
        config.analysis.rob_size = None
    if args.rob_size is not None:
        config.analysis.rob_size = args.rob_size
    if args.seeds:
        config.analysis.seeds = parse_seeds(args.seeds)
    if args.spurious_threshold is not None:
        config.analysis.spurious_threshold = args.spurious_threshold
    if args.base_address:
        config.analysis.base_address = parse_hex(args.base_address, 'base address')
    return config.dep_config()


def build_oracle_config(args: argparse.Namespace, config: Config) -> OracleConfig:
    if args.iterations is not None:
        config.oracle.iterations = args.iterations
    if args.reg_init:
        RegInit.parse(args.reg_init)
        config.oracle.reg_init = args.reg_init
    if args.mem_fill:
        config.oracle.mem_fill = parse_hex(args.mem_fill, 'memory fill')
    if args.lifetime:
        config.oracle.lifetime = parse_lifetime(args.lifetime)
    if getattr(args, 'base_address', None):
        config.analysis.base_address = parse_hex(args.base_address, 'base address')
    return config.oracle_config()


def read_text(path: str) -> str:
    if path == '-':
        return sys.stdin.read()
    return Path(path).read_text(encoding='utf-8')


def load_kernel(path: str, base_address: int) -> Kernel:
    kernel = parse_kernel(read_text(path), base_address=base_address)
    if kernel.is_empty:
        raise EmptyKernelError(f"{path}: kernel contains no instructions")
    return kernel


# --- rendering ------------------------------------------------------------

def _console() -> Console:
    return Console(file=sys.stdout, highlight=False, soft_wrap=True)


def _csv_lines(header: Sequence[str], rows: List[Sequence[object]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(str(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def render_deps(report: DepReport, kernel: Kernel, fmt: str) -> None:
    if fmt == 'json':
        print(report.to_json())
    elif fmt == 'csv':
        rows = [(d.src, d.dst, d.delta_k, d.hits, d.eligible) for d in report.dependencies]
        print(_csv_lines(("src", "dst", "dk", "hits", "eligible"), rows), end="")
    else:
        table = Table(title=f"{len(report.dependencies)} memory dependencies "
                            f"(rob {report.rob_size}, {report.copies} copies)")
        for column in ("src", "dst", "dk", "hits", "writer", "reader"):
            table.add_column(column)
        for d in report.dependencies:
            table.add_row(str(d.src), str(d.dst), str(d.delta_k), f"{d.hits}/{d.eligible}",
                          kernel[d.src].to_text(), kernel[d.dst].to_text())
        console = _console()
        console.print(table)
        if report.dropped_bottom_stores:
            console.print(f"dropped stores with unknown address: {report.dropped_bottom_stores}")


def render_trace(trace: DynamicTrace, kernel: Kernel, fmt: str) -> None:
    if fmt == 'json':
        print(trace.to_json())
    elif fmt == 'csv':
        rows = [(d.src, d.dst, d.rho) for d in trace.dependencies]
        print(_csv_lines(("src", "dst", "rho"), rows), end="")
    else:
        table = Table(title=f"{len(trace)} dynamic dependencies over {trace.iterations} "
                            f"iterations ({trace.reg_init})")
        for column in ("src", "dst", "rho", "writer", "reader"):
            table.add_column(column)
        for d in trace.dependencies:
            table.add_row(str(d.src), str(d.dst), str(d.rho),
                          kernel[d.src].to_text(), kernel[d.dst].to_text())
        console = _console()
        console.print(table)
        if trace.suspicious_addresses:
            console.print(f"suspicious addresses: {trace.suspicious_addresses}")


def _pct(value: float) -> str:
    return f"{100 * value:.1f}"


def render_coverage(rows: List[CoverageReport], fmt: str) -> None:
    if fmt == 'json':
        print(json.dumps([row.to_dict() for row in rows], indent=2))
    elif fmt == 'csv':
        data = [(r.label, r.found, r.missed, _pct(r.cov_u), _pct(r.cov_w)) for r in rows]
        print(_csv_lines(("kernel", "found", "missed", "cov_u", "cov_w"), data), end="")
    else:
        table = Table(title="Dependency coverage")
        for column in ("kernel", "found", "missed", "cov_u", "cov_w"):
            table.add_column(column)
        for r in rows:
            table.add_row(r.label, str(r.found), str(r.missed),
                          f"{_pct(r.cov_u)}%", f"{_pct(r.cov_w)}%")
        _console().print(table)


def _render_rows(header: Sequence[str], rows: List[Dict[str, str]], title: str) -> None:
    table = Table(title=title)
    for column in header:
        table.add_column(column)
    for row in rows:
        table.add_row(*(row[c] for c in header))
    _console().print(table)


# --- commands -------------------------------------------------------------

def cmd_deps(args: argparse.Namespace, config: Config) -> int:
    """Static dependencies of one kernel."""
    cfg = build_dep_config(args, config)
    kernel = load_kernel(args.kernel, cfg.synthetic_base_address)
    with log_duration(logger, 'deps', path=args.kernel, seeds=list(cfg.seeds)):
        report = analyze_amplified(kernel, cfg)
    render_deps(report, kernel, args.format or config.output.deps)
    return 0


def cmd_oracle(args: argparse.Namespace, config: Config) -> int:
    cfg = build_oracle_config(args, config)
    kernel = load_kernel(args.kernel, cfg.synthetic_base_address)
    with log_duration(logger, 'oracle', path=args.kernel, iterations=cfg.iterations):
        trace = run_concrete(kernel, cfg)
    render_trace(trace, kernel, args.format or config.output.oracle)
    return 0


def cmd_cov(args: argparse.Namespace, config: Config) -> int:
    """Coverage per kernel and lifetime, plus dataset totals for several kernels."""
    dep_cfg = build_dep_config(args, config)
    oracle_cfg = build_oracle_config(args, config)
    if args.lifetimes:
        lifetimes = [parse_lifetime(item) for item in args.lifetimes.split(",")]
    else:
        lifetimes = [oracle_cfg.lifetime]
    oracle_cfg = replace(oracle_cfg, synthetic_base_address=dep_cfg.synthetic_base_address)

    single = len(args.kernels) == 1
    per_lifetime: Dict[Optional[int], List[CoverageReport]] = {lt: [] for lt in lifetimes}
    rows: List[CoverageReport] = []
    for path in args.kernels:
        kernel = load_kernel(path, dep_cfg.synthetic_base_address)
        static = analyze_amplified(kernel, dep_cfg)
        for lifetime in lifetimes:
            try:
                (report,) = coverage_sweep(static, kernel, oracle_cfg, [lifetime])
            except UndefinedCoverageError:
                if single:
                    raise
                logger.warning("%s: no dynamic dependencies at lifetime %s; skipped",
                               path, lifetime_label(lifetime))
                continue
            report.label = path if len(lifetimes) == 1 else f"{path}@{lifetime_label(lifetime)}"
            rows.append(report)
            per_lifetime[lifetime].append(report)

    if not single:
        for lifetime in lifetimes:
            label = "total" if len(lifetimes) == 1 else f"total@{lifetime_label(lifetime)}"
            try:
                rows.append(aggregate_coverage(per_lifetime[lifetime], label=label))
            except UndefinedCoverageError:
                if not rows:
                    raise
    render_coverage(rows, args.format or config.output.cov)
    return 0


def _load_predictions(args: argparse.Namespace) -> List[BenchmarkRecord]:
    with open(args.predictions, newline='', encoding='utf-8') as f:
        records = read_predictions(f)
    if args.relevant_only is not None:
        records = relevant_blocks(records, args.relevant_only)
    return records


def cmd_lift(args: argparse.Namespace, config: Config) -> int:
    records = _load_predictions(args)
    fmt = args.format or config.output.lift
    if fmt == 'csv':
        print(format_lifted(records), end="")
        return 0
    lifted = lift_all(records)
    if fmt == 'json':
        print(json.dumps([
            {"benchmark": benchmark, "tool": tool, "lifted_cycles": value}
            for benchmark, by_tool in lifted.items() for tool, value in by_tool.items()
        ], indent=2))
    else:
        rows = [
            {"benchmark": benchmark, "tool": tool,
             "lifted_cycles": DISCARDED_MARKER if value is None else f"{value:.2f}"}
            for benchmark, by_tool in lifted.items() for tool, value in by_tool.items()
        ]
        _render_rows(("benchmark", "tool", "lifted_cycles"), rows, "Lifted predictions")
    return 0


def cmd_stats(args: argparse.Namespace, config: Config) -> int:
    records = _load_predictions(args)
    with open(args.baselines, newline='', encoding='utf-8') as f:
        baselines = read_baselines(f)
    rows = all_tool_stats(records, baselines, include_best=args.best)
    fmt = args.format or config.output.stats
    if fmt == 'csv':
        print(format_stats(rows), end="")
    elif fmt == 'json':
        print(json.dumps([row.to_row() for row in rows], indent=2))
    else:
        _render_rows(STATS_FIELDS, [row.to_row() for row in rows], "Prediction error")
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, Config], int]] = {
    'deps': cmd_deps,
    'oracle': cmd_oracle,
    'cov': cmd_cov,
    'lift': cmd_lift,
    'stats': cmd_stats,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    parser = create_parser()
    args = parser.parse_args(argv)

    try:
        config = Config(config_file=args.config, debug=args.debug)
        setup_logger(
            'staticdeps',
            level=config.logging.level,
            log_dir=config.logging.log_dir,
            structured=config.logging.structured,
            console_output=config.logging.console_output,
            rotation_mb=config.logging.file_rotation_mb,
            backup_count=config.logging.backup_count,
        )
        return COMMANDS[args.command](args, config)
    except StaticDepsError as e:
        print(f"staticdeps: error: {e}", file=sys.stderr)
        logger.debug("exiting with %d", e.exit_code, extra={'exit_code': e.exit_code})
        return e.exit_code
    except OSError as e:
        print(f"staticdeps: error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"staticdeps: error: {e}", file=sys.stderr)
        return 1


def main():
    """Main CLI entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
