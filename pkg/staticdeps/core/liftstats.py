"""
Prediction lifting and error statistics.

Block-level predictions are lifted to whole-benchmark predictions by
weighting every block with its occurrence count. Lifted predictions are
compared with a measured baseline; per-tool rows report the failure rate,
the mean absolute percentage error, its quartiles and Kendall's tau
between predicted and measured cycles.
"""
import csv
import io
import logging
from typing import (
    Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple, TypeVar,
)

import numpy as np
from scipy import stats

from ..models.benchmarks import (
    DISCARDED_MARKER,
    FAIL_MARKER,
    STATS_FIELDS,
    BenchmarkRecord,
    BlockPrediction,
    ErrorStats,
)
from .errors import ConfigError, MalformedInputError, MissingBaselineError, UndefinedStatisticError

logger = logging.getLogger(__name__)

RELEVANCE_THRESHOLD = 0.10
BEST_TOOL = "best"

PREDICTION_FIELDS = ("benchmark", "block", "occurrences", "tool", "pred_cycles")
BASELINE_FIELDS = ("benchmark", "baseline_cycles")

T = TypeVar("T", bound=Hashable)


def lift(record: BenchmarkRecord, tool: str) -> Optional[float]:
    """Sum of occurrences * predicted cycles, or None if any block failed."""
    blocks = record.predictions.get(tool)
    if blocks is None:
        raise MalformedInputError(f"benchmark '{record.benchmark}' has no predictions for {tool}")
    total = 0.0
    for block in blocks:
        if block.predicted_cycles is None:
            return None
        total += block.occurrences * block.predicted_cycles
    return total


def relative_error(pred: float, baseline: float) -> float:
    if baseline <= 0:
        raise MalformedInputError(f"baseline must be positive, got {baseline}")
    return abs(pred - baseline) / baseline


def summarize(errors: Sequence[float], failures: int = 0, tool: str = "") -> ErrorStats:
    """MAPE and quartiles (linear interpolation), in percent."""
    if len(errors) == 0:
        where = f" for tool '{tool}'" if tool else ""
        raise UndefinedStatisticError(f"no datapoints to summarize{where}")
    values = np.asarray(errors, dtype=float)
    q1, median, q3 = np.percentile(values, [25, 50, 75])
    return ErrorStats(
        tool=tool,
        datapoints=len(values),
        failures=failures,
        mape=float(values.mean() * 100),
        median=float(median * 100),
        q1=float(q1 * 100),
        q3=float(q3 * 100),
    )


def kendall_tau(pred_cycles: Sequence[float], baseline_cycles: Sequence[float]) -> float:
    """Tie-corrected Kendall rank correlation (tau-b)."""
    if len(pred_cycles) != len(baseline_cycles):
        raise UndefinedStatisticError("kendall tau needs two lists of equal length")
    if len(pred_cycles) < 2:
        raise UndefinedStatisticError("kendall tau needs at least two datapoints")
    if len(set(pred_cycles)) < 2 or len(set(baseline_cycles)) < 2:
        raise UndefinedStatisticError("kendall tau is undefined for constant input")
    tau, _ = stats.kendalltau(pred_cycles, baseline_cycles, variant="b")
    if np.isnan(tau):
        raise UndefinedStatisticError("kendall tau is undefined for this input")
    return float(tau)


def relevance_filter(blocks: Sequence[Tuple[T, int]],
                     threshold: float = RELEVANCE_THRESHOLD) -> List[Tuple[T, int]]:
    """Drop blocks hit less than ``threshold`` times as often as the hottest one."""
    if not blocks:
        raise ValueError("relevance_filter needs at least one block")
    cutoff = threshold * max(occ for _, occ in blocks)
    return [(block, occ) for block, occ in blocks if occ + 1e-9 >= cutoff]


def relevant_blocks(records: Sequence[BenchmarkRecord],
                    threshold: float = RELEVANCE_THRESHOLD) -> List[BenchmarkRecord]:
    """Copies of ``records`` keeping only the relevant blocks of every tool.

    A tool that failed only on dropped blocks is no longer discarded for the
    benchmark.
    """
    if not 0 < threshold <= 1:
        raise ConfigError(f"relevance threshold must be in (0, 1], got {threshold}")
    kept: List[BenchmarkRecord] = []
    for record in records:
        filtered = BenchmarkRecord(record.benchmark)
        for tool, blocks in record.predictions.items():
            relevant = relevance_filter([(b, b.occurrences) for b in blocks], threshold)
            for block, _ in relevant:
                filtered.add(tool, block)
            if len(relevant) < len(blocks):
                logger.debug("%s/%s: dropped %d of %d blocks below the relevance threshold",
                             record.benchmark, tool, len(blocks) - len(relevant), len(blocks))
        kept.append(filtered)
    return kept


def _baseline(baselines: Mapping[str, float], benchmark: str) -> float:
    try:
        return baselines[benchmark]
    except KeyError:
        raise MissingBaselineError(benchmark) from None


def _error_row(tool: str, lifted: Iterable[Tuple[str, Optional[float]]],
               baselines: Mapping[str, float]) -> ErrorStats:
    errors: List[float] = []
    preds: List[float] = []
    measured: List[float] = []
    failures = 0
    for benchmark, value in lifted:
        baseline = _baseline(baselines, benchmark)
        if value is None:
            failures += 1
            continue
        errors.append(relative_error(value, baseline))
        preds.append(value)
        measured.append(baseline)
    row = summarize(errors, failures, tool)
    try:
        row.kendall_tau = kendall_tau(preds, measured)
    except UndefinedStatisticError as exc:
        logger.debug("no kendall tau for %s: %s", tool, exc)
    return row


def tool_stats(records: Sequence[BenchmarkRecord], baselines: Mapping[str, float],
               tool: str) -> ErrorStats:
    """Full error-table row for one tool over the benchmarks it predicted."""
    lifted = [(r.benchmark, lift(r, tool)) for r in records if tool in r.predictions]
    return _error_row(tool, lifted, baselines)


def lift_all(records: Sequence[BenchmarkRecord]) -> Dict[str, Dict[str, Optional[float]]]:
    """benchmark -> tool -> lifted cycles (None when discarded)."""
    return {r.benchmark: {tool: lift(r, tool) for tool in r.tools} for r in records}


def best_of(lifted: Mapping[str, Mapping[str, Optional[float]]],
            baselines: Mapping[str, float]) -> Dict[str, Optional[float]]:
    """Per benchmark, the lifted prediction closest to the baseline among all tools."""
    best: Dict[str, Optional[float]] = {}
    for benchmark, by_tool in lifted.items():
        baseline = _baseline(baselines, benchmark)
        candidates = [value for value in by_tool.values() if value is not None]
        best[benchmark] = (
            min(candidates, key=lambda v: relative_error(v, baseline)) if candidates else None
        )
    return best


def all_tool_stats(records: Sequence[BenchmarkRecord], baselines: Mapping[str, float],
                   include_best: bool = False) -> List[ErrorStats]:
    """One row per tool, sorted by name, plus an optional ``best`` row."""
    tools = sorted({tool for r in records for tool in r.tools})
    rows = [tool_stats(records, baselines, tool) for tool in tools]
    if include_best:
        best = best_of(lift_all(records), baselines)
        rows.append(_error_row(BEST_TOOL, best.items(), baselines))
    return rows


# --- CSV interfaces -------------------------------------------------------

def _check_header(reader: csv.DictReader, expected: Sequence[str], what: str) -> None:
    missing = [name for name in expected if name not in (reader.fieldnames or [])]
    if missing:
        raise MalformedInputError(f"{what} CSV is missing column(s): {', '.join(missing)}")


def read_predictions(stream: TextIO) -> List[BenchmarkRecord]:
    """Parse ``benchmark,block,occurrences,tool,pred_cycles`` rows."""
    reader = csv.DictReader(stream)
    _check_header(reader, PREDICTION_FIELDS, "prediction")
    records: Dict[str, BenchmarkRecord] = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            occurrences = int(row["occurrences"])
            raw = row["pred_cycles"].strip()
            predicted = None if raw == FAIL_MARKER else float(raw)
        except (TypeError, ValueError) as exc:
            raise MalformedInputError(f"prediction CSV line {lineno}: {exc}") from exc
        if occurrences < 1:
            raise MalformedInputError(f"prediction CSV line {lineno}: occurrences must be >= 1")
        if predicted is not None and (predicted < 0 or not np.isfinite(predicted)):
            raise MalformedInputError(f"prediction CSV line {lineno}: invalid prediction {raw}")
        benchmark = row["benchmark"]
        record = records.setdefault(benchmark, BenchmarkRecord(benchmark))
        record.add(row["tool"], BlockPrediction(row["block"], occurrences, predicted))
    return list(records.values())


def read_baselines(stream: TextIO) -> Dict[str, float]:
    """Parse ``benchmark,baseline_cycles`` rows."""
    reader = csv.DictReader(stream)
    _check_header(reader, BASELINE_FIELDS, "baseline")
    baselines: Dict[str, float] = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            value = float(row["baseline_cycles"])
        except (TypeError, ValueError) as exc:
            raise MalformedInputError(f"baseline CSV line {lineno}: {exc}") from exc
        if not value > 0 or not np.isfinite(value):
            raise MalformedInputError(f"baseline CSV line {lineno}: baseline must be positive")
        baselines[row["benchmark"]] = value
    return baselines


def format_lifted(records: Sequence[BenchmarkRecord]) -> str:
    """``benchmark,tool,lifted_cycles`` CSV, DISCARDED for failed benchmarks."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("benchmark", "tool", "lifted_cycles"))
    for record in records:
        for tool in record.tools:
            value = lift(record, tool)
            writer.writerow((record.benchmark, tool,
                             DISCARDED_MARKER if value is None else repr(value)))
    return out.getvalue()


def format_stats(rows: Sequence[ErrorStats]) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=STATS_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.to_row())
    return out.getvalue()
