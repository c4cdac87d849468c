"""
Benchmark prediction records and aggregate error statistics.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional

FAIL_MARKER = "FAIL"
DISCARDED_MARKER = "DISCARDED"

STATS_FIELDS = (
    "tool", "datapoints", "failures", "failure_pct",
    "mape", "median", "q1", "q3", "kendall_tau",
)


@dataclass(frozen=True)
class BlockPrediction:
    """One basic block of a benchmark as seen by one tool.

    ``predicted_cycles`` is None when the tool failed on the block.
    """
    block: str
    occurrences: int
    predicted_cycles: Optional[float]

    @property
    def failed(self) -> bool:
        return self.predicted_cycles is None


@dataclass
class BenchmarkRecord:
    """All tools' block predictions for one benchmark."""
    benchmark: str
    predictions: Dict[str, List[BlockPrediction]] = field(default_factory=dict)

    @property
    def tools(self) -> List[str]:
        return list(self.predictions)

    def add(self, tool: str, prediction: BlockPrediction) -> None:
        self.predictions.setdefault(tool, []).append(prediction)


@dataclass
class ErrorStats:
    """One row of the per-tool error table. Percentages are in percent."""
    tool: str
    datapoints: int
    failures: int
    mape: float
    median: float
    q1: float
    q3: float
    kendall_tau: Optional[float] = None

    @property
    def failure_pct(self) -> float:
        total = self.datapoints + self.failures
        return 100.0 * self.failures / total if total else 0.0

    def to_row(self) -> Dict[str, str]:
        """CSV row with two-decimal percentages."""
        return {
            "tool": self.tool,
            "datapoints": str(self.datapoints),
            "failures": str(self.failures),
            "failure_pct": f"{self.failure_pct:.2f}",
            "mape": f"{self.mape:.2f}",
            "median": f"{self.median:.2f}",
            "q1": f"{self.q1:.2f}",
            "q3": f"{self.q3:.2f}",
            "kendall_tau": "" if self.kendall_tau is None else f"{self.kendall_tau:.2f}",
        }
