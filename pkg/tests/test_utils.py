"""
Tests for logging helpers and mock data generation.
"""
import csv
import json
import logging

import pytest

from staticdeps.core.asmmodel import parse_kernel
from staticdeps.utils.logger import (
    ColoredConsoleFormatter,
    StructuredFormatter,
    log_duration,
    setup_logger,
)
from staticdeps.utils.mock_data import SAMPLE_KERNELS, MockDataGenerator


@pytest.mark.unit
class TestLogger:
    """Test logger setup."""

    def test_handlers_are_replaced(self):
        logger = setup_logger("staticdeps.test_a", level="INFO")
        setup_logger("staticdeps.test_a", level="INFO")
        assert len(logger.handlers) == 1
        assert logger.level == logging.INFO

    def test_file_handlers(self, tmp_path):
        logger = setup_logger("staticdeps.test_b", log_dir=str(tmp_path / "logs"),
                              console_output=False)
        assert len(logger.handlers) == 2
        logger.error("boom")
        for handler in logger.handlers:
            handler.flush()
        assert "boom" in (tmp_path / "logs" / "staticdeps.test_b_errors.log").read_text()

    def test_structured_formatter(self):
        record = logging.LogRecord("staticdeps", logging.INFO, __file__, 1, "ran %s", ("deps",), None)
        record.copies = 57
        entry = json.loads(StructuredFormatter().format(record))
        assert entry["message"] == "ran deps"
        assert entry["level"] == "INFO"
        assert entry["copies"] == 57

    def test_console_formatter_appends_fields(self):
        record = logging.LogRecord("staticdeps.cli", logging.DEBUG, __file__, 1, "analyzed", (), None)
        record.copies = 57
        record.seeds = (1, 2, 3)
        record.duration_ms = 3.14159
        line = ColoredConsoleFormatter(use_color=False).format(record)
        assert line.startswith("[DEBUG] ")
        assert line.endswith("staticdeps.cli: analyzed  seeds=1,2,3 copies=57 duration_ms=3.1")

    def test_console_formatter_colors(self):
        record = logging.LogRecord("staticdeps", logging.WARNING, __file__, 1, "odd", (), None)
        record.kernel = "abc"
        line = ColoredConsoleFormatter(use_color=True).format(record)
        assert line.startswith("\033[33m[WARNING]\033[0m")
        assert "\033[2mkernel=abc\033[0m" in line

    def test_console_formatter_without_fields(self):
        record = logging.LogRecord("staticdeps", logging.INFO, __file__, 1, "plain", (), None)
        assert ColoredConsoleFormatter(use_color=False).format(record).endswith("staticdeps: plain")

    def test_log_duration(self, caplog):
        logger = logging.getLogger("timing_test")
        with caplog.at_level(logging.DEBUG, logger="timing_test"):
            with log_duration(logger, "unit", kernel="abc"):
                pass
        (record,) = caplog.records
        assert record.operation == "unit"
        assert record.kernel == "abc"
        assert record.duration_ms >= 0


@pytest.mark.unit
class TestMockData:
    """Test the random kernel and benchmark generator."""

    def test_sample_kernels_parse(self):
        for text in SAMPLE_KERNELS.values():
            assert len(parse_kernel(text)) > 0

    def test_random_kernels_are_reproducible(self):
        first = MockDataGenerator(seed=5).random_kernel_text(12)
        assert MockDataGenerator(seed=5).random_kernel_text(12) == first

    def test_random_kernel_lengths(self, mock_generator):
        for _ in range(50):
            assert 3 <= len(mock_generator.random_kernel()) <= 20
        assert len(mock_generator.random_kernel(7)) == 7

    def test_benchmark_rows(self, mock_generator):
        predictions, baselines = mock_generator.random_benchmark_rows(benchmarks=4)
        assert len(baselines) == 4
        assert {row["tool"] for row in predictions} == {"llvm-mca", "uica", "iaca"}
        assert all(float(row["baseline_cycles"]) > 0 for row in baselines)

    def test_write_all(self, tmp_path):
        written = MockDataGenerator(seed=3).write_all(str(tmp_path), kernels=2, benchmarks=3)
        names = {path.name for path in written}
        assert {"random00.s", "random01.s", "predictions.csv", "baselines.csv"} <= names
        with open(tmp_path / "baselines.csv") as f:
            rows = list(csv.DictReader(f))
        assert [row["benchmark"] for row in rows] == ["bench000", "bench001", "bench002"]
