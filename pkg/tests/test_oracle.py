"""
Tests for the concrete-execution oracle and coverage metrics.
"""
import json
from dataclasses import replace

import pytest

from staticdeps.core.asmmodel import parse_kernel
from staticdeps.core.depcore import analyze_amplified
from staticdeps.core.errors import (
    ConfigError,
    EmptyKernelError,
    TimestampOverflowError,
    UndefinedCoverageError,
)
from staticdeps.core.oracle import (
    DEFAULT_REG_CONSTANT,
    DISTINCT_FLOOR,
    OracleConfig,
    RegInit,
    aggregate_coverage,
    coverage,
    coverage_sweep,
    is_suspicious,
    lifetime_label,
    run_concrete,
)
from staticdeps.models.reports import CoverageReport, DepReport, Dependency, DynDependency


def static_report(*keys):
    return DepReport("0" * 64, 224, (1,), 57,
                     dependencies=[Dependency(*key, hits=1, eligible=1) for key in keys])


def by_pair(trace):
    return {dep.pair: dep.rho for dep in trace}


@pytest.mark.unit
class TestRegInit:
    """Test register initialization policies."""

    def test_parse(self):
        assert RegInit.parse("uniform:0x2324000") == RegInit.uniform(DEFAULT_REG_CONSTANT)
        assert RegInit.parse("uniform:2324000") == RegInit.uniform(0x2324000)
        assert RegInit.parse("distinct:42") == RegInit.distinct(42)

    @pytest.mark.parametrize("text", ["", "random:1", "uniform:xyz", "distinct:", "distinct:-1"])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigError):
            RegInit.parse(text)

    def test_str_roundtrip(self):
        for init in (RegInit.uniform(0x1000), RegInit.distinct(3)):
            assert RegInit.parse(str(init)) == init

    def test_uniform_values(self):
        values = RegInit.uniform(0x2324000).initial_values()
        assert len(values) == 16
        assert set(values.values()) == {0x2324000}

    def test_distinct_values(self):
        values = RegInit.distinct(42).initial_values()
        assert len(set(values.values())) == 16
        assert min(values.values()) >= DISTINCT_FLOOR
        assert RegInit.distinct(42).initial_values() == values
        assert RegInit.distinct(43).initial_values() != values


@pytest.mark.unit
class TestOracleConfig:
    @pytest.mark.parametrize("kwargs", [
        {"iterations": 0},
        {"lifetime": 0},
        {"mem_fill": -1},
        {"mem_fill": 1 << 64},
    ])
    def test_invalid_settings(self, kwargs):
        with pytest.raises(ConfigError):
            OracleConfig(**kwargs)

    def test_suspicious_addresses(self):
        assert is_suspicious(0x10)
        assert is_suspicious(0xFFFF)
        assert not is_suspicious(0x10000)
        assert not is_suspicious(0x7FFFFFFFFFFF)
        assert is_suspicious(0x800000000000)
        assert not is_suspicious(0xFFFF800000000000)


@pytest.mark.unit
class TestRunConcrete:
    """Test dependency recording over concrete runs."""

    def test_aliasing_kernel_uniform(self, aliasing_kernel):
        cfg = OracleConfig(iterations=10, reg_init=RegInit.uniform(0x2324000))
        trace = run_concrete(aliasing_kernel, cfg)
        assert by_pair(trace) == {(1, 0): 9}
        assert trace.triplets() == {(1, 0, 1)}

    def test_aliasing_kernel_distinct(self, aliasing_kernel):
        trace = run_concrete(aliasing_kernel, OracleConfig(iterations=10))
        assert len(trace) == 0

    def test_fibonacci(self, fibonacci_kernel, oracle_config):
        trace = run_concrete(fibonacci_kernel, oracle_config)
        assert by_pair(trace) == {(2, 0): 49, (2, 1): 48}
        assert trace.triplets() == {(2, 0, 1), (2, 1, 2)}
        assert trace.executed == 200

    def test_timestamps_start_at_one(self):
        trace = run_concrete(parse_kernel("movq %rbx, (%rax)\nmovq (%rax), %rcx"),
                             OracleConfig(iterations=1))
        (dep,) = trace
        assert dep.example == (1, 2)

    def test_lifetime_drops_long_dependencies(self, fibonacci_kernel):
        # (2 -> 0) spans 2 instructions, (2 -> 1) spans 7
        trace = run_concrete(fibonacci_kernel, OracleConfig(iterations=50, lifetime=6))
        assert set(by_pair(trace)) == {(2, 0)}
        trace = run_concrete(fibonacci_kernel, OracleConfig(iterations=50, lifetime=7))
        assert set(by_pair(trace)) == {(2, 0), (2, 1)}

    def test_partial_register_merge(self):
        # writing al keeps the upper bytes of rax, so the load hits the stored address
        kernel = parse_kernel("movq %rdx, (%rax)\nmovb $0x10, %al\nmovq (%rax), %rcx\n")
        trace = run_concrete(kernel, OracleConfig(iterations=1, reg_init=RegInit.uniform(0x5010)))
        assert by_pair(trace) == {(0, 2): 1}

    def test_overlapping_widths(self):
        kernel = parse_kernel("movl %edx, (%rax)\nmovl %edx, 4(%rax)\nmovq (%rax), %rcx\n")
        trace = run_concrete(kernel, OracleConfig(iterations=1))
        assert set(by_pair(trace)) == {(0, 2), (1, 2)}

    def test_opaque_store_counts_as_writer(self):
        kernel = parse_kernel("vmovsd %xmm0, (%rax)\nmovq (%rax), %rcx\n")
        trace = run_concrete(kernel, OracleConfig(iterations=3))
        assert by_pair(trace) == {(0, 1): 3}

    def test_suspicious_addresses_counted(self):
        kernel = parse_kernel("movq (%rax), %rcx\n")
        trace = run_concrete(kernel, OracleConfig(iterations=4, reg_init=RegInit.uniform(0x100)))
        assert trace.suspicious_addresses == 4

    def test_lea_is_not_an_access(self):
        kernel = parse_kernel("leaq 8(%rax), %rcx\n")
        trace = run_concrete(kernel, OracleConfig(iterations=4, reg_init=RegInit.uniform(0x100)))
        assert trace.suspicious_addresses == 0

    def test_read_modify_write_counts_both_accesses(self):
        kernel = parse_kernel("addq %rcx, (%rax)\n")
        trace = run_concrete(kernel, OracleConfig(iterations=2, reg_init=RegInit.uniform(0x100)))
        assert trace.suspicious_addresses == 4

    def test_store_forwarded_to_next_iteration(self):
        kernel = parse_kernel("movq (%rax), %rcx\nmovq %rcx, 8(%rax)\naddq $8, %rax\n")
        cfg = OracleConfig(iterations=3, reg_init=RegInit.uniform(0x10000), mem_fill=0x1122)
        trace = run_concrete(kernel, cfg)
        assert by_pair(trace) == {(1, 0): 2}

    def test_empty_kernel(self):
        with pytest.raises(EmptyKernelError):
            run_concrete(parse_kernel(""), OracleConfig())

    def test_timestamp_overflow(self, fibonacci_kernel):
        with pytest.raises(TimestampOverflowError):
            run_concrete(fibonacci_kernel, OracleConfig(iterations=1 << 62))

    def test_trace_serialization(self, fibonacci_kernel, oracle_config):
        data = json.loads(run_concrete(fibonacci_kernel, oracle_config).to_json())
        assert list(data) == ["iterations", "reg_init", "deps", "suspicious_addresses"]
        assert data["iterations"] == 50
        assert data["reg_init"] == "distinct:7"
        assert data["deps"] == [{"src": 2, "dst": 0, "rho": 49}, {"src": 2, "dst": 1, "rho": 48}]


@pytest.mark.unit
class TestCoverage:
    """Test coverage metrics."""

    def test_counts(self):
        dynamic = [DynDependency(0, 1, 1), DynDependency(0, 2, 1), DynDependency(1, 2, 1),
                   DynDependency(2, 2, 1)]
        report = coverage(static_report((0, 1, 0), (0, 2, 0), (1, 2, 3)), dynamic)
        assert (report.found, report.missed) == (3, 1)
        assert report.cov_u == pytest.approx(0.75)

    def test_weights(self):
        dynamic = [DynDependency(0, 1, 5), DynDependency(0, 2, 5), DynDependency(1, 2, 10)]
        report = coverage(static_report((0, 1, 0), (0, 2, 1)), dynamic)
        assert report.cov_w == pytest.approx(0.5)

    def test_superset_is_full_coverage(self):
        report = coverage(static_report((0, 1, 0), (3, 3, 1)), [DynDependency(0, 1, 4)])
        assert report.cov_u == report.cov_w == 1.0

    def test_empty_dynamic_set(self):
        with pytest.raises(UndefinedCoverageError):
            coverage(static_report((0, 1, 0)), [])

    def test_classification_is_recorded(self):
        report = coverage(static_report((0, 1, 0)), [DynDependency(0, 1, 2), DynDependency(1, 0, 3)])
        assert [(dep.pair, found) for dep, found in report.classification] == [
            ((0, 1), True), ((1, 0), False)]
        assert report.to_dict()["cov_u"] == 50.0

    def test_aggregate(self):
        reports = [CoverageReport(1, 1, 4, 4), CoverageReport(2, 0, 8, 0)]
        total = aggregate_coverage(reports)
        assert total.cov_u == pytest.approx(0.75)
        assert total.cov_w == pytest.approx(0.75)
        with pytest.raises(UndefinedCoverageError):
            aggregate_coverage([])

    def test_lifetime_labels(self):
        assert lifetime_label(None) == "inf"
        assert lifetime_label(512) == "512"


@pytest.mark.integration
class TestStaticAgainstOracle:
    """Static analysis measured against the oracle on the sample kernels."""

    def test_fibonacci_full_coverage(self, fibonacci_kernel, oracle_config, dep_config):
        static = analyze_amplified(fibonacci_kernel, dep_config)
        report = coverage(static, run_concrete(fibonacci_kernel, oracle_config))
        assert report.cov_u == report.cov_w == 1.0

    def test_uniform_alias_is_missed(self, aliasing_kernel, dep_config):
        static = analyze_amplified(aliasing_kernel, dep_config)
        cfg = OracleConfig(iterations=10, reg_init=RegInit.uniform(0x2324000))
        report = coverage(static, run_concrete(aliasing_kernel, cfg))
        assert report.cov_u == 0.0

    def test_sweep_labels_and_values(self, fibonacci_kernel, oracle_config, dep_config):
        static = analyze_amplified(fibonacci_kernel, dep_config)
        reports = coverage_sweep(static, fibonacci_kernel, oracle_config, [None, 7, 6])
        assert [r.label for r in reports] == ["inf", "7", "6"]
        assert [(r.found, r.missed) for r in reports] == [(2, 0), (2, 0), (1, 0)]

    def test_shorter_lifetimes_find_fewer_pairs(self, mock_generator):
        lifetimes = [None, 64, 16, 4]
        for _ in range(30):
            kernel = mock_generator.random_kernel()
            traces = [run_concrete(kernel, OracleConfig(iterations=20, lifetime=lt))
                      for lt in lifetimes]
            for longer, shorter in zip(traces, traces[1:]):
                assert shorter.pairs() <= longer.pairs()
                assert shorter.triplets() <= longer.triplets()

    @pytest.mark.slow
    def test_lifetime_weights_are_monotone(self, mock_generator):
        lifetimes = [None, 1024, 512]
        for _ in range(100):
            kernel = mock_generator.random_kernel()
            cfg = OracleConfig(iterations=2048 // len(kernel) + 1)
            weights = [by_pair(run_concrete(kernel, replace(cfg, lifetime=lt)))
                       for lt in lifetimes]
            for longer, shorter in zip(weights, weights[1:]):
                for pair, rho in shorter.items():
                    assert rho <= longer.get(pair, 0), (kernel.to_text(), pair)
