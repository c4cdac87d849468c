"""
Tests for static dependency extraction.
"""
import json

import pytest

from staticdeps.core.asmmodel import parse_kernel
from staticdeps.core.depcore import (
    UARCH_ROB_SIZES,
    DepConfig,
    analyze,
    analyze_amplified,
    filter_spurious,
    reroll,
    unroll_count,
)
from staticdeps.core.errors import ConfigError, EmptyKernelError
from staticdeps.core.semantics import make_rng
from staticdeps.models.kernel import Kernel

SAME_ITERATION_KERNEL = "movq %rbx, (%rax)\nmovq (%rax), %rcx\n"
TWO_POINTER_KERNEL = "movq %rbx, (%rax)\nmovq (%rcx), %rdx\n"
# store at rax_k, load at rax_j - 64 = rax_{j-8}; distance 8 * 3 + 1 = 25
FAR_KERNEL = "movq %rbx, (%rax)\nmovq -64(%rax), %rcx\naddq $8, %rax\n"


class ConstantRng:
    """Every fresh value equals every other one, so all pointers alias."""

    def bytes(self, n):
        return b"\x10" * n


def colliding_under(bad_seed):
    def factory(seed):
        return ConstantRng() if seed == bad_seed else make_rng(seed)
    return factory


@pytest.mark.unit
class TestDepConfig:
    """Test analysis settings."""

    def test_defaults(self):
        cfg = DepConfig()
        assert cfg.rob_size == 224
        assert cfg.spurious_threshold == pytest.approx(0.80)
        assert cfg.seeds == (1, 2, 3)
        assert cfg.synthetic_base_address == 0x400000

    def test_seeds_become_a_tuple(self):
        assert DepConfig(seeds=[4, 5]).seeds == (4, 5)

    @pytest.mark.parametrize("kwargs", [
        {"rob_size": 0},
        {"spurious_threshold": 0.0},
        {"spurious_threshold": 1.5},
        {"seeds": ()},
        {"seeds": (-1,)},
    ])
    def test_invalid_settings(self, kwargs):
        with pytest.raises(ConfigError):
            DepConfig(**kwargs)

    def test_uarch_presets(self):
        assert DepConfig.for_uarch("golden-cove").rob_size == UARCH_ROB_SIZES["golden-cove"]
        assert DepConfig.for_uarch("skylake", rob_size=100).rob_size == 100
        with pytest.raises(ConfigError):
            DepConfig.for_uarch("pentium")


@pytest.mark.unit
class TestUnrollCount:
    @pytest.mark.parametrize("kernel_len,rob_size,expected", [
        (4, 224, 57),
        (224, 224, 2),
        (300, 224, 2),
        (1, 1, 2),
    ])
    def test_examples(self, kernel_len, rob_size, expected):
        assert unroll_count(kernel_len, rob_size) == expected

    def test_smallest_count_spanning_the_rob(self):
        for kernel_len in range(1, 60):
            for rob_size in (1, 7, 97, 224, 512):
                n = unroll_count(kernel_len, rob_size)
                assert n * kernel_len >= rob_size + kernel_len
                assert (n - 1) * kernel_len < rob_size + kernel_len

    def test_empty_kernel(self):
        with pytest.raises(EmptyKernelError):
            unroll_count(0, 224)


@pytest.mark.unit
class TestFilters:
    """Test re-rolling and the spurious-dependency filter."""

    def test_reroll_counts_pairs_per_triplet(self):
        raw = {(2, 4), (6, 8), (2, 5), (10, 12)}
        assert reroll(raw, 4) == {(2, 0, 1): 3, (2, 1, 1): 1}

    def test_threshold_boundary(self):
        assert filter_spurious({(0, 1, 0): 79}, copies=100, threshold=0.8) == []
        (kept,) = filter_spurious({(0, 1, 0): 80}, copies=100, threshold=0.8)
        assert (kept.hits, kept.eligible) == (80, 100)

    def test_eligible_copies_shrink_with_distance(self):
        # eligible = 99, threshold 79.2
        assert filter_spurious({(0, 1, 1): 79}, copies=100, threshold=0.8) == []
        assert len(filter_spurious({(0, 1, 1): 80}, copies=100, threshold=0.8)) == 1

    def test_full_threshold(self):
        assert filter_spurious({(0, 0, 1): 9}, copies=10, threshold=1.0)
        assert not filter_spurious({(0, 0, 1): 8}, copies=10, threshold=1.0)

    def test_distance_beyond_copies(self):
        with pytest.raises(ValueError):
            filter_spurious({(0, 0, 5): 1}, copies=5, threshold=0.8)


@pytest.mark.unit
class TestAnalyze:
    """Test single-seed and amplified analysis."""

    def test_fibonacci(self, fibonacci_kernel, dep_config):
        report = analyze_amplified(fibonacci_kernel, dep_config)
        assert report.keys() == {(2, 0, 1), (2, 1, 2)}
        assert report.copies == 57
        assert all(dep.hits == dep.eligible for dep in report.dependencies)

    def test_same_iteration_dependency(self, dep_config):
        report = analyze_amplified(parse_kernel(SAME_ITERATION_KERNEL), dep_config)
        assert report.keys() == {(0, 1, 0)}

    def test_aliasing_outside_the_block_is_invisible(self, aliasing_kernel, dep_config):
        assert analyze_amplified(aliasing_kernel, dep_config).dependencies == []

    def test_durbin(self, durbin_kernel, dep_config):
        report = analyze_amplified(durbin_kernel, dep_config)
        assert report.keys() == {(4, 0, 1), (4, 4, 1)}

    def test_rob_distance_filter(self):
        kernel = parse_kernel(FAR_KERNEL)
        assert analyze(kernel, DepConfig(rob_size=25), seed=1).dependencies == []
        report = analyze(kernel, DepConfig(rob_size=26), seed=1)
        assert report.keys() == {(0, 1, 8)}
        assert report.dependencies[0].eligible == 2

    def test_empty_kernel(self, dep_config):
        with pytest.raises(EmptyKernelError):
            analyze_amplified(parse_kernel(""), dep_config)

    def test_bottom_address_stores_are_counted(self, dep_config):
        kernel = parse_kernel("vmovq %xmm0, %rax\nmovq %rbx, (%rax)\n")
        report = analyze(kernel, dep_config, seed=1)
        assert report.dropped_bottom_stores == report.copies
        assert report.dependencies == []

    def test_report_serialization(self, fibonacci_kernel, dep_config):
        data = json.loads(analyze_amplified(fibonacci_kernel, dep_config).to_json())
        assert list(data) == [
            "kernel_sha256", "rob_size", "seeds", "copies", "deps", "dropped_bottom_stores"]
        assert data["kernel_sha256"] == fibonacci_kernel.digest
        assert data["deps"][0] == {"src": 2, "dst": 0, "dk": 1, "hits": 56, "eligible": 56}

    def test_deterministic(self, mock_generator, dep_config):
        for _ in range(10):
            kernel = mock_generator.random_kernel()
            first = analyze_amplified(kernel, dep_config).to_json()
            assert analyze_amplified(kernel, dep_config).to_json() == first


@pytest.mark.unit
class TestAmplification:
    """Test the multi-seed intersection."""

    def test_single_seed_equals_analyze(self, fibonacci_kernel):
        cfg = DepConfig(seeds=(9,))
        assert analyze_amplified(fibonacci_kernel, cfg).keys() == \
            analyze(fibonacci_kernel, cfg, seed=9).keys()

    def test_collision_under_one_seed_is_removed(self):
        kernel = parse_kernel(TWO_POINTER_KERNEL)
        factory = colliding_under(1)
        assert analyze(kernel, DepConfig(), seed=1, rng_factory=factory).keys() == {(0, 1, 0)}
        amplified = analyze_amplified(kernel, DepConfig(seeds=(1, 2)), rng_factory=factory)
        assert amplified.dependencies == []
        assert amplified.seeds == (1, 2)

    def test_dependency_present_under_all_seeds_is_kept(self, fibonacci_kernel):
        cfg = DepConfig(seeds=(1, 2, 3, 4, 5))
        assert analyze_amplified(fibonacci_kernel, cfg).keys() == {(2, 0, 1), (2, 1, 2)}


@pytest.mark.unit
class TestInvariants:
    """Properties over random kernels."""

    def test_report_invariants(self, mock_generator):
        cfg = DepConfig(seeds=(1,))
        for _ in range(50):
            kernel: Kernel = mock_generator.random_kernel()
            report = analyze_amplified(kernel, cfg)
            assert report.copies == unroll_count(len(kernel), cfg.rob_size)
            for dep in report.dependencies:
                assert dep.hits <= dep.eligible
                assert 0 <= dep.delta_k < report.copies
                assert dep.delta_k > 0 or dep.src < dep.dst
                assert dep.hits + 1e-9 >= cfg.spurious_threshold * dep.eligible
