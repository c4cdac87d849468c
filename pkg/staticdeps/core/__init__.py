"""
Core analysis: assembly front end, abstract and concrete interpreters,
dependency extraction and benchmark statistics.
"""
from .asmmodel import access_descriptors, parse_kernel
from .depcore import DepConfig, analyze, analyze_amplified, filter_spurious, unroll_count
from .errors import StaticDepsError
from .liftstats import (
    kendall_tau, lift, relative_error, relevance_filter, relevant_blocks, summarize,
)
from .oracle import OracleConfig, RegInit, aggregate_coverage, coverage, coverage_sweep, run_concrete

__all__ = [
    'access_descriptors',
    'parse_kernel',
    'DepConfig',
    'analyze',
    'analyze_amplified',
    'filter_spurious',
    'unroll_count',
    'StaticDepsError',
    'kendall_tau',
    'lift',
    'relative_error',
    'relevance_filter',
    'relevant_blocks',
    'summarize',
    'OracleConfig',
    'RegInit',
    'aggregate_coverage',
    'coverage',
    'coverage_sweep',
    'run_concrete'
]
