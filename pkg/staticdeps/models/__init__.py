"""
Data models for kernels, dependency reports and benchmark records.
"""
from .kernel import Access, Immediate, Instruction, Kernel, MemOperand, Register, SemanticClass
from .reports import CoverageReport, DepReport, Dependency, DynDependency, DynamicTrace
from .benchmarks import BenchmarkRecord, BlockPrediction, ErrorStats

__all__ = [
    'Access',
    'Immediate',
    'Instruction',
    'Kernel',
    'MemOperand',
    'Register',
    'SemanticClass',
    'CoverageReport',
    'DepReport',
    'Dependency',
    'DynDependency',
    'DynamicTrace',
    'BenchmarkRecord',
    'BlockPrediction',
    'ErrorStats'
]
