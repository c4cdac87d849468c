"""
Concrete-execution oracle and coverage metrics.

The oracle runs the kernel for a fixed number of iterations with concrete
64-bit values and records every dynamic read-after-write memory
dependency, in the manner of a dynamic dependency tracer. Its results are
the ground truth the static analysis is measured against.
"""
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from ..models.kernel import (
    DEFAULT_BASE_ADDRESS,
    GPR_NAMES,
    Immediate,
    Instruction,
    Kernel,
    MemOperand,
    Operand,
    RegClass,
    Register,
)
from ..models.reports import CoverageReport, DepReport, DynamicTrace, DynDependency
from .asmmodel import rebase
from .errors import ConfigError, EmptyKernelError, TimestampOverflowError, UndefinedCoverageError
from .semantics import (
    MASK64,
    AbstractValue,
    Write,
    extract_alias,
    fresh_value,
    integer_effects,
    make_rng,
    mask,
    merge_alias,
    opaque_effects,
)

logger = logging.getLogger(__name__)

DEFAULT_REG_CONSTANT = 0x2324000
DEFAULT_MEM_FILL = 0x2324000
DISTINCT_FLOOR = 1 << 20
SENTINEL_BYTE = 0xA5
LOWEST_PAGE = 0x10000
TIMESTAMP_LIMIT = 1 << 64

_REG_INIT = re.compile(r"^(uniform|distinct):(\S+)$")


@dataclass(frozen=True)
class RegInit:
    """Initial register values: every GPR equal, or independently sampled."""
    mode: str
    value: int

    @classmethod
    def uniform(cls, constant: int = DEFAULT_REG_CONSTANT) -> "RegInit":
        return cls("uniform", constant & MASK64)

    @classmethod
    def distinct(cls, seed: int = 42) -> "RegInit":
        return cls("distinct", seed)

    @classmethod
    def parse(cls, text: str) -> "RegInit":
        """Parse ``uniform:HEX`` or ``distinct:SEED``."""
        match = _REG_INIT.match(text.strip().lower())
        if not match:
            raise ConfigError(f"invalid register init '{text}' (uniform:HEX or distinct:SEED)")
        mode, raw = match.groups()
        try:
            value = int(raw, 16) if mode == "uniform" else int(raw, 0)
        except ValueError:
            raise ConfigError(f"invalid register init value '{raw}'") from None
        if not 0 <= value <= MASK64:
            raise ConfigError(f"register init value out of range: {raw}")
        return cls(mode, value)

    def initial_values(self) -> Dict[str, int]:
        if self.mode == "uniform":
            return {name: self.value for name in GPR_NAMES}
        rng = make_rng(self.value)
        values: Dict[str, int] = {}
        for name in GPR_NAMES:
            value = fresh_value(rng)
            while value < DISTINCT_FLOOR:
                value = fresh_value(rng)
            values[name] = value
        return values

    def __str__(self) -> str:
        if self.mode == "uniform":
            return f"uniform:{self.value:#x}"
        return f"distinct:{self.value}"


@dataclass(frozen=True)
class OracleConfig:
    iterations: int = 64
    reg_init: RegInit = field(default_factory=RegInit.distinct)
    mem_fill: int = DEFAULT_MEM_FILL
    lifetime: Optional[int] = None
    synthetic_base_address: int = DEFAULT_BASE_ADDRESS

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.lifetime is not None and self.lifetime < 1:
            raise ConfigError(f"lifetime must be >= 1, got {self.lifetime}")
        if not 0 <= self.mem_fill <= MASK64:
            raise ConfigError(f"mem_fill out of range: {self.mem_fill:#x}")


def is_suspicious(address: int) -> bool:
    """True for non-canonical 48-bit addresses and addresses in the first pages."""
    canonical = address < (1 << 47) or address >= (1 << 64) - (1 << 47)
    return not canonical or address < LOWEST_PAGE


class _Machine:
    """Concrete register file, byte memory and last-writer table."""

    def __init__(self, cfg: OracleConfig):
        self.cfg = cfg
        self.regs = cfg.reg_init.initial_values()
        self.rip = 0
        self.memory: Dict[int, int] = {}
        self.fill = cfg.mem_fill.to_bytes(8, "little")
        # byte address -> (instruction index, timestamp)
        self.writers: Dict[int, Tuple[int, int]] = {}
        self.timestamp = 0
        self.suspicious = 0
        self.rho: Counter = Counter()
        self.examples: Dict[Tuple[int, int], Tuple[int, int]] = {}
        self.delta_ks: Dict[Tuple[int, int], Set[int]] = defaultdict(set)

    # registers

    def read_register(self, reg: Register) -> AbstractValue:
        if reg.reg_class is RegClass.RIP:
            return self.rip
        if reg.is_vector:
            return None
        return extract_alias(self.regs[reg.canonical], reg)

    def write_register(self, reg: Register, value: AbstractValue) -> None:
        if reg.is_vector or reg.reg_class is RegClass.RIP or value is None:
            return
        self.regs[reg.canonical] = merge_alias(self.regs[reg.canonical], reg, value)

    # memory

    def address(self, mem: MemOperand) -> int:
        base = self.read_register(mem.base) if mem.base is not None else 0
        index = self.read_register(mem.index) if mem.index is not None else 0
        return (mem.displacement + (base or 0) + (index or 0) * mem.scale) & MASK64

    def _check(self, address: int) -> None:
        if is_suspicious(address):
            self.suspicious += 1

    def load(self, address: int, width: int, instr: Instruction, n: int) -> AbstractValue:
        self._check(address)
        span = [(address + i) & MASK64 for i in range(width)]
        for writer, wts in {self.writers[a] for a in span if a in self.writers}:
            distance = self.timestamp - wts
            if self.cfg.lifetime is not None and distance > self.cfg.lifetime:
                continue
            pair = (writer, instr.index)
            self.rho[pair] += 1
            self.examples.setdefault(pair, (wts, self.timestamp))
            self.delta_ks[pair].add((self.timestamp - 1) // n - (wts - 1) // n)
        if width > 8:
            return None
        data = bytes(self.memory.get(a, self.fill[a % 8]) for a in span)
        return int.from_bytes(data, "little")

    def store(self, address: int, width: int, value: AbstractValue, instr: Instruction) -> None:
        self._check(address)
        if value is None or width > 8:
            data = bytes([SENTINEL_BYTE]) * width
        else:
            data = (value & mask(width)).to_bytes(width, "little")
        for i, byte in enumerate(data):
            a = (address + i) & MASK64
            self.memory[a] = byte
            self.writers[a] = (instr.index, self.timestamp)

    # execution

    def execute(self, instr: Instruction, n: int) -> None:
        self.timestamp += 1
        self.rip = instr.address
        addresses: Dict[MemOperand, int] = {}

        def address(mem: MemOperand) -> int:
            if mem not in addresses:
                addresses[mem] = self.address(mem)
            return addresses[mem]

        def read(operand: Operand, width: int) -> AbstractValue:
            if isinstance(operand, Immediate):
                return operand.value & mask(width)
            if isinstance(operand, Register):
                return self.read_register(operand)
            return self.load(address(operand), width, instr, n)

        if instr.is_supported:
            writes: List[Write] = integer_effects(instr, read, address)
        else:
            sentinel = int.from_bytes(bytes([SENTINEL_BYTE]) * 8, "little")
            writes = [(op, width, sentinel) for op, width in opaque_effects(instr, read)]

        for operand, _, _ in writes:
            if isinstance(operand, MemOperand):
                address(operand)
        for operand, width, value in writes:
            if isinstance(operand, Register):
                self.write_register(operand, value)
            elif isinstance(operand, MemOperand):
                self.store(address(operand), width, value, instr)
        self.rip = (instr.address + instr.size) & MASK64

    def dependencies(self) -> List[DynDependency]:
        return [
            DynDependency(src, dst, rho=count, example=self.examples[(src, dst)],
                          delta_ks=frozenset(self.delta_ks[(src, dst)]))
            for (src, dst), count in self.rho.items()
        ]


def run_concrete(kernel: Kernel, cfg: OracleConfig) -> DynamicTrace:
    """Execute ``cfg.iterations`` copies of the kernel and collect dependencies.

    Timestamps count executed instructions from 1. Dependencies are
    aggregated by (src, dst); ``rho`` counts distinct (write, read) pairs.
    """
    if kernel.is_empty:
        raise EmptyKernelError()
    n = len(kernel)
    if cfg.iterations * n >= TIMESTAMP_LIMIT:
        raise TimestampOverflowError(
            f"{cfg.iterations} iterations of {n} instructions overflow the timestamp counter")
    kernel = rebase(kernel, cfg.synthetic_base_address)

    machine = _Machine(cfg)
    for _ in range(cfg.iterations):
        for instr in kernel:
            machine.execute(instr, n)

    if machine.suspicious:
        # distinct values are random 64-bit integers, almost never canonical
        level = logging.WARNING if cfg.reg_init.mode == "uniform" else logging.DEBUG
        logger.log(level, "%d memory access(es) at suspicious addresses", machine.suspicious)
    trace = DynamicTrace(
        iterations=cfg.iterations,
        reg_init=str(cfg.reg_init),
        dependencies=machine.dependencies(),
        suspicious_addresses=machine.suspicious,
        executed=machine.timestamp,
        lifetime=cfg.lifetime,
    )
    logger.debug("oracle: %d dependencies over %d instructions", len(trace), trace.executed)
    return trace


DynamicInput = Union[DynamicTrace, Iterable[DynDependency]]


def coverage(static: DepReport, dynamic: DynamicInput, label: str = "") -> CoverageReport:
    """Classify each dynamic (src, dst) as found if any static triplet matches it."""
    deps = sorted(dynamic)
    if not deps:
        raise UndefinedCoverageError()
    pairs = static.pairs()
    classification = [(dep, dep.pair in pairs) for dep in deps]
    return CoverageReport(
        found=sum(1 for _, found in classification if found),
        missed=sum(1 for _, found in classification if not found),
        found_weight=sum(dep.rho for dep, found in classification if found),
        missed_weight=sum(dep.rho for dep, found in classification if not found),
        classification=classification,
        label=label,
    )


def aggregate_coverage(reports: Sequence[CoverageReport], label: str = "total") -> CoverageReport:
    """Dataset-level coverage: counts and weights summed over kernels."""
    if not reports or all(r.found + r.missed == 0 for r in reports):
        raise UndefinedCoverageError("no dynamic dependencies in any kernel")
    return CoverageReport(
        found=sum(r.found for r in reports),
        missed=sum(r.missed for r in reports),
        found_weight=sum(r.found_weight for r in reports),
        missed_weight=sum(r.missed_weight for r in reports),
        label=label,
    )


def lifetime_label(lifetime: Optional[int]) -> str:
    return "inf" if lifetime is None else str(lifetime)


def coverage_sweep(static: DepReport, kernel: Kernel, cfg: OracleConfig,
                   lifetimes: Sequence[Optional[int]]) -> List[CoverageReport]:
    """Coverage of one static report at several dependency lifetimes (None is unbounded)."""
    return [
        coverage(static, run_concrete(kernel, replace(cfg, lifetime=lifetime)),
                 label=lifetime_label(lifetime))
        for lifetime in lifetimes
    ]

