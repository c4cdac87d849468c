"""
Abstract value domain and one-instruction transition function.

An abstract value is either a known unsigned 64-bit integer or ``BOTTOM``
(``None``), the value of anything the interpreter does not compute exactly.
``BOTTOM`` is absorbing: every operation with a ``BOTTOM`` input yields
``BOTTOM``.

The integer evaluation in :func:`integer_effects` is interpreter-agnostic:
it receives ``read`` and ``address`` callbacks and returns the list of writes
the instruction performs. The shadow interpreter below and the concrete
oracle both drive it, so they agree on ISA arithmetic.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from ..models.kernel import (
    REGISTERS,
    Immediate,
    Instruction,
    MemOperand,
    Operand,
    RegClass,
    Register,
)

logger = logging.getLogger(__name__)

AbstractValue = Optional[int]
BOTTOM: AbstractValue = None

MASK64 = (1 << 64) - 1

RSP = REGISTERS["rsp"]
RAX = REGISTERS["rax"]
RDX = REGISTERS["rdx"]
EAX = REGISTERS["eax"]
PUSH_SLOT = MemOperand(displacement=-8, base=RSP)
POP_SLOT = MemOperand(base=RSP)


def mask(width: int) -> int:
    return (1 << (8 * width)) - 1


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator for fresh values; seed must fit in 64 bits."""
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be in [0, 2^64): {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def fresh_value(rng: np.random.Generator) -> int:
    """Draw a value uniformly from [0, 2^64). Never BOTTOM."""
    return int.from_bytes(rng.bytes(8), "little")


# --- integer evaluation ---------------------------------------------------

def truncate(value: AbstractValue, width: int) -> AbstractValue:
    return None if value is None else value & mask(width)


def extend(value: AbstractValue, src_width: int, dst_width: int, signed: bool) -> AbstractValue:
    """Zero- or sign-extend a src_width value to dst_width bytes."""
    if value is None:
        return None
    value &= mask(src_width)
    if signed and value >> (8 * src_width - 1):
        value -= 1 << (8 * src_width)
    return value & mask(dst_width)


def evaluate_binary(op: str, width: int, dst: AbstractValue, src: AbstractValue) -> AbstractValue:
    if dst is None or src is None:
        return None
    if op == "add":
        result = dst + src
    elif op == "sub":
        result = dst - src
    elif op == "and":
        result = dst & src
    elif op == "or":
        result = dst | src
    elif op == "xor":
        result = dst ^ src
    elif op == "imul":
        result = dst * src
    else:
        raise ValueError(f"not a binary operation: {op}")
    return result & mask(width)


def evaluate_unary(op: str, width: int, value: AbstractValue) -> AbstractValue:
    if value is None:
        return None
    if op == "inc":
        result = value + 1
    elif op == "dec":
        result = value - 1
    elif op == "neg":
        result = -value
    elif op == "not":
        result = ~value
    else:
        raise ValueError(f"not a unary operation: {op}")
    return result & mask(width)


def evaluate_shift(op: str, width: int, value: AbstractValue, count: AbstractValue) -> AbstractValue:
    """shl/shr/sar with the count masked to 5 bits (6 for 64-bit operands)."""
    if value is None or count is None:
        return None
    count &= 0x3F if width == 8 else 0x1F
    value &= mask(width)
    if op == "shl":
        result = value << count
    elif op == "shr":
        result = value >> count
    elif op == "sar":
        signed = value - (1 << (8 * width)) if value >> (8 * width - 1) else value
        result = signed >> count
    else:
        raise ValueError(f"not a shift: {op}")
    return result & mask(width)


def extract_alias(value: AbstractValue, reg: Register) -> AbstractValue:
    """View of a canonical register value through one of its aliases."""
    if value is None:
        return None
    if reg.high_byte:
        return (value >> 8) & 0xFF
    return value & mask(reg.width)


def merge_alias(old: int, reg: Register, value: int) -> int:
    """ISA result of writing ``value`` through alias ``reg`` over ``old``.

    32-bit writes zero-extend; 8- and 16-bit writes keep the other bytes.
    """
    if reg.reg_class is RegClass.GPR64:
        return value & MASK64
    if reg.reg_class is RegClass.GPR32:
        return value & mask(4)
    if reg.high_byte:
        return (old & ~0xFF00 & MASK64) | ((value & 0xFF) << 8)
    m = mask(reg.width)
    return (old & ~m & MASK64) | (value & m)


Write = Tuple[Operand, int, AbstractValue]
ReadFn = Callable[[Operand, int], AbstractValue]
AddressFn = Callable[[MemOperand], AbstractValue]


def integer_effects(instr: Instruction, read: ReadFn, address: AddressFn) -> List[Write]:
    """Evaluate a supported-integer instruction.

    ``read(operand, width)`` returns the operand value (immediates, registers
    through their alias, memory loads); ``address(mem)`` evaluates an
    address without touching memory. Returns ``(destination, width, value)``
    writes in order; callers resolve every memory destination address before
    applying any register write.
    """
    op, width, ops = instr.op, instr.op_width, instr.operands

    if op == "nop":
        return []
    if op in ("test", "cmp"):
        read(ops[0], width)
        read(ops[1], width)
        return []
    if op == "mov":
        src, dst = ops
        return [(dst, width, read(src, width))]
    if op in ("movsx", "movzx"):
        src, dst = ops
        value = read(src, instr.src_width)
        return [(dst, width, extend(value, instr.src_width, width, op == "movsx"))]
    if op == "lea":
        src, dst = ops
        assert isinstance(src, MemOperand)
        return [(dst, width, truncate(address(src), width))]
    if op in ("add", "sub", "and", "or", "xor"):
        src, dst = ops
        s = read(src, width)
        d = read(dst, width)
        return [(dst, width, evaluate_binary(op, width, d, s))]
    if op in ("shl", "shr", "sar"):
        if len(ops) == 1:
            count: AbstractValue = 1
            (dst,) = ops
        else:
            count = read(ops[0], 1)
            dst = ops[1]
        return [(dst, width, evaluate_shift(op, width, read(dst, width), count))]
    if op in ("inc", "dec", "neg", "not"):
        (dst,) = ops
        return [(dst, width, evaluate_unary(op, width, read(dst, width)))]
    if op == "imul":
        if len(ops) == 2:
            src, dst = ops
            s = read(src, width)
            d = read(dst, width)
            return [(dst, width, evaluate_binary("imul", width, d, s))]
        imm, src, dst = ops
        s = read(src, width)
        return [(dst, width, evaluate_binary("imul", width, s, read(imm, width)))]
    if op == "push":
        value = read(ops[0], 8)
        sp = read(RSP, 8)
        return [(PUSH_SLOT, 8, value), (RSP, 8, evaluate_binary("sub", 8, sp, 8))]
    if op == "pop":
        sp = read(RSP, 8)
        value = read(POP_SLOT, 8)
        return [(ops[0], 8, value), (RSP, 8, evaluate_binary("add", 8, sp, 8))]
    if op == "cltq":
        return [(RAX, 8, extend(read(EAX, 4), 4, 8, signed=True))]
    if op == "cqto":
        value = read(RAX, 8)
        return [(RDX, 8, None if value is None else (MASK64 if value >> 63 else 0))]
    raise ValueError(f"not a supported integer operation: {op}")


def opaque_effects(instr: Instruction, read: ReadFn) -> List[Tuple[Operand, int]]:
    """Perform the memory reads of an opaque instruction; return its destinations."""
    for access in instr.memory_reads:
        assert access.mem is not None
        read(access.mem, access.width)
    destinations: List[Tuple[Operand, int]] = []
    for access in instr.writes:
        if access.mem is not None:
            destinations.append((access.mem, access.width))
        else:
            reg = access.alias or access.register
            assert reg is not None
            destinations.append((reg, access.width))
    return destinations


# --- shadow state ---------------------------------------------------------

class ShadowRegFile:
    """Abstract values of the canonical general-purpose registers.

    Registers missing from ``values`` have never been read; reading one
    draws a fresh value from the generator. Vector registers are not
    represented and always read as BOTTOM.
    """

    def __init__(self, values: Optional[Dict[str, AbstractValue]] = None, rip: int = 0):
        self.values: Dict[str, AbstractValue] = dict(values or {})
        self.rip = rip

    def read(self, reg: Register, rng: Optional[np.random.Generator] = None) -> AbstractValue:
        if reg.reg_class is RegClass.RIP:
            return self.rip
        if reg.is_vector:
            return BOTTOM
        if reg.canonical not in self.values:
            if rng is None:
                raise ValueError(f"register {reg} is uninitialized")
            self.values[reg.canonical] = fresh_value(rng)
        return extract_alias(self.values[reg.canonical], reg)

    def write(self, reg: Register, value: AbstractValue) -> None:
        if reg.is_vector or reg.reg_class is RegClass.RIP:
            return
        if reg.is_partial or value is None:
            self.values[reg.canonical] = BOTTOM
        else:
            self.values[reg.canonical] = value & mask(reg.width)

    def copy(self) -> "ShadowRegFile":
        return ShadowRegFile(self.values, self.rip)

    def __repr__(self) -> str:
        regs = ", ".join(
            f"{name}={'⊥' if v is None else hex(v)}" for name, v in sorted(self.values.items()))
        return f"ShadowRegFile(rip={self.rip:#x}, {regs})"


class ShadowMemory:
    """Byte-granular shadow memory with last-writer tags.

    ``values`` maps a byte address to its abstract byte (``None`` is BOTTOM);
    ``writers`` maps it to the unrolled id of the last store that covered it.
    Fresh-value fills never touch ``writers``.
    """

    def __init__(self) -> None:
        self.values: Dict[int, Optional[int]] = {}
        self.writers: Dict[int, int] = {}
        self.dropped_stores = 0

    @staticmethod
    def _span(address: int, width: int) -> List[int]:
        return [(address + i) & MASK64 for i in range(width)]

    def last_writers(self, address: AbstractValue, width: int) -> FrozenSet[int]:
        if address is None:
            return frozenset()
        return frozenset(
            self.writers[a] for a in self._span(address, width) if a in self.writers)

    def load(self, address: AbstractValue, width: int,
             rng: np.random.Generator) -> Tuple[AbstractValue, FrozenSet[int]]:
        """Return (value, last writers) of a ``width``-byte little-endian load.

        If any covered byte is unknown the whole span is refilled with fresh
        bytes, which later loads of the same bytes see again. Loads wider
        than 8 bytes yield BOTTOM (vector data) but still fill and report
        writers.
        """
        if address is None:
            return BOTTOM, frozenset()
        span = self._span(address, width)
        data = [self.values.get(a) for a in span]
        if any(b is None for b in data):
            words = -(-width // 8)
            raw = b"".join(fresh_value(rng).to_bytes(8, "little") for _ in range(words))
            data = list(raw[:width])
            for a, b in zip(span, data):
                self.values[a] = b
        writers = frozenset(self.writers[a] for a in span if a in self.writers)
        if width > 8:
            return BOTTOM, writers
        return int.from_bytes(bytes(data), "little"), writers

    def store(self, address: AbstractValue, width: int, value: AbstractValue, writer: int) -> bool:
        """Write ``width`` bytes and tag them; returns False if the store is dropped."""
        if address is None:
            self.dropped_stores += 1
            logger.debug("dropped store of %d bytes by %d: address is bottom", width, writer)
            return False
        span = self._span(address, width)
        if value is None or width > 8:
            data: List[Optional[int]] = [None] * width
        else:
            data = list((value & mask(width)).to_bytes(width, "little"))
        for a, b in zip(span, data):
            self.values[a] = b
            self.writers[a] = writer
        return True

    def copy(self) -> "ShadowMemory":
        other = ShadowMemory()
        other.values = dict(self.values)
        other.writers = dict(self.writers)
        other.dropped_stores = self.dropped_stores
        return other


@dataclass(frozen=True)
class LoadEvent:
    unrolled_id: int
    address: AbstractValue
    width: int
    writers: FrozenSet[int] = frozenset()


@dataclass(frozen=True)
class StoreEvent:
    unrolled_id: int
    address: AbstractValue
    width: int


@dataclass
class StepEvents:
    """Memory accesses performed by one step, in execution order."""
    loads: List[LoadEvent] = field(default_factory=list)
    stores: List[StoreEvent] = field(default_factory=list)


def eval_address(mem: MemOperand, regs: ShadowRegFile,
                 rng: Optional[np.random.Generator] = None) -> AbstractValue:
    """disp + base + index * scale, wrapping at 2^64; BOTTOM if any input is."""
    base = regs.read(mem.base, rng) if mem.base is not None else 0
    index = regs.read(mem.index, rng) if mem.index is not None else 0
    if base is None or index is None:
        return BOTTOM
    return (mem.displacement + base + index * mem.scale) & MASK64


class _Step:
    """Operand plumbing for one abstract step."""

    def __init__(self, regs: ShadowRegFile, mem: ShadowMemory, uid: int,
                 rng: np.random.Generator):
        self.regs = regs
        self.mem = mem
        self.uid = uid
        self.rng = rng
        self.events = StepEvents()
        self._addresses: Dict[MemOperand, AbstractValue] = {}

    def address(self, mem: MemOperand) -> AbstractValue:
        if mem not in self._addresses:
            self._addresses[mem] = eval_address(mem, self.regs, self.rng)
        return self._addresses[mem]

    def read(self, operand: Operand, width: int) -> AbstractValue:
        if isinstance(operand, Immediate):
            return operand.value & mask(width)
        if isinstance(operand, Register):
            return self.regs.read(operand, self.rng)
        address = self.address(operand)
        value, writers = self.mem.load(address, width, self.rng)
        self.events.loads.append(LoadEvent(self.uid, address, width, writers))
        return value

    def apply(self, writes: List[Write]) -> None:
        for operand, _, _ in writes:
            if isinstance(operand, MemOperand):
                self.address(operand)
        for operand, width, value in writes:
            if isinstance(operand, Register):
                self.regs.write(operand, value)
            elif isinstance(operand, MemOperand):
                address = self.address(operand)
                self.mem.store(address, width, value, self.uid)
                self.events.stores.append(StoreEvent(self.uid, address, width))


def step(regs: ShadowRegFile, mem: ShadowMemory, instr: Instruction, unrolled_id: int,
         rng: np.random.Generator) -> Tuple[ShadowRegFile, ShadowMemory, StepEvents]:
    """Execute one instruction over the shadow state.

    The state is updated in place and returned. ``rip`` holds the address
    of ``instr`` while it executes and the next instruction's address after.
    """
    regs.rip = instr.address
    frame = _Step(regs, mem, unrolled_id, rng)
    if instr.is_supported:
        frame.apply(integer_effects(instr, frame.read, frame.address))
    else:
        destinations = opaque_effects(instr, frame.read)
        frame.apply([(operand, width, BOTTOM) for operand, width in destinations])
    regs.rip = (instr.address + instr.size) & MASK64
    return regs, mem, frame.events
