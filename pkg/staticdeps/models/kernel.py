"""
Kernel model: registers, operands, access descriptors and parsed instructions.
"""
import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, Optional, Tuple, Union


class RegClass(Enum):
    """Width class of a register name."""
    GPR64 = "gpr64"
    GPR32 = "gpr32"
    GPR16 = "gpr16"
    GPR8 = "gpr8"
    VECTOR = "vector"
    RIP = "rip"


class SemanticClass(Enum):
    """Whether the abstract interpreter computes exact results for an instruction."""
    SUPPORTED_INTEGER = "supported-integer"
    OPAQUE = "opaque"


@dataclass(frozen=True)
class Register:
    """A register name and the canonical 64-bit register it aliases."""
    name: str
    canonical: str
    reg_class: RegClass
    width: int
    high_byte: bool = False

    @property
    def is_gpr(self) -> bool:
        return self.reg_class in (RegClass.GPR64, RegClass.GPR32, RegClass.GPR16, RegClass.GPR8)

    @property
    def is_vector(self) -> bool:
        return self.reg_class is RegClass.VECTOR

    @property
    def is_partial(self) -> bool:
        """8- and 16-bit aliases; writing them poisons the canonical register."""
        return self.reg_class in (RegClass.GPR16, RegClass.GPR8)

    def __str__(self) -> str:
        return f"%{self.name}"


GPR_NAMES: Tuple[str, ...] = (
    "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp",
    "r8", "r9", "r10", "r11", "r12", "r13", "r14", "r15",
)

_LEGACY_ALIASES = {
    "rax": ("eax", "ax", "al", "ah"),
    "rbx": ("ebx", "bx", "bl", "bh"),
    "rcx": ("ecx", "cx", "cl", "ch"),
    "rdx": ("edx", "dx", "dl", "dh"),
    "rsi": ("esi", "si", "sil", None),
    "rdi": ("edi", "di", "dil", None),
    "rbp": ("ebp", "bp", "bpl", None),
    "rsp": ("esp", "sp", "spl", None),
}


def _build_register_table() -> Dict[str, Register]:
    table: Dict[str, Register] = {}

    def add(reg: Register) -> None:
        table[reg.name] = reg

    for gpr in GPR_NAMES:
        add(Register(gpr, gpr, RegClass.GPR64, 8))
        if gpr in _LEGACY_ALIASES:
            r32, r16, r8, r8h = _LEGACY_ALIASES[gpr]
        else:
            r32, r16, r8, r8h = f"{gpr}d", f"{gpr}w", f"{gpr}b", None
        add(Register(r32, gpr, RegClass.GPR32, 4))
        add(Register(r16, gpr, RegClass.GPR16, 2))
        add(Register(r8, gpr, RegClass.GPR8, 1))
        if r8h is not None:
            add(Register(r8h, gpr, RegClass.GPR8, 1, high_byte=True))

    add(Register("rip", "rip", RegClass.RIP, 8))
    for i in range(16):
        add(Register(f"xmm{i}", f"xmm{i}", RegClass.VECTOR, 16))
        add(Register(f"ymm{i}", f"ymm{i}", RegClass.VECTOR, 32))
    return table


REGISTERS: Dict[str, Register] = _build_register_table()


def canonical_register(reg: Register) -> Register:
    """Return the 64-bit register (or the vector register itself) that reg aliases."""
    return REGISTERS[reg.canonical]


@dataclass(frozen=True)
class Immediate:
    """An immediate operand ($value)."""
    value: int

    def __str__(self) -> str:
        return f"${self.value}"


@dataclass(frozen=True)
class MemOperand:
    """AT&T memory operand: displacement(base, index, scale)."""
    displacement: int = 0
    base: Optional[Register] = None
    index: Optional[Register] = None
    scale: int = 1
    rip_relative: bool = False

    def registers(self) -> Tuple[Register, ...]:
        """Registers read to compute the address."""
        return tuple(r for r in (self.base, self.index) if r is not None)

    def __str__(self) -> str:
        disp = str(self.displacement) if self.displacement else ""
        inner = str(self.base) if self.base is not None else ""
        if self.index is not None:
            inner += f",{self.index},{self.scale}"
        return f"{disp}({inner})"


Operand = Union[Immediate, Register, MemOperand]


@dataclass(frozen=True)
class Access:
    """A register or memory access of a given byte width.

    Register accesses carry the canonical register; the alias width is kept
    in ``width`` and the alias itself in ``alias`` (not part of equality).
    """
    width: int
    register: Optional[Register] = None
    mem: Optional[MemOperand] = None
    alias: Optional[Register] = field(default=None, compare=False, repr=False)

    @property
    def is_memory(self) -> bool:
        return self.mem is not None

    def __str__(self) -> str:
        if self.mem is not None:
            return f"mem[{self.mem}]:{self.width}"
        return f"{self.register}:{self.width}"


@dataclass(frozen=True)
class Instruction:
    """One parsed instruction of a kernel."""
    index: int
    mnemonic: str
    operands: Tuple[Operand, ...]
    reads: Tuple[Access, ...]
    writes: Tuple[Access, ...]
    semantic_class: SemanticClass
    op: str
    op_width: int
    src_width: int
    address: int = 0
    size: int = 16
    line: int = field(default=0, compare=False)

    @property
    def is_supported(self) -> bool:
        return self.semantic_class is SemanticClass.SUPPORTED_INTEGER

    @property
    def memory_reads(self) -> Tuple[Access, ...]:
        return tuple(a for a in self.reads if a.is_memory)

    @property
    def memory_writes(self) -> Tuple[Access, ...]:
        return tuple(a for a in self.writes if a.is_memory)

    def to_text(self) -> str:
        if not self.operands:
            return self.mnemonic
        return f"{self.mnemonic} " + ", ".join(str(op) for op in self.operands)

    def __str__(self) -> str:
        return self.to_text()


INSTRUCTION_SIZE = 16
DEFAULT_BASE_ADDRESS = 0x400000


@dataclass(frozen=True)
class Kernel:
    """A parsed basic block."""
    instructions: Tuple[Instruction, ...]
    source_text: Tuple[str, ...] = field(default=(), compare=False)
    synthetic_base_address: int = DEFAULT_BASE_ADDRESS
    instruction_byte_sizes: Tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self) -> Iterator[Instruction]:
        return iter(self.instructions)

    def __getitem__(self, index: int) -> Instruction:
        return self.instructions[index]

    @property
    def is_empty(self) -> bool:
        return not self.instructions

    def address_of(self, index: int) -> int:
        """Synthetic address of instruction ``index``."""
        return self.instructions[index].address

    def to_text(self) -> str:
        """Canonical AT&T serialization, one instruction per line."""
        return "".join(f"{instr.to_text()}\n" for instr in self.instructions)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()
