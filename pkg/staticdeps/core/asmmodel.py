"""
AT&T-syntax x86-64 assembly front end.

Parses straight-line kernels into :class:`~staticdeps.models.kernel.Kernel`
objects and derives, for every instruction, the register and memory accesses
it performs. The operand grammar is a pyparsing grammar::

    operand := "$" int | "%" regname | [int] "(" ["%" reg] ["," ["%" reg] ["," scale]] ")"
"""
import logging
import re
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import pyparsing as pp

from ..models.kernel import (
    DEFAULT_BASE_ADDRESS,
    INSTRUCTION_SIZE,
    REGISTERS,
    Access,
    Immediate,
    Instruction,
    Kernel,
    MemOperand,
    Operand,
    RegClass,
    Register,
    SemanticClass,
    canonical_register,
)
from .errors import AsmSyntaxError, UnsupportedSyntaxError

logger = logging.getLogger(__name__)

SIZE_SUFFIXES = {"q": 8, "l": 4, "w": 2, "b": 1}

CONTROL_FLOW = frozenset({
    "call", "callq", "ret", "retq", "loop", "loope", "loopne", "loopz", "loopnz",
    "syscall", "sysret", "sysenter", "sysexit", "iret", "iretq", "int", "int3", "into",
    "hlt", "ud2",
})

PREFIXES = frozenset({"lock", "rep", "repe", "repz", "repne", "repnz", "notrack", "bnd"})

# Supported integer families, by normalized name.
_MOVES = {"mov": "mov", "movabs": "mov"}
_BINARY = {"add", "sub", "and", "or", "xor"}
_SHIFTS = {"shl": "shl", "sal": "shl", "shr": "shr", "sar": "sar"}
_UNARY = {"inc", "dec", "neg", "not"}
_COMPARES = {"test", "cmp"}
_FAMILIES = (
    set(_MOVES) | _BINARY | set(_SHIFTS) | _UNARY | _COMPARES
    | {"lea", "imul", "push", "pop", "nop"}
)
_IMPLICIT = {"cltq": "cltq", "cdqe": "cltq", "cqto": "cqto", "cqo": "cqto"}
_EXTENSION = re.compile(r"^mov([sz])([bwl])([wlq])$")

_WIDE_OPS = {"mul", "imul", "div", "idiv"}
_READ_ONLY_OPAQUE = ("prefetch", "ucomis", "comis", "ptest", "clflush")
_BIT_TESTS = {"bt", "btw", "btl", "btq"}
_MOVE_LIKE = ("mov", "cvt", "pmov", "broadcast", "extract", "stos")
_VECTOR_MOVES = {
    "movaps", "movups", "movapd", "movupd", "movdqa", "movdqu",
    "vmovaps", "vmovups", "vmovapd", "vmovupd", "vmovdqa", "vmovdqu",
}

_LABEL = re.compile(r"^[A-Za-z_.$][\w.$]*:")
_MNEMONIC = re.compile(r"^[A-Za-z][A-Za-z0-9]*")


def _to_int(text: str) -> int:
    sign = -1 if text.startswith("-") else 1
    digits = text.lstrip("+-")
    if digits[:2].lower() == "0x":
        return sign * int(digits[2:], 16)
    return sign * int(digits, 10)


def _build_operand_grammar() -> pp.ParserElement:
    integer = pp.Regex(r"[+-]?(?:0[xX][0-9a-fA-F]+|[0-9]+)").set_parse_action(
        lambda t: _to_int(t[0])
    )
    name = pp.Word(pp.alphanums)
    pct = pp.Suppress("%")

    immediate = pp.Group(pp.Suppress("$") + integer("imm"))
    register = pp.Group(pct + name("reg"))
    memory = pp.Group(
        pp.Optional(integer("disp"))
        + pp.Literal("(")("lparen")
        + pp.Optional(pct + name("base"))
        + pp.Optional(
            pp.Suppress(",")
            + pp.Optional(pct + name("index"))
            + pp.Optional(pp.Suppress(",") + integer("scale"))
        )
        + pp.Suppress(")")
    )
    operand = immediate | register | memory
    return pp.Optional(operand + pp.ZeroOrMore(pp.Suppress(",") + operand)) + pp.StringEnd()


_OPERANDS = _build_operand_grammar()


def _lookup_register(name: str, lineno: int) -> Register:
    reg = REGISTERS.get(name.lower())
    if reg is None:
        raise AsmSyntaxError(lineno, f"unknown register %{name}")
    return reg


def _convert_operand(group: pp.ParseResults, lineno: int) -> Operand:
    if "imm" in group:
        value = group["imm"]
        if not -(1 << 63) <= value < (1 << 64):
            raise AsmSyntaxError(lineno, f"immediate out of range: {value}")
        return Immediate(value)
    if "reg" in group:
        reg = _lookup_register(group["reg"], lineno)
        if reg.reg_class is RegClass.RIP:
            raise AsmSyntaxError(lineno, "%rip is only valid as a memory base")
        return reg

    disp = group.get("disp", 0)
    if not -(1 << 63) <= disp < (1 << 63):
        raise AsmSyntaxError(lineno, f"displacement out of range: {disp}")
    base = _lookup_register(group["base"], lineno) if "base" in group else None
    index = _lookup_register(group["index"], lineno) if "index" in group else None
    scale = group.get("scale", 1)

    if base is not None and base.reg_class not in (RegClass.GPR64, RegClass.RIP):
        raise AsmSyntaxError(lineno, f"address base {base} must be a 64-bit register")
    if index is not None:
        if index.reg_class is not RegClass.GPR64 or index.name == "rsp":
            raise AsmSyntaxError(lineno, f"invalid address index {index}")
        if scale not in (1, 2, 4, 8):
            raise AsmSyntaxError(lineno, f"invalid scale {scale}")
    elif "scale" in group:
        raise AsmSyntaxError(lineno, "scale given without an index register")

    rip_relative = base is not None and base.reg_class is RegClass.RIP
    if rip_relative and index is not None:
        raise AsmSyntaxError(lineno, "rip-relative operands cannot have an index")
    return MemOperand(displacement=disp, base=base, index=index, scale=scale,
                      rip_relative=rip_relative)


def parse_operands(text: str, lineno: int = 0) -> Tuple[Operand, ...]:
    """Parse the comma-separated operand list of one instruction."""
    try:
        groups = _OPERANDS.parse_string(text, parse_all=True)
    except pp.ParseBaseException as exc:
        raise AsmSyntaxError(lineno, f"malformed operand near column {exc.col}: {text!r}") from exc
    return tuple(_convert_operand(g, lineno) for g in groups)


class _AccessBuilder:
    """Collects ordered, de-duplicated read and write accesses."""

    def __init__(self) -> None:
        self.reads: List[Access] = []
        self.writes: List[Access] = []

    @staticmethod
    def _add(target: List[Access], access: Access) -> None:
        if access not in target:
            target.append(access)

    def read_register(self, reg: Register) -> None:
        self._add(self.reads, Access(width=reg.width, register=canonical_register(reg), alias=reg))

    def write_register(self, reg: Register) -> None:
        self._add(self.writes, Access(width=reg.width, register=canonical_register(reg), alias=reg))

    def address(self, mem: MemOperand) -> None:
        for reg in mem.registers():
            self.read_register(reg)

    def read(self, operand: Operand, width: int) -> None:
        if isinstance(operand, Register):
            self.read_register(operand)
        elif isinstance(operand, MemOperand):
            self.address(operand)
            self._add(self.reads, Access(width=width, mem=operand))

    def write(self, operand: Operand, width: int) -> None:
        if isinstance(operand, Register):
            self.write_register(operand)
        elif isinstance(operand, MemOperand):
            self.address(operand)
            self._add(self.writes, Access(width=width, mem=operand))

    def result(self) -> Tuple[Tuple[Access, ...], Tuple[Access, ...]]:
        return tuple(self.reads), tuple(self.writes)


_RSP = REGISTERS["rsp"]
_RAX = REGISTERS["rax"]
_RDX = REGISTERS["rdx"]
_EAX = REGISTERS["eax"]


def is_control_flow(mnemonic: str) -> bool:
    """True for jumps, calls, returns and other block terminators."""
    return mnemonic.startswith("j") or mnemonic in CONTROL_FLOW


def split_mnemonic(mnemonic: str) -> Tuple[Optional[str], Optional[int]]:
    """Split a supported integer mnemonic into (family, suffix width).

    Returns ``(None, None)`` for mnemonics outside the supported families.
    """
    if mnemonic in _FAMILIES:
        return mnemonic, None
    if mnemonic[-1:] in SIZE_SUFFIXES and mnemonic[:-1] in _FAMILIES:
        return mnemonic[:-1], SIZE_SUFFIXES[mnemonic[-1]]
    return None, None


def _gpr_widths(operands: Sequence[Operand]) -> List[int]:
    return [op.width for op in operands if isinstance(op, Register) and op.is_gpr]


def _operation_width(suffix: Optional[int], operands: Sequence[Operand], lineno: int,
                     mnemonic: str) -> int:
    widths = _gpr_widths(operands)
    if suffix is not None:
        if any(w != suffix for w in widths):
            raise AsmSyntaxError(lineno, f"operand size mismatch for {mnemonic}")
        return suffix
    if not widths:
        raise AsmSyntaxError(lineno, f"operand size of {mnemonic} is ambiguous; add a size suffix")
    if any(w != widths[0] for w in widths):
        raise AsmSyntaxError(lineno, f"operand size mismatch for {mnemonic}")
    return widths[0]


def _expect(count: int, operands: Sequence[Operand], lineno: int, mnemonic: str) -> None:
    if len(operands) != count:
        raise AsmSyntaxError(lineno, f"{mnemonic} expects {count} operand(s), got {len(operands)}")


def _expect_destination(operand: Operand, lineno: int, mnemonic: str,
                        register_only: bool = False) -> None:
    if isinstance(operand, Immediate) or (register_only and not isinstance(operand, Register)):
        kind = "a register" if register_only else "a register or memory"
        raise AsmSyntaxError(lineno, f"destination of {mnemonic} must be {kind}")


def _no_memory_pair(operands: Sequence[Operand], lineno: int, mnemonic: str) -> None:
    if sum(isinstance(op, MemOperand) for op in operands) > 1:
        raise AsmSyntaxError(lineno, f"{mnemonic} cannot take two memory operands")


_Decoded = Tuple[str, int, int, Tuple[Access, ...], Tuple[Access, ...]]


def _decode_supported(family: str, suffix: Optional[int], operands: Tuple[Operand, ...],
                      lineno: int, mnemonic: str) -> _Decoded:
    """Return (op, op_width, src_width, reads, writes) for a supported integer instruction."""
    acc = _AccessBuilder()

    if family == "nop":
        for operand in operands:
            if isinstance(operand, MemOperand):
                acc.address(operand)
        return ("nop", suffix or 8, suffix or 8) + acc.result()

    if family in _MOVES:
        _expect(2, operands, lineno, mnemonic)
        src, dst = operands
        _expect_destination(dst, lineno, mnemonic)
        _no_memory_pair(operands, lineno, mnemonic)
        width = _operation_width(suffix, operands, lineno, mnemonic)
        acc.read(src, width)
        acc.write(dst, width)
        return ("mov", width, width) + acc.result()

    if family == "lea":
        _expect(2, operands, lineno, mnemonic)
        src, dst = operands
        if not isinstance(src, MemOperand):
            raise AsmSyntaxError(lineno, "lea source must be a memory operand")
        _expect_destination(dst, lineno, mnemonic, register_only=True)
        width = _operation_width(suffix, (dst,), lineno, mnemonic)
        acc.address(src)
        acc.write(dst, width)
        return ("lea", width, width) + acc.result()

    if family in _BINARY or family in _COMPARES:
        _expect(2, operands, lineno, mnemonic)
        src, dst = operands
        _no_memory_pair(operands, lineno, mnemonic)
        width = _operation_width(suffix, operands, lineno, mnemonic)
        if family in _COMPARES:
            acc.read(src, width)
            acc.read(dst, width)
            return (family, width, width) + acc.result()
        _expect_destination(dst, lineno, mnemonic)
        acc.read(src, width)
        acc.read(dst, width)
        acc.write(dst, width)
        return (family, width, width) + acc.result()

    if family in _SHIFTS:
        if len(operands) == 1:
            count: Optional[Operand] = None
            (dst,) = operands
        else:
            _expect(2, operands, lineno, mnemonic)
            count, dst = operands
            if isinstance(count, Register) and count.name != "cl":
                raise AsmSyntaxError(lineno, "shift count must be an immediate or %cl")
            if isinstance(count, MemOperand):
                raise AsmSyntaxError(lineno, "shift count must be an immediate or %cl")
        _expect_destination(dst, lineno, mnemonic)
        width = _operation_width(suffix, (dst,), lineno, mnemonic)
        if count is not None:
            acc.read(count, 1)
        acc.read(dst, width)
        acc.write(dst, width)
        return (_SHIFTS[family], width, width) + acc.result()

    if family in _UNARY:
        _expect(1, operands, lineno, mnemonic)
        (dst,) = operands
        _expect_destination(dst, lineno, mnemonic)
        width = _operation_width(suffix, operands, lineno, mnemonic)
        acc.read(dst, width)
        acc.write(dst, width)
        return (family, width, width) + acc.result()

    if family == "imul":
        if len(operands) == 2:
            src, dst = operands
            _expect_destination(dst, lineno, mnemonic, register_only=True)
            width = _operation_width(suffix, operands, lineno, mnemonic)
            acc.read(src, width)
            acc.read(dst, width)
            acc.write(dst, width)
            return ("imul", width, width) + acc.result()
        _expect(3, operands, lineno, mnemonic)
        imm, src, dst = operands
        if not isinstance(imm, Immediate):
            raise AsmSyntaxError(lineno, "three-operand imul needs an immediate first operand")
        _expect_destination(dst, lineno, mnemonic, register_only=True)
        width = _operation_width(suffix, (src, dst), lineno, mnemonic)
        acc.read(src, width)
        acc.write(dst, width)
        return ("imul", width, width) + acc.result()

    if family == "push":
        _expect(1, operands, lineno, mnemonic)
        if suffix not in (None, 8) or any(w != 8 for w in _gpr_widths(operands)):
            raise AsmSyntaxError(lineno, "only 64-bit push is supported")
        acc.read(operands[0], 8)
        acc.read_register(_RSP)
        acc.write_register(_RSP)
        acc.write(MemOperand(displacement=-8, base=_RSP), 8)
        return ("push", 8, 8) + acc.result()

    if family == "pop":
        _expect(1, operands, lineno, mnemonic)
        (dst,) = operands
        _expect_destination(dst, lineno, mnemonic)
        if suffix not in (None, 8) or any(w != 8 for w in _gpr_widths(operands)):
            raise AsmSyntaxError(lineno, "only 64-bit pop is supported")
        acc.read_register(_RSP)
        acc.read(MemOperand(base=_RSP), 8)
        acc.write(dst, 8)
        acc.write_register(_RSP)
        return ("pop", 8, 8) + acc.result()

    raise AsmSyntaxError(lineno, f"unhandled mnemonic {mnemonic}")  # pragma: no cover


def _decode_extension(sign: str, src_width: Optional[int], dst_width: Optional[int],
                      operands: Tuple[Operand, ...], lineno: int, mnemonic: str) -> _Decoded:
    _expect(2, operands, lineno, mnemonic)
    src, dst = operands
    _expect_destination(dst, lineno, mnemonic, register_only=True)
    assert isinstance(dst, Register)
    if isinstance(src, Immediate):
        raise AsmSyntaxError(lineno, f"{mnemonic} source must be a register or memory")
    if src_width is None:
        if not isinstance(src, Register):
            raise AsmSyntaxError(lineno, f"source size of {mnemonic} is ambiguous")
        src_width = src.width
    elif isinstance(src, Register) and src.width != src_width:
        raise AsmSyntaxError(lineno, f"operand size mismatch for {mnemonic}")
    if dst_width is None:
        dst_width = dst.width
    elif dst.width != dst_width:
        raise AsmSyntaxError(lineno, f"operand size mismatch for {mnemonic}")
    if not dst.is_gpr or src_width >= dst_width:
        raise AsmSyntaxError(lineno, f"invalid extension {mnemonic}")
    acc = _AccessBuilder()
    acc.read(src, src_width)
    acc.write(dst, dst_width)
    op = "movsx" if sign == "s" else "movzx"
    return (op, dst_width, src_width) + acc.result()


def _decode_implicit(op: str, operands: Tuple[Operand, ...], lineno: int,
                     mnemonic: str) -> _Decoded:
    _expect(0, operands, lineno, mnemonic)
    acc = _AccessBuilder()
    if op == "cltq":
        acc.read_register(_EAX)
        acc.write_register(_RAX)
    else:
        acc.read_register(_RAX)
        acc.write_register(_RDX)
    return (op, 8, 8) + acc.result()


def opaque_memory_width(mnemonic: str, operands: Sequence[Operand]) -> int:
    """Byte width of the memory operand of an instruction the interpreter does not compute."""
    core = mnemonic[1:] if mnemonic.startswith("v") else mnemonic
    vector = [op.width for op in operands if isinstance(op, Register) and op.is_vector]
    if mnemonic in _VECTOR_MOVES:
        return max(vector) if vector else 16
    if mnemonic.startswith("set"):
        return 1
    if core in ("movq", "movd"):
        return 8 if core == "movq" else 4
    if core.endswith("ss"):
        return 4
    if core.endswith("sd"):
        return 8
    if vector:
        return max(vector)
    gprs = _gpr_widths(operands)
    if gprs:
        return max(gprs)
    if mnemonic[-1:] in SIZE_SUFFIXES:
        return SIZE_SUFFIXES[mnemonic[-1]]
    return 8


def _decode_opaque(mnemonic: str, operands: Tuple[Operand, ...]) -> _Decoded:
    acc = _AccessBuilder()
    width = opaque_memory_width(mnemonic, operands)
    core = mnemonic[1:] if mnemonic.startswith("v") else mnemonic
    wide = mnemonic if mnemonic in _WIDE_OPS else None
    if wide is None and mnemonic[-1:] in SIZE_SUFFIXES and mnemonic[:-1] in _WIDE_OPS:
        wide = mnemonic[:-1]

    if len(operands) == 1 and wide is not None:
        acc.read(operands[0], width)
        acc.read_register(_RAX)
        if wide in ("div", "idiv"):
            acc.read_register(_RDX)
        acc.write_register(_RAX)
        acc.write_register(_RDX)
        return (mnemonic, width, width) + acc.result()

    if not operands:
        return (mnemonic, width, width) + acc.result()

    if core.startswith(_READ_ONLY_OPAQUE) or mnemonic in _BIT_TESTS:
        for operand in operands:
            acc.read(operand, width)
        return (mnemonic, width, width) + acc.result()

    *sources, dst = operands
    for operand in sources:
        acc.read(operand, width)
    move_like = core.startswith(_MOVE_LIKE) or mnemonic.startswith("set")
    fused = "fmadd" in core or "fmsub" in core or "fnmadd" in core or "fnmsub" in core
    reads_destination = fused or (not move_like and len(operands) <= 2)
    if reads_destination:
        acc.read(dst, width)
    acc.write(dst, width)
    return (mnemonic, width, width) + acc.result()


def _decode(mnemonic: str, operands: Tuple[Operand, ...], lineno: int) -> Tuple[SemanticClass, _Decoded]:
    has_vector = any(isinstance(op, Register) and op.is_vector for op in operands)
    if not has_vector:
        family, suffix = split_mnemonic(mnemonic)
        if family is not None and not (family == "imul" and len(operands) == 1):
            return SemanticClass.SUPPORTED_INTEGER, _decode_supported(
                family, suffix, operands, lineno, mnemonic)
        if mnemonic in _IMPLICIT:
            return SemanticClass.SUPPORTED_INTEGER, _decode_implicit(
                _IMPLICIT[mnemonic], operands, lineno, mnemonic)
        match = _EXTENSION.match(mnemonic)
        if match:
            sign, src, dst = match.groups()
            return SemanticClass.SUPPORTED_INTEGER, _decode_extension(
                sign, SIZE_SUFFIXES[src], SIZE_SUFFIXES[dst], operands, lineno, mnemonic)
        if mnemonic in ("movsx", "movzx", "movsxd"):
            src_width = 4 if mnemonic == "movsxd" else None
            return SemanticClass.SUPPORTED_INTEGER, _decode_extension(
                mnemonic[3], src_width, None, operands, lineno, mnemonic)
    return SemanticClass.OPAQUE, _decode_opaque(mnemonic, operands)


def strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_instruction(line: str, index: int = 0, lineno: int = 0,
                      address: int = DEFAULT_BASE_ADDRESS) -> Optional[Instruction]:
    """Parse one source line; returns None for blank, comment, label or directive lines."""
    text = strip_comment(line)
    label = _LABEL.match(text)
    if label:
        text = text[label.end():].strip()
    if not text or text.startswith("."):
        return None

    match = _MNEMONIC.match(text)
    if not match:
        raise AsmSyntaxError(lineno, f"expected a mnemonic: {text!r}")
    mnemonic = match.group(0).lower()
    rest = text[match.end():]
    while mnemonic in PREFIXES:
        rest = rest.strip()
        match = _MNEMONIC.match(rest)
        if not match:
            raise AsmSyntaxError(lineno, f"prefix {mnemonic} without an instruction")
        mnemonic = match.group(0).lower()
        rest = rest[match.end():]
    if rest and not rest[0].isspace():
        raise AsmSyntaxError(lineno, f"malformed mnemonic in {text!r}")

    if is_control_flow(mnemonic):
        raise UnsupportedSyntaxError(
            lineno, f"control-flow instruction '{mnemonic}' is not allowed in a basic block body")

    operands = parse_operands(rest.strip(), lineno)
    semantic_class, (op, op_width, src_width, reads, writes) = _decode(mnemonic, operands, lineno)
    return Instruction(
        index=index,
        mnemonic=mnemonic,
        operands=operands,
        reads=reads,
        writes=writes,
        semantic_class=semantic_class,
        op=op,
        op_width=op_width,
        src_width=src_width,
        address=address,
        size=INSTRUCTION_SIZE,
        line=lineno,
    )


def parse_kernel(text: str, base_address: int = DEFAULT_BASE_ADDRESS) -> Kernel:
    """Parse an assembly listing into a Kernel.

    Instruction ``k`` gets the synthetic address ``base_address + 16 * k``.
    """
    instructions: List[Instruction] = []
    source: List[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        address = (base_address + INSTRUCTION_SIZE * len(instructions)) % (1 << 64)
        instr = parse_instruction(line, len(instructions), lineno, address)
        if instr is None:
            continue
        instructions.append(instr)
        source.append(line.rstrip())

    opaque = sum(1 for i in instructions if not i.is_supported)
    logger.debug("parsed kernel: %d instructions, %d opaque", len(instructions), opaque)
    return Kernel(
        instructions=tuple(instructions),
        source_text=tuple(source),
        synthetic_base_address=base_address,
        instruction_byte_sizes=tuple(i.size for i in instructions),
    )


def rebase(kernel: Kernel, base_address: int) -> Kernel:
    """Return kernel with synthetic addresses recomputed from base_address."""
    if base_address == kernel.synthetic_base_address:
        return kernel
    instructions = tuple(
        replace(instr, address=(base_address + INSTRUCTION_SIZE * instr.index) % (1 << 64))
        for instr in kernel.instructions
    )
    return replace(kernel, instructions=instructions, synthetic_base_address=base_address)


def access_descriptors(instr: Instruction) -> Tuple[Tuple[Access, ...], Tuple[Access, ...]]:
    """Return the (reads, writes) access lists of a parsed instruction."""
    return instr.reads, instr.writes
