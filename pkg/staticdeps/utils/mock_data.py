"""
Mock data generation for staticdeps.
Random in-scope kernels for property tests and synthetic benchmark
predictions for the lifting and statistics commands.
"""
import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.asmmodel import parse_kernel
from ..models.benchmarks import FAIL_MARKER
from ..models.kernel import REGISTERS, Kernel

logger = logging.getLogger(__name__)

# Registers that only ever hold addresses; updated by 64-bit add/sub only.
ADDRESS_REGISTERS = ("rax", "rbx", "rcx", "rsi", "rdi", "r8")
# Registers that receive loaded data and arbitrary arithmetic.
DATA_REGISTERS = ("rdx", "r9", "r10", "r11", "r12", "r13", "r14", "r15")

SUFFIX = {8: "q", 4: "l", 2: "w", 1: "b"}

FIBONACCI_KERNEL = """\
movq -8(%rax), %rbx
addq -16(%rax), %rbx
movq %rbx, (%rax)
addq $8, %rax
"""

ALIASING_KERNEL = """\
vmulsd (%rax), %xmm0, %xmm1
vmovsd %xmm1, (%r10)
"""

DURBIN_KERNEL = """\
movslq -4(%rsp), %rdx
vmovsd (%rdi,%rdx,8), %xmm0
vaddsd %xmm1, %xmm0, %xmm0
vmovsd %xmm0, (%rdi,%rdx,8)
addl $1, -4(%rsp)
"""

SAMPLE_KERNELS = {
    "fibonacci": FIBONACCI_KERNEL,
    "aliasing": ALIASING_KERNEL,
    "durbin": DURBIN_KERNEL,
}


def alias_name(canonical: str, width: int) -> str:
    """Low alias of a 64-bit register with the given byte width (rdx, 4 -> edx)."""
    for reg in REGISTERS.values():
        if reg.canonical == canonical and reg.width == width and not reg.high_byte \
                and reg.is_gpr:
            return reg.name
    raise KeyError(f"no {width}-byte alias for {canonical}")


class MockDataGenerator:
    """Generate mock kernels and benchmark data for testing and development."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    # --- kernels -----------------------------------------------------------

    def _pick(self, items: Sequence[str]) -> str:
        return items[int(self.rng.integers(len(items)))]

    def _disp(self) -> int:
        return int(self.rng.integers(-8, 9)) * 4

    def _mem(self, address_regs: Sequence[str]) -> str:
        disp = self._disp()
        prefix = str(disp) if disp else ""
        roll = self.rng.random()
        if roll < 0.08:
            return f"{prefix or 0}(%rip)"
        base = self._pick(address_regs)
        if roll < 0.25 and len(address_regs) > 1:
            index = self._pick(address_regs)
            scale = self._pick(("1", "2", "4", "8"))
            return f"{prefix}(%{base},%{index},{scale})"
        return f"{prefix}(%{base})"

    def _data(self, width: int = 8) -> str:
        return "%" + alias_name(self._pick(DATA_REGISTERS), width)

    def _instruction(self, address_regs: Sequence[str]) -> str:
        kind = self._pick((
            "load", "load", "load", "store", "store", "store", "rmw",
            "advance", "alu", "extend", "vector",
        ))
        mem = self._mem(address_regs)
        width = int(self._pick(("8", "8", "4", "2", "1")))
        s = SUFFIX[width]
        if kind == "load":
            op = self._pick(("mov", "add", "xor", "sub"))
            return f"{op}{s} {mem}, {self._data(width)}"
        if kind == "store":
            return f"mov{s} {self._data(width)}, {mem}"
        if kind == "rmw":
            if self.rng.random() < 0.5:
                return f"{self._pick(('inc', 'dec', 'not', 'neg'))}{s} {mem}"
            return f"{self._pick(('add', 'and', 'or'))}{s} ${int(self.rng.integers(1, 64))}, {mem}"
        if kind == "advance":
            step = int(self._pick(("4", "8", "8", "16", "24")))
            return f"{self._pick(('addq', 'subq'))} ${step}, %{self._pick(address_regs)}"
        if kind == "alu":
            choice = self.rng.random()
            if choice < 0.3:
                return f"imulq ${int(self.rng.integers(2, 9))}, {self._data()}, {self._data()}"
            if choice < 0.5:
                return f"shlq ${int(self.rng.integers(1, 5))}, {self._data()}"
            if choice < 0.7:
                return f"leaq 8({self._data()},{self._data()},2), {self._data()}"
            return f"{self._pick(('add', 'xor', 'sub', 'or'))}{s} {self._data(width)}, {self._data(width)}"
        if kind == "extend":
            src_width = int(self._pick(("1", "2", "4")))
            if src_width == 4:
                return f"movslq {mem}, {self._data(8)}"
            return f"movz{SUFFIX[src_width]}l {mem}, {self._data(4)}"
        xmm = f"%xmm{int(self.rng.integers(0, 4))}"
        vector = self._pick((
            f"vmovsd {mem}, {xmm}",
            f"vmovsd {xmm}, {mem}",
            f"vmulsd {mem}, {xmm}, %xmm7",
            f"vmovss {xmm}, {mem}",
        ))
        return vector

    def random_kernel_text(self, length: int) -> str:
        """Assembly text of a kernel whose addresses depend only on GPR arithmetic.

        Address registers change only through 64-bit add/sub of immediates
        and are never loaded into, so every address is an affine function of
        the iteration number.
        """
        count = int(self.rng.integers(1, 3))
        address_regs = [str(r) for r in self.rng.choice(ADDRESS_REGISTERS, size=count, replace=False)]
        lines = [self._instruction(address_regs) for _ in range(length)]
        return "\n".join(lines) + "\n"

    def random_kernel(self, length: Optional[int] = None) -> Kernel:
        if length is None:
            length = int(self.rng.integers(3, 21))
        return parse_kernel(self.random_kernel_text(length))

    # --- benchmarks --------------------------------------------------------

    def random_benchmark_rows(
        self, benchmarks: int = 20, tools: Sequence[str] = ("llvm-mca", "uica", "iaca"),
        fail_rate: float = 0.05,
    ) -> Tuple[List[Dict[str, str]], List[Dict[str, str]]]:
        """Prediction rows and baseline rows in the documented CSV shapes."""
        predictions: List[Dict[str, str]] = []
        baselines: List[Dict[str, str]] = []
        for b in range(benchmarks):
            name = f"bench{b:03d}"
            blocks = int(self.rng.integers(1, 6))
            costs = self.rng.uniform(1.0, 40.0, size=blocks)
            occurrences = self.rng.integers(1, 5000, size=blocks)
            true_cycles = float(np.dot(costs, occurrences))
            baselines.append({
                "benchmark": name,
                "baseline_cycles": f"{true_cycles * self.rng.uniform(0.9, 1.3):.1f}",
            })
            for tool_index, tool in enumerate(tools):
                bias = 1.0 + 0.15 * tool_index
                for k in range(blocks):
                    failed = self.rng.random() < fail_rate
                    pred = costs[k] * bias * self.rng.uniform(0.7, 1.3)
                    predictions.append({
                        "benchmark": name,
                        "block": f"b{k}",
                        "occurrences": str(int(occurrences[k])),
                        "tool": tool,
                        "pred_cycles": FAIL_MARKER if failed else f"{pred:.2f}",
                    })
        return predictions, baselines

    def write_all(self, directory: str, kernels: int = 5, benchmarks: int = 20) -> List[Path]:
        """Write sample kernels and benchmark CSVs; returns the written paths."""
        out = Path(directory)
        (out / "kernels").mkdir(parents=True, exist_ok=True)
        written: List[Path] = []

        for name, text in SAMPLE_KERNELS.items():
            path = out / "kernels" / f"{name}.s"
            path.write_text(text)
            written.append(path)
        for i in range(kernels):
            path = out / "kernels" / f"random{i:02d}.s"
            path.write_text(self.random_kernel_text(int(self.rng.integers(3, 21))))
            written.append(path)

        predictions, baselines = self.random_benchmark_rows(benchmarks)
        for filename, rows in (("predictions.csv", predictions), ("baselines.csv", baselines)):
            path = out / filename
            with open(path, "w", newline="") as f:
                writer = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
                writer.writeheader()
                writer.writerows(rows)
            written.append(path)

        logger.info("wrote %d mock files to %s", len(written), out)
        return written
