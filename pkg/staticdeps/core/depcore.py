"""
Static extraction of memory-carried read-after-write dependencies.

The kernel is unrolled until it spans the reorder buffer plus one copy,
executed once over the shadow state, and every load is linked to the last
writers of the bytes it covers. Raw dependencies farther apart than the
reorder buffer cannot stall issue and are dropped. The rest are re-rolled
to (src, dst, delta_k) triplets; triplets seen in too few eligible
iterations are attributed to fresh-value collisions and discarded.
Running several seeds and intersecting suppresses the remaining
collisions.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Optional, Set, Tuple

from ..models.kernel import DEFAULT_BASE_ADDRESS, Kernel
from ..models.reports import DepKey, DepReport, Dependency
from .asmmodel import rebase
from .errors import ConfigError, EmptyKernelError
from .semantics import ShadowMemory, ShadowRegFile, make_rng, step

logger = logging.getLogger(__name__)

UARCH_ROB_SIZES: Dict[str, int] = {
    "skylake": 224,
    "golden-cove": 512,
}

DEFAULT_SEEDS: Tuple[int, ...] = (1, 2, 3)

# Anything with a ``bytes(n)`` method works, see ``semantics.fresh_value``.
RngFactory = Callable[[int], Any]


@dataclass(frozen=True)
class DepConfig:
    rob_size: int = 224
    spurious_threshold: float = 0.80
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    synthetic_base_address: int = DEFAULT_BASE_ADDRESS

    def __post_init__(self) -> None:
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if self.rob_size < 1:
            raise ConfigError(f"rob_size must be >= 1, got {self.rob_size}")
        if not 0 < self.spurious_threshold <= 1:
            raise ConfigError(
                f"spurious_threshold must be in (0, 1], got {self.spurious_threshold}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        for seed in self.seeds:
            if not 0 <= seed < (1 << 64):
                raise ConfigError(f"seed out of range: {seed}")
        if not 0 <= self.synthetic_base_address < (1 << 64):
            raise ConfigError(f"base address out of range: {self.synthetic_base_address:#x}")

    @classmethod
    def for_uarch(cls, uarch: str, **overrides: Any) -> "DepConfig":
        """Config with the reorder-buffer size of a known microarchitecture."""
        try:
            rob_size = UARCH_ROB_SIZES[uarch]
        except KeyError:
            known = ", ".join(sorted(UARCH_ROB_SIZES))
            raise ConfigError(f"unknown microarchitecture '{uarch}' (known: {known})") from None
        overrides.setdefault("rob_size", rob_size)
        return cls(**overrides)


def unroll_count(kernel_len: int, rob_size: int) -> int:
    """Smallest n with n * kernel_len >= rob_size + kernel_len."""
    if kernel_len < 1:
        raise EmptyKernelError()
    return math.ceil(rob_size / kernel_len) + 1


def filter_spurious(hit_table: Mapping[DepKey, int], copies: int,
                    threshold: float) -> List[Dependency]:
    """Keep triplets hit in at least ``threshold`` of their eligible iterations.

    A triplet with iteration distance dk can occur in the ``copies - dk``
    reader copies that have a writer copy inside the unrolled kernel.
    """
    kept: List[Dependency] = []
    for (src, dst, delta_k), hits in sorted(hit_table.items()):
        eligible = copies - delta_k
        if eligible <= 0:
            raise ValueError(f"delta_k {delta_k} does not fit in {copies} copies")
        if hits + 1e-9 < threshold * eligible:
            logger.debug("spurious dependency %d->%d dk=%d: %d/%d",
                         src, dst, delta_k, hits, eligible)
            continue
        kept.append(Dependency(src, dst, delta_k, hits=hits, eligible=eligible))
    return kept


def _raw_dependencies(kernel: Kernel, copies: int, rob_size: int,
                      rng: Any) -> Tuple[Set[Tuple[int, int]], int]:
    n = len(kernel)
    regs, mem = ShadowRegFile(), ShadowMemory()
    raw: Set[Tuple[int, int]] = set()
    for k in range(copies):
        for instr in kernel:
            uid = k * n + instr.index
            regs, mem, events = step(regs, mem, instr, uid, rng)
            for load in events.loads:
                for writer in load.writers:
                    if uid - writer < rob_size:
                        raw.add((writer, uid))
    return raw, mem.dropped_stores


def reroll(raw: Set[Tuple[int, int]], kernel_len: int) -> Dict[DepKey, int]:
    """Count distinct (writer, reader) pairs per (src, dst, delta_k) key."""
    table: Dict[DepKey, int] = Counter()
    for writer, reader in raw:
        key = (writer % kernel_len, reader % kernel_len,
               reader // kernel_len - writer // kernel_len)
        table[key] += 1
    return table


def analyze(kernel: Kernel, cfg: DepConfig, seed: int,
            rng_factory: Optional[RngFactory] = None) -> DepReport:
    """Run the analysis once with a single seed."""
    if kernel.is_empty:
        raise EmptyKernelError()
    kernel = rebase(kernel, cfg.synthetic_base_address)
    copies = unroll_count(len(kernel), cfg.rob_size)
    rng = (rng_factory or make_rng)(seed)

    raw, dropped = _raw_dependencies(kernel, copies, cfg.rob_size, rng)
    deps = filter_spurious(reroll(raw, len(kernel)), copies, cfg.spurious_threshold)
    if dropped:
        logger.warning("%d store(s) with unknown address were dropped (seed %d)", dropped, seed)
    logger.debug(
        "seed %d: %d raw dependencies, %d kept over %d copies",
        seed, len(raw), len(deps), copies,
        extra={"seed": seed, "copies": copies, "kernel": kernel.digest[:12]},
    )
    return DepReport(
        kernel_sha256=kernel.digest,
        rob_size=cfg.rob_size,
        seeds=(seed,),
        copies=copies,
        dependencies=deps,
        dropped_bottom_stores=dropped,
    )


def analyze_amplified(kernel: Kernel, cfg: DepConfig,
                      rng_factory: Optional[RngFactory] = None) -> DepReport:
    """Intersect the dependencies found under every seed of ``cfg``.

    Hit counts and diagnostics come from the first seed.
    """
    reports = [analyze(kernel, cfg, seed, rng_factory) for seed in cfg.seeds]
    first = reports[0]
    common = set.intersection(*(report.keys() for report in reports))
    rejected = first.keys() - common
    if rejected:
        logger.debug("amplification removed %d dependencies", len(rejected))
    return DepReport(
        kernel_sha256=first.kernel_sha256,
        rob_size=cfg.rob_size,
        seeds=tuple(cfg.seeds),
        copies=first.copies,
        dependencies=[dep for dep in first.dependencies if dep.key in common],
        dropped_bottom_stores=first.dropped_bottom_stores,
    )
