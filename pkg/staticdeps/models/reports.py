"""
Result models: static dependency reports, dynamic traces and coverage.
"""
import json
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterator, List, Optional, Set, Tuple

DepKey = Tuple[int, int, int]


@dataclass(frozen=True, order=True)
class Dependency:
    """A re-rolled read-after-write memory dependency.

    ``src`` writes, ``dst`` reads ``delta_k`` iterations later. Ordering and
    equality use the (src, dst, delta_k) key only.
    """
    src: int
    dst: int
    delta_k: int
    hits: int = field(default=0, compare=False)
    eligible: int = field(default=0, compare=False)

    @property
    def key(self) -> DepKey:
        return (self.src, self.dst, self.delta_k)

    @property
    def hit_ratio(self) -> float:
        return self.hits / self.eligible if self.eligible else 0.0

    def to_dict(self) -> Dict[str, int]:
        return {
            "src": self.src,
            "dst": self.dst,
            "dk": self.delta_k,
            "hits": self.hits,
            "eligible": self.eligible,
        }


@dataclass
class DepReport:
    """Output of the static analysis for one kernel."""
    kernel_sha256: str
    rob_size: int
    seeds: Tuple[int, ...]
    copies: int
    dependencies: List[Dependency] = field(default_factory=list)
    dropped_bottom_stores: int = 0

    def __post_init__(self) -> None:
        self.dependencies = sorted(self.dependencies)

    def keys(self) -> Set[DepKey]:
        return {dep.key for dep in self.dependencies}

    def pairs(self) -> Set[Tuple[int, int]]:
        """(src, dst) projection, dropping delta_k."""
        return {(dep.src, dep.dst) for dep in self.dependencies}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kernel_sha256": self.kernel_sha256,
            "rob_size": self.rob_size,
            "seeds": list(self.seeds),
            "copies": self.copies,
            "deps": [dep.to_dict() for dep in self.dependencies],
            "dropped_bottom_stores": self.dropped_bottom_stores,
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


@dataclass(frozen=True, order=True)
class DynDependency:
    """A dynamic (src, dst) dependency and its occurrence count rho."""
    src: int
    dst: int
    rho: int = field(default=1, compare=False)
    example: Tuple[int, int] = field(default=(0, 0), compare=False)
    delta_ks: FrozenSet[int] = field(default=frozenset(), compare=False)

    @property
    def pair(self) -> Tuple[int, int]:
        return (self.src, self.dst)

    def to_dict(self) -> Dict[str, int]:
        return {"src": self.src, "dst": self.dst, "rho": self.rho}


@dataclass
class DynamicTrace:
    """Output of one oracle run."""
    iterations: int
    reg_init: str
    dependencies: List[DynDependency] = field(default_factory=list)
    suspicious_addresses: int = 0
    executed: int = 0
    lifetime: Optional[int] = None

    def __post_init__(self) -> None:
        self.dependencies = sorted(self.dependencies)

    def __len__(self) -> int:
        return len(self.dependencies)

    def __iter__(self) -> Iterator[DynDependency]:
        return iter(self.dependencies)

    def pairs(self) -> Set[Tuple[int, int]]:
        return {dep.pair for dep in self.dependencies}

    def triplets(self) -> Set[DepKey]:
        """(src, dst, delta_k) keys, one per observed iteration distance."""
        return {(dep.src, dep.dst, dk) for dep in self.dependencies for dk in dep.delta_ks}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iterations": self.iterations,
            "reg_init": self.reg_init,
            "deps": [dep.to_dict() for dep in self.dependencies],
            "suspicious_addresses": self.suspicious_addresses,
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


@dataclass
class CoverageReport:
    """How many dynamic dependencies the static report found."""
    found: int
    missed: int
    found_weight: int
    missed_weight: int
    classification: List[Tuple[DynDependency, bool]] = field(default_factory=list)
    label: str = ""

    @property
    def cov_u(self) -> float:
        total = self.found + self.missed
        return self.found / total if total else 0.0

    @property
    def cov_w(self) -> float:
        total = self.found_weight + self.missed_weight
        return self.found_weight / total if total else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "found": self.found,
            "missed": self.missed,
            "cov_u": round(100 * self.cov_u, 1),
            "cov_w": round(100 * self.cov_w, 1),
            "deps": [
                dict(dep.to_dict(), found=found) for dep, found in self.classification
            ],
        }
