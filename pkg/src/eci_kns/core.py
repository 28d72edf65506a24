"""Domain types shared by the simulator: unit universe, vectors, files, agents, items."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence


class EciError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(EciError, ValueError):
    pass


class InvalidState(EciError, RuntimeError):
    pass


class EmptyPopulation(InvalidState):
    pass


class NoData(EciError):
    """Raised when a metric has nothing to average over."""


class EmptyGraph(EciError):
    pass


@dataclass(frozen=True)
class UnitUniverse:
    """The fixed set of ``m`` knowledge units every vector is indexed against."""

    m: int

    def __post_init__(self):
        if not isinstance(self.m, int) or isinstance(self.m, bool) or self.m < 1:
            raise InvalidArgument(f"universe needs at least one unit, got m={self.m!r}")


def new_universe(m: int) -> UnitUniverse:
    return UnitUniverse(m)


class UnitVector:
    """Sparse 0-1 vector over a unit universe.

    Active indices are kept sorted and duplicate-free, and mirrored into an
    integer bitmask so inner products reduce to ``popcount(a & b)``.
    """

    __slots__ = ("m", "indices", "mask")

    def __init__(self, m: int, active: Iterable[int] = ()):
        idx = sorted(set(int(i) for i in active))
        if idx and (idx[0] < 0 or idx[-1] >= m):
            raise InvalidArgument(f"active indices must lie in [0, {m}), got {idx}")
        self.m = m
        self.indices: tuple[int, ...] = tuple(idx)
        mask = 0
        for i in idx:
            mask |= 1 << i
        self.mask = mask

    @classmethod
    def from_dense(cls, bits: Sequence[int]) -> "UnitVector":
        return cls(len(bits), (i for i, b in enumerate(bits) if b))

    def to_dense(self) -> list[int]:
        return [(self.mask >> i) & 1 for i in range(self.m)]

    @property
    def norm2(self) -> int:
        """Squared euclidean norm, i.e. the number of active units."""
        return len(self.indices)

    def dot(self, other: "UnitVector") -> int:
        if other.m != self.m:
            raise InvalidArgument(f"dimension mismatch: {self.m} vs {other.m}")
        return (self.mask & other.mask).bit_count()

    def __len__(self) -> int:
        return self.m

    def __eq__(self, other) -> bool:
        if not isinstance(other, UnitVector):
            return NotImplemented
        return self.m == other.m and self.mask == other.mask

    def __hash__(self) -> int:
        return hash((self.m, self.mask))

    def __repr__(self) -> str:
        return f"UnitVector(m={self.m}, active={list(self.indices)})"


def make_vector(universe: UnitUniverse, active: Iterable[int]) -> UnitVector:
    return UnitVector(universe.m, active)


@dataclass(frozen=True)
class KnowledgeFile:
    file_id: int
    units: Optional[UnitVector]
    poster: Optional[int] = None
    arrival_index: int = 0


@dataclass
class Agent:
    agent_id: int
    interests: UnitVector
    pushed_log: list[tuple[int, bool]] = field(default_factory=list)
    memberships: set[int] = field(default_factory=set)
    _pushed: set[int] = field(default_factory=set, repr=False, compare=False)
    _matched: set[int] = field(default_factory=set, repr=False, compare=False)

    def record_push(self, file_id: int, matched: bool) -> None:
        if file_id in self._pushed:
            raise InvalidState(f"file {file_id} already pushed to agent {self.agent_id}")
        self._pushed.add(file_id)
        self.pushed_log.append((file_id, matched))
        if matched:
            self._matched.add(file_id)

    def was_pushed(self, file_id: int) -> bool:
        return file_id in self._pushed

    @property
    def matched_files(self) -> set[int]:
        return self._matched

    @property
    def n_pushed(self) -> int:
        return len(self.pushed_log)

    @property
    def n_matched(self) -> int:
        return len(self._matched)


@dataclass
class Item:
    """A graph node: a file set voted together plus the agents grouped around it."""

    item_id: int
    founding_file: int
    files: list[int] = field(default_factory=list)
    agents: set[int] = field(default_factory=set)
    _file_set: set[int] = field(default_factory=set, repr=False, compare=False)

    def __post_init__(self):
        if not self.files:
            self.files = [self.founding_file]
        self._file_set = set(self.files)
        if self.founding_file not in self._file_set:
            raise InvalidArgument("founding file must belong to the item")

    def add_file(self, file_id: int) -> bool:
        if file_id in self._file_set:
            return False
        self.files.append(file_id)
        self._file_set.add(file_id)
        return True

    @property
    def file_set(self) -> set[int]:
        return self._file_set

    @property
    def k(self) -> int:
        return len(self.files)

    @property
    def n(self) -> int:
        return len(self.agents)


class AgentResponder(Protocol):
    def respond(self, agent: Agent, file: KnowledgeFile) -> bool: ...


class IdCounter:
    """Sequential id source; one per entity kind per run."""

    def __init__(self, start: int = 0):
        self.next_id = start

    def __call__(self) -> int:
        i = self.next_id
        self.next_id += 1
        return i
