"""Match predicate and match degree between agents and files."""

from __future__ import annotations

from typing import NamedTuple

from .core import Agent, InvalidArgument, KnowledgeFile, UnitVector


class MatchResult(NamedTuple):
    matched: bool
    degree: int


def _units(f: KnowledgeFile) -> UnitVector:
    if f.units is None:
        raise InvalidArgument(f"file {f.file_id} carries no unit vector")
    return f.units


def match_vectors(x: UnitVector, y: UnitVector) -> MatchResult:
    """Shared-unit count of two vectors; matched iff at least one unit is shared."""
    if x.m != y.m:
        raise InvalidArgument(f"dimension mismatch: {x.m} vs {y.m}")
    d = (x.mask & y.mask).bit_count()
    return MatchResult(d > 0, d)


def match_agent_file(a: Agent, f: KnowledgeFile) -> MatchResult:
    return match_vectors(a.interests, _units(f))


def match_file_file(f1: KnowledgeFile, f2: KnowledgeFile) -> MatchResult:
    return match_vectors(_units(f1), _units(f2))


class SyntheticResponder:
    """Agent that matches a file iff their unit vectors overlap."""

    def respond(self, agent: Agent, file: KnowledgeFile) -> bool:
        return (agent.interests.mask & _units(file).mask) != 0
