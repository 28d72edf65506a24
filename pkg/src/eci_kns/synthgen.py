"""Reproducible synthetic agent populations and file streams."""

from __future__ import annotations

import logging
from dataclasses import dataclass, asdict
from functools import lru_cache
from typing import Iterable, TextIO

import numpy as np

from .core import Agent, InvalidArgument, KnowledgeFile, UnitUniverse, UnitVector

log = logging.getLogger(__name__)

# reference population size and mean norms
REF_M = 54
REF_N_AGENTS = 1000
REF_N_FILES = 953
REF_AGENT_NORM = 1.543
REF_FILE_NORM = 3.178

MAX_RESAMPLE = 100

# spawn-key stream labels
_AGENTS, _FILES = 1, 2


@dataclass(frozen=True)
class PopulationSpec:
    m: int = REF_M
    n_agents: int = REF_N_AGENTS
    n_files: int = REF_N_FILES
    p_agent: float = REF_AGENT_NORM / REF_M
    p_file: float = REF_FILE_NORM / REF_M
    structure: str = "independent"
    k_clusters: int = 6
    intra_boost: float = 1e4
    seed: int = 0

    def validate(self) -> None:
        if self.m < 1:
            raise InvalidArgument(f"m must be positive, got {self.m}")
        if self.n_agents < 1 or self.n_files < 1:
            raise InvalidArgument("n_agents and n_files must be positive")
        for name in ("p_agent", "p_file"):
            p = getattr(self, name)
            if not 0.0 < p <= 1.0:
                raise InvalidArgument(f"{name} must lie in (0, 1], got {p}")
        if self.structure not in ("independent", "clustered"):
            raise InvalidArgument(f"unknown structure {self.structure!r}")
        if self.structure == "clustered":
            if not 1 <= self.k_clusters <= self.m:
                raise InvalidArgument(f"k_clusters must lie in [1, m], got {self.k_clusters}")
            if self.intra_boost < 1.0:
                raise InvalidArgument("intra_boost must be >= 1")
            for name in ("p_agent", "p_file"):
                for block in block_bounds(self.m, self.k_clusters):
                    block_rates(self.m, block, getattr(self, name), self.intra_boost)

    def to_dict(self) -> dict:
        return asdict(self)


def block_bounds(m: int, k: int) -> list[tuple[int, int]]:
    """Split ``range(m)`` into ``k`` contiguous blocks of near-equal size."""
    edges = [round(i * m / k) for i in range(k + 1)]
    return list(zip(edges[:-1], edges[1:]))


def block_rates(m: int, block: tuple[int, int], p: float, boost: float) -> tuple[float, float]:
    """Per-coordinate rates (inside home block, outside) with expected norm ``m * p``.

    Inside rate is ``boost`` times the outside rate, clamped at 1 with the
    excess pushed outside.
    """
    s = block[1] - block[0]
    target = m * p
    if s == m:
        return p, 0.0
    q_out = target / (s * boost + m - s)
    q_in = boost * q_out
    if q_in > 1.0:
        q_in = 1.0
        q_out = (target - s) / (m - s)
    if q_out > 1.0 or q_out < 0.0:
        raise InvalidArgument(f"expected norm {target:.3f} unachievable with m={m}")
    return q_in, q_out


def _rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def _draw(rng: np.random.Generator, probs: np.ndarray, what: str) -> UnitVector:
    m = len(probs)
    for _ in range(MAX_RESAMPLE + 1):
        bits = np.flatnonzero(rng.random(m) < probs)
        if len(bits):
            return UnitVector(m, bits.tolist())
    log.warning("%s came out all-zero after %d retries; keeping it", what, MAX_RESAMPLE)
    return UnitVector(m, ())


def _rates(m: int, block: tuple[int, int], target: float, boost: float) -> np.ndarray:
    q_in, q_out = block_rates(m, block, target / m, boost)
    probs = np.full(m, q_out)
    probs[block[0]:block[1]] = q_in
    return probs


@lru_cache(maxsize=256)
def calibrated_rates(m: int, block: tuple[int, int], p: float, boost: float) -> tuple[float, ...]:
    """Raw Bernoulli rates whose zero-truncated law has mean norm ``m * p``.

    All-zero draws are rejected, which conditions on a nonzero vector and
    would inflate the mean norm; the raw target is lowered to compensate.
    Targets below one unit cannot be met without zero vectors and are used
    unchanged.
    """
    target = m * p
    if target <= 1.0:
        return tuple(_rates(m, block, target, boost))

    def truncated_mean(t: float) -> float:
        probs = _rates(m, block, t, boost)
        p0 = float(np.prod(1.0 - probs))
        return t / (1.0 - p0) if p0 < 1.0 else 1.0

    lo, hi = 1e-9, target
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if truncated_mean(mid) < target:
            lo = mid
        else:
            hi = mid
    return tuple(_rates(m, block, hi, boost))


def _probs(spec: PopulationSpec, p: float, rng: np.random.Generator) -> np.ndarray:
    block = (0, spec.m)
    if spec.structure == "clustered":
        blocks = block_bounds(spec.m, spec.k_clusters)
        block = blocks[int(rng.integers(len(blocks)))]
        boost = spec.intra_boost
    else:
        boost = 1.0
    return np.array(calibrated_rates(spec.m, block, p, boost))


def generate_agents(spec: PopulationSpec, n: int | None = None) -> list[Agent]:
    spec.validate()
    out = []
    for i in range(spec.n_agents if n is None else n):
        rng = _rng(spec.seed, _AGENTS, i)
        out.append(Agent(i, _draw(rng, _probs(spec, spec.p_agent, rng), f"agent {i}")))
    return out


def generate_files(spec: PopulationSpec, n: int | None = None) -> list[KnowledgeFile]:
    spec.validate()
    out = []
    for i in range(spec.n_files if n is None else n):
        rng = _rng(spec.seed, _FILES, i)
        units = _draw(rng, _probs(spec, spec.p_file, rng), f"file {i}")
        out.append(KnowledgeFile(file_id=i, units=units, poster=None, arrival_index=i))
    return out


def generate(spec: PopulationSpec) -> tuple[list[Agent], list[KnowledgeFile]]:
    """Agents and the file stream for ``spec``.

    Every vector draws from its own substream keyed by (seed, kind, index),
    so a longer population extends a shorter one with the same seed.
    """
    return generate_agents(spec), generate_files(spec)


def universe_of(spec: PopulationSpec) -> UnitUniverse:
    return UnitUniverse(spec.m)


def write_population(out: TextIO, m: int, agents: Iterable[Agent], files: Iterable[KnowledgeFile]) -> None:
    out.write(f"# m={m}\n")
    for a in agents:
        out.write(f"agent\t{a.agent_id}\t{','.join(map(str, a.interests.indices))}\n")
    for f in files:
        out.write(f"file\t{f.file_id}\t{','.join(map(str, f.units.indices))}\n")


def read_population(src: TextIO, m: int | None = None) -> tuple[int, list[Agent], list[KnowledgeFile]]:
    """Parse the tab-separated population format written by :func:`write_population`.

    Without a ``# m=`` header and without ``m`` the dimension is inferred as
    one past the largest active index.
    """
    rows = []
    for lineno, line in enumerate(src, 1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key.strip() == "m" and m is None:
                m = int(val)
            continue
        parts = line.split("\t")
        if len(parts) != 3 or parts[0] not in ("agent", "file"):
            raise InvalidArgument(f"line {lineno}: expected 'agent|file<TAB>id<TAB>indices'")
        try:
            idx = [int(x) for x in parts[2].split(",") if x.strip()]
            rows.append((parts[0], int(parts[1]), idx))
        except ValueError as exc:
            raise InvalidArgument(f"line {lineno}: {exc}") from None
    if m is None:
        m = 1 + max((i for _, _, idx in rows for i in idx), default=0)
    agents, files = [], []
    for kind, ident, idx in rows:
        v = UnitVector(m, idx)
        if kind == "agent":
            agents.append(Agent(ident, v))
        else:
            files.append(KnowledgeFile(ident, v, None, len(files)))
    return m, agents, files
