"""Push-quality and item-cohesion metrics, plus brute-force baselines.

SNR is measured as matched/pushed per agent and averaged over agents that
received at least one push. MSRE is the mean squared deviation of an item's
file vectors from their centroid, averaged over items.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import Agent, EmptyGraph, InvalidArgument, Item, KnowledgeFile, NoData, UnitVector

ORACLE_MAX_FILES = 10


def agent_snr(a: Agent) -> Optional[float]:
    """Fraction of pushed files the agent matched, or None if nothing was pushed."""
    if not a.pushed_log:
        return None
    return sum(1 for _, m in a.pushed_log if m) / len(a.pushed_log)


def agent_odds(a: Agent) -> Optional[float]:
    """matched/unmatched ratio; ``math.inf`` flags an agent with no unmatched pushes."""
    if not a.pushed_log:
        return None
    matched = sum(1 for _, m in a.pushed_log if m)
    unmatched = len(a.pushed_log) - matched
    if unmatched == 0:
        return math.inf
    return matched / unmatched


@dataclass
class SnrReport:
    system: float
    per_agent: dict[int, float]
    odds: dict[int, float]
    counts: dict[int, tuple[int, int]]
    n_pushes: int

    @property
    def n_eligible(self) -> int:
        return len(self.per_agent)


def system_snr(agents: Iterable[Agent]) -> SnrReport:
    per, odds, counts = {}, {}, {}
    total = 0
    for a in agents:
        s = agent_snr(a)
        if s is None:
            continue
        per[a.agent_id] = s
        odds[a.agent_id] = agent_odds(a)
        matched = sum(1 for _, m in a.pushed_log if m)
        counts[a.agent_id] = (matched, len(a.pushed_log))
        total += len(a.pushed_log)
    if not per:
        raise NoData("no agent has received a push")
    return SnrReport(sum(per.values()) / len(per), per, odds, counts, total)


def _vectors(item: Item, files: Mapping[int, KnowledgeFile]) -> list[UnitVector]:
    out = []
    for fid in item.files:
        u = files[fid].units
        if u is None:
            raise InvalidArgument(f"file {fid} has no unit vector; MSRE is undefined")
        out.append(u)
    return out


def msre_exact(vectors: Sequence[UnitVector]) -> Fraction:
    """Exact MSRE of a group of 0-1 vectors.

    With ``c_j`` the number of vectors having unit ``j`` active, the value is
    ``(k * sum_i |f_i| - sum_j c_j**2) / k**2``.
    """
    k = len(vectors)
    if k == 0:
        raise InvalidArgument("MSRE of an empty group is undefined")
    counts: dict[int, int] = {}
    norms = 0
    for v in vectors:
        norms += v.norm2
        for j in v.indices:
            counts[j] = counts.get(j, 0) + 1
    return Fraction(k * norms - sum(c * c for c in counts.values()), k * k)


def item_msre(v: Item, files: Mapping[int, KnowledgeFile]) -> float:
    return float(msre_exact(_vectors(v, files)))


@dataclass
class MsreReport:
    system: float
    per_item: dict[int, float]
    k: dict[int, int]

    @property
    def l(self) -> int:
        return len(self.per_item)


def system_msre(items: Mapping[int, Item] | Iterable[Item], files: Mapping[int, KnowledgeFile]) -> MsreReport:
    seq = list(items.values()) if isinstance(items, Mapping) else list(items)
    if not seq:
        raise EmptyGraph("MSRE needs at least one item")
    per = {v.item_id: item_msre(v, files) for v in seq}
    return MsreReport(sum(per.values()) / len(per), per, {v.item_id: v.k for v in seq})


def partition_msre(blocks: Sequence[Sequence[UnitVector]]) -> Fraction:
    """Exact mean of per-block MSRE."""
    if not blocks:
        raise EmptyGraph("MSRE needs at least one block")
    return sum((msre_exact(b) for b in blocks), Fraction(0)) / len(blocks)


def set_partitions(n: int, max_blocks: Optional[int] = None):
    """Yield restricted growth strings of length n in lexicographic order.

    ``rgs[i]`` is the block label of element ``i``; labels appear in order of
    first use, so each set partition has exactly one encoding.
    """
    if n == 0:
        return
    cap = n if max_blocks is None else max_blocks
    rgs = [0] * n

    def rec(i: int, used: int):
        if i == n:
            yield tuple(rgs)
            return
        for b in range(min(used + 1, cap)):
            rgs[i] = b
            yield from rec(i + 1, max(used, b + 1))

    yield from rec(1, 1)


def oracle_min_msre(
    files: Sequence[KnowledgeFile], max_clusters: int
) -> tuple[list[list[int]], Fraction]:
    """Exhaustive minimum-MSRE partition of a handful of files.

    Returns blocks of file ids and the exact optimum. Among optimal partitions
    the one with the lexicographically smallest growth-string encoding wins.
    """
    n = len(files)
    if n > ORACLE_MAX_FILES:
        raise InvalidArgument(f"oracle refuses {n} files (limit {ORACLE_MAX_FILES})")
    if n == 0:
        raise InvalidArgument("oracle needs at least one file")
    if max_clusters < 1:
        raise InvalidArgument("max_clusters must be positive")
    vecs = []
    for f in files:
        if f.units is None:
            raise InvalidArgument(f"file {f.file_id} has no unit vector")
        vecs.append(f.units)

    # Every block's MSRE is a multiple of 1/k**2 with k <= 10, so scaling by
    # lcm(1..10)**2 makes block scores integers, and a further lcm(1..10)
    # makes the per-partition mean integral: comparisons stay exact.
    L = 2520
    block_cache: dict[int, int] = {}

    def block_score(bits: int) -> int:
        s = block_cache.get(bits)
        if s is None:
            grp = [vecs[i] for i in range(n) if bits >> i & 1]
            fr = msre_exact(grp) * (L * L)
            s = fr.numerator // fr.denominator
            block_cache[bits] = s
        return s

    best_score, best_rgs = None, None
    for rgs in set_partitions(n, max_clusters):
        nb = max(rgs) + 1
        masks = [0] * nb
        for i, b in enumerate(rgs):
            masks[b] |= 1 << i
        score = sum(block_score(m) for m in masks) * (L // nb)
        if best_score is None or score < best_score:
            best_score, best_rgs = score, rgs
    nb = max(best_rgs) + 1
    blocks = [[files[i].file_id for i in range(n) if best_rgs[i] == b] for b in range(nb)]
    return blocks, Fraction(best_score, L * L * L)


def random_partition(n: int, max_blocks: int, rng: np.random.Generator) -> list[list[int]]:
    """Assign ``n`` indices to at most ``max_blocks`` nonempty blocks uniformly at random."""
    labels = rng.integers(0, max_blocks, size=n)
    return [list(np.flatnonzero(labels == b)) for b in np.unique(labels)]


@dataclass
class BaselineEstimate:
    closed_form: float
    estimate: Optional[float]
    stderr: Optional[float]
    trials: int

    def agrees(self, n_sigma: float = 3.0) -> bool:
        if self.estimate is None:
            return True
        if self.stderr == 0:
            return self.estimate == self.closed_form
        return abs(self.estimate - self.closed_form) <= n_sigma * self.stderr


def closed_form_match_probability(m: int, p_file: float, p_agent: float) -> float:
    """P(f.a >= 1) for independent Bernoulli coordinates."""
    return 1.0 - (1.0 - p_file * p_agent) ** m


def random_baseline_snr(
    m: int, p_file: float, p_agent: float, trials: int, seed: int = 0,
    chunk: int = 50_000,
) -> BaselineEstimate:
    """Monte-Carlo match rate of random file/agent pairs alongside its closed form.

    Each trial draws one uniform per coordinate for the file and one for the
    agent, so estimates under the same seed are monotone in both densities.
    """
    for name, p in (("p_file", p_file), ("p_agent", p_agent)):
        if not 0.0 <= p <= 1.0:
            raise InvalidArgument(f"{name} must lie in [0, 1], got {p}")
    if trials < 0:
        raise InvalidArgument("trials must be non-negative")
    exact = closed_form_match_probability(m, p_file, p_agent)
    if trials == 0:
        return BaselineEstimate(exact, None, None, 0)
    hits = 0
    done = 0
    for c, ss in enumerate(np.random.SeedSequence(seed).spawn((trials + chunk - 1) // chunk)):
        size = min(chunk, trials - done)
        rng = np.random.default_rng(ss)
        uf = rng.random((size, m))
        ua = rng.random((size, m))
        hits += int(np.count_nonzero(((uf < p_file) & (ua < p_agent)).any(axis=1)))
        done += size
    p = hits / trials
    return BaselineEstimate(exact, p, math.sqrt(p * (1 - p) / trials), trials)


def empirical_pair_match_rate(
    agents: Sequence[Agent], files: Sequence[KnowledgeFile], trials: int, seed: int = 0,
) -> BaselineEstimate:
    """Match rate of uniformly random (agent, file) pairs from a concrete population.

    This is the SNR a purely random pusher would achieve on that population.
    The closed-form field holds the exact all-pairs rate.
    """
    a_masks = [a.interests.mask for a in agents]
    f_masks = [f.units.mask for f in files]
    matched_pairs = sum(1 for fm in f_masks for am in a_masks if fm & am)
    exact = matched_pairs / (len(a_masks) * len(f_masks))
    if trials == 0:
        return BaselineEstimate(exact, None, None, 0)
    rng = np.random.default_rng(seed)
    ai = rng.integers(0, len(a_masks), size=trials)
    fi = rng.integers(0, len(f_masks), size=trials)
    hits = sum(1 for x, y in zip(ai, fi) if a_masks[x] & f_masks[y])
    p = hits / trials
    return BaselineEstimate(exact, p, math.sqrt(p * (1 - p) / trials), trials)
