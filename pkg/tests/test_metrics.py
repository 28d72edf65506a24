from fractions import Fraction
import itertools
import math

import numpy as np
import pytest

from eci_kns.core import Agent, EmptyGraph, InvalidArgument, Item, KnowledgeFile, NoData, UnitVector
from eci_kns.metrics import (
    agent_odds,
    agent_snr,
    closed_form_match_probability,
    item_msre,
    msre_exact,
    oracle_min_msre,
    partition_msre,
    random_baseline_snr,
    random_partition,
    set_partitions,
    system_msre,
    system_snr,
)

M = 54
P_FILE = 3.178 / M
P_AGENT = 1.543 / M


def agent_with(outcomes, aid=0):
    a = Agent(aid, UnitVector(3, [0]))
    for fid, m in enumerate(outcomes):
        a.record_push(fid, m)
    return a


def files_from(dense_rows):
    return {i: KnowledgeFile(i, UnitVector.from_dense(r)) for i, r in enumerate(dense_rows)}


def direct_msre(dense_rows):
    x = np.asarray(dense_rows, dtype=float)
    mean = x.mean(axis=0)
    return float(np.mean([(r - mean) @ (r - mean) for r in x]))


@pytest.mark.parametrize("outcomes, expected", [
    ([True, True, True, False], 0.75),
    ([True, True], 1.0),
    ([False, False, False], 0.0),
])
def test_agent_snr(outcomes, expected):
    assert agent_snr(agent_with(outcomes)) == expected


def test_agent_without_pushes_is_excluded():
    idle = Agent(9, UnitVector(3, [1]))
    assert agent_snr(idle) is None
    rep = system_snr([agent_with([True, True]), agent_with([True, False], 1), idle])
    assert rep.system == 0.75
    assert rep.n_eligible == 2 and 9 not in rep.per_agent
    assert system_snr([agent_with([True, False, False])]).system == pytest.approx(1 / 3)
    with pytest.raises(NoData):
        system_snr([idle])


def test_odds_form():
    assert agent_odds(agent_with([True, True, False])) == 2.0
    assert agent_odds(agent_with([True])) == math.inf
    rng = np.random.default_rng(0)
    for _ in range(200):
        out = list(rng.random(rng.integers(1, 20)) < 0.4)
        a = agent_with(out)
        if sum(out) < len(out):
            odds = Fraction(sum(out), len(out) - sum(out))
            assert odds / (1 + odds) == Fraction(sum(out), len(out))
            assert agent_odds(a) / (1 + agent_odds(a)) == pytest.approx(agent_snr(a), abs=1e-15)


def test_item_msre_examples():
    files = files_from([[1, 0, 1, 0], [1, 0, 1, 0], [0, 1, 1, 0], [1, 0, 0, 1]])
    assert item_msre(Item(0, 0), files) == 0.0
    assert item_msre(Item(1, 0, files=[0, 1]), files) == 0.0
    # files 0 and 2 differ in exactly two coordinates
    assert direct_msre([[1, 0, 1, 0], [0, 1, 1, 0]]) == 0.5
    assert item_msre(Item(2, 0, files=[0, 2]), files) == 0.5


def test_item_msre_needs_vectors():
    files = {0: KnowledgeFile(0, None)}
    with pytest.raises(InvalidArgument):
        item_msre(Item(0, 0), files)


def test_msre_formula_agreement_random():
    rng = np.random.default_rng(11)
    for _ in range(300):
        k, m = int(rng.integers(1, 12)), int(rng.integers(1, 20))
        rows = (rng.random((k, m)) < rng.random()).astype(int)
        vecs = [UnitVector.from_dense(r) for r in rows]
        exact = msre_exact(vecs)
        x = rows.astype(float)
        identity = float((x * x).sum(axis=1).mean() - x.mean(axis=0) @ x.mean(axis=0))
        assert abs(float(exact) - direct_msre(rows)) <= 1e-12
        assert abs(float(exact) - identity) <= 1e-12
        assert exact >= 0


def test_system_msre():
    files = files_from([[1, 0], [0, 1], [1, 1]])
    singles = {i: Item(i, i) for i in range(3)}
    assert system_msre(singles, files).system == 0.0
    items = {0: Item(0, 0, files=[0, 1]), 1: Item(1, 2)}
    rep = system_msre(items, files)
    assert rep.per_item == {0: 0.5, 1: 0.0}
    assert rep.system == 0.25 and rep.l == 2 and rep.k == {0: 2, 1: 1}
    with pytest.raises(EmptyGraph):
        system_msre({}, files)


def brute_partitions(n, max_blocks):
    """All set partitions via label assignment, canonicalised to first-use order."""
    seen = set()
    for labels in itertools.product(range(max_blocks), repeat=n):
        relabel, out = {}, []
        for lab in labels:
            relabel.setdefault(lab, len(relabel))
            out.append(relabel[lab])
        seen.add(tuple(out))
    return sorted(seen)


@pytest.mark.parametrize("n, k", [(1, 1), (3, 2), (4, 4), (5, 3), (6, 2), (6, 6)])
def test_set_partitions_complete(n, k):
    got = list(set_partitions(n, k))
    assert got == sorted(got)
    assert got == brute_partitions(n, k)


def test_bell_numbers():
    assert [sum(1 for _ in set_partitions(n)) for n in range(1, 11)] == [
        1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975]


def _kfiles(rows):
    return [KnowledgeFile(i, UnitVector.from_dense(r)) for i, r in enumerate(rows)]


def test_oracle_small_examples():
    files = _kfiles([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1]])
    blocks, best = oracle_min_msre(files, 2)
    assert blocks == [[0, 1], [2]] and best == 0
    blocks, best = oracle_min_msre(files[:1], 3)
    assert blocks == [[0]] and best == 0
    with pytest.raises(InvalidArgument):
        oracle_min_msre(_kfiles([[1]] * 11), 2)


PLANTED = [
    [1, 1, 0, 0, 0, 0, 0, 0],
    [1, 1, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 1, 0],
    [0, 0, 0, 0, 0, 1, 1, 0],
    [0, 0, 0, 0, 0, 1, 1, 1],
]


def brute_min_msre(rows, max_blocks):
    vecs = [UnitVector.from_dense(r) for r in rows]
    best = None
    for labels in brute_partitions(len(rows), max_blocks):
        groups = {}
        for i, b in enumerate(labels):
            groups.setdefault(b, []).append(rows[i])
        value = Fraction(sum(Fraction(direct_msre(g)).limit_denominator(10_000) for g in groups.values()),
                         len(groups))
        if best is None or value < best[0]:
            best = (value, labels)
    return best


def test_oracle_recovers_planted_partition():
    blocks, best = oracle_min_msre(_kfiles(PLANTED), 2)
    assert blocks == [[0, 1, 2], [3, 4, 5]]
    # each block: counts (3, 3, 1), norms 7, k = 3 -> (21 - 19) / 9
    assert best == Fraction(2, 9)
    value, labels = brute_min_msre(PLANTED, 2)
    assert value == best and labels == (0, 0, 0, 1, 1, 1)


@pytest.mark.parametrize("seed", range(6))
def test_oracle_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n, k = int(rng.integers(1, 7)), int(rng.integers(1, 4))
    rows = (rng.random((n, 6)) < 0.4).astype(int).tolist()
    blocks, best = oracle_min_msre(_kfiles(rows), k)
    value, labels = brute_min_msre(rows, k)
    assert best == value
    recomputed = partition_msre([[UnitVector.from_dense(rows[i]) for i in b] for b in blocks])
    assert recomputed == best


def test_oracle_dominates_random_partitions():
    rng = np.random.default_rng(42)
    rows = (rng.random((8, 10)) < 0.35).astype(int).tolist()
    vecs = [UnitVector.from_dense(r) for r in rows]
    _, best = oracle_min_msre(_kfiles(rows), 3)
    for _ in range(100):
        part = random_partition(8, 3, rng)
        assert best <= partition_msre([[vecs[i] for i in b] for b in part])


def test_closed_form_reference_densities():
    value = closed_form_match_probability(M, P_FILE, P_AGENT)
    assert value == 1 - (1 - P_FILE * P_AGENT) ** 54
    assert abs(value - 0.0870) < 5e-4
    assert abs(value - 0.0883) <= 0.015


def test_monte_carlo_baseline():
    est = random_baseline_snr(M, P_FILE, P_AGENT, 100_000, seed=1)
    assert est.agrees(3.0)
    assert abs(est.estimate - 0.0883) <= 0.015
    assert random_baseline_snr(M, P_FILE, P_AGENT, 1000, seed=1) == random_baseline_snr(M, P_FILE, P_AGENT, 1000, seed=1)


def test_baseline_edges():
    full = random_baseline_snr(M, 1.0, 1.0, 500)
    assert full.closed_form == 1.0 and full.estimate == 1.0
    tiny = random_baseline_snr(M, 1e-9, 0.5, 500)
    assert tiny.closed_form < 1e-7 and tiny.estimate == 0.0
    only = random_baseline_snr(M, P_FILE, P_AGENT, 0)
    assert only.estimate is None and only.stderr is None
    with pytest.raises(InvalidArgument):
        random_baseline_snr(M, 1.5, 0.5, 10)


def test_baseline_monotone_on_grid():
    grid = [0.01, 0.03, 0.06, 0.1, 0.2]
    for pa in grid:
        cf = [closed_form_match_probability(M, pf, pa) for pf in grid]
        mc = [random_baseline_snr(M, pf, pa, 2000, seed=7).estimate for pf in grid]
        assert cf == sorted(cf) and mc == sorted(mc)
    for pf in grid:
        mc = [random_baseline_snr(M, pf, pa, 2000, seed=7).estimate for pa in grid]
        assert mc == sorted(mc)
