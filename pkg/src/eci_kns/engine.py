"""Single-writer simulation of the file lifecycle.

A posted file is pushed to a random sample of agents, then spreads round by
round inside every item it activates. A round pushes the file to a fraction
of the item's not-yet-reached members and the spread continues only while
the share of matching recipients stays at or above the voting threshold.
Once all spreads end the file may join the items it fully passed, may found
a new item, and agents that matched it may join items holding it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .core import (
    Agent,
    AgentResponder,
    EmptyPopulation,
    IdCounter,
    InvalidArgument,
    InvalidState,
    Item,
    KnowledgeFile,
    UnitUniverse,
)
from .graph import DEFAULT_T_E, KnsGraph, refresh_edges
from .matching import SyntheticResponder, match_file_file

# spawn-key stream labels; population streams live in synthgen
_INITIAL, _ROUNDS = 11, 12


@dataclass(frozen=True)
class EngineConfig:
    n_init: int = 20
    t_new: int = 3
    t_vote: float = 0.5
    rho: float = 0.3
    max_rounds: int = 5
    t_add: int = 1
    k_act: int = 1
    t_join: int = 1
    edge_propagation: bool = False
    rng_seed: int = 0

    def validate(self) -> None:
        for name in ("n_init", "t_new", "max_rounds", "k_act", "t_join"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise InvalidArgument(f"{name} must be a positive integer, got {v!r}")
        if not isinstance(self.t_add, int) or isinstance(self.t_add, bool) or self.t_add < 0:
            raise InvalidArgument(f"t_add must be a non-negative integer, got {self.t_add!r}")
        if not 0.0 <= self.t_vote <= 1.0:
            raise InvalidArgument(f"t_vote must lie in [0, 1], got {self.t_vote}")
        if not 0.0 < self.rho <= 1.0:
            raise InvalidArgument(f"rho must lie in (0, 1], got {self.rho}")
        if not isinstance(self.edge_propagation, bool):
            raise InvalidArgument("edge_propagation must be a boolean")
        if not isinstance(self.rng_seed, int) or not 0 <= self.rng_seed < 2**64:
            raise InvalidArgument(f"rng_seed must be an unsigned 64-bit integer, got {self.rng_seed!r}")


class Phase(IntEnum):
    ARRIVED = 0
    INITIAL_SPREAD_DONE = 1
    SPREADING = 2
    SETTLED = 3


class Event(NamedTuple):
    kind: str
    file_id: int
    item_id: Optional[int] = None
    agent_id: Optional[int] = None
    round: Optional[int] = None
    matched: Optional[bool] = None

    def format(self) -> str:
        def cell(v):
            if v is None:
                return "-"
            if isinstance(v, bool):
                return "1" if v else "0"
            return str(v)

        return ",".join(cell(v) for v in self)

    @classmethod
    def parse(cls, line: str) -> "Event":
        parts = line.strip().split(",")
        if len(parts) != 6:
            raise InvalidArgument(f"malformed event record: {line!r}")

        def num(v):
            return None if v == "-" else int(v)

        m = None if parts[5] == "-" else parts[5] == "1"
        return cls(parts[0], int(parts[1]), num(parts[2]), num(parts[3]), num(parts[4]), m)


# event kinds
POST, PUSH, VOTE, ADD, NEW_ITEM, JOIN = "post", "push", "vote", "add", "new_item", "join"


@dataclass
class ItemSpread:
    pool: set[int]
    rounds_completed: int = 0
    passed: bool = True
    terminated: bool = False


class RoundOutcome(NamedTuple):
    passed: bool
    pushed: int
    matched: int


@dataclass
class FileLifecycle:
    file_id: int
    phase: Phase = Phase.ARRIVED
    spreads: dict[int, ItemSpread] = field(default_factory=dict)
    matched_agents: set[int] = field(default_factory=set)
    pushed_agents: set[int] = field(default_factory=set)
    created_item: Optional[int] = None
    added_items: list[int] = field(default_factory=list)
    round_rng: Optional[np.random.Generator] = field(default=None, repr=False)


@dataclass
class SimulationState:
    universe: UnitUniverse
    agents: dict[int, Agent] = field(default_factory=dict)
    files: dict[int, KnowledgeFile] = field(default_factory=dict)
    items: dict[int, Item] = field(default_factory=dict)
    graph: KnsGraph = field(default_factory=KnsGraph)
    events: list[Event] = field(default_factory=list)
    seed: int = 0
    responder: AgentResponder = field(default_factory=SyntheticResponder, repr=False)
    item_ids: IdCounter = field(default_factory=IdCounter, repr=False)
    last_arrival: int = -1

    @classmethod
    def create(cls, universe: UnitUniverse, agents: Iterable[Agent], t_e: float = DEFAULT_T_E,
               seed: int = 0, responder: Optional[AgentResponder] = None) -> "SimulationState":
        st = cls(universe, graph=KnsGraph(t_e=t_e), seed=seed)
        if responder is not None:
            st.responder = responder
        for a in agents:
            if a.interests.m != universe.m:
                raise InvalidArgument(f"agent {a.agent_id} has dimension {a.interests.m}, expected {universe.m}")
            if a.agent_id in st.agents:
                raise InvalidArgument(f"duplicate agent id {a.agent_id}")
            st.agents[a.agent_id] = a
        return st


def _substream(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def _sample(rng: np.random.Generator, pool: Iterable[int], k: int) -> list[int]:
    ordered = sorted(pool)
    if k >= len(ordered):
        return ordered
    picks = rng.choice(len(ordered), size=k, replace=False)
    return [ordered[i] for i in picks]


def _push(state: SimulationState, lc: FileLifecycle, agent_id: int,
          item_id: Optional[int] = None, rnd: Optional[int] = None) -> bool:
    if agent_id in lc.pushed_agents:
        raise InvalidState(f"agent {agent_id} already received file {lc.file_id}")
    agent = state.agents[agent_id]
    matched = bool(state.responder.respond(agent, state.files[lc.file_id]))
    agent.record_push(lc.file_id, matched)
    lc.pushed_agents.add(agent_id)
    if matched:
        lc.matched_agents.add(agent_id)
    state.events.append(Event(PUSH, lc.file_id, item_id, agent_id, rnd, matched))
    return matched


def post_file(state: SimulationState, f: KnowledgeFile, cfg: EngineConfig) -> FileLifecycle:
    if f.file_id in state.files:
        raise InvalidArgument(f"duplicate file id {f.file_id}")
    if f.units is not None and f.units.m != state.universe.m:
        raise InvalidArgument(f"file {f.file_id} has dimension {f.units.m}, expected {state.universe.m}")
    if f.arrival_index <= state.last_arrival:
        raise InvalidArgument(f"arrival index {f.arrival_index} is not after {state.last_arrival}")
    state.files[f.file_id] = f
    state.last_arrival = f.arrival_index
    state.events.append(Event(POST, f.file_id))
    return FileLifecycle(f.file_id, round_rng=_substream(state.seed, _ROUNDS, f.arrival_index))


def initial_spread(state: SimulationState, lc: FileLifecycle, cfg: EngineConfig) -> FileLifecycle:
    """Push the file to ``n_init`` agents drawn uniformly without replacement."""
    if lc.phase != Phase.ARRIVED:
        raise InvalidState(f"initial spread of file {lc.file_id} already happened")
    if not state.agents:
        raise EmptyPopulation("no agents to spread to")
    f = state.files[lc.file_id]
    rng = _substream(state.seed, _INITIAL, f.arrival_index)
    eligible = [a for a in state.agents if a != f.poster]
    for a in _sample(rng, eligible, cfg.n_init):
        _push(state, lc, a)
    lc.phase = Phase.INITIAL_SPREAD_DONE
    return lc


def activate_items(state: SimulationState, lc: FileLifecycle, cfg: EngineConfig) -> set[int]:
    """Items with at least ``k_act`` members that matched the file.

    With ``edge_propagation`` the set is closed over stored out-edges.
    Items whose spread of this file has already ended are left out.
    """
    if lc.phase < Phase.INITIAL_SPREAD_DONE:
        raise InvalidState("activation needs the initial spread first")
    hits: dict[int, int] = {}
    for a in lc.matched_agents:
        for v in state.agents[a].memberships:
            hits[v] = hits.get(v, 0) + 1
    active = {v for v, c in hits.items() if c >= cfg.k_act}
    if cfg.edge_propagation:
        frontier = list(active)
        while frontier:
            x = frontier.pop()
            for y in state.graph.out_edges(x):
                if y not in active:
                    active.add(y)
                    frontier.append(y)
    return {v for v in active if v not in lc.spreads or not lc.spreads[v].terminated}


def _open_spread(state: SimulationState, lc: FileLifecycle, item_id: int) -> ItemSpread:
    sp = lc.spreads.get(item_id)
    if sp is None:
        sp = ItemSpread(pool=set(state.items[item_id].agents) - lc.pushed_agents)
        lc.spreads[item_id] = sp
    return sp


def _prune(lc: FileLifecycle, sp: ItemSpread, cfg: EngineConfig) -> None:
    sp.pool -= lc.pushed_agents
    if not sp.pool or sp.rounds_completed >= cfg.max_rounds or not sp.passed:
        sp.terminated = True


@lru_cache(maxsize=64)
def _decimal(x: float) -> Fraction:
    return Fraction(str(x))


def round_size(rho: float, pool: int) -> int:
    """ceil(rho * pool) with rho read as the decimal the user wrote."""
    return math.ceil(_decimal(rho) * pool)


def vote_passes(matched: int, pushed: int, t_vote: float) -> bool:
    return matched >= _decimal(t_vote) * pushed


def spread_round(state: SimulationState, lc: FileLifecycle, item_id: int, cfg: EngineConfig) -> RoundOutcome:
    sp = lc.spreads.get(item_id)
    if sp is None:
        raise InvalidState(f"item {item_id} is not activated for file {lc.file_id}")
    if sp.terminated:
        raise InvalidState(f"spread of file {lc.file_id} in item {item_id} has ended")
    sp.pool -= lc.pushed_agents
    if not sp.pool or sp.rounds_completed >= cfg.max_rounds:
        sp.terminated = True
        raise InvalidState(f"spread of file {lc.file_id} in item {item_id} has nothing left to do")
    lc.phase = Phase.SPREADING
    rnd = sp.rounds_completed + 1
    chosen = _sample(lc.round_rng, sp.pool, round_size(cfg.rho, len(sp.pool)))
    matched = sum(_push(state, lc, a, item_id, rnd) for a in chosen)
    passed = vote_passes(matched, len(chosen), cfg.t_vote)
    state.events.append(Event(VOTE, lc.file_id, item_id, None, rnd, passed))
    sp.pool.difference_update(chosen)
    sp.rounds_completed = rnd
    sp.passed = sp.passed and passed
    _prune(lc, sp, cfg)
    return RoundOutcome(passed, len(chosen), matched)


def spread_by_kns(state: SimulationState, lc: FileLifecycle, cfg: EngineConfig) -> None:
    """Global round loop: re-activate, then one round per live item in id order."""
    while True:
        for v in activate_items(state, lc, cfg):
            _prune(lc, _open_spread(state, lc, v), cfg)
        live = sorted(v for v, sp in lc.spreads.items() if not sp.terminated)
        if not live:
            break
        for v in live:
            sp = lc.spreads[v]
            _prune(lc, sp, cfg)
            if not sp.terminated:
                spread_round(state, lc, v, cfg)
    lc.phase = Phase.SETTLED


def try_add_into_item(state: SimulationState, lc: FileLifecycle, item_id: int, cfg: EngineConfig) -> bool:
    """Add the file to the item if every round passed and it overlaps the founding file enough."""
    sp = lc.spreads.get(item_id)
    if sp is None or not sp.terminated:
        raise InvalidState(f"spread of file {lc.file_id} in item {item_id} has not ended")
    # a spread that never ran a round has not been voted on
    if sp.rounds_completed == 0 or not sp.passed:
        return False
    item = state.items[item_id]
    f, founder = state.files[lc.file_id], state.files[item.founding_file]
    if match_file_file(f, founder).degree < cfg.t_add:
        return False
    if not item.add_file(lc.file_id):
        return False
    lc.added_items.append(item_id)
    state.events.append(Event(ADD, lc.file_id, item_id))
    refresh_edges(state.graph, item_id, state.items)
    return True


def _join(state: SimulationState, item: Item, agent_id: int, file_id: int) -> None:
    item.agents.add(agent_id)
    state.agents[agent_id].memberships.add(item.item_id)
    state.events.append(Event(JOIN, file_id, item.item_id, agent_id))


def try_new_item(state: SimulationState, lc: FileLifecycle, cfg: EngineConfig) -> Optional[int]:
    if lc.phase != Phase.SETTLED:
        raise InvalidState("new items are founded only after the file settles")
    if len(lc.matched_agents) < cfg.t_new:
        return None
    iid = state.item_ids()
    item = Item(iid, lc.file_id)
    state.items[iid] = item
    state.events.append(Event(NEW_ITEM, lc.file_id, iid))
    for a in sorted(lc.matched_agents):
        _join(state, item, a, lc.file_id)
    state.graph.add_node(item)
    refresh_edges(state.graph, iid, state.items)
    lc.created_item = iid
    return iid


def update_memberships(state: SimulationState, lc: FileLifecycle, cfg: EngineConfig) -> int:
    """Let agents join items once they have matched ``t_join`` of the item's files.

    Only items now holding this file and agents that matched it can cross
    the threshold, so only those pairs are examined.
    """
    if lc.phase != Phase.SETTLED:
        raise InvalidState("memberships update only after the file settles")
    targets = sorted(set(lc.added_items) | ({lc.created_item} if lc.created_item is not None else set()))
    joins = 0
    for v in targets:
        item = state.items[v]
        for a in sorted(lc.matched_agents - item.agents):
            if len(state.agents[a].matched_files & item.file_set) >= cfg.t_join:
                _join(state, item, a, lc.file_id)
                joins += 1
    return joins


def process_file(state: SimulationState, f: KnowledgeFile, cfg: EngineConfig) -> FileLifecycle:
    lc = post_file(state, f, cfg)
    initial_spread(state, lc, cfg)
    spread_by_kns(state, lc, cfg)
    for v in sorted(lc.spreads):
        try_add_into_item(state, lc, v, cfg)
    try_new_item(state, lc, cfg)
    update_memberships(state, lc, cfg)
    lc.spreads.clear()
    lc.round_rng = None
    return lc


def run_simulation(population: Sequence[Agent], file_stream: Iterable[KnowledgeFile],
                   cfg: EngineConfig, universe: Optional[UnitUniverse] = None,
                   t_e: float = DEFAULT_T_E, responder: Optional[AgentResponder] = None) -> SimulationState:
    cfg.validate()
    if universe is None:
        if not population:
            raise EmptyPopulation("cannot infer the universe from an empty population")
        universe = UnitUniverse(population[0].interests.m)
    state = SimulationState.create(universe, population, t_e=t_e, seed=cfg.rng_seed, responder=responder)
    for f in file_stream:
        process_file(state, f, cfg)
    return state


def export_events(events: Iterable[Event]) -> str:
    return "".join(e.format() + "\n" for e in events)


def parse_events(text: str) -> list[Event]:
    return [Event.parse(line) for line in text.splitlines() if line.strip()]


def replay(universe: UnitUniverse, agents: Iterable[Agent], files: Iterable[KnowledgeFile],
           events: Iterable[Event], t_e: float = DEFAULT_T_E, seed: int = 0) -> SimulationState:
    """Rebuild a state from fresh agents, the file pool and an event log."""
    fresh = [replace(a, pushed_log=[], memberships=set(), _pushed=set(), _matched=set()) for a in agents]
    state = SimulationState.create(universe, fresh, t_e=t_e, seed=seed)
    pool = {f.file_id: f for f in files}
    for ev in events:
        if ev.kind == POST:
            f = pool[ev.file_id]
            state.files[f.file_id] = f
            state.last_arrival = f.arrival_index
        elif ev.kind == PUSH:
            state.agents[ev.agent_id].record_push(ev.file_id, bool(ev.matched))
        elif ev.kind == VOTE:
            pass
        elif ev.kind == ADD:
            state.items[ev.item_id].add_file(ev.file_id)
            refresh_edges(state.graph, ev.item_id, state.items)
        elif ev.kind == NEW_ITEM:
            item = Item(ev.item_id, ev.file_id)
            state.items[ev.item_id] = item
            state.item_ids.next_id = max(state.item_ids.next_id, ev.item_id + 1)
            state.graph.add_node(item)
            refresh_edges(state.graph, ev.item_id, state.items)
        elif ev.kind == JOIN:
            state.items[ev.item_id].agents.add(ev.agent_id)
            state.agents[ev.agent_id].memberships.add(ev.item_id)
        else:
            raise InvalidArgument(f"unknown event kind {ev.kind!r}")
        state.events.append(ev)
    return state
