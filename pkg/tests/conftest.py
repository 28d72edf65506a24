from eci_kns.core import Agent, Item, KnowledgeFile, UnitUniverse, UnitVector
from eci_kns.engine import SimulationState
from eci_kns.graph import refresh_edges


def agents_from(m, index_sets):
    return [Agent(i, UnitVector(m, s)) for i, s in enumerate(index_sets)]


def kfile(m, fid, units, arrival=None):
    return KnowledgeFile(fid, UnitVector(m, units), None, fid if arrival is None else arrival)


def plant_item(state: SimulationState, founding: KnowledgeFile, members, extra_files=()):
    """Insert an item directly, bypassing the engine, for fixture setup."""
    for f in (founding, *extra_files):
        if f.file_id not in state.files:
            state.files[f.file_id] = f
            state.last_arrival = max(state.last_arrival, f.arrival_index)
    iid = state.item_ids()
    item = Item(iid, founding.file_id, files=[founding.file_id] + [f.file_id for f in extra_files])
    state.items[iid] = item
    for a in members:
        item.agents.add(a)
        state.agents[a].memberships.add(iid)
    state.graph.add_node(item)
    refresh_edges(state.graph, iid, state.items)
    return iid


def make_state(m, index_sets, seed=0, t_e=0.1):
    return SimulationState.create(UnitUniverse(m), agents_from(m, index_sets), t_e=t_e, seed=seed)


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
