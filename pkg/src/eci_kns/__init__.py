"""Evolutionary collective intelligence simulator and knowledge network graph."""

from .core import (
    Agent,
    AgentResponder,
    EciError,
    EmptyGraph,
    EmptyPopulation,
    InvalidArgument,
    InvalidState,
    Item,
    KnowledgeFile,
    NoData,
    UnitUniverse,
    UnitVector,
    make_vector,
    new_universe,
)
from .engine import EngineConfig, SimulationState, run_simulation
from .graph import KnsGraph, edge_weights, mine_hierarchy, rebuild, refresh_edges, similarity
from .matching import MatchResult, SyntheticResponder, match_agent_file, match_file_file, match_vectors
from .metrics import item_msre, oracle_min_msre, random_baseline_snr, system_msre, system_snr
from .synthgen import PopulationSpec, generate

__version__ = "0.1.0"
