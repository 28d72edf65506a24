"""
A small simulation, step by step
================================

Files arrive one at a time. Each is pushed to a few random agents; agents
who match it pull in the items they belong to, and those items spread the
file further in voted rounds. Enough matches found a new item.
"""

from collections import Counter

from eci_kns import EngineConfig, PopulationSpec, generate, run_simulation
from eci_kns.graph import mine_hierarchy
from eci_kns.metrics import system_msre, system_snr

# %%
# A clustered population: every vector leans towards one block of units.
spec = PopulationSpec(n_agents=200, n_files=150, structure="clustered", seed=3)
agents, files = generate(spec)
print(sum(a.interests.norm2 for a in agents) / len(agents), "units per agent")
print(sum(f.units.norm2 for f in files) / len(files), "units per file")

# %%
# Run the engine with its defaults.
cfg = EngineConfig(rng_seed=3)
state = run_simulation(agents, files, cfg)
print(Counter(e.kind for e in state.events))

# %%
# Push quality and item cohesion.
snr = system_snr(state.agents.values())
print(f"system SNR {snr.system:.3f} over {snr.n_pushes} pushes")
print(f"{len(state.items)} items, mean MSRE {system_msre(state.items, state.files).system:.3f}")

biggest = max(state.items.values(), key=lambda v: v.k)
print("largest item:", biggest.item_id, "files", biggest.files[:8], "agents", len(biggest.agents))

# %%
# The item graph can be folded into a merge tree.
tree = mine_hierarchy(state.graph, state.items)
for mg in tree.merges[:5]:
    print(f"{sorted(mg.left)} + {sorted(mg.right)} at {mg.similarity:.3f}")
