"""
Unit vectors, matching and item edges
=====================================

Agents and files are sparse 0-1 vectors over a shared set of knowledge
units. An agent matches a file when the two share at least one unit.
"""

import numpy as np

from eci_kns import Item, KnsGraph, UnitVector, match_vectors, refresh_edges, similarity
from eci_kns.graph import hierarchy_order

# %%
# Two vectors over six units. The match degree is the number of shared units.
a = UnitVector.from_dense([1, 0, 1, 0, 0, 0])
f = UnitVector.from_dense([0, 0, 1, 1, 0, 1])
print("agent", a.indices, "file", f.indices, "->", match_vectors(a, f))

# Vectors are stored as bitmasks, so the dense form is only for display.
print(np.array(a.to_dense()) @ np.array(f.to_dense()))

# %%
# Items hold files. The edge weight from x to y is the share of y's files
# that x also holds. Nine shared files, ten in x, eighteen in y:
shared = list(range(9))
x = Item(0, 0, files=shared + [100])
y = Item(1, 0, files=shared + list(range(200, 209)))
items = {0: x, 1: y}
g = KnsGraph(t_e=0.1)
for v in items.values():
    g.add_node(v)
refresh_edges(g, 1, items)

print("w(x -> y) =", g.weight(0, 1))
print("w(y -> x) =", g.weight(1, 0))
print("similarity =", similarity(g, items, 0, 1))
print("order:", hierarchy_order(g, items, 0, 1).value)
