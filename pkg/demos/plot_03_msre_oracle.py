"""
How good are the engine's items?
================================

For a handful of files the best grouping can be found by trying every set
partition. Here the oracle recovers a planted two-group structure.
"""

import numpy as np

from eci_kns import KnowledgeFile, UnitVector
from eci_kns.metrics import msre_exact, oracle_min_msre, partition_msre, random_partition

rows = [
    [1, 1, 0, 0, 0, 0, 0, 0],
    [1, 1, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 1, 0],
    [0, 0, 0, 0, 0, 1, 1, 0],
    [0, 0, 0, 0, 0, 1, 1, 1],
]
files = [KnowledgeFile(i, UnitVector.from_dense(r), None, i) for i, r in enumerate(rows)]

# %%
# MSRE is exact: a rational number.
print("all six together:", msre_exact([f.units for f in files]))

blocks, best = oracle_min_msre(files, max_clusters=2)
print("optimum", blocks, "MSRE", best)

# %%
# Random groupings of the same files are never better.
rng = np.random.default_rng(0)
vec = [f.units for f in files]
scores = [partition_msre([[vec[i] for i in b] for b in random_partition(6, 2, rng)]) for _ in range(200)]
print("random partitions: best", min(scores), "median", float(np.median([float(s) for s in scores])))
