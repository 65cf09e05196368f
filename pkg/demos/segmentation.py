"""
Finding regime changes
======================

Nine regimes share three emission levels and differ only in the order in
which they visit them. The concatenated signal is cut into windows of ten
samples, windows are compared with SSD, and dynamic programming on the
spectral embedding places the eight boundaries.
"""

import numpy as np

from ssdclust.data import REGIME_CYCLES, generate_regimes
from ssdclust.experiments import run_segmentation
from ssdclust.hmm import TrainConfig

ds = generate_regimes(length=50, seed=1)
for label, cycle in enumerate(REGIME_CYCLES):
    print("regime", label, "visits states", cycle)

# %%
# Regimes 0, 1, 4 and 6 all average about 3, so their boundaries are
# invisible to a detector that looks at levels alone.
print("regime means", np.round([s.mean() for s in ds.sequences], 2))

# %%
result = run_segmentation(ds, W=10, method="ssd", K=3, train_config=TrainConfig(seed=0))
print("windows", result["n_windows"])
print("true starts ", result["truth_starts"].tolist())
print("found starts", result["starts"].tolist())
print("segmentation error", round(result["error"], 2), "%")

# %%
# A per-window baseline for comparison.
yy = run_segmentation(ds, W=10, method="yy", Km=3, train_config=TrainConfig(seed=0))
print("yy error", round(yy["error"], 2), "%")
