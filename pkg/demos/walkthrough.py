"""
SSD distances step by step
==========================

Train one HMM on every sequence, project each sequence onto its states,
and compare the induced transition matrices row by row.
"""

import numpy as np

from ssdclust import hmm, ssd
from ssdclust.data import MoHMMConfig, generate_mohmm, mohmm_models
from ssdclust.evaluation import clustering_accuracy
from ssdclust.hmm import TrainConfig
from ssdclust.spectral import spectral_cluster

# %%
# Two HMMs with identical emissions and the same stationary distribution.
# Only the transition matrices tell the classes apart.
m1, m2 = mohmm_models()
print("A1 =\n", m1.A, "\nA2 =\n", m2.A)

ds = generate_mohmm(MoHMMConfig(n=60, mean_length=150, seed=1))
print(len(ds), "sequences, lengths", min(map(len, ds.sequences)), "to",
      max(map(len, ds.sequences)))

# %%
# One global model with K=4 states, trained on the whole dataset.
fit = hmm.fit(ds.sequences, 4, TrainConfig(seed=0))
model = fit.model
print("log-likelihood", round(fit.log_likelihood, 2), "after", len(fit.trace), "evaluations")
print("state means", np.round(model.means[:, 0], 2))

# %%
# A single forward-backward pass per sequence gives its expected transition
# counts, normalised here into an induced transition matrix.
A0 = ssd.induced_transition(ds.sequences[0], model)
A1 = ssd.induced_transition(ds.sequences[1], model)
print("class", ds.labels[0], "\n", np.round(A0, 2))
print("class", ds.labels[1], "\n", np.round(A1, 2))

# %%
# The distance is minus the log of the mean Bhattacharyya affinity of the rows.
for k in range(4):
    print("row", k, "affinity", round(ssd.bhattacharyya_affinity(A0[k], A1[k]), 4))
print("distance", round(ssd.ssd_pair_distance(ssd.smooth_rows(A0, 1e-6), ssd.smooth_rows(A1, 1e-6)), 4))

# %%
# The whole matrix, then spectral clustering with an automatic kernel width.
res = ssd.ssd_distances(ds.sequences, 4, model=model)
print("forward-backward passes:", res.fb_count)
assignment = spectral_cluster(res.distances, 2, seed=0)
print("sigma", round(assignment.sigma, 4), "eigengap", round(assignment.eigengap, 4))
print("accuracy", clustering_accuracy(assignment.labels, ds.labels).accuracy)
