"""
Clustering error against sequence length
========================================

Mixture-of-HMMs data: SSD with one 4-state model against the four
per-sequence baselines (2 states each). Short sequences are where a shared
state space pays off. Raise ``REPETITIONS`` for smoother numbers.
"""

from ssdclust.experiments import METHODS, benchmark_mohmm

REPETITIONS = 3
LENGTHS = [25, 50, 100, 200]

rows = benchmark_mohmm(LENGTHS, METHODS, n=100, repetitions=REPETITIONS, seed=0)

# %%
# One line per mean length, mean error in percent.
table = {(r["mean_length"], r["method"]): r["mean_error"] for r in rows}
print("length " + "".join(f"{m:>8}" for m in METHODS))
for mu in LENGTHS:
    print(f"{mu:>6} " + "".join(f"{table[(mu, m)]:8.1f}" for m in METHODS))

# %%
# The same table is available from the command line as plottable CSV:
#
#     ssdclust benchmark-mohmm --mean-lengths 25,50,100,200 --repetitions 3 --out run/
