"""
Closed-form sanity checks for the entropy estimators
====================================================

Two answer sets bracket the behavior of nearest-neighbor semantic entropy:
twenty copies of one sentence (maximal agreement) and twenty sentences with
no shared words (maximal disagreement). Both have exact closed forms, so
this script recomputes them and compares against the formulas.
"""

import math

from sementropy import base_similarity_matrix, cluster_semantic, dse, snne

N = 20

# --- maximal agreement: every sample is the same sentence -------------------
identical = ["the grasper retracts the gallbladder fundus"] * N
s_same = base_similarity_matrix(identical)
value_same = snne(s_same)
print(f"all-identical SNNE   {value_same:+.10f}")
print(f"closed form -(1+ln19) {-(1 + math.log(N - 1)):+.10f}")

# --- maximal disagreement: pairwise similarity is exactly zero --------------
dissimilar = [f"word{3 * i} word{3 * i + 1} word{3 * i + 2}" for i in range(N)]
s_diff = base_similarity_matrix(dissimilar)
value_diff = snne(s_diff)
print(f"all-dissimilar SNNE  {value_diff:+.10f}")
print(f"closed form -ln19     {-math.log(N - 1):+.10f}")

# --- the working threshold separates the two regimes ------------------------
THETA_STAR = -3.5
for name, value in [("identical", value_same), ("dissimilar", value_diff)]:
    verdict = "flagged hallucinated" if value >= THETA_STAR else "kept as grounded"
    print(f"{name:>10}: score {value:+.4f} vs threshold {THETA_STAR} -> {verdict}")

# --- the discrete baseline has closed forms too ------------------------------
# One meaning cluster gives zero entropy; k equal clusters give ln k.
single = cluster_semantic(identical)
print(f"\nDSE, one cluster      {dse(single):+.10f}  (expect 0)")

k = 4
balanced = [f"cluster{c} topic{c} phrase{c}" for c in range(k) for _ in range(N // k)]
clusters = cluster_semantic(balanced)
print(f"DSE, {k} equal clusters {dse(clusters):+.10f}  (expect ln {k} = {math.log(k):.10f})")
