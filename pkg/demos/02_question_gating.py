"""
Question-aligned gating of the similarity matrix
================================================

A sampled answer set often contains a consistent-but-off-topic block: the
model repeats something fluent that never addresses the question. Plain
nearest-neighbor entropy rewards that internal agreement. Gating the
similarity matrix by per-answer relevance weights removes the reward.
"""

import numpy as np

from sementropy import base_similarity_matrix, qa_snne, relevance_weights, snne
from sementropy.alignment import AlignmentScores, gate_similarity

question = "which structure is the hook dissecting?"

# Three on-topic answers followed by three fluent evasions that agree with
# each other but not with the question.
samples = [
    "the hook is dissecting the cystic duct",
    "the cystic duct is being dissected by the hook",
    "the hook dissects the cystic duct",
    "the operating table is level and stable",
    "the operating table is level and steady",
    "the operating table looks level and stable",
]

s_text = base_similarity_matrix(samples)
print("pairwise similarity matrix:")
print(np.round(s_text.values, 2))

base = snne(s_text)
print(f"\nungated SNNE {base:+.4f}  (the off-topic block looks confident)")

# --- relevance weights: softmax over alignment scores ------------------------
# Alphas here are hand-set for clarity; the alignment module produces them
# from embeddings, NLI logits, or reranker logits.
alphas = np.array([0.9, 0.85, 0.88, 0.15, 0.12, 0.18])
weights = relevance_weights(alphas, beta=10.0)
print("\nalignment alphas ", np.round(alphas, 2))
print("softmax weights  ", np.round(weights, 3))

# --- bilateral gating: entry (i, j) becomes w_i * S_ij * w_j ------------------
align = AlignmentScores.from_alpha("emb", alphas, beta=10.0)
gated = qa_snne(s_text, align, weight_scale="softmax_times_n")
print(f"\ngated QA-SNNE {gated:+.4f}  (off-topic agreement no longer counts)")

# --- two structural guarantees -----------------------------------------------
# Bypass weights (all ones) make gating a no-op, so QA-SNNE reduces to SNNE.
bypass = gate_similarity(s_text, np.ones(len(samples)))
print(f"\nbypass identity: |snne(gated) - snne| = {abs(snne(bypass) - base):.2e}")

# With literal softmax weights every entry shrinks, so the score can only
# move toward the uncertain end: QA-SNNE >= SNNE.
contraction = qa_snne(s_text, align, weight_scale="softmax")
print(f"contraction: QA-SNNE {contraction:+.4f} >= SNNE {base:+.4f} -> {contraction >= base}")
