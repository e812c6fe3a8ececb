"""Semantic-entropy style uncertainty estimators over sampled answers.

Given n sampled answers to one question and a pairwise similarity matrix
S, the nearest-neighbor entropy is

    u = -(1/n) * sum_i log( sum_{j != i} exp(S_ij / tau) )

Low values mean each answer sits near many similar neighbors (the model
keeps saying the same thing); high values mean the samples scatter. The
diagonal is excluded structurally - each row drops its own entry before
the log-sum-exp - so self-similarity never leaks into the score.

The question-aligned variant applies the same formula to the bilaterally
gated matrix ``diag(w) S diag(w)`` (see :mod:`sementropy.alignment`), so
off-question answers stop counting as support for each other.

The discrete baseline clusters answers into meaning groups (greedy
first-representative clustering) and takes the Shannon entropy of the
cluster size distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ValidationError
from .textsim import SimilarityMatrix, rouge_l, tokenize

CLUSTER_METHODS = ("rouge_threshold", "entailment_bidirectional")
DEFAULT_TAU = 1.0


def snne(s: SimilarityMatrix, tau: float = DEFAULT_TAU) -> float:
    """Nearest-neighbor entropy of a similarity matrix at temperature tau.

    Each row's own diagonal entry is removed before the log-sum-exp, so
    the result is defined purely by cross-sample similarity.
    """
    if tau <= 0:
        raise ValidationError(f"tau must be > 0, got {tau}")
    n = s.n
    if n < 2:
        raise ValidationError(f"need at least 2 samples, got {n}")
    off_diag = s.values[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    return float(-np.mean(logsumexp(off_diag / tau, axis=1)))


def qa_snne(
    s_text: SimilarityMatrix,
    alignment: "AlignmentScores",
    tau: float = DEFAULT_TAU,
    weight_scale: str = "softmax",
) -> float:
    """Nearest-neighbor entropy of the relevance-gated similarity matrix."""
    from .alignment import gate_similarity

    gated = gate_similarity(s_text, alignment.weights, weight_scale=weight_scale)
    return snne(gated, tau=tau)


# ---------------------------------------------------------------------------
# Discrete baseline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SemanticClustering:
    """Cluster assignment of n samples into meaning groups.

    ``assignments[i]`` is the cluster id of sample i; ids are contiguous
    integers starting at 0, in order of first appearance.
    """

    assignments: tuple[int, ...]
    method: str
    threshold: float | None = None

    def __post_init__(self) -> None:
        if self.method not in CLUSTER_METHODS:
            raise ValidationError(f"unknown clustering method: {self.method!r}")
        if not self.assignments:
            raise ValidationError("clustering requires at least one sample")
        seen: list[int] = []
        for cid in self.assignments:
            if cid not in seen:
                if cid != len(seen):
                    raise ValidationError(
                        "cluster ids must be contiguous from 0 in order of first appearance"
                    )
                seen.append(cid)

    @property
    def n_clusters(self) -> int:
        return max(self.assignments) + 1

    def sizes(self) -> np.ndarray:
        return np.bincount(np.asarray(self.assignments), minlength=self.n_clusters)


def _same_meaning_rouge(
    cand_tokens, rep_tokens, threshold: float,
) -> bool:
    return rouge_l(cand_tokens, rep_tokens).f >= threshold


def cluster_semantic(
    samples: Sequence[str],
    method: str = "rouge_threshold",
    threshold: float = 0.5,
    nli_backend=None,
    tokenizer_mode: str = "default",
) -> SemanticClustering:
    """Greedy first-representative clustering of sampled answers.

    Walk the samples in order; compare each one against the *first member*
    of every existing cluster and join the first cluster whose
    representative it matches, else open a new cluster. Matching is either
    ROUGE-L f >= threshold (lexical fallback, the default) or bidirectional
    entailment judged by an NLI backend: both directions must argmax to
    the entailment class.
    """
    if method not in CLUSTER_METHODS:
        raise ValidationError(f"unknown clustering method: {method!r}")
    if not samples:
        raise ValidationError("clustering requires at least one sample")
    if method == "entailment_bidirectional" and nli_backend is None:
        raise ValidationError(
            "entailment_bidirectional clustering requires an NLI backend; "
            "pass a scorer-service client or use method='rouge_threshold'"
        )

    assignments: list[int] = []
    representatives: list[int] = []  # sample index of each cluster's first member

    if method == "rouge_threshold":
        token_seqs = [tokenize(s, mode=tokenizer_mode) for s in samples]
        for i, toks in enumerate(token_seqs):
            placed = False
            for cid, rep_idx in enumerate(representatives):
                if _same_meaning_rouge(toks, token_seqs[rep_idx], threshold):
                    assignments.append(cid)
                    placed = True
                    break
            if not placed:
                assignments.append(len(representatives))
                representatives.append(i)
        return SemanticClustering(
            assignments=tuple(assignments), method=method, threshold=threshold
        )

    # entailment_bidirectional: one batched request per new sample keeps the
    # network chatter at O(clusters) pairs instead of O(n^2).
    def _mutually_entails(a: str, b: str) -> bool:
        fwd, bwd = nli_backend.nli([(a, b), (b, a)])

        def _is_entail(logits: Mapping) -> bool:
            entail = float(logits["entail"])
            return entail > float(logits["neutral"]) and entail > float(logits["contra"])

        return _is_entail(fwd) and _is_entail(bwd)

    for i, text in enumerate(samples):
        placed = False
        for cid, rep_idx in enumerate(representatives):
            if _mutually_entails(text, samples[rep_idx]):
                assignments.append(cid)
                placed = True
                break
        if not placed:
            assignments.append(len(representatives))
            representatives.append(i)
    return SemanticClustering(assignments=tuple(assignments), method=method, threshold=None)


def dse(clustering: SemanticClustering) -> float:
    """Shannon entropy (nats) of the cluster size distribution."""
    sizes = clustering.sizes().astype(float)
    p = sizes / sizes.sum()
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)) + 0.0)  # + 0.0 folds -0.0 into 0.0


# ---------------------------------------------------------------------------
# Per-record scoring orchestration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UncertaintyResult:
    """All uncertainty scores computed for one record."""

    id: str
    u_snne: float
    u_qasnne: Mapping[str, float] = field(default_factory=dict)
    u_dse: float | None = None
    tau: float = DEFAULT_TAU
    n: int = 0
    config_hash: str = ""

    def to_json_dict(self) -> dict:
        out: dict = {
            "id": self.id,
            "u_snne": self.u_snne,
            "tau": self.tau,
            "n": self.n,
        }
        for variant in sorted(self.u_qasnne):
            out[f"u_qasnne_{variant}"] = self.u_qasnne[variant]
        if self.u_dse is not None:
            out["u_dse"] = self.u_dse
        if self.config_hash:
            out["config_hash"] = self.config_hash
        return out


def score_record(
    record_id: str,
    samples: Sequence[str],
    alignments: Mapping[str, "AlignmentScores"] | None = None,
    tau: float = DEFAULT_TAU,
    weight_scale: str = "softmax",
    with_dse: bool = False,
    cluster_method: str = "rouge_threshold",
    cluster_threshold: float = 0.5,
    nli_backend=None,
    tokenizer_mode: str = "default",
    config_hash: str = "",
) -> UncertaintyResult:
    """Score one record: base entropy, gated variants, optional discrete baseline."""
    from .textsim import base_similarity_matrix

    s_text = base_similarity_matrix(samples, mode=tokenizer_mode)
    u = snne(s_text, tau=tau)
    qas: dict[str, float] = {}
    if alignments:
        for variant, scores in alignments.items():
            if scores.n != len(samples):
                raise ValidationError(
                    f"record {record_id}: alignment for {variant!r} has {scores.n} "
                    f"entries but there are {len(samples)} samples"
                )
            qas[variant] = qa_snne(s_text, scores, tau=tau, weight_scale=weight_scale)
    u_dse = None
    if with_dse:
        clustering = cluster_semantic(
            samples,
            method=cluster_method,
            threshold=cluster_threshold,
            nli_backend=nli_backend,
            tokenizer_mode=tokenizer_mode,
        )
        u_dse = dse(clustering)
    return UncertaintyResult(
        id=record_id,
        u_snne=u,
        u_qasnne=qas,
        u_dse=u_dse,
        tau=tau,
        n=len(samples),
        config_hash=config_hash,
    )
