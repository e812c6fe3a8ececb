"""Question-answer alignment scoring and similarity gating.

An alignment score ``alpha_i`` says how well sampled answer ``a_i``
addresses the question. Three variants produce it:

* ``emb``    - cosine similarity between question and answer embeddings,
* ``ent``    - bidirectional NLI evidence,
  ``alpha = gamma * (entail_fwd + entail_bwd) - lambda * (contra_fwd + contra_bwd)``,
* ``crosse`` - a cross-encoder relevance logit, passed through unchanged.

The scores are then softmaxed into relevance weights
``w_i = exp(beta * alpha_i) / sum_k exp(beta * alpha_k)`` and the base
similarity matrix is gated bilaterally, ``S_gated = diag(w) S diag(w)``,
so a pair is down-weighted whenever *either* answer aligns poorly.

The literal softmax weights sum to 1, which shrinks gated similarities
like 1/n^2 and compresses the gated entropy's range relative to the fixed
detection threshold. ``weight_scale="softmax_times_n"`` rescales weights
to mean 1 instead; it is an explicit, never-implicit option.

Alignment inputs come from a pluggable backend: a precomputed JSONL file
(:class:`PrecomputedAlignments`) or the scorer service over HTTP
(:class:`ScorerServiceClient`). Backends must return per-sample payloads
in sample order.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import requests

from .errors import BackendError, ValidationError
from .textsim import SimilarityMatrix

logger = logging.getLogger(__name__)

VARIANTS = ("emb", "ent", "crosse")
WEIGHT_SCALES = ("softmax", "softmax_times_n")

DEFAULT_BETA = 10.0
DEFAULT_GAMMA = 1.0
DEFAULT_LAMBDA = 1.0


@dataclass(frozen=True)
class NliLogits:
    """Entailment/contradiction logits for both directions of a (q, a) pair.

    Backends return three-class logits; the neutral logit is received and
    ignored, only entailment and contradiction enter the score.
    """

    entail_fwd: float
    contra_fwd: float
    entail_bwd: float
    contra_bwd: float

    def __post_init__(self) -> None:
        for name in ("entail_fwd", "contra_fwd", "entail_bwd", "contra_bwd"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"NLI logit {name} is not finite")


@dataclass(frozen=True)
class EmbeddingPair:
    """A question embedding and one answer embedding of equal dimension."""

    e_q: np.ndarray
    e_a: np.ndarray

    def __post_init__(self) -> None:
        q = np.asarray(self.e_q, dtype=float)
        a = np.asarray(self.e_a, dtype=float)
        object.__setattr__(self, "e_q", q)
        object.__setattr__(self, "e_a", a)
        if q.ndim != 1 or a.ndim != 1 or q.shape != a.shape:
            raise ValidationError(
                f"embedding dimensions differ: {q.shape} vs {a.shape}"
            )
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(a))):
            raise ValidationError("embeddings contain non-finite values")
        if np.linalg.norm(q) == 0.0 or np.linalg.norm(a) == 0.0:
            raise ValidationError("embeddings must have nonzero norm")

    @property
    def dim(self) -> int:
        return int(self.e_q.shape[0])


def alpha_embedding(pair: EmbeddingPair) -> float:
    """Cosine similarity between question and answer embeddings, in [-1, 1]."""
    q, a = pair.e_q, pair.e_a
    return float(np.dot(q, a) / (np.linalg.norm(q) * np.linalg.norm(a)))


def alpha_entailment(
    logits: NliLogits,
    gamma: float = DEFAULT_GAMMA,
    lambda_: float = DEFAULT_LAMBDA,
) -> float:
    """Mutual-entailment evidence minus weighted contradiction evidence."""
    return gamma * (logits.entail_fwd + logits.entail_bwd) - lambda_ * (
        logits.contra_fwd + logits.contra_bwd
    )


def alpha_cross_encoder(relevance_logit: float) -> float:
    """Identity pass-through of a cross-encoder relevance logit."""
    if not math.isfinite(relevance_logit):
        raise ValidationError("cross-encoder relevance logit is not finite")
    return float(relevance_logit)


def relevance_weights(alpha: Sequence[float] | np.ndarray, beta: float) -> np.ndarray:
    """Softmax of ``beta * alpha`` with max-subtraction for stability.

    ``beta = 0`` is permitted and yields the exact uniform distribution
    (degenerate test mode). All-(-inf) or non-finite inputs raise rather
    than propagating NaN.
    """
    a = np.asarray(alpha, dtype=float)
    if a.ndim != 1 or a.shape[0] < 2:
        raise ValidationError("alpha must be a vector of length >= 2")
    if beta < 0:
        raise ValidationError(f"beta must be >= 0, got {beta}")
    scaled = beta * a
    if not np.all(np.isfinite(scaled)):
        raise ValidationError("relevance weights undefined: non-finite beta*alpha")
    shifted = scaled - scaled.max()
    exps = np.exp(shifted)
    total = exps.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise ValidationError("relevance weights undefined for the given alphas")
    return exps / total


@dataclass(frozen=True)
class AlignmentScores:
    """Raw alignment scores and the relevance weights derived from them."""

    variant: str
    alpha: np.ndarray
    weights: np.ndarray
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA
    lambda_: float = DEFAULT_LAMBDA

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown alignment variant: {self.variant!r}")
        a = np.asarray(self.alpha, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "weights", w)
        if a.shape != w.shape or a.ndim != 1:
            raise ValidationError("alpha and weights must be vectors of equal length")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValidationError("relevance weights must sum to 1 within 1e-9")
        # Mathematically softmax weights are strictly inside (0, 1), but with
        # extreme alignment gaps the dominant weight rounds to exactly 1.0 in
        # float64 (the rest ~e^-beta*gap). The boundary is therefore legal.
        if np.any(w < 0.0) or np.any(w > 1.0):
            raise ValidationError("each relevance weight must lie in [0, 1]")

    @classmethod
    def from_alpha(
        cls,
        variant: str,
        alpha: Sequence[float] | np.ndarray,
        beta: float = DEFAULT_BETA,
        gamma: float = DEFAULT_GAMMA,
        lambda_: float = DEFAULT_LAMBDA,
    ) -> "AlignmentScores":
        weights = relevance_weights(alpha, beta)
        return cls(
            variant=variant,
            alpha=np.asarray(alpha, dtype=float),
            weights=weights,
            beta=beta,
            gamma=gamma,
            lambda_=lambda_,
        )

    @property
    def n(self) -> int:
        return int(self.alpha.shape[0])


def gate_similarity(
    s_text: SimilarityMatrix,
    weights: Sequence[float] | np.ndarray,
    weight_scale: str = "softmax",
) -> SimilarityMatrix:
    """Bilateral row-column gating: entry (i, j) becomes ``w_i * S_ij * w_j``.

    Computed as an elementwise product with ``outer(w, w)`` so symmetry of
    the input is preserved exactly. ``softmax_times_n`` multiplies the
    weights by n first (mean-1 rescaling, see module docstring).
    """
    if weight_scale not in WEIGHT_SCALES:
        raise ValidationError(f"unknown weight_scale: {weight_scale!r}")
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.shape[0] != s_text.n:
        raise ValidationError(
            f"weights length {w.shape} does not match matrix size {s_text.n}"
        )
    if weight_scale == "softmax_times_n":
        w = w * s_text.n
    gated = np.outer(w, w) * s_text.values
    return SimilarityMatrix(values=gated, kind="gated")


# ---------------------------------------------------------------------------
# Alignment backends
# ---------------------------------------------------------------------------


def _alphas_from_payload(
    payload: Mapping,
    variant: str,
    n_samples: int,
    gamma: float,
    lambda_: float,
) -> np.ndarray:
    """Turn one alignment-file record into an alpha vector of length n."""
    rid = payload.get("id", "<unknown>")
    if "alpha" in payload:
        alpha = np.asarray(payload["alpha"], dtype=float)
        if alpha.shape != (n_samples,):
            raise ValidationError(
                f"alignment record {rid}: alpha length {alpha.shape[0]} != n_samples {n_samples}"
            )
        return alpha
    samples = payload.get("samples")
    if samples is None or len(samples) != n_samples:
        raise ValidationError(
            f"alignment record {rid}: expected {n_samples} per-sample payloads"
        )
    if variant == "emb":
        if "question_embedding" not in payload:
            raise ValidationError(f"alignment record {rid}: missing question_embedding")
        e_q = np.asarray(payload["question_embedding"], dtype=float)
        return np.array(
            [
                alpha_embedding(EmbeddingPair(e_q=e_q, e_a=np.asarray(s["embedding"], dtype=float)))
                for s in samples
            ]
        )
    if variant == "ent":
        alphas = []
        for s in samples:
            nli = s["nli"]
            logits = NliLogits(
                entail_fwd=float(nli["ef"]),
                contra_fwd=float(nli["cf"]),
                entail_bwd=float(nli["eb"]),
                contra_bwd=float(nli["cb"]),
            )
            alphas.append(alpha_entailment(logits, gamma, lambda_))
        return np.array(alphas)
    if variant == "crosse":
        return np.array([alpha_cross_encoder(float(s["rel"])) for s in samples])
    raise ValidationError(f"unknown alignment variant: {variant!r}")


class PrecomputedAlignments:
    """Alignment inputs loaded from a JSONL file, keyed by (id, variant).

    Each line is ``{"id", "variant", ...payload}`` where the payload is
    either a raw ``alpha`` vector or the variant-specific inputs
    (``question_embedding`` + per-sample ``embedding``, per-sample ``nli``
    logits, or per-sample ``rel`` logits).
    """

    def __init__(self, path) -> None:
        self.path = str(path)
        self._records: dict[tuple[str, str], dict] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"{path}: line {lineno}: malformed JSON ({exc.msg})")
                rid, variant = obj.get("id"), obj.get("variant")
                if not rid or variant not in VARIANTS:
                    raise ValidationError(
                        f"{path}: line {lineno}: alignment line needs 'id' and a valid 'variant'"
                    )
                key = (rid, variant)
                if key in self._records:
                    raise ValidationError(
                        f"{path}: line {lineno}: duplicate alignment entry for {key}"
                    )
                self._records[key] = obj

    def alphas_for(
        self,
        record_id: str,
        variant: str,
        n_samples: int,
        gamma: float = DEFAULT_GAMMA,
        lambda_: float = DEFAULT_LAMBDA,
    ) -> np.ndarray:
        try:
            payload = self._records[(record_id, variant)]
        except KeyError:
            raise ValidationError(
                f"no precomputed {variant} alignment for record {record_id!r} in {self.path}"
            )
        return _alphas_from_payload(payload, variant, n_samples, gamma, lambda_)


class ScorerServiceClient:
    """HTTP client for the scorer service's /embed, /nli and /rerank endpoints.

    Responses must echo input order; results are memoized per run, keyed by
    (text pair, variant), so repeated texts cost one request.
    """

    def __init__(self, base_url: str, timeout: float = 30.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()
        self._memo: dict[tuple, object] = {}

    def _post(self, endpoint: str, body: dict) -> dict:
        url = f"{self.base_url}{endpoint}"
        try:
            resp = self._session.post(url, json=body, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendError(f"scorer service unreachable at {url}: {exc}")
        if resp.status_code != 200:
            raise BackendError(f"scorer service {endpoint} returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError:
            raise BackendError(f"scorer service {endpoint} returned non-JSON body")

    def health(self) -> dict:
        url = f"{self.base_url}/health"
        try:
            resp = self._session.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendError(f"scorer service unreachable at {url}: {exc}")
        if resp.status_code != 200:
            raise BackendError(f"scorer service /health returned {resp.status_code}")
        return resp.json()

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        missing = [t for t in texts if ("embed", t) not in self._memo]
        if missing:
            data = self._post("/embed", {"texts": list(missing)})
            vectors = data.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(missing):
                raise BackendError("scorer service /embed response length mismatch")
            for text, vec in zip(missing, vectors):
                self._memo[("embed", text)] = np.asarray(vec, dtype=float)
        return [self._memo[("embed", t)] for t in texts]

    def nli(self, pairs: Sequence[tuple[str, str]]) -> list[dict]:
        missing = [p for p in pairs if ("nli", p) not in self._memo]
        if missing:
            body = {"pairs": [{"premise": p, "hypothesis": h} for p, h in missing]}
            data = self._post("/nli", body)
            logits = data.get("logits")
            if not isinstance(logits, list) or len(logits) != len(missing):
                raise BackendError("scorer service /nli response length mismatch")
            for pair, item in zip(missing, logits):
                self._memo[("nli", pair)] = item
        return [self._memo[("nli", p)] for p in pairs]

    def rerank(self, query: str, candidates: Sequence[str]) -> list[float]:
        missing = [c for c in candidates if ("rerank", query, c) not in self._memo]
        if missing:
            data = self._post("/rerank", {"query": query, "candidates": list(missing)})
            logits = data.get("logits")
            if not isinstance(logits, list) or len(logits) != len(missing):
                raise BackendError("scorer service /rerank response length mismatch")
            for cand, logit in zip(missing, logits):
                self._memo[("rerank", query, cand)] = float(logit)
        return [self._memo[("rerank", query, c)] for c in candidates]

    def alphas_for_record(
        self,
        question: str,
        samples: Sequence[str],
        variant: str,
        gamma: float = DEFAULT_GAMMA,
        lambda_: float = DEFAULT_LAMBDA,
    ) -> np.ndarray:
        """Fetch alignment inputs for one record and reduce them to alphas."""
        if variant == "emb":
            vectors = self.embed([question, *samples])
            e_q = vectors[0]
            return np.array(
                [alpha_embedding(EmbeddingPair(e_q=e_q, e_a=e_a)) for e_a in vectors[1:]]
            )
        if variant == "ent":
            pairs: list[tuple[str, str]] = []
            for answer in samples:
                pairs.append((question, answer))
                pairs.append((answer, question))
            logits = self.nli(pairs)
            alphas = []
            for k in range(len(samples)):
                fwd, bwd = logits[2 * k], logits[2 * k + 1]
                nli_logits = NliLogits(
                    entail_fwd=float(fwd["entail"]),
                    contra_fwd=float(fwd["contra"]),
                    entail_bwd=float(bwd["entail"]),
                    contra_bwd=float(bwd["contra"]),
                )
                alphas.append(alpha_entailment(nli_logits, gamma, lambda_))
            return np.array(alphas)
        if variant == "crosse":
            return np.array([alpha_cross_encoder(x) for x in self.rerank(question, samples)])
        raise ValidationError(f"unknown alignment variant: {variant!r}")
