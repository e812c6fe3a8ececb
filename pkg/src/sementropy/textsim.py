"""Lexical similarity and utility metrics.

Everything downstream of sampling runs on plain token sequences: the
hallucination label oracle (ROUGE-L of the greedy answer against the
reference), the base pairwise similarity matrix over sampled answers, and
the BLEU/ROUGE utility aggregates. All functions here are pure and
deterministic, so they are safe to fan out across records.

Conventions fixed here so numbers are reproducible bit-for-bit:

* ROUGE-L F is the balanced harmonic mean ``2PR / (P + R)`` with
  ``P = lcs / |candidate|`` and ``R = lcs / |reference|``. The harmonic
  mean is symmetric under swapping P and R, which makes the pairwise
  similarity matrix exactly symmetric.
* BLEU is sentence-level with a brevity penalty; modified n-gram
  precisions use add-one smoothing for orders >= 2 (the unigram precision
  is unsmoothed, so fully disjoint texts score 0).
* The default tokenizer lower-cases, drops punctuation characters, and
  splits on whitespace; ``cased`` keeps the original case.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

TOKENIZER_MODES = ("default", "cased")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


@dataclass(frozen=True)
class TokenSeq:
    """An immutable token sequence plus the length of the source text."""

    tokens: tuple[str, ...]
    source_len: int

    def __post_init__(self) -> None:
        if any(t == "" for t in self.tokens):
            raise ValidationError("TokenSeq must not contain empty tokens")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class RougeLScore:
    precision: float
    recall: float
    f: float


def tokenize(text: str, mode: str = "default") -> TokenSeq:
    """Split ``text`` into tokens; empty input yields an empty sequence.

    ``default`` lower-cases and drops punctuation characters so that
    trivially different surface forms ("Forceps." vs "forceps") compare
    equal; ``cased`` only drops punctuation.
    """
    if mode not in TOKENIZER_MODES:
        raise ValidationError(f"unknown tokenizer mode: {mode!r}")
    stripped = "".join(" " if _is_punct(ch) else ch for ch in text)
    if mode == "default":
        stripped = stripped.lower()
    tokens = tuple(stripped.split())
    return TokenSeq(tokens=tokens, source_len=len(text))


def _as_tokens(seq: TokenSeq | Sequence[str]) -> tuple[str, ...]:
    if isinstance(seq, TokenSeq):
        return seq.tokens
    return tuple(seq)


def lcs_len(a: TokenSeq | Sequence[str], b: TokenSeq | Sequence[str]) -> int:
    """Length of the longest common subsequence of two token sequences.

    O(|a| * |b|) time, O(min(|a|, |b|)) memory via a rolling row.
    """
    xs, ys = _as_tokens(a), _as_tokens(b)
    if len(ys) > len(xs):
        xs, ys = ys, xs
    if not ys:
        return 0
    prev = [0] * (len(ys) + 1)
    for x in xs:
        best = 0  # prev[j-1] before it was overwritten
        row = prev
        for j, y in enumerate(ys, start=1):
            cur = row[j]
            if x == y:
                row[j] = best + 1
            elif row[j - 1] > cur:
                row[j] = row[j - 1]
            best = cur
    return prev[-1]


def rouge_l(candidate: TokenSeq | Sequence[str], reference: TokenSeq | Sequence[str]) -> RougeLScore:
    """LCS-based precision/recall/F of ``candidate`` against ``reference``.

    F is 0 whenever either side is empty or the LCS is empty.
    """
    cand, ref = _as_tokens(candidate), _as_tokens(reference)
    if not cand or not ref:
        return RougeLScore(0.0, 0.0, 0.0)
    lcs = lcs_len(cand, ref)
    if lcs == 0:
        return RougeLScore(0.0, 0.0, 0.0)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    f = 2.0 * precision * recall / (precision + recall)
    return RougeLScore(precision, recall, f)


def rouge_f(candidate_text: str, reference_text: str, mode: str = "default") -> float:
    """Convenience wrapper: tokenize two raw strings and return ROUGE-L F."""
    return rouge_l(tokenize(candidate_text, mode), tokenize(reference_text, mode)).f


def _ngram_counts(tokens: tuple[str, ...], n: int) -> Counter:
    return Counter(tokens[i : i + n] for i in range(len(tokens) - n + 1))


def bleu(candidate: TokenSeq | Sequence[str], reference: TokenSeq | Sequence[str], max_n: int = 4) -> float:
    """Sentence-level BLEU with brevity penalty.

    Modified precisions for orders >= 2 get add-one smoothing; the unigram
    precision is left unsmoothed so a candidate sharing no tokens with the
    reference scores exactly 0. Identical sequences score exactly 1.
    """
    cand, ref = _as_tokens(candidate), _as_tokens(reference)
    if not cand or not ref:
        return 0.0
    log_prec = 0.0
    for n in range(1, max_n + 1):
        cand_grams = _ngram_counts(cand, n)
        ref_grams = _ngram_counts(ref, n)
        matched = sum(min(count, ref_grams[g]) for g, count in cand_grams.items())
        total = max(len(cand) - n + 1, 0)
        if n == 1:
            if matched == 0:
                return 0.0
            p = matched / total
        else:
            p = (matched + 1) / (total + 1)
        log_prec += math.log(p) / max_n
    c, r = len(cand), len(ref)
    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    return brevity * math.exp(log_prec)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise answer-similarity matrix, base (lexical) or gated.

    The diagonal is stored as 1.0 for the base kind but is never consumed:
    every entropy sum is written over j != i. Base entries live in [0, 1];
    gated entries are nonnegative (and bounded by the base entries when the
    gate weights come from a plain softmax).
    """

    values: np.ndarray
    kind: str  # "base" | "gated"

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError(f"similarity matrix must be square, got shape {v.shape}")
        if self.kind not in ("base", "gated"):
            raise ValidationError(f"unknown matrix kind: {self.kind!r}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("similarity matrix contains non-finite entries")
        if np.abs(v - v.T).max(initial=0.0) > 1e-9:
            raise ValidationError("similarity matrix is not symmetric within 1e-9")
        off = v[~np.eye(v.shape[0], dtype=bool)] if v.shape[0] > 1 else np.empty(0)
        if off.size and off.min() < -1e-12:
            raise ValidationError("similarity entries must be nonnegative")
        if self.kind == "base" and off.size and off.max() > 1.0 + 1e-12:
            raise ValidationError("base similarity entries must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.values.shape[0]


def base_similarity_matrix(samples: Sequence[str], mode: str = "default") -> SimilarityMatrix:
    """Pairwise ROUGE-L F matrix over sampled answers (the base similarity).

    Entry (i, j) is the F score of the ordered pair (sample_i, sample_j);
    the harmonic-mean F makes the matrix exactly symmetric, so only the
    upper triangle is computed. Diagonal stored as 1.0, never consumed.
    """
    n = len(samples)
    if n < 2:
        raise ValidationError(f"need at least 2 samples for a similarity matrix, got {n}")
    toks = [tokenize(s, mode) for s in samples]
    values = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            f = rouge_l(toks[i], toks[j]).f
            values[i, j] = f
            values[j, i] = f
    return SimilarityMatrix(values=values, kind="base")
