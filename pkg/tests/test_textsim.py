"""Tokenization, LCS/ROUGE-L, BLEU, and similarity-matrix construction."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sementropy.errors import ValidationError
from sementropy.textsim import (
    RougeLScore,
    SimilarityMatrix,
    TokenSeq,
    base_similarity_matrix,
    bleu,
    lcs_len,
    rouge_f,
    rouge_l,
    tokenize,
)

token_lists = st.lists(st.sampled_from(["a", "b", "c", "dd", "ee"]), max_size=12)


class TestTokenize:
    def test_default_lowercases_and_drops_punctuation(self):
        assert tokenize("The cat sat.").tokens == ("the", "cat", "sat")
        assert tokenize("Forceps, scissors; needle!").tokens == ("forceps", "scissors", "needle")

    def test_unicode_punctuation_dropped(self):
        assert tokenize("left…right «quoted»").tokens == ("left", "right", "quoted")

    def test_cased_keeps_case(self):
        assert tokenize("The Cat", mode="cased").tokens == ("The", "Cat")

    def test_empty_input_gives_empty_sequence(self):
        assert tokenize("").tokens == ()
        assert tokenize("  ...  ").tokens == ()

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValidationError):
            tokenize("x", mode="fancy")

    def test_tokenseq_rejects_empty_tokens(self):
        with pytest.raises(ValidationError):
            TokenSeq(tokens=("a", ""), source_len=3)

    def test_len(self):
        assert len(tokenize("one two three")) == 3


class TestLcs:
    def test_worked_example(self):
        assert lcs_len(["the", "cat", "sat"], ["the", "cat"]) == 2

    def test_interleaved(self):
        assert lcs_len(list("abcbdab"), list("bdcaba")) == 4

    def test_disjoint(self):
        assert lcs_len(["a", "b"], ["c", "d"]) == 0

    def test_empty(self):
        assert lcs_len([], ["a"]) == 0
        assert lcs_len([], []) == 0

    @given(token_lists, token_lists)
    @settings(max_examples=60, deadline=None)
    def test_symmetric_and_bounded(self, a, b):
        lcs = lcs_len(a, b)
        assert lcs == lcs_len(b, a)
        assert 0 <= lcs <= min(len(a), len(b))

    @given(token_lists)
    @settings(max_examples=40, deadline=None)
    def test_self_lcs_is_length(self, a):
        assert lcs_len(a, a) == len(a)

    @given(token_lists, token_lists)
    @settings(max_examples=40, deadline=None)
    def test_prefix_is_full_subsequence(self, a, b):
        assert lcs_len(a, a + b) == len(a)


class TestRougeL:
    def test_worked_example(self):
        score = rouge_l(tokenize("The cat sat."), tokenize("the cat"))
        assert score.precision == pytest.approx(2 / 3, abs=1e-12)
        assert score.recall == pytest.approx(1.0, abs=1e-12)
        assert score.f == pytest.approx(0.8, abs=1e-12)

    def test_identical(self):
        assert rouge_l(["a", "b"], ["a", "b"]) == RougeLScore(1.0, 1.0, 1.0)

    def test_disjoint_and_empty_are_zero(self):
        assert rouge_l(["a"], ["b"]).f == 0.0
        assert rouge_l([], ["b"]).f == 0.0
        assert rouge_l(["a"], []).f == 0.0

    def test_rouge_f_convenience(self):
        assert rouge_f("The cat sat.", "the cat") == pytest.approx(0.8, abs=1e-12)

    @given(token_lists, token_lists)
    @settings(max_examples=60, deadline=None)
    def test_f_symmetric_and_bounded(self, a, b):
        fab = rouge_l(a, b).f
        fba = rouge_l(b, a).f
        assert fab == pytest.approx(fba, abs=1e-15)
        assert 0.0 <= fab <= 1.0


class TestBleu:
    def test_identical_is_one(self):
        assert bleu(["a", "b", "c"], ["a", "b", "c"]) == 1.0
        assert bleu(["a"], ["a"]) == 1.0

    def test_disjoint_is_zero(self):
        assert bleu(["a", "b"], ["c", "d"]) == 0.0

    def test_empty_is_zero(self):
        assert bleu([], ["a"]) == 0.0
        assert bleu(["a"], []) == 0.0

    def test_worked_example_frozen(self):
        cand = tokenize("the quick brown fox jumps over the dog")
        ref = tokenize("the quick brown fox jumped over the lazy dog")
        assert bleu(cand, ref) == pytest.approx(0.46656343243412907, abs=1e-12)

    def test_brevity_penalty_applies_when_candidate_shorter(self):
        ref = ["a", "b", "c", "d", "e", "f"]
        short = bleu(["a", "b", "c"], ref)
        full = bleu(ref, ref)
        assert short < full
        # the shorter candidate carries exp(1 - r/c) = exp(1 - 2) at minimum
        assert short <= math.exp(1 - 6 / 3) + 1e-9

    @given(st.lists(st.sampled_from(["a", "b", "c"]), min_size=1, max_size=8))
    @settings(max_examples=40, deadline=None)
    def test_self_bleu_is_one(self, toks):
        assert bleu(toks, toks) == pytest.approx(1.0, abs=1e-12)


class TestSimilarityMatrix:
    def test_base_matrix_shape_and_symmetry(self):
        m = base_similarity_matrix(["the cat", "the cat sat", "zebra stripe"])
        assert m.n == 3
        assert m.kind == "base"
        np.testing.assert_array_equal(m.values, m.values.T)
        np.testing.assert_array_equal(np.diag(m.values), np.ones(3))
        assert m.values[0, 1] == pytest.approx(0.8, abs=1e-12)
        assert m.values[0, 2] == 0.0

    def test_needs_two_samples(self):
        with pytest.raises(ValidationError):
            base_similarity_matrix(["only one"])

    def test_rejects_non_square(self):
        with pytest.raises(ValidationError):
            SimilarityMatrix(np.ones((2, 3)), kind="base")

    def test_rejects_asymmetric(self):
        with pytest.raises(ValidationError):
            SimilarityMatrix(np.array([[1.0, 0.5], [0.2, 1.0]]), kind="base")

    def test_rejects_negative_entries(self):
        with pytest.raises(ValidationError):
            SimilarityMatrix(np.array([[1.0, -0.5], [-0.5, 1.0]]), kind="base")

    def test_rejects_base_entries_above_one(self):
        with pytest.raises(ValidationError):
            SimilarityMatrix(np.array([[1.0, 1.5], [1.5, 1.0]]), kind="base")

    def test_gated_kind_allows_entries_above_one(self):
        m = SimilarityMatrix(np.array([[1.0, 1.5], [1.5, 1.0]]), kind="gated")
        assert m.n == 2

    def test_rejects_nan(self):
        with pytest.raises(ValidationError):
            SimilarityMatrix(np.array([[1.0, np.nan], [np.nan, 1.0]]), kind="base")

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValidationError):
            SimilarityMatrix(np.eye(2), kind="mystery")

    def test_tokenizer_mode_changes_matrix(self):
        cased = base_similarity_matrix(["The cat", "the cat"], mode="cased")
        default = base_similarity_matrix(["The cat", "the cat"], mode="default")
        assert cased.values[0, 1] < 1.0
        assert default.values[0, 1] == 1.0
