"""Nearest-neighbor entropy, gated entropy, clustering, and the discrete baseline."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sementropy.alignment import AlignmentScores, gate_similarity, relevance_weights
from sementropy.entropy import (
    SemanticClustering,
    UncertaintyResult,
    cluster_semantic,
    dse,
    qa_snne,
    score_record,
    snne,
)
from sementropy.errors import ValidationError
from sementropy.textsim import SimilarityMatrix, base_similarity_matrix


def _sym_matrix(rng, n):
    vals = rng.uniform(0.0, 1.0, (n, n))
    vals = (vals + vals.T) / 2.0
    np.fill_diagonal(vals, 1.0)
    return SimilarityMatrix(vals, kind="base")


class TestSnne:
    def test_identical_samples_closed_form(self):
        m = base_similarity_matrix(["the same answer"] * 20)
        assert snne(m) == pytest.approx(-(1 + math.log(19)), abs=1e-9)

    def test_dissimilar_samples_closed_form(self):
        m = base_similarity_matrix([f"tok{i}a tok{i}b" for i in range(20)])
        assert snne(m) == pytest.approx(-math.log(19), abs=1e-9)

    def test_two_samples(self):
        m = base_similarity_matrix(["aa bb", "aa bb"])
        # each row: logsumexp over the single off-diagonal entry 1.0
        assert snne(m) == pytest.approx(-1.0, abs=1e-12)

    def test_tau_scales_similarities(self):
        m = base_similarity_matrix(["aa bb", "aa bb"])
        assert snne(m, tau=2.0) == pytest.approx(-0.5, abs=1e-12)

    def test_tau_must_be_positive(self):
        m = base_similarity_matrix(["aa", "bb"])
        with pytest.raises(ValidationError):
            snne(m, tau=0.0)
        with pytest.raises(ValidationError):
            snne(m, tau=-1.0)

    def test_needs_two_samples(self):
        with pytest.raises(ValidationError):
            snne(SimilarityMatrix(np.ones((1, 1)), kind="base"))

    def test_diagonal_never_contributes(self):
        off = np.array([[0.0, 0.4], [0.4, 0.0]])
        with_zero_diag = SimilarityMatrix(off, kind="gated")
        with_big_diag = SimilarityMatrix(off + np.eye(2) * 9.0, kind="gated")
        assert snne(with_zero_diag) == snne(with_big_diag)

    @given(
        st.lists(st.sampled_from(["aa bb cc", "aa bb", "zz yy", "qq rr ss"]), min_size=2, max_size=8),
        st.integers(min_value=0, max_value=2**31 - 1),
    )
    @settings(max_examples=40, deadline=None)
    def test_permutation_invariance(self, samples, seed):
        rng = np.random.default_rng(seed)
        perm = list(rng.permutation(len(samples)))
        shuffled = [samples[i] for i in perm]
        a = snne(base_similarity_matrix(samples))
        b = snne(base_similarity_matrix(shuffled))
        assert a == pytest.approx(b, abs=1e-12)


class TestQaSnne:
    def test_uniform_alignment_with_rescaled_weights_matches_snne(self):
        rng = np.random.default_rng(7)
        s = _sym_matrix(rng, 6)
        scores = AlignmentScores.from_alpha("emb", [0.4] * 6, beta=10.0)
        assert qa_snne(s, scores, weight_scale="softmax_times_n") == snne(s)

    def test_plain_softmax_never_decreases_entropy(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(2, 12))
            s = _sym_matrix(rng, n)
            scores = AlignmentScores.from_alpha("emb", rng.normal(size=n), beta=10.0)
            assert qa_snne(s, scores, weight_scale="softmax") >= snne(s)

    def test_gating_suppresses_offtopic_support(self):
        # two identical on-question answers + two identical off-question answers
        samples = ["alpha beta gamma", "alpha beta gamma", "junk words here", "junk words here"]
        s = base_similarity_matrix(samples)
        scores = AlignmentScores.from_alpha("emb", [1.0, 1.0, -1.0, -1.0], beta=10.0)
        gated = gate_similarity(s, scores.weights, weight_scale="softmax_times_n")
        # off-question mutual support (entry between samples 2 and 3) is crushed
        assert s.values[2, 3] == 1.0
        assert gated.values[2, 3] < 1e-6
        # on-question mutual support survives rescaling (weights ~ n/2 each)
        assert gated.values[0, 1] > 3.0


class TestClustering:
    def test_rouge_threshold_worked_example(self):
        c = cluster_semantic(["the cat", "the cat sat", "zebra"])
        assert c.assignments == (0, 0, 1)
        assert c.n_clusters == 2
        assert list(c.sizes()) == [2, 1]

    def test_threshold_boundary_joins(self):
        # f("a", "a b c") = 0.5 exactly; >= threshold joins the cluster
        c = cluster_semantic(["a", "a b c"], threshold=0.5)
        assert c.assignments == (0, 0)

    def test_first_representative_rule(self):
        # "b c" matches rep "a b c" (f=0.8); "a" matches rep at exactly 0.5
        c = cluster_semantic(["a b c", "b c", "a"], threshold=0.5)
        assert c.assignments == (0, 0, 0)

    def test_empty_samples_rejected(self):
        with pytest.raises(ValidationError):
            cluster_semantic([])

    def test_unknown_method(self):
        with pytest.raises(ValidationError):
            cluster_semantic(["a", "b"], method="kmeans")

    def test_entailment_requires_backend(self):
        with pytest.raises(ValidationError, match="backend"):
            cluster_semantic(["a", "b"], method="entailment_bidirectional")

    def test_entailment_clustering_with_backend(self):
        class EqualityNli:
            def nli(self, pairs):
                out = []
                for premise, hypothesis in pairs:
                    entail = 2.0 if premise == hypothesis else -2.0
                    out.append({"entail": entail, "neutral": 0.0, "contra": -entail})
                return out

        c = cluster_semantic(
            ["same answer", "same answer", "different"],
            method="entailment_bidirectional",
            nli_backend=EqualityNli(),
        )
        assert c.assignments == (0, 0, 1)
        assert c.method == "entailment_bidirectional"

    def test_assignment_contiguity_enforced(self):
        with pytest.raises(ValidationError):
            SemanticClustering(assignments=(0, 2), method="rouge_threshold")
        with pytest.raises(ValidationError):
            SemanticClustering(assignments=(1, 0), method="rouge_threshold")


class TestDse:
    def test_single_cluster_is_zero(self):
        c = SemanticClustering(assignments=(0,) * 5, method="rouge_threshold")
        assert dse(c) == 0.0

    def test_equal_clusters_log_k(self):
        for k in (2, 3, 5):
            assignments = tuple(i for i in range(k) for _ in range(4))
            # reorder to keep first-appearance contiguity
            c = SemanticClustering(assignments=assignments, method="rouge_threshold")
            assert dse(c) == pytest.approx(math.log(k), abs=1e-12)

    def test_three_singletons(self):
        c = cluster_semantic(["aa bb", "cc dd", "ee ff"])
        assert dse(c) == pytest.approx(math.log(3), abs=1e-12)

    def test_depends_only_on_sizes(self):
        a = SemanticClustering(assignments=(0, 0, 0, 1, 2), method="rouge_threshold")
        b = SemanticClustering(assignments=(0, 1, 1, 1, 2), method="rouge_threshold")
        c = SemanticClustering(assignments=(0, 1, 2, 2, 2), method="rouge_threshold")
        assert dse(a) == pytest.approx(dse(b), abs=1e-15)
        assert dse(b) == pytest.approx(dse(c), abs=1e-15)


class TestScoreRecord:
    def test_all_estimators(self):
        samples = ["the answer", "the answer", "something else entirely"]
        aligns = {"emb": AlignmentScores.from_alpha("emb", [0.9, 0.9, 0.1], beta=10.0)}
        result = score_record("r1", samples, alignments=aligns, with_dse=True)
        assert result.id == "r1"
        assert result.n == 3
        assert "emb" in result.u_qasnne
        assert result.u_dse is not None
        d = result.to_json_dict()
        assert set(d) >= {"id", "u_snne", "u_qasnne_emb", "u_dse", "tau", "n"}

    def test_alignment_length_mismatch(self):
        aligns = {"emb": AlignmentScores.from_alpha("emb", [0.9, 0.1], beta=10.0)}
        with pytest.raises(ValidationError, match="2 entries"):
            score_record("r1", ["a", "b", "c"], alignments=aligns)

    def test_config_hash_passthrough(self):
        result = score_record("r1", ["aa", "bb"], config_hash="abc123def456")
        assert result.to_json_dict()["config_hash"] == "abc123def456"
