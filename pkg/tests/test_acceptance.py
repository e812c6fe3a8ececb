"""Acceptance gate: one test per shipping criterion, run in order.

Each test prints a single PASS/FAIL line (with the measured values) to the
real stdout so the gate's verdict is visible even under pytest capture.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from sementropy.alignment import (
    VARIANTS,
    AlignmentScores,
    PrecomputedAlignments,
    gate_similarity,
    relevance_weights,
)
from sementropy.entropy import SemanticClustering, cluster_semantic, dse, qa_snne, score_record, snne
from sementropy.evaluation import (
    EvalReport,
    accuracy,
    auroc,
    compare_splits,
    detect,
    label_hallucinations,
    prc,
)
from sementropy.records import GenerationConfig, attach_samples, load_dataset, load_samples_file
from sementropy.sampling import RetryPolicy, SamplingJob, run_sampling
from sementropy.synth import generate_synthetic
from sementropy.textsim import SimilarityMatrix, base_similarity_matrix, rouge_l


@pytest.fixture()
def announce(capsys):
    """Print one PASS/FAIL line per criterion through the capture layer."""

    def _announce(num: int, name: str, passed: bool, detail: str) -> None:
        status = "PASS" if passed else "FAIL"
        with capsys.disabled():
            print(f"[{status}] acceptance {num:>2} {name}: {detail}", flush=True)

    return _announce


def _random_base_matrix(rng, n: int) -> SimilarityMatrix:
    a = rng.random((n, n))
    s = (a + a.T) / 2.0
    np.fill_diagonal(s, 1.0)
    return SimilarityMatrix(s, kind="base")


# --- 1 ----------------------------------------------------------------------


def test_closed_form_entropy_values(announce):
    t0 = time.perf_counter()
    n = 20
    identical = base_similarity_matrix(["the aorta carries blood"] * n)
    u_same = snne(identical, tau=1.0)
    expected_same = -(1.0 + math.log(n - 1))

    disjoint_texts = [f"tok{3 * i} tok{3 * i + 1} tok{3 * i + 2}" for i in range(n)]
    dissimilar = base_similarity_matrix(disjoint_texts)
    u_diff = snne(dissimilar, tau=1.0)
    expected_diff = -math.log(n - 1)
    elapsed = time.perf_counter() - t0

    ok = (
        abs(u_same - expected_same) <= 1e-9
        and abs(u_diff - expected_diff) <= 1e-9
        and not (u_same >= -3.5)  # consensus scores below the threshold
        and (u_diff >= -3.5)  # dissent is flagged
        and elapsed < 1.0
    )
    announce(
        1,
        "closed-form consensus/dissent scores",
        ok,
        f"identical={u_same:.12f} vs {expected_same:.12f}, "
        f"dissimilar={u_diff:.12f} vs {expected_diff:.12f}, "
        f"threshold -3.5 separates, {elapsed:.3f}s",
    )
    assert ok


# --- 2 ----------------------------------------------------------------------


def test_gating_identity_with_bypass_weights(announce):
    rng = np.random.default_rng(20240817)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 21))
        s = _random_base_matrix(rng, n)
        bypassed = gate_similarity(s, np.ones(n), weight_scale="softmax")
        worst = max(worst, abs(snne(bypassed) - snne(s)))
    ok = worst <= 1e-12
    announce(2, "bypass weights leave the score unchanged", ok, f"max |diff| = {worst:.3e} over 1000 matrices")
    assert ok


# --- 3 ----------------------------------------------------------------------


def test_gating_contraction_with_softmax_weights(announce):
    rng = np.random.default_rng(20240817)  # same matrices as the identity check
    min_gap = float("inf")
    for _ in range(1000):
        n = int(rng.integers(2, 21))
        s = _random_base_matrix(rng, n)
        align = AlignmentScores.from_alpha("emb", rng.normal(size=n), beta=10.0)
        gap = qa_snne(s, align, weight_scale="softmax") - snne(s)
        min_gap = min(min_gap, gap)
    ok = min_gap >= 0.0
    announce(3, "softmax gating never lowers the score", ok, f"min gap = {min_gap:.3e} over 1000 matrices")
    assert ok


# --- 4 ----------------------------------------------------------------------


def test_softmax_weight_properties(announce):
    rng = np.random.default_rng(4)
    worst_shift = 0.0
    worst_sum = 0.0
    monotone = True
    uniform_exact = True
    for _ in range(100):
        n = int(rng.integers(2, 31))
        alpha = rng.normal(size=n) * rng.uniform(0.5, 3.0)
        beta = float(rng.uniform(0.0, 20.0))
        w = relevance_weights(alpha, beta)
        worst_sum = max(worst_sum, abs(w.sum() - 1.0))
        shift = float(rng.uniform(-50.0, 50.0))
        worst_shift = max(worst_shift, np.abs(relevance_weights(alpha + shift, beta) - w).max())
        uniform_exact &= bool(np.all(relevance_weights(alpha, 0.0) == 1.0 / n))
        peaks = [relevance_weights(alpha, b).max() for b in (0.0, 1.0, 2.0, 5.0, 10.0, 20.0)]
        monotone &= all(b2 >= b1 - 1e-12 for b1, b2 in zip(peaks, peaks[1:]))
    ok = worst_shift <= 1e-12 and worst_sum <= 1e-9 and uniform_exact and monotone
    announce(
        4,
        "softmax weight properties",
        ok,
        f"shift dev {worst_shift:.2e} (<=1e-12), sum dev {worst_sum:.2e} (<=1e-9), "
        f"beta=0 uniform exact: {uniform_exact}, peak monotone in beta: {monotone}",
    )
    assert ok


# --- 5 ----------------------------------------------------------------------


def test_rouge_matches_exhaustive_subsequence_oracle(announce):
    t0 = time.perf_counter()
    symbols = ("a", "b", "c")
    seqs = []
    for length in range(0, 7):
        seqs.extend(itertools.product(symbols, repeat=length))

    subseq_sets = []
    for s in seqs:
        length = len(s)
        subs = set()
        for mask in range(1 << length):
            subs.add(tuple(s[i] for i in range(length) if mask >> i & 1))
        subseq_sets.append(frozenset(subs))

    checked = 0
    mismatches = 0
    for i, a in enumerate(seqs):
        sa = subseq_sets[i]
        la = len(a)
        for j, b in enumerate(seqs):
            lb = len(b)
            lcs = max(map(len, sa & subseq_sets[j]))
            if la == 0 or lb == 0 or lcs == 0:
                expected = (0.0, 0.0, 0.0)
            else:
                p = lcs / la
                r = lcs / lb
                expected = (p, r, 2.0 * p * r / (p + r))
            got = rouge_l(a, b)
            if (got.precision, got.recall, got.f) != expected:
                mismatches += 1
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30.0
    announce(
        5,
        "overlap score equals subsequence oracle",
        ok,
        f"{checked} ordered pairs, {mismatches} mismatches, {elapsed:.1f}s (<30s)",
    )
    assert ok


# --- 6 ----------------------------------------------------------------------


def test_auroc_matches_brute_force_counting(announce):
    rng = np.random.default_rng(6)
    worst = 0.0
    total_ties = 0
    worst_invariance = 0.0
    for _ in range(500):
        n = int(rng.integers(2, 51))
        labels = rng.random(n) < rng.uniform(0.2, 0.8)
        labels[int(rng.integers(n))] = True
        labels[int(rng.integers(n))] = False
        if labels.all() or not labels.any():
            labels[0] = not labels[0]
        scores = rng.integers(0, 6, size=n).astype(float)  # small grid forces ties

        pos, neg = scores[labels], scores[~labels]
        wins = float((pos[:, None] > neg[None, :]).sum())
        ties = float((pos[:, None] == neg[None, :]).sum())
        total_ties += int(ties)
        expected = (wins + 0.5 * ties) / (len(pos) * len(neg))

        got = auroc(labels, scores)
        worst = max(worst, abs(got - expected))
        worst_invariance = max(
            worst_invariance,
            abs(auroc(labels, np.exp(scores)) - got),
            abs(auroc(labels, 3.0 * scores + 11.0) - got),
        )
    ok = worst <= 1e-12 and worst_invariance <= 1e-12 and total_ties > 0
    announce(
        6,
        "rank AUROC equals pairwise counting",
        ok,
        f"max |diff| = {worst:.3e} over 500 sets ({total_ties} tied pairs), "
        f"exp/affine invariance dev {worst_invariance:.3e}",
    )
    assert ok


# --- 7 ----------------------------------------------------------------------


def test_cluster_entropy_closed_forms(announce):
    single = dse(SemanticClustering(assignments=(0,) * 20, method="rouge_threshold", threshold=0.5))
    worst_equal = 0.0
    for k in (2, 4, 5, 10):
        assignments = tuple(i // (20 // k) for i in range(20))
        worst_equal = max(
            worst_equal,
            abs(
                dse(SemanticClustering(assignments=assignments, method="rouge_threshold", threshold=0.5))
                - math.log(k)
            ),
        )
    # Same sizes, different member order: the entropy may not move.
    interleaved = dse(
        SemanticClustering(assignments=(0, 1, 2, 3) * 5, method="rouge_threshold", threshold=0.5)
    )
    blocked = dse(
        SemanticClustering(assignments=tuple(i // 5 for i in range(20)), method="rouge_threshold", threshold=0.5)
    )
    texts = ["alpha beta gamma"] * 3 + ["delta epsilon zeta"] * 3 + ["eta theta iota"] * 3
    direct = dse(cluster_semantic(texts))
    shuffled = dse(cluster_semantic(texts[::-1]))

    ok = (
        single == 0.0
        and worst_equal <= 1e-12
        and interleaved == blocked
        and abs(direct - math.log(3)) <= 1e-12
        and shuffled == direct
    )
    announce(
        7,
        "cluster entropy closed forms",
        ok,
        f"1 cluster = {single}, k-equal dev {worst_equal:.2e} (<=1e-12), "
        f"size-permutation invariant: {interleaved == blocked and shuffled == direct}",
    )
    assert ok


# --- 8 and 9 share one synthetic run ----------------------------------------


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    t0 = time.perf_counter()
    out_dir = tmp_path_factory.mktemp("acceptance_synth")
    paths = generate_synthetic(
        out_dir, seed=1234, n_grounded=100, n_hallucinated=100, n_samples=20, name="synth"
    )["main"]
    records = attach_samples(
        load_dataset(paths["dataset"], schema="dataset"),
        load_samples_file(paths["samples"]),
    )
    labels = label_hallucinations(records)
    precomputed = {v: PrecomputedAlignments(paths[f"alignment_{v}"]) for v in VARIANTS}
    rows = []
    for rec in records:
        aligns = {
            v: AlignmentScores.from_alpha(v, precomputed[v].alphas_for(rec.id, v, rec.n))
            for v in VARIANTS
        }
        rows.append(
            score_record(
                record_id=rec.id,
                samples=rec.samples,
                alignments=aligns,
                weight_scale="softmax_times_n",
                with_dse=True,
            ).to_json_dict()
        )
    elapsed = time.perf_counter() - t0
    return labels, rows, elapsed


def test_synthetic_end_to_end_discrimination(synthetic_run, announce):
    labels, rows, elapsed = synthetic_run
    y = [lab.is_hallucination for lab in labels]
    details = []
    ok = elapsed < 60.0
    for est, field in (
        ("snne", "u_snne"),
        ("qa_snne_emb", "u_qasnne_emb"),
        ("qa_snne_ent", "u_qasnne_ent"),
        ("qa_snne_crosse", "u_qasnne_crosse"),
    ):
        scores = [row[field] for row in rows]
        est_auroc = auroc(y, scores)
        outcomes = detect(({"id": r["id"], field: r[field]} for r in rows), est)
        est_acc = accuracy(outcomes, labels)
        details.append(f"{est} auroc={est_auroc:.3f} acc={est_acc:.3f}")
        ok = ok and est_auroc >= 0.95 and est_acc >= 0.90
    dse_auroc = auroc(y, [row["u_dse"] for row in rows])
    details.append(f"dse auroc={dse_auroc:.3f}")
    ok = ok and dse_auroc >= 0.90
    announce(
        8,
        "synthetic 200-record discrimination",
        ok,
        "; ".join(details) + f"; {elapsed:.1f}s (<60s), no network",
    )
    assert ok


def test_rejection_curve_sanity(synthetic_run, announce):
    labels, rows, _ = synthetic_run
    utilities = [lab.rouge_f for lab in labels]
    uncertainties = [row["u_snne"] for row in rows]
    points = prc(utilities, uncertainties)
    means = [p.mean_rouge_l for p in points if p.mean_rouge_l is not None]
    worst_step = min(b - a for a, b in zip(means, means[1:]))
    zero_exact = points[0].mean_rouge_l == float(np.mean(utilities))
    ok = worst_step >= -0.01 and zero_exact
    announce(
        9,
        "rejection curve sanity",
        ok,
        f"worst step {worst_step:+.4f} (>=-0.01), r=0 equals global mean exactly: {zero_exact}",
    )
    assert ok


# --- 10 -----------------------------------------------------------------------


def test_compare_reproduces_known_split_deltas(announce):
    def report(name, paired_with, bleu_mean, auroc_value):
        return EvalReport(
            dataset={"name": name, "split": "in_template", "paired_with": paired_with},
            counts={"records": 40, "positives": 20, "negatives": 20},
            utility={"rouge_l_mean": 0.5, "bleu_mean": bleu_mean},
            estimators={"snne": {"auroc": auroc_value, "accuracy": 0.9}},
        )

    template = report("template", "paraphrase", 0.620, 0.798)
    paraphrase = report("paraphrase", "template", 0.373, 0.816)
    cmp = compare_splits(template, paraphrase)
    bleu_delta = cmp.utility_deltas["bleu_mean"]
    auroc_delta = cmp.estimator_deltas["snne"]["auroc"]
    ok = (
        bleu_delta == 0.373 - 0.620
        and auroc_delta == 0.816 - 0.798
        and abs(bleu_delta - (-0.247)) <= 1e-12
        and abs(auroc_delta - 0.018) <= 1e-12
    )
    announce(
        10,
        "split comparison deltas",
        ok,
        f"bleu_mean delta {bleu_delta:+.6f} (target -0.247), snne auroc delta {auroc_delta:+.6f} (target +0.018)",
    )
    assert ok


# --- 11 -----------------------------------------------------------------------


def test_sampler_client_contract(chat_stub, tmp_path, announce):
    state, base_url = chat_stub
    dataset = tmp_path / "dataset.jsonl"
    with open(dataset, "w", encoding="utf-8") as fh:
        for i in range(10):
            fh.write(
                json.dumps(
                    {"id": f"r{i}", "question": f"question {i}", "reference_answer": f"ref {i}"}
                )
                + "\n"
            )
    state.fail_plan["question 3"] = 2  # two 500s, then healthy

    job = SamplingJob(
        dataset_path=str(dataset),
        output_path=str(tmp_path / "samples.jsonl"),
        generation_config=GenerationConfig(
            n_samples=20, endpoint_url=base_url, model_name="stub-model"
        ),
        concurrency=4,
        retry=RetryPolicy(max_attempts=3, backoff_base=0.0),
    )
    summary = run_sampling(job)
    lines = [json.loads(l) for l in open(job.output_path, encoding="utf-8")]
    generations = sum(1 + len(l["samples"]) for l in lines)
    first_bytes = open(job.output_path, "rb").read()

    rerun = run_sampling(job)
    same_bytes = open(job.output_path, "rb").read() == first_bytes

    ok = (
        summary.failures == []
        and len(lines) == 10
        and generations == 10 * 21
        and summary.attempts.get("r3") == 3
        and rerun.requests_sent == 0
        and rerun.skipped == 10
        and same_bytes
    )
    announce(
        11,
        "sampler client contract",
        ok,
        f"10x(1+20)={generations} generations, retried record attempts="
        f"{summary.attempts.get('r3')}, rerun requests={rerun.requests_sent}, "
        f"rerun byte-identical: {same_bytes}",
    )
    assert ok
