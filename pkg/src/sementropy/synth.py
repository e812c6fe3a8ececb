"""Deterministic synthetic datasets with planted, analyzable behaviors.

Every record is built from globally unique pseudo-word tokens, so all
pairwise text similarities are exact by construction:

* cluster members are one-token insert-variants of a shared base of L
  tokens - every pair has ROUGE-L f = L/(L+1) exactly;
* "scattered" answers use fresh tokens only - f = 0 against everything,
  including other scattered answers (this exactness matters: any stray
  token overlap would be amplified quadratically by rescaled gating).

Five behavior mixes cover the cases the estimators must separate
(fractions of the n samples, shown for n = 20):

* ``unanimous``            grounded: 20 near-identical on-question answers.
* ``majority_with_noise``  grounded: 18-strong cluster + 2 off-question
                           scattered answers (gating should ignore them).
* ``scattered``            hallucinated: 20 mutually dissimilar on-question
                           answers - classic confabulation.
* ``offtopic_consensus_weak``   hallucinated: 12 agreeing but off-question
                           answers + 8 on-question scattered ones.
* ``offtopic_consensus_strong`` hallucinated: 16 agreeing off-question
                           answers + 4 scattered - enough false consensus
                           to drag the ungated score below the detection
                           threshold, while question-aligned gating
                           suppresses the off-question cluster and keeps
                           the record flagged.

Grounded records get greedy == reference (utility 1); hallucinated records
get token-disjoint greedy vs reference (utility 0), so labels split
exactly as requested.

Alignment sidecar files are written in all three variant input formats
(2-D unit-vector embeddings, NLI logit quadruples, relevance logits) with
small jitter; the aligned/misaligned separation is large against the
softmax inverse temperature, the jitter negligible against it.

Everything is drawn from one seeded generator: same seed, same bytes.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .records import (
    DatasetManifest,
    GenerationConfig,
    QARecord,
    SampleSet,
    write_jsonl,
)

BEHAVIORS = (
    "unanimous",
    "majority_with_noise",
    "scattered",
    "offtopic_consensus_weak",
    "offtopic_consensus_strong",
)

_SCATTER_LEN = 5  # tokens per scattered answer
_CLUSTER_LENS = (12, 15, 19)  # base lengths for grounded clusters
_OFFTOPIC_LEN = 9  # base length for off-question consensus clusters

# Alignment-space geometry: aligned vs misaligned separations are sized so
# that at inverse temperature beta=10 the misaligned softmax mass is
# negligible but never underflows to an exact zero weight.
_EMB_ALIGNED_ANGLE = 0.2
_EMB_MISALIGNED_ANGLE = 1.47
_EMB_ANGLE_JITTER = 0.01
_ENT_LOGIT = 3.0
_ENT_JITTER = 0.002
_CROSSE_LOGIT = 2.0
_CROSSE_JITTER = 0.005


class _TokenFactory:
    """Hands out pseudo-word tokens that never repeat across a dataset."""

    def __init__(self) -> None:
        self._counter = 0

    def fresh(self, count: int) -> list[str]:
        out = []
        for _ in range(count):
            n = self._counter
            self._counter += 1
            letters = []
            for _ in range(5):
                letters.append(chr(ord("a") + n % 26))
                n //= 26
            out.append("x" + "".join(reversed(letters)))
        return out


def _cluster_texts(base: list[str], n_members: int, tf: _TokenFactory, rng) -> list[str]:
    """n one-token insert-variants of base: pairwise f = len(base)/(len(base)+1)."""
    texts = []
    for _ in range(n_members):
        pos = int(rng.integers(0, len(base) + 1))
        filler = tf.fresh(1)[0]
        texts.append(" ".join(base[:pos] + [filler] + base[pos:]))
    return texts


def _scattered_texts(n: int, tf: _TokenFactory) -> list[str]:
    return [" ".join(tf.fresh(_SCATTER_LEN)) for _ in range(n)]


@dataclass
class _Planned:
    record: QARecord
    samples: list[str]
    aligned: list[bool]
    greedy: str


def _plan_record(
    rid: str, behavior: str, n_samples: int, tf: _TokenFactory, rng, split: str
) -> _Planned:
    qtokens = tf.fresh(3)
    question = "what is " + " ".join(qtokens) + "?"
    grounded = behavior in ("unanimous", "majority_with_noise")

    if grounded:
        base = tf.fresh(int(rng.choice(_CLUSTER_LENS)))
        reference = " ".join(base)
        greedy = reference
        if behavior == "unanimous":
            pairs = [(t, True) for t in _cluster_texts(base, n_samples, tf, rng)]
        else:
            n_noise = max(1, round(0.1 * n_samples))
            pairs = [(t, True) for t in _cluster_texts(base, n_samples - n_noise, tf, rng)]
            pairs += [(t, False) for t in _scattered_texts(n_noise, tf)]
    else:
        reference = " ".join(tf.fresh(6))
        greedy = " ".join(tf.fresh(6))
        if behavior == "scattered":
            pairs = [(t, True) for t in _scattered_texts(n_samples, tf)]
        else:
            frac = 0.6 if behavior == "offtopic_consensus_weak" else 0.8
            n_consensus = round(frac * n_samples)
            base = tf.fresh(_OFFTOPIC_LEN)
            pairs = [(t, False) for t in _cluster_texts(base, n_consensus, tf, rng)]
            pairs += [(t, True) for t in _scattered_texts(n_samples - n_consensus, tf)]

    rng.shuffle(pairs)
    samples = [t for t, _ in pairs]
    aligned = [a for _, a in pairs]
    record = QARecord(
        id=rid,
        question=question,
        reference_answer=reference,
        meta={"behavior": behavior, "grounded": grounded, "split": split},
    )
    return _Planned(record=record, samples=samples, aligned=aligned, greedy=greedy)


def _emb_payload(planned: _Planned, rng) -> dict:
    def vec(aligned: bool) -> list[float]:
        angle = _EMB_ALIGNED_ANGLE if aligned else _EMB_MISALIGNED_ANGLE
        angle += rng.normal(0.0, _EMB_ANGLE_JITTER)
        return [math.cos(angle), math.sin(angle)]

    return {
        "id": planned.record.id,
        "variant": "emb",
        "question_embedding": [1.0, 0.0],
        "samples": [{"embedding": vec(a)} for a in planned.aligned],
    }


def _ent_payload(planned: _Planned, rng) -> dict:
    def logits(aligned: bool) -> dict:
        sign = 1.0 if aligned else -1.0
        j = rng.normal(0.0, _ENT_JITTER, size=4)
        return {
            "ef": sign * _ENT_LOGIT + j[0],
            "cf": -sign * _ENT_LOGIT + j[1],
            "eb": sign * _ENT_LOGIT + j[2],
            "cb": -sign * _ENT_LOGIT + j[3],
        }

    return {
        "id": planned.record.id,
        "variant": "ent",
        "samples": [{"nli": logits(a)} for a in planned.aligned],
    }


def _crosse_payload(planned: _Planned, rng) -> dict:
    def rel(aligned: bool) -> float:
        sign = 1.0 if aligned else -1.0
        return sign * _CROSSE_LOGIT + rng.normal(0.0, _CROSSE_JITTER)

    return {
        "id": planned.record.id,
        "variant": "crosse",
        "samples": [{"rel": rel(a)} for a in planned.aligned],
    }


def _behavior_counts(n_grounded: int, n_hallucinated: int) -> list[tuple[str, int]]:
    n_a = round(0.7 * n_grounded)
    n_c = round(0.7 * n_hallucinated)
    n_d_weak = round(0.15 * n_hallucinated)
    return [
        ("unanimous", n_a),
        ("majority_with_noise", n_grounded - n_a),
        ("scattered", n_c),
        ("offtopic_consensus_weak", n_d_weak),
        ("offtopic_consensus_strong", n_hallucinated - n_c - n_d_weak),
    ]


def generate_synthetic(
    out_dir,
    seed: int = 1234,
    n_grounded: int = 100,
    n_hallucinated: int = 100,
    n_samples: int = 20,
    name: str = "synth",
    paired: bool = False,
) -> dict:
    """Write a synthetic dataset (plus optional paraphrase twin) to out_dir.

    Produces dataset.jsonl, samples.jsonl, manifest.json and one alignment
    file per variant; with ``paired=True`` a ``paraphrase/`` subdirectory
    gets a twin with identical ids, references and generations but
    reworded questions, and the two manifests name each other.
    Returns the written paths. Fully deterministic given the seed.
    """
    if n_grounded < 1 or n_hallucinated < 1:
        raise ValidationError("both record classes need a count >= 1")
    if n_samples < 4:
        raise ValidationError("behavior mixes need n_samples >= 4")

    rng = np.random.default_rng(seed)
    tf = _TokenFactory()

    behaviors: list[str] = []
    for behavior, count in _behavior_counts(n_grounded, n_hallucinated):
        behaviors.extend([behavior] * count)
    rng.shuffle(behaviors)

    total = len(behaviors)
    width = max(4, len(str(total)))
    planned: list[_Planned] = []
    for i, behavior in enumerate(behaviors, start=1):
        rid = f"synth-{i:0{width}d}"
        planned.append(_plan_record(rid, behavior, n_samples, tf, rng, "in_template"))

    gen_config = GenerationConfig(
        n_samples=n_samples,
        model_name="synthetic-oracle",
        endpoint_url="synthetic://local",
    )

    def _write_split(dir_path, plans: list[_Planned], split_name: str, split: str, pair_name: str | None):
        os.makedirs(dir_path, exist_ok=True)
        paths = {
            "dataset": os.path.join(dir_path, "dataset.jsonl"),
            "samples": os.path.join(dir_path, "samples.jsonl"),
            "manifest": os.path.join(dir_path, "manifest.json"),
            "alignment_emb": os.path.join(dir_path, "alignment_emb.jsonl"),
            "alignment_ent": os.path.join(dir_path, "alignment_ent.jsonl"),
            "alignment_crosse": os.path.join(dir_path, "alignment_crosse.jsonl"),
        }
        write_jsonl(paths["dataset"], (p.record for p in plans))
        write_jsonl(
            paths["samples"],
            (
                SampleSet(
                    id=p.record.id,
                    greedy_answer=p.greedy,
                    samples=tuple(p.samples),
                    generation_config=gen_config,
                )
                for p in plans
            ),
        )
        write_jsonl(paths["alignment_emb"], (_emb_payload(p, rng) for p in plans))
        write_jsonl(paths["alignment_ent"], (_ent_payload(p, rng) for p in plans))
        write_jsonl(paths["alignment_crosse"], (_crosse_payload(p, rng) for p in plans))
        manifest = DatasetManifest(
            name=split_name,
            split=split,
            record_count=len(plans),
            paired_with=pair_name,
            generation_config=gen_config,
        )
        with open(paths["manifest"], "w", encoding="utf-8") as fh:
            json.dump(manifest.to_json_dict(), fh, ensure_ascii=False, sort_keys=True, indent=2)
            fh.write("\n")
        return paths

    pair_name = f"{name}-paraphrase" if paired else None
    out_paths = {"main": _write_split(out_dir, planned, name, "in_template", pair_name)}

    if paired:
        twin: list[_Planned] = []
        for p in planned:
            qtokens = p.record.question.removeprefix("what is ").rstrip("?").strip()
            twin_record = QARecord(
                id=p.record.id,
                question=f"please describe {qtokens}.",
                reference_answer=p.record.reference_answer,
                meta={**p.record.meta, "split": "out_of_template"},
            )
            twin.append(
                _Planned(record=twin_record, samples=p.samples, aligned=p.aligned, greedy=p.greedy)
            )
        out_paths["paraphrase"] = _write_split(
            os.path.join(out_dir, "paraphrase"), twin, pair_name, "out_of_template", name
        )

    return out_paths
