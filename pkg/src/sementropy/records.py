"""Data model and streaming JSONL ingestion for question/answer records.

On-disk formats (one JSON object per line):

* dataset file   ``{"id", "question", "reference_answer", "meta"?}``
* samples file   ``{"id", "greedy_answer", "samples": [...], "generation_config"?}``
* labels file    ``{"id", "is_hallucination", "rouge_f", "label_threshold", ...}``
* scores file    ``{"id", "u_snne", "u_qasnne_<variant>"?, "u_dse"?, "tau", "n", ...}``
* results file   ``{"id", "label": {...}, "scores": {...}}`` (joined rows)

Text fields are normalized at load: Unicode NFC plus surrounding-whitespace
trim, no case folding (tokenizers decide case). Empty samples are rejected
rather than skipped, because silently shrinking n would shift entropy
scales that depend on it. Loaders are generators — memory stays bounded by
one record regardless of file length — and every validation failure names
the file and line it came from.
"""

from __future__ import annotations

import json
import logging
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import PairingError, ValidationError

logger = logging.getLogger(__name__)

DATASET_SCHEMAS = ("dataset", "full")
SPLITS = ("in_template", "out_of_template", "external")


def normalize_text(text: str) -> str:
    """Unicode NFC normalization plus surrounding-whitespace trim."""
    return unicodedata.normalize("NFC", text).strip()


@dataclass(frozen=True)
class GenerationConfig:
    """Decoding settings for the two-stage greedy + sampled generation."""

    greedy_temperature: float = 0.1
    sample_temperature: float = 1.0
    n_samples: int = 20
    top_k: int = 50
    top_p: float = 0.9
    prompt_template: str = ""
    model_name: str = ""
    endpoint_url: str = ""

    def __post_init__(self) -> None:
        if self.greedy_temperature <= 0 or self.sample_temperature <= 0:
            raise ValidationError("temperatures must be > 0")
        if self.n_samples < 2:
            raise ValidationError(f"n_samples must be >= 2, got {self.n_samples}")
        if self.top_k < 1:
            raise ValidationError(f"top_k must be >= 1, got {self.top_k}")
        if not (0.0 < self.top_p <= 1.0):
            raise ValidationError(f"top_p must be in (0, 1], got {self.top_p}")

    def to_json_dict(self) -> dict:
        return {
            "greedy_temperature": self.greedy_temperature,
            "sample_temperature": self.sample_temperature,
            "n_samples": self.n_samples,
            "top_k": self.top_k,
            "top_p": self.top_p,
            "prompt_template": self.prompt_template,
            "model_name": self.model_name,
            "endpoint_url": self.endpoint_url,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "GenerationConfig":
        known = {f: obj[f] for f in cls.__dataclass_fields__ if f in obj}
        return cls(**known)


@dataclass(frozen=True)
class QARecord:
    """One question instance, optionally carrying its generations.

    ``greedy_answer`` (one low-temperature generation) and ``samples``
    (n high-temperature generations, order preserved) stay ``None`` until
    sampling has run. Instances are immutable after validation and safe to
    hand to parallel workers.
    """

    id: str
    question: str
    reference_answer: str
    greedy_answer: str | None = None
    samples: tuple[str, ...] | None = None
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "id", normalize_text(str(self.id)))
        object.__setattr__(self, "question", normalize_text(self.question))
        object.__setattr__(self, "reference_answer", normalize_text(self.reference_answer))
        if not self.id:
            raise ValidationError("record id must be nonempty")
        if not self.question:
            raise ValidationError(f"record {self.id}: question must be nonempty")
        if not self.reference_answer:
            raise ValidationError(f"record {self.id}: reference_answer must be nonempty")
        if self.greedy_answer is not None:
            object.__setattr__(self, "greedy_answer", normalize_text(self.greedy_answer))
        if self.samples is not None:
            normed = tuple(normalize_text(s) for s in self.samples)
            object.__setattr__(self, "samples", normed)
            if len(normed) < 2:
                raise ValidationError(
                    f"record {self.id}: needs at least 2 samples, got {len(normed)}"
                )
            for k, s in enumerate(normed):
                if not s:
                    raise ValidationError(
                        f"record {self.id}: sample {k} is empty after normalization"
                    )
        if not isinstance(self.meta, Mapping):
            raise ValidationError(f"record {self.id}: meta must be a mapping")

    @property
    def n(self) -> int:
        return 0 if self.samples is None else len(self.samples)

    def with_generations(self, greedy_answer: str, samples: Sequence[str]) -> "QARecord":
        return QARecord(
            id=self.id,
            question=self.question,
            reference_answer=self.reference_answer,
            greedy_answer=greedy_answer,
            samples=tuple(samples),
            meta=dict(self.meta),
        )

    def to_json_dict(self) -> dict:
        out: dict = {
            "id": self.id,
            "question": self.question,
            "reference_answer": self.reference_answer,
        }
        if self.greedy_answer is not None:
            out["greedy_answer"] = self.greedy_answer
        if self.samples is not None:
            out["samples"] = list(self.samples)
        if self.meta:
            out["meta"] = dict(self.meta)
        return out


@dataclass(frozen=True)
class SampleSet:
    """The generations produced for one record id (samples-file line)."""

    id: str
    greedy_answer: str
    samples: tuple[str, ...]
    generation_config: GenerationConfig | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "id", normalize_text(str(self.id)))
        object.__setattr__(self, "greedy_answer", normalize_text(self.greedy_answer))
        normed = tuple(normalize_text(s) for s in self.samples)
        object.__setattr__(self, "samples", normed)
        if not self.id:
            raise ValidationError("sample set id must be nonempty")
        if len(normed) < 2:
            raise ValidationError(
                f"record {self.id}: needs at least 2 samples, got {len(normed)}"
            )
        for k, s in enumerate(normed):
            if not s:
                raise ValidationError(
                    f"record {self.id}: sample {k} is empty after normalization"
                )

    def to_json_dict(self) -> dict:
        out: dict = {
            "id": self.id,
            "greedy_answer": self.greedy_answer,
            "samples": list(self.samples),
        }
        if self.generation_config is not None:
            out["generation_config"] = self.generation_config.to_json_dict()
        return out


@dataclass(frozen=True)
class DatasetManifest:
    """Sidecar metadata describing one dataset split."""

    name: str
    split: str
    record_count: int
    paired_with: str | None = None
    generation_config: GenerationConfig | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValidationError("manifest name must be nonempty")
        if self.split not in SPLITS:
            raise ValidationError(
                f"manifest split must be one of {SPLITS}, got {self.split!r}"
            )
        if self.record_count < 0:
            raise ValidationError("manifest record_count must be >= 0")

    def to_json_dict(self) -> dict:
        out: dict = {
            "name": self.name,
            "split": self.split,
            "record_count": self.record_count,
        }
        if self.paired_with is not None:
            out["paired_with"] = self.paired_with
        if self.generation_config is not None:
            out["generation_config"] = self.generation_config.to_json_dict()
        return out

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "DatasetManifest":
        gc = obj.get("generation_config")
        return cls(
            name=obj.get("name", ""),
            split=obj.get("split", ""),
            record_count=int(obj.get("record_count", -1)),
            paired_with=obj.get("paired_with"),
            generation_config=GenerationConfig.from_json_dict(gc) if gc else None,
        )


# ---------------------------------------------------------------------------
# Streaming JSONL I/O
# ---------------------------------------------------------------------------


def iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, parsed object) pairs; blank lines are skipped."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: line {lineno}: malformed JSON ({exc.msg})")
            if not isinstance(obj, dict):
                raise ValidationError(f"{path}: line {lineno}: expected a JSON object")
            yield lineno, obj


def _require(obj: Mapping, fields: Sequence[str], path, lineno: int) -> None:
    for name in fields:
        if name not in obj:
            raise ValidationError(f"{path}: line {lineno}: missing required field {name!r}")


def load_dataset(path, schema: str = "dataset") -> Iterator[QARecord]:
    """Stream validated QARecords from a JSONL file.

    ``schema="dataset"`` expects bare question records; ``schema="full"``
    additionally requires ``greedy_answer`` and ``samples`` on every line.
    """
    if schema not in DATASET_SCHEMAS:
        raise ValidationError(f"unknown dataset schema: {schema!r}")
    seen: set[str] = set()
    for lineno, obj in iter_jsonl(path):
        _require(obj, ("id", "question", "reference_answer"), path, lineno)
        if schema == "full":
            _require(obj, ("greedy_answer", "samples"), path, lineno)
        try:
            record = QARecord(
                id=obj["id"],
                question=obj["question"],
                reference_answer=obj["reference_answer"],
                greedy_answer=obj.get("greedy_answer"),
                samples=tuple(obj["samples"]) if obj.get("samples") is not None else None,
                meta=obj.get("meta", {}),
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}: line {lineno}: {exc}")
        if record.id in seen:
            raise ValidationError(f"{path}: line {lineno}: duplicate id {record.id!r}")
        seen.add(record.id)
        yield record


def load_samples_file(path) -> Iterator[SampleSet]:
    """Stream validated SampleSets from a samples JSONL file."""
    seen: set[str] = set()
    for lineno, obj in iter_jsonl(path):
        _require(obj, ("id", "greedy_answer", "samples"), path, lineno)
        gc = obj.get("generation_config")
        try:
            sample_set = SampleSet(
                id=obj["id"],
                greedy_answer=obj["greedy_answer"],
                samples=tuple(obj["samples"]),
                generation_config=GenerationConfig.from_json_dict(gc) if gc else None,
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}: line {lineno}: {exc}")
        if sample_set.id in seen:
            raise ValidationError(f"{path}: line {lineno}: duplicate id {sample_set.id!r}")
        seen.add(sample_set.id)
        yield sample_set


def load_labels_file(path) -> Iterator[dict]:
    """Stream validated hallucination-label rows."""
    seen: set[str] = set()
    for lineno, obj in iter_jsonl(path):
        _require(obj, ("id", "is_hallucination", "rouge_f"), path, lineno)
        if not isinstance(obj["is_hallucination"], bool):
            raise ValidationError(f"{path}: line {lineno}: is_hallucination must be a boolean")
        rouge_f = float(obj["rouge_f"])
        if not (0.0 <= rouge_f <= 1.0):
            raise ValidationError(f"{path}: line {lineno}: rouge_f must be in [0, 1]")
        rid = str(obj["id"])
        if rid in seen:
            raise ValidationError(f"{path}: line {lineno}: duplicate id {rid!r}")
        seen.add(rid)
        yield obj


def load_results_file(path) -> Iterator[dict]:
    """Stream validated uncertainty-score rows (id plus at least one u_* field)."""
    seen: set[str] = set()
    for lineno, obj in iter_jsonl(path):
        _require(obj, ("id",), path, lineno)
        score_fields = [k for k in obj if k.startswith("u_")]
        if not score_fields:
            raise ValidationError(
                f"{path}: line {lineno}: expected at least one uncertainty field (u_*)"
            )
        for name in score_fields:
            value = obj[name]
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValidationError(f"{path}: line {lineno}: {name} must be a number")
        rid = str(obj["id"])
        if rid in seen:
            raise ValidationError(f"{path}: line {lineno}: duplicate id {rid!r}")
        seen.add(rid)
        yield obj


def write_jsonl(path, rows: Iterable) -> int:
    """Write rows (mappings, or objects with to_json_dict) one per line.

    Keys are sorted so identical content always serializes to identical
    bytes; returns the number of lines written.
    """
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            obj = row.to_json_dict() if hasattr(row, "to_json_dict") else row
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
            count += 1
    return count


def attach_samples(records: Iterable[QARecord], sample_sets: Iterable[SampleSet]) -> list[QARecord]:
    """Join dataset records with their generations; ids must match exactly."""
    by_id: dict[str, SampleSet] = {}
    for ss in sample_sets:
        by_id[ss.id] = ss
    out: list[QARecord] = []
    missing: list[str] = []
    for rec in records:
        ss = by_id.pop(rec.id, None)
        if ss is None:
            missing.append(rec.id)
            continue
        out.append(rec.with_generations(ss.greedy_answer, ss.samples))
    if missing or by_id:
        parts = []
        if missing:
            parts.append(f"records without samples: {sorted(missing)}")
        if by_id:
            parts.append(f"samples without records: {sorted(by_id)}")
        raise ValidationError("dataset/samples id mismatch — " + "; ".join(parts))
    return out


# ---------------------------------------------------------------------------
# Joining and pairing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MergeResult:
    """Inner join of label rows and score rows on id."""

    rows: tuple[dict, ...]
    unmatched_records: tuple[str, ...]
    unmatched_scores: tuple[str, ...]


def merge_results(records: Iterable[Mapping], scores: Iterable[Mapping]) -> MergeResult:
    """Inner-join label/record rows with uncertainty-score rows on id.

    Unmatched ids on either side are reported (logged and returned), never
    silently dropped. Duplicate score ids and an empty join are errors.
    """
    score_by_id: dict[str, dict] = {}
    for row in scores:
        rid = str(row["id"])
        if rid in score_by_id:
            raise ValidationError(f"duplicate id {rid!r} in scores")
        score_by_id[rid] = {k: v for k, v in row.items() if k != "id"}

    rows: list[dict] = []
    unmatched_records: list[str] = []
    for row in records:
        rid = str(row["id"])
        score = score_by_id.pop(rid, None)
        if score is None:
            unmatched_records.append(rid)
            continue
        label = {k: v for k, v in row.items() if k != "id"}
        rows.append({"id": rid, "label": label, "scores": score})
    unmatched_scores = sorted(score_by_id)

    if unmatched_records:
        logger.warning("ids without scores (dropped from join): %s", sorted(unmatched_records))
    if unmatched_scores:
        logger.warning("scores without records (dropped from join): %s", unmatched_scores)
    if not rows:
        raise ValidationError("join produced zero rows: no ids in common")
    return MergeResult(
        rows=tuple(rows),
        unmatched_records=tuple(sorted(unmatched_records)),
        unmatched_scores=tuple(unmatched_scores),
    )


def check_pairing(records_a: Sequence[QARecord], records_b: Sequence[QARecord]) -> None:
    """Verify two splits are rewordings of the same items.

    Paired splits must have identical id sets and identical reference
    answers per id (only question wording may differ). The check is
    symmetric in its arguments.
    """
    ids_a = {r.id for r in records_a}
    ids_b = {r.id for r in records_b}
    if len(ids_a) != len(records_a) or len(ids_b) != len(records_b):
        raise ValidationError("pairing check requires unique ids within each split")
    if ids_a != ids_b:
        diff = sorted(ids_a.symmetric_difference(ids_b))
        raise PairingError(f"paired splits have mismatched id sets; symmetric difference: {diff}")
    ref_a = {r.id: r.reference_answer for r in records_a}
    drifted = sorted(
        r.id for r in records_b if r.reference_answer != ref_a[r.id]
    )
    if drifted:
        raise PairingError(f"paired splits disagree on reference answers for ids: {drifted}")
