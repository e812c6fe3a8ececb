"""Hallucination labeling, threshold detection, and the evaluation suite.

Boundary conventions are fixed here and used everywhere:

* ground-truth label: an answer is a hallucination iff the greedy answer's
  ROUGE-L f against the reference is strictly below the label threshold
  (default 0.5); f exactly at the threshold counts as grounded;
* detection: an answer is flagged iff its uncertainty score is >= the
  detection threshold theta_star (default -3.5); a score exactly at
  theta_star is flagged.

AUROC is the Mann-Whitney rank statistic (mid-ranks for ties), which
equals trapezoidal ROC integration; single-class inputs raise instead of
silently returning 0.5. Performance-rejection curves abstain on the
top ceil(r*N) records by uncertainty (stable input order breaks ties) and
report the mean ROUGE-L utility of what remains.

Reports carry the full configuration and a config hash, and serialize to
deterministic JSON (sorted keys, no timestamps), aligned-column text, and
CSV for the curves.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError
from .records import QARecord, merge_results
from .textsim import bleu, rouge_l, tokenize

DEFAULT_LABEL_THRESHOLD = 0.5
DEFAULT_THETA_STAR = -3.5

ESTIMATORS = ("snne", "qa_snne_emb", "qa_snne_ent", "qa_snne_crosse", "dse")
ESTIMATOR_FIELDS = {
    "snne": "u_snne",
    "qa_snne_emb": "u_qasnne_emb",
    "qa_snne_ent": "u_qasnne_ent",
    "qa_snne_crosse": "u_qasnne_crosse",
    "dse": "u_dse",
}

DEFAULT_FRACTIONS = tuple(i / 20 for i in range(20))  # 0.00, 0.05, ..., 0.95


@dataclass(frozen=True)
class HallucinationLabel:
    """Ground-truth label for one record, derived from the greedy answer.

    ``bleu`` is carried alongside rouge_f as a second utility measure so
    downstream reports can aggregate both without re-reading the texts.
    """

    id: str
    is_hallucination: bool
    rouge_f: float
    label_threshold: float = DEFAULT_LABEL_THRESHOLD
    bleu: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.rouge_f <= 1.0):
            raise ValidationError(f"record {self.id}: rouge_f must be in [0, 1]")
        if self.is_hallucination != (self.rouge_f < self.label_threshold):
            raise ValidationError(
                f"record {self.id}: label must equal (rouge_f < label_threshold)"
            )

    def to_json_dict(self) -> dict:
        out: dict = {
            "id": self.id,
            "is_hallucination": self.is_hallucination,
            "rouge_f": self.rouge_f,
            "label_threshold": self.label_threshold,
        }
        if self.bleu is not None:
            out["bleu"] = self.bleu
        return out


@dataclass(frozen=True)
class DetectionOutcome:
    """Thresholded prediction for one record."""

    id: str
    predicted_hallucination: bool
    score: float
    theta_star: float = DEFAULT_THETA_STAR

    def __post_init__(self) -> None:
        if self.predicted_hallucination != (self.score >= self.theta_star):
            raise ValidationError(
                f"record {self.id}: prediction must equal (score >= theta_star)"
            )

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "predicted_hallucination": self.predicted_hallucination,
            "score": self.score,
            "theta_star": self.theta_star,
        }


def label_hallucinations(
    records: Iterable[QARecord],
    label_threshold: float = DEFAULT_LABEL_THRESHOLD,
    tokenizer_mode: str = "default",
    with_bleu: bool = True,
) -> list[HallucinationLabel]:
    """Label each record by comparing its greedy answer against the reference."""
    labels: list[HallucinationLabel] = []
    for rec in records:
        if rec.greedy_answer is None or not rec.greedy_answer:
            raise ValidationError(f"record {rec.id}: greedy answer missing, cannot label")
        cand = tokenize(rec.greedy_answer, mode=tokenizer_mode)
        ref = tokenize(rec.reference_answer, mode=tokenizer_mode)
        f = rouge_l(cand, ref).f
        labels.append(
            HallucinationLabel(
                id=rec.id,
                is_hallucination=f < label_threshold,
                rouge_f=f,
                label_threshold=label_threshold,
                bleu=bleu(cand, ref) if with_bleu else None,
            )
        )
    return labels


def detect(
    scores: Iterable[Mapping],
    estimator: str,
    theta_star: float = DEFAULT_THETA_STAR,
    allow_dse: bool = False,
) -> list[DetectionOutcome]:
    """Threshold one estimator's scores into hallucination predictions.

    DSE is rejected by default: it lives on the [0, ln n] entropy scale,
    where every value exceeds the default theta_star of -3.5, so
    thresholding it there flags everything. Pass ``allow_dse=True``
    (with a threshold chosen for that scale) to override.
    """
    if estimator not in ESTIMATOR_FIELDS:
        raise ValidationError(
            f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}"
        )
    if estimator == "dse" and not allow_dse:
        raise ValidationError(
            "dse scores are nonnegative cluster entropies and are not comparable "
            "to the default detection threshold; pass allow_dse=True with a "
            "threshold chosen for that scale"
        )
    field_name = ESTIMATOR_FIELDS[estimator]
    outcomes: list[DetectionOutcome] = []
    for row in scores:
        if field_name not in row:
            raise ValidationError(
                f"record {row.get('id', '<unknown>')}: estimator {estimator!r} "
                f"absent (missing field {field_name!r})"
            )
        score = float(row[field_name])
        outcomes.append(
            DetectionOutcome(
                id=str(row["id"]),
                predicted_hallucination=score >= theta_star,
                score=score,
                theta_star=theta_star,
            )
        )
    return outcomes


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def auroc(labels: Sequence[bool], scores: Sequence[float]) -> float:
    """Probability a positive outscores a negative (ties count half).

    Mann-Whitney U from mid-ranks; equivalent to the area under the ROC
    curve by trapezoidal integration.
    """
    y = np.asarray(labels, dtype=bool)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape or y.ndim != 1:
        raise ValidationError("labels and scores must be equal-length vectors")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValidationError(
            f"AUROC undefined: need both classes, got {n_pos} positives and {n_neg} negatives"
        )
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def accuracy(
    outcomes: Sequence[DetectionOutcome], labels: Sequence[HallucinationLabel]
) -> float:
    """Fraction of records where the prediction matches the label (joined on id)."""
    truth = {lab.id: lab.is_hallucination for lab in labels}
    if len(truth) != len(labels):
        raise ValidationError("duplicate ids in labels")
    pred_ids = {o.id for o in outcomes}
    if len(pred_ids) != len(outcomes):
        raise ValidationError("duplicate ids in outcomes")
    if pred_ids != set(truth):
        diff = sorted(pred_ids.symmetric_difference(truth))
        raise ValidationError(f"outcome/label id mismatch; symmetric difference: {diff}")
    hits = sum(1 for o in outcomes if o.predicted_hallucination == truth[o.id])
    return hits / len(outcomes)


@dataclass(frozen=True)
class PrcPoint:
    """One row of a performance-rejection curve."""

    rejection_fraction: float
    retained_count: int
    mean_rouge_l: float | None

    def to_json_dict(self) -> dict:
        return {
            "rejection_fraction": self.rejection_fraction,
            "retained_count": self.retained_count,
            "mean_rouge_l": self.mean_rouge_l,
        }


def prc(
    utilities: Sequence[float],
    uncertainties: Sequence[float],
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
) -> tuple[PrcPoint, ...]:
    """Mean retained utility after abstaining on the most-uncertain fraction.

    For each fraction r the top ceil(r*N) records by uncertainty are
    rejected (descending order, ties broken by stable input position) and
    the mean utility of the rest is reported. r=0 is the global mean. When
    everything is rejected the mean is None.
    """
    u = list(map(float, utilities))
    h = list(map(float, uncertainties))
    if len(u) != len(h) or not u:
        raise ValidationError("utilities and uncertainties must be equal-length, nonempty")
    n = len(u)
    # Stable sort on negated uncertainty: equal scores keep input order.
    order = sorted(range(n), key=lambda i: -h[i])
    points: list[PrcPoint] = []
    for r in fractions:
        if not (0.0 <= r < 1.0):
            raise ValidationError(f"rejection fraction must be in [0, 1), got {r}")
        # round() strips float fuzz like 0.05*200 = 10.000000000000002
        # before the ceiling, which would otherwise reject one extra record.
        k = math.ceil(round(r * n, 9))
        # k=0 averages in input order: summation order affects the last ulp,
        # and the zero-rejection point must equal the global mean exactly.
        retained = list(range(n)) if k == 0 else order[k:]
        mean = float(np.mean([u[i] for i in retained])) if retained else None
        points.append(
            PrcPoint(rejection_fraction=r, retained_count=n - k, mean_rouge_l=mean)
        )
    return tuple(points)


def write_prc_csv(path, points: Sequence[PrcPoint]) -> None:
    """Write curve rows as CSV: rejection_fraction, retained_count, mean_rouge_l."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rejection_fraction", "retained_count", "mean_rouge_l"])
        for p in points:
            mean = "" if p.mean_rouge_l is None else f"{p.mean_rouge_l:.6f}"
            writer.writerow([f"{p.rejection_fraction:.2f}", p.retained_count, mean])


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    """Everything one evaluation run produced, with full config provenance."""

    dataset: Mapping
    counts: Mapping
    utility: Mapping
    estimators: Mapping
    prc: Mapping = field(default_factory=dict)
    config: Mapping = field(default_factory=dict)
    config_hash: str = ""
    utility_aggregation: str = "mean_sentence_level"

    def __post_init__(self) -> None:
        c = self.counts
        if c.get("positives", 0) + c.get("negatives", 0) != c.get("records", 0):
            raise ValidationError("report counts must satisfy positives + negatives = records")
        for name, metrics in self.estimators.items():
            a = metrics.get("auroc")
            if a is not None and not (0.0 <= a <= 1.0):
                raise ValidationError(f"estimator {name}: AUROC must be in [0, 1]")

    def to_json_dict(self) -> dict:
        return {
            "dataset": dict(self.dataset),
            "counts": dict(self.counts),
            "utility": dict(self.utility),
            "estimators": {k: dict(v) for k, v in self.estimators.items()},
            "prc": {k: [dict(p) for p in v] for k, v in self.prc.items()},
            "config": dict(self.config),
            "config_hash": self.config_hash,
            "utility_aggregation": self.utility_aggregation,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "EvalReport":
        return cls(
            dataset=obj.get("dataset", {}),
            counts=obj.get("counts", {}),
            utility=obj.get("utility", {}),
            estimators=obj.get("estimators", {}),
            prc=obj.get("prc", {}),
            config=obj.get("config", {}),
            config_hash=obj.get("config_hash", ""),
            utility_aggregation=obj.get("utility_aggregation", "mean_sentence_level"),
        )


def save_report_json(report: EvalReport, path) -> None:
    """Serialize with sorted keys and no timestamps: reruns are byte-identical."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")


def load_report_json(path) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        return EvalReport.from_json_dict(json.load(fh))


def build_report(
    labels: Sequence[HallucinationLabel],
    scores: Sequence[Mapping],
    estimators: Sequence[str] | None = None,
    theta_star: float = DEFAULT_THETA_STAR,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    config: Mapping | None = None,
    config_hash: str = "",
    dataset: Mapping | None = None,
    allow_dse: bool = False,
) -> EvalReport:
    """Join labels with scores and compute the full metric suite.

    ``estimators=None`` evaluates every estimator whose score field appears
    in the first score row. DSE gets AUROC and a curve but no thresholded
    accuracy unless ``allow_dse`` (see :func:`detect`).
    """
    merged = merge_results([lab.to_json_dict() for lab in labels], scores)
    rows = merged.rows
    if estimators is None:
        present = rows[0]["scores"].keys()
        estimators = [e for e in ESTIMATORS if ESTIMATOR_FIELDS[e] in present]
    if not estimators:
        raise ValidationError("no estimators to evaluate")
    for est in estimators:
        if est not in ESTIMATOR_FIELDS:
            raise ValidationError(
                f"unknown estimator {est!r}; expected one of {ESTIMATORS}"
            )

    y = [bool(row["label"]["is_hallucination"]) for row in rows]
    rouge_utils = [float(row["label"]["rouge_f"]) for row in rows]
    bleu_utils = [float(row["label"]["bleu"]) for row in rows if row["label"].get("bleu") is not None]

    est_metrics: dict[str, dict] = {}
    prc_tables: dict[str, list[dict]] = {}
    for est in estimators:
        field_name = ESTIMATOR_FIELDS[est]
        missing = [row["id"] for row in rows if field_name not in row["scores"]]
        if missing:
            raise ValidationError(
                f"estimator {est!r} absent from scores for ids: {sorted(missing)[:5]}"
            )
        s = [float(row["scores"][field_name]) for row in rows]
        metrics: dict = {"auroc": auroc(y, s), "theta_star": theta_star}
        if est != "dse" or allow_dse:
            outcomes = [
                DetectionOutcome(
                    id=row["id"],
                    predicted_hallucination=float(row["scores"][field_name]) >= theta_star,
                    score=float(row["scores"][field_name]),
                    theta_star=theta_star,
                )
                for row in rows
            ]
            label_objs = [
                HallucinationLabel(
                    id=row["id"],
                    is_hallucination=bool(row["label"]["is_hallucination"]),
                    rouge_f=float(row["label"]["rouge_f"]),
                    label_threshold=float(row["label"].get("label_threshold", DEFAULT_LABEL_THRESHOLD)),
                )
                for row in rows
            ]
            metrics["accuracy"] = accuracy(outcomes, label_objs)
        else:
            metrics["accuracy"] = None
        est_metrics[est] = metrics
        prc_tables[est] = [p.to_json_dict() for p in prc(rouge_utils, s, fractions)]

    n_pos = sum(y)
    return EvalReport(
        dataset=dict(dataset or {}),
        counts={"records": len(rows), "positives": n_pos, "negatives": len(rows) - n_pos},
        utility={
            "rouge_l_mean": float(np.mean(rouge_utils)),
            "bleu_mean": float(np.mean(bleu_utils)) if bleu_utils else None,
        },
        estimators=est_metrics,
        prc=prc_tables,
        config=dict(config or {}),
        config_hash=config_hash,
    )


def render_report_text(report: EvalReport) -> str:
    """Aligned-column plain-text rendering of a report."""
    lines: list[str] = []
    ds = report.dataset
    c = report.counts
    lines.append(
        f"dataset: {ds.get('name', '<unnamed>')}"
        f"  split={ds.get('split', '?')}"
        f"  records={c.get('records')}  positives={c.get('positives')}"
        f"  negatives={c.get('negatives')}"
    )
    util_bits = []
    for key in ("rouge_l_mean", "bleu_mean"):
        val = report.utility.get(key)
        if val is not None:
            util_bits.append(f"{key}={val:.4f}")
    lines.append(f"utility ({report.utility_aggregation}): " + "  ".join(util_bits))
    if report.config_hash:
        lines.append(f"config_hash: {report.config_hash}")
    lines.append("")
    name_w = max(len("estimator"), *(len(k) for k in report.estimators))
    lines.append(f"{'estimator'.ljust(name_w)}  {'auroc':>8}  {'accuracy':>8}")
    for name in sorted(report.estimators):
        m = report.estimators[name]
        acc = "-" if m.get("accuracy") is None else f"{m['accuracy']:.4f}"
        lines.append(f"{name.ljust(name_w)}  {m['auroc']:>8.4f}  {acc:>8}")
    for name in sorted(report.prc):
        lines.append("")
        lines.append(f"PRC [{name}] (reject most-uncertain fraction, mean ROUGE-L of rest):")
        lines.append(f"  {'reject':>6}  {'retained':>8}  {'mean_rouge_l':>12}")
        for p in report.prc[name]:
            mean = "-" if p["mean_rouge_l"] is None else f"{p['mean_rouge_l']:.4f}"
            lines.append(
                f"  {p['rejection_fraction']:>6.2f}  {p['retained_count']:>8}  {mean:>12}"
            )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Split comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompareReport:
    """Metric deltas between a paired in-split and out-split report."""

    dataset_in: str
    dataset_out: str
    utility_deltas: Mapping
    estimator_deltas: Mapping
    alerts: tuple[str, ...]
    alert_margin: float

    def to_json_dict(self) -> dict:
        return {
            "dataset_in": self.dataset_in,
            "dataset_out": self.dataset_out,
            "utility_deltas": dict(self.utility_deltas),
            "estimator_deltas": {k: dict(v) for k, v in self.estimator_deltas.items()},
            "alerts": list(self.alerts),
            "alert_margin": self.alert_margin,
        }


def _paired(report_in: EvalReport, report_out: EvalReport) -> bool:
    name_in = report_in.dataset.get("name")
    name_out = report_out.dataset.get("name")
    pair_in = report_in.dataset.get("paired_with")
    pair_out = report_out.dataset.get("paired_with")
    if name_in and pair_out == name_in:
        return True
    if name_out and pair_in == name_out:
        return True
    return pair_in is not None and pair_in == pair_out


def compare_splits(
    report_in: EvalReport,
    report_out: EvalReport,
    alert_margin: float = 0.05,
    allow_unpaired: bool = False,
) -> CompareReport:
    """Per-metric deltas (out minus in) between two paired split reports.

    Higher is better for every compared metric, so a delta below
    ``-alert_margin`` is flagged as a degradation. Reports must come from
    paired datasets (mutual ``paired_with`` naming) unless
    ``allow_unpaired`` is set.
    """
    if not allow_unpaired and not _paired(report_in, report_out):
        raise ValidationError(
            "reports are not from paired datasets (no mutual paired_with naming); "
            "pass allow_unpaired=True to compare anyway"
        )
    alerts: list[str] = []
    utility_deltas: dict[str, float] = {}
    for key in report_in.utility:
        a, b = report_in.utility.get(key), report_out.utility.get(key)
        if a is None or b is None:
            continue
        delta = b - a
        utility_deltas[key] = delta
        if delta < -alert_margin:
            alerts.append(f"utility {key} degraded by {abs(delta):.4f} (out - in = {delta:+.4f})")
    estimator_deltas: dict[str, dict] = {}
    for name in report_in.estimators:
        if name not in report_out.estimators:
            continue
        deltas: dict[str, float] = {}
        for metric in ("auroc", "accuracy"):
            a = report_in.estimators[name].get(metric)
            b = report_out.estimators[name].get(metric)
            if a is None or b is None:
                continue
            delta = b - a
            deltas[metric] = delta
            if delta < -alert_margin:
                alerts.append(
                    f"estimator {name} {metric} degraded by {abs(delta):.4f} "
                    f"(out - in = {delta:+.4f})"
                )
        estimator_deltas[name] = deltas
    return CompareReport(
        dataset_in=str(report_in.dataset.get("name", "<in>")),
        dataset_out=str(report_out.dataset.get("name", "<out>")),
        utility_deltas=utility_deltas,
        estimator_deltas=estimator_deltas,
        alerts=tuple(alerts),
        alert_margin=alert_margin,
    )


def render_compare_text(report: CompareReport) -> str:
    lines = [f"compare: {report.dataset_in} -> {report.dataset_out} (delta = out - in)"]
    for key in sorted(report.utility_deltas):
        lines.append(f"  utility {key}: {report.utility_deltas[key]:+.3f}")
    for name in sorted(report.estimator_deltas):
        for metric in sorted(report.estimator_deltas[name]):
            delta = report.estimator_deltas[name][metric]
            lines.append(f"  {name} {metric}: {delta:+.3f}")
    if report.alerts:
        lines.append(f"alerts (margin {report.alert_margin}):")
        for alert in report.alerts:
            lines.append(f"  ! {alert}")
    else:
        lines.append("alerts: none")
    return "\n".join(lines) + "\n"
